"""Template extraction and batch grouping."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Hashable, Literal, Sequence

from beartype import beartype

from ..errors import BindingError, QuerySyntaxError
from .catalog import Catalog
from .parser import bind, parse_query
from .query import Atom, Placeholder, PredicateNF, QuerySpec, Value

logger = logging.getLogger(__name__)

GroupingPolicy = Literal["per-template", "global"]

GLOBAL_TEMPLATE = "*"


@dataclass(frozen=True)
class BatchMember:
    query_id: int
    spec: QuerySpec
    source_id: Hashable


@dataclass(frozen=True)
class QueryBatch:
    batch_id: int
    members: tuple[BatchMember, ...]
    template_id: str

    def __post_init__(self) -> None:
        ids = [m.query_id for m in self.members]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"batch {self.batch_id} query ids must be dense 1..n, got {ids}")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def query_ids(self) -> tuple[int, ...]:
        return tuple(m.query_id for m in self.members)

    def member(self, query_id: int) -> BatchMember:
        if not 1 <= query_id <= len(self.members):
            raise KeyError(f"query {query_id} is not a member of batch {self.batch_id}")
        return self.members[query_id - 1]

    def spec(self, query_id: int) -> QuerySpec:
        return self.member(query_id).spec


@beartype
def extract_template(q: QuerySpec) -> tuple[str, tuple[Value, ...]]:
    """Strip predicate constants into placeholders.

    Returns:
        (template_id, bindings) where template_id is a structural hash of the stripped
        query and bindings lists the removed constants in order of appearance. An atom
        repeated across disjuncts contributes its constants once.
    """
    bindings: list[Value] = []
    stripped_atoms: dict[Atom, Atom] = {}

    def strip(atom: Atom) -> Atom:
        if atom not in stripped_atoms:
            start = len(bindings)
            bindings.extend(atom.values)
            placeholders = tuple(Placeholder(start + i) for i in range(len(atom.values)))
            stripped_atoms[atom] = Atom(atom.column, atom.op, placeholders)
        return stripped_atoms[atom]

    stripped = QuerySpec(
        base_relations=q.base_relations,
        join_edges=q.join_edges,
        predicate=PredicateNF(tuple(tuple(strip(a) for a in conj) for conj in q.predicate.disjuncts)),
        projections=q.projections,
        grouping=q.grouping,
        ordering=q.ordering,
        limit=q.limit,
    )
    template_id = hashlib.sha1(repr(stripped).encode("utf-8")).hexdigest()[:16]
    return template_id, tuple(bindings)


@beartype
def group_batch(
        queries: Sequence[tuple[Hashable, QuerySpec]],
        policy: GroupingPolicy,
        max_size: int,
        first_batch_id: int = 0,
) -> tuple[list[QueryBatch], dict[Hashable, tuple[int, int]]]:
    """Group queries into batches.

    Args:
        queries: (original id, QuerySpec) pairs in arrival order.
        policy: "per-template" partitions by template id (in order of first appearance)
            then chunks; "global" chunks the whole stream.
        max_size: maximum batch size, at least 1.
        first_batch_id: id given to the first batch.

    Returns:
        The batches and a mapping original id -> (batch id, query id).
    """
    if max_size < 1:
        raise ValueError(f"max_size must be at least 1, got {max_size}")
    seen: set[Hashable] = set()
    for source_id, _ in queries:
        if source_id in seen:
            raise ValueError(f"duplicate query id {source_id!r}")
        seen.add(source_id)

    partitions: dict[str, list[tuple[Hashable, QuerySpec]]] = {}
    match policy:
        case "per-template":
            for source_id, spec in queries:
                template_id, _ = extract_template(spec)
                partitions.setdefault(template_id, []).append((source_id, spec))
        case "global":
            partitions[GLOBAL_TEMPLATE] = list(queries)
        case _:
            raise ValueError(f"Unknown grouping policy: {policy}")

    batches: list[QueryBatch] = []
    mapping: dict[Hashable, tuple[int, int]] = {}
    batch_id = first_batch_id
    for template_id, members in partitions.items():
        for start in range(0, len(members), max_size):
            chunk = members[start:start + max_size]
            batch_members = tuple(
                BatchMember(query_id=i + 1, spec=spec, source_id=source_id)
                for i, (source_id, spec) in enumerate(chunk)
            )
            if template_id == GLOBAL_TEMPLATE:
                templates = {extract_template(m.spec)[0] for m in batch_members}
                batch_template = templates.pop() if len(templates) == 1 else GLOBAL_TEMPLATE
            else:
                batch_template = template_id
            batch = QueryBatch(batch_id=batch_id, members=batch_members, template_id=batch_template)
            for member in batch_members:
                mapping[member.source_id] = (batch_id, member.query_id)
            logger.info(f"Built batch {batch_id}: template {batch_template}, {batch.size} queries")
            batches.append(batch)
            batch_id += 1
    return batches, mapping


@dataclass(frozen=True)
class QueryRecord:
    """One line of a batch input file."""

    id: Hashable
    sql: str
    bindings: tuple[Any, ...] | None = None


@beartype
def load_batch_file(path: str | Path, bindings_path: str | Path | None = None) -> list[QueryRecord]:
    """Read newline-delimited `{id, sql, bindings?}` records.

    A separate bindings file (a JSON object mapping id to a list of values) overrides inline bindings.
    """
    external: dict[str, list[Any]] = {}
    if bindings_path is not None:
        with open(bindings_path, "r") as f:
            external = json.load(f)
    records = []
    with open(path, "r") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise QuerySyntaxError(f"{path}:{line_number}: invalid JSON record: {e}") from e
            if "id" not in raw or "sql" not in raw:
                raise QuerySyntaxError(f"{path}:{line_number}: record needs 'id' and 'sql'")
            bindings = external.get(str(raw["id"]), raw.get("bindings"))
            records.append(QueryRecord(
                id=raw["id"], sql=raw["sql"], bindings=tuple(bindings) if bindings is not None else None
            ))
    return records


@beartype
def parse_records(records: Sequence[QueryRecord], catalog: Catalog) -> list[tuple[Hashable, QuerySpec]]:
    parsed = []
    for record in records:
        spec = parse_query(record.sql, catalog)
        if record.bindings is not None:
            spec = bind(spec, record.bindings, catalog)
        elif not spec.is_bound():
            raise BindingError(f"query {record.id!r} has parameters but no bindings")
        parsed.append((record.id, spec))
    return parsed
