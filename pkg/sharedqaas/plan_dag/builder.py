"""Shared plan construction for single batches and for whole workloads."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Hashable, Iterator, Sequence

from beartype import beartype

from ..dq_core import (
    AnnotationKind,
    Group,
    Join,
    OrderLimit,
    Project,
    Scan,
    Select,
    SharedOperator,
    Unnest,
    compile_expr,
    empty_aggregate_row,
    output_kind,
    per_query,
    query_ids,
)
from ..errors import BindingError, IncompatibleBatchError
from ..relational_ir import (
    Aggregate,
    BatchMember,
    Catalog,
    ColumnRef,
    JoinEdge,
    OrderItem,
    PredicateNF,
    QueryBatch,
    QuerySpec,
    expr_columns,
    pushdown_predicates,
)
from ..relational_ir.batching import GLOBAL_TEMPLATE

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanOptions:
    """
    Args:
        early_unnest: replicate tuples right after the shared scans, so joins and
            grouping see atomic annotations.
    """

    early_unnest: bool = False


@dataclass(frozen=True)
class Sink:
    """One result node of a shared plan and what demultiplexing its output needs."""

    sink_id: str
    root: SharedOperator
    members: tuple[tuple[int, int, int], ...]  # (plan query id, batch id, query id within the batch)
    output_names: tuple[str, ...]
    ordering: tuple[OrderItem, ...] = ()
    limits: tuple[tuple[int, int | None], ...] = ()
    empty_row: tuple[Any, ...] | None = None

    @property
    def query_ids(self) -> tuple[int, ...]:
        return tuple(q for q, _, _ in self.members)

    def limit(self, q: int) -> int | None:
        return dict(self.limits).get(q)

    def empty_result(self, q: int) -> tuple[tuple[Any, ...], ...]:
        """Rows a query returns when the shared output holds none for it."""
        if self.empty_row is None or self.limit(q) == 0:
            return ()
        return (self.empty_row,)


@dataclass(frozen=True)
class SharedPlanDag:
    """Shared operators of one or more batches, possibly with subtrees used by several sinks."""

    sinks: tuple[Sink, ...]
    batches: tuple[QueryBatch, ...]
    catalog: Catalog

    def sink(self, sink_id: str) -> Sink:
        for sink in self.sinks:
            if sink.sink_id == sink_id:
                return sink
        raise KeyError(f"unknown sink {sink_id}")

    def nodes(self) -> list[SharedOperator]:
        """Distinct operators in post-order; structurally equal subtrees count once."""
        seen: set[SharedOperator] = set()
        ordered: list[SharedOperator] = []

        def visit(node: SharedOperator) -> None:
            if node in seen:
                return
            seen.add(node)
            for child in node.children():
                visit(child)
            ordered.append(node)

        for sink in self.sinks:
            visit(sink.root)
        return ordered

    def consumers(self) -> dict[SharedOperator, int]:
        """Number of distinct parent operators (or sinks) reading each node."""
        parents: dict[SharedOperator, set[SharedOperator]] = defaultdict(set)
        sink_uses: dict[SharedOperator, int] = defaultdict(int)
        for sink in self.sinks:
            sink_uses[sink.root] += 1
        for node in self.nodes():
            for child in node.children():
                parents[child].add(node)
        return {node: len(parents[node]) + sink_uses[node] for node in self.nodes()}

    def query_map(self) -> dict[int, tuple[int, int]]:
        """Plan query id -> (batch id, query id within the batch)."""
        return {q: (b, local) for sink in self.sinks for q, b, local in sink.members}

    def member(self, plan_query_id: int) -> BatchMember:
        batch_id, local = self.query_map()[plan_query_id]
        for batch in self.batches:
            if batch.batch_id == batch_id:
                return batch.member(local)
        raise KeyError(f"unknown batch {batch_id}")

    @property
    def size(self) -> int:
        return sum(batch.size for batch in self.batches)

    def iter_members(self) -> Iterator[tuple[Sink, int, BatchMember]]:
        for sink in self.sinks:
            for q, _, _ in sink.members:
                yield sink, q, self.member(q)


def _structure(spec: QuerySpec) -> Hashable:
    edges = frozenset(JoinEdge.canonical(e.left, e.right) for e in spec.join_edges)
    return tuple(sorted(spec.base_relations)), edges, spec.projections, spec.grouping, spec.ordering


def _join_structure(spec: QuerySpec) -> Hashable:
    return frozenset(spec.base_relations), frozenset(JoinEdge.canonical(e.left, e.right) for e in spec.join_edges)


def _edge_key(edge: JoinEdge) -> tuple[str, str]:
    return str(edge.left), str(edge.right)


def join_tree(tables: Sequence[str], edges: Sequence[JoinEdge], leaves: dict[str, SharedOperator]) -> SharedOperator:
    """Left-deep join over `tables`: start from the first name, then add the first connected table."""
    remaining = sorted(tables)
    joined = [remaining.pop(0)]
    root = leaves[joined[0]]
    while remaining:
        for table in remaining:
            step = [
                e for e in edges
                if (e.left.table == table and e.right.table in joined)
                or (e.right.table == table and e.left.table in joined)
            ]
            if step:
                break
        else:
            raise IncompatibleBatchError(f"tables {remaining} are not connected to {joined}")
        root = Join(root, leaves[table], tuple(sorted(step, key=_edge_key)))
        joined.append(table)
        remaining.remove(table)
    return root


def _needed_columns(spec: QuerySpec, residual: PredicateNF | None) -> set[ColumnRef]:
    needed: set[ColumnRef] = set()
    for output in spec.projections:
        needed.update(expr_columns(output.expr))
    if spec.grouping is not None:
        needed.update(spec.grouping.keys)
    for edge in spec.join_edges:
        needed.update((edge.left, edge.right))
    if residual is not None:
        needed.update(residual.columns())
    return needed


def _sink_pipeline(
        root: SharedOperator,
        spec: QuerySpec,
        limits: dict[int, int | None],
) -> tuple[SharedOperator, tuple[Any, ...] | None]:
    empty_row = None
    if spec.grouping is not None:
        names: dict[Aggregate, str] = {}
        for output in spec.grouping.aggregates:
            names.setdefault(output.expr, f"agg_{len(names)}")
        root = Group(root, spec.grouping.keys, tuple((name, agg) for agg, name in names.items()))
        outputs = tuple(
            (o.name, names[o.expr] if isinstance(o.expr, Aggregate) else o.expr) for o in spec.projections
        )
        if not spec.grouping.keys:
            schema = tuple(names.values())
            row = empty_aggregate_row(list(names))
            empty_row = tuple(compile_expr(source, schema)(row) for _, source in outputs)
    else:
        outputs = tuple((o.name, o.expr) for o in spec.projections)

    ordered = bool(spec.ordering) or any(k is not None for k in limits.values())
    if ordered and output_kind(root) == AnnotationKind.SET:
        root = Unnest(root)
    root = Project(root, outputs)
    if ordered:
        root = OrderLimit(root, spec.ordering, tuple(sorted(limits.items())))
    return root, empty_row


@beartype
def build_global_plan(
        batches: Sequence[QueryBatch],
        catalog: Catalog,
        options: PlanOptions | None = None,
) -> SharedPlanDag:
    """One plan for all batches.

    Queries are renumbered globally in batch order. All queries reading a table share
    one scan, joins over the same tables and edges are shared by every template using
    them, and each template keeps its own sink.

    Raises:
        IncompatibleBatchError: a per-template batch mixes join structures.
        BindingError: a member still has unbound placeholders.
    """
    if not batches:
        raise ValueError("at least one batch is required")
    options = options or PlanOptions()

    groups: dict[Hashable, list[tuple[int, QueryBatch, BatchMember]]] = {}
    offset = 0
    for batch in batches:
        if batch.template_id != GLOBAL_TEMPLATE:
            structures = {_join_structure(m.spec) for m in batch.members}
            if len(structures) > 1:
                raise IncompatibleBatchError(
                    f"batch {batch.batch_id} (template {batch.template_id}) mixes {len(structures)} join structures"
                )
        for member in batch.members:
            if not member.spec.is_bound():
                raise BindingError(f"query {member.source_id!r} has unbound placeholders")
            groups.setdefault(_structure(member.spec), []).append((offset + member.query_id, batch, member))
        offset += batch.size

    scan_predicates: dict[str, dict[int, PredicateNF]] = defaultdict(dict)
    needed: dict[str, set[ColumnRef]] = defaultdict(set)
    residuals: dict[int, PredicateNF | None] = {}
    for members in groups.values():
        for q, _, member in members:
            per_table, residual = pushdown_predicates(member.spec)
            residuals[q] = residual
            for table, predicate in per_table.items():
                scan_predicates[table][q] = predicate
            for ref in _needed_columns(member.spec, residual):
                needed[ref.table].add(ref)

    leaves: dict[str, SharedOperator] = {}
    for table, predicates in scan_predicates.items():
        columns = tuple(
            ColumnRef(table, c) for c in catalog.table(table).column_names if ColumnRef(table, c) in needed[table]
        )
        scan = Scan(table, columns, per_query(predicates))
        leaves[table] = Unnest(scan) if options.early_unnest else scan

    sinks = []
    for index, members in enumerate(groups.values()):
        spec = members[0][2].spec
        root = join_tree(spec.base_relations, spec.join_edges, leaves)
        qs = {q for q, _, _ in members}
        restrict = {q: residuals[q] or PredicateNF.true() for q in qs}
        if query_ids(root) != qs or any(residuals[q] is not None for q in qs):
            root = Select(root, per_query(restrict))
        limits = {q: member.spec.limit for q, _, member in members}
        root, empty_row = _sink_pipeline(root, spec, limits)
        batch_ids = sorted({batch.batch_id for _, batch, _ in members})
        sink_id = f"b{batch_ids[0]}" if len(groups) == 1 and len(batch_ids) == 1 else f"t{index}"
        sinks.append(Sink(
            sink_id=sink_id,
            root=root,
            members=tuple(sorted((q, batch.batch_id, member.query_id) for q, batch, member in members)),
            output_names=spec.output_names,
            ordering=spec.ordering,
            limits=tuple(sorted(limits.items())),
            empty_row=empty_row,
        ))

    dag = SharedPlanDag(tuple(sinks), tuple(batches), catalog)
    shared = sum(1 for n in dag.consumers().values() if n > 1)
    logger.info(
        f"Built shared plan over {len(batches)} batches: {len(leaves)} shared scans, "
        f"{len(sinks)} sinks, {shared} operators with several consumers"
    )
    return dag


@beartype
def build_shared_plan(batch: QueryBatch, catalog: Catalog, options: PlanOptions | None = None) -> SharedPlanDag:
    """Shared plan of one batch: one scan per base relation, joins, then per-template sinks."""
    return build_global_plan([batch], catalog, options)
