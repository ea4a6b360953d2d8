"""Reference semantics of the shared operators over in-memory relations."""

from __future__ import annotations

import logging
from collections import defaultdict
from typing import Any, Mapping, Sequence

from beartype import beartype

from ..errors import QueryNotInBatchError, UnknownRelationError
from ..relational_ir import Aggregate, JoinEdge, OrderItem, PredicateNF
from .annotation import ARRAY, AnnotationKind, QuerySetEncoding
from .expressions import compile_aggregates, compile_expr, compile_predicate
from .operators import (
    Demux,
    FieldExpr,
    Group,
    Join,
    OrderLimit,
    Project,
    Scan,
    Select,
    SharedOperator,
    Unnest,
)
from .relation import AnnotatedRelation, FieldKey, Relation

logger = logging.getLogger(__name__)


def shared_scan(
        table: Relation,
        preds: Mapping[int, PredicateNF],
        encoding: QuerySetEncoding = ARRAY,
        columns: Sequence[FieldKey] | None = None,
) -> AnnotatedRelation:
    """Evaluate every query's predicate once per tuple and keep tuples matching at least one."""
    if isinstance(table, AnnotatedRelation):
        raise ValueError("shared scan input must be a plain relation")
    encoding.check_batch(preds)
    compiled = [(q, compile_predicate(preds[q], table.schema)) for q in sorted(preds)]
    keep = [table.index(c) for c in columns] if columns is not None else list(range(len(table.schema)))
    rows = []
    for row in table.rows:
        ids = [q for q, matches in compiled if matches(row)]
        if ids:
            rows.append(tuple(row[i] for i in keep) + (encoding.encode(ids),))
    schema = tuple(table.schema[i] for i in keep)
    return AnnotatedRelation(schema, AnnotationKind.SET, tuple(rows), frozenset(preds), encoding)


def shared_select(input: AnnotatedRelation, preds: Mapping[int, PredicateNF]) -> AnnotatedRelation:
    compiled = {q: compile_predicate(p, input.schema) for q, p in preds.items()}
    rows = []
    match input.kind:
        case AnnotationKind.SET:
            encoding = input.encoding
            for row in input.rows:
                ids = [q for q in encoding.decode(row[-1]) if q in compiled and compiled[q](row)]
                if ids:
                    rows.append(row[:-1] + (encoding.encode(ids),))
        case AnnotationKind.ATOMIC:
            for row in input.rows:
                q = row[-1]
                if q in compiled and compiled[q](row):
                    rows.append(row)
        case _:
            raise ValueError("shared selection input must be annotated")
    return AnnotatedRelation(input.schema, input.kind, tuple(rows), input.batch & frozenset(preds), input.encoding)


def _key_positions(
        edges: Sequence[JoinEdge], left: AnnotatedRelation, right: AnnotatedRelation
) -> tuple[list[int], list[int]]:
    left_keys, right_keys = [], []
    for edge in edges:
        if edge.left in left.schema and edge.right in right.schema:
            left_keys.append(left.index(edge.left))
            right_keys.append(right.index(edge.right))
        elif edge.right in left.schema and edge.left in right.schema:
            left_keys.append(left.index(edge.right))
            right_keys.append(right.index(edge.left))
        else:
            raise UnknownRelationError(f"join condition {edge.left} = {edge.right} does not span both inputs")
    return left_keys, right_keys


def shared_join(left: AnnotatedRelation, right: AnnotatedRelation, edges: Sequence[JoinEdge]) -> AnnotatedRelation:
    """Equi-join whose annotation follows the set/atomic combination rules."""
    left_keys, right_keys = _key_positions(edges, left, right)
    table: dict[tuple[Any, ...], list[tuple[Any, ...]]] = defaultdict(list)
    for row in right.rows:
        key = tuple(row[i] for i in right_keys)
        if None not in key:
            table[key].append(row)

    encoding = left.encoding
    both_sets = left.kind == right.kind == AnnotationKind.SET
    rows = []
    for lrow in left.rows:
        key = tuple(lrow[i] for i in left_keys)
        if None in key:
            continue
        for rrow in table.get(key, ()):
            a, b = lrow[-1], rrow[-1]
            if both_sets:
                annotation = encoding.intersect(a, b)
                if encoding.is_empty(annotation):
                    continue
            elif left.kind == right.kind == AnnotationKind.ATOMIC:
                if a != b:
                    continue
                annotation = a
            elif left.kind == AnnotationKind.ATOMIC:
                if not right.encoding.contains(b, a):
                    continue
                annotation = a
            else:
                if not encoding.contains(a, b):
                    continue
                annotation = b
            rows.append(lrow[:-1] + rrow[:-1] + (annotation,))
    kind = AnnotationKind.SET if both_sets else AnnotationKind.ATOMIC
    return AnnotatedRelation(left.schema + right.schema, kind, tuple(rows), left.batch & right.batch, encoding)


def unnest_query_set(input: AnnotatedRelation) -> AnnotatedRelation:
    if input.kind == AnnotationKind.ATOMIC:
        return input
    if input.kind != AnnotationKind.SET:
        raise ValueError("unnest input must be set-annotated")
    rows = tuple(row[:-1] + (q,) for row in input.rows for q in input.encoding.decode(row[-1]))
    return AnnotatedRelation(input.schema, AnnotationKind.ATOMIC, rows, input.batch, input.encoding)


def shared_group_by(
        input: AnnotatedRelation,
        keys: Sequence[FieldKey],
        aggs: Sequence[tuple[str, Aggregate]],
) -> AnnotatedRelation:
    """Plain grouping over the unnested input with query_id appended to the keys."""
    atomic = unnest_query_set(input)
    key_positions = [atomic.index(k) for k in keys]
    new_state, update = compile_aggregates([a for _, a in aggs], atomic.schema)
    groups: dict[tuple[Any, ...], list] = {}
    for row in atomic.rows:
        group_key = (row[-1],) + tuple(row[i] for i in key_positions)
        state = groups.get(group_key)
        if state is None:
            state = groups[group_key] = new_state()
        update(state, row)
    rows = tuple(
        group_key[1:] + tuple(acc.result() for acc in state) + (group_key[0],)
        for group_key, state in groups.items()
    )
    schema = tuple(keys) + tuple(name for name, _ in aggs)
    return AnnotatedRelation(schema, AnnotationKind.ATOMIC, rows, input.batch, input.encoding)


def sort_rows(rows: Sequence[tuple[Any, ...]], positions: Sequence[tuple[int, bool]]) -> list[tuple[Any, ...]]:
    """Stable multi-key sort; NULLs sort last in both directions."""
    ordered = list(rows)
    for i, descending in reversed(positions):
        if descending:
            ordered.sort(key=lambda r: (r[i] is not None, r[i]) if r[i] is not None else (False, 0), reverse=True)
        else:
            ordered.sort(key=lambda r: (r[i] is None, r[i]) if r[i] is not None else (True, 0))
    return ordered


def shared_order_limit(
        input: AnnotatedRelation,
        ordering: Sequence[OrderItem],
        limits: Mapping[int, int | None],
) -> AnnotatedRelation:
    """Order each query_id partition and keep its first k rows; ties keep input sequence."""
    if input.kind != AnnotationKind.ATOMIC:
        raise ValueError("order/limit input must carry atomic query_id annotations")
    positions = [(input.index(item.name), item.descending) for item in ordering]
    partitions: dict[int, list[tuple[Any, ...]]] = defaultdict(list)
    for row in input.rows:
        partitions[row[-1]].append(row)
    rows: list[tuple[Any, ...]] = []
    for q in sorted(partitions):
        ordered = sort_rows(partitions[q], positions)
        k = limits.get(q)
        rows.extend(ordered if k is None else ordered[:k])
    return AnnotatedRelation(input.schema, input.kind, tuple(rows), input.batch, input.encoding)


def project(input: AnnotatedRelation, outputs: Sequence[tuple[str, FieldExpr]]) -> AnnotatedRelation:
    fns = [compile_expr(source, input.schema) for _, source in outputs]
    rows = tuple(tuple(fn(row) for fn in fns) + (row[-1],) for row in input.rows)
    return AnnotatedRelation(tuple(n for n, _ in outputs), input.kind, rows, input.batch, input.encoding)


@beartype
def demux(input: AnnotatedRelation, q: int) -> Relation:
    """Rows relevant to query `q`, with the annotation projected away."""
    if q not in input.batch:
        raise QueryNotInBatchError(f"query {q} is not a member of the batch {sorted(input.batch)}")
    match input.kind:
        case AnnotationKind.SET:
            rows = tuple(row[:-1] for row in input.rows if input.encoding.contains(row[-1], q))
        case AnnotationKind.ATOMIC:
            rows = tuple(row[:-1] for row in input.rows if row[-1] == q)
        case _:
            raise ValueError("demux input must be annotated")
    return Relation(input.schema, rows)


class SharedPlanEvaluator:
    """Evaluates shared operator trees over in-memory tables.

    Shared subtrees are evaluated once per `evaluate` call. The evaluator holds no
    mutable state after construction.
    """

    def __init__(self, tables: Mapping[str, Relation], encoding: QuerySetEncoding = ARRAY) -> None:
        self._tables = dict(tables)
        self.encoding = encoding

    @property
    def tables(self) -> Mapping[str, Relation]:
        return self._tables

    def with_tables(self, extra: Mapping[str, Relation]) -> "SharedPlanEvaluator":
        return SharedPlanEvaluator({**self._tables, **extra}, self.encoding)

    def evaluate(self, op: SharedOperator) -> AnnotatedRelation | Relation:
        memo: dict[SharedOperator, AnnotatedRelation | Relation] = {}
        return self._evaluate(op, memo)

    def _evaluate(self, op: SharedOperator, memo: dict) -> AnnotatedRelation | Relation:
        if op in memo:
            return memo[op]
        match op:
            case Scan():
                if op.table not in self._tables:
                    raise UnknownRelationError(f"unknown table {op.table}")
                result = shared_scan(self._tables[op.table], op.predicate_map, self.encoding, op.columns)
            case Select():
                result = shared_select(self._evaluate(op.input, memo), op.predicate_map)
            case Join():
                result = shared_join(self._evaluate(op.left, memo), self._evaluate(op.right, memo), op.edges)
            case Unnest():
                result = unnest_query_set(self._evaluate(op.input, memo))
            case Group():
                result = shared_group_by(self._evaluate(op.input, memo), op.keys, op.aggregates)
            case Project():
                result = project(self._evaluate(op.input, memo), op.outputs)
            case OrderLimit():
                result = shared_order_limit(self._evaluate(op.input, memo), op.keys, op.limit_map)
            case Demux():
                result = demux(self._evaluate(op.input, memo), op.query_id)
            case _:
                raise ValueError(f"Unknown operator: {op!r}")
        memo[op] = result
        return result
