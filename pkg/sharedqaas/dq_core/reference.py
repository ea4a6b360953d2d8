"""Plain single-query evaluation, the oracle the shared operators are checked against."""

from __future__ import annotations

from collections import defaultdict
from typing import Any, Mapping

from beartype import beartype

from ..errors import UnknownRelationError
from ..relational_ir import Aggregate, QuerySpec
from .evaluator import sort_rows
from .expressions import compile_aggregates, compile_expr, compile_predicate, empty_aggregate_row
from .relation import Relation


def _join_all(q: QuerySpec, tables: Mapping[str, Relation]) -> Relation:
    for name in q.base_relations:
        if name not in tables:
            raise UnknownRelationError(f"unknown table {name}")
    current = tables[q.base_relations[0]]
    joined = {q.base_relations[0]}
    pending = list(q.base_relations[1:])
    while pending:
        for name in pending:
            edges = [e for e in q.join_edges
                     if (e.left.table == name and e.right.table in joined)
                     or (e.right.table == name and e.left.table in joined)]
            if edges:
                break
        else:
            raise ValueError(f"tables {pending} are not connected by join edges")
        other = tables[name]
        current_keys, other_keys = [], []
        for edge in edges:
            mine, theirs = (edge.right, edge.left) if edge.left.table == name else (edge.left, edge.right)
            current_keys.append(current.index(mine))
            other_keys.append(other.index(theirs))
        index: dict[tuple, list[tuple]] = defaultdict(list)
        for row in other.rows:
            key = tuple(row[i] for i in other_keys)
            if None not in key:
                index[key].append(row)
        rows = []
        for row in current.rows:
            key = tuple(row[i] for i in current_keys)
            for other_row in index.get(key, ()):
                rows.append(row + other_row)
        current = Relation(current.schema + other.schema, tuple(rows))
        joined.add(name)
        pending.remove(name)
    return current


@beartype
def evaluate_query(q: QuerySpec, tables: Mapping[str, Relation]) -> Relation:
    """Evaluate one query with bag semantics; ties under ORDER BY keep join order."""
    joined = _join_all(q, tables)
    matches = compile_predicate(q.predicate, joined.schema)
    rows: list[tuple[Any, ...]] = [row for row in joined.rows if matches(row)]
    schema = joined.schema

    if q.grouping is not None:
        keys = q.grouping.keys
        aggregates: list[Aggregate] = [o.expr for o in q.grouping.aggregates]
        key_positions = [joined.index(k) for k in keys]
        new_state, update = compile_aggregates(aggregates, joined.schema)
        groups: dict[tuple, list] = {}
        for row in rows:
            key = tuple(row[i] for i in key_positions)
            state = groups.get(key)
            if state is None:
                state = groups[key] = new_state()
            update(state, row)
        rows = [key + tuple(acc.result() for acc in state) for key, state in groups.items()]
        if not keys and not rows:
            rows = [empty_aggregate_row(aggregates)]
        schema = tuple(keys) + tuple(o.name for o in q.grouping.aggregates)
        sources = [o.expr if not isinstance(o.expr, Aggregate) else o.name for o in q.projections]
    else:
        sources = [o.expr for o in q.projections]

    fns = [compile_expr(source, schema) for source in sources]
    rows = [tuple(fn(row) for fn in fns) for row in rows]
    names = q.output_names
    if q.ordering:
        rows = sort_rows(rows, [(names.index(item.name), item.descending) for item in q.ordering])
    if q.limit is not None:
        rows = rows[:q.limit]
    return Relation(names, tuple(rows))
