"""Rewrite shared operator trees into single SQL statements.

Every operator below the root becomes one named subquery of a WITH clause, in
post-order, so the statement reads bottom-up like the plan. Fields are named by
their column name, or `{table}_{column}` when two tables of the plan share the name.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Literal

from beartype import beartype

from ..dq_core import (
    AnnotationKind,
    Demux,
    FieldKey,
    Group,
    Join,
    OrderLimit,
    Project,
    Scan,
    Select,
    SharedOperator,
    Unnest,
    output_fields,
    output_kind,
    query_ids,
    walk,
)
from ..errors import EncodingError, NoIndexableIntervalsError, QueryTooLargeError
from ..predicate_index import LinearFallback, PredicateIndexTree, ResultSet, Split, build_index_tree, to_intervals
from ..relational_ir import BinOp, Catalog, ColumnRef, Literal as ConstLiteral, PredicateNF, expr_columns, query_id_type
from ..relational_ir.parser import format_atom, format_expr, format_predicate, format_value
from .dialect import DialectProfile, get_dialect

logger = logging.getLogger(__name__)

MAX_BITMASK_QUERIES = 64

ScanMode = Literal["linear", "indexed"]


class FieldNamer:
    """SQL names for the fields flowing through one script."""

    def __init__(self, refs: Iterable[ColumnRef] = ()) -> None:
        tables_by_column: dict[str, set[str]] = defaultdict(set)
        for ref in refs:
            tables_by_column[ref.column].add(ref.table)
        self.ambiguous = frozenset(c for c, tables in tables_by_column.items() if len(tables) > 1)

    @classmethod
    def for_plans(cls, *roots: SharedOperator) -> "FieldNamer":
        refs: set[ColumnRef] = set()
        for root in roots:
            for op in walk(root):
                match op:
                    case Scan():
                        refs.update(op.columns)
                        for _, predicate in op.predicates:
                            refs.update(predicate.columns())
                    case Select():
                        for _, predicate in op.predicates:
                            refs.update(predicate.columns())
                    case Join():
                        for edge in op.edges:
                            refs.update((edge.left, edge.right))
                    case Group():
                        refs.update(op.keys)
                        for _, aggregate in op.aggregates:
                            refs.update(expr_columns(aggregate))
                    case Project():
                        for _, source in op.outputs:
                            if not isinstance(source, str):
                                refs.update(_field_columns(source))
        return cls(refs)

    def name(self, key: FieldKey) -> str:
        if isinstance(key, str):
            return key
        if key.column in self.ambiguous:
            return f"{key.table}_{key.column}"
        return key.column


def _field_columns(source) -> set[ColumnRef]:
    match source:
        case ColumnRef():
            return {source}
        case BinOp():
            return _field_columns(source.left) | _field_columns(source.right)
        case _:
            return set()


@dataclass(frozen=True)
class RenderOptions:
    """
    Args:
        mode: "linear" evaluates each query's predicate per tuple; "indexed" renders a
            predicate index tree and falls back to linear when nothing is indexable.
        prefilter: add the OR of all query predicates as WHERE clause of shared scans.
        strip_annotation: drop the annotation column from the statement's output.
        catalog: lets full-width scans be written as `SELECT *`.
        max_attributes: attribute limit for indexed scans.
    """

    mode: ScanMode = "linear"
    prefilter: bool = True
    strip_annotation: bool = False
    catalog: Catalog | None = None
    max_attributes: int | None = None


@dataclass(frozen=True)
class RenderedQuery:
    sql: str
    columns: tuple[str, ...]
    annotation: AnnotationKind
    annotation_type: str | None = None
    dialect: str = "presto"

    @property
    def byte_length(self) -> int:
        return len(self.sql.encode("utf-8"))

    @property
    def output_columns(self) -> tuple[str, ...]:
        """Result columns in order, annotation column last when present."""
        annotation = self.annotation.column_name
        return self.columns + ((annotation,) if annotation else ())


def condition_sql(predicate: PredicateNF, column_sql: Callable[[ColumnRef], str]) -> str:
    """A predicate as a boolean expression, without outer parentheses for a single conjunction."""
    if len(predicate.disjuncts) == 1 and predicate.disjuncts[0]:
        return " AND ".join(format_atom(a, column_sql(a.column)) for a in predicate.disjuncts[0])
    return format_predicate(predicate, column_sql)


@beartype
def render_index_tree(
        tree: PredicateIndexTree,
        dialect: DialectProfile,
        column_sql: Callable[[ColumnRef], str],
) -> str:
    """Nested CASE expression yielding each tuple's query_set."""
    match tree:
        case Split():
            left = render_index_tree(tree.left, dialect, column_sql)
            right = render_index_tree(tree.right, dialect, column_sql)
            test = f"{column_sql(tree.attribute)} {tree.comparison} {format_value(tree.value)}"
            return f"CASE WHEN {test} THEN {left} ELSE {right} END"
        case ResultSet():
            return dialect.set_sql(tree.queries)
        case LinearFallback():
            arms = {q: dialect.member_sql(q) for q in tree.known}
            for q, residual in tree.residuals:
                arms[q] = dialect.arm_sql(condition_sql(residual, column_sql), q)
            return dialect.linear_sql(arms[q] for q in sorted(arms))
        case _:
            raise ValueError(f"Unknown tree node: {tree!r}")


class _StatementBuilder:
    def __init__(self, dialect: DialectProfile, options: RenderOptions, namer: FieldNamer, max_id: int) -> None:
        self.dialect = dialect
        self.options = options
        self.namer = namer
        self.max_id = max_id
        self.ctes: list[tuple[str, str]] = []
        self.names: dict[SharedOperator, str] = {}
        self.taken: set[str] = set()

    def add_cte(self, base: str, body: str) -> str:
        name, k = base, 1
        while name in self.taken:
            k += 1
            name = f"{base}_{k}"
        self.taken.add(name)
        self.ctes.append((name, body))
        return name

    def ref(self, op: SharedOperator) -> str:
        """Name under which `op`'s result can be read, adding its subquery when needed."""
        if op in self.names:
            return self.names[op]
        if isinstance(op, Unnest) and output_kind(op.input) == AnnotationKind.ATOMIC:
            name = self.ref(op.input)
        else:
            name = self.add_cte(self.base_name(op), self.body(op))
        self.names[op] = name
        return name

    @staticmethod
    def base_name(op: SharedOperator) -> str:
        match op:
            case Scan():
                return f"sscan_{op.table}"
            case Select():
                return "sselect"
            case Join():
                return "sjoin"
            case Unnest():
                return "unnested"
            case Group():
                return "sgroup"
            case Project():
                return "sproject"
            case OrderLimit():
                return "sorder"
            case Demux():
                return f"sdemux_{op.query_id}"
            case _:
                raise ValueError(f"Unknown operator: {op!r}")

    def fields(self, op: SharedOperator) -> list[str]:
        return [self.namer.name(f) for f in output_fields(op)]

    def field_sql(self, source) -> str:
        match source:
            case str():
                return source
            case ColumnRef():
                return self.namer.name(source)
            case ConstLiteral():
                return format_value(source.value)
            case BinOp():
                return f"({self.field_sql(source.left)} {source.op} {self.field_sql(source.right)})"
            case _:
                raise ValueError(f"Unknown expression: {source!r}")

    def body(self, op: SharedOperator) -> str:
        match op:
            case Scan():
                return self.scan(op)
            case Select():
                return self.select(op)
            case Join():
                return self.join(op)
            case Unnest():
                return self.unnest(op)
            case Group():
                return self.group(op)
            case Project():
                return self.project(op)
            case OrderLimit():
                return self.order_limit(op)
            case Demux():
                return self.demux(op)
            case _:
                raise ValueError(f"Unknown operator: {op!r}")

    # -- shared scan -------------------------------------------------------

    def scan_columns(self, scan: Scan) -> list[str]:
        names = [self.namer.name(c) for c in scan.columns]
        if scan.temporary:
            return names
        catalog = self.options.catalog
        if catalog is not None and catalog.has_table(scan.table):
            full = tuple(ColumnRef(scan.table, c) for c in catalog.table(scan.table).column_names)
            if scan.columns == full and names == [c.column for c in scan.columns]:
                return ["*"]
        return [c.column if c.column == n else f"{c.column} AS {n}" for c, n in zip(scan.columns, names)]

    def scan_annotation(self, preds: dict[int, PredicateNF], column_sql: Callable[[ColumnRef], str]) -> str:
        arms = (self.dialect.arm_sql(condition_sql(p, column_sql), q) for q, p in sorted(preds.items()))
        linear = self.dialect.linear_sql(arms)
        if self.options.mode == "indexed":
            try:
                intervals, _ = to_intervals(preds, max_attributes=self.options.max_attributes)
                tree = build_index_tree(intervals)
            except NoIndexableIntervalsError:
                logger.warning("No indexable intervals in shared scan, rendering linear predicate evaluation")
                return linear
            # a NULL attribute would take the ELSE branch of every split on it
            nulls = " OR ".join(f"{column_sql(a)} IS NULL" for a in intervals.intervals)
            return f"CASE WHEN {nulls} THEN {linear} ELSE {render_index_tree(tree, self.dialect, column_sql)} END"
        return linear

    def scan(self, scan: Scan) -> str:
        preds = scan.predicate_map
        column_sql = self.namer.name if scan.temporary else (lambda c: c.column)
        columns = self.scan_columns(scan)

        if len(preds) == 1:
            (q, predicate), = preds.items()
            items = ", ".join(columns + [f"{self.dialect.set_sql([q])} AS query_set"])
            sql = f"SELECT {items} FROM {scan.table}"
            if not predicate.is_true:
                sql += f" WHERE {condition_sql(predicate, column_sql)}"
            return sql

        items = ", ".join(columns + [f"{self.scan_annotation(preds, column_sql)} AS query_set"])
        sql = f"SELECT {items} FROM {scan.table}"
        if not self.options.prefilter:
            return f"SELECT * FROM ({sql}) AS annotated WHERE {self.dialect.non_empty_sql('query_set')}"
        if any(p.is_true for p in preds.values()):
            return sql
        disjuncts = dict.fromkeys(format_predicate(p, column_sql) for _, p in sorted(preds.items()) if not p.is_false)
        return f"{sql} WHERE {' OR '.join(disjuncts) or 'FALSE'}"

    # -- the other shared operators ----------------------------------------

    def select(self, op: Select) -> str:
        source = self.ref(op.input)
        fields = self.fields(op.input)
        preds = op.predicate_map
        if output_kind(op.input) == AnnotationKind.SET:
            arms = (self.dialect.arm_sql(condition_sql(p, self.namer.name), q) for q, p in sorted(preds.items()))
            narrowed = self.dialect.intersect_sql("query_set", self.dialect.linear_sql(arms))
            helper = self.add_cte("sselect_helper", f"SELECT {', '.join(fields + [f'{narrowed} AS query_set'])} FROM {source}")
            return f"SELECT * FROM {helper} WHERE {self.dialect.non_empty_sql('query_set')}"
        conditions = []
        for q, predicate in sorted(preds.items()):
            if predicate.is_true:
                conditions.append(f"query_id = {q}")
            elif not predicate.is_false:
                conditions.append(f"(query_id = {q} AND ({condition_sql(predicate, self.namer.name)}))")
        return f"SELECT * FROM {source} WHERE {' OR '.join(conditions) or 'FALSE'}"

    def join(self, op: Join) -> str:
        left, right = self.ref(op.left), self.ref(op.right)
        left_kind, right_kind = output_kind(op.left), output_kind(op.right)
        left_fields = set(output_fields(op.left))
        items = [f"{left}.{f}" for f in self.fields(op.left)] + [f"{right}.{f}" for f in self.fields(op.right)]
        conditions = []
        for edge in op.edges:
            a, b = (edge.left, edge.right) if edge.left in left_fields else (edge.right, edge.left)
            conditions.append(f"{left}.{self.namer.name(a)} {edge.comparison} {right}.{self.namer.name(b)}")

        if left_kind == right_kind == AnnotationKind.SET:
            items.append(f"{self.dialect.intersect_sql(f'{left}.query_set', f'{right}.query_set')} AS query_set")
            on = " AND ".join(conditions) or "TRUE"
            helper = self.add_cte("sjoin_helper", f"SELECT {', '.join(items)} FROM {left} JOIN {right} ON {on}")
            return f"SELECT * FROM {helper} WHERE {self.dialect.non_empty_sql('query_set')}"

        if left_kind == right_kind == AnnotationKind.ATOMIC:
            conditions.append(f"{left}.query_id = {right}.query_id")
            items.append(f"{left}.query_id AS query_id")
        elif left_kind == AnnotationKind.ATOMIC:
            conditions.append(self.dialect.contains_sql(f"{right}.query_set", f"{left}.query_id"))
            items.append(f"{left}.query_id AS query_id")
        else:
            conditions.append(self.dialect.contains_sql(f"{left}.query_set", f"{right}.query_id"))
            items.append(f"{right}.query_id AS query_id")
        return f"SELECT {', '.join(items)} FROM {left} JOIN {right} ON {' AND '.join(conditions)}"

    def unnested_from(self, source: str) -> str:
        sql = f"FROM {source}{self.dialect.unnest_from_sql(self.max_id)}"
        check = self.dialect.unnest_filter_sql()
        return f"{sql} WHERE {check}" if check else sql

    def unnest(self, op: Unnest) -> str:
        source = self.ref(op.input)
        if output_kind(op.input) == AnnotationKind.ATOMIC:
            return f"SELECT * FROM {source}"
        items = self.fields(op.input) + [f"{self.dialect.unnest_id} AS query_id"]
        return f"SELECT {', '.join(items)} {self.unnested_from(source)}"

    def group(self, op: Group) -> str:
        source = self.ref(op.input)
        keys = [self.namer.name(k) for k in op.keys]
        aggregates = [f"{format_expr(a, self.namer.name)} AS {name}" for name, a in op.aggregates]
        if output_kind(op.input) == AnnotationKind.ATOMIC:
            group_by = ", ".join(["query_id"] + keys)
            return f"SELECT {', '.join(keys + aggregates + ['query_id'])} FROM {source} GROUP BY {group_by}"
        if self.dialect.unnest_style == "select_list":
            inner = f"SELECT *, {self.dialect.unnest_id} AS query_id FROM {source}"
            group_by = ", ".join(["query_id"] + keys)
            return f"SELECT {', '.join(keys + aggregates + ['query_id'])} FROM ({inner}) AS unnested GROUP BY {group_by}"
        query_id = self.dialect.unnest_id
        items = keys + aggregates + [f"{query_id} AS query_id"]
        return f"SELECT {', '.join(items)} {self.unnested_from(source)} GROUP BY {', '.join([query_id] + keys)}"

    def project(self, op: Project) -> str:
        source = self.ref(op.input)
        items = [f"{self.field_sql(e)} AS {name}" for name, e in op.outputs]
        annotation = output_kind(op.input).column_name
        if annotation:
            items.append(annotation)
        return f"SELECT {', '.join(items)} FROM {source}"

    def order_limit(self, op: OrderLimit) -> str:
        source = self.ref(op.input)
        ordering = [f"{item.name}{' DESC' if item.descending else ''} NULLS LAST" for item in op.keys]
        limits = op.limit_map
        if all(k is None for k in limits.values()):
            return f"SELECT * FROM {source} ORDER BY {', '.join(['query_id'] + ordering)}"

        window = self.dialect.row_number_sql(", ".join(ordering) or "query_id")
        ranked = f"SELECT *, {window} AS rn FROM {source}"
        distinct = set(limits.values())
        if len(distinct) == 1:
            (k,) = distinct
            condition = "FALSE" if k == 0 else f"rn <= {k}"
        else:
            conditions = []
            for q, k in sorted(limits.items()):
                if k is None:
                    conditions.append(f"query_id = {q}")
                elif k > 0:
                    conditions.append(f"(query_id = {q} AND rn <= {k})")
            condition = " OR ".join(conditions) or "FALSE"
        items = ", ".join(self.fields(op.input) + ["query_id"])
        return f"SELECT {items} FROM ({ranked}) AS ranked WHERE {condition} ORDER BY query_id, rn"

    def demux(self, op: Demux) -> str:
        source = self.ref(op.input)
        if output_kind(op.input) == AnnotationKind.SET:
            test = self.dialect.contains_sql("query_set", op.query_id)
        else:
            test = f"query_id = {op.query_id}"
        return f"SELECT {', '.join(self.fields(op.input)) or '1 AS present'} FROM {source} WHERE {test}"

    def statement(self, root: SharedOperator) -> str:
        if self.options.strip_annotation and output_kind(root) != AnnotationKind.NONE:
            name = self.ref(root)
            final = f"SELECT {', '.join(self.fields(root))} FROM {name}"
        else:
            final = self.body(root)
        if not self.ctes:
            return final
        return "WITH " + ", ".join(f"{name} AS ({body})" for name, body in self.ctes) + " " + final


@beartype
def render_plan(
        root: SharedOperator,
        dialect: str | DialectProfile = "presto",
        options: RenderOptions | None = None,
        namer: FieldNamer | None = None,
) -> RenderedQuery:
    """Render a shared plan (or one component of a split script) as a single statement.

    Raises:
        QueryTooLargeError: when the statement exceeds the dialect's size limit.
        UnsupportedDialectFeatureError: when per-query limits need windows the dialect lacks.
    """
    profile = get_dialect(dialect)
    options = options or RenderOptions()
    namer = namer or FieldNamer.for_plans(root)
    ids = query_ids(root)
    max_id = max(ids, default=1)
    if profile.is_bitmask and max_id > MAX_BITMASK_QUERIES:
        raise EncodingError(f"dialect {profile.name} encodes at most {MAX_BITMASK_QUERIES} queries, got id {max_id}")

    builder = _StatementBuilder(profile, options, namer, max_id)
    sql = builder.statement(root)

    kind = AnnotationKind.NONE if options.strip_annotation else output_kind(root)
    annotation_type = {
        AnnotationKind.SET: profile.query_set_type,
        AnnotationKind.ATOMIC: query_id_type(max_id),
    }.get(kind)
    rendered = RenderedQuery(sql, tuple(builder.fields(root)), kind, annotation_type, profile.name)

    if rendered.byte_length > profile.max_query_bytes:
        raise QueryTooLargeError(rendered.byte_length, profile.max_query_bytes, profile.name)
    if rendered.byte_length > 0.9 * profile.max_query_bytes:
        logger.warning(f"Rendered statement uses {rendered.byte_length} of {profile.max_query_bytes} bytes allowed")
    logger.debug(f"Rendered {type(root).__name__} plan into {rendered.byte_length} bytes of {profile.name} SQL")
    return rendered


def _expect(op: SharedOperator, kind: type) -> None:
    if not isinstance(op, kind):
        raise ValueError(f"expected a {kind.__name__} operator, got {type(op).__name__}")


@beartype
def gen_shared_scan_sql(
        scan: Scan,
        mode: ScanMode = "linear",
        dialect: str | DialectProfile = "presto",
        catalog: Catalog | None = None,
        prefilter: bool = True,
) -> RenderedQuery:
    """SQL for one shared scan; annotation column `query_set` comes last."""
    options = RenderOptions(mode=mode, prefilter=prefilter, catalog=catalog)
    return render_plan(scan, dialect, options)


@beartype
def gen_shared_join_sql(join: SharedOperator, dialect: str | DialectProfile = "presto") -> RenderedQuery:
    _expect(join, Join)
    return render_plan(join, dialect)


@beartype
def gen_shared_group_sql(group: SharedOperator, dialect: str | DialectProfile = "presto") -> RenderedQuery:
    """SQL for a shared group-by; set-annotated input is unnested inside the statement."""
    _expect(group, Group)
    return render_plan(group, dialect)


@beartype
def gen_order_limit_sql(order: SharedOperator, dialect: str | DialectProfile = "presto") -> RenderedQuery:
    _expect(order, OrderLimit)
    return render_plan(order, dialect)

