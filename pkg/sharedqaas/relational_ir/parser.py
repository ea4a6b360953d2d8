"""SQL text <-> QuerySpec.

Parsing goes through sqlglot; only the single-block SELECT subset the shared rewrites
cover is accepted and every other construct fails with an `UnsupportedConstructError`
naming it.
"""

from __future__ import annotations

import datetime
import logging
from typing import Any, Sequence

import sqlglot
from beartype import beartype
from sqlglot import exp
from sqlglot.errors import SqlglotError

from ..errors import (
    BindingError,
    QuerySyntaxError,
    UnknownRelationError,
    UnsupportedConstructError,
)
from .catalog import Catalog, coerce_value
from .query import (
    FLIPPED_OPS,
    Aggregate,
    Atom,
    BinOp,
    ColumnRef,
    Expr,
    Grouping,
    JoinEdge,
    Literal,
    OrderItem,
    OutputColumn,
    Placeholder,
    PredicateNF,
    QuerySpec,
)

logger = logging.getLogger(__name__)

MAX_DISJUNCTS = 4096

_COMPARISONS = {exp.EQ: "=", exp.LT: "<", exp.LTE: "<=", exp.GT: ">", exp.GTE: ">="}
_ARITHMETIC = {exp.Add: "+", exp.Sub: "-", exp.Mul: "*", exp.Div: "/"}
_AGGREGATES = {exp.Count: "COUNT", exp.Sum: "SUM", exp.Min: "MIN", exp.Max: "MAX", exp.Avg: "AVG"}


def _arg(node: exp.Expression, *names: str) -> Any:
    # sqlglot renamed a few argument keys across releases (e.g. "from" / "from_")
    for name in names:
        value = node.args.get(name)
        if value is not None:
            return value
    return None


class _QueryBuilder:
    def __init__(self, catalog: Catalog, select: exp.Select) -> None:
        self.catalog = catalog
        self.select = select
        self.aliases: dict[str, str] = {}
        self.tables: list[str] = []
        self.edges: list[JoinEdge] = []
        self.predicate = PredicateNF.true()
        self.placeholders = 0

    # tables and joins

    def add_table(self, node: exp.Expression) -> None:
        if isinstance(node, (exp.Subquery, exp.Select)):
            raise UnsupportedConstructError("subquery", "derived table in FROM")
        if not isinstance(node, exp.Table):
            raise UnsupportedConstructError(f"FROM item {node.key}")
        name = node.name.lower()
        if not self.catalog.has_table(name):
            raise UnknownRelationError(f"unknown table {name}")
        if name in self.tables:
            raise UnsupportedConstructError("self-join", f"table {name} appears twice")
        self.tables.append(name)
        self.aliases[name] = name
        alias = node.alias
        if alias:
            self.aliases[alias.lower()] = name

    def add_join(self, join: exp.Join) -> list[exp.Expression]:
        side = (join.side or "").upper()
        kind = (join.kind or "").upper()
        if side in ("LEFT", "RIGHT", "FULL") or kind == "OUTER":
            raise UnsupportedConstructError("outer join")
        if kind in ("SEMI", "ANTI"):
            raise UnsupportedConstructError(f"{kind} join")
        if _arg(join, "using"):
            raise UnsupportedConstructError("JOIN ... USING")
        self.add_table(join.this)
        on = _arg(join, "on")
        return _flatten_and(on) if on is not None else []

    # columns and constants

    def resolve(self, column: exp.Column) -> ColumnRef:
        if isinstance(column.this, exp.Star):
            raise UnsupportedConstructError("qualified star")
        name = column.name.lower()
        qualifier = (column.table or "").lower()
        if qualifier:
            if qualifier not in self.aliases:
                raise UnknownRelationError(f"unknown table or alias {qualifier}")
            table = self.aliases[qualifier]
            if not self.catalog.table(table).has_column(name):
                raise UnknownRelationError(f"unknown column {table}.{name}")
            return ColumnRef(table, name)
        owners = [t for t in self.tables if self.catalog.table(t).has_column(name)]
        if not owners:
            raise UnknownRelationError(f"unknown column {name}")
        if len(owners) > 1:
            raise QuerySyntaxError(f"column {name} is ambiguous between {', '.join(owners)}")
        return ColumnRef(owners[0], name)

    def constant(self, node: exp.Expression, column: ColumnRef) -> Any:
        column_type = self.catalog.column_type(column.table, column.column)
        value = self.raw_constant(node)
        if isinstance(value, Placeholder):
            return value
        try:
            return coerce_value(value, column_type, where=str(column))
        except BindingError as e:
            raise QuerySyntaxError(str(e)) from e

    def raw_constant(self, node: exp.Expression) -> Any:
        match node:
            case exp.Placeholder():
                placeholder = Placeholder(self.placeholders)
                self.placeholders += 1
                return placeholder
            case exp.Literal():
                if node.is_string:
                    return node.this
                return int(node.this) if node.is_int else float(node.this)
            case exp.Neg():
                inner = self.raw_constant(node.this)
                if isinstance(inner, (int, float)):
                    return -inner
            case exp.Paren():
                return self.raw_constant(node.this)
            case exp.Cast():
                inner = self.raw_constant(node.this)
                if node.to.is_type("date") and isinstance(inner, str):
                    try:
                        return datetime.date.fromisoformat(inner)
                    except ValueError as e:
                        raise QuerySyntaxError(f"invalid date literal {inner!r}") from e
                return inner
            case exp.Boolean():
                raise UnsupportedConstructError("boolean constant in comparison")
            case exp.Null():
                raise UnsupportedConstructError("NULL constant")
        raise UnsupportedConstructError(f"non-constant operand {node.sql()}")

    # predicates

    def to_nf(self, node: exp.Expression) -> PredicateNF:
        match node:
            case exp.Paren():
                return self.to_nf(node.this)
            case exp.And():
                result = self.to_nf(node.left).conjoin(self.to_nf(node.right))
                if len(result.disjuncts) > MAX_DISJUNCTS:
                    raise UnsupportedConstructError(
                        "predicate too large", f"more than {MAX_DISJUNCTS} disjuncts in normal form"
                    )
                return result
            case exp.Or():
                return self.to_nf(node.left).disjoin(self.to_nf(node.right))
            case exp.Boolean():
                return PredicateNF.true() if node.this else PredicateNF.false()
            case exp.Not():
                raise UnsupportedConstructError("NOT")
            case exp.Is():
                raise UnsupportedConstructError("IS NULL")
            case exp.NEQ():
                column, operand, _ = self._column_and_operand(node, "<>")
                value = self.constant(operand, column)
                return PredicateNF(((Atom(column, "<", (value,)),), (Atom(column, ">", (value,)),)))
            case exp.Between():
                column = self._column(node.this, "BETWEEN")
                low = self.constant(_arg(node, "low"), column)
                high = self.constant(_arg(node, "high"), column)
                return PredicateNF.of(Atom(column, "BETWEEN", (low, high)))
            case exp.In():
                if _arg(node, "query") is not None:
                    raise UnsupportedConstructError("subquery", "IN (SELECT ...)")
                column = self._column(node.this, "IN")
                values = tuple(self.constant(v, column) for v in node.expressions)
                return PredicateNF.of(Atom(column, "IN", values))
            case exp.Like():
                column = self._column(node.this, "LIKE")
                if self.catalog.column_type(column.table, column.column) != "VARCHAR":
                    raise QuerySyntaxError(f"LIKE on non-string column {column}")
                return PredicateNF.of(Atom(column, "LIKE", (self.constant(node.expression, column),)))
            case exp.ILike():
                raise UnsupportedConstructError("ILIKE")
        for cls, op in _COMPARISONS.items():
            if type(node) is cls:
                column, operand, flipped = self._column_and_operand(node, op)
                return PredicateNF.of(
                    Atom(column, FLIPPED_OPS[op] if flipped else op, (self.constant(operand, column),))
                )
        if isinstance(node, (exp.Subquery, exp.Exists)):
            raise UnsupportedConstructError("subquery")
        raise UnsupportedConstructError(f"predicate {node.key}", node.sql())

    def _column(self, node: exp.Expression, context: str) -> ColumnRef:
        if not isinstance(node, exp.Column):
            raise UnsupportedConstructError(f"{context} on a computed expression", node.sql())
        return self.resolve(node)

    def _column_and_operand(self, node: exp.Expression, op: str) -> tuple[ColumnRef, exp.Expression, bool]:
        left, right = node.left, node.right
        if isinstance(left, exp.Column) and isinstance(right, exp.Column):
            raise UnsupportedConstructError("column-to-column comparison", node.sql())
        if isinstance(left, exp.Column):
            return self.resolve(left), right, False
        if isinstance(right, exp.Column):
            return self.resolve(right), left, True
        raise UnsupportedConstructError(f"comparison {op} without a column operand", node.sql())

    def add_condition(self, node: exp.Expression) -> None:
        if isinstance(node, exp.EQ) and isinstance(node.left, exp.Column) and isinstance(node.right, exp.Column):
            left, right = self.resolve(node.left), self.resolve(node.right)
            if left.table == right.table:
                raise UnsupportedConstructError("column-to-column comparison", node.sql())
            self.edges.append(JoinEdge.canonical(left, right))
            return
        self.predicate = self.predicate.conjoin(self.to_nf(node))
        if len(self.predicate.disjuncts) > MAX_DISJUNCTS:
            raise UnsupportedConstructError("predicate too large", f"more than {MAX_DISJUNCTS} disjuncts")

    # select list

    def to_expr(self, node: exp.Expression) -> Expr:
        match node:
            case exp.Column():
                return self.resolve(node)
            case exp.Paren():
                return self.to_expr(node.this)
            case exp.Literal():
                if node.is_string:
                    return Literal(node.this)
                return Literal(int(node.this) if node.is_int else float(node.this))
            case exp.Neg():
                inner = self.to_expr(node.this)
                if isinstance(inner, Literal) and isinstance(inner.value, (int, float)):
                    return Literal(-inner.value)
                return BinOp("-", Literal(0), inner)
        for cls, op in _ARITHMETIC.items():
            if type(node) is cls:
                return BinOp(op, self.to_expr(node.left), self.to_expr(node.right))
        if isinstance(node, exp.AggFunc):
            raise UnsupportedConstructError("nested aggregate", node.sql())
        raise UnsupportedConstructError(f"expression {node.key}", node.sql())

    def to_output(self, node: exp.Expression) -> Expr | Aggregate:
        for cls, func in _AGGREGATES.items():
            if type(node) is cls:
                arg = node.this
                if isinstance(arg, exp.Distinct):
                    raise UnsupportedConstructError("DISTINCT aggregate")
                if func == "COUNT" and (arg is None or isinstance(arg, exp.Star)):
                    return Aggregate("COUNT")
                return Aggregate(func, self.to_expr(arg))
        if isinstance(node, exp.AggFunc):
            raise UnsupportedConstructError(f"aggregate function {node.key.upper()}")
        return self.to_expr(node)

    def outputs(self) -> list[OutputColumn]:
        outputs: list[OutputColumn] = []
        for position, item in enumerate(self.select.expressions):
            if isinstance(item, exp.Star):
                outputs.extend(self.star_outputs(outputs))
                continue
            if isinstance(item, exp.Alias):
                expr = self.to_output(item.this)
                name = item.alias.lower()
            else:
                expr = self.to_output(item)
                match expr:
                    case ColumnRef():
                        name = expr.column
                    case Aggregate():
                        name = f"{expr.func.lower()}_{position}"
                    case _:
                        name = f"expr_{position}"
            outputs.append(OutputColumn(name, expr))
        names = [o.name for o in outputs]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise QuerySyntaxError(f"duplicate output column names: {', '.join(duplicates)}")
        return outputs

    def star_outputs(self, existing: Sequence[OutputColumn]) -> list[OutputColumn]:
        taken = {o.name for o in existing}
        outputs = []
        for table in self.tables:
            for column in self.catalog.table(table).column_names:
                name = column if column not in taken else f"{table}_{column}"
                taken.add(name)
                outputs.append(OutputColumn(name, ColumnRef(table, column)))
        return outputs

    def ordering(self, outputs: Sequence[OutputColumn]) -> tuple[OrderItem, ...]:
        order = _arg(self.select, "order")
        if order is None:
            return ()
        items = []
        names = [o.name for o in outputs]
        for ordered in order.expressions:
            target = ordered.this
            descending = bool(_arg(ordered, "desc"))
            if isinstance(target, exp.Literal) and target.is_int:
                position = int(target.this)
                if not 1 <= position <= len(outputs):
                    raise QuerySyntaxError(f"ORDER BY position {position} is out of range")
                items.append(OrderItem(names[position - 1], descending))
                continue
            if isinstance(target, exp.Column) and not target.table and target.name.lower() in names:
                items.append(OrderItem(target.name.lower(), descending))
                continue
            expr = self.to_output(target)
            matches = [o.name for o in outputs if o.expr == expr]
            if not matches:
                raise UnsupportedConstructError("ORDER BY on an expression outside the select list", target.sql())
            items.append(OrderItem(matches[0], descending))
        return tuple(items)

    def limit(self) -> int | None:
        if _arg(self.select, "offset") is not None:
            raise UnsupportedConstructError("OFFSET")
        limit = _arg(self.select, "limit")
        if limit is None:
            return None
        value = _arg(limit, "expression", "this")
        if not isinstance(value, exp.Literal) or not value.is_int:
            raise UnsupportedConstructError("non-literal LIMIT")
        k = int(value.this)
        if k < 0:
            raise QuerySyntaxError("LIMIT must not be negative")
        return k

    def check_connected(self) -> None:
        if len(self.tables) <= 1:
            return
        reached = {self.tables[0]}
        changed = True
        while changed:
            changed = False
            for edge in self.edges:
                a, b = edge.tables()
                if (a in reached) != (b in reached):
                    reached.update((a, b))
                    changed = True
        missing = [t for t in self.tables if t not in reached]
        if missing:
            raise UnsupportedConstructError("cross product", f"no join condition reaches {', '.join(missing)}")

    def build(self) -> QuerySpec:
        select = self.select
        if _arg(select, "with") is not None:
            raise UnsupportedConstructError("WITH clause")
        if _arg(select, "distinct") is not None:
            raise UnsupportedConstructError("DISTINCT")
        if _arg(select, "having") is not None:
            raise UnsupportedConstructError("HAVING")
        if select.find(exp.Window) is not None:
            raise UnsupportedConstructError("window function")
        for nested in select.find_all(exp.Select):
            if nested is not select:
                raise UnsupportedConstructError("subquery")

        from_ = _arg(select, "from", "from_")
        if from_ is None:
            raise UnsupportedConstructError("SELECT without FROM")
        first = from_.this if from_.this is not None else from_.expressions[0]
        self.add_table(first)
        conditions: list[exp.Expression] = []
        for join in _arg(select, "joins") or []:
            conditions.extend(self.add_join(join))
        where = _arg(select, "where")
        if where is not None:
            conditions.extend(_flatten_and(where.this))
        for condition in conditions:
            self.add_condition(condition)
        self.check_connected()

        outputs = self.outputs()
        grouping = self.grouping(outputs)
        return QuerySpec(
            base_relations=tuple(self.tables),
            join_edges=tuple(dict.fromkeys(self.edges)),
            predicate=self.predicate,
            projections=tuple(outputs),
            grouping=grouping,
            ordering=self.ordering(outputs),
            limit=self.limit(),
        )

    def grouping(self, outputs: Sequence[OutputColumn]) -> Grouping | None:
        group = _arg(self.select, "group")
        keys: list[ColumnRef] = []
        if group is not None:
            for key in group.expressions:
                if not isinstance(key, exp.Column):
                    raise UnsupportedConstructError("GROUP BY on a computed expression", key.sql())
                keys.append(self.resolve(key))
        aggregates = [o for o in outputs if isinstance(o.expr, Aggregate)]
        if group is None and not aggregates:
            return None
        for output in outputs:
            if isinstance(output.expr, Aggregate):
                continue
            if output.expr not in keys:
                raise QuerySyntaxError(f"output {output.name} must appear in GROUP BY or be aggregated")
        return Grouping(tuple(dict.fromkeys(keys)), tuple(aggregates))


def _flatten_and(node: exp.Expression) -> list[exp.Expression]:
    if isinstance(node, exp.And):
        return _flatten_and(node.left) + _flatten_and(node.right)
    if isinstance(node, exp.Paren) and isinstance(node.this, exp.And):
        return _flatten_and(node.this)
    return [node]


@beartype
def parse_query(sql_text: str, catalog: Catalog) -> QuerySpec:
    """Parse one SELECT statement into a QuerySpec.

    Args:
        sql_text: a single SELECT statement over tables of `catalog`.
        catalog: the schema catalog used to resolve tables and columns.

    Returns:
        The QuerySpec capturing scans, join edges, predicate (in DNF), grouping, ordering and limit.

    Raises:
        QuerySyntaxError: malformed SQL or semantic errors such as ambiguous columns.
        UnknownRelationError: unknown table or column.
        UnsupportedConstructError: a construct outside the supported subset.
    """
    try:
        statements = [s for s in sqlglot.parse(sql_text) if s is not None]
    except SqlglotError as e:
        raise QuerySyntaxError(f"cannot parse query: {e}") from e
    if len(statements) != 1:
        raise QuerySyntaxError(f"expected a single SELECT statement, got {len(statements)}")
    root = statements[0]
    if isinstance(root, (exp.Union, exp.Intersect, exp.Except)):
        raise UnsupportedConstructError(root.key.upper())
    if not isinstance(root, exp.Select):
        raise QuerySyntaxError(f"expected a SELECT statement, got {root.key.upper()}")
    return _QueryBuilder(catalog, root).build()


def format_value(value: Any) -> str:
    match value:
        case Placeholder():
            return "?"
        case bool():
            return "TRUE" if value else "FALSE"
        case int():
            return str(value)
        case float():
            return repr(value)
        case str():
            escaped = value.replace("'", "''")
            return f"'{escaped}'"
        case datetime.date():
            return f"DATE '{value.isoformat()}'"
        case _:
            raise ValueError(f"Unknown constant type: {type(value)}")


def format_atom(atom: Atom, column_sql: str) -> str:
    match atom.op:
        case "BETWEEN":
            return f"{column_sql} BETWEEN {format_value(atom.values[0])} AND {format_value(atom.values[1])}"
        case "IN":
            return f"{column_sql} IN ({', '.join(format_value(v) for v in atom.values)})"
        case _:
            return f"{column_sql} {atom.op} {format_value(atom.value)}"


def format_expr(expr: Expr | Aggregate | None, column_sql=str) -> str:
    match expr:
        case ColumnRef():
            return column_sql(expr)
        case Literal():
            return format_value(expr.value)
        case BinOp():
            return f"({format_expr(expr.left, column_sql)} {expr.op} {format_expr(expr.right, column_sql)})"
        case Aggregate():
            inner = "*" if expr.arg is None else format_expr(expr.arg, column_sql)
            return f"{expr.func}({inner})"
        case _:
            raise ValueError(f"Unknown expression: {expr!r}")


def format_predicate(predicate: PredicateNF, column_sql=str) -> str:
    if predicate.is_true:
        return "TRUE"
    if predicate.is_false:
        return "FALSE"
    disjuncts = []
    for conjunction in predicate.disjuncts:
        disjuncts.append("(" + " AND ".join(format_atom(a, column_sql(a.column)) for a in conjunction) + ")")
    return " OR ".join(disjuncts)


@beartype
def unparse(q: QuerySpec) -> str:
    """Render a QuerySpec back to SQL with qualified columns and explicit aliases."""
    select_list = ", ".join(f"{format_expr(o.expr)} AS {o.name}" for o in q.projections)
    parts = [f"SELECT {select_list}", f"FROM {', '.join(q.base_relations)}"]
    conditions = [f"{e.left} {e.comparison} {e.right}" for e in q.join_edges]
    if not q.predicate.is_true:
        conditions.append(f"({format_predicate(q.predicate)})")
    if conditions:
        parts.append("WHERE " + " AND ".join(conditions))
    if q.grouping is not None and q.grouping.keys:
        parts.append("GROUP BY " + ", ".join(str(k) for k in q.grouping.keys))
    if q.ordering:
        parts.append("ORDER BY " + ", ".join(f"{o.name}{' DESC' if o.descending else ''}" for o in q.ordering))
    if q.limit is not None:
        parts.append(f"LIMIT {q.limit}")
    return " ".join(parts)


@beartype
def bind(q: QuerySpec, values: Sequence[Any], catalog: Catalog) -> QuerySpec:
    """Substitute `?` placeholders in order of appearance, coercing to the column types."""
    # normalization repeats an atom once per disjunct it is distributed into
    expected = len({v.index for a in q.predicate.atoms() for v in a.values if isinstance(v, Placeholder)})
    if expected != len(values):
        raise BindingError(f"query has {expected} parameters but {len(values)} bindings were given")

    def substitute(atom: Atom, value: Any) -> Any:
        if not isinstance(value, Placeholder):
            return value
        column_type = catalog.column_type(atom.column.table, atom.column.column)
        return coerce_value(values[value.index], column_type, where=str(atom.column))

    return QuerySpec(
        base_relations=q.base_relations,
        join_edges=q.join_edges,
        predicate=q.predicate.map_values(substitute),
        projections=q.projections,
        grouping=q.grouping,
        ordering=q.ordering,
        limit=q.limit,
    )
