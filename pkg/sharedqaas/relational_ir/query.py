"""Immutable per-query relational description (QuerySpec) and its building blocks."""

from __future__ import annotations

import datetime
import functools
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Union

from ..errors import QuerySyntaxError


@dataclass(frozen=True, order=True)
class ColumnRef:
    table: str
    column: str

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"


@dataclass(frozen=True)
class Placeholder:
    """A `?` parameter, numbered in order of appearance."""

    index: int

    def __str__(self) -> str:
        return "?"


Value = Union[int, float, str, datetime.date, Placeholder]

COMPARISON_OPS = ("=", "<", "<=", ">", ">=")
ATOM_OPS = COMPARISON_OPS + ("BETWEEN", "LIKE", "IN")

# flipping `5 < x` into `x > 5`
FLIPPED_OPS = {"=": "=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@functools.lru_cache(maxsize=4096)
def like_regex(pattern: str) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.DOTALL)


@dataclass(frozen=True)
class Atom:
    column: ColumnRef
    op: str
    values: tuple[Value, ...]

    def __post_init__(self) -> None:
        if self.op not in ATOM_OPS:
            raise QuerySyntaxError(f"unknown comparison operator {self.op!r}")
        arity = len(self.values)
        if self.op == "BETWEEN" and arity != 2:
            raise QuerySyntaxError("BETWEEN takes exactly two constants")
        if self.op == "IN" and arity < 1:
            raise QuerySyntaxError("IN list must not be empty")
        if self.op not in ("BETWEEN", "IN") and arity != 1:
            raise QuerySyntaxError(f"operator {self.op} takes one constant, got {arity}")

    @property
    def value(self) -> Value:
        return self.values[0]

    def is_bound(self) -> bool:
        return not any(isinstance(v, Placeholder) for v in self.values)

    def test(self, x: Any) -> bool:
        """Two-valued test: a NULL input never satisfies an atom."""
        if x is None:
            return False
        match self.op:
            case "=":
                return x == self.values[0]
            case "<":
                return x < self.values[0]
            case "<=":
                return x <= self.values[0]
            case ">":
                return x > self.values[0]
            case ">=":
                return x >= self.values[0]
            case "BETWEEN":
                return self.values[0] <= x <= self.values[1]
            case "IN":
                return x in self.values
            case "LIKE":
                return like_regex(self.values[0]).fullmatch(x) is not None
            case _:
                raise ValueError(f"Unknown operator: {self.op}")


Conjunction = tuple[Atom, ...]


@dataclass(frozen=True)
class PredicateNF:
    """A predicate in disjunctive normal form.

    `((),)` is TRUE (one empty conjunction) and `()` is FALSE (no disjunct).
    """

    disjuncts: tuple[Conjunction, ...]

    @classmethod
    def true(cls) -> "PredicateNF":
        return cls(((),))

    @classmethod
    def false(cls) -> "PredicateNF":
        return cls(())

    @classmethod
    def of(cls, *atoms: Atom) -> "PredicateNF":
        return cls((tuple(atoms),))

    @property
    def is_true(self) -> bool:
        return any(len(d) == 0 for d in self.disjuncts)

    @property
    def is_false(self) -> bool:
        return len(self.disjuncts) == 0

    def atoms(self) -> Iterator[Atom]:
        for conjunction in self.disjuncts:
            yield from conjunction

    def columns(self) -> frozenset[ColumnRef]:
        return frozenset(a.column for a in self.atoms())

    def tables(self) -> frozenset[str]:
        return frozenset(a.column.table for a in self.atoms())

    def conjoin(self, other: "PredicateNF") -> "PredicateNF":
        if self.is_true:
            return other
        if other.is_true:
            return self
        return PredicateNF(tuple(a + b for a in self.disjuncts for b in other.disjuncts))

    def disjoin(self, other: "PredicateNF") -> "PredicateNF":
        if self.is_true or other.is_true:
            return PredicateNF.true()
        return PredicateNF(self.disjuncts + other.disjuncts)

    def evaluate(self, lookup: Callable[[ColumnRef], Any]) -> bool:
        return any(all(atom.test(lookup(atom.column)) for atom in conj) for conj in self.disjuncts)

    def map_values(self, fn: Callable[[Atom, Value], Value]) -> "PredicateNF":
        return PredicateNF(
            tuple(
                tuple(Atom(a.column, a.op, tuple(fn(a, v) for v in a.values)) for a in conj)
                for conj in self.disjuncts
            )
        )


@dataclass(frozen=True)
class JoinEdge:
    left: ColumnRef
    right: ColumnRef
    comparison: str = "="

    @classmethod
    def canonical(cls, a: ColumnRef, b: ColumnRef) -> "JoinEdge":
        return cls(a, b) if a <= b else cls(b, a)

    def tables(self) -> tuple[str, str]:
        return self.left.table, self.right.table


@dataclass(frozen=True)
class Literal:
    value: int | float | str | datetime.date


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[ColumnRef, Literal, BinOp]

AGGREGATE_FUNCTIONS = ("COUNT", "SUM", "MIN", "MAX", "AVG")


@dataclass(frozen=True)
class Aggregate:
    func: str
    arg: Expr | None = None  # None only for COUNT(*)

    def __post_init__(self) -> None:
        if self.func not in AGGREGATE_FUNCTIONS:
            raise QuerySyntaxError(f"unknown aggregate function {self.func}")
        if self.arg is None and self.func != "COUNT":
            raise QuerySyntaxError(f"{self.func} requires an argument")


@dataclass(frozen=True)
class OutputColumn:
    name: str
    expr: Expr | Aggregate


@dataclass(frozen=True)
class OrderItem:
    """Ordering by one output column of the query."""

    name: str
    descending: bool = False


@dataclass(frozen=True)
class Grouping:
    keys: tuple[ColumnRef, ...]
    aggregates: tuple[OutputColumn, ...]


@dataclass(frozen=True)
class QuerySpec:
    base_relations: tuple[str, ...]
    join_edges: tuple[JoinEdge, ...]
    predicate: PredicateNF
    projections: tuple[OutputColumn, ...]
    grouping: Grouping | None = None
    ordering: tuple[OrderItem, ...] = ()
    limit: int | None = None

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.projections)

    def is_bound(self) -> bool:
        return all(a.is_bound() for a in self.predicate.atoms())

    def referenced_columns(self) -> frozenset[ColumnRef]:
        refs = set(self.predicate.columns())
        for edge in self.join_edges:
            refs.update((edge.left, edge.right))
        for output in self.projections:
            refs.update(expr_columns(output.expr))
        if self.grouping is not None:
            refs.update(self.grouping.keys)
        return frozenset(refs)


def expr_columns(expr: Expr | Aggregate | None) -> set[ColumnRef]:
    match expr:
        case None | Literal():
            return set()
        case ColumnRef():
            return {expr}
        case BinOp():
            return expr_columns(expr.left) | expr_columns(expr.right)
        case Aggregate():
            return expr_columns(expr.arg)
        case _:
            raise ValueError(f"Unknown expression: {expr!r}")


def query_id_type(batch_size: int) -> str:
    """Smallest integer SQL type able to hold every query id of a batch."""
    if batch_size <= 127:
        return "TINYINT"
    if batch_size <= 32767:
        return "SMALLINT"
    return "INTEGER"


def pushdown_predicates(q: QuerySpec) -> tuple[dict[str, PredicateNF], PredicateNF | None]:
    """Split a query's predicate into per-table parts.

    Returns:
        (per-table predicates, residual). Every per-table predicate is implied by the
        query predicate; `residual` is None when their conjunction equals it, otherwise it
        is the full predicate, to be checked again after joining.
    """
    predicate = q.predicate
    per_table = {t: PredicateNF.true() for t in q.base_relations}
    if predicate.is_false:
        return {t: PredicateNF.false() for t in q.base_relations}, None
    tables = predicate.tables()
    if len(tables) <= 1:
        for t in tables:
            per_table[t] = predicate
        return per_table, None
    for t in q.base_relations:
        disjuncts: list[Conjunction] = []
        for conjunction in predicate.disjuncts:
            atoms = tuple(a for a in conjunction if a.column.table == t)
            if not atoms:
                break
            disjuncts.append(atoms)
        else:
            per_table[t] = PredicateNF(tuple(dict.fromkeys(disjuncts)))
    return per_table, None if len(predicate.disjuncts) == 1 else predicate
