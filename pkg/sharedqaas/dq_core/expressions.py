"""Row-level compilation of predicates, expressions and aggregates."""

from __future__ import annotations

from typing import Any, Callable, Sequence

from ..errors import UnknownRelationError
from ..relational_ir import Aggregate, BinOp, ColumnRef, Literal, PredicateNF
from .relation import FieldKey

RowFn = Callable[[tuple[Any, ...]], Any]


def _index_of(schema: Sequence[FieldKey]) -> dict[FieldKey, int]:
    return {key: i for i, key in enumerate(schema)}


def _lookup(index: dict[FieldKey, int], key: FieldKey) -> int:
    try:
        return index[key]
    except KeyError:
        raise UnknownRelationError(f"predicate references unknown column {key}") from None


def compile_predicate(predicate: PredicateNF, schema: Sequence[FieldKey]) -> Callable[[tuple[Any, ...]], bool]:
    if predicate.is_true:
        return lambda row: True
    if predicate.is_false:
        return lambda row: False
    index = _index_of(schema)
    disjuncts = [
        [(_lookup(index, atom.column), atom.test) for atom in conjunction]
        for conjunction in predicate.disjuncts
    ]

    def evaluate(row: tuple[Any, ...]) -> bool:
        return any(all(test(row[i]) for i, test in checks) for checks in disjuncts)

    return evaluate


def _arith(op: str, a: Any, b: Any) -> Any:
    if a is None or b is None:
        return None
    match op:
        case "+":
            return a + b
        case "-":
            return a - b
        case "*":
            return a * b
        case "/":
            return None if b == 0 else a / b
        case _:
            raise ValueError(f"Unknown arithmetic operator: {op}")


def compile_expr(expr: ColumnRef | str | Literal | BinOp, schema: Sequence[FieldKey]) -> RowFn:
    index = _index_of(schema)

    def build(node: Any) -> RowFn:
        match node:
            case Literal():
                value = node.value
                return lambda row: value
            case BinOp():
                left, right, op = build(node.left), build(node.right), node.op
                return lambda row: _arith(op, left(row), right(row))
            case ColumnRef() | str():
                i = _lookup(index, node)
                return lambda row: row[i]
            case _:
                raise ValueError(f"Unknown expression: {node!r}")

    return build(expr)


class Accumulator:
    """Running state of one aggregate within one group."""

    __slots__ = ("func", "count", "value")

    def __init__(self, func: str) -> None:
        self.func = func
        self.count = 0
        self.value: Any = None

    def add(self, x: Any) -> None:
        if x is None:
            return
        self.count += 1
        match self.func:
            case "SUM" | "AVG":
                self.value = x if self.value is None else self.value + x
            case "MIN":
                self.value = x if self.value is None or x < self.value else self.value
            case "MAX":
                self.value = x if self.value is None or x > self.value else self.value

    def result(self) -> Any:
        match self.func:
            case "COUNT":
                return self.count
            case "AVG":
                return None if self.count == 0 else self.value / self.count
            case _:
                return self.value


def compile_aggregates(
        aggregates: Sequence[Aggregate], schema: Sequence[FieldKey]
) -> tuple[Callable[[], list[Accumulator]], Callable[[list[Accumulator], tuple[Any, ...]], None]]:
    """Return (new_state, update) closures for a list of aggregates."""
    args = [None if a.arg is None else compile_expr(a.arg, schema) for a in aggregates]
    funcs = [a.func for a in aggregates]

    def new_state() -> list[Accumulator]:
        return [Accumulator(f) for f in funcs]

    def update(state: list[Accumulator], row: tuple[Any, ...]) -> None:
        for acc, arg in zip(state, args):
            # COUNT(*) counts rows, so feed it a non-null marker
            acc.add(True if arg is None else arg(row))

    return new_state, update


def empty_aggregate_row(aggregates: Sequence[Aggregate]) -> tuple[Any, ...]:
    """Values a scalar aggregate query returns over zero input rows."""
    return tuple(0 if a.func == "COUNT" else None for a in aggregates)
