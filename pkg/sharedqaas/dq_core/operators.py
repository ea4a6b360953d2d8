"""Shared operators of the data-query model.

Operators are immutable and compare by value, so two structurally identical
subtrees are the same plan node.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Mapping, Union

from ..relational_ir import Aggregate, BinOp, ColumnRef, JoinEdge, Literal, OrderItem, PredicateNF
from .annotation import AnnotationKind
from .relation import FieldKey

PerQueryPredicates = tuple[tuple[int, PredicateNF], ...]

# Expression over the fields of an operator input.
FieldExpr = Union[ColumnRef, str, Literal, BinOp]


def per_query(predicates: Mapping[int, PredicateNF]) -> PerQueryPredicates:
    return tuple(sorted(predicates.items()))


@dataclass(frozen=True)
class Scan:
    """Shared scan of a base table (or of a materialized temp table when `temporary`)."""

    table: str
    columns: tuple[ColumnRef, ...]
    predicates: PerQueryPredicates
    temporary: bool = False

    def children(self) -> tuple["SharedOperator", ...]:
        return ()

    @property
    def predicate_map(self) -> dict[int, PredicateNF]:
        return dict(self.predicates)


@dataclass(frozen=True)
class Select:
    """Shared selection; queries missing from `predicates` are dropped from annotations."""

    input: "SharedOperator"
    predicates: PerQueryPredicates

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.input,)

    @property
    def predicate_map(self) -> dict[int, PredicateNF]:
        return dict(self.predicates)


@dataclass(frozen=True)
class Join:
    left: "SharedOperator"
    right: "SharedOperator"
    edges: tuple[JoinEdge, ...]

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.left, self.right)


@dataclass(frozen=True)
class Unnest:
    input: "SharedOperator"

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.input,)


@dataclass(frozen=True)
class Group:
    input: "SharedOperator"
    keys: tuple[ColumnRef, ...]
    aggregates: tuple[tuple[str, Aggregate], ...]

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.input,)


@dataclass(frozen=True)
class Project:
    input: "SharedOperator"
    outputs: tuple[tuple[str, FieldExpr], ...]

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.input,)


@dataclass(frozen=True)
class OrderLimit:
    input: "SharedOperator"
    keys: tuple[OrderItem, ...]
    limits: tuple[tuple[int, int | None], ...]

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.input,)

    @property
    def limit_map(self) -> dict[int, int | None]:
        return dict(self.limits)


@dataclass(frozen=True)
class Demux:
    input: "SharedOperator"
    query_id: int

    def children(self) -> tuple["SharedOperator", ...]:
        return (self.input,)


SharedOperator = Union[Scan, Select, Join, Unnest, Group, Project, OrderLimit, Demux]


def with_children(op: SharedOperator, children: tuple[SharedOperator, ...]) -> SharedOperator:
    match op:
        case Scan():
            return op
        case Join():
            return replace(op, left=children[0], right=children[1])
        case _:
            return replace(op, input=children[0])


def output_kind(op: SharedOperator) -> AnnotationKind:
    """Annotation kind produced by `op`, checking the typing rules along the way."""
    match op:
        case Scan():
            return AnnotationKind.SET
        case Select() | Project():
            return output_kind(op.input)
        case Join():
            left, right = output_kind(op.left), output_kind(op.right)
            if AnnotationKind.NONE in (left, right):
                raise ValueError("join inputs must be annotated")
            if left == right == AnnotationKind.SET:
                return AnnotationKind.SET
            return AnnotationKind.ATOMIC
        case Unnest() | Group():
            if output_kind(op.input) == AnnotationKind.NONE:
                raise ValueError(f"{type(op).__name__} input must be annotated")
            return AnnotationKind.ATOMIC
        case OrderLimit():
            if output_kind(op.input) != AnnotationKind.ATOMIC:
                raise ValueError("order/limit input must carry atomic query_id annotations")
            return AnnotationKind.ATOMIC
        case Demux():
            return AnnotationKind.NONE
        case _:
            raise ValueError(f"Unknown operator: {op!r}")


def output_fields(op: SharedOperator) -> tuple[FieldKey, ...]:
    match op:
        case Scan():
            return op.columns
        case Select() | Unnest() | OrderLimit() | Demux():
            return output_fields(op.input)
        case Join():
            return output_fields(op.left) + output_fields(op.right)
        case Group():
            return tuple(op.keys) + tuple(name for name, _ in op.aggregates)
        case Project():
            return tuple(name for name, _ in op.outputs)
        case _:
            raise ValueError(f"Unknown operator: {op!r}")


def query_ids(op: SharedOperator) -> frozenset[int]:
    """Queries whose tuples may flow out of `op`."""
    match op:
        case Scan():
            return frozenset(q for q, _ in op.predicates)
        case Select():
            return query_ids(op.input) & frozenset(q for q, _ in op.predicates)
        case Join():
            return query_ids(op.left) & query_ids(op.right)
        case Demux():
            return frozenset((op.query_id,))
        case _:
            return query_ids(op.input)


def walk(op: SharedOperator) -> Iterator[SharedOperator]:
    """Post-order traversal; shared subtrees are visited once."""
    seen: set[int] = set()

    def visit(node: SharedOperator) -> Iterator[SharedOperator]:
        if id(node) in seen:
            return
        seen.add(id(node))
        for child in node.children():
            yield from visit(child)
        yield node

    yield from visit(op)


def scans(op: SharedOperator) -> list[Scan]:
    return [node for node in walk(op) if isinstance(node, Scan)]


def base_tables(op: SharedOperator) -> frozenset[str]:
    return frozenset(s.table for s in scans(op) if not s.temporary)
