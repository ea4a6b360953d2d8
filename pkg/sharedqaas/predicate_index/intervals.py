"""Per-query predicates as intervals over attribute domains.

A bound of an interval is kept as a *cut* of the attribute's ordered domain: `Cut(v, 0)`
sits just before `v` (values above it satisfy `x >= v`) and `Cut(v, 1)` sits just
after `v` (values above it satisfy `x > v`). Every bound maps to exactly one cut, so
open and closed bounds on the same constant stay distinct and compare totally.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from beartype import beartype

from ..relational_ir import Atom, ColumnRef, PredicateNF

logger = logging.getLogger(__name__)

MAX_TERMS_PER_QUERY = 4096


@dataclass(frozen=True, order=True)
class Cut:
    value: Any
    side: int  # 0: just before value, 1: just after value

    @property
    def comparison(self) -> str:
        """Comparison that holds for points below the cut."""
        return "<" if self.side == 0 else "<="

    def below(self, x: Any) -> bool:
        return x < self.value if self.side == 0 else x <= self.value


@dataclass(frozen=True)
class Bound:
    value: Any
    inclusive: bool


def lower_cut(bound: Bound | None) -> Cut | None:
    if bound is None:
        return None
    return Cut(bound.value, 0 if bound.inclusive else 1)


def upper_cut(bound: Bound | None) -> Cut | None:
    if bound is None:
        return None
    return Cut(bound.value, 1 if bound.inclusive else 0)


@dataclass(frozen=True)
class QueryInterval:
    """One indexable restriction of a query term on one attribute (None bounds are infinite)."""

    query: int
    term: int
    attribute: ColumnRef
    lower: Bound | None
    upper: Bound | None

    @property
    def cuts(self) -> tuple[Cut | None, Cut | None]:
        return lower_cut(self.lower), upper_cut(self.upper)


@dataclass(frozen=True)
class Term:
    """One disjunct of a query after IN expansion, with the atoms left for linear checks."""

    query: int
    term: int
    residual: tuple[Atom, ...]


@dataclass(frozen=True)
class IntervalSet:
    intervals: Mapping[ColumnRef, tuple[QueryInterval, ...]]
    terms: tuple[Term, ...]

    def distinct_cuts(self, attribute: ColumnRef) -> set[Cut]:
        cuts: set[Cut] = set()
        for interval in self.intervals.get(attribute, ()):
            cuts.update(c for c in interval.cuts if c is not None)
        return cuts


@dataclass(frozen=True)
class IndexabilityReport:
    indexable: Mapping[int, tuple[Atom, ...]]
    non_indexable: Mapping[int, tuple[Atom, ...]]
    attribute_order: tuple[ColumnRef, ...]


def next_prefix(prefix: str) -> str | None:
    """Smallest string greater than every string starting with `prefix`."""
    while prefix:
        last = ord(prefix[-1])
        if last < 0x10FFFF:
            return prefix[:-1] + chr(last + 1)
        prefix = prefix[:-1]
    return None


def _like_prefix(pattern: str) -> str:
    for i, ch in enumerate(pattern):
        if ch in "%_":
            return pattern[:i]
    return pattern


def atom_ranges(atom: Atom) -> tuple[list[tuple[Bound | None, Bound | None]], bool] | None:
    """Interval form of an atom.

    Returns None when the atom cannot be indexed, otherwise (ranges, exact). `ranges`
    is a union of intervals; `exact` is False when the ranges only over-approximate the
    atom and the atom must still be checked linearly.
    """
    match atom.op:
        case "=":
            point = Bound(atom.value, True)
            return [(point, point)], True
        case "<":
            return [(None, Bound(atom.value, False))], True
        case "<=":
            return [(None, Bound(atom.value, True))], True
        case ">":
            return [(Bound(atom.value, False), None)], True
        case ">=":
            return [(Bound(atom.value, True), None)], True
        case "BETWEEN":
            return [(Bound(atom.values[0], True), Bound(atom.values[1], True))], True
        case "IN":
            return [(Bound(v, True), Bound(v, True)) for v in sorted(set(atom.values))], True
        case "LIKE":
            pattern = atom.value
            prefix = _like_prefix(pattern)
            if not prefix:
                return None
            if prefix == pattern:
                point = Bound(pattern, True)
                return [(point, point)], True
            upper = next_prefix(prefix)
            ranges = [(Bound(prefix, True), Bound(upper, False) if upper is not None else None)]
            return ranges, pattern == prefix + "%"
        case _:
            return None


def _intersect(a: tuple[Cut | None, Cut | None], b: tuple[Cut | None, Cut | None]) -> tuple[Cut | None, Cut | None]:
    lo = a[0] if b[0] is None else b[0] if a[0] is None else max(a[0], b[0])
    hi = a[1] if b[1] is None else b[1] if a[1] is None else min(a[1], b[1])
    return lo, hi


def _non_empty(lo: Cut | None, hi: Cut | None) -> bool:
    return lo is None or hi is None or lo < hi


def _cut_to_bound(cut: Cut | None, upper: bool) -> Bound | None:
    if cut is None:
        return None
    inclusive = cut.side == (1 if upper else 0)
    return Bound(cut.value, inclusive)


def default_attribute_order(preds: Mapping[int, PredicateNF]) -> tuple[ColumnRef, ...]:
    """Attributes by descending number of distinct cuts, ties by name."""
    cuts: dict[ColumnRef, set[Cut]] = {}
    for predicate in preds.values():
        for atom in predicate.atoms():
            ranges = atom_ranges(atom)
            if ranges is None:
                continue
            bucket = cuts.setdefault(atom.column, set())
            for lo, hi in ranges[0]:
                bucket.update(c for c in (lower_cut(lo), upper_cut(hi)) if c is not None)
    return tuple(sorted(cuts, key=lambda a: (-len(cuts[a]), a)))


@beartype
def to_intervals(
        preds: Mapping[int, PredicateNF],
        max_attributes: int | None = None,
        attr_order: Sequence[ColumnRef] | None = None,
) -> tuple[IntervalSet, IndexabilityReport]:
    """Turn each query's DNF terms into per-attribute intervals.

    Every disjunct becomes its own term carrying the query id. IN lists expand into one
    term per value. Several atoms on one attribute within a term intersect; terms with
    an empty intersection are dropped.

    Args:
        preds: predicate per query id.
        max_attributes: index at most this many attributes (in attribute order); atoms on
            the remaining attributes become residual linear checks.
        attr_order: attribute order; defaults to `default_attribute_order`.
    """
    order = tuple(attr_order) if attr_order is not None else default_attribute_order(preds)
    indexed = set(order if max_attributes is None else order[:max_attributes])

    intervals: dict[ColumnRef, list[QueryInterval]] = {}
    terms: list[Term] = []
    indexable: dict[int, list[Atom]] = {}
    non_indexable: dict[int, list[Atom]] = {}

    for q in sorted(preds):
        indexable.setdefault(q, [])
        non_indexable.setdefault(q, [])
        term_index = 0
        for conjunction in preds[q].disjuncts:
            alternatives: list[list[tuple[ColumnRef, tuple[Cut | None, Cut | None]]]] = []
            residual: list[Atom] = []
            for atom in conjunction:
                ranges = atom_ranges(atom) if atom.column in indexed else None
                if ranges is None:
                    residual.append(atom)
                    non_indexable[q].append(atom)
                    continue
                choices, exact = ranges
                indexable[q].append(atom)
                if not exact:
                    residual.append(atom)
                alternatives.append([(atom.column, (lower_cut(lo), upper_cut(hi))) for lo, hi in choices])

            count = 1
            for choice in alternatives:
                count *= len(choice)
            if count > MAX_TERMS_PER_QUERY:
                raise ValueError(f"query {q} expands into {count} interval terms")

            for combination in itertools.product(*alternatives):
                box: dict[ColumnRef, tuple[Cut | None, Cut | None]] = {}
                for attribute, cuts in combination:
                    box[attribute] = _intersect(box[attribute], cuts) if attribute in box else cuts
                if not all(_non_empty(*cuts) for cuts in box.values()):
                    continue
                for attribute, (lo, hi) in sorted(box.items()):
                    intervals.setdefault(attribute, []).append(QueryInterval(
                        query=q, term=term_index, attribute=attribute,
                        lower=_cut_to_bound(lo, upper=False), upper=_cut_to_bound(hi, upper=True),
                    ))
                terms.append(Term(query=q, term=term_index, residual=tuple(residual)))
                term_index += 1

    report = IndexabilityReport(
        indexable={q: tuple(a) for q, a in indexable.items()},
        non_indexable={q: tuple(a) for q, a in non_indexable.items()},
        attribute_order=order,
    )
    interval_set = IntervalSet(
        intervals={a: tuple(i) for a, i in intervals.items()},
        terms=tuple(terms),
    )
    return interval_set, report
