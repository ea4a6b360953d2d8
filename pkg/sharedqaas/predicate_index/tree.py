"""Median-split decision tree over predicate interval bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Mapping, Sequence, Union

from beartype import beartype

from ..errors import MissingAttributeError, NoIndexableIntervalsError
from ..relational_ir import ColumnRef, PredicateNF, format_value
from .intervals import Cut, IntervalSet, Term

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResultSet:
    queries: tuple[int, ...]


@dataclass(frozen=True)
class LinearFallback:
    """Leaf whose `known` queries match outright and whose other queries need a residual check."""

    known: tuple[int, ...]
    residuals: tuple[tuple[int, PredicateNF], ...]

    @property
    def queries(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.known) | {q for q, _ in self.residuals}))


@dataclass(frozen=True)
class Split:
    """Inner node: `left` is taken when `attribute <comparison> value` holds."""

    attribute: ColumnRef
    value: Any
    comparison: str
    left: "PredicateIndexTree"
    right: "PredicateIndexTree"

    @property
    def cut(self) -> Cut:
        return Cut(self.value, 0 if self.comparison == "<" else 1)


PredicateIndexTree = Union[Split, ResultSet, LinearFallback]

# attribute -> (lower cut, upper cut); points lie strictly above the lower and not above the upper cut
Region = dict[ColumnRef, tuple[Cut | None, Cut | None]]


@dataclass
class _Box:
    term: Term
    ranges: dict[ColumnRef, tuple[Cut | None, Cut | None]]


def _overlaps(box_range: tuple[Cut | None, Cut | None], region_range: tuple[Cut | None, Cut | None]) -> bool:
    lo = max((c for c in (box_range[0], region_range[0]) if c is not None), default=None)
    hi = min((c for c in (box_range[1], region_range[1]) if c is not None), default=None)
    return lo is None or hi is None or lo < hi


def _inside(cut: Cut, region_range: tuple[Cut | None, Cut | None]) -> bool:
    lo, hi = region_range
    return (lo is None or lo < cut) and (hi is None or cut < hi)


def _leaf(boxes: Sequence[_Box]) -> PredicateIndexTree:
    known = sorted({b.term.query for b in boxes if not b.term.residual})
    residual_terms: dict[int, list[tuple]] = {}
    for box in boxes:
        q = box.term.query
        if q in known or not box.term.residual:
            continue
        residual_terms.setdefault(q, []).append(box.term.residual)
    if not residual_terms:
        return ResultSet(tuple(known))
    residuals = tuple(
        (q, PredicateNF(tuple(dict.fromkeys(terms)))) for q, terms in sorted(residual_terms.items())
    )
    return LinearFallback(tuple(known), residuals)


def _build(boxes: list[_Box], order: Sequence[ColumnRef], level: int, region: Region) -> PredicateIndexTree:
    while level < len(order):
        attribute = order[level]
        region_range = region.get(attribute, (None, None))
        cuts = sorted({
            c for box in boxes for c in box.ranges.get(attribute, (None, None))
            if c is not None and _inside(c, region_range)
        })
        if cuts:
            split = cuts[(len(cuts) - 1) // 2]
            left_region = {**region, attribute: (region_range[0], split)}
            right_region = {**region, attribute: (split, region_range[1])}
            left = [b for b in boxes if _overlaps(b.ranges.get(attribute, (None, None)), left_region[attribute])]
            right = [b for b in boxes if _overlaps(b.ranges.get(attribute, (None, None)), right_region[attribute])]
            return Split(
                attribute=attribute,
                value=split.value,
                comparison=split.comparison,
                left=_build(left, order, level, left_region),
                right=_build(right, order, level, right_region),
            )
        # attribute exhausted in this region, continue with the next one
        level += 1
    return _leaf(boxes)


@beartype
def build_index_tree(intervals: IntervalSet, attr_order: Sequence[ColumnRef] | None = None) -> PredicateIndexTree:
    """Build the decision tree by recursively splitting at the lower median of distinct bounds.

    Raises:
        NoIndexableIntervalsError: when no term restricts any attribute; use linear evaluation instead.
    """
    if not any(intervals.intervals.values()):
        raise NoIndexableIntervalsError("no indexable intervals; evaluate the predicates linearly")
    if attr_order is None:
        attr_order = sorted(intervals.intervals, key=lambda a: (-len(intervals.distinct_cuts(a)), a))
    else:
        attr_order = list(attr_order) + sorted(a for a in intervals.intervals if a not in attr_order)
    ranges: dict[tuple[int, int], dict[ColumnRef, tuple[Cut | None, Cut | None]]] = {}
    for attribute, items in intervals.intervals.items():
        for interval in items:
            ranges.setdefault((interval.query, interval.term), {})[attribute] = interval.cuts
    boxes = [_Box(term, ranges.get((term.query, term.term), {})) for term in intervals.terms]
    tree = _build(boxes, tuple(attr_order), 0, {})
    logger.debug(f"Built predicate index tree over {len(boxes)} terms:\n{dump_tree(tree)}")
    return tree


def _value_of(row: Mapping[ColumnRef, Any] | Callable[[ColumnRef], Any], attribute: ColumnRef) -> Any:
    if callable(row):
        return row(attribute)
    if attribute not in row:
        raise MissingAttributeError(f"tuple has no value for indexed attribute {attribute}")
    return row[attribute]


@beartype
def eval_tree(tree: PredicateIndexTree, row: Mapping[ColumnRef, Any]) -> frozenset[int]:
    """Queries whose predicate holds for `row`."""
    node = tree
    while isinstance(node, Split):
        value = _value_of(row, node.attribute)
        if value is None:
            raise MissingAttributeError(f"indexed attribute {node.attribute} is NULL")
        node = node.left if node.cut.below(value) else node.right
    if isinstance(node, ResultSet):
        return frozenset(node.queries)
    matched = set(node.known)
    for q, residual in node.residuals:
        if residual.evaluate(lambda column: _value_of(row, column)):
            matched.add(q)
    return frozenset(matched)


def iter_leaves(tree: PredicateIndexTree, region: Region | None = None) -> Iterator[tuple[Region, PredicateIndexTree]]:
    """Every leaf with the region of the attribute space that reaches it."""
    region = region or {}
    if not isinstance(tree, Split):
        yield region, tree
        return
    lo, hi = region.get(tree.attribute, (None, None))
    yield from iter_leaves(tree.left, {**region, tree.attribute: (lo, tree.cut)})
    yield from iter_leaves(tree.right, {**region, tree.attribute: (tree.cut, hi)})


def max_comparisons(tree: PredicateIndexTree) -> int:
    if isinstance(tree, Split):
        return 1 + max(max_comparisons(tree.left), max_comparisons(tree.right))
    return 0


def node_count(tree: PredicateIndexTree) -> int:
    if isinstance(tree, Split):
        return 1 + node_count(tree.left) + node_count(tree.right)
    return 1


def depth_bound(distinct_bounds: int) -> int:
    """Upper bound on comparisons for one attribute with `distinct_bounds` distinct cuts.

    Bounds are counted as cuts, not as values: `x < 5` and `x <= 5` are two bounds,
    and an equality `x = 5` contributes both. Counted by value, a lone equality would
    need two comparisons against a bound of one.
    """
    if distinct_bounds <= 1:
        return distinct_bounds
    return math.ceil(math.log2(distinct_bounds)) + 1


def dump_tree(tree: PredicateIndexTree, indent: int = 0) -> str:
    """Indented text form, one node per line."""
    pad = "  " * indent
    match tree:
        case Split():
            head = f"{pad}IF {tree.attribute} {tree.comparison} {format_value(tree.value)}"
            return "\n".join((head, dump_tree(tree.left, indent + 1), f"{pad}ELSE", dump_tree(tree.right, indent + 1)))
        case ResultSet():
            return f"{pad}RESULT {list(tree.queries)}"
        case LinearFallback():
            checks = ", ".join(f"{q}" for q, _ in tree.residuals)
            return f"{pad}RESULT {list(tree.known)} CHECK [{checks}]"
        case _:
            raise ValueError(f"Unknown tree node: {tree!r}")


@dataclass(frozen=True)
class TreeStats:
    max_comparisons: int
    node_count: int
    sql_bytes: int


def tree_stats(tree: PredicateIndexTree, dialect: Any = "presto") -> TreeStats:
    """Complexity of a tree and the size of its SQL rendering under `dialect`."""
    # sql_gen depends on this package, so the renderer is imported on use
    from ..sql_gen import get_dialect, render_index_tree

    profile = get_dialect(dialect) if isinstance(dialect, str) else dialect
    sql = render_index_tree(tree, profile, lambda c: c.column)
    return TreeStats(max_comparisons(tree), node_count(tree), len(sql.encode("utf-8")))
