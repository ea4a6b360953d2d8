"""Result comparison between a demultiplexed shared result and the query's own result"""
import math
from collections import Counter
from typing import Any, Sequence

from beartype import beartype

from ..relational_ir import QuerySpec
from .backend import ResultTable

REL_TOL = 1e-9


def create_report_point(query_id, matched, first_difference=None, comparator=""):
    return {"query_id": query_id, "matched": matched, "first_difference": first_difference, "comparator": comparator}


def values_equal(a: Any, b: Any, rel_tol: float = REL_TOL) -> bool:
    numeric = (int, float)
    if isinstance(a, numeric) and isinstance(b, numeric) and not isinstance(a, bool) and not isinstance(b, bool):
        if isinstance(a, float) or isinstance(b, float):
            return math.isclose(a, b, rel_tol=rel_tol, abs_tol=rel_tol)
        return a == b
    return a == b


def rows_equal(a: Sequence[Any], b: Sequence[Any], rel_tol: float = REL_TOL) -> bool:
    return len(a) == len(b) and all(values_equal(x, y, rel_tol) for x, y in zip(a, b))


def _value_key(value: Any) -> tuple:
    if value is None:
        return 2, "", 0
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        # rounded so that values equal within tolerance sort next to each other
        return 0, "", round(float(value), 6)
    return 1, type(value).__name__, value


def _sort_key(row: Sequence[Any]) -> tuple:
    return tuple(_value_key(v) for v in row)


def first_multiset_difference(
        expected: Sequence[Sequence[Any]],
        actual: Sequence[Sequence[Any]],
        rel_tol: float = REL_TOL,
) -> tuple | None:
    """First row present in one multiset but not the other, or None when they are equal."""
    if not any(isinstance(v, float) for row in list(expected) + list(actual) for v in row):
        missing = Counter(map(tuple, expected)) - Counter(map(tuple, actual))
        extra = Counter(map(tuple, actual)) - Counter(map(tuple, expected))
        for row in expected:
            if tuple(row) in missing:
                return tuple(row)
        for row in actual:
            if tuple(row) in extra:
                return tuple(row)
        return None
    left = sorted(expected, key=_sort_key)
    right = sorted(actual, key=_sort_key)
    for x, y in zip(left, right):
        if not rows_equal(x, y, rel_tol):
            return tuple(x)
    if len(left) != len(right):
        return tuple((left if len(left) > len(right) else right)[min(len(left), len(right))])
    return None


class Comparator(object):
    def __init__(self, eval_tag: str = "", rel_tol: float = REL_TOL) -> None:
        self.eval_tag = eval_tag
        self.rel_tol = rel_tol

    @beartype
    def __call__(self, query_id: int, expected: ResultTable, actual: ResultTable) -> tuple[float, dict]:
        raise NotImplementedError


class ColumnsComparator(Comparator):
    """Same output columns in the same order."""

    @beartype
    def __call__(self, query_id: int, expected: ResultTable, actual: ResultTable) -> tuple[float, dict]:
        if expected.columns == actual.columns:
            return 1.0, create_report_point(query_id, True, comparator="columns")
        return 0.0, create_report_point(query_id, False, actual.columns, comparator="columns")


class MultisetComparator(Comparator):
    """Order-insensitive comparison with bag semantics."""

    @beartype
    def __call__(self, query_id: int, expected: ResultTable, actual: ResultTable) -> tuple[float, dict]:
        difference = first_multiset_difference(expected.rows, actual.rows, self.rel_tol)
        return float(difference is None), create_report_point(query_id, difference is None, difference, "multiset")


class OrderedComparator(Comparator):
    """Rows must follow the same sequence of ordering keys; rows sharing a key may come in any order.

    With `truncated`, the last group of ties may hold different rows, as any of them are
    admissible under a LIMIT.
    """

    def __init__(self, key_positions: Sequence[int], truncated: bool = False, **kwargs) -> None:
        super().__init__(**kwargs)
        self.key_positions = tuple(key_positions)
        self.truncated = truncated

    def _key(self, row: Sequence[Any]) -> tuple:
        return tuple(row[i] for i in self.key_positions)

    def _groups(self, rows: Sequence[Sequence[Any]]) -> list[list[Sequence[Any]]]:
        groups: list[list[Sequence[Any]]] = []
        for row in rows:
            if groups and rows_equal(self._key(groups[-1][0]), self._key(row), self.rel_tol):
                groups[-1].append(row)
            else:
                groups.append([row])
        return groups

    @beartype
    def __call__(self, query_id: int, expected: ResultTable, actual: ResultTable) -> tuple[float, dict]:
        name = "top-k" if self.truncated else "ordered"
        if len(expected.rows) != len(actual.rows):
            longer = expected.rows if len(expected.rows) > len(actual.rows) else actual.rows
            return 0.0, create_report_point(query_id, False, tuple(longer[min(len(expected), len(actual))]), name)
        for x, y in zip(expected.rows, actual.rows):
            if not rows_equal(self._key(x), self._key(y), self.rel_tol):
                return 0.0, create_report_point(query_id, False, tuple(x), name)
        expected_groups, actual_groups = self._groups(expected.rows), self._groups(actual.rows)
        for i, (x, y) in enumerate(zip(expected_groups, actual_groups)):
            if self.truncated and i == len(expected_groups) - 1:
                break
            difference = first_multiset_difference(x, y, self.rel_tol)
            if difference is not None:
                return 0.0, create_report_point(query_id, False, difference, name)
        return 1.0, create_report_point(query_id, True, comparator=name)


class ComparatorComb:
    def __init__(self, comparators: list[Comparator]) -> None:
        self.comparators = comparators

    @beartype
    def __call__(self, query_id: int, expected: ResultTable, actual: ResultTable) -> tuple[float, list]:
        score = 1.0
        reports = []
        for comparator in self.comparators:
            cur_score, report = comparator(query_id, expected, actual)
            reports.append(report)
            score *= cur_score
        return score, reports


@beartype
def comparator_router(spec: QuerySpec, rel_tol: float = REL_TOL) -> ComparatorComb:
    """Router to get the comparators a query's ordering and limit call for"""
    comparators: list[Comparator] = [ColumnsComparator(rel_tol=rel_tol)]
    names = spec.output_names
    positions = [names.index(item.name) for item in spec.ordering]
    match (bool(spec.ordering), spec.limit is not None):
        case (False, False):
            comparators.append(MultisetComparator(rel_tol=rel_tol))
        case (True, False):
            comparators.append(OrderedComparator(positions, rel_tol=rel_tol))
        case (True, True):
            comparators.append(OrderedComparator(positions, truncated=True, rel_tol=rel_tol))
        case (False, True):
            # any `limit` rows are admissible; only the count can be checked
            comparators.append(OrderedComparator((), truncated=True, rel_tol=rel_tol))
        case _:
            raise ValueError(f"unsupported ordering {spec.ordering} with limit {spec.limit}")
    return ComparatorComb(comparators)
