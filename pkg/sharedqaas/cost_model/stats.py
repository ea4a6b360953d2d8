"""Table statistics, combined selectivity and size estimates for shared operators."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..dq_core import (
    Demux,
    Group,
    Join,
    OrderLimit,
    Project,
    Scan,
    Select,
    SharedOperator,
    Unnest,
    output_fields,
    query_ids,
    walk,
)
from ..errors import CostDomainError, MissingStatisticsError
from ..relational_ir import Catalog, ColumnRef, PredicateNF

logger = logging.getLogger(__name__)

DEFAULT_SELECTIVITY = 0.1
GROUP_REDUCTION = 0.1
COMPUTED_FIELD_WIDTH = 8.0
ANNOTATION_WIDTH = 8.0


def combined_selectivity(s: float, q: int) -> float:
    """Fraction of tuples matched by at least one of `q` uncorrelated queries of selectivity `s`."""
    if isinstance(s, bool) or not 0.0 <= s <= 1.0:
        raise CostDomainError(f"selectivity must lie in [0, 1], got {s}")
    if isinstance(q, bool) or not isinstance(q, int) or q < 1:
        raise CostDomainError(f"query count must be a positive integer, got {q}")
    return 1.0 - (1.0 - s) ** q


def combined_selectivity_of(selectivities: Sequence[float]) -> float:
    """Combined selectivity of uncorrelated queries with individual selectivities."""
    remaining = 1.0
    for s in selectivities:
        if not 0.0 <= s <= 1.0:
            raise CostDomainError(f"selectivity must lie in [0, 1], got {s}")
        remaining *= 1.0 - s
    return 1.0 - remaining


class ColumnStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    avg_width: float = Field(gt=0)
    total_bytes: int = Field(ge=0)


class TableStatistics(BaseModel):
    model_config = ConfigDict(frozen=True)

    row_count: int = Field(ge=0)
    columns: dict[str, ColumnStats]

    @model_validator(mode="after")
    def _consistent_totals(self) -> "TableStatistics":
        for name, column in self.columns.items():
            expected = self.row_count * column.avg_width
            if abs(column.total_bytes - expected) > max(1.0, 1e-6 * expected):
                raise ValueError(
                    f"column {name}: total bytes {column.total_bytes} != {self.row_count} rows x {column.avg_width}"
                )
        return self


class TableStats(BaseModel):
    """Row counts and per-column byte sizes of every table a plan reads."""

    model_config = ConfigDict(frozen=True)

    tables: dict[str, TableStatistics]

    @classmethod
    def from_catalog(cls, catalog: Catalog) -> "TableStats":
        tables = {}
        for table in catalog.tables:
            tables[table.name] = TableStatistics(
                row_count=table.row_count,
                columns={
                    c.name: ColumnStats(avg_width=c.avg_width, total_bytes=round(table.row_count * c.avg_width))
                    for c in table.columns
                },
            )
        return cls(tables=tables)

    def table(self, name: str) -> TableStatistics:
        if name not in self.tables:
            raise MissingStatisticsError(f"no statistics for table {name}")
        return self.tables[name]

    def column(self, ref: ColumnRef) -> ColumnStats:
        table = self.table(ref.table)
        if ref.column not in table.columns:
            raise MissingStatisticsError(f"no statistics for column {ref}")
        return table.columns[ref.column]

    def row_count(self, table: str) -> int:
        return self.table(table).row_count

    def column_bytes(self, ref: ColumnRef) -> int:
        return self.column(ref).total_bytes

    def with_table(self, name: str, statistics: TableStatistics) -> "TableStats":
        return TableStats(tables={**self.tables, name: statistics})


def load_stats(path: str | Path) -> TableStats:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    # a catalog document works as well as a statistics document
    if isinstance(raw.get("tables"), list):
        return TableStats.from_catalog(Catalog.model_validate(raw))
    return TableStats.model_validate(raw)


def query_selectivity(predicate: PredicateNF, q: int, selectivities: Mapping[int, float] | None) -> float:
    if predicate.is_true:
        return 1.0
    if predicate.is_false:
        return 0.0
    if selectivities is None:
        return DEFAULT_SELECTIVITY
    return selectivities.get(q, DEFAULT_SELECTIVITY)


def scan_selectivities(scan: Scan, selectivities: Mapping[int, float] | None) -> list[float]:
    return [query_selectivity(p, q, selectivities) for q, p in scan.predicates]


def scan_columns(scan: Scan) -> list[ColumnRef]:
    """Columns a scan reads: its output columns plus those its predicates test."""
    read = dict.fromkeys(scan.columns)
    for _, predicate in scan.predicates:
        read.update(dict.fromkeys(sorted(predicate.columns())))
    return list(read)


@dataclass(frozen=True)
class NodeEstimate:
    rows: float
    row_width: float

    @property
    def bytes(self) -> float:
        return self.rows * self.row_width


def field_width(field, stats: TableStats) -> float:
    if isinstance(field, ColumnRef):
        try:
            return stats.column(field).avg_width
        except MissingStatisticsError:
            return COMPUTED_FIELD_WIDTH
    return COMPUTED_FIELD_WIDTH


def estimate_rows(op: SharedOperator, stats: TableStats, selectivities: Mapping[int, float] | None = None) -> float:
    match op:
        case Scan():
            return stats.row_count(op.table) * combined_selectivity_of(scan_selectivities(op, selectivities))
        case Select():
            kept = [query_selectivity(p, q, selectivities) for q, p in op.predicates]
            return estimate_rows(op.input, stats, selectivities) * combined_selectivity_of(kept)
        case Join():
            return max(estimate_rows(op.left, stats, selectivities), estimate_rows(op.right, stats, selectivities))
        case Unnest():
            rows = estimate_rows(op.input, stats, selectivities)
            shares = [DEFAULT_SELECTIVITY if selectivities is None else selectivities.get(q, DEFAULT_SELECTIVITY)
                      for q in query_ids(op.input)]
            combined = combined_selectivity_of(shares)
            return rows * (sum(shares) / combined if combined > 0 else 1.0)
        case Group():
            groups = len(query_ids(op))
            if not op.keys:
                return float(groups)
            return max(float(groups), estimate_rows(op.input, stats, selectivities) * GROUP_REDUCTION)
        case OrderLimit():
            rows = estimate_rows(op.input, stats, selectivities)
            limits = [k for _, k in op.limits]
            if limits and all(k is not None for k in limits):
                return min(rows, float(sum(limits)))
            return rows
        case Project() | Demux():
            return estimate_rows(op.input, stats, selectivities)
        case _:
            raise ValueError(f"Unknown operator: {op!r}")


def estimate_node(op: SharedOperator, stats: TableStats, selectivities: Mapping[int, float] | None = None) -> NodeEstimate:
    """Estimated output rows and row width of `op`, annotation included."""
    width = sum(field_width(f, stats) for f in output_fields(op)) + ANNOTATION_WIDTH
    return NodeEstimate(estimate_rows(op, stats, selectivities), width)


def recompute_bytes(op: SharedOperator, stats: TableStats, selectivities: Mapping[int, float] | None = None) -> float:
    """Bytes the scans below `op` read when the subtree is computed again."""
    total = 0.0
    for scan in (node for node in walk(op) if isinstance(node, Scan)):
        fraction = min(1.0, combined_selectivity_of(scan_selectivities(scan, selectivities)))
        total += fraction * sum(stats.column_bytes(c) for c in scan_columns(scan))
    return total


def full_column_bytes(columns: Sequence[ColumnRef], stats: TableStats) -> int:
    return sum(stats.column_bytes(c) for c in dict.fromkeys(columns))


def ceil_bytes(value: float) -> int:
    return int(math.ceil(value - 1e-9))
