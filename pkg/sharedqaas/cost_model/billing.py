"""Billed bytes and cost of shared plans, execution scripts and query-at-a-time execution."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import pandas as pd
from beartype import beartype

from ..dq_core import Scan, SharedOperator, query_ids, walk
from ..errors import MissingStatisticsError
from ..plan_dag.builder import SharedPlanDag
from ..plan_dag.script import ExecutionScript, MaterializeStep
from ..relational_ir import ColumnRef, QuerySpec, pushdown_predicates
from .pricing import PricingScheme
from .stats import (
    DEFAULT_SELECTIVITY,
    ColumnStats,
    TableStatistics,
    TableStats,
    ceil_bytes,
    combined_selectivity_of,
    estimate_rows,
    field_width,
    scan_columns,
    scan_selectivities,
)

logger = logging.getLogger(__name__)

CombineSelectivities = Callable[[Sequence[float]], float]


@dataclass(frozen=True)
class StepCost:
    step_id: str
    kind: str
    billed_bytes: int
    cost: float


@dataclass(frozen=True)
class CostReport:
    steps: tuple[StepCost, ...]
    batch_size: int
    scheme: str

    @property
    def total_bytes(self) -> int:
        return sum(s.billed_bytes for s in self.steps)

    @property
    def total_cost(self) -> float:
        return sum(s.cost for s in self.steps)

    @property
    def amortized_cost(self) -> float:
        """Per-query share of the total cost."""
        return self.total_cost / self.batch_size if self.batch_size else 0.0

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([vars(s) for s in self.steps], columns=["step_id", "kind", "billed_bytes", "cost"])
        total = pd.DataFrame([{
            "step_id": "total", "kind": self.scheme, "billed_bytes": self.total_bytes, "cost": self.total_cost,
        }])
        return pd.concat([frame, total], ignore_index=True)

    def to_csv(self, path: str | Path | None = None) -> str:
        text = self.to_frame().to_csv(index=False)
        if path is not None:
            with open(path, "w") as f:
                f.write(text)
        return text


def _column_bytes(scan: Scan, column: ColumnRef, stats: TableStats) -> int:
    if not scan.temporary:
        return stats.column_bytes(column)
    table = stats.table(scan.table)
    if str(column) not in table.columns:
        raise MissingStatisticsError(f"no statistics for column {column} of temp table {scan.table}")
    return table.columns[str(column)].total_bytes


def scan_fraction(
        scan: Scan,
        scheme: PricingScheme,
        selectivities: Mapping[int, float] | None,
        combine: CombineSelectivities = combined_selectivity_of,
) -> float:
    """Share of the scanned columns a bytes-scanned engine bills.

    `combine` turns the member selectivities into the fraction of tuples read; pass a
    measured combined selectivity here instead of the uncorrelated estimate.
    """
    if scan.temporary:
        return 1.0
    shares = scan_selectivities(scan, selectivities)
    if any(s >= scheme.full_scan_selectivity for s in shares):
        return 1.0
    return min(1.0, combine(shares))


@beartype
def statement_billed_bytes(
        plan: SharedOperator,
        stats: TableStats,
        scheme: PricingScheme,
        selectivities: Mapping[int, float] | None = None,
        combine: CombineSelectivities = combined_selectivity_of,
) -> int:
    scans = [op for op in walk(plan) if isinstance(op, Scan)]
    if scheme.kind == "columns-billed":
        read = {(scan.table, column): _column_bytes(scan, column, stats) for scan in scans for column in scan_columns(scan)}
        billed = float(sum(read.values()))
    else:
        billed = 0.0
        for scan in scans:
            full = sum(_column_bytes(scan, column, stats) for column in scan_columns(scan))
            billed += full * scan_fraction(scan, scheme, selectivities, combine)
    return max(ceil_bytes(billed), scheme.min_billed_bytes)


def _temp_statistics(step: MaterializeStep, stats: TableStats, selectivities: Mapping[int, float] | None) -> TableStatistics:
    rows = round(estimate_rows(step.plan, stats, selectivities))
    columns = {}
    for column in step.columns:
        width = field_width(column, stats)
        columns[str(column)] = ColumnStats(avg_width=width, total_bytes=round(rows * width))
    return TableStatistics(row_count=rows, columns=columns)


@beartype
def estimate_bytes(
        plan_or_script: SharedOperator | SharedPlanDag | ExecutionScript,
        stats: TableStats,
        scheme: PricingScheme,
        selectivities: Mapping[int, float] | None = None,
        batch_size: int | None = None,
        combine: CombineSelectivities = combined_selectivity_of,
) -> CostReport:
    """Billed bytes and cost of every statement a shared plan or script runs.

    Temp-table reads bill like base-table reads; writing a temp table bills nothing.
    """
    steps: list[StepCost] = []
    if isinstance(plan_or_script, ExecutionScript):
        for step in plan_or_script.steps:
            billed = statement_billed_bytes(step.plan, stats, scheme, selectivities, combine)
            steps.append(StepCost(step.step_id, step.kind, billed, scheme.cost(billed)))
            if isinstance(step, MaterializeStep):
                stats = stats.with_table(step.temp_table, _temp_statistics(step, stats, selectivities))
        size = plan_or_script.dag.size
    elif isinstance(plan_or_script, SharedPlanDag):
        for sink in plan_or_script.sinks:
            billed = statement_billed_bytes(sink.root, stats, scheme, selectivities, combine)
            steps.append(StepCost(f"run_{sink.sink_id}", "run", billed, scheme.cost(billed)))
        size = plan_or_script.size
    else:
        billed = statement_billed_bytes(plan_or_script, stats, scheme, selectivities, combine)
        steps.append(StepCost("statement", "run", billed, scheme.cost(billed)))
        size = len(query_ids(plan_or_script))
    report = CostReport(tuple(steps), batch_size if batch_size is not None else size, scheme.kind)
    logger.debug(f"Estimated {report.total_bytes} billed bytes for {report.batch_size} queries under {scheme.kind}")
    return report


@beartype
def query_at_a_time_bytes(
        spec: QuerySpec,
        stats: TableStats,
        scheme: PricingScheme,
        selectivity: float | None = None,
) -> int:
    """Billed bytes of running one query on its own."""
    per_table, _ = pushdown_predicates(spec)
    referenced: dict[str, set[ColumnRef]] = {t: set() for t in spec.base_relations}
    for column in spec.referenced_columns():
        referenced[column.table].add(column)
    billed = 0.0
    for table, columns in referenced.items():
        full = sum(stats.column_bytes(c) for c in columns)
        if scheme.kind == "columns-billed":
            billed += full
            continue
        predicate = per_table[table]
        share = 1.0 if predicate.is_true else 0.0 if predicate.is_false else selectivity
        if share is None:
            share = DEFAULT_SELECTIVITY
        billed += full * (1.0 if share >= scheme.full_scan_selectivity else share)
    return max(ceil_bytes(billed), scheme.min_billed_bytes)
