"""Batched versus query-at-a-time cost tables."""

from __future__ import annotations

import logging
from typing import Mapping, Sequence

import pandas as pd
from beartype import beartype
from tqdm import tqdm

from ..plan_dag.builder import build_shared_plan
from ..relational_ir import GLOBAL_TEMPLATE, BatchMember, Catalog, QueryBatch, QuerySpec, extract_template
from .billing import estimate_bytes, query_at_a_time_bytes
from .pricing import PricingScheme
from .stats import TableStats

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "batch_id",
    "batch_size",
    "batched_bytes",
    "batched_cost",
    "qat_bytes",
    "qat_cost",
    "savings_ratio",
    "amortized_cost",
]

Selectivities = Mapping[int, float] | float | None


def _per_query(selectivities: Selectivities, batch: QueryBatch) -> dict[int, float] | None:
    if selectivities is None:
        return None
    if isinstance(selectivities, (int, float)):
        return {q: float(selectivities) for q in batch.query_ids}
    return dict(selectivities)


@beartype
def compare_batch_vs_qat(
        workload: Sequence[tuple[QueryBatch, Selectivities]],
        stats: TableStats,
        scheme: PricingScheme,
        catalog: Catalog,
) -> pd.DataFrame:
    """One row per batch: cost of the shared plan against running every member alone.

    Selectivities are given per batch, either as one fraction for every member or as a
    mapping from query id within the batch to its fraction.
    """
    rows = []
    for batch, selectivities in workload:
        per_query = _per_query(selectivities, batch)
        report = estimate_bytes(build_shared_plan(batch, catalog), stats, scheme, per_query)
        single = [
            query_at_a_time_bytes(m.spec, stats, scheme, None if per_query is None else per_query.get(m.query_id))
            for m in batch.members
        ]
        qat_bytes = sum(single)
        qat_cost = sum(scheme.cost(b) for b in single)
        batched_cost = report.total_cost
        if report.total_bytes > 0:
            ratio = qat_bytes / report.total_bytes
        else:
            ratio = 1.0 if qat_bytes == 0 else float("inf")
        rows.append({
            "batch_id": batch.batch_id,
            "batch_size": batch.size,
            "batched_bytes": report.total_bytes,
            "batched_cost": batched_cost,
            "qat_bytes": qat_bytes,
            "qat_cost": qat_cost,
            "savings_ratio": ratio,
            "amortized_cost": report.amortized_cost,
        })
        logger.info(
            f"Batch {batch.batch_id} ({batch.size} queries): {report.total_bytes} B batched, "
            f"{qat_bytes} B query-at-a-time, savings x{ratio:.3f}"
        )
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


@beartype
def batch_size_sweep(
        specs: Sequence[QuerySpec],
        sizes: Sequence[int],
        stats: TableStats,
        scheme: PricingScheme,
        catalog: Catalog,
        selectivities: Selectivities = None,
        progress: bool = False,
) -> pd.DataFrame:
    """Cost table for batches made of the first n instances, for each n in `sizes`."""
    largest = max(sizes, default=0)
    if largest > len(specs):
        raise ValueError(f"sweep up to {largest} queries needs as many instances, got {len(specs)}")
    workload = []
    for batch_id, n in enumerate(tqdm(sizes, desc="Batch sizes", disable=not progress)):
        if n < 1:
            raise ValueError(f"batch sizes must be positive, got {n}")
        members = tuple(BatchMember(i + 1, spec, i) for i, spec in enumerate(specs[:n]))
        templates = {extract_template(m.spec)[0] for m in members}
        template = templates.pop() if len(templates) == 1 else GLOBAL_TEMPLATE
        workload.append((QueryBatch(batch_id, members, template), selectivities))
    return compare_batch_vs_qat(workload, stats, scheme, catalog)
