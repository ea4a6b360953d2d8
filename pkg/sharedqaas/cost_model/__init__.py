from .stats import (
    ANNOTATION_WIDTH,
    DEFAULT_SELECTIVITY,
    ColumnStats,
    NodeEstimate,
    TableStatistics,
    TableStats,
    combined_selectivity,
    combined_selectivity_of,
    estimate_node,
    estimate_rows,
    load_stats,
    recompute_bytes,
)
from .pricing import DEFAULT_USD_PER_TIB, TIB, PricingKind, PricingScheme
from .billing import (
    CostReport,
    StepCost,
    estimate_bytes,
    query_at_a_time_bytes,
    scan_fraction,
    statement_billed_bytes,
)
from .sweep import SWEEP_COLUMNS, batch_size_sweep, compare_batch_vs_qat

__all__ = [
    "ANNOTATION_WIDTH",
    "DEFAULT_SELECTIVITY",
    "DEFAULT_USD_PER_TIB",
    "SWEEP_COLUMNS",
    "TIB",
    "ColumnStats",
    "CostReport",
    "NodeEstimate",
    "PricingKind",
    "PricingScheme",
    "StepCost",
    "TableStatistics",
    "TableStats",
    "batch_size_sweep",
    "combined_selectivity",
    "combined_selectivity_of",
    "compare_batch_vs_qat",
    "estimate_bytes",
    "estimate_node",
    "estimate_rows",
    "load_stats",
    "query_at_a_time_bytes",
    "recompute_bytes",
    "scan_fraction",
    "statement_billed_bytes",
]
