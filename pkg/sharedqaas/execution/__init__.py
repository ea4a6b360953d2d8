from .backend import REFERENCE_DIALECTS, BackendAdapter, ReferenceBackend, ResultTable, demux_results
from .comparators import (
    ColumnsComparator,
    Comparator,
    ComparatorComb,
    MultisetComparator,
    OrderedComparator,
    comparator_router,
    create_report_point,
    first_multiset_difference,
    values_equal,
)
from .runner import RewriteHook, ScriptRun, StepTiming, demux_script, demux_sink, evaluate_script, run_script
from .equivalence import EquivalenceConfig, EquivalenceReport, corrupt_rewrite, equivalence_check

__all__ = [
    "REFERENCE_DIALECTS",
    "BackendAdapter",
    "ColumnsComparator",
    "Comparator",
    "ComparatorComb",
    "EquivalenceConfig",
    "EquivalenceReport",
    "MultisetComparator",
    "OrderedComparator",
    "ReferenceBackend",
    "ResultTable",
    "RewriteHook",
    "ScriptRun",
    "StepTiming",
    "comparator_router",
    "corrupt_rewrite",
    "create_report_point",
    "demux_results",
    "demux_script",
    "demux_sink",
    "equivalence_check",
    "evaluate_script",
    "first_multiset_difference",
    "run_script",
    "values_equal",
]
