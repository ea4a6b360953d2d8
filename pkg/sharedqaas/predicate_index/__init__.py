from .intervals import (
    Bound,
    Cut,
    IndexabilityReport,
    IntervalSet,
    QueryInterval,
    Term,
    atom_ranges,
    default_attribute_order,
    next_prefix,
    to_intervals,
)
from .tree import (
    LinearFallback,
    PredicateIndexTree,
    ResultSet,
    Split,
    TreeStats,
    build_index_tree,
    depth_bound,
    dump_tree,
    eval_tree,
    iter_leaves,
    max_comparisons,
    node_count,
    tree_stats,
)
from .vectorized import eval_linear_matrix, eval_tree_matrix, predicate_mask

__all__ = [
    "Bound",
    "Cut",
    "IndexabilityReport",
    "IntervalSet",
    "LinearFallback",
    "PredicateIndexTree",
    "QueryInterval",
    "ResultSet",
    "Split",
    "Term",
    "TreeStats",
    "atom_ranges",
    "build_index_tree",
    "default_attribute_order",
    "depth_bound",
    "dump_tree",
    "eval_linear_matrix",
    "eval_tree",
    "eval_tree_matrix",
    "iter_leaves",
    "max_comparisons",
    "next_prefix",
    "node_count",
    "predicate_mask",
    "to_intervals",
    "tree_stats",
]
