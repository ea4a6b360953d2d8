from .annotation import (
    ARRAY,
    BITMASK,
    AnnotationKind,
    ArrayEncoding,
    BitmaskEncoding,
    QuerySetEncoding,
    encoding_for,
)
from .evaluator import (
    SharedPlanEvaluator,
    demux,
    project,
    shared_group_by,
    shared_join,
    shared_order_limit,
    shared_scan,
    shared_select,
    sort_rows,
    unnest_query_set,
)
from .expressions import compile_expr, compile_predicate, empty_aggregate_row
from .operators import (
    Demux,
    Group,
    Join,
    OrderLimit,
    Project,
    Scan,
    Select,
    SharedOperator,
    Unnest,
    base_tables,
    output_fields,
    output_kind,
    per_query,
    query_ids,
    scans,
    walk,
    with_children,
)
from .reference import evaluate_query
from .relation import (
    AnnotatedRelation,
    FieldKey,
    Relation,
    FIXTURE_SUFFIX,
    field_label,
    load_relation,
    load_tables,
    make_relation,
    relation_to_frame,
    write_relation,
)

__all__ = [
    "ARRAY",
    "BITMASK",
    "AnnotatedRelation",
    "AnnotationKind",
    "ArrayEncoding",
    "BitmaskEncoding",
    "Demux",
    "FieldKey",
    "Group",
    "Join",
    "OrderLimit",
    "Project",
    "QuerySetEncoding",
    "Relation",
    "Scan",
    "Select",
    "SharedOperator",
    "SharedPlanEvaluator",
    "Unnest",
    "base_tables",
    "compile_expr",
    "compile_predicate",
    "demux",
    "empty_aggregate_row",
    "encoding_for",
    "evaluate_query",
    "FIXTURE_SUFFIX",
    "field_label",
    "load_relation",
    "load_tables",
    "make_relation",
    "output_fields",
    "output_kind",
    "per_query",
    "project",
    "query_ids",
    "relation_to_frame",
    "scans",
    "shared_group_by",
    "shared_join",
    "shared_order_limit",
    "shared_scan",
    "shared_select",
    "sort_rows",
    "unnest_query_set",
    "walk",
    "with_children",
    "write_relation",
]
