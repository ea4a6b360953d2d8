from .batching import (
    GLOBAL_TEMPLATE,
    BatchMember,
    QueryBatch,
    QueryRecord,
    extract_template,
    group_batch,
    load_batch_file,
    parse_records,
)
from .catalog import Catalog, ColumnSchema, TableSchema, coerce_value, load_catalog
from .parser import bind, format_predicate, format_value, parse_query, unparse
from .query import (
    Aggregate,
    Atom,
    BinOp,
    ColumnRef,
    Grouping,
    JoinEdge,
    Literal,
    OrderItem,
    OutputColumn,
    Placeholder,
    PredicateNF,
    QuerySpec,
    expr_columns,
    like_regex,
    pushdown_predicates,
    query_id_type,
)

__all__ = [
    "GLOBAL_TEMPLATE",
    "Aggregate",
    "Atom",
    "BatchMember",
    "BinOp",
    "Catalog",
    "ColumnRef",
    "ColumnSchema",
    "Grouping",
    "JoinEdge",
    "Literal",
    "OrderItem",
    "OutputColumn",
    "Placeholder",
    "PredicateNF",
    "QueryBatch",
    "QueryRecord",
    "QuerySpec",
    "TableSchema",
    "bind",
    "coerce_value",
    "expr_columns",
    "extract_template",
    "format_predicate",
    "format_value",
    "group_batch",
    "load_batch_file",
    "like_regex",
    "load_catalog",
    "parse_query",
    "parse_records",
    "pushdown_predicates",
    "query_id_type",
    "unparse",
]
