from .schema import (
    CUSTOMER_PER_SF,
    DEFAULT_TEMPLATES,
    LINEITEM_PER_SF,
    ORDERS_PER_SF,
    TemplateName,
    WorkloadSpec,
    desk_catalog,
)
from .data import CURRENT_DATE, generate_data, generate_tables
from .queries import TEMPLATES, generate_queries, template_instances, write_batch_file
from .random_batches import (
    MAX_BATCH,
    MAX_ROWS,
    RANDOM_TEMPLATES,
    RandomCase,
    RandomTemplate,
    random_batch,
    random_catalog,
    random_predicate,
    random_tables,
)

__all__ = [
    "CURRENT_DATE",
    "CUSTOMER_PER_SF",
    "DEFAULT_TEMPLATES",
    "LINEITEM_PER_SF",
    "MAX_BATCH",
    "MAX_ROWS",
    "ORDERS_PER_SF",
    "RANDOM_TEMPLATES",
    "RandomCase",
    "RandomTemplate",
    "TEMPLATES",
    "TemplateName",
    "WorkloadSpec",
    "desk_catalog",
    "generate_data",
    "generate_queries",
    "generate_tables",
    "random_batch",
    "random_catalog",
    "random_predicate",
    "random_tables",
    "template_instances",
    "write_batch_file",
]
