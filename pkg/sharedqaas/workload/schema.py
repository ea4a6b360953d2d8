"""Desk-scale TPC-H-like schema: LINEITEM, ORDERS and CUSTOMER."""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..relational_ir import Catalog, ColumnSchema, TableSchema

TemplateName = Literal["q1", "q3", "q6", "q10", "search", "selectivity"]

DEFAULT_TEMPLATES: tuple[TemplateName, ...] = ("q1", "q3", "q6", "q10", "search")

LINEITEM_PER_SF = 6_000_000
ORDERS_PER_SF = 1_500_000
CUSTOMER_PER_SF = 150_000

_COLUMNS: dict[str, tuple[tuple[str, str, float], ...]] = {
    "customer": (
        ("c_custkey", "INTEGER", 4),
        ("c_name", "VARCHAR", 18),
        ("c_nationkey", "INTEGER", 4),
        ("c_mktsegment", "VARCHAR", 9),
        ("c_acctbal", "DOUBLE", 8),
    ),
    "orders": (
        ("o_orderkey", "INTEGER", 4),
        ("o_custkey", "INTEGER", 4),
        ("o_orderstatus", "VARCHAR", 1),
        ("o_totalprice", "DOUBLE", 8),
        ("o_orderdate", "DATE", 4),
        ("o_orderpriority", "VARCHAR", 8),
        ("o_shippriority", "INTEGER", 4),
    ),
    "lineitem": (
        ("l_orderkey", "INTEGER", 4),
        ("l_linenumber", "INTEGER", 4),
        ("l_quantity", "INTEGER", 4),
        ("l_extendedprice", "DOUBLE", 8),
        ("l_discount", "DOUBLE", 8),
        ("l_tax", "DOUBLE", 8),
        ("l_returnflag", "VARCHAR", 1),
        ("l_linestatus", "VARCHAR", 1),
        ("l_shipdate", "DATE", 4),
        ("l_shipmode", "VARCHAR", 5),
        ("l_comment", "VARCHAR", 16),
        ("l_dense", "INTEGER", 4),
    ),
}


class WorkloadSpec(BaseModel):
    """What `generate_data` and `generate_queries` produce.

    `scale_factor` follows TPC-H sizing (6M LINEITEM rows per unit) and stays at desk
    scale; `selectivity` drives the `selectivity` template.
    """

    model_config = ConfigDict(frozen=True)

    scale_factor: float = Field(default=0.001, gt=0, le=0.1)
    templates: tuple[TemplateName, ...] = DEFAULT_TEMPLATES
    instances: int = Field(default=32, ge=1)
    selectivity: float = Field(default=0.01, gt=0, le=1)
    seed: int = 0

    @property
    def lineitem_rows(self) -> int:
        return max(1, round(LINEITEM_PER_SF * self.scale_factor))

    @property
    def orders_rows(self) -> int:
        return max(1, round(ORDERS_PER_SF * self.scale_factor))

    @property
    def customer_rows(self) -> int:
        return max(1, round(CUSTOMER_PER_SF * self.scale_factor))

    def row_counts(self) -> dict[str, int]:
        return {"customer": self.customer_rows, "orders": self.orders_rows, "lineitem": self.lineitem_rows}

    def dense_width(self) -> int:
        """Width of an `l_dense` range matching `selectivity` of LINEITEM."""
        return min(self.lineitem_rows, max(1, math.ceil(self.selectivity * self.lineitem_rows)))


def desk_catalog(spec: WorkloadSpec | None = None) -> Catalog:
    counts = (spec or WorkloadSpec()).row_counts()
    tables = tuple(
        TableSchema(
            name=name,
            columns=tuple(ColumnSchema(name=c, type=t, avg_width=w) for c, t, w in columns),
            row_count=counts[name],
        )
        for name, columns in _COLUMNS.items()
    )
    return Catalog(tables=tables)
