"""Seeded data generation for the desk-scale schema."""

from __future__ import annotations

import datetime
import logging
from pathlib import Path

import numpy as np
from beartype import beartype

from ..dq_core import FIXTURE_SUFFIX, Relation, make_relation, write_relation
from ..relational_ir import Catalog
from .schema import WorkloadSpec, desk_catalog

logger = logging.getLogger(__name__)

START_DATE = datetime.date(1992, 1, 1)
LAST_ORDER_DATE = datetime.date(1998, 8, 2)
CURRENT_DATE = datetime.date(1995, 6, 17)

SEGMENTS = ("AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY")
PRIORITIES = ("1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW")
SHIP_MODES = ("AIR", "FOB", "MAIL", "RAIL", "REG AIR", "SHIP", "TRUCK")
COMMENT_WORDS = (
    "furiously", "quickly", "carefully", "blithely", "slyly", "regular", "final",
    "express", "pending", "ironic", "bold", "even", "special", "deposits", "requests",
    "packages", "accounts", "theodolites", "pinto", "beans",
)


def _day(offset: int) -> datetime.date:
    return START_DATE + datetime.timedelta(days=int(offset))


def _comment(rng: np.random.Generator) -> str:
    words = rng.choice(len(COMMENT_WORDS), size=int(rng.integers(2, 5)))
    return " ".join(COMMENT_WORDS[i] for i in words)


@beartype
def generate_tables(spec: WorkloadSpec) -> tuple[Catalog, dict[str, Relation]]:
    """LINEITEM, ORDERS and CUSTOMER rows for `spec`; identical for identical seeds."""
    rng = np.random.default_rng(spec.seed)
    catalog = desk_catalog(spec)
    n_customers, n_orders, n_lines = spec.customer_rows, spec.orders_rows, spec.lineitem_rows

    customers = []
    for key in range(1, n_customers + 1):
        customers.append((
            key,
            f"Customer#{key:09d}",
            int(rng.integers(0, 25)),
            SEGMENTS[int(rng.integers(0, len(SEGMENTS)))],
            round(float(rng.uniform(-999.99, 9999.99)), 2),
        ))

    order_span = (LAST_ORDER_DATE - START_DATE).days
    order_dates = rng.integers(0, order_span + 1, size=n_orders)
    order_customers = rng.integers(1, n_customers + 1, size=n_orders)

    # lines are spread evenly over the orders, in order key sequence
    line_orders = 1 + (np.arange(n_lines) * n_orders) // n_lines
    lines = []
    order_totals = np.zeros(n_orders + 1)
    order_open = np.zeros(n_orders + 1, dtype=bool)
    linenumber = 0
    for i in range(n_lines):
        order = int(line_orders[i])
        linenumber = linenumber + 1 if i > 0 and line_orders[i - 1] == order else 1
        quantity = int(rng.integers(1, 51))
        price = round(quantity * float(rng.uniform(900.0, 2100.0)) / 10, 2)
        discount = round(int(rng.integers(0, 11)) / 100, 2)
        tax = round(int(rng.integers(0, 9)) / 100, 2)
        shipdate = _day(order_dates[order - 1] + int(rng.integers(1, 122)))
        if shipdate <= CURRENT_DATE:
            returnflag = "R" if rng.random() < 0.5 else "A"
            linestatus = "F"
        else:
            returnflag, linestatus = "N", "O"
            order_open[order] = True
        order_totals[order] += price * (1 + tax) * (1 - discount)
        lines.append((
            order,
            linenumber,
            quantity,
            price,
            discount,
            tax,
            returnflag,
            linestatus,
            shipdate,
            SHIP_MODES[int(rng.integers(0, len(SHIP_MODES)))],
            _comment(rng),
            i + 1,
        ))

    orders = []
    for key in range(1, n_orders + 1):
        orders.append((
            key,
            int(order_customers[key - 1]),
            "O" if order_open[key] else "F",
            round(float(order_totals[key]), 2),
            _day(order_dates[key - 1]),
            PRIORITIES[int(rng.integers(0, len(PRIORITIES)))],
            0,
        ))

    tables = {}
    for name, rows in (("customer", customers), ("orders", orders), ("lineitem", lines)):
        tables[name] = make_relation(name, catalog.table(name).column_names, rows)
    logger.info(f"Generated {n_customers} customers, {n_orders} orders and {n_lines} line items (seed {spec.seed})")
    return catalog, tables


@beartype
def generate_data(spec: WorkloadSpec, directory: str | Path) -> tuple[Catalog, dict[str, Relation]]:
    """Write `{table}.tbl` fixtures and `catalog.json` into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    catalog, tables = generate_tables(spec)
    for name, relation in tables.items():
        write_relation(directory / f"{name}{FIXTURE_SUFFIX}", relation)
    with open(directory / "catalog.json", "w") as f:
        f.write(catalog.model_dump_json(indent=2))
    logger.info(f"Wrote fixtures for {len(tables)} tables to {directory}")
    return catalog, tables
