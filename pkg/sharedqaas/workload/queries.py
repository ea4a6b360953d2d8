"""Parameterized query templates and seeded instance generation."""

from __future__ import annotations

import datetime
import json
import logging
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from beartype import beartype

from ..relational_ir import QueryRecord
from .data import COMMENT_WORDS, SEGMENTS, SHIP_MODES
from .schema import TemplateName, WorkloadSpec

logger = logging.getLogger(__name__)

TEMPLATES: dict[str, str] = {
    "q1": (
        "SELECT l_returnflag, l_linestatus, SUM(l_quantity) AS sum_qty, SUM(l_extendedprice) AS sum_base_price, "
        "SUM(l_extendedprice * (1 - l_discount)) AS sum_disc_price, AVG(l_quantity) AS avg_qty, "
        "COUNT(*) AS count_order FROM lineitem WHERE l_shipdate <= ? "
        "GROUP BY l_returnflag, l_linestatus ORDER BY l_returnflag, l_linestatus"
    ),
    "q3": (
        "SELECT l_orderkey, o_orderdate, o_shippriority, SUM(l_extendedprice * (1 - l_discount)) AS revenue "
        "FROM customer, orders, lineitem WHERE c_mktsegment = ? AND c_custkey = o_custkey "
        "AND l_orderkey = o_orderkey AND o_orderdate < ? AND l_shipdate > ? "
        "GROUP BY l_orderkey, o_orderdate, o_shippriority ORDER BY revenue DESC, o_orderdate LIMIT 10"
    ),
    "q6": (
        "SELECT SUM(l_extendedprice * l_discount) AS revenue FROM lineitem "
        "WHERE l_shipdate >= ? AND l_shipdate < ? AND l_discount BETWEEN ? AND ? AND l_quantity < ?"
    ),
    "q10": (
        "SELECT c_custkey, c_name, SUM(l_extendedprice * (1 - l_discount)) AS revenue, c_acctbal "
        "FROM customer, orders, lineitem WHERE c_custkey = o_custkey AND l_orderkey = o_orderkey "
        "AND o_orderdate >= ? AND o_orderdate < ? AND l_returnflag = 'R' "
        "GROUP BY c_custkey, c_name, c_acctbal ORDER BY revenue DESC, c_custkey LIMIT 20"
    ),
    "search": (
        "SELECT l_orderkey, l_linenumber, l_shipmode, l_quantity FROM lineitem "
        "WHERE (l_shipmode = ? AND l_quantity BETWEEN ? AND ?) OR l_comment LIKE ?"
    ),
    "selectivity": (
        "SELECT COUNT(*) AS matched, SUM(l_quantity) AS sum_qty FROM lineitem WHERE l_dense BETWEEN ? AND ?"
    ),
}


def _date(value: datetime.date) -> str:
    return value.isoformat()


def _add_months(day: datetime.date, months: int) -> datetime.date:
    month = day.month - 1 + months
    return datetime.date(day.year + month // 12, month % 12 + 1, day.day)


def _q1(rng: np.random.Generator, spec: WorkloadSpec) -> list[Any]:
    delta = int(rng.integers(60, 121))
    return [_date(datetime.date(1998, 12, 1) - datetime.timedelta(days=delta))]


def _q3(rng: np.random.Generator, spec: WorkloadSpec) -> list[Any]:
    day = datetime.date(1995, 3, 1) + datetime.timedelta(days=int(rng.integers(0, 31)))
    return [SEGMENTS[int(rng.integers(0, len(SEGMENTS)))], _date(day), _date(day)]


def _q6(rng: np.random.Generator, spec: WorkloadSpec) -> list[Any]:
    year = int(rng.integers(1993, 1998))
    discount = int(rng.integers(2, 10))
    return [
        _date(datetime.date(year, 1, 1)),
        _date(datetime.date(year + 1, 1, 1)),
        round((discount - 1) / 100, 2),
        round((discount + 1) / 100, 2),
        int(rng.integers(24, 26)),
    ]


def _q10(rng: np.random.Generator, spec: WorkloadSpec) -> list[Any]:
    months = int(rng.integers(0, 24))
    start = _add_months(datetime.date(1993, 2, 1), months)
    return [_date(start), _date(_add_months(start, 3))]


def _search(rng: np.random.Generator, spec: WorkloadSpec) -> list[Any]:
    low = int(rng.integers(1, 46))
    return [
        SHIP_MODES[int(rng.integers(0, len(SHIP_MODES)))],
        low,
        low + int(rng.integers(0, 5)),
        COMMENT_WORDS[int(rng.integers(0, len(COMMENT_WORDS)))] + " " + COMMENT_WORDS[int(rng.integers(0, 4))] + "%",
    ]


def _selectivity(rng: np.random.Generator, spec: WorkloadSpec) -> list[Any]:
    width = spec.dense_width()
    low = int(rng.integers(1, spec.lineitem_rows - width + 2))
    return [low, low + width - 1]


BINDERS: dict[str, Callable[[np.random.Generator, WorkloadSpec], list[Any]]] = {
    "q1": _q1,
    "q3": _q3,
    "q6": _q6,
    "q10": _q10,
    "search": _search,
    "selectivity": _selectivity,
}


@beartype
def template_instances(
        template: TemplateName,
        count: int,
        spec: WorkloadSpec | None = None,
        rng: np.random.Generator | None = None,
) -> list[QueryRecord]:
    spec = spec or WorkloadSpec()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    if template not in TEMPLATES:
        raise ValueError(f"Unknown template: {template}")
    return [
        QueryRecord(id=f"{template}-{i}", sql=TEMPLATES[template], bindings=tuple(BINDERS[template](rng, spec)))
        for i in range(count)
    ]


@beartype
def generate_queries(spec: WorkloadSpec) -> list[QueryRecord]:
    """`spec.instances` seeded instances of every template, grouped by template."""
    rng = np.random.default_rng(spec.seed + 1)
    records: list[QueryRecord] = []
    for template in spec.templates:
        records.extend(template_instances(template, spec.instances, spec, rng))
    logger.info(f"Generated {len(records)} queries over {len(spec.templates)} templates (seed {spec.seed})")
    return records


def write_batch_file(records: Sequence[QueryRecord], path: str | Path) -> None:
    """Newline-delimited `{id, sql, bindings}` records, the batch input format."""
    with open(path, "w") as f:
        for record in records:
            raw: dict[str, Any] = {"id": record.id, "sql": record.sql}
            if record.bindings is not None:
                raw["bindings"] = list(record.bindings)
            f.write(json.dumps(raw) + "\n")
