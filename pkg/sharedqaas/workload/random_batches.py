"""Seeded random batches over a small two-table schema, for the oracle suites."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Literal

from beartype import beartype

from ..dq_core import Relation, make_relation
from ..relational_ir import (
    GLOBAL_TEMPLATE,
    BatchMember,
    Catalog,
    ColumnSchema,
    QueryBatch,
    TableSchema,
    format_value,
    parse_query,
)

logger = logging.getLogger(__name__)

RandomTemplate = Literal["scan", "join", "group", "join-group", "scalar", "order-limit"]

RANDOM_TEMPLATES: tuple[RandomTemplate, ...] = ("scan", "join", "group", "join-group", "scalar", "order-limit")

MAX_ROWS = 1000
MAX_BATCH = 16

WORDS = ("apple", "apricot", "banana", "blueberry", "cherry", "citron", "date", "fig")
TAGS = ("x", "y", "z")

SELECTS: dict[str, str] = {
    "scan": "SELECT r_id, r_a, r_b, r_s FROM r WHERE {predicate}",
    "join": "SELECT r_id, r_a, s_c, s_t FROM r JOIN s ON r_key = s_key WHERE {predicate}",
    "group": "SELECT r_s, COUNT(*) AS n, SUM(r_b) AS total, MIN(r_a) AS lo FROM r WHERE {predicate} GROUP BY r_s",
    "join-group": (
        "SELECT s_t, COUNT(*) AS n, SUM(r_a + s_c) AS total FROM r, s "
        "WHERE r_key = s_key AND ({predicate}) GROUP BY s_t"
    ),
    "scalar": "SELECT COUNT(*) AS n, SUM(r_a) AS total, AVG(r_b) AS mean FROM r WHERE {predicate}",
    "order-limit": "SELECT r_id, r_a, r_b FROM r WHERE {predicate} ORDER BY r_a DESC, r_id LIMIT {limit}",
}


@dataclass(frozen=True)
class RandomCase:
    seed: int
    template: RandomTemplate
    catalog: Catalog
    tables: dict[str, Relation]
    batch: QueryBatch
    sql: tuple[str, ...]


def random_catalog(r_rows: int, s_rows: int) -> Catalog:
    return Catalog(tables=(
        TableSchema(name="r", row_count=r_rows, columns=(
            ColumnSchema(name="r_id", type="INTEGER", avg_width=4),
            ColumnSchema(name="r_a", type="INTEGER", avg_width=4),
            ColumnSchema(name="r_b", type="DOUBLE", avg_width=8),
            ColumnSchema(name="r_s", type="VARCHAR", avg_width=6),
            ColumnSchema(name="r_key", type="INTEGER", avg_width=4),
        )),
        TableSchema(name="s", row_count=s_rows, columns=(
            ColumnSchema(name="s_key", type="INTEGER", avg_width=4),
            ColumnSchema(name="s_c", type="INTEGER", avg_width=4),
            ColumnSchema(name="s_t", type="VARCHAR", avg_width=1),
        )),
    ))


def random_tables(rng: random.Random, max_rows: int = MAX_ROWS) -> tuple[Catalog, dict[str, Relation]]:
    """Tables r and s; r_b holds quarter values (exact in binary) and some NULLs."""
    r_rows = rng.randint(0, max_rows)
    s_rows = rng.randint(1, max(1, min(max_rows, 40)))
    r = [
        (
            i + 1,
            rng.randint(0, 20),
            None if rng.random() < 0.1 else rng.randint(-40, 40) / 4,
            rng.choice(WORDS),
            rng.randint(1, s_rows + 3),
        )
        for i in range(r_rows)
    ]
    s = [(key, rng.randint(0, 9), rng.choice(TAGS)) for key in range(1, s_rows + 1)]
    catalog = random_catalog(r_rows, s_rows)
    tables = {
        "r": make_relation("r", catalog.table("r").column_names, r),
        "s": make_relation("s", catalog.table("s").column_names, s),
    }
    return catalog, tables


def _atom(rng: random.Random, with_s: bool) -> str:
    choices = ["r_a", "r_a", "r_b", "r_s"] + (["s_c"] if with_s else [])
    column = rng.choice(choices)
    match column:
        case "r_a" | "s_c":
            top = 20 if column == "r_a" else 9
            low = rng.randint(0, top)
            match rng.choice(("=", "<", "<=", ">", ">=", "<>", "BETWEEN", "IN")):
                case "BETWEEN":
                    return f"{column} BETWEEN {low} AND {low + rng.randint(0, 6)}"
                case "IN":
                    values = sorted({rng.randint(0, top) for _ in range(rng.randint(1, 4))})
                    return f"{column} IN ({', '.join(map(str, values))})"
                case op:
                    return f"{column} {op} {low}"
        case "r_b":
            return f"r_b {rng.choice(('<', '<=', '>', '>='))} {format_value(rng.randint(-40, 40) / 4)}"
        case "r_s":
            match rng.choice(("=", "LIKE", "IN")):
                case "=":
                    return f"r_s = {format_value(rng.choice(WORDS))}"
                case "LIKE":
                    word = rng.choice(WORDS)
                    return f"r_s LIKE {format_value(word[:rng.randint(1, 3)] + '%')}"
                case _:
                    words = sorted(set(rng.sample(WORDS, rng.randint(1, 3))))
                    return f"r_s IN ({', '.join(format_value(w) for w in words)})"
        case _:
            raise ValueError(f"Unknown column: {column}")


def random_predicate(rng: random.Random, with_s: bool = False) -> str:
    """A conjunction of 1-3 atoms, sometimes OR-ed with a second one."""
    def conjunction() -> str:
        return " AND ".join(_atom(rng, with_s) for _ in range(rng.randint(1, 3)))

    if rng.random() < 0.3:
        return f"({conjunction()}) OR ({conjunction()})"
    return conjunction()


@beartype
def random_batch(
        seed: int,
        template: RandomTemplate | None = None,
        max_rows: int = MAX_ROWS,
        max_batch: int = MAX_BATCH,
        batch_id: int = 0,
) -> RandomCase:
    """Fresh tables plus one batch of 1..max_batch queries of one template.

    Members of a batch share their select list, joins, grouping and ordering and
    differ in their predicates (and LIMIT for order-limit).
    """
    if not 1 <= max_batch <= MAX_BATCH:
        raise ValueError(f"max_batch must be within 1..{MAX_BATCH}, got {max_batch}")
    if not 0 <= max_rows <= MAX_ROWS:
        raise ValueError(f"max_rows must be within 0..{MAX_ROWS}, got {max_rows}")
    rng = random.Random(seed)
    template = template or rng.choice(RANDOM_TEMPLATES)
    catalog, tables = random_tables(rng, max_rows)
    with_s = template in ("join", "join-group")

    statements = []
    for _ in range(rng.randint(1, max_batch)):
        statements.append(SELECTS[template].format(
            predicate=random_predicate(rng, with_s),
            limit=rng.randint(0, 10),
        ))
    members = tuple(
        BatchMember(query_id=i + 1, spec=parse_query(sql, catalog), source_id=f"{template}-{seed}-{i}")
        for i, sql in enumerate(statements)
    )
    batch = QueryBatch(batch_id=batch_id, members=members, template_id=GLOBAL_TEMPLATE)
    logger.debug(f"Random case {seed}: {template}, {batch.size} queries, {len(tables['r'])} rows in r")
    return RandomCase(seed, template, catalog, tables, batch, tuple(statements))
