"""Oracle harness: shared execution against query-at-a-time execution on the same backend."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import pandas as pd
from beartype import beartype

from ..plan_dag import PlanOptions, SplitPolicy, build_global_plan, split_dag
from ..relational_ir import Catalog, QueryBatch, unparse
from ..sql_gen import RenderOptions, ScanMode
from .backend import BackendAdapter, ResultTable
from .comparators import REL_TOL, comparator_router
from .runner import RewriteHook, ScriptRun, demux_script, run_script

logger = logging.getLogger(__name__)


def corrupt_rewrite(sql: str) -> str:
    """Rewrite hook that empties every shared result; the harness must report it."""
    return f"{sql} LIMIT 0"


@dataclass(frozen=True)
class EquivalenceConfig:
    """
    Args:
        mode: predicate evaluation of shared scans.
        prefilter: push the OR of all predicates into the shared scans.
        policy: how shared subtrees of a multi-template plan are split.
        early_unnest: unnest right after the shared scans.
        rel_tol: relative tolerance for floating point values.
        rewrite_hook: applied to every shared statement before it runs (harness self-test).
    """

    mode: ScanMode = "linear"
    prefilter: bool = True
    policy: SplitPolicy = "heuristic"
    early_unnest: bool = False
    rel_tol: float = REL_TOL
    rewrite_hook: RewriteHook | None = None


@dataclass(frozen=True)
class EquivalenceReport:
    points: tuple[dict[str, Any], ...]
    run: ScriptRun | None = None

    @property
    def mismatches(self) -> tuple[dict[str, Any], ...]:
        return tuple(p for p in self.points if not p["matched"])

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.points), columns=[
            "batch_id", "query_id", "source_id", "matched", "comparator", "first_difference",
        ])

    def summary(self) -> str:
        return f"{len(self.points) - len(self.mismatches)}/{len(self.points)} queries equal"


@beartype
def equivalence_check(
        batch: QueryBatch | Sequence[QueryBatch],
        backend: BackendAdapter,
        catalog: Catalog,
        config: EquivalenceConfig | None = None,
) -> EquivalenceReport:
    """Run the shared script of `batch` and every member on its own; compare per query.

    Several batches are planned together as one global plan and split with the
    configured policy.

    Raises:
        BackendError: a statement failed; the error carries its SQL.
    """
    config = config or EquivalenceConfig()
    batches = [batch] if isinstance(batch, QueryBatch) else list(batch)
    dag = build_global_plan(batches, catalog, PlanOptions(early_unnest=config.early_unnest))
    script = split_dag(dag, config.policy, dialect=backend.dialect)
    options = RenderOptions(mode=config.mode, prefilter=config.prefilter, catalog=catalog)
    run = run_script(script, backend, options, rewrite_hook=config.rewrite_hook)
    shared = demux_script(script, run.results)

    query_map = dag.query_map()
    points = []
    for _, q, member in dag.iter_members():
        batch_id, local = query_map[q]
        expected = backend.execute(unparse(member.spec))
        expected = ResultTable(expected.columns, expected.rows)
        score, reports = comparator_router(member.spec, config.rel_tol)(q, expected, shared[q])
        failed = next((r for r in reports if not r["matched"]), None)
        point = {
            "batch_id": batch_id,
            "query_id": local,
            "source_id": member.source_id,
            "matched": score == 1.0,
            "comparator": (failed or reports[-1])["comparator"],
            "first_difference": None if failed is None else failed["first_difference"],
        }
        if failed is not None:
            logger.warning(
                f"Query {member.source_id!r} (batch {batch_id}, query {local}) differs "
                f"under {failed['comparator']} comparison; first differing row: {failed['first_difference']}"
            )
        points.append(point)

    report = EquivalenceReport(tuple(points), run)
    logger.info(f"Equivalence over {len(batches)} batches: {report.summary()}")
    return report
