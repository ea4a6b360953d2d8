"""Execute split scripts on a backend, or evaluate them in memory with the data-query model."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

from beartype import beartype

from ..dq_core import ARRAY, QuerySetEncoding, Relation, SharedPlanEvaluator
from ..plan_dag import ExecutionScript, MaterializeStep, RunStep, Sink
from ..sql_gen import RenderedQuery, RenderOptions
from .backend import BackendAdapter, ResultTable, demux_results

logger = logging.getLogger(__name__)

RewriteHook = Callable[[str], str]


@dataclass(frozen=True)
class StepTiming:
    step_id: str
    kind: str
    seconds: float
    rows: int | None = None


@dataclass(frozen=True)
class ScriptRun:
    """Annotated result per sink, step timings and the columns each temp table held."""

    results: dict[str, ResultTable]
    timings: tuple[StepTiming, ...] = ()
    temp_columns: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def total_seconds(self) -> float:
        return sum(t.seconds for t in self.timings)

    @property
    def materialization_seconds(self) -> float:
        return sum(t.seconds for t in self.timings if t.kind == "materialize")


def demux_sink(shared: ResultTable, sink: Sink) -> dict[int, ResultTable]:
    """Per plan query id results of one sink, with the rows of empty scalar aggregates restored."""
    results = demux_results(shared, sink.query_ids)
    for q, table in results.items():
        if not table.rows:
            results[q] = ResultTable(table.columns, sink.empty_result(q))
    return results


def demux_script(script: ExecutionScript, results: Mapping[str, ResultTable]) -> dict[int, ResultTable]:
    per_query: dict[int, ResultTable] = {}
    for sink in script.dag.sinks:
        per_query.update(demux_sink(results[sink.sink_id], sink))
    return per_query


@beartype
def run_script(
        script: ExecutionScript,
        backend: BackendAdapter,
        options: RenderOptions | None = None,
        rewrite_hook: RewriteHook | None = None,
        max_workers: int = 4,
) -> ScriptRun:
    """Run every step of `script` in dependency order and drop its temp tables afterwards.

    Steps of one wave run on a thread pool when the backend declares itself safe for
    concurrent calls, otherwise one after the other. `rewrite_hook` may alter the SQL
    of run steps before execution.

    Raises:
        BackendError: a step failed; the error carries its statement.
    """
    rendered = script.render(backend.dialect, options)
    results: dict[str, ResultTable] = {}
    timings: list[StepTiming] = []
    temp_columns: dict[str, tuple[str, ...]] = {}
    created: list[str] = []

    def run(step: MaterializeStep | RunStep) -> tuple[StepTiming, ResultTable | None]:
        query: RenderedQuery = rendered[step.step_id]
        start = time.perf_counter()
        if isinstance(step, MaterializeStep):
            backend.materialize(step.temp_table, query.sql)
            created.append(step.temp_table)
            return StepTiming(step.step_id, step.kind, time.perf_counter() - start), None
        sql = rewrite_hook(query.sql) if rewrite_hook is not None else query.sql
        result = backend.execute(sql)
        return StepTiming(step.step_id, step.kind, time.perf_counter() - start, len(result)), result

    try:
        for wave in script.waves():
            if backend.concurrent_safe and len(wave) > 1:
                with ThreadPoolExecutor(max_workers=max_workers) as pool:
                    outcomes = list(pool.map(run, wave))
            else:
                outcomes = [run(step) for step in wave]
            for step, (timing, result) in zip(wave, outcomes):
                timings.append(timing)
                if isinstance(step, MaterializeStep):
                    temp_columns[step.temp_table] = backend.execute(f"SELECT * FROM {step.temp_table} LIMIT 0").columns
                else:
                    results[step.sink_id] = result
                logger.info(f"Step {step.step_id} ({step.kind}) took {timing.seconds:.3f}s")
    finally:
        for name in created:
            backend.drop_temp(name)
    return ScriptRun(results, tuple(timings), temp_columns)


@beartype
def evaluate_script(
        script: ExecutionScript,
        tables: Mapping[str, Relation],
        encoding: QuerySetEncoding = ARRAY,
) -> ScriptRun:
    """In-memory evaluation of `script`; materialized intermediates are stored without annotation."""
    evaluator = SharedPlanEvaluator(tables, encoding)
    results: dict[str, ResultTable] = {}
    temp_columns: dict[str, tuple[str, ...]] = {}
    for wave in script.waves():
        for step in wave:
            relation = evaluator.evaluate(step.plan)
            if isinstance(step, MaterializeStep):
                stored = relation.strip()
                evaluator = evaluator.with_tables({step.temp_table: stored})
                temp_columns[step.temp_table] = stored.column_names
            else:
                results[step.sink_id] = ResultTable.from_relation(relation)
    return ScriptRun(results, (), temp_columns)
