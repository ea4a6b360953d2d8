"""Execution scripts: the tree-shaped statements a split DAG runs as."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Any, Union

from ..dq_core import AnnotationKind, Scan, SharedOperator, walk
from ..relational_ir import ColumnRef
from ..sql_gen import DialectProfile, FieldNamer, RenderedQuery, RenderOptions, get_dialect, render_plan
from .builder import SharedPlanDag

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MaterializeStep:
    """Writes a shared intermediate, without its annotation column, to a temp table."""

    step_id: str
    temp_table: str
    plan: SharedOperator
    columns: tuple[ColumnRef, ...]
    depends_on: tuple[str, ...] = ()

    kind = "materialize"


@dataclass(frozen=True)
class RunStep:
    """Computes the annotated result of one sink."""

    step_id: str
    sink_id: str
    plan: SharedOperator
    depends_on: tuple[str, ...] = ()

    kind = "run"


Step = Union[MaterializeStep, RunStep]


@dataclass(frozen=True)
class SplitDecision:
    node: str
    consumers: int
    output_bytes: float
    recompute_bytes: float
    materialize: bool


def temp_tables_read(plan: SharedOperator) -> tuple[str, ...]:
    return tuple(sorted({op.table for op in walk(plan) if isinstance(op, Scan) and op.temporary}))


@dataclass(frozen=True)
class ExecutionScript:
    steps: tuple[Step, ...]
    dag: SharedPlanDag
    decisions: tuple[SplitDecision, ...] = ()

    @property
    def materialize_steps(self) -> tuple[MaterializeStep, ...]:
        return tuple(s for s in self.steps if isinstance(s, MaterializeStep))

    @property
    def run_steps(self) -> tuple[RunStep, ...]:
        return tuple(s for s in self.steps if isinstance(s, RunStep))

    @property
    def temp_tables(self) -> tuple[str, ...]:
        return tuple(s.temp_table for s in self.materialize_steps)

    def step(self, step_id: str) -> Step:
        for step in self.steps:
            if step.step_id == step_id:
                return step
        raise KeyError(f"unknown step {step_id}")

    def waves(self) -> list[list[Step]]:
        """Steps grouped so that every step only depends on steps of earlier groups."""
        done: set[str] = set()
        pending = list(self.steps)
        waves = []
        while pending:
            ready = [s for s in pending if set(s.depends_on) <= done]
            if not ready:
                raise ValueError(f"steps {[s.step_id for s in pending]} have unsatisfiable dependencies")
            waves.append(ready)
            done.update(s.step_id for s in ready)
            pending = [s for s in pending if s.step_id not in done]
        return waves

    def namer(self) -> FieldNamer:
        return FieldNamer.for_plans(*(s.plan for s in self.steps))

    def render(
            self,
            dialect: str | DialectProfile = "presto",
            options: RenderOptions | None = None,
    ) -> dict[str, RenderedQuery]:
        """Rendered statement per step id; materialize steps become CREATE statements."""
        profile = get_dialect(dialect)
        options = options or RenderOptions()
        namer = self.namer()
        rendered: dict[str, RenderedQuery] = {}
        for step in self.steps:
            if isinstance(step, MaterializeStep):
                select = render_plan(step.plan, profile, replace(options, strip_annotation=True), namer)
                sql = profile.create_temp_sql(step.temp_table, select.sql)
                rendered[step.step_id] = RenderedQuery(sql, select.columns, AnnotationKind.NONE, None, profile.name)
            else:
                rendered[step.step_id] = render_plan(step.plan, profile, options, namer)
            logger.debug(f"Step {step.step_id}:\n{rendered[step.step_id].sql}")
        return rendered

    def to_dict(self, dialect: str | DialectProfile = "presto", options: RenderOptions | None = None) -> dict[str, Any]:
        profile = get_dialect(dialect)
        rendered = self.render(profile, options)
        steps = []
        for step in self.steps:
            query = rendered[step.step_id]
            entry: dict[str, Any] = {
                "id": step.step_id,
                "kind": step.kind,
                "depends_on": list(step.depends_on),
                "sql": query.sql,
                "bytes": query.byte_length,
                "columns": list(query.output_columns),
            }
            if isinstance(step, MaterializeStep):
                entry["temp_table"] = step.temp_table
            else:
                sink = self.dag.sink(step.sink_id)
                entry["sink"] = step.sink_id
                entry["queries"] = [
                    {"plan_query_id": q, "batch_id": b, "query_id": local} for q, b, local in sink.members
                ]
                entry["annotation_type"] = query.annotation_type
            steps.append(entry)
        return {
            "dialect": profile.name,
            "max_query_bytes": profile.max_query_bytes,
            "decisions": [vars(d) for d in self.decisions],
            "steps": steps,
        }

    def to_json(self, dialect: str | DialectProfile = "presto", options: RenderOptions | None = None) -> str:
        """Plan file: ordered steps with their SQL, temp tables, dependencies and sizes."""
        return json.dumps(self.to_dict(dialect, options), indent=2)
