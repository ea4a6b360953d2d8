"""Turn a shared DAG into tree-shaped steps by duplicating or materializing shared subtrees."""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping

from beartype import beartype

from ..cost_model.stats import TableStats, estimate_node, recompute_bytes
from ..dq_core import (
    AnnotationKind,
    Join,
    Scan,
    Select,
    SharedOperator,
    output_fields,
    output_kind,
    per_query,
    query_ids,
    walk,
    with_children,
)
from ..errors import MaterializationUnsupportedError
from ..relational_ir import PredicateNF
from ..sql_gen import DialectProfile, get_dialect
from .builder import SharedPlanDag
from .script import ExecutionScript, MaterializeStep, RunStep, SplitDecision, temp_tables_read

logger = logging.getLogger(__name__)

SplitPolicy = Literal["heuristic", "always-duplicate", "always-materialize"]

DEFAULT_MATERIALIZE_THRESHOLD = 1.0


def _default_threshold() -> float:
    return float(os.getenv("SHAREDQAAS_MATERIALIZE_THRESHOLD", DEFAULT_MATERIALIZE_THRESHOLD))


@dataclass(frozen=True)
class SplitOptions:
    """
    Args:
        policy: "heuristic" materializes a shared join when its output bytes times
            (consumers - 1) exceed `threshold` times the bytes needed to recompute it.
        threshold: factor of the heuristic.
        selectivities: per plan query id, used for the size estimates.
    """

    policy: SplitPolicy = "heuristic"
    threshold: float = field(default_factory=_default_threshold)
    selectivities: Mapping[int, float] | None = None


def temp_table_name(node: SharedOperator) -> str:
    return "tmp_" + hashlib.sha1(repr(node).encode("utf-8")).hexdigest()[:16]


def _substitute(op: SharedOperator, replacements: Mapping[SharedOperator, SharedOperator]) -> SharedOperator:
    if op in replacements:
        return replacements[op]
    children = op.children()
    new_children = tuple(_substitute(c, replacements) for c in children)
    if new_children == children:
        return op
    return with_children(op, new_children)


def _widen_scans(op: SharedOperator) -> SharedOperator:
    """Let every base scan also output the columns its predicates test."""
    if isinstance(op, Scan):
        extra = sorted({c for _, p in op.predicates for c in p.columns()} - set(op.columns))
        return op if not extra else replace(op, columns=op.columns + tuple(extra))
    children = op.children()
    return with_children(op, tuple(_widen_scans(c) for c in children))


def _recomputed_predicates(node: SharedOperator) -> dict[int, PredicateNF]:
    """Per query, the conjunction of every predicate applied inside `node`."""
    predicates = {q: PredicateNF.true() for q in query_ids(node)}
    for op in walk(node):
        if isinstance(op, (Scan, Select)):
            for q, predicate in op.predicates:
                if q in predicates:
                    predicates[q] = predicates[q].conjoin(predicate)
    return predicates


def _label(node: SharedOperator) -> str:
    tables = sorted({op.table for op in walk(node) if isinstance(op, Scan)})
    return f"{type(node).__name__}({' x '.join(tables)})"


@beartype
def split_dag(
        dag: SharedPlanDag,
        policy: SplitPolicy | SplitOptions = "heuristic",
        stats: TableStats | None = None,
        dialect: str | DialectProfile | None = None,
) -> ExecutionScript:
    """Split a shared DAG into an execution script.

    Only set-annotated joins with several consumers are candidates; shared scans are
    always duplicated. A materialized join is stored without its annotation and every
    consumer reads it back through a shared scan that recomputes the annotation from
    the predicates applied below the join.

    Raises:
        MaterializationUnsupportedError: materialization was chosen but `dialect`
            cannot read its own temp tables back.
    """
    options = policy if isinstance(policy, SplitOptions) else SplitOptions(policy=policy)
    stats = stats or TableStats.from_catalog(dag.catalog)
    profile = get_dialect(dialect) if dialect is not None else None

    consumers = dag.consumers()
    replacements: dict[SharedOperator, SharedOperator] = {}
    steps: list[MaterializeStep | RunStep] = []
    decisions: list[SplitDecision] = []
    for node in dag.nodes():
        count = consumers[node]
        if count < 2 or not isinstance(node, Join) or output_kind(node) != AnnotationKind.SET:
            continue
        output_bytes = estimate_node(node, stats, options.selectivities).bytes
        recompute = recompute_bytes(node, stats, options.selectivities)
        match options.policy:
            case "always-duplicate":
                materialize = False
            case "always-materialize":
                materialize = True
            case "heuristic":
                materialize = output_bytes * (count - 1) > options.threshold * recompute
            case _:
                raise ValueError(f"Unknown split policy: {options.policy}")
        decisions.append(SplitDecision(_label(node), count, output_bytes, recompute, materialize))
        logger.info(
            f"{'Materializing' if materialize else 'Duplicating'} {_label(node)} for {count} consumers "
            f"(output {output_bytes:.0f} B, recompute {recompute:.0f} B)"
        )
        if not materialize:
            continue
        if profile is not None and not profile.supports_materialized_readback:
            raise MaterializationUnsupportedError(
                f"dialect {profile.name} cannot read back materialized intermediates"
            )
        plan = _widen_scans(_substitute(node, replacements))
        name = temp_table_name(node)
        columns = tuple(output_fields(plan))
        steps.append(MaterializeStep(name, name, plan, columns, temp_tables_read(plan)))
        replacements[node] = Scan(name, columns, per_query(_recomputed_predicates(node)), temporary=True)

    for sink in dag.sinks:
        plan = _substitute(sink.root, replacements)
        steps.append(RunStep(f"run_{sink.sink_id}", sink.sink_id, plan, temp_tables_read(plan)))
    return ExecutionScript(tuple(steps), dag, tuple(decisions))
