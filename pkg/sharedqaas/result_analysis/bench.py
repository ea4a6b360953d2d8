"""Throughput sweep: shared execution against query-at-a-time on the reference backend."""

import logging
import time
from typing import Sequence

import pandas as pd
from beartype import beartype
from tqdm import tqdm

from ..cost_model import PricingScheme, TableStats, estimate_bytes, query_at_a_time_bytes
from ..execution import ReferenceBackend, run_script
from ..plan_dag import SplitPolicy, build_global_plan, split_dag
from ..relational_ir import BatchMember, QueryBatch, extract_template, parse_records, unparse
from ..sql_gen import RenderOptions, ScanMode
from ..workload import TemplateName, WorkloadSpec, generate_tables, template_instances

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (1, 2, 4, 8, 16, 32, 64, 128)

BENCH_COLUMNS = [
    "template",
    "batch_size",
    "shared_seconds",
    "qat_seconds",
    "shared_qps",
    "qat_qps",
    "speedup",
    "materialization_seconds",
    "batched_cost",
    "qat_cost",
]


@beartype
def run_bench(
        spec: WorkloadSpec,
        template: TemplateName,
        scheme: PricingScheme,
        sizes: Sequence[int] = DEFAULT_SIZES,
        dialect: str = "duckdb",
        mode: ScanMode = "linear",
        policy: SplitPolicy = "heuristic",
        progress: bool = True,
) -> pd.DataFrame:
    """
    Wall time, throughput and estimated cost of one template per batch size.
    Args:
        spec (WorkloadSpec): data scale and seed; instances are drawn from it
        template (str): workload template name
        scheme (PricingScheme): pricing of the cost columns
        sizes (Sequence[int]): batch sizes; the first n instances form each batch
    Returns:
        pd.DataFrame: one row per batch size, columns BENCH_COLUMNS
    """
    catalog, tables = generate_tables(spec)
    records = template_instances(template, max(sizes), spec)
    parsed = parse_records(records, catalog)
    stats = TableStats.from_catalog(catalog)
    selectivity = spec.selectivity if template == "selectivity" else None
    options = RenderOptions(mode=mode, catalog=catalog)

    rows = []
    with ReferenceBackend(dialect) as backend:
        backend.load_tables(catalog, tables)
        for batch_id, n in enumerate(tqdm(sizes, desc=f"Bench {template}", disable=not progress)):
            members = tuple(BatchMember(i + 1, q, source_id) for i, (source_id, q) in enumerate(parsed[:n]))
            batch = QueryBatch(batch_id, members, extract_template(members[0].spec)[0])
            script = split_dag(build_global_plan([batch], catalog), policy, stats, dialect=backend.dialect)

            start = time.perf_counter()
            run = run_script(script, backend, options)
            shared_seconds = time.perf_counter() - start

            start = time.perf_counter()
            for member in members:
                backend.execute(unparse(member.spec))
            qat_seconds = time.perf_counter() - start

            selectivities = None if selectivity is None else {q: selectivity for q in batch.query_ids}
            batched_cost = estimate_bytes(script, stats, scheme, selectivities).total_cost
            qat_cost = sum(scheme.cost(query_at_a_time_bytes(m.spec, stats, scheme, selectivity)) for m in members)
            rows.append({
                "template": template,
                "batch_size": n,
                "shared_seconds": shared_seconds,
                "qat_seconds": qat_seconds,
                "shared_qps": n / shared_seconds if shared_seconds else float("inf"),
                "qat_qps": n / qat_seconds if qat_seconds else float("inf"),
                "speedup": qat_seconds / shared_seconds if shared_seconds else float("inf"),
                "materialization_seconds": run.materialization_seconds,
                "batched_cost": batched_cost,
                "qat_cost": qat_cost,
            })
            logger.info(f"{template} x{n}: shared {shared_seconds:.3f}s, query-at-a-time {qat_seconds:.3f}s")
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
