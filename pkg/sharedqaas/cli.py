"""Command-line entry points: rewrite, check, cost, run, gen-workload, serve and bench."""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import get_args

from dotenv import load_dotenv

from .cost_model import (
    DEFAULT_USD_PER_TIB,
    PricingScheme,
    TableStats,
    batch_size_sweep,
    compare_batch_vs_qat,
    load_stats,
)
from .dq_core import load_tables
from .errors import SharedQaasError
from .execution import (
    REFERENCE_DIALECTS,
    EquivalenceConfig,
    ReferenceBackend,
    corrupt_rewrite,
    demux_script,
    equivalence_check,
    run_script,
)
from .plan_dag import PlanOptions, build_global_plan, split_dag
from .relational_ir import group_batch, load_batch_file, load_catalog, parse_records
from .result_analysis.bench import DEFAULT_SIZES, run_bench
from .service import gateway_serve, load_gateway_config
from .sql_gen import RenderOptions, get_dialect
from .utils.args import (
    DEFAULT_BACKEND_DIALECT,
    SPLIT_POLICIES,
    add_batch_arguments,
    add_common_arguments,
    add_data_arguments,
    add_rewrite_arguments,
    int_list,
    positive_int,
    str2bool,
)
from .utils.data_collector import DataCollector, dumps
from .workload import DEFAULT_TEMPLATES, TemplateName, WorkloadSpec, generate_data, generate_queries, write_batch_file

logger = logging.getLogger("sharedqaas")

PRICING_KINDS = ("bytes-scanned", "columns-billed")
TEMPLATE_NAMES = get_args(TemplateName)


class UsageError(Exception):
    pass


def _load_batches(args):
    catalog = load_catalog(args.catalog)
    records = load_batch_file(args.batch_file, args.bindings)
    if not records:
        raise UsageError(f"batch file {args.batch_file} holds no queries")
    batches, _ = group_batch(parse_records(records, catalog), args.grouping, args.max_batch)
    return catalog, batches


def _render_options(args, catalog):
    return RenderOptions(mode=args.mode, prefilter=args.prefilter, catalog=catalog)


def _script(args, catalog, batches, dialect):
    dag = build_global_plan(batches, catalog, PlanOptions(early_unnest=args.early_unnest))
    return split_dag(dag, args.policy, dialect=dialect)


def _open_backend(args, catalog):
    backend = ReferenceBackend(args.dialect)
    backend.load_tables(catalog, load_tables(args.data, catalog))
    return backend


def rewrite(args):
    catalog, batches = _load_batches(args)
    profile = get_dialect(args.dialect)
    script = _script(args, catalog, batches, profile)
    plan = script.to_dict(profile, _render_options(args, catalog))
    for step in plan["steps"]:
        status = "within" if step["bytes"] <= profile.max_query_bytes else "over"
        print(f"{step['id']}: {step['bytes']} bytes, {status} the {profile.max_query_bytes} byte limit", file=sys.stderr)
    if args.output is not None:
        with open(args.output, "w") as f:
            json.dump(plan, f, indent=2)
        logger.info(f"Wrote plan with {len(plan['steps'])} steps to {args.output}")
    elif len(plan["steps"]) == 1:
        print(plan["steps"][0]["sql"])
    else:
        print(json.dumps(plan, indent=2))
    return 0


def check(args):
    catalog, batches = _load_batches(args)
    config = EquivalenceConfig(
        mode=args.mode,
        prefilter=args.prefilter,
        policy=args.policy,
        early_unnest=args.early_unnest,
        rewrite_hook=corrupt_rewrite if args.corrupt_rewrite else None,
    )
    with _open_backend(args, catalog) as backend:
        report = equivalence_check(batches, backend, catalog, config)
    if args.report is not None:
        report.to_frame().to_csv(args.report, index=False)
    for point in report.mismatches:
        print(
            f"MISMATCH {point['source_id']!r} ({point['comparator']}): first differing row {point['first_difference']}",
            file=sys.stderr,
        )
    print(report.summary())
    return 0 if report.passed else 1


def cost(args):
    catalog, batches = _load_batches(args)
    stats = load_stats(args.stats) if args.stats is not None else TableStats.from_catalog(catalog)
    scheme = PricingScheme.from_rate_per_tib(args.pricing, args.usd_per_tib)
    if args.sizes is not None:
        specs = [m.spec for batch in batches for m in batch.members]
        table = batch_size_sweep(specs, args.sizes, stats, scheme, catalog, args.selectivity, progress=True)
    else:
        table = compare_batch_vs_qat([(b, args.selectivity) for b in batches], stats, scheme, catalog)
    if args.output is not None:
        table.to_csv(args.output, index=False)
    print(table.to_string(index=False))
    return 0


def run(args):
    catalog, batches = _load_batches(args)
    collector = DataCollector(args.output_dir, "run") if args.output_dir is not None else None
    with _open_backend(args, catalog) as backend:
        script = _script(args, catalog, batches, backend.dialect)
        result = run_script(script, backend, _render_options(args, catalog))
        per_query = demux_script(script, result.results)
        query_map = script.dag.query_map()
        for _, q, member in script.dag.iter_members():
            batch_id, local = query_map[q]
            record = {
                "id": member.source_id,
                "batch_id": batch_id,
                "query_id": local,
                "columns": list(per_query[q].columns),
                "rows": per_query[q].rows,
            }
            if collector is not None:
                collector.collect_data(record)
            else:
                print(dumps(record))
    if collector is not None:
        collector.save_to_jsonl()
    logger.info(f"Ran {len(query_map)} queries in {result.total_seconds:.3f}s")
    return 0


def gen_workload(args):
    spec = WorkloadSpec(
        scale_factor=args.scale_factor,
        templates=tuple(args.templates),
        instances=args.instances,
        selectivity=args.selectivity,
        seed=args.seed,
    )
    output = Path(args.output_dir)
    generate_data(spec, output)
    records = generate_queries(spec)
    write_batch_file(records, output / "queries.jsonl")
    print(f"Wrote {len(records)} queries and {len(spec.row_counts())} tables to {output}")
    return 0


def serve(args):
    config = load_gateway_config(
        args.config,
        window_seconds=args.window,
        max_batch_size=args.max_batch,
        policy=args.grouping,
        dialect=args.dialect,
        host=args.host,
        port=args.port,
        catalog_path=args.catalog,
        data_dir=args.data,
    )
    try:
        asyncio.run(gateway_serve(config))
    except KeyboardInterrupt:
        logger.info("Gateway stopped")
    return 0


def bench(args):
    spec = WorkloadSpec(scale_factor=args.scale_factor, selectivity=args.selectivity, seed=args.seed)
    scheme = PricingScheme.from_rate_per_tib(args.pricing, args.usd_per_tib)
    table = run_bench(spec, args.template, scheme, args.sizes, dialect=args.dialect, mode=args.mode, policy=args.policy)
    collector = DataCollector(args.output_dir, f"bench_{args.template}")
    for row in table.to_dict("records"):
        collector.collect_data(row)
    path = collector.save_to_csv()
    print(table.to_string(index=False))
    print(f"Wrote {path}")
    return 0


def _add_cost_arguments(parser):
    parser.add_argument("--pricing", type=str, default="bytes-scanned", choices=PRICING_KINDS, help="Pricing scheme")
    parser.add_argument("--usd-per-tib", type=float, default=DEFAULT_USD_PER_TIB, help="Price per TiB billed")


def build_parser():
    parser = argparse.ArgumentParser(prog="sharedqaas", description=__doc__)
    add_common_arguments(parser)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("rewrite", help="Render the shared statements of a batch file")
    add_batch_arguments(p)
    add_rewrite_arguments(p)
    p.add_argument("--output", type=str, default=None, help="Write the plan file here")
    p.set_defaults(handler=rewrite)

    p = commands.add_parser("check", help="Compare shared against query-at-a-time results")
    add_batch_arguments(p)
    add_rewrite_arguments(p, DEFAULT_BACKEND_DIALECT, REFERENCE_DIALECTS)
    add_data_arguments(p)
    p.add_argument("--report", type=str, default=None, help="Write the per-query report as CSV")
    p.add_argument("--corrupt-rewrite", type=str2bool, default=False, help=argparse.SUPPRESS)
    p.set_defaults(handler=check)

    p = commands.add_parser("cost", help="Batched versus query-at-a-time billed bytes")
    add_batch_arguments(p)
    _add_cost_arguments(p)
    p.add_argument("--stats", type=str, default=None, help="Statistics JSON (default: sizes from the catalog)")
    p.add_argument("--selectivity", type=float, default=None, help="Selectivity of every query")
    p.add_argument("--sizes", type=int_list, default=None, help="Batch-size sweep over the first n queries, e.g. 1,2,4")
    p.add_argument("--output", type=str, default=None, help="Write the table as CSV")
    p.set_defaults(handler=cost)

    p = commands.add_parser("run", help="Execute shared plans and write one JSON line per query")
    add_batch_arguments(p)
    add_rewrite_arguments(p, DEFAULT_BACKEND_DIALECT, REFERENCE_DIALECTS)
    add_data_arguments(p)
    p.add_argument("--output-dir", type=str, default=None, help="Write results.jsonl under this directory")
    p.set_defaults(handler=run)

    p = commands.add_parser("gen-workload", help="Generate desk-scale fixtures and query instances")
    p.add_argument("output_dir", type=str)
    p.add_argument("--scale-factor", type=float, default=0.001)
    p.add_argument("--templates", type=str, nargs="+", default=list(DEFAULT_TEMPLATES), choices=TEMPLATE_NAMES)
    p.add_argument("--instances", type=positive_int, default=32)
    p.add_argument("--selectivity", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=gen_workload)

    p = commands.add_parser("serve", help="Run the batching gateway")
    p.add_argument("--config", type=str, default=None, help="GatewayConfig JSON file")
    p.add_argument("--catalog", type=str, default=None)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--window", type=float, default=None, help="Batch window in seconds")
    p.add_argument("--max-batch", type=positive_int, default=None)
    p.add_argument("--grouping", type=str, default=None, choices=["per-template", "global"])
    p.add_argument("--dialect", type=str, default=None, choices=REFERENCE_DIALECTS)
    p.add_argument("--host", type=str, default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(handler=serve)

    p = commands.add_parser("bench", help="Throughput and cost per batch size on the reference backend")
    p.add_argument("--template", type=str, default="q6", choices=TEMPLATE_NAMES)
    p.add_argument("--sizes", type=int_list, default=list(DEFAULT_SIZES))
    p.add_argument("--scale-factor", type=float, default=0.001)
    p.add_argument("--selectivity", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", type=str, default="linear", choices=["linear", "indexed"])
    p.add_argument("--policy", type=str, default="heuristic", choices=SPLIT_POLICIES)
    p.add_argument("--dialect", type=str, default=DEFAULT_BACKEND_DIALECT, choices=REFERENCE_DIALECTS)
    p.add_argument("--output-dir", type=str, default="results")
    _add_cost_arguments(p)
    p.set_defaults(handler=bench)
    return parser


def main(argv=None):
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except UsageError as e:
        parser.error(str(e))
    except (SharedQaasError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
