import argparse
import os

from ..plan_dag import SplitPolicy
from ..sql_gen import builtin_dialects

DEFAULT_DIALECT = "presto"
DEFAULT_BACKEND_DIALECT = "duckdb"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
SPLIT_POLICIES: tuple[SplitPolicy, ...] = ("heuristic", "always-duplicate", "always-materialize")


def str2bool(v):
    if isinstance(v, bool):
        return v
    if v.lower() in ("yes", "true", "t", "y", "1"):
        return True
    elif v.lower() in ("no", "false", "f", "n", "0"):
        return False
    else:
        raise argparse.ArgumentTypeError("Boolean value expected.")


def positive_int(v):
    value = int(v)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return value


def int_list(v):
    """Comma separated positive integers, e.g. "1,2,4,8"."""
    try:
        values = [int(x) for x in v.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {v!r}") from None
    if not values or any(x < 1 for x in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {v!r}")
    return values


def add_common_arguments(parser):
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=LOG_LEVELS,
        default=os.getenv("SHAREDQAAS_LOG_LEVEL", "INFO").upper(),
        help="Logging level (default from SHAREDQAAS_LOG_LEVEL)",
    )


def add_batch_arguments(parser):
    """
    Arguments shared by the subcommands reading a batch file.
    Args:
        parser (argparse.ArgumentParser): the subcommand parser
    """
    parser.add_argument("batch_file", type=str, help="Newline-delimited JSON records {id, sql, bindings?}")
    parser.add_argument("--catalog", type=str, required=True, help="Catalog JSON file")
    parser.add_argument("--bindings", type=str, default=None, help="JSON object mapping query id to bindings")
    parser.add_argument(
        "--grouping", type=str, default="per-template", choices=["per-template", "global"],
        help="Batch grouping policy",
    )
    parser.add_argument("--max-batch", type=positive_int, default=128, help="Maximum batch size")


def add_rewrite_arguments(parser, default_dialect=DEFAULT_DIALECT, dialects=None):
    parser.add_argument("--mode", type=str, default="linear", choices=["linear", "indexed"], help="Shared scan mode")
    parser.add_argument("--policy", type=str, default="heuristic", choices=SPLIT_POLICIES, help="DAG split policy")
    parser.add_argument(
        "--dialect",
        type=str,
        default=default_dialect,
        choices=list(dialects or sorted(builtin_dialects())),
        help="SQL dialect profile",
    )
    parser.add_argument(
        "--prefilter", type=str2bool, default=True,
        help="Push the OR of all query predicates into the shared scans",
    )
    parser.add_argument(
        "--early-unnest", type=str2bool, default=False, help="Replicate tuples right after the shared scans",
    )


def add_data_arguments(parser):
    parser.add_argument("--data", type=str, required=True, help="Directory of {table}.tbl fixture files")
