from .builder import PlanOptions, SharedPlanDag, Sink, build_global_plan, build_shared_plan, join_tree
from .script import ExecutionScript, MaterializeStep, RunStep, SplitDecision, Step, temp_tables_read
from .split import SplitOptions, SplitPolicy, split_dag, temp_table_name

__all__ = [
    "ExecutionScript",
    "MaterializeStep",
    "PlanOptions",
    "RunStep",
    "SharedPlanDag",
    "Sink",
    "SplitDecision",
    "SplitOptions",
    "SplitPolicy",
    "Step",
    "build_global_plan",
    "build_shared_plan",
    "join_tree",
    "split_dag",
    "temp_table_name",
    "temp_tables_read",
]
