from .dialect import DialectProfile, builtin_dialects, get_dialect, load_dialects
from .render import (
    FieldNamer,
    RenderedQuery,
    RenderOptions,
    ScanMode,
    condition_sql,
    gen_order_limit_sql,
    gen_shared_group_sql,
    gen_shared_join_sql,
    gen_shared_scan_sql,
    render_index_tree,
    render_plan,
)

__all__ = [
    "DialectProfile",
    "FieldNamer",
    "RenderOptions",
    "ScanMode",
    "RenderedQuery",
    "builtin_dialects",
    "condition_sql",
    "gen_order_limit_sql",
    "gen_shared_group_sql",
    "gen_shared_join_sql",
    "gen_shared_scan_sql",
    "get_dialect",
    "load_dialects",
    "render_index_tree",
    "render_plan",
]
