"""Dialect profiles: the function names and syntax each target SQL engine needs."""

from __future__ import annotations

import json
import logging
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal

from pydantic import BaseModel, ConfigDict, Field

from ..errors import UnsupportedDialectFeatureError

logger = logging.getLogger(__name__)

DEFAULT_MAX_QUERY_BYTES = 262144


class DialectProfile(BaseModel):
    """SQL templates for one engine.

    Templates are `str.format` patterns; `{ids}`, `{arms}`, `{set}`, `{id}`, `{mask}`,
    `{left}`, `{right}` and `{max_id}` are filled in by the renderer.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    description: str = ""
    query_set_encoding: Literal["array", "bitmask"]
    query_set_type: str
    set_literal: str
    empty_set: str
    member: str
    zero: str
    # masks with bit 63 set are written as negative two's-complement values
    signed_mask: bool = False
    linear_set: str
    linear_separator: str = ", "
    intersect: str
    non_empty: str
    contains: str
    unnest_style: Literal["cross_join", "select_list", "series"]
    unnest_from: str
    unnest_id: str
    row_number: str
    supports_window: bool = True
    max_query_bytes: int = Field(default=DEFAULT_MAX_QUERY_BYTES, gt=0)
    supports_materialized_readback: bool = True
    create_temp: str
    drop_temp: str

    @property
    def is_bitmask(self) -> bool:
        return self.query_set_encoding == "bitmask"

    def mask_value(self, mask: int) -> int:
        if self.signed_mask and mask >= 1 << 63:
            return mask - (1 << 64)
        return mask

    def set_sql(self, ids: Iterable[int]) -> str:
        ids = sorted(set(ids))
        if not ids:
            return self.empty_set
        if self.is_bitmask:
            return self.set_literal.format(mask=self.mask_value(sum(1 << (q - 1) for q in ids)))
        return self.set_literal.format(ids=", ".join(str(q) for q in ids))

    def member_sql(self, query_id: int) -> str:
        return self.member.format(id=query_id, mask=self.mask_value(1 << (query_id - 1)))

    def arm_sql(self, condition: str, query_id: int) -> str:
        return f"CASE WHEN {condition} THEN {self.member_sql(query_id)} ELSE {self.zero} END"

    def linear_sql(self, arms: Iterable[str]) -> str:
        return self.linear_set.format(arms=self.linear_separator.join(arms))

    def intersect_sql(self, left: str, right: str) -> str:
        return self.intersect.format(left=left, right=right)

    def non_empty_sql(self, set_sql: str) -> str:
        return self.non_empty.format(set=set_sql)

    def contains_sql(self, set_sql: str, query_id: int | str) -> str:
        return self.contains.format(set=set_sql, id=query_id)

    def unnest_from_sql(self, max_id: int) -> str:
        return self.unnest_from.format(max_id=max_id)

    def unnest_filter_sql(self) -> str | None:
        """Membership test needed after a series-style unnest; None for the other styles."""
        if self.unnest_style != "series":
            return None
        return self.contains_sql("query_set", self.unnest_id)

    def row_number_sql(self, ordering: str) -> str:
        if not self.supports_window:
            raise UnsupportedDialectFeatureError(f"dialect {self.name} has no window functions for per-query limits")
        return self.row_number.format(ordering=ordering)

    def create_temp_sql(self, name: str, select: str) -> str:
        return self.create_temp.format(name=name, select=select)

    def drop_temp_sql(self, name: str) -> str:
        return self.drop_temp.format(name=name)


def _read_profiles(text: str) -> dict[str, DialectProfile]:
    raw = json.loads(text)
    return {name: DialectProfile(name=name, **fields) for name, fields in raw.items()}


@lru_cache(maxsize=1)
def builtin_dialects() -> dict[str, DialectProfile]:
    text = resources.files(__package__).joinpath("dialects.json").read_text(encoding="utf-8")
    return _read_profiles(text)


def load_dialects(path: str | Path) -> dict[str, DialectProfile]:
    """Dialect profiles from a JSON file with the layout of the bundled `dialects.json`."""
    with open(path, "r", encoding="utf-8") as f:
        profiles = _read_profiles(f.read())
    logger.info(f"Loaded {len(profiles)} dialect profiles from {path}")
    return profiles


def get_dialect(name: str | DialectProfile) -> DialectProfile:
    if isinstance(name, DialectProfile):
        return name
    profiles = builtin_dialects()
    if name not in profiles:
        raise ValueError(f"Unknown dialect: {name}. Choose from {sorted(profiles)}")
    return profiles[name]
