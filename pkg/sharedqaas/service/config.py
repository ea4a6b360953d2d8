from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Literal

from beartype import beartype
from pydantic import BaseModel, ConfigDict, Field

from ..cost_model import DEFAULT_USD_PER_TIB, PricingKind, PricingScheme
from ..plan_dag import SplitPolicy
from ..relational_ir.batching import GroupingPolicy
from ..sql_gen import ScanMode

logger = logging.getLogger(__name__)

DEFAULT_PORT = 7433


class GatewayConfig(BaseModel):
    """Batching gateway settings, read from a JSON file.

    A batch is flushed when `window_seconds` elapsed since its first query arrived or
    when it holds `max_batch_size` queries, whichever comes first.
    """

    model_config = ConfigDict(frozen=True)

    window_seconds: float = Field(default=0.05, gt=0)
    max_batch_size: int = Field(default=16, ge=1)
    policy: GroupingPolicy = "per-template"
    dialect: str = "duckdb"
    backend: Literal["reference"] = "reference"
    pricing: PricingKind = "bytes-scanned"
    usd_per_tib: float = Field(default=DEFAULT_USD_PER_TIB, gt=0)
    mode: ScanMode = "linear"
    prefilter: bool = True
    split_policy: SplitPolicy = "heuristic"
    host: str = "127.0.0.1"
    port: int = Field(default=DEFAULT_PORT, ge=0, le=65535)
    catalog_path: str | None = None
    data_dir: str | None = None

    def pricing_scheme(self) -> PricingScheme:
        return PricingScheme.from_rate_per_tib(self.pricing, self.usd_per_tib)


@beartype
def load_gateway_config(path: str | Path | None = None, **overrides: Any) -> GatewayConfig:
    """File values first, then every override that is not None (CLI flags)."""
    raw: dict[str, Any] = {}
    if path is not None:
        with open(path, "r") as f:
            raw = json.load(f)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    config = GatewayConfig.model_validate(raw)
    logger.debug(f"Gateway config: {config.model_dump()}")
    return config
