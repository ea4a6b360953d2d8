from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

TIB = 2 ** 40
DEFAULT_USD_PER_TIB = 5.0

PricingKind = Literal["bytes-scanned", "columns-billed"]


class PricingScheme(BaseModel):
    """Pay-per-byte pricing of one query-as-a-service engine.

    `bytes-scanned` charges what the engine reads after pruning, `columns-billed`
    charges the full size of every referenced column. Under `bytes-scanned` the engine
    stops pruning once a query reads at least `full_scan_selectivity` of a table.
    """

    model_config = ConfigDict(frozen=True)

    kind: PricingKind
    rate: float = Field(default=DEFAULT_USD_PER_TIB / TIB, gt=0, description="Currency units per byte")
    min_billed_bytes: int = Field(default=0, ge=0, description="Minimum bytes billed per statement")
    full_scan_selectivity: float = Field(default=0.99, gt=0, le=1)

    @classmethod
    def from_rate_per_tib(cls, kind: PricingKind, per_tib: float, **kwargs) -> "PricingScheme":
        return cls(kind=kind, rate=per_tib / TIB, **kwargs)

    def cost(self, billed_bytes: int) -> float:
        return billed_bytes * self.rate
