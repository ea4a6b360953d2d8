"""Tuple annotations of the data-query model and their two query_set encodings."""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Iterable

from ..errors import EncodingError

MAX_BITMASK_QUERIES = 64


class AnnotationKind(str, Enum):
    NONE = "none"
    ATOMIC = "atomic"  # one query_id per tuple
    SET = "set"  # a query_set per tuple

    @property
    def column_name(self) -> str | None:
        match self:
            case AnnotationKind.ATOMIC:
                return "query_id"
            case AnnotationKind.SET:
                return "query_set"
            case _:
                return None


class QuerySetEncoding(ABC):
    """Physical representation of a query_set value."""

    name: str

    @abstractmethod
    def encode(self, ids: Iterable[int]) -> Any:
        ...

    @abstractmethod
    def decode(self, value: Any) -> tuple[int, ...]:
        ...

    @abstractmethod
    def intersect(self, a: Any, b: Any) -> Any:
        ...

    @abstractmethod
    def is_empty(self, value: Any) -> bool:
        ...

    @abstractmethod
    def contains(self, value: Any, query_id: int) -> bool:
        ...

    def check_batch(self, query_ids: Iterable[int]) -> None:
        for q in query_ids:
            if q < 1:
                raise EncodingError(f"query ids start at 1, got {q}")


class ArrayEncoding(QuerySetEncoding):
    """Sorted, duplicate-free tuple of query ids."""

    name = "array"

    def encode(self, ids: Iterable[int]) -> tuple[int, ...]:
        return tuple(sorted(set(ids)))

    def decode(self, value: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(value)

    def intersect(self, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
        other = set(b)
        return tuple(q for q in a if q in other)

    def is_empty(self, value: tuple[int, ...]) -> bool:
        return len(value) == 0

    def contains(self, value: tuple[int, ...], query_id: int) -> bool:
        return query_id in value


class BitmaskEncoding(QuerySetEncoding):
    """64-bit mask; query q sets bit q-1."""

    name = "bitmask"

    def encode(self, ids: Iterable[int]) -> int:
        mask = 0
        for q in ids:
            if not 1 <= q <= MAX_BITMASK_QUERIES:
                raise EncodingError(f"bitmask encoding holds query ids 1..{MAX_BITMASK_QUERIES}, got {q}")
            mask |= 1 << (q - 1)
        return mask

    def decode(self, value: int) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(MAX_BITMASK_QUERIES) if value >> i & 1)

    def intersect(self, a: int, b: int) -> int:
        return a & b

    def is_empty(self, value: int) -> bool:
        return value == 0

    def contains(self, value: int, query_id: int) -> bool:
        return bool(value >> (query_id - 1) & 1)

    def check_batch(self, query_ids: Iterable[int]) -> None:
        ids = list(query_ids)
        super().check_batch(ids)
        if ids and max(ids) > MAX_BITMASK_QUERIES:
            raise EncodingError(
                f"bitmask encoding is limited to batches of {MAX_BITMASK_QUERIES} queries, got id {max(ids)}"
            )


ARRAY = ArrayEncoding()
BITMASK = BitmaskEncoding()


def encoding_for(name: str) -> QuerySetEncoding:
    match name:
        case "array":
            return ARRAY
        case "bitmask":
            return BITMASK
        case _:
            raise ValueError(f"Unknown query_set encoding: {name}")
