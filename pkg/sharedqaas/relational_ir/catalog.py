"""Declarative schema catalog used to resolve columns and to size tables for costing."""

from __future__ import annotations

import datetime
import json
import logging
from pathlib import Path
from typing import Any, Literal

from beartype import beartype
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import BindingError, UnknownRelationError

logger = logging.getLogger(__name__)

ColumnType = Literal["INTEGER", "BIGINT", "DOUBLE", "VARCHAR", "DATE"]

NUMERIC_TYPES = ("INTEGER", "BIGINT", "DOUBLE")


class ColumnSchema(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    type: ColumnType
    avg_width: float = Field(gt=0, description="Average encoded width in bytes")


class TableSchema(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    columns: tuple[ColumnSchema, ...]
    row_count: int = Field(ge=0)

    @model_validator(mode="after")
    def _unique_columns(self) -> "TableSchema":
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"table {self.name} declares duplicate column names")
        return self

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnSchema:
        for column in self.columns:
            if column.name == name:
                return column
        raise UnknownRelationError(f"unknown column {self.name}.{name}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)


class Catalog(BaseModel):
    """All tables known to the rewriter.

    The catalog file is JSON of the form::

        {"tables": [{"name": "lineitem", "row_count": 6000,
                     "columns": [{"name": "l_quantity", "type": "INTEGER", "avg_width": 4}]}]}
    """

    model_config = ConfigDict(frozen=True)

    tables: tuple[TableSchema, ...]

    @model_validator(mode="after")
    def _normalize(self) -> "Catalog":
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise ValueError("catalog declares the same table twice")
        return self

    def table(self, name: str) -> TableSchema:
        for table in self.tables:
            if table.name == name:
                return table
        raise UnknownRelationError(f"unknown table {name}")

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)

    def column_type(self, table: str, column: str) -> ColumnType:
        return self.table(table).column(column).type

    def with_table(self, table: TableSchema) -> "Catalog":
        others = tuple(t for t in self.tables if t.name != table.name)
        return Catalog(tables=others + (table,))


@beartype
def load_catalog(path: str | Path) -> Catalog:
    with open(path, "r") as f:
        raw = json.load(f)
    catalog = Catalog.model_validate(raw)
    logger.debug(f"Loaded catalog with {len(catalog.tables)} tables from {path}")
    return catalog


def coerce_value(value: Any, column_type: ColumnType, where: str = "") -> Any:
    """Convert a constant to the Python type matching its column.

    Integer columns keep non-integral floats so that `l_quantity < 24.5` keeps its meaning.
    """
    label = f" for {where}" if where else ""
    match column_type:
        case "INTEGER" | "BIGINT":
            if isinstance(value, bool):
                raise BindingError(f"boolean constant {value!r}{label} is not an integer")
            if isinstance(value, int):
                return value
            if isinstance(value, float):
                return int(value) if value.is_integer() else value
            if isinstance(value, str):
                try:
                    return int(value)
                except ValueError:
                    pass
                try:
                    return float(value)
                except ValueError:
                    pass
            raise BindingError(f"constant {value!r}{label} is not numeric")
        case "DOUBLE":
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return float(value)
            if isinstance(value, str):
                try:
                    return float(value)
                except ValueError:
                    pass
            raise BindingError(f"constant {value!r}{label} is not numeric")
        case "VARCHAR":
            if isinstance(value, str):
                return value
            raise BindingError(f"constant {value!r}{label} is not a string")
        case "DATE":
            if isinstance(value, datetime.datetime):
                return value.date()
            if isinstance(value, datetime.date):
                return value
            if isinstance(value, str):
                try:
                    return datetime.date.fromisoformat(value)
                except ValueError:
                    pass
            raise BindingError(f"constant {value!r}{label} is not a date")
        case _:
            raise ValueError(f"Unknown column type: {column_type}")
