"""Plain and annotated relations, and the delimited fixture format."""

from __future__ import annotations

import datetime
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Union

import pandas as pd

from ..errors import UnknownRelationError
from ..relational_ir import Catalog, ColumnRef, TableSchema
from .annotation import ARRAY, AnnotationKind, QuerySetEncoding

logger = logging.getLogger(__name__)

# Base columns are keyed by ColumnRef, computed fields (aggregates, outputs) by name.
FieldKey = Union[ColumnRef, str]

FIXTURE_DELIMITER = "|"
FIXTURE_SUFFIX = ".tbl"


def field_label(key: FieldKey) -> str:
    return key.column if isinstance(key, ColumnRef) else key


@dataclass(frozen=True)
class Relation:
    schema: tuple[FieldKey, ...]
    rows: tuple[tuple[Any, ...], ...]

    def index(self, key: FieldKey) -> int:
        try:
            return self.schema.index(key)
        except ValueError:
            raise UnknownRelationError(f"unknown column {key}") from None

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(field_label(k) for k in self.schema)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class AnnotatedRelation:
    """Relation whose rows carry the annotation as their last element.

    Attributes:
        schema: field keys of the data columns (the annotation is not listed).
        kind: annotation kind of the last row element.
        rows: the tuples, annotation last.
        batch: query ids of the batch that produced the relation.
        encoding: query_set encoding used when kind is SET.
    """

    schema: tuple[FieldKey, ...]
    kind: AnnotationKind
    rows: tuple[tuple[Any, ...], ...]
    batch: frozenset[int]
    encoding: QuerySetEncoding = ARRAY

    def index(self, key: FieldKey) -> int:
        try:
            return self.schema.index(key)
        except ValueError:
            raise UnknownRelationError(f"unknown column {key}") from None

    def query_ids_of(self, row: tuple[Any, ...]) -> tuple[int, ...]:
        match self.kind:
            case AnnotationKind.SET:
                return self.encoding.decode(row[-1])
            case AnnotationKind.ATOMIC:
                return (row[-1],)
            case _:
                return ()

    def strip(self) -> Relation:
        return Relation(self.schema, tuple(row[:-1] for row in self.rows))

    def __len__(self) -> int:
        return len(self.rows)


def _parse_cell(value: Any, column_type: str) -> Any:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    match column_type:
        case "INTEGER" | "BIGINT":
            # integer columns holding NULLs are written by pandas as floats
            return int(value) if str(value).lstrip("-").isdigit() else int(float(value))
        case "DOUBLE":
            return float(value)
        case "DATE":
            return datetime.date.fromisoformat(str(value))
        case _:
            return str(value)


def load_relation(path: str | Path, table: TableSchema) -> Relation:
    """Load a fixture file (header row of column names, `|`-delimited rows)."""
    frame = pd.read_csv(path, sep=FIXTURE_DELIMITER, dtype=str, keep_default_na=False, na_values=[""])
    missing = [c for c in table.column_names if c not in frame.columns]
    if missing:
        raise UnknownRelationError(f"fixture {path} lacks columns {', '.join(missing)} of table {table.name}")
    types = [table.column(c).type for c in table.column_names]
    columns = [frame[c].tolist() for c in table.column_names]
    rows = tuple(
        tuple(_parse_cell(v, t) for v, t in zip(values, types))
        for values in zip(*columns)
    ) if columns else ()
    logger.debug(f"Loaded {len(rows)} rows of {table.name} from {path}")
    return Relation(tuple(ColumnRef(table.name, c) for c in table.column_names), rows)


def relation_to_frame(relation: Relation) -> pd.DataFrame:
    columns = relation.column_names
    data = {
        name: [row[i].isoformat() if isinstance(row[i], datetime.date) else row[i] for row in relation.rows]
        for i, name in enumerate(columns)
    }
    return pd.DataFrame(data, columns=list(columns))


def write_relation(path: str | Path, relation: Relation) -> None:
    relation_to_frame(relation).to_csv(path, sep=FIXTURE_DELIMITER, index=False)


def make_relation(table: str, columns: Iterable[str], rows: Iterable[Iterable[Any]]) -> Relation:
    return Relation(tuple(ColumnRef(table, c) for c in columns), tuple(tuple(r) for r in rows))


def load_tables(directory: str | Path, catalog: Catalog) -> dict[str, Relation]:
    """Every catalog table from `{directory}/{table}.tbl`."""
    directory = Path(directory)
    tables = {}
    for table in catalog.tables:
        path = directory / f"{table.name}{FIXTURE_SUFFIX}"
        if not path.exists():
            raise UnknownRelationError(f"no fixture for table {table.name} at {path}")
        tables[table.name] = load_relation(path, table)
    return tables
