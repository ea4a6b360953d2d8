"""Backend adapters and the result tables they return."""

from __future__ import annotations

import datetime
import logging
import os
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import duckdb
import pandas as pd
from beartype import beartype

from ..dq_core import ARRAY, AnnotatedRelation, AnnotationKind, QuerySetEncoding, Relation, encoding_for, field_label
from ..errors import AnnotationMissingError, BackendError, UnknownRelationError
from ..relational_ir import Catalog, QueryBatch, TableSchema
from ..sql_gen import DialectProfile, get_dialect

logger = logging.getLogger(__name__)

REFERENCE_DIALECTS = ("duckdb", "duckdb-bitmask")


def _normalize(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_normalize(v) for v in value)
    return value


def _annotation_of(columns: Sequence[str]) -> AnnotationKind:
    if not columns:
        return AnnotationKind.NONE
    match columns[-1]:
        case "query_set":
            return AnnotationKind.SET
        case "query_id":
            return AnnotationKind.ATOMIC
        case _:
            return AnnotationKind.NONE


@dataclass(frozen=True)
class ResultTable:
    """Rows returned by a backend; the annotation column, when present, is the last one."""

    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]
    annotation: AnnotationKind = AnnotationKind.NONE
    encoding: QuerySetEncoding = ARRAY

    def __post_init__(self) -> None:
        name = self.annotation.column_name
        if name is not None and (not self.columns or self.columns[-1] != name):
            raise ValueError(f"annotated result must end with column {name}, got {self.columns}")

    @property
    def data_columns(self) -> tuple[str, ...]:
        return self.columns[:-1] if self.annotation != AnnotationKind.NONE else self.columns

    @classmethod
    def from_rows(
            cls,
            columns: Sequence[str],
            rows: Iterable[Sequence[Any]],
            encoding: QuerySetEncoding = ARRAY,
    ) -> "ResultTable":
        """Result whose annotation is recognized from the name of its last column."""
        columns = tuple(columns)
        normalized = tuple(tuple(_normalize(v) for v in row) for row in rows)
        return cls(columns, normalized, _annotation_of(columns), encoding)

    @classmethod
    def from_relation(cls, relation: Relation | AnnotatedRelation) -> "ResultTable":
        names = tuple(field_label(k) for k in relation.schema)
        if isinstance(relation, AnnotatedRelation):
            annotation = relation.kind.column_name
            columns = names + ((annotation,) if annotation else ())
            return cls(columns, relation.rows, relation.kind, relation.encoding)
        return cls(names, relation.rows)

    def query_ids_of(self, row: tuple[Any, ...]) -> tuple[int, ...]:
        match self.annotation:
            case AnnotationKind.SET:
                return self.encoding.decode(row[-1])
            case AnnotationKind.ATOMIC:
                return (int(row[-1]),)
            case _:
                raise AnnotationMissingError(f"result with columns {self.columns} carries no annotation")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=list(self.columns))

    def __len__(self) -> int:
        return len(self.rows)


@beartype
def demux_results(shared: ResultTable, batch: QueryBatch | Iterable[int]) -> dict[int, ResultTable]:
    """Per-query results of a shared result, annotation column removed.

    Every query of `batch` gets an entry, empty when no row names it. Row order of the
    shared result is kept.
    """
    if shared.annotation == AnnotationKind.NONE:
        raise AnnotationMissingError(f"cannot demultiplex a result without annotation column: {shared.columns}")
    ids = batch.query_ids if isinstance(batch, QueryBatch) else tuple(batch)
    partitions: dict[int, list[tuple[Any, ...]]] = {q: [] for q in ids}
    for row in shared.rows:
        for q in shared.query_ids_of(row):
            if q in partitions:
                partitions[q].append(row[:-1])
    return {q: ResultTable(shared.data_columns, tuple(rows)) for q, rows in partitions.items()}


class BackendAdapter(ABC):
    """Contract between the executor and one SQL engine.

    Attributes:
        dialect: profile the engine's statements are rendered with.
        concurrent_safe: whether `execute` may be called from several threads at once.
    """

    dialect: DialectProfile
    concurrent_safe: bool = False

    @property
    def encoding(self) -> QuerySetEncoding:
        return encoding_for(self.dialect.query_set_encoding)

    @abstractmethod
    def execute(self, sql: str, parameters: Sequence[Any] | None = None) -> ResultTable:
        """Run one statement; `parameters` fill its `?` placeholders in order."""

    @abstractmethod
    def create_temp(self, name: str, schema: Sequence[tuple[str, str]], rows: Iterable[Sequence[Any]]) -> None:
        ...

    @abstractmethod
    def drop_temp(self, name: str) -> None:
        ...

    def materialize(self, name: str, sql: str) -> None:
        """Run a statement that writes the temp table `name`."""
        self.execute(sql)
        logger.debug(f"Materialized {name}")

    def close(self) -> None:
        pass

    def __enter__(self) -> "BackendAdapter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ReferenceBackend(BackendAdapter):
    """In-process DuckDB database running the statements of the `duckdb` dialects.

    The database file and thread count come from `SHAREDQAAS_DUCKDB_PATH` (in-memory
    when unset) and `SHAREDQAAS_DUCKDB_THREADS`. One connection serves every call, so
    statements are serialized.
    """

    concurrent_safe = False

    def __init__(
            self,
            dialect: str | DialectProfile = "duckdb",
            database: str | None = None,
            threads: int | None = None,
    ) -> None:
        self.dialect = get_dialect(dialect)
        if self.dialect.name not in REFERENCE_DIALECTS:
            raise ValueError(f"Unknown reference dialect: {self.dialect.name}. Choose from {list(REFERENCE_DIALECTS)}")
        database = database or os.getenv("SHAREDQAAS_DUCKDB_PATH") or ":memory:"
        threads = threads or int(os.getenv("SHAREDQAAS_DUCKDB_THREADS", "1"))
        self._connection = duckdb.connect(database=database, config={"threads": threads})
        self._lock = threading.Lock()
        logger.info(f"Opened reference backend {database} ({self.dialect.name}, {threads} threads)")

    def execute(self, sql: str, parameters: Sequence[Any] | None = None) -> ResultTable:
        with self._lock:
            try:
                if parameters:
                    cursor = self._connection.execute(sql, list(parameters))
                else:
                    cursor = self._connection.execute(sql)
                if cursor.description is None:
                    return ResultTable((), ())
                columns = [d[0] for d in cursor.description]
                rows = cursor.fetchall()
            except duckdb.Error as e:
                raise BackendError(f"reference backend failed: {e}", sql) from e
        return ResultTable.from_rows(columns, rows, self.encoding)

    def _create(self, name: str, schema: Sequence[tuple[str, str]], temporary: bool) -> None:
        columns = ", ".join(f'"{c}" {t}' for c, t in schema)
        kind = "TEMPORARY TABLE" if temporary else "TABLE"
        self.execute(f"CREATE OR REPLACE {kind} {name} ({columns})")

    def _insert(self, name: str, schema: Sequence[tuple[str, str]], rows: Iterable[Sequence[Any]]) -> None:
        names = [c for c, _ in schema]
        data = [
            [v.isoformat() if isinstance(v, datetime.date) else v for v in row]
            for row in rows
        ]
        if not data:
            return
        frame = pd.DataFrame(data, columns=names, dtype=object)
        casts = ", ".join(f'CAST("{c}" AS {t}) AS "{c}"' for c, t in schema)
        with self._lock:
            try:
                self._connection.register("sharedqaas_rows", frame)
                self._connection.execute(f"INSERT INTO {name} SELECT {casts} FROM sharedqaas_rows")
            except duckdb.Error as e:
                raise BackendError(f"loading {len(data)} rows into {name} failed: {e}") from e
            finally:
                self._connection.unregister("sharedqaas_rows")

    def register_table(self, table: TableSchema, relation: Relation) -> None:
        """(Re)create a base table and load the rows of `relation` into it."""
        schema = [(c.name, c.type) for c in table.columns]
        missing = [c for c in table.column_names if c not in relation.column_names]
        if missing:
            raise UnknownRelationError(f"relation for {table.name} lacks columns {', '.join(missing)}")
        order = [relation.column_names.index(c) for c in table.column_names]
        self._create(table.name, schema, temporary=False)
        self._insert(table.name, schema, ([row[i] for i in order] for row in relation.rows))
        logger.debug(f"Registered {table.name} with {len(relation)} rows")

    def load_tables(self, catalog: Catalog, tables: Mapping[str, Relation]) -> None:
        for table in catalog.tables:
            if table.name in tables:
                self.register_table(table, tables[table.name])

    def create_temp(self, name: str, schema: Sequence[tuple[str, str]], rows: Iterable[Sequence[Any]]) -> None:
        self._create(name, schema, temporary=True)
        self._insert(name, schema, rows)
        logger.debug(f"Created temp table {name}")

    def drop_temp(self, name: str) -> None:
        self.execute(self.dialect.drop_temp_sql(name))
        logger.debug(f"Dropped temp table {name}")

    def close(self) -> None:
        self._connection.close()
