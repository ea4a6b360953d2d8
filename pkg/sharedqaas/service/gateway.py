"""Window-or-size batching of incoming queries onto shared executions."""

from __future__ import annotations

import asyncio
import datetime
import decimal
import itertools
import logging
import threading
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

from ..cost_model import TableStats, estimate_bytes, query_at_a_time_bytes
from ..errors import SharedQaasError
from ..execution import BackendAdapter, ResultTable, demux_script, run_script
from ..plan_dag import ExecutionScript, build_global_plan, split_dag
from ..relational_ir import (
    GLOBAL_TEMPLATE,
    Catalog,
    QueryBatch,
    QueryRecord,
    QuerySpec,
    extract_template,
    group_batch,
    parse_records,
    unparse,
)
from ..sql_gen import RenderOptions
from .config import GatewayConfig

logger = logging.getLogger(__name__)


def jsonable(value: Any) -> Any:
    match value:
        case datetime.date():
            return value.isoformat()
        case decimal.Decimal():
            return float(value)
        case tuple() | list():
            return [jsonable(v) for v in value]
        case _:
            return value


def create_reply(
        query_id: Hashable,
        result: ResultTable | None,
        batch_id: int | None,
        batch_size: int,
        amortized_cost: float | None,
        fallback: bool = False,
        error: str | None = None,
) -> dict[str, Any]:
    reply = {
        "id": query_id,
        "rows": [] if result is None else [jsonable(row) for row in result.rows],
        "columns": [] if result is None else list(result.columns),
        "batch_id": batch_id,
        "batch_size": batch_size,
        "amortized_cost": amortized_cost,
        "fallback": fallback,
    }
    if error is not None:
        reply["error"] = error
    return reply


@dataclass
class GatewayCounters:
    shared_executions: int = 0
    individual_executions: int = 0
    flushes: int = 0


class BatchExecutor:
    """Runs one flushed group of queries: shared where possible, individually otherwise."""

    def __init__(self, config: GatewayConfig, backend: BackendAdapter, catalog: Catalog) -> None:
        self.config = config
        self.backend = backend
        self.catalog = catalog
        self.stats = TableStats.from_catalog(catalog)
        self.scheme = config.pricing_scheme()
        self.counters = GatewayCounters()
        self._next_batch_id = 0
        self._lock = threading.Lock()

    def _batch_ids(self, count: int) -> int:
        with self._lock:
            first = self._next_batch_id
            self._next_batch_id += count
        return first

    def _count(self, shared: bool) -> None:
        with self._lock:
            if shared:
                self.counters.shared_executions += 1
            else:
                self.counters.individual_executions += 1

    def _qat_cost(self, spec: QuerySpec) -> float | None:
        try:
            return self.scheme.cost(query_at_a_time_bytes(spec, self.stats, self.scheme))
        except SharedQaasError as e:
            logger.warning(f"No cost estimate for {unparse(spec)!r}: {e}")
            return None

    def _amortized_cost(self, script: ExecutionScript) -> float | None:
        try:
            return estimate_bytes(script, self.stats, self.scheme).amortized_cost
        except SharedQaasError as e:
            logger.warning(f"No cost estimate for shared script: {e}")
            return None

    def individual(self, record: QueryRecord, spec: QuerySpec | None, reason: str | None) -> dict[str, Any]:
        """Query-at-a-time answer; `reason` is why the query was not shared."""
        if reason is not None:
            logger.warning(f"Query {record.id!r} runs individually: {reason}")
        self._count(shared=False)
        try:
            if spec is not None:
                result = self.backend.execute(unparse(spec))
            else:
                result = self.backend.execute(record.sql, record.bindings)
        except SharedQaasError as e:
            return create_reply(record.id, None, None, 1, None, fallback=True, error=str(e))
        cost = self._qat_cost(spec) if spec is not None else None
        return create_reply(
            record.id, ResultTable(result.columns, result.rows), None, 1, cost, fallback=reason is not None,
        )

    def shared(self, batch: QueryBatch, records: dict[int, QueryRecord]) -> dict[int, dict[str, Any]]:
        """Replies per submission token; members' source ids are those tokens."""
        if batch.size == 1:
            member = batch.members[0]
            return {member.source_id: self.individual(records[member.source_id], member.spec, None)}
        try:
            dag = build_global_plan([batch], self.catalog)
            script = split_dag(dag, self.config.split_policy, self.stats, dialect=self.backend.dialect)
            options = RenderOptions(mode=self.config.mode, prefilter=self.config.prefilter, catalog=self.catalog)
            run = run_script(script, self.backend, options)
            results = demux_script(script, run.results)
        except Exception as e:
            return {
                m.source_id: self.individual(records[m.source_id], m.spec, f"shared execution failed: {e}")
                for m in batch.members
            }
        self._count(shared=True)
        amortized = self._amortized_cost(script)
        query_map = dag.query_map()
        replies = {}
        for _, q, member in dag.iter_members():
            batch_id, _ = query_map[q]
            record = records[member.source_id]
            replies[member.source_id] = create_reply(record.id, results[q], batch_id, batch.size, amortized)
        return replies

    def execute(self, items: Sequence[tuple[int, QueryRecord, QuerySpec | None]]) -> dict[int, dict[str, Any]]:
        """Reply per submission token; items without a spec could not be parsed."""
        records = {token: record for token, record, _ in items}
        replies: dict[int, dict[str, Any]] = {}
        parsed = []
        for token, record, spec in items:
            if spec is None:
                replies[token] = self.individual(record, None, "query could not be rewritten")
            else:
                parsed.append((token, spec))
        if parsed:
            batches, _ = group_batch(parsed, self.config.policy, self.config.max_batch_size)
            first = self._batch_ids(len(batches))
            for offset, batch in enumerate(batches):
                batch = QueryBatch(first + offset, batch.members, batch.template_id)
                replies.update(self.shared(batch, records))
        return replies


@dataclass
class _Pending:
    token: int
    record: QueryRecord
    spec: QuerySpec | None
    future: asyncio.Future


class QueryBatcher:
    """Collects submissions per template and flushes them on window or size.

    Under the `global` policy every query shares one pending group.
    """

    def __init__(self, config: GatewayConfig, executor: BatchExecutor) -> None:
        self.config = config
        self.executor = executor
        self._pending: dict[str, list[_Pending]] = {}
        self._timers: dict[str, asyncio.TimerHandle] = {}
        self._tasks: set[asyncio.Task] = set()
        self._backend_lock = asyncio.Lock()
        self._tokens = itertools.count()

    @property
    def counters(self) -> GatewayCounters:
        return self.executor.counters

    def _key(self, spec: QuerySpec | None) -> str | None:
        if spec is None:
            return None
        if self.config.policy == "global":
            return GLOBAL_TEMPLATE
        return extract_template(spec)[0]

    async def submit(self, record: QueryRecord) -> dict[str, Any]:
        """Wait for the reply to one query."""
        loop = asyncio.get_running_loop()
        try:
            spec = parse_records([record], self.executor.catalog)[0][1]
        except SharedQaasError as e:
            logger.warning(f"Query {record.id!r} cannot be rewritten: {e}")
            spec = None
        future = loop.create_future()
        key = self._key(spec)
        if key is None:
            self._start([_Pending(next(self._tokens), record, None, future)], "fallback")
            return await future

        group = self._pending.setdefault(key, [])
        group.append(_Pending(next(self._tokens), record, spec, future))
        if len(group) >= self.config.max_batch_size:
            self.flush(key, "size")
        elif len(group) == 1:
            self._timers[key] = loop.call_later(self.config.window_seconds, self.flush, key, "window")
        return await future

    def flush(self, key: str, trigger: str) -> None:
        timer = self._timers.pop(key, None)
        if timer is not None:
            timer.cancel()
        group = self._pending.pop(key, [])
        if group:
            self._start(group, trigger)

    def _start(self, group: list[_Pending], trigger: str) -> None:
        self.counters.flushes += 1
        logger.info(f"Flushing {len(group)} queries ({trigger})")
        task = asyncio.get_running_loop().create_task(self._run(group))
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)

    async def _run(self, group: list[_Pending]) -> None:
        items = [(p.token, p.record, p.spec) for p in group]
        try:
            if self.executor.backend.concurrent_safe:
                replies = await asyncio.to_thread(self.executor.execute, items)
            else:
                async with self._backend_lock:
                    replies = await asyncio.to_thread(self.executor.execute, items)
        except Exception as e:
            for p in group:
                if not p.future.done():
                    p.future.set_exception(e)
            return
        for p in group:
            if not p.future.done():
                p.future.set_result(replies[p.token])

    async def drain(self) -> None:
        """Flush every pending group and wait for all executions."""
        for key in list(self._pending):
            self.flush(key, "drain")
        while self._tasks:
            await asyncio.gather(*list(self._tasks), return_exceptions=True)
