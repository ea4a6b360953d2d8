"""Line-delimited JSON protocol over a local TCP socket.

Each request line is ``{"id": ..., "sql": ..., "bindings": [...]}``; each reply line is
``{"id", "rows", "columns", "batch_id", "batch_size", "amortized_cost", "fallback"}``
plus ``"error"`` when the query failed. Replies on one connection follow the order of
its requests.
"""

from __future__ import annotations

import asyncio
import json
import logging
from typing import Any

from beartype import beartype

from ..dq_core import load_tables
from ..execution import BackendAdapter, ReferenceBackend
from ..relational_ir import Catalog, QueryRecord, load_catalog
from .config import GatewayConfig
from .gateway import BatchExecutor, QueryBatcher

logger = logging.getLogger(__name__)


def parse_request(line: bytes | str) -> QueryRecord:
    """Raises ValueError on a malformed request line."""
    raw = json.loads(line)
    if not isinstance(raw, dict) or "id" not in raw or "sql" not in raw:
        raise ValueError("request needs 'id' and 'sql'")
    bindings = raw.get("bindings")
    if bindings is not None and not isinstance(bindings, list):
        raise ValueError("'bindings' must be a list")
    return QueryRecord(id=raw["id"], sql=raw["sql"], bindings=tuple(bindings) if bindings is not None else None)


def _error_reply(query_id: Any, message: str) -> dict[str, Any]:
    return {
        "id": query_id, "rows": [], "columns": [], "batch_id": None, "batch_size": 0,
        "amortized_cost": None, "fallback": False, "error": message,
    }


class GatewayServer:
    def __init__(self, config: GatewayConfig, backend: BackendAdapter, catalog: Catalog) -> None:
        self.config = config
        self.batcher = QueryBatcher(config, BatchExecutor(config, backend, catalog))
        self._server: asyncio.AbstractServer | None = None

    async def _reply(self, line: bytes) -> dict[str, Any]:
        try:
            record = parse_request(line)
        except ValueError as e:
            return _error_reply(None, f"malformed request: {e}")
        try:
            return await self.batcher.submit(record)
        except Exception as e:
            logger.error(f"Query {record.id!r} failed: {e}")
            return _error_reply(record.id, str(e))

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")
        logger.debug(f"Connection from {peer}")
        replies: asyncio.Queue = asyncio.Queue()

        async def write_replies() -> None:
            while True:
                pending = await replies.get()
                if pending is None:
                    return
                writer.write((json.dumps(await pending) + "\n").encode("utf-8"))
                await writer.drain()

        writer_task = asyncio.create_task(write_replies())
        try:
            while line := await reader.readline():
                if line.strip():
                    await replies.put(asyncio.create_task(self._reply(line)))
        finally:
            await replies.put(None)
            await writer_task
            writer.close()
            logger.debug(f"Connection from {peer} closed")

    async def start(self) -> asyncio.AbstractServer:
        self._server = await asyncio.start_server(self.handle, self.config.host, self.config.port)
        sockets = ", ".join(str(s.getsockname()) for s in self._server.sockets)
        logger.info(
            f"Gateway listening on {sockets} (window {self.config.window_seconds}s, "
            f"max batch {self.config.max_batch_size}, {self.config.policy})"
        )
        return self._server

    async def close(self) -> None:
        await self.batcher.drain()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()


@beartype
def open_backend(config: GatewayConfig, catalog: Catalog) -> ReferenceBackend:
    """Reference backend with the fixtures of `config.data_dir` loaded."""
    match config.backend:
        case "reference":
            backend = ReferenceBackend(config.dialect)
        case _:
            raise ValueError(f"Unknown backend: {config.backend}")
    if config.data_dir is not None:
        backend.load_tables(catalog, load_tables(config.data_dir, catalog))
    return backend


async def gateway_serve(config: GatewayConfig) -> None:
    """Serve until cancelled."""
    if config.catalog_path is None:
        raise ValueError("the gateway needs a catalog_path")
    catalog = load_catalog(config.catalog_path)
    with open_backend(config, catalog) as backend:
        server = GatewayServer(config, backend, catalog)
        listener = await server.start()
        try:
            async with listener:
                await listener.serve_forever()
        finally:
            await server.close()
