import asyncio
import json
import os
import tempfile
import unittest
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from unittest.mock import patch

from pydantic import ValidationError

from sharedqaas.dq_core import load_tables
from sharedqaas.errors import MissingStatisticsError
from sharedqaas.execution import ReferenceBackend
from sharedqaas.relational_ir import QueryRecord, load_catalog
from sharedqaas.service import (
    BatchExecutor,
    GatewayConfig,
    GatewayServer,
    QueryBatcher,
    load_gateway_config,
    parse_request,
)

FIXTURES = Path(__file__).parent / "fixtures"

AGE_QUERY = "SELECT id, name FROM employees WHERE age > ?"


def age_record(i, threshold):
    return QueryRecord(id=i, sql=AGE_QUERY, bindings=(threshold,))


def sorted_rows(rows):
    return sorted(tuple(r) for r in rows)


class TestGatewayConfig(unittest.TestCase):

    def test_file_then_overrides(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "gateway.json")
            with open(path, "w") as f:
                json.dump({"window_seconds": 0.2, "max_batch_size": 4, "policy": "global"}, f)
            config = load_gateway_config(path, max_batch_size=32, port=None)
        self.assertEqual(config.window_seconds, 0.2)
        self.assertEqual(config.max_batch_size, 32)
        self.assertEqual(config.policy, "global")
        self.assertEqual(config.port, 7433)

    def test_invalid_values(self):
        with self.assertRaises(ValidationError):
            GatewayConfig(window_seconds=0)
        with self.assertRaises(ValidationError):
            GatewayConfig(policy="per-user")

    def test_parse_request(self):
        record = parse_request('{"id": "a", "sql": "SELECT 1", "bindings": [1, "x"]}')
        self.assertEqual(record, QueryRecord("a", "SELECT 1", (1, "x")))
        for line in ("not json", '{"sql": "SELECT 1"}', '{"id": 1, "sql": "SELECT 1", "bindings": 3}'):
            with self.assertRaises(ValueError, msg=line):
                parse_request(line)


class TestQueryBatcher(unittest.IsolatedAsyncioTestCase):

    def setUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")
        self.backend = ReferenceBackend("duckdb")
        self.backend.load_tables(self.catalog, load_tables(FIXTURES / "employees", self.catalog))

    def tearDown(self):
        self.backend.close()

    def batcher(self, **overrides):
        config = GatewayConfig(**{"window_seconds": 0.05, "max_batch_size": 8, **overrides})
        return QueryBatcher(config, BatchExecutor(config, self.backend, self.catalog))

    def direct(self, threshold):
        return sorted_rows(self.backend.execute(f"SELECT id, name FROM employees WHERE age > {threshold}").rows)

    async def test_burst_is_flushed_by_size_then_window(self):
        batcher = self.batcher()
        thresholds = [20 + i for i in range(20)]
        replies = await asyncio.gather(*(batcher.submit(age_record(i, t)) for i, t in enumerate(thresholds)))
        self.assertEqual(batcher.counters.shared_executions, 3)
        self.assertEqual(batcher.counters.flushes, 3)
        self.assertEqual(batcher.counters.individual_executions, 0)
        self.assertEqual([r["batch_size"] for r in replies], [8] * 16 + [4] * 4)
        self.assertEqual(len({r["batch_id"] for r in replies}), 3)
        for i, (reply, threshold) in enumerate(zip(replies, thresholds)):
            self.assertEqual(reply["id"], i)
            self.assertFalse(reply["fallback"])
            self.assertEqual(reply["columns"], ["id", "name"])
            self.assertIsNotNone(reply["amortized_cost"])
            self.assertEqual(sorted_rows(reply["rows"]), self.direct(threshold), msg=f"age > {threshold}")

    async def test_trickle_runs_individually(self):
        batcher = self.batcher()
        for i in range(3):
            reply = await batcher.submit(age_record(i, 30 + i))
            self.assertEqual(reply["batch_size"], 1)
            self.assertIsNone(reply["batch_id"])
            self.assertFalse(reply["fallback"])
            self.assertEqual(sorted_rows(reply["rows"]), self.direct(30 + i))
        self.assertEqual(batcher.counters.individual_executions, 3)
        self.assertEqual(batcher.counters.shared_executions, 0)

    async def test_unsupported_query_falls_back(self):
        batcher = self.batcher()
        with self.assertLogs("sharedqaas.service.gateway", level="WARNING"):
            reply = await batcher.submit(QueryRecord("neg", "SELECT id FROM employees WHERE NOT age > 30"))
        self.assertTrue(reply["fallback"])
        self.assertEqual(len(reply["rows"]), 11)
        self.assertNotIn("error", reply)

    async def test_unexpected_error_in_shared_path_falls_back(self):
        batcher = self.batcher()
        with patch("sharedqaas.service.gateway.run_script", side_effect=ValueError("Unknown operator: ~")):
            with self.assertLogs("sharedqaas.service.gateway", level="WARNING") as logs:
                replies = await asyncio.gather(*(batcher.submit(age_record(i, 40 + i)) for i in range(3)))
        self.assertEqual(batcher.counters.shared_executions, 0)
        self.assertEqual(batcher.counters.individual_executions, 3)
        self.assertTrue(any("shared execution failed: Unknown operator" in line for line in logs.output))
        for i, reply in enumerate(replies):
            self.assertTrue(reply["fallback"])
            self.assertNotIn("error", reply)
            self.assertEqual(sorted_rows(reply["rows"]), self.direct(40 + i))

    async def test_missing_statistics_keeps_the_result(self):
        batcher = self.batcher()
        missing = MissingStatisticsError("no statistics for table employees")
        with patch("sharedqaas.service.gateway.query_at_a_time_bytes", side_effect=missing):
            with self.assertLogs("sharedqaas.service.gateway", level="WARNING"):
                reply = await batcher.submit(age_record(1, 50))
        self.assertNotIn("error", reply)
        self.assertIsNone(reply["amortized_cost"])
        self.assertEqual(sorted_rows(reply["rows"]), [(6, "Finn"), (15, "Otto")])

    async def test_mixed_templates_batch_separately(self):
        batcher = self.batcher()
        records = []
        for i in range(6):
            records.append(age_record(f"age-{i}", 25 + 5 * i))
            records.append(QueryRecord(f"dept-{i}", "SELECT name FROM employees WHERE dept_id = ?", (i % 4 + 1,)))
        replies = await asyncio.gather(*(batcher.submit(r) for r in records))
        self.assertEqual(batcher.counters.shared_executions, 2)
        self.assertEqual({r["batch_size"] for r in replies}, {6})
        for record, reply in zip(records, replies):
            self.assertEqual(reply["id"], record.id)
            direct = self.backend.execute(record.sql, record.bindings).rows
            self.assertEqual(sorted_rows(reply["rows"]), sorted_rows(direct), msg=record.id)

    async def test_global_policy_shares_across_templates(self):
        batcher = self.batcher(policy="global", max_batch_size=2)
        replies = await asyncio.gather(
            batcher.submit(age_record("a", 40)),
            batcher.submit(QueryRecord("b", "SELECT name FROM employees WHERE dept_id = ?", (4,))),
        )
        self.assertEqual(batcher.counters.shared_executions, 1)
        self.assertEqual([r["batch_size"] for r in replies], [2, 2])
        self.assertEqual(sorted_rows(replies[1]["rows"]), [("Gina",), ("Hugo",), ("Lea",), ("Pia",)])

    async def test_drain_flushes_pending_groups(self):
        batcher = self.batcher(window_seconds=60)
        pending = asyncio.ensure_future(batcher.submit(age_record(1, 50)))
        await asyncio.sleep(0)
        await batcher.drain()
        reply = await pending
        self.assertEqual(sorted_rows(reply["rows"]), [(6, "Finn"), (15, "Otto")])


class TestBatchExecutorCounters(unittest.TestCase):

    def test_counts_executions_from_many_threads(self):
        catalog = load_catalog(FIXTURES / "catalog.json")
        with ReferenceBackend("duckdb") as backend:
            backend.load_tables(catalog, load_tables(FIXTURES / "employees", catalog))
            executor = BatchExecutor(GatewayConfig(), backend, catalog)
            with ThreadPoolExecutor(max_workers=8) as pool:
                replies = list(pool.map(lambda i: executor.individual(age_record(i, 30), None, None), range(200)))
        self.assertEqual(executor.counters.individual_executions, 200)
        self.assertTrue(all("error" not in r for r in replies))
        self.assertEqual({len(r["rows"]) for r in replies}, {9})


class TestGatewayServer(unittest.IsolatedAsyncioTestCase):

    async def asyncSetUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")
        self.backend = ReferenceBackend("duckdb")
        self.backend.load_tables(self.catalog, load_tables(FIXTURES / "employees", self.catalog))
        config = GatewayConfig(window_seconds=0.2, port=0)
        self.server = GatewayServer(config, self.backend, self.catalog)
        listener = await self.server.start()
        self.port = listener.sockets[0].getsockname()[1]

    async def asyncTearDown(self):
        await self.server.close()
        self.backend.close()

    async def test_replies_follow_request_order(self):
        reader, writer = await asyncio.open_connection("127.0.0.1", self.port)
        lines = [
            json.dumps({"id": 1, "sql": AGE_QUERY, "bindings": [50]}),
            "this is not json",
            json.dumps({"id": 2, "sql": AGE_QUERY, "bindings": [45]}),
        ]
        writer.write(("\n".join(lines) + "\n").encode("utf-8"))
        await writer.drain()
        replies = [json.loads(await asyncio.wait_for(reader.readline(), timeout=10)) for _ in lines]
        writer.close()
        await writer.wait_closed()

        self.assertEqual([r["id"] for r in replies], [1, None, 2])
        self.assertIn("malformed request", replies[1]["error"])
        self.assertEqual(replies[0]["batch_size"], 2)
        self.assertEqual(sorted_rows(replies[0]["rows"]), [(6, "Finn"), (15, "Otto")])
        self.assertEqual(sorted_rows(replies[2]["rows"]), [(6, "Finn"), (15, "Otto"), (19, "Sam")])


if __name__ == '__main__':
    unittest.main()
