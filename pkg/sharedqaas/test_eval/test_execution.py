import os
import unittest
from pathlib import Path

from sharedqaas.dq_core import BITMASK, AnnotationKind, load_tables
from sharedqaas.errors import AnnotationMissingError, BackendError
from sharedqaas.execution import (
    REFERENCE_DIALECTS,
    EquivalenceConfig,
    OrderedComparator,
    ReferenceBackend,
    ResultTable,
    comparator_router,
    corrupt_rewrite,
    demux_results,
    demux_script,
    equivalence_check,
    evaluate_script,
    first_multiset_difference,
    run_script,
)
from sharedqaas.plan_dag import build_global_plan, build_shared_plan, split_dag
from sharedqaas.relational_ir import group_batch, load_batch_file, load_catalog, parse_query, parse_records
from sharedqaas.sql_gen import RenderOptions
from sharedqaas.workload import WorkloadSpec, generate_queries, generate_tables, random_batch

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_batches(catalog, name="scan_queries.jsonl"):
    batches, _ = group_batch(parse_records(load_batch_file(FIXTURES / name), catalog), "global", max_size=8)
    return batches


class TestResultTables(unittest.TestCase):

    def test_annotation_is_recognized_from_last_column(self):
        table = ResultTable.from_rows(("a", "query_set"), [(1, [1, 2])])
        self.assertEqual(table.annotation, AnnotationKind.SET)
        self.assertEqual(table.rows, ((1, (1, 2)),))
        self.assertEqual(table.data_columns, ("a",))
        self.assertEqual(ResultTable.from_rows(("a", "query_id"), [(1, 2)]).annotation, AnnotationKind.ATOMIC)
        self.assertEqual(ResultTable.from_rows(("a",), [(1,)]).annotation, AnnotationKind.NONE)

    def test_annotation_column_must_be_last(self):
        with self.assertRaises(ValueError):
            ResultTable(("query_set", "a"), (), AnnotationKind.SET)

    def test_demux_keeps_every_query(self):
        shared = ResultTable.from_rows(("a", "query_set"), [(1, [1, 2]), (2, [2])])
        per_query = demux_results(shared, [1, 2, 3])
        self.assertEqual(per_query[1].rows, ((1,),))
        self.assertEqual(per_query[2].rows, ((1,), (2,)))
        self.assertEqual(per_query[3].rows, ())
        self.assertEqual(per_query[3].columns, ("a",))

    def test_demux_bitmask(self):
        shared = ResultTable.from_rows(("a", "query_set"), [(7, 5)], BITMASK)
        per_query = demux_results(shared, [1, 2, 3])
        self.assertEqual({q: len(t) for q, t in per_query.items()}, {1: 1, 2: 0, 3: 1})

    def test_demux_without_annotation(self):
        with self.assertRaises(AnnotationMissingError):
            demux_results(ResultTable(("a",), ((1,),)), [1])


class TestComparators(unittest.TestCase):

    def test_multiset_difference(self):
        self.assertIsNone(first_multiset_difference([(1,), (2,)], [(2,), (1,)]))
        self.assertEqual(first_multiset_difference([(1,), (1,), (2,)], [(1,), (2,)]), (1,))
        self.assertEqual(first_multiset_difference([(1,)], [(1,), (3,)]), (3,))
        # floats compare within tolerance
        self.assertIsNone(first_multiset_difference([(0.1 + 0.2, "x")], [(0.3, "x")]))

    def test_ordered_with_ties(self):
        expected = ResultTable(("k", "v"), ((1, "a"), (2, "b"), (2, "c"), (3, "d")))
        swapped = ResultTable(("k", "v"), ((1, "a"), (2, "c"), (2, "b"), (3, "d")))
        reordered = ResultTable(("k", "v"), ((2, "b"), (1, "a"), (2, "c"), (3, "d")))
        comparator = OrderedComparator((0,))
        self.assertEqual(comparator(1, expected, swapped)[0], 1.0)
        self.assertEqual(comparator(1, expected, reordered)[0], 0.0)

    def test_truncated_last_group(self):
        expected = ResultTable(("k", "v"), ((1, "a"), (3, "c")))
        other_tie = ResultTable(("k", "v"), ((1, "a"), (3, "z")))
        self.assertEqual(OrderedComparator((0,), truncated=True)(1, expected, other_tie)[0], 1.0)
        score, report = OrderedComparator((0,))(1, expected, other_tie)
        self.assertEqual(score, 0.0)
        self.assertEqual(report["first_difference"], (3, "c"))

    def test_router(self):
        catalog = load_catalog(FIXTURES / "catalog.json")
        expected = ResultTable(("id",), ((1,), (3,)))
        # any two rows satisfy a LIMIT without ORDER BY
        limited = comparator_router(parse_query("SELECT id FROM employees WHERE age > 30 LIMIT 2", catalog))
        self.assertEqual(limited(1, expected, ResultTable(("id",), ((5,), (6,))))[0], 1.0)
        self.assertEqual(limited(1, expected, ResultTable(("id",), ((5,),)))[0], 0.0)
        plain = comparator_router(parse_query("SELECT id FROM employees WHERE age > 30", catalog))
        score, reports = plain(1, expected, ResultTable(("name",), ((1,), (3,))))
        self.assertEqual(score, 0.0)
        self.assertEqual([r["comparator"] for r in reports], ["columns", "multiset"])


class TestReferenceBackend(unittest.TestCase):

    def setUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")
        self.tables = load_tables(FIXTURES / "employees", self.catalog)
        self.backend = ReferenceBackend("duckdb")
        self.backend.load_tables(self.catalog, self.tables)

    def tearDown(self):
        self.backend.close()

    def test_tables_are_loaded(self):
        result = self.backend.execute("SELECT COUNT(*) AS n FROM employees")
        self.assertEqual(result.columns, ("n",))
        self.assertEqual(result.rows, ((20,),))
        self.assertEqual(self.backend.execute("SELECT name FROM employees WHERE dept_id IS NULL").rows, (("Sam",),))

    def test_parameters(self):
        self.assertEqual(self.backend.execute("SELECT name FROM employees WHERE id = ?", [2]).rows, (("Ben",),))

    def test_failing_statement_carries_sql(self):
        with self.assertRaises(BackendError) as ctx:
            self.backend.execute("SELECT salary FROM employees")
        self.assertEqual(ctx.exception.sql, "SELECT salary FROM employees")

    def test_temp_tables(self):
        self.backend.create_temp("tmp_test", [("a", "INTEGER")], [(1,), (2,)])
        self.assertEqual(self.backend.execute("SELECT SUM(a) AS s FROM tmp_test").rows, ((3,),))
        self.backend.drop_temp("tmp_test")
        with self.assertRaises(BackendError):
            self.backend.execute("SELECT * FROM tmp_test")

    def test_only_reference_dialects(self):
        with self.assertRaises(ValueError):
            ReferenceBackend("presto")

    def test_script_matches_in_memory_evaluation(self):
        script = split_dag(build_shared_plan(fixture_batches(self.catalog)[0], self.catalog))
        on_backend = demux_script(script, run_script(script, self.backend, RenderOptions(catalog=self.catalog)).results)
        in_memory = demux_script(script, evaluate_script(script, self.tables).results)
        self.assertEqual(sorted(on_backend), [1, 2, 3, 4])
        for q in on_backend:
            self.assertIsNone(first_multiset_difference(in_memory[q].rows, on_backend[q].rows), msg=f"query {q}")
        self.assertEqual(len(on_backend[3]), 20)
        self.assertEqual(len(on_backend[4]), 0)


class TestEquivalenceCheck(unittest.TestCase):

    def setUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")
        self.tables = load_tables(FIXTURES / "employees", self.catalog)

    def check(self, dialect, config=None, name="scan_queries.jsonl"):
        with ReferenceBackend(dialect) as backend:
            backend.load_tables(self.catalog, self.tables)
            return equivalence_check(fixture_batches(self.catalog, name), backend, self.catalog, config)

    def test_fixture_batches(self):
        for dialect in REFERENCE_DIALECTS:
            for mode in ("linear", "indexed"):
                report = self.check(dialect, EquivalenceConfig(mode=mode))
                self.assertTrue(report.passed, msg=f"{dialect}/{mode}: {report.mismatches}")
                self.assertEqual(len(report.points), 4)

    def test_join_batch(self):
        report = self.check("duckdb", name="join_queries.jsonl")
        self.assertTrue(report.passed, msg=str(report.mismatches))
        self.assertEqual(report.summary(), "2/2 queries equal")

    def test_without_prefilter(self):
        report = self.check("duckdb-bitmask", EquivalenceConfig(prefilter=False, early_unnest=True))
        self.assertTrue(report.passed, msg=str(report.mismatches))

    def test_corrupted_rewrite_is_reported(self):
        with self.assertLogs("sharedqaas.execution.equivalence", level="WARNING"):
            report = self.check("duckdb", EquivalenceConfig(rewrite_hook=corrupt_rewrite))
        self.assertFalse(report.passed)
        frame = report.to_frame()
        self.assertEqual(len(frame), 4)
        # queries 1 and 4 select no employee, so an emptied result still matches them
        self.assertEqual(sorted(frame.loc[~frame["matched"], "source_id"]), [2, 3])


class TestGlobalPlanOnBackend(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        spec = WorkloadSpec(scale_factor=0.0002, templates=("q3", "q10", "q6"), instances=3)
        cls.catalog, cls.tables = generate_tables(spec)
        cls.batches, _ = group_batch(parse_records(generate_queries(spec), cls.catalog), "per-template", max_size=3)

    def test_every_split_policy(self):
        with ReferenceBackend("duckdb") as backend:
            backend.load_tables(self.catalog, self.tables)
            for policy in ("always-duplicate", "always-materialize", "heuristic"):
                report = equivalence_check(self.batches, backend, self.catalog, EquivalenceConfig(policy=policy))
                self.assertTrue(report.passed, msg=f"{policy}: {report.mismatches}")
                self.assertEqual(len(report.points), 9)
                for columns in report.run.temp_columns.values():
                    self.assertNotIn("query_set", columns)
                    self.assertNotIn("query_id", columns)
                if policy == "always-materialize":
                    self.assertEqual(len(report.run.temp_columns), 1)
                    self.assertGreater(report.run.materialization_seconds, 0)
                if policy == "always-duplicate":
                    self.assertEqual(report.run.temp_columns, {})

    def test_default_desk_workload(self):
        spec = WorkloadSpec(instances=32)
        catalog, tables = generate_tables(spec)
        batches, _ = group_batch(parse_records(generate_queries(spec), catalog), "per-template", max_size=32)
        self.assertEqual(len(batches), 5)
        with ReferenceBackend("duckdb") as backend:
            backend.load_tables(catalog, tables)
            for policy in ("heuristic", "always-duplicate", "always-materialize"):
                report = equivalence_check(batches, backend, catalog, EquivalenceConfig(policy=policy))
                self.assertEqual(len(report.points), 160)
                self.assertTrue(report.passed, msg=f"{policy}: {report.mismatches[:3]}")
                for columns in report.run.temp_columns.values():
                    self.assertFalse({"query_set", "query_id"} & set(columns), msg=policy)

    def test_temp_tables_are_dropped(self):
        with ReferenceBackend("duckdb") as backend:
            backend.load_tables(self.catalog, self.tables)
            report = equivalence_check(
                self.batches, backend, self.catalog, EquivalenceConfig(policy="always-materialize"),
            )
            (name,) = report.run.temp_columns
            with self.assertRaises(BackendError):
                backend.execute(f"SELECT * FROM {name}")


class TestSharedExecutionMatchesReference(unittest.TestCase):
    """Random batches: shared statements against each query on its own, on the same engine."""

    SEEDS = int(os.getenv("SHAREDQAAS_ORACLE_SEEDS", "1000"))

    @classmethod
    def setUpClass(cls):
        cls.backends = {dialect: ReferenceBackend(dialect) for dialect in REFERENCE_DIALECTS}

    @classmethod
    def tearDownClass(cls):
        for backend in cls.backends.values():
            backend.close()

    def check_seeds(self, dialect):
        backend = self.backends[dialect]
        for seed in range(self.SEEDS):
            case = random_batch(seed, max_rows=200)
            backend.load_tables(case.catalog, case.tables)
            config = EquivalenceConfig(mode="indexed" if seed % 3 == 0 else "linear", prefilter=seed % 5 != 0)
            report = equivalence_check(case.batch, backend, case.catalog, config)
            self.assertTrue(
                report.passed,
                msg=f"seed {seed} ({case.template}, {config.mode}): {report.mismatches} in {case.sql}",
            )

    def test_array_dialect(self):
        with self.assertNoLogs("sharedqaas.execution.equivalence", level="WARNING"):
            self.check_seeds("duckdb")

    def test_bitmask_dialect(self):
        self.check_seeds("duckdb-bitmask")


class TestBackendMatchesInMemoryScripts(unittest.TestCase):
    """Random two-template plans: every split script on the engine against the in-memory evaluator."""

    SEEDS = int(os.getenv("SHAREDQAAS_SCRIPT_SEEDS", "100"))
    # order-limit is left out: ties may be cut differently by the two sides
    TEMPLATE_PAIRS = (("join", "join-group"), ("scan", "scalar"), ("group", "join"))
    POLICIES = ("heuristic", "always-duplicate", "always-materialize")

    @classmethod
    def setUpClass(cls):
        cls.backends = {dialect: ReferenceBackend(dialect) for dialect in REFERENCE_DIALECTS}

    @classmethod
    def tearDownClass(cls):
        for backend in cls.backends.values():
            backend.close()

    def check_seeds(self, dialect):
        backend = self.backends[dialect]
        materialized = 0
        for seed in range(self.SEEDS):
            first, second = self.TEMPLATE_PAIRS[seed % len(self.TEMPLATE_PAIRS)]
            # the same seed with a fixed template draws the same tables
            a = random_batch(seed, first, max_rows=200)
            b = random_batch(seed, second, max_rows=200, batch_id=1)
            self.assertEqual(a.tables["r"].rows, b.tables["r"].rows)
            backend.load_tables(a.catalog, a.tables)
            dag = build_global_plan([a.batch, b.batch], a.catalog)
            for policy in self.POLICIES:
                script = split_dag(dag, policy, dialect=dialect)
                materialized += len(script.temp_tables)
                msg = f"seed {seed} ({first}+{second}, {policy}, {dialect})"
                run = run_script(script, backend, RenderOptions(catalog=a.catalog))
                on_backend = demux_script(script, run.results)
                in_memory = demux_script(script, evaluate_script(script, a.tables, backend.encoding).results)
                self.assertEqual(sorted(on_backend), list(range(1, a.batch.size + b.batch.size + 1)), msg=msg)
                for q, expected in in_memory.items():
                    difference = first_multiset_difference(expected.rows, on_backend[q].rows)
                    self.assertIsNone(difference, msg=f"{msg}, query {q}: {difference}")
        if self.SEEDS >= len(self.TEMPLATE_PAIRS):
            self.assertGreater(materialized, 0)

    def test_array_dialect(self):
        self.check_seeds("duckdb")

    def test_bitmask_dialect(self):
        self.check_seeds("duckdb-bitmask")


if __name__ == '__main__':
    unittest.main()
