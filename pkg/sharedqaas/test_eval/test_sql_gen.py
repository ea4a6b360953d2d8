import json
import os
import tempfile
import unittest
from pathlib import Path

from sharedqaas.dq_core import AnnotationKind, Scan, per_query, scans
from sharedqaas.errors import EncodingError, QueryTooLargeError, UnsupportedDialectFeatureError
from sharedqaas.plan_dag import build_shared_plan
from sharedqaas.predicate_index import build_index_tree, to_intervals
from sharedqaas.relational_ir import (
    Atom,
    BatchMember,
    ColumnRef,
    PredicateNF,
    QueryBatch,
    group_batch,
    load_batch_file,
    load_catalog,
    parse_query,
    parse_records,
)
from sharedqaas.sql_gen import (
    RenderOptions,
    builtin_dialects,
    gen_order_limit_sql,
    gen_shared_group_sql,
    gen_shared_join_sql,
    gen_shared_scan_sql,
    get_dialect,
    load_dialects,
    render_index_tree,
    render_plan,
)
from sharedqaas.workload import WorkloadSpec, desk_catalog, generate_queries

FIXTURES = Path(__file__).parent / "fixtures"


def squash(sql):
    """Whitespace-free form, so goldens may be laid out for reading."""
    return "".join(sql.strip().rstrip(";").split())


def golden(name):
    with open(FIXTURES / name) as f:
        return squash(f.read())


def plan_for(sqls, catalog):
    batch = QueryBatch(0, tuple(BatchMember(i + 1, parse_query(s, catalog), i) for i, s in enumerate(sqls)), "*")
    return build_shared_plan(batch, catalog)


def fixture_plan(name, catalog):
    records = parse_records(load_batch_file(FIXTURES / name), catalog)
    batches, _ = group_batch(records, "global", max_size=8)
    return build_shared_plan(batches[0], catalog)


class TestGoldenRenderings(unittest.TestCase):

    def setUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")

    def test_linear_shared_scan(self):
        scan = scans(fixture_plan("scan_queries.jsonl", self.catalog).sinks[0].root)[0]
        rendered = gen_shared_scan_sql(scan, "linear", "presto", self.catalog)
        self.assertEqual(squash(rendered.sql), golden("linear_scan.sql"))
        self.assertEqual(rendered.annotation, AnnotationKind.SET)
        self.assertEqual(rendered.annotation_type, "ARRAY(INTEGER)")
        self.assertEqual(rendered.output_columns, ("id", "name", "age", "dept_id", "query_set"))

    def test_shared_join(self):
        join = fixture_plan("join_queries.jsonl", self.catalog).sinks[0].root.input
        rendered = gen_shared_join_sql(join, "presto")
        self.assertEqual(squash(rendered.sql), golden("shared_join.sql"))
        self.assertEqual(rendered.columns[0], "departments_dept_id")
        self.assertEqual(rendered.columns[-1], "employees_dept_id")

    def test_shared_group(self):
        dag = plan_for([
            "SELECT dept_id, COUNT(id) AS cnt FROM employees WHERE age > 30 GROUP BY dept_id",
            "SELECT dept_id, COUNT(id) AS cnt FROM employees WHERE age < 25 GROUP BY dept_id",
        ], self.catalog)
        rendered = gen_shared_group_sql(dag.sinks[0].root.input, "presto")
        self.assertEqual(squash(rendered.sql), golden("shared_group.sql"))
        self.assertEqual(rendered.annotation, AnnotationKind.ATOMIC)
        self.assertEqual(rendered.annotation_type, "TINYINT")

    def test_index_tree(self):
        scan = scans(fixture_plan("scan_queries.jsonl", self.catalog).sinks[0].root)[0]
        tree = build_index_tree(to_intervals(scan.predicate_map)[0])
        sql = render_index_tree(tree, get_dialect("presto"), lambda c: c.column)
        self.assertEqual(squash(sql), golden("index_tree.sql"))

    def test_operator_kind_is_checked(self):
        dag = fixture_plan("join_queries.jsonl", self.catalog)
        scan = scans(dag.sinks[0].root)[0]
        with self.assertRaises(ValueError):
            gen_shared_join_sql(scan)
        with self.assertRaises(ValueError):
            gen_shared_group_sql(scan)
        with self.assertRaises(ValueError):
            gen_order_limit_sql(scan)


class TestScanRendering(unittest.TestCase):

    def setUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")
        self.scan = scans(fixture_plan("scan_queries.jsonl", self.catalog).sinks[0].root)[0]

    def test_single_query_scan_uses_a_constant_set(self):
        scan = Scan("employees", (ColumnRef("employees", "id"),), per_query({
            7: PredicateNF.of(Atom(ColumnRef("employees", "age"), "=", (30,))),
        }))
        rendered = gen_shared_scan_sql(scan, "linear", "presto")
        self.assertEqual(rendered.sql, "SELECT id, ARRAY[7] AS query_set FROM employees WHERE age = 30")

    def test_indexed_scan_embeds_the_tree(self):
        rendered = gen_shared_scan_sql(self.scan, "indexed", "presto", self.catalog)
        self.assertIn(golden("index_tree.sql"), squash(rendered.sql))
        # NULL ids are annotated by the per-query predicates
        self.assertIn("CASE WHEN id IS NULL THEN ARRAY_REMOVE(", rendered.sql)
        self.assertTrue(squash(rendered.sql).endswith(squash(
            "WHERE (id > 35) OR (id BETWEEN 10 AND 20) OR (id < 51) OR (id BETWEEN 40 AND 50)"
        )))

    def test_indexed_scan_without_intervals_falls_back_to_linear(self):
        scan = Scan("employees", (ColumnRef("employees", "id"),), per_query({
            1: PredicateNF.of(Atom(ColumnRef("employees", "name"), "LIKE", ("%a",))),
            2: PredicateNF.of(Atom(ColumnRef("employees", "name"), "LIKE", ("%o",))),
        }))
        with self.assertLogs("sharedqaas.sql_gen.render", level="WARNING"):
            rendered = gen_shared_scan_sql(scan, "indexed", "presto")
        self.assertIn("ARRAY_REMOVE(ARRAY[CASE WHEN name LIKE '%a' THEN 1 ELSE 0 END", rendered.sql)

    def test_without_prefilter_annotation_is_tested(self):
        rendered = gen_shared_scan_sql(self.scan, "linear", "presto", self.catalog, prefilter=False)
        self.assertTrue(rendered.sql.startswith("SELECT * FROM (SELECT *, ARRAY_REMOVE("))
        self.assertTrue(rendered.sql.endswith("AS annotated WHERE CARDINALITY(query_set) > 0"))

    def test_bitmask_arms_are_or_reduced(self):
        rendered = gen_shared_scan_sql(self.scan, "linear", "presto-bitmask", self.catalog)
        self.assertIn(
            "REDUCE(ARRAY[CASE WHEN id > 35 THEN BIGINT '1' ELSE BIGINT '0' END, "
            "CASE WHEN id BETWEEN 10 AND 20 THEN BIGINT '2' ELSE BIGINT '0' END, ",
            rendered.sql,
        )
        self.assertIn(
            "CASE WHEN id BETWEEN 40 AND 50 THEN BIGINT '8' ELSE BIGINT '0' END], "
            "BIGINT '0', (s, x) -> BITWISE_OR(s, x), s -> s) AS query_set",
            rendered.sql,
        )
        self.assertEqual(rendered.annotation_type, "BIGINT")

    def test_duckdb_list_functions(self):
        rendered = gen_shared_scan_sql(self.scan, "linear", "duckdb", self.catalog)
        self.assertIn("list_filter([CASE WHEN id > 35 THEN 1 ELSE 0 END", rendered.sql)
        self.assertIn("x -> x <> 0) AS query_set", rendered.sql)


class TestLimits(unittest.TestCase):

    def setUp(self):
        self.catalog = load_catalog(FIXTURES / "catalog.json")

    def test_statement_over_the_size_limit(self):
        scan = scans(fixture_plan("scan_queries.jsonl", self.catalog).sinks[0].root)[0]
        tight = get_dialect("presto").model_copy(update={"max_query_bytes": 100})
        with self.assertRaises(QueryTooLargeError) as ctx:
            gen_shared_scan_sql(scan, "linear", tight)
        self.assertEqual(ctx.exception.limit, 100)
        self.assertGreater(ctx.exception.measured_bytes, 100)

    def test_bitmask_holds_64_queries(self):
        age = ColumnRef("employees", "age")
        predicates = {q: PredicateNF.of(Atom(age, "=", (q,))) for q in range(1, 66)}
        scan = Scan("employees", (ColumnRef("employees", "id"),), per_query(predicates))
        with self.assertRaises(EncodingError):
            gen_shared_scan_sql(scan, "linear", "presto-bitmask")
        # arrays carry any number of ids
        self.assertGreater(gen_shared_scan_sql(scan, "linear", "presto").byte_length, 0)

    def test_bitmask_of_64_queries_stays_in_bigint_range(self):
        age = ColumnRef("employees", "age")
        predicates = {q: PredicateNF.of(Atom(age, "=", (q,))) for q in range(1, 65)}
        scan = Scan("employees", (ColumnRef("employees", "id"),), per_query(predicates))
        rendered = gen_shared_scan_sql(scan, "linear", "presto-bitmask")
        self.assertIn(golden("bitmask_64_annotation.sql"), squash(rendered.sql))
        self.assertNotIn("9223372036854775808'", rendered.sql.replace("-9223372036854775808'", ""))

    def test_per_query_limits_need_window_functions(self):
        dag = plan_for([
            "SELECT id, age FROM employees WHERE age > 30 ORDER BY age DESC LIMIT 2",
            "SELECT id, age FROM employees WHERE age < 30 ORDER BY age DESC LIMIT 3",
        ], self.catalog)
        root = dag.sinks[0].root
        rendered = gen_order_limit_sql(root, "presto")
        self.assertIn("ROW_NUMBER() OVER (PARTITION BY query_id ORDER BY age DESC NULLS LAST)", rendered.sql)
        self.assertIn("(query_id = 1 AND rn <= 2) OR (query_id = 2 AND rn <= 3)", rendered.sql)
        no_windows = get_dialect("presto").model_copy(update={"supports_window": False})
        with self.assertRaises(UnsupportedDialectFeatureError):
            gen_order_limit_sql(root, no_windows)

    def test_128_q6_instances_fit(self):
        spec = WorkloadSpec(templates=("q6",), instances=128)
        catalog = desk_catalog(spec)
        batches, _ = group_batch(parse_records(generate_queries(spec), catalog), "per-template", max_size=128)
        self.assertEqual([b.size for b in batches], [128])
        root = build_shared_plan(batches[0], catalog).sinks[0].root
        for mode in ("linear", "indexed"):
            rendered = render_plan(root, "presto", RenderOptions(mode=mode))
            self.assertLess(rendered.byte_length, get_dialect("presto").max_query_bytes, msg=mode)


class TestDialects(unittest.TestCase):

    def test_builtin_profiles(self):
        profiles = builtin_dialects()
        self.assertEqual(set(profiles), {"presto", "presto-bitmask", "standard", "duckdb", "duckdb-bitmask"})
        self.assertFalse(profiles["standard"].supports_materialized_readback)
        self.assertTrue(all(p.max_query_bytes == 262144 for p in profiles.values()))

    def test_unknown_dialect(self):
        with self.assertRaises(ValueError):
            get_dialect("oracle")

    def test_set_literals(self):
        self.assertEqual(get_dialect("presto").set_sql([3, 1]), "ARRAY[1, 3]")
        self.assertEqual(get_dialect("presto-bitmask").set_sql([3, 1]), "BIGINT '5'")
        self.assertEqual(get_dialect("presto-bitmask").member_sql(64), "BIGINT '-9223372036854775808'")
        self.assertEqual(get_dialect("presto-bitmask").set_sql(range(1, 65)), "BIGINT '-1'")
        self.assertEqual(get_dialect("presto-bitmask").set_sql([63]), "BIGINT '4611686018427387904'")
        self.assertEqual(get_dialect("duckdb-bitmask").member_sql(64), "CAST(9223372036854775808 AS UBIGINT)")
        self.assertEqual(get_dialect("duckdb").set_sql([]), "CAST([] AS INTEGER[])")

    def test_load_dialects_from_file(self):
        profile = get_dialect("presto").model_dump(exclude={"name"})
        profile["max_query_bytes"] = 1024
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "dialects.json")
            with open(path, "w") as f:
                json.dump({"athena": profile}, f)
            profiles = load_dialects(path)
        self.assertEqual(profiles["athena"].name, "athena")
        self.assertEqual(profiles["athena"].max_query_bytes, 1024)


if __name__ == '__main__':
    unittest.main()
