import os
import unittest
from pathlib import Path

from sharedqaas.dq_core import (
    ARRAY,
    BITMASK,
    AnnotationKind,
    Group,
    OrderLimit,
    Scan,
    SharedPlanEvaluator,
    demux,
    evaluate_query,
    load_tables,
    output_kind,
    per_query,
    project,
    shared_group_by,
    shared_join,
    shared_order_limit,
    shared_scan,
    shared_select,
    unnest_query_set,
)
from sharedqaas.errors import EncodingError, QueryNotInBatchError
from sharedqaas.execution import ResultTable, comparator_router, demux_script, evaluate_script
from sharedqaas.plan_dag import build_shared_plan, split_dag
from sharedqaas.relational_ir import (
    Aggregate,
    Atom,
    BatchMember,
    ColumnRef,
    JoinEdge,
    OrderItem,
    PredicateNF,
    QueryBatch,
    load_catalog,
    parse_query,
)
from sharedqaas.workload import random_batch

FIXTURES = Path(__file__).parent / "fixtures"

ID = ColumnRef("employees", "id")
NAME = ColumnRef("employees", "name")
AGE = ColumnRef("employees", "age")
EMP_DEPT = ColumnRef("employees", "dept_id")
DEPT = ColumnRef("departments", "dept_id")
CITY = ColumnRef("departments", "city")
ADDRESS = ColumnRef("departments", "address")

# the four id predicates of the shared-scan example
ID_PREDICATES = {
    1: PredicateNF.of(Atom(ID, ">", (35,))),
    2: PredicateNF.of(Atom(ID, "BETWEEN", (10, 20))),
    3: PredicateNF.of(Atom(ID, "<", (51,))),
    4: PredicateNF.of(Atom(ID, "BETWEEN", (40, 50))),
}


def _row_for(relation, key, value):
    position = relation.index(key)
    return next(row for row in relation.rows if row[position] == value)


class TestFixtureTables(unittest.TestCase):

    def test_empty_cells_load_as_null(self):
        catalog = load_catalog(FIXTURES / "catalog.json")
        tables = load_tables(FIXTURES / "employees", catalog)
        self.assertEqual(len(tables["employees"]), 20)
        self.assertEqual(len(tables["departments"]), 4)
        sam = _row_for(tables["employees"], NAME, "Sam")
        self.assertIsNone(sam[tables["employees"].index(EMP_DEPT)])
        self.assertEqual(sam[tables["employees"].index(AGE)], 48)


class TestSharedOperators(unittest.TestCase):

    def setUp(self):
        catalog = load_catalog(FIXTURES / "catalog.json")
        self.tables = load_tables(FIXTURES / "employees", catalog)
        self.employees = self.tables["employees"]
        self.departments = self.tables["departments"]

    def test_shared_scan_array_encoding(self):
        scanned = shared_scan(self.employees, ID_PREDICATES)
        self.assertEqual(scanned.kind, AnnotationKind.SET)
        self.assertEqual(scanned.batch, frozenset({1, 2, 3, 4}))
        # every id is below 51, so no tuple is dropped
        self.assertEqual(len(scanned), 20)
        self.assertEqual(_row_for(scanned, ID, 5)[-1], (3,))
        self.assertEqual(_row_for(scanned, ID, 12)[-1], (2, 3))

    def test_shared_scan_bitmask_encoding(self):
        scanned = shared_scan(self.employees, ID_PREDICATES, BITMASK)
        self.assertEqual(_row_for(scanned, ID, 5)[-1], 0b100)
        self.assertEqual(_row_for(scanned, ID, 12)[-1], 0b110)
        self.assertEqual(BITMASK.decode(0b110), (2, 3))

    def test_bitmask_holds_at_most_64_queries(self):
        with self.assertRaises(EncodingError):
            BITMASK.encode([65])
        predicates = {q: PredicateNF.true() for q in range(1, 66)}
        with self.assertRaises(EncodingError):
            shared_scan(self.employees, predicates, BITMASK)
        # arrays have no such limit
        self.assertEqual(len(shared_scan(self.employees, predicates, ARRAY)), 20)

    def test_scan_drops_tuples_no_query_wants(self):
        predicates = {1: PredicateNF.of(Atom(AGE, "=", (30,))), 2: PredicateNF.false()}
        scanned = shared_scan(self.employees, predicates, columns=[ID, AGE])
        self.assertEqual(scanned.schema, (ID, AGE))
        self.assertEqual(len(scanned), 6)
        self.assertTrue(all(row[-1] == (1,) for row in scanned.rows))

    def test_shared_select_narrows_annotations(self):
        scanned = shared_scan(self.employees, ID_PREDICATES)
        selected = shared_select(scanned, {2: PredicateNF.of(Atom(AGE, "=", (30,))), 3: PredicateNF.true()})
        self.assertEqual(selected.batch, frozenset({2, 3}))
        # Jon (id 10, age 30) keeps query 2, Kim (id 11, age 45) only query 3
        self.assertEqual(_row_for(selected, ID, 10)[-1], (2, 3))
        self.assertEqual(_row_for(selected, ID, 11)[-1], (3,))

    def test_shared_join_intersects_query_sets(self):
        departments = shared_scan(self.departments, {
            1: PredicateNF.of(Atom(CITY, "=", ("Zurich",))),
            2: PredicateNF.of(Atom(ADDRESS, "=", ("Main St",))),
        })
        employees = shared_scan(self.employees, {
            1: PredicateNF.of(Atom(AGE, "=", (30,))),
            2: PredicateNF.of(Atom(NAME, "=", ("Ann",))),
        })
        joined = shared_join(departments, employees, [JoinEdge(DEPT, EMP_DEPT)])
        self.assertEqual(joined.kind, AnnotationKind.SET)
        first = demux(joined, 1)
        second = demux(joined, 2)
        self.assertEqual(sorted(row[first.index(NAME)] for row in first.rows), ["Max", "Tara"])
        self.assertEqual([row[second.index(NAME)] for row in second.rows], ["Ann"])

    def test_null_join_keys_never_match(self):
        everyone = {1: PredicateNF.true()}
        joined = shared_join(
            shared_scan(self.departments, everyone), shared_scan(self.employees, everyone), [JoinEdge(DEPT, EMP_DEPT)]
        )
        names = [row[joined.index(NAME)] for row in joined.rows]
        self.assertEqual(len(names), 19)
        self.assertNotIn("Sam", names)

    def test_join_of_atomic_and_set_inputs(self):
        departments = unnest_query_set(shared_scan(self.departments, {
            1: PredicateNF.of(Atom(CITY, "=", ("Zurich",))),
            2: PredicateNF.true(),
        }))
        employees = shared_scan(self.employees, {1: PredicateNF.true(), 2: PredicateNF.of(Atom(AGE, "=", (30,)))})
        joined = shared_join(departments, employees, [JoinEdge(DEPT, EMP_DEPT)])
        self.assertEqual(joined.kind, AnnotationKind.ATOMIC)
        # query 1: employees of departments 1 and 3; query 2: everyone aged 30 with a department
        self.assertEqual(len(demux(joined, 1)), 10)
        self.assertEqual(len(demux(joined, 2)), 6)

    def test_unnest_replicates_per_query(self):
        scanned = shared_scan(self.employees, ID_PREDICATES)
        unnested = unnest_query_set(scanned)
        self.assertEqual(unnested.kind, AnnotationKind.ATOMIC)
        # 11 tuples for query 2 plus 20 for query 3
        self.assertEqual(len(unnested), 31)

    def test_shared_group_by_partitions_by_query(self):
        scanned = shared_scan(self.employees, {
            1: PredicateNF.of(Atom(AGE, ">", (30,))),
            2: PredicateNF.of(Atom(AGE, "<", (25,))),
        }, columns=[ID, EMP_DEPT])
        grouped = shared_group_by(scanned, [EMP_DEPT], [("cnt", Aggregate("COUNT", ID))])
        self.assertEqual(grouped.kind, AnnotationKind.ATOMIC)
        counts = {(row[-1], row[0]): row[1] for row in grouped.rows}
        self.assertEqual(counts, {(1, 1): 3, (1, 2): 2, (1, 3): 3, (1, None): 1, (2, 4): 2})

    def test_order_limit_per_query(self):
        scanned = shared_scan(self.employees, {
            1: PredicateNF.of(Atom(AGE, "=", (30,))),
            2: PredicateNF.of(Atom(AGE, ">", (40,))),
        }, columns=[ID, AGE])
        # computed fields are keyed by name, so project before ordering
        projected = project(unnest_query_set(scanned), [("id", ID), ("age", AGE)])
        ranked = shared_order_limit(projected, [OrderItem("id", True)], {1: 2, 2: None})
        self.assertEqual(ranked.kind, AnnotationKind.ATOMIC)
        first = [row[0] for row in ranked.rows if row[-1] == 1]
        second = [row[0] for row in ranked.rows if row[-1] == 2]
        self.assertEqual(first, [20, 18])
        self.assertEqual(second, [19, 15, 11, 6, 3])

    def test_order_limit_needs_atomic_input(self):
        scan = Scan("employees", (ID,), per_query({1: PredicateNF.true()}))
        with self.assertRaises(ValueError):
            output_kind(OrderLimit(scan, (OrderItem("id"),), ((1, 1),)))
        with self.assertRaises(ValueError):
            shared_order_limit(shared_scan(self.employees, {1: PredicateNF.true()}), [], {1: 1})

    def test_demux_rejects_foreign_query(self):
        scanned = shared_scan(self.employees, ID_PREDICATES)
        with self.assertRaises(QueryNotInBatchError):
            demux(scanned, 9)

    def test_evaluator_runs_operator_trees(self):
        scan = Scan("employees", (ID, EMP_DEPT), per_query({
            1: PredicateNF.of(Atom(AGE, ">", (30,))),
            2: PredicateNF.of(Atom(AGE, "<", (25,))),
        }))
        plan = Group(scan, (EMP_DEPT,), (("cnt", Aggregate("COUNT", ID)),))
        for encoding in (ARRAY, BITMASK):
            evaluated = SharedPlanEvaluator(self.tables, encoding).evaluate(plan)
            self.assertEqual(sorted(row[1] for row in evaluated.rows if row[-1] == 2), [2])


class TestSharedPlansMatchReference(unittest.TestCase):
    """Shared plans evaluated in memory against each query evaluated on its own."""

    SEEDS = int(os.getenv("SHAREDQAAS_ORACLE_SEEDS", "1000"))

    def check_case(self, case, encoding, policy):
        dag = build_shared_plan(case.batch, case.catalog)
        script = split_dag(dag, policy)
        run = evaluate_script(script, case.tables, encoding)
        shared = demux_script(script, run.results)
        for _, q, member in dag.iter_members():
            expected = evaluate_query(member.spec, case.tables)
            expected = ResultTable(expected.column_names, expected.rows)
            score, reports = comparator_router(member.spec)(q, expected, shared[q])
            self.assertEqual(score, 1.0, msg=f"seed {case.seed} ({case.template}) query {q}: {reports}")

    def test_random_batches_array_encoding(self):
        for seed in range(self.SEEDS):
            self.check_case(random_batch(seed, max_rows=200), ARRAY, "heuristic")

    def test_random_batches_bitmask_encoding(self):
        for seed in range(self.SEEDS):
            self.check_case(random_batch(seed, max_rows=200), BITMASK, "heuristic")

    def test_fixture_queries_in_memory(self):
        catalog = load_catalog(FIXTURES / "catalog.json")
        tables = load_tables(FIXTURES / "employees", catalog)
        specs = [
            parse_query("SELECT dept_id, COUNT(id) AS cnt FROM employees WHERE age > 30 GROUP BY dept_id", catalog),
            parse_query("SELECT dept_id, COUNT(id) AS cnt FROM employees WHERE age < 25 GROUP BY dept_id", catalog),
        ]
        batch = QueryBatch(0, tuple(BatchMember(i + 1, s, i) for i, s in enumerate(specs)), "*")
        dag = build_shared_plan(batch, catalog)
        shared = demux_script(split_dag(dag), evaluate_script(split_dag(dag), tables).results)
        self.assertEqual(sorted(shared[2].rows), [(4, 2)])
        self.assertEqual(sorted(shared[1].rows, key=str), sorted([(1, 3), (2, 2), (3, 3), (None, 1)], key=str))


if __name__ == '__main__':
    unittest.main()
