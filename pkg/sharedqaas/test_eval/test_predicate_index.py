import os
import random
import unittest
from pathlib import Path

import numpy as np

from sharedqaas.dq_core import scans
from sharedqaas.errors import MissingAttributeError, NoIndexableIntervalsError
from sharedqaas.plan_dag import build_shared_plan
from sharedqaas.predicate_index import (
    LinearFallback,
    build_index_tree,
    depth_bound,
    dump_tree,
    eval_linear_matrix,
    eval_tree,
    eval_tree_matrix,
    max_comparisons,
    next_prefix,
    to_intervals,
    tree_stats,
)
from sharedqaas.relational_ir import Atom, ColumnRef, PredicateNF, group_batch, load_batch_file, load_catalog, parse_records

FIXTURES = Path(__file__).parent / "fixtures"

ID = ColumnRef("employees", "id")
A = ColumnRef("t", "a")
B = ColumnRef("t", "b")
C = ColumnRef("t", "c")

WORDS = sorted((
    "acorn", "almond", "apple", "apricot", "banana", "basil", "berry", "cherry", "chive", "citron",
    "date", "dill", "fennel", "fig", "grape", "guava", "kiwi", "lemon", "lime", "mango",
))


def scan_predicates():
    catalog = load_catalog(FIXTURES / "catalog.json")
    records = parse_records(load_batch_file(FIXTURES / "scan_queries.jsonl"), catalog)
    batches, _ = group_batch(records, "global", max_size=8)
    scan = scans(build_shared_plan(batches[0], catalog).sinks[0].root)[0]
    return scan.predicate_map


def domain_columns():
    """Every point of a 25 x 20 x 20 domain, 10^4 rows."""
    a, b, c = np.meshgrid(np.arange(25), np.arange(20), np.arange(len(WORDS)), indexing="ij")
    words = np.array(WORDS, dtype=object)
    columns = {A: a.ravel(), B: b.ravel(), C: words[c.ravel()]}
    return columns, a.size


def random_atom(rng):
    match rng.choice(("a", "a", "b", "b", "c")):
        case "a":
            op = rng.choice(("=", "<", "<=", ">", ">=", "BETWEEN", "IN"))
            column, high = A, 24
        case "b":
            op = rng.choice(("=", "<", "<=", ">", ">=", "BETWEEN", "IN"))
            column, high = B, 19
        case _:
            op = rng.choice(("=", "<", ">=", "BETWEEN", "IN", "LIKE", "LIKE", "LIKE"))
            if op == "LIKE":
                word = rng.choice(WORDS)
                pattern = rng.choice((word[:1] + "%", word[:2] + "%", word[:1] + "_%", "%" + word[-2:]))
                return Atom(C, "LIKE", (pattern,))
            if op == "BETWEEN":
                return Atom(C, op, tuple(sorted(rng.sample(WORDS, 2))))
            if op == "IN":
                return Atom(C, op, tuple(rng.sample(WORDS, rng.randint(1, 3))))
            return Atom(C, op, (rng.choice(WORDS),))
    if op == "BETWEEN":
        lo = rng.randint(0, high)
        return Atom(column, op, (lo, rng.randint(lo, high)))
    if op == "IN":
        return Atom(column, op, tuple(rng.sample(range(high + 1), rng.randint(1, 3))))
    return Atom(column, op, (rng.randint(0, high),))


def random_workload(rng, n_queries):
    preds = {}
    for q in range(1, n_queries + 1):
        disjuncts = []
        for _ in range(rng.randint(1, 2)):
            atoms = [random_atom(rng) for _ in range(rng.randint(1, 3))]
            disjuncts.append(tuple(atoms))
        preds[q] = PredicateNF(tuple(disjuncts))
    # at least one atom on a numeric attribute keeps the workload indexable
    preds[1] = preds[1].conjoin(PredicateNF.of(Atom(A, ">=", (rng.randint(0, 24),))))
    return preds


class TestGoldenIndexTree(unittest.TestCase):

    def setUp(self):
        self.preds = scan_predicates()
        intervals, self.report = to_intervals(self.preds)
        self.tree = build_index_tree(intervals)

    def test_dump_matches_golden(self):
        with open(FIXTURES / "index_tree.txt") as f:
            expected = f.read().strip()
        self.assertEqual(dump_tree(self.tree), expected)

    def test_point_lookups(self):
        expected = {5: {3}, 15: {2, 3}, 37: {1, 3}, 45: {1, 3, 4}, 55: {1}}
        for value, queries in expected.items():
            self.assertEqual(eval_tree(self.tree, {ID: value}), frozenset(queries), msg=f"id={value}")

    def test_bounds_are_tight(self):
        # closed and open bounds on the same constant route differently
        self.assertEqual(eval_tree(self.tree, {ID: 35}), frozenset({3}))
        self.assertEqual(eval_tree(self.tree, {ID: 36}), frozenset({1, 3}))
        self.assertEqual(eval_tree(self.tree, {ID: 50}), frozenset({1, 3, 4}))
        self.assertEqual(eval_tree(self.tree, {ID: 51}), frozenset({1}))

    def test_stats(self):
        stats = tree_stats(self.tree, "presto")
        self.assertEqual(stats.max_comparisons, 3)
        self.assertEqual(stats.node_count, 13)
        self.assertGreater(stats.sql_bytes, 0)
        self.assertEqual(self.report.attribute_order, (ID,))
        self.assertTrue(all(not atoms for atoms in self.report.non_indexable.values()))

    def test_missing_attribute(self):
        with self.assertRaises(MissingAttributeError):
            eval_tree(self.tree, {})
        with self.assertRaises(MissingAttributeError):
            eval_tree(self.tree, {ID: None})


class TestIntervals(unittest.TestCase):

    def test_like_prefix_is_exact(self):
        intervals, report = to_intervals({1: PredicateNF.of(Atom(C, "LIKE", ("ap%",)))})
        self.assertEqual(intervals.terms[0].residual, ())
        self.assertEqual(len(report.indexable[1]), 1)
        tree = build_index_tree(intervals)
        self.assertEqual(eval_tree(tree, {C: "apple"}), frozenset({1}))
        self.assertEqual(eval_tree(tree, {C: "aq"}), frozenset())

    def test_like_with_single_wildcard_keeps_residual(self):
        atom = Atom(C, "LIKE", ("a_%",))
        intervals, _ = to_intervals({1: PredicateNF.of(atom)})
        self.assertEqual(intervals.terms[0].residual, (atom,))
        tree = build_index_tree(intervals)
        self.assertIn("CHECK [1]", dump_tree(tree))
        self.assertEqual(eval_tree(tree, {C: "apple"}), frozenset({1}))
        # inside the prefix range but too short for the pattern
        self.assertEqual(eval_tree(tree, {C: "a"}), frozenset())

    def test_leading_wildcard_is_not_indexable(self):
        atom = Atom(C, "LIKE", ("%an",))
        intervals, report = to_intervals({1: PredicateNF.of(atom)})
        self.assertEqual(report.non_indexable[1], (atom,))
        with self.assertRaises(NoIndexableIntervalsError):
            build_index_tree(intervals)

    def test_mixed_terms_fall_back_per_leaf(self):
        preds = {
            1: PredicateNF.of(Atom(A, "<", (10,)), Atom(C, "LIKE", ("%an",))),
            2: PredicateNF.of(Atom(A, ">=", (5,))),
        }
        tree = build_index_tree(to_intervals(preds)[0])
        self.assertEqual(eval_tree(tree, {A: 7, C: "pecan"}), frozenset({1, 2}))
        self.assertEqual(eval_tree(tree, {A: 7, C: "fig"}), frozenset({2}))
        self.assertEqual(eval_tree(tree, {A: 2, C: "fig"}), frozenset())
        self.assertTrue(any(isinstance(leaf, LinearFallback) for leaf in (tree.left, tree.right)))

    def test_in_list_expands_into_points(self):
        intervals, _ = to_intervals({1: PredicateNF.of(Atom(A, "IN", (3, 9, 3)))})
        self.assertEqual(len(intervals.terms), 2)
        tree = build_index_tree(intervals)
        self.assertEqual([eval_tree(tree, {A: v}) for v in (2, 3, 4, 9)], [frozenset(), {1}, frozenset(), {1}])

    def test_contradictory_term_is_dropped(self):
        preds = {1: PredicateNF.of(Atom(A, ">", (10,)), Atom(A, "<", (5,))), 2: PredicateNF.of(Atom(A, "=", (1,)))}
        intervals, _ = to_intervals(preds)
        self.assertEqual([t.query for t in intervals.terms], [2])

    def test_max_attributes_moves_atoms_to_residuals(self):
        preds = {1: PredicateNF.of(Atom(A, "<", (10,)), Atom(B, "=", (3,)), Atom(B, "<", (9,)))}
        intervals, report = to_intervals(preds, max_attributes=1)
        self.assertEqual(report.attribute_order[0], B)
        self.assertEqual(set(intervals.intervals), {B})
        self.assertEqual(intervals.terms[0].residual, (Atom(A, "<", (10,)),))

    def test_next_prefix(self):
        self.assertEqual(next_prefix("ap"), "aq")
        self.assertIsNone(next_prefix(""))


class TestTreeMatchesLinearEvaluation(unittest.TestCase):
    """Exhaustive comparison over every point of a small domain."""

    WORKLOADS = int(os.getenv("SHAREDQAAS_INDEX_WORKLOADS", "200"))

    def setUp(self):
        self.columns, self.n_rows = domain_columns()

    def test_random_workloads(self):
        for seed in range(self.WORKLOADS):
            rng = random.Random(seed)
            preds = random_workload(rng, 128 if seed % 25 == 0 else rng.randint(1, 16))
            max_attributes = rng.choice((None, None, 1, 2))
            intervals, _ = to_intervals(preds, max_attributes=max_attributes)
            tree = build_index_tree(intervals)
            linear = eval_linear_matrix(preds, self.columns, self.n_rows)
            indexed = eval_tree_matrix(tree, self.columns, self.n_rows, sorted(preds))
            for q in preds:
                mismatches = np.flatnonzero(linear[q] != indexed[q])
                self.assertEqual(
                    mismatches.size, 0,
                    msg=f"seed {seed}, query {q}, first differing row {mismatches[:1]}: {preds[q]}",
                )

    def test_row_lookups_agree_with_matrix(self):
        rng = random.Random(7)
        preds = random_workload(rng, 12)
        tree = build_index_tree(to_intervals(preds)[0])
        indexed = eval_tree_matrix(tree, self.columns, self.n_rows, sorted(preds))
        for row in rng.sample(range(self.n_rows), 200):
            point = {attribute: values[row] for attribute, values in self.columns.items()}
            expected = frozenset(q for q in preds if indexed[q][row])
            self.assertEqual(eval_tree(tree, point), expected, msg=f"row {row}")


class TestDepthBound(unittest.TestCase):

    def test_bound_values(self):
        self.assertEqual([depth_bound(m) for m in (0, 1, 2, 3, 4, 5, 128)], [0, 1, 2, 3, 3, 4, 8])

    def test_bounds_are_counted_as_cuts(self):
        intervals, _ = to_intervals({1: PredicateNF.of(Atom(A, "=", (5,)))})
        # one value, two cuts: below 5 and just after 5
        self.assertEqual(len(intervals.distinct_cuts(A)), 2)
        tree = build_index_tree(intervals)
        self.assertEqual(max_comparisons(tree), 2)
        self.assertEqual(depth_bound(2), 2)

    def test_single_attribute_trees_stay_within_bound(self):
        rng = random.Random(3)
        for n_queries in (1, 2, 3, 8, 33, 100, 128):
            preds = {}
            for q in range(1, n_queries + 1):
                op = rng.choice(("<", "<=", ">", ">=", "=", "BETWEEN"))
                if op == "BETWEEN":
                    lo = rng.randint(0, 10_000)
                    preds[q] = PredicateNF.of(Atom(A, op, (lo, lo + rng.randint(0, 500))))
                else:
                    preds[q] = PredicateNF.of(Atom(A, op, (rng.randint(0, 10_000),)))
            intervals, _ = to_intervals(preds)
            m = len(intervals.distinct_cuts(A))
            tree = build_index_tree(intervals)
            self.assertLessEqual(max_comparisons(tree), depth_bound(m), msg=f"{n_queries} queries, {m} bounds")


if __name__ == '__main__':
    unittest.main()
