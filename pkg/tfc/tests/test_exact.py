from __future__ import annotations

import itertools

import numpy as np
from django.test import SimpleTestCase, override_settings

from tfc.exceptions import BudgetExceeded, InstanceError
from tfc.services.baselines import partial_objective
from tfc.services.exact import SearchNode, solve_exact, solve_exhaustive
from tfc.services.model import Instance, evaluate_F, feasible
from tfc.tests.factories import brute_force_optimum, greedy_counterexample, random_instance


class SolveExactTests(SimpleTestCase):
    def test_greedy_counterexample_optimum(self):
        inst = greedy_counterexample(W=100.0, eps=0.1)
        result = solve_exact(inst)
        self.assertAlmostEqual(result.value, 100.1)
        self.assertEqual(result.assignment.as_mapping(inst), {"u": "t2", "v": "t2", "z": "t1"})
        self.assertEqual(result.method, "branch_and_bound")

    def test_no_preferences_no_conflicts(self):
        inst = Instance.build(["a", "b", "c"], ["t1", "t2"], {"t1": 2, "t2": 2}, [], {}, lam=0.0)
        result = solve_exact(inst)
        self.assertEqual(result.value, 0.0)
        # every assignment ties; the lexicographically smallest feasible one wins
        np.testing.assert_array_equal(result.assignment.labels, [0, 0, 1])

    def test_branch_and_bound_matches_enumeration(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            inst = random_instance(rng, 7, 3)
            bnb = solve_exact(inst)
            enum = solve_exhaustive(inst)
            self.assertTrue(feasible(inst, bnb.assignment))
            self.assertAlmostEqual(bnb.value, enum.value, places=9)
            self.assertAlmostEqual(evaluate_F(inst, bnb.assignment).total, bnb.value, places=9)

    def test_small_instances_against_naive_oracle(self):
        rng = np.random.default_rng(24)
        for _ in range(30):
            inst = random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(1, 4)))
            self.assertAlmostEqual(solve_exact(inst).value, brute_force_optimum(inst), places=9)

    def test_budget_falls_back_to_enumeration(self):
        inst = random_instance(np.random.default_rng(25), 6, 3)
        result = solve_exact(inst, budget=2)
        self.assertEqual(result.method, "enumeration")
        self.assertAlmostEqual(result.value, brute_force_optimum(inst), places=9)

    @override_settings(TFC_ENUMERATION_LIMIT=10)
    def test_budget_exceeded_carries_certified_gap(self):
        inst = random_instance(np.random.default_rng(26), 7, 3)
        optimum = solve_exhaustive(inst, limit=10**6).value
        with self.assertRaises(BudgetExceeded) as ctx:
            solve_exact(inst, budget=3)
        exc = ctx.exception
        self.assertTrue(feasible(inst, exc.incumbent))
        self.assertAlmostEqual(evaluate_F(inst, exc.incumbent).total, exc.value, places=9)
        self.assertLessEqual(exc.value, optimum + 1e-9)
        self.assertGreaterEqual(exc.bound, optimum - 1e-6)
        self.assertAlmostEqual(exc.gap, exc.bound - exc.value)

    def test_exhaustive_refuses_large_spaces(self):
        inst = random_instance(np.random.default_rng(27), 6, 3)
        with self.assertRaises(InstanceError):
            solve_exhaustive(inst, limit=100)


class SearchNodeBoundTests(SimpleTestCase):
    def test_bound_dominates_every_completion(self):
        rng = np.random.default_rng(28)
        for _ in range(20):
            inst = random_instance(rng, 5, 3)
            for depth in range(inst.n_nodes + 1):
                prefix = rng.integers(0, inst.n_tasks, size=depth)
                labels = np.concatenate([prefix, np.full(inst.n_nodes - depth, -1)])
                node = SearchNode.from_labels(inst, labels)
                self.assertGreaterEqual(node.bound + 1e-12, partial_objective(inst, labels))
                best = -np.inf
                for rest in itertools.product(range(inst.n_tasks), repeat=inst.n_nodes - depth):
                    full = np.concatenate([prefix, np.array(rest, dtype=np.int64)]).astype(np.int64)
                    best = max(best, partial_objective(inst, full))
                self.assertGreaterEqual(node.bound + 1e-9, best)
                np.testing.assert_array_equal(
                    node.used_capacity, np.bincount(prefix.astype(np.int64), minlength=inst.n_tasks)
                )
