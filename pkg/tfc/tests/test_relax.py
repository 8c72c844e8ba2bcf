from __future__ import annotations

import itertools
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase, override_settings
from scipy import sparse

from tfc.exceptions import LPError
from tfc.services.model import Assignment, FractionalSolution, Instance, evaluate_F, maxcut_instance
from tfc.services.relax import (
    LPStatus,
    RelaxationKind,
    build_program,
    eval_L1,
    eval_L2,
    eval_relaxation,
    lp_dump,
    resolve_engine,
    solve_program,
    solve_relaxation,
    write_lp_dump,
)
from tfc.services.simplex import STATUS_INFEASIBLE, STATUS_OPTIMAL, bounded_simplex
from tfc.tests.factories import brute_force_optimum, random_fractional, random_instance


def _one_edge_two_tasks(lam: float = 0.0) -> Instance:
    return Instance.build(["u", "v"], ["t1", "t2"], {"t1": 2, "t2": 2}, [("u", "v", 1.0)], {}, lam=lam)


class RelaxationValueTests(SimpleTestCase):
    def test_symmetric_point_meets_half_bound_with_equality(self):
        inst = _one_edge_two_tasks()
        y = FractionalSolution(np.full((2, 2), 0.5))
        self.assertAlmostEqual(eval_L1(inst, y), 1.0)
        self.assertAlmostEqual(evaluate_F(inst, y).total, 0.5)

    def test_l2_on_shared_task(self):
        inst = Instance.build(
            ["u", "v"], ["t"], {"t": 2}, [("u", "v", 1.0)], {("u", "t"): 0.4, ("v", "t"): 0.6}, lam=2.0
        )
        x = Assignment([0, 0])
        self.assertAlmostEqual(eval_L2(inst, FractionalSolution.from_assignment(x, 1)), 2.0)
        self.assertAlmostEqual(evaluate_F(inst, x).total, 2.0)

    def test_integral_points_agree_with_F(self):
        rng = np.random.default_rng(1)
        checked = 0
        for _ in range(50):
            inst = random_instance(rng, int(rng.integers(2, 21)), int(rng.integers(1, 5)))
            for _ in range(10):
                x = random_fractional(inst, rng, parts=1)
                F = evaluate_F(inst, x).total
                tol = 1e-9 * max(1.0, abs(F))
                self.assertLessEqual(abs(eval_L1(inst, x) - F), tol)
                self.assertLessEqual(abs(eval_L2(inst, x) - F), tol)
                checked += 1
        self.assertEqual(checked, 500)

    def test_scalar_identities(self):
        for a, b in itertools.product((0.0, 1.0), repeat=2):
            self.assertEqual(1 - (1 - a) * (1 - b), min(1.0, a + b))
        grid = np.linspace(0.0, 1.0, 41)
        a, b = np.meshgrid(grid, grid)
        self.assertTrue(np.all(1 - (1 - a) * (1 - b) >= 0.75 * np.minimum(1.0, a + b) - 1e-12))

    def test_F_is_at_least_half_of_L1(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            inst = random_instance(rng, int(rng.integers(2, 9)), int(rng.integers(1, 4)))
            for _ in range(10):
                y = random_fractional(inst, rng)
                self.assertGreaterEqual(evaluate_F(inst, y).total, 0.5 * eval_L1(inst, y) - 1e-9)

    def test_concavity_along_segments(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            inst = random_instance(rng, 6, 3)
            y1, y2 = random_fractional(inst, rng), random_fractional(inst, rng)
            theta = float(rng.uniform(0.05, 0.95))
            mid = FractionalSolution(theta * y1.values + (1 - theta) * y2.values)
            for kind in RelaxationKind:
                chord = theta * eval_relaxation(inst, y1, kind) + (1 - theta) * eval_relaxation(inst, y2, kind)
                self.assertGreaterEqual(eval_relaxation(inst, mid, kind), chord - 1e-9)


class ProgramTests(SimpleTestCase):
    def test_variable_counts_and_offsets(self):
        inst = Instance.build(["a", "b", "c"], ["t1", "t2"], {"t1": 2, "t2": 2}, [("a", "b", 1.5)], {}, lam=1.0)
        l1 = build_program(inst, RelaxationKind.L1)
        l2 = build_program(inst, RelaxationKind.L2)
        self.assertEqual(l1.n_variables, 7)
        self.assertEqual(l2.n_variables, 8)
        self.assertEqual(l1.constant_offset, 0.0)
        self.assertEqual(l2.constant_offset, -1.5)
        self.assertEqual(l1.variable_name(6), "z_0")
        self.assertEqual(l2.variable_name(7), "x_0_1")

    def test_lp_dump_sections(self):
        inst = _one_edge_two_tasks(lam=0.5)
        text = lp_dump(build_program(inst, RelaxationKind.L2))
        for section in ("Maximize", "Subject To", "Bounds", "End"):
            self.assertIn(section, text)
        self.assertIn("constant offset -1", text)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "l1.lp"
            write_lp_dump(build_program(inst, RelaxationKind.L1), path)
            self.assertTrue(path.read_text().startswith("\\ tfc relaxation l1"))


class SolveRelaxationTests(SimpleTestCase):
    def test_lp_optimum_dominates_integral_optimum(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            inst = random_instance(rng, int(rng.integers(2, 7)), int(rng.integers(1, 4)))
            best = brute_force_optimum(inst)
            for kind in RelaxationKind:
                result = solve_relaxation(inst, kind, engine="simplex")
                self.assertEqual(result.status, LPStatus.OPTIMAL)
                self.assertGreaterEqual(result.objective_value, best - 1e-6 * max(1.0, abs(best)))

    def test_four_cycle_cut(self):
        inst = maxcut_instance(
            ["a", "b", "c", "d"], [("a", "b", 1.0), ("b", "c", 1.0), ("c", "d", 1.0), ("d", "a", 1.0)]
        )
        result = solve_relaxation(inst, RelaxationKind.L1)
        self.assertGreaterEqual(result.objective_value, 4.0 - 1e-9)

    def test_trivial_instance_has_zero_optimum(self):
        inst = Instance.build(["a", "b"], ["t1", "t2"], {"t1": 1, "t2": 1}, [], {}, lam=0.0)
        for kind in RelaxationKind:
            self.assertAlmostEqual(solve_relaxation(inst, kind).objective_value, 0.0)

    def test_integral_l2_optimum_matches_enumeration(self):
        inst = Instance.build(
            ["a", "b", "c", "d"],
            ["t1", "t2"],
            {"t1": 2, "t2": 2},
            [("a", "b", 1.0), ("c", "d", 1.0)],
            {("a", "t1"): 1.0, ("b", "t2"): 1.0, ("c", "t1"): 1.0, ("d", "t2"): 1.0},
            lam=1.0,
        )
        result = solve_relaxation(inst, RelaxationKind.L2)
        self.assertTrue(result.solution.is_integral(1e-6))
        self.assertAlmostEqual(result.objective_value, brute_force_optimum(inst), places=6)

    def test_engines_agree(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            inst = random_instance(rng, 8, 3)
            for kind in RelaxationKind:
                simplex = solve_relaxation(inst, kind, engine="simplex")
                highs = solve_relaxation(inst, kind, engine="highs")
                self.assertEqual((simplex.engine, highs.engine), ("simplex", "highs"))
                self.assertAlmostEqual(simplex.objective_value, highs.objective_value, places=5)

    def test_iteration_limit_is_reported(self):
        inst = random_instance(np.random.default_rng(0), 6, 3)
        outcome = solve_program(build_program(inst, RelaxationKind.L1), engine="simplex", max_iter=1)
        self.assertEqual(outcome.status, LPStatus.ITERATION_LIMIT)
        with override_settings(TFC_LP_ITERATION_FACTOR=0):
            result = solve_relaxation(inst, RelaxationKind.L1, engine="simplex")
        self.assertIsNone(result.solution)
        self.assertFalse(result.is_optimal)

    def test_numerical_failures_become_lp_errors(self):
        program = build_program(random_instance(np.random.default_rng(1), 5, 2), RelaxationKind.L2)
        with patch("tfc.services.relax.linprog", side_effect=np.linalg.LinAlgError("singular matrix")):
            with self.assertRaises(LPError) as ctx:
                solve_program(program, engine="highs")
        self.assertIn("singular matrix", str(ctx.exception))
        with patch("tfc.services.relax.bounded_simplex", side_effect=FloatingPointError("overflow")):
            with self.assertRaises(LPError):
                solve_program(program, engine="simplex")

    @override_settings(TFC_SIMPLEX_MAX_CELLS=10)
    def test_auto_engine_switches_on_size(self):
        inst = random_instance(np.random.default_rng(0), 6, 3)
        self.assertEqual(resolve_engine(build_program(inst, RelaxationKind.L1), "auto"), "highs")
        self.assertEqual(resolve_engine(build_program(inst, RelaxationKind.L1), "simplex"), "simplex")


class BoundedSimplexTests(SimpleTestCase):
    def test_small_program_with_upper_bounds(self):
        # max x0 + 2 x1  s.t.  x0 + x1 <= 1.5, 0 <= x <= 1
        outcome = bounded_simplex(
            np.array([1.0, 2.0]), sparse.csr_matrix([[1.0, 1.0]]), np.array([1.5]), None, None, np.ones(2), max_iter=50
        )
        self.assertEqual(outcome.status, STATUS_OPTIMAL)
        np.testing.assert_allclose(outcome.x, [0.5, 1.0], atol=1e-9)
        self.assertAlmostEqual(outcome.objective, 2.5)

    def test_infeasible_equality(self):
        # x0 + x1 = 3 with both variables in [0, 1]
        outcome = bounded_simplex(
            np.array([1.0, 1.0]), None, None, sparse.csr_matrix([[1.0, 1.0]]), np.array([3.0]), np.ones(2), max_iter=50
        )
        self.assertEqual(outcome.status, STATUS_INFEASIBLE)
