from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings
from pydantic import ValidationError

from tfc.constants import ALGORITHMS
from tfc.exceptions import IterationLimitError
from tfc.services.generators import generate_synth_tf
from tfc.services.instance_files import load_report, save_report
from tfc.services.model import feasible
from tfc.services.pipeline import SolverOptions, build_report, run_algorithm
from tfc.services.schemas import RunConfig
from tfc.services.speedups import PREFERENCE_AGGREGATION
from tfc.tests.factories import random_instance

SLOW = bool(getattr(settings, "TFC_RUN_SLOW_TESTS", False))


def _solve(inst, **changes):
    config = RunConfig(**changes)
    run = run_algorithm(inst, SolverOptions.from_config(config))
    return config, run, build_report(inst, config, run)


class RunAlgorithmTests(SimpleTestCase):
    def setUp(self):
        self.inst = random_instance(np.random.default_rng(81), 7, 3, alpha=2.0)

    def test_every_algorithm_returns_a_feasible_assignment(self):
        values = {}
        for algorithm in ALGORITHMS:
            run = run_algorithm(self.inst, SolverOptions(algorithm=algorithm, seed=4))
            self.assertTrue(feasible(self.inst, run.best.assignment), algorithm)
            values[algorithm] = run.best.breakdown.total
        for algorithm, value in values.items():
            self.assertLessEqual(value, values["exact"] + 1e-9, algorithm)

    def test_repetitions_only_for_randomized_algorithms(self):
        run = run_algorithm(self.inst, SolverOptions(algorithm="rpipage-l2", seed=3, repetitions=5))
        self.assertEqual([r.seed for r in run.runs], [3, 4, 5, 6, 7])
        self.assertEqual(run.best.breakdown.total, max(run.values))
        once = run_algorithm(self.inst, SolverOptions(algorithm="greedy", repetitions=5))
        self.assertEqual(len(once.runs), 1)
        self.assertIsNone(once.runs[0].seed)

    def test_same_seed_same_runs(self):
        options = SolverOptions(algorithm="random", seed=9, repetitions=3)
        first, second = run_algorithm(self.inst, options), run_algorithm(self.inst, options)
        self.assertEqual(first.values, second.values)

    def test_unknown_algorithm(self):
        with self.assertRaises(ValueError):
            run_algorithm(self.inst, SolverOptions(algorithm="annealing"))

    @override_settings(TFC_LP_ITERATION_FACTOR=0)
    def test_iteration_limit_is_raised(self):
        inst = random_instance(np.random.default_rng(0), 6, 3)
        with self.assertRaises(IterationLimitError):
            run_algorithm(inst, SolverOptions(algorithm="pipage-l1", engine="simplex"))

    def test_compact_run_reports_supernodes(self):
        config, run, report = _solve(self.inst, algorithm="rpipage-l2", compact=True, supernode_size=3)
        self.assertTrue(feasible(self.inst, run.best.assignment))
        self.assertIsNotNone(report.relaxation.supernodes)
        self.assertEqual(report.relaxation.preference_aggregation, PREFERENCE_AGGREGATION)
        self.assertIsNone(report.approximation)

    def test_dump_lp(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "relaxation.lp"
            run_algorithm(self.inst, SolverOptions(algorithm="pipage-l1", dump_lp=path))
            text = path.read_text(encoding="utf-8")
        self.assertTrue(text.startswith("\\ tfc relaxation l1"))
        self.assertIn("Subject To", text)


class SparsifyIdentityTests(SimpleTestCase):
    def test_probability_one_changes_nothing_but_the_config(self):
        inst = random_instance(np.random.default_rng(82), 8, 3, alpha=1.5)
        _, _, plain = _solve(inst, algorithm="rpipage-l2", seed=2, repetitions=3)
        _, _, sparse = _solve(inst, algorithm="rpipage-l2", seed=2, repetitions=3, sparsify=1.0)
        sparse_data, plain_data = sparse.comparable(), plain.comparable()
        self.assertNotEqual(sparse_data.pop("config"), plain_data.pop("config"))
        self.assertEqual(sparse_data, plain_data)
        self.assertIsNotNone(sparse.approximation)
        self.assertIsNone(sparse.relaxation.sparsified_edges)

    def test_dropped_edges_are_reported_without_a_bound_ratio(self):
        inst = random_instance(np.random.default_rng(82), 8, 3, edge_prob=1.0, alpha=1.5)
        _, _, report = _solve(inst, algorithm="pipage-l1", seed=2, sparsify=0.3)
        self.assertLess(report.relaxation.sparsified_edges, inst.n_edges)
        self.assertIsNone(report.approximation)

    def test_timings_stay_out_of_the_comparable_payload(self):
        inst = random_instance(np.random.default_rng(84), 6, 3, alpha=1.0)
        _, run, report = _solve(inst, algorithm="rpipage-l2", seed=1, repetitions=2)
        self.assertNotIn("timing", report.comparable())
        self.assertEqual(len(report.timing.runs), 2)
        self.assertEqual(report.timing.relaxation, run.relaxation.lp.seconds)


class BuildReportTests(SimpleTestCase):
    def setUp(self):
        self.inst = random_instance(np.random.default_rng(83), 6, 3, alpha=2.0)

    def test_exact_ratio_is_one(self):
        _, run, report = _solve(self.inst, algorithm="exact")
        self.assertEqual(report.approximation.mode, "exact")
        self.assertAlmostEqual(report.approximation.value, 1.0)
        self.assertAlmostEqual(report.objective.total, run.exact_value)
        self.assertEqual(report.instance.n_nodes, 6)
        self.assertEqual(len(report.assignment), 6)

    def test_pipage_meets_its_guarantee(self):
        _, run, report = _solve(self.inst, algorithm="pipage-l1")
        self.assertEqual(report.summary.guarantee_factor, 0.5)
        self.assertAlmostEqual(report.summary.guarantee, 0.5 * report.relaxation.value)
        self.assertGreaterEqual(report.objective.total, report.summary.guarantee - 1e-9)
        self.assertEqual(report.approximation.mode, "lp_bound")
        self.assertEqual(report.approximation.qualifier, ">=")
        self.assertEqual(report.relaxation.kind, "l1")

    def test_repetition_statistics(self):
        _, run, report = _solve(self.inst, algorithm="rpipage-l2", seed=11, repetitions=6)
        values = np.array(run.values)
        self.assertEqual(report.summary.runs, 6)
        self.assertAlmostEqual(report.summary.mean, values.mean())
        self.assertAlmostEqual(report.summary.std, values.std())
        self.assertAlmostEqual(report.summary.standard_error, values.std(ddof=1) / np.sqrt(6))
        self.assertEqual(report.summary.guarantee_factor, 0.75)
        self.assertEqual([r.seed for r in report.runs], list(range(11, 17)))

    def test_report_file_round_trip(self):
        _, _, report = _solve(self.inst, algorithm="greedy")
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.json"
            save_report(report, path)
            self.assertIn('"lambda"', path.read_text(encoding="utf-8"))
            self.assertEqual(load_report(path), report)


class RunConfigTests(SimpleTestCase):
    def test_rejects_inconsistent_options(self):
        for bad in (
            {"alpha": 1.0, "lam": 1.0},
            {"alpha": -1.0},
            {"sparsify": 0.0},
            {"repetitions": 0},
            {"algorithm": "annealing"},
            {"engine": "cplex"},
        ):
            with self.subTest(bad), self.assertRaises(ValidationError):
                RunConfig(**bad)

    def test_lambda_alias(self):
        self.assertEqual(RunConfig(**{"lambda": 2.0}).lam, 2.0)
        self.assertIn("lambda", RunConfig(lam=2.0).model_dump(by_alias=True))


@unittest.skipUnless(SLOW, "set TFC_RUN_SLOW_TESTS=1")
class SpeedupBenefitTests(SimpleTestCase):
    def test_sparsify_and_compact_are_faster(self):
        inst = generate_synth_tf(7, blocks=10, block_size=20, n_tasks=10).instance
        base = SolverOptions(algorithm="rpipage-l2", engine="highs", seed=7)
        plain = run_algorithm(inst, base)
        for faster in (base.replace(sparsify=0.05), base.replace(compact=True, supernode_size=20)):
            with self.subTest(sparsify=faster.sparsify, compact=faster.compact):
                run = run_algorithm(inst, faster)
                self.assertGreaterEqual(plain.relaxation.lp.seconds / run.relaxation.lp.seconds, 5.0)
                self.assertGreaterEqual(run.best.breakdown.total, 0.98 * plain.best.breakdown.total)
