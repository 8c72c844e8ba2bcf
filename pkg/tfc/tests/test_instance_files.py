from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from tfc.exceptions import InfeasibleSolutionError, InstanceError, SchemaError
from tfc.services.generators import MALE, FEMALE, PreferenceFunction, generate_education
from tfc.services.instance_files import (
    instance_fingerprint,
    instance_text,
    load_assignment,
    load_education_instance,
    load_groups,
    load_instance,
    load_report,
    load_rankings,
    parse_instance_text,
    read_config_echo,
    read_table,
    save_assignment,
    save_education,
    save_groups,
    save_instance,
    write_table,
)
from tfc.services.model import Assignment, Instance
from tfc.tests.factories import random_instance

VALID = """# tfc-instance v1
[params]
lambda 2.0
[tasks]
t1 2
t2 1
[nodes]
a
b
c
[edges]
a b 1.5
[preferences]
a t1 0.5
c t2 1.0
"""


def _replace(old: str, new: str) -> str:
    assert old in VALID
    return VALID.replace(old, new)


class CanonicalFormatTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_save_then_load_reproduces_the_file(self):
        inst = random_instance(np.random.default_rng(61), 9, 3, alpha=2.5)
        path = self.tmp / "inst.txt"
        save_instance(inst, path)
        loaded = load_instance(path)
        self.assertEqual(instance_text(loaded), path.read_text(encoding="utf-8"))
        self.assertEqual(instance_fingerprint(loaded), instance_fingerprint(inst))
        self.assertAlmostEqual(loaded.lam, inst.lam)
        self.assertEqual(loaded.alpha, 2.5)

    def test_parse_small_file(self):
        inst = parse_instance_text(VALID)
        self.assertEqual(list(inst.node_ids), ["a", "b", "c"])
        self.assertEqual(inst.capacity_map(), {"t1": 2, "t2": 1})
        self.assertEqual(inst.conflict_edges(), [("a", "b", 1.5)])
        self.assertEqual(inst.preference_map(), {("a", "t1"): 0.5, ("c", "t2"): 1.0})
        self.assertEqual(inst.lam, 2.0)

    def test_comments_and_blank_lines_are_skipped(self):
        text = _replace("[nodes]\n", "[nodes]\n\n# students\n")
        self.assertEqual(parse_instance_text(text).n_nodes, 3)

    def test_schema_errors(self):
        broken = {
            "header": VALID.replace("# tfc-instance v1\n", ""),
            "unknown section": _replace("[edges]", "[friends]"),
            "duplicate section": VALID + "[tasks]\nt3 1\n",
            "fractional capacity": _replace("t1 2", "t1 2.5"),
            "infinite capacity": _replace("t1 2", "t1 inf"),
            "negative capacity": _replace("t1 2", "t1 -1"),
            "both parameters": _replace("lambda 2.0", "lambda 2.0\nalpha 1.0"),
            "duplicate preference": _replace("c t2 1.0", "c t2 1.0\nc t2 0.5"),
            "missing nodes": VALID.replace("[nodes]\na\nb\nc\n", "").replace("[edges]\na b 1.5\n", ""),
            "bad weight": _replace("a b 1.5", "a b heavy"),
        }
        for label, text in broken.items():
            with self.subTest(label), self.assertRaises(SchemaError):
                parse_instance_text(text)

    def test_invalid_instance_names_the_source(self):
        with self.assertRaisesMessage(InstanceError, "inst.txt"):
            parse_instance_text(_replace("a b 1.5", "a b 1.5\nb a 2.0"), "inst.txt")
        with self.assertRaises(InstanceError):
            parse_instance_text(_replace("a t1 0.5", "a t1 1.5"))
        with self.assertRaises(InstanceError):
            parse_instance_text(_replace("t2 1", "t2 0"))

    def test_load_overrides_lambda(self):
        path = self.tmp / "inst.txt"
        path.write_text(VALID, encoding="utf-8")
        self.assertEqual(load_instance(path, lam=5.0).lam, 5.0)
        with_alpha = load_instance(path, alpha=3.0)
        self.assertAlmostEqual(with_alpha.lam, 3.0 * 1.5 / 3)
        with self.assertRaises(InstanceError):
            load_instance(path, alpha=1.0, lam=1.0)
        with self.assertRaises(SchemaError):
            load_instance(self.tmp / "missing.txt")
        with self.assertRaises(SchemaError):
            load_instance(path, "xml")

    def test_ids_with_whitespace_cannot_be_written(self):
        inst = Instance.build(["a b"], ["t"], {"t": 1}, [], {}, lam=0.0)
        with self.assertRaises(SchemaError):
            instance_text(inst)


class AssignmentFileTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.inst = parse_instance_text(VALID)

    def tearDown(self):
        self._tmp.cleanup()

    def _write(self, body: str) -> Path:
        path = self.tmp / "x.txt"
        path.write_text("# tfc-assignment v1\n" + body, encoding="utf-8")
        return path

    def test_round_trip(self):
        x = Assignment.from_mapping(self.inst, {"a": "t1", "b": "t2", "c": "t1"})
        path = self.tmp / "x.txt"
        save_assignment(self.inst, x, path)
        self.assertEqual(load_assignment(self.inst, path), x)

    def test_overfilled_task_is_named(self):
        path = self._write("a t2\nb t2\nc t1\n")
        with self.assertRaises(InfeasibleSolutionError) as ctx:
            load_assignment(self.inst, path)
        self.assertIn("t2", str(ctx.exception))
        self.assertEqual(ctx.exception.violations[0].key, "t2")

    def test_missing_node_is_infeasible(self):
        with self.assertRaises(InfeasibleSolutionError):
            load_assignment(self.inst, self._write("a t1\nb t2\n"))

    def test_schema_errors(self):
        for body in ("a t1\nzz t2\nc t1\n", "a t9\nb t2\nc t1\n", "a t1\na t1\nb t2\n", "a\n"):
            with self.subTest(body), self.assertRaises(SchemaError):
                load_assignment(self.inst, self._write(body))
        bare = self.tmp / "bare.txt"
        bare.write_text("a t1\n", encoding="utf-8")
        with self.assertRaises(SchemaError):
            load_assignment(self.inst, bare)


class EducationDirectoryTests(SimpleTestCase):
    def test_saved_directory_loads_the_same_instance(self):
        dataset = generate_education(8)
        inst = dataset.instance
        with tempfile.TemporaryDirectory() as tmp:
            save_education(tmp, dataset.rankings, inst.capacity_map())
            loaded = load_education_instance(tmp)
            self.assertEqual(instance_text(loaded), instance_text(inst))
            self.assertEqual(load_rankings(tmp).rankings, dataset.rankings.rankings)
            linnorm = load_instance(tmp, "education", preference=PreferenceFunction.LINNORM)
            self.assertEqual(linnorm.n_edges, inst.n_edges)
            self.assertEqual(load_instance(tmp, "education", lam=1.0).lam, 1.0)

    def test_rank_gaps_are_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp)
            (path / "rankings.csv").write_text(
                "# tfc-rankings v1\nnode,task,rank\ns1,p1,1\ns1,p2,3\n", encoding="utf-8"
            )
            (path / "capacities.csv").write_text(
                "# tfc-capacities v1\ntask,capacity\np1,1\np2,1\n", encoding="utf-8"
            )
            with self.assertRaises(SchemaError):
                load_education_instance(path)

    def test_missing_capacities(self):
        dataset = generate_education(8)
        with tempfile.TemporaryDirectory() as tmp:
            save_education(tmp, dataset.rankings, dataset.instance.capacity_map())
            (Path(tmp) / "capacities.csv").unlink()
            with self.assertRaises(SchemaError):
                load_education_instance(tmp)


class TableTests(SimpleTestCase):
    def test_header_lines_are_comments(self):
        frame = pd.DataFrame({"alpha": [0.0, 1.0], "value": [2.5, 3.5]})
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "sweep.csv"
            write_table(frame, path, ["tfc-sweep v1", "seed 3"])
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertEqual(lines[:3], ["# tfc-sweep v1", "# seed 3", "alpha,value"])
            pd.testing.assert_frame_equal(read_table(path), frame)

    def test_groups_round_trip(self):
        inst = random_instance(np.random.default_rng(62), 4, 2)
        groups = np.array([MALE, FEMALE, FEMALE, MALE])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "groups.csv"
            save_groups(inst, groups, path)
            np.testing.assert_array_equal(load_groups(inst, path), groups)
            bigger = random_instance(np.random.default_rng(63), 5, 2)
            with self.assertRaises(SchemaError):
                load_groups(bigger, path)

    def test_invalid_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "report.json"
            path.write_text("{}", encoding="utf-8")
            with self.assertRaises(SchemaError):
                load_report(path)


class ConfigEchoTests(SimpleTestCase):
    ECHO = {"generator": "synth-tf", "params": {"blocks": 2, "p_in": 0.9}, "seed": 12}

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.inst = parse_instance_text(VALID)

    def tearDown(self):
        self._tmp.cleanup()

    def test_instance_file(self):
        path = self.tmp / "inst.txt"
        save_instance(self.inst, path, self.ECHO)
        lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "# tfc-instance v1")
        self.assertTrue(lines[1].startswith("# config {"))
        self.assertEqual(read_config_echo(path), self.ECHO)
        self.assertEqual(instance_text(load_instance(path)), instance_text(self.inst))
        self.assertEqual(instance_fingerprint(load_instance(path)), instance_fingerprint(self.inst))

    def test_assignment_file(self):
        x = Assignment.from_mapping(self.inst, {"a": "t1", "b": "t2", "c": "t1"})
        path = self.tmp / "x.txt"
        save_assignment(self.inst, x, path, {"algorithm": "greedy", "lambda": 2.0})
        self.assertEqual(read_config_echo(path), {"algorithm": "greedy", "lambda": 2.0})
        self.assertEqual(load_assignment(self.inst, path), x)

    def test_groups_file(self):
        path = self.tmp / "groups.csv"
        groups = np.array([MALE, FEMALE, MALE])
        save_groups(self.inst, groups, path, self.ECHO)
        self.assertEqual(read_config_echo(path), self.ECHO)
        np.testing.assert_array_equal(load_groups(self.inst, path), groups)

    def test_education_directory(self):
        dataset = generate_education(8)
        save_education(self.tmp, dataset.rankings, dataset.instance.capacity_map(), self.ECHO)
        self.assertEqual(read_config_echo(self.tmp), self.ECHO)
        self.assertEqual(read_config_echo(self.tmp / "capacities.csv"), self.ECHO)
        self.assertEqual(instance_text(load_education_instance(self.tmp)), instance_text(dataset.instance))

    def test_without_echo(self):
        path = self.tmp / "inst.txt"
        save_instance(self.inst, path)
        self.assertIsNone(read_config_echo(path))
        self.assertEqual(path.read_text(encoding="utf-8"), instance_text(self.inst))

    def test_malformed_echo(self):
        path = self.tmp / "inst.txt"
        path.write_text(VALID.replace("[params]", "# config {oops\n[params]"), encoding="utf-8")
        with self.assertRaises(SchemaError):
            read_config_echo(path)
        self.assertEqual(load_instance(path).n_nodes, 3)
