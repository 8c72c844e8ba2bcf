from __future__ import annotations

import os

from django.conf import settings
from django.test import SimpleTestCase

from tfc import constants

KNOB_DEFAULTS = {
    "TFC_FEAS_TOL": constants.DEFAULT_FEAS_TOL,
    "TFC_INT_TOL": constants.DEFAULT_INT_TOL,
    "TFC_LP_ENGINE": constants.DEFAULT_LP_ENGINE,
    "TFC_SIMPLEX_MAX_CELLS": constants.DEFAULT_SIMPLEX_MAX_CELLS,
    "TFC_LP_ITERATION_FACTOR": constants.DEFAULT_LP_ITERATION_FACTOR,
    "TFC_EXACT_NODE_BUDGET": constants.DEFAULT_EXACT_NODE_BUDGET,
    "TFC_ENUMERATION_LIMIT": constants.DEFAULT_ENUMERATION_LIMIT,
    "TFC_DEFAULT_SEED": constants.DEFAULT_SEED,
}


class SolverSettingsTests(SimpleTestCase):
    def test_unset_knobs_fall_back_to_the_constants(self):
        for name, default in KNOB_DEFAULTS.items():
            if name in os.environ:
                continue
            with self.subTest(name):
                self.assertEqual(getattr(settings, name), default)
