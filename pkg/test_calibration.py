#!/usr/bin/env python3
# test_calibration.py

import math

import numpy as np
import pytest

from calibration import calibrate_and_assert, map_bank, relative_drift
from hypotheses import ESTIMATES


def identity(x):
    return x


def test_map_bank_keeps_order():
    assert map_bank(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
    assert map_bank(lambda x: x, [], threads=4) == []


def test_relative_drift():
    assert relative_drift(2.0, 2.0) == 0.0
    assert relative_drift(2.0, 2.5) == pytest.approx(0.25)
    assert relative_drift(0.0, 1.0) == math.inf


def test_upper_bound_fitted_on_bank_a():
    report = calibrate_and_assert("demo", {"p": 2.0}, identity, [1.0, 2.0, 3.0], [2.0, 3.5], safety=1.25)
    assert report.calibration_max_ratio == 3.0
    assert report.calibration_constant == pytest.approx(3.75)
    assert report.max_ratio == 3.5
    assert report.n_trials == 2
    assert report.passed


def test_upper_bound_violation_fails():
    report = calibrate_and_assert("demo", {}, identity, [3.0], [3.8], safety=1.25, max_drift=1.0)
    assert not report.passed


def test_large_drift_fails_even_below_the_constant():
    report = calibrate_and_assert("demo", {}, identity, [3.0], [0.5], safety=1.25)
    assert report.drift > 0.2
    assert not report.passed


def test_lower_bound():
    report = calibrate_and_assert("rate", {}, identity, [2.0, 3.0], [1.8, 2.2], safety=1.25, kind="lower")
    assert report.calibration_constant == pytest.approx(1.6)
    assert report.max_ratio == 1.8
    assert report.passed


def test_preset_overrides_fit():
    report = calibrate_and_assert("demo", {}, identity, [1.0], [1.1], preset=10.0)
    assert report.calibration_constant == 10.0
    assert report.passed


def test_array_ratios_are_flattened():
    bank = [np.array([1.0, 2.0]), np.array([0.5, 1.5, 1.0])]
    report = calibrate_and_assert("demo", {}, identity, bank, bank)
    assert report.n_trials == 5
    assert report.max_ratio == 2.0
    assert report.drift == 0.0


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown calibration kind"):
        calibrate_and_assert("demo", {}, identity, [1.0], [1.0], kind="sideways")


def test_report_quotes_the_estimate():
    report = calibrate_and_assert("band_decay_p4_j1", {"p": 4.0, "j": 1}, identity, [2.0], [2.0], kind="lower")
    assert report.statement == ESTIMATES["band_decay"]
    assert calibrate_and_assert("demo", {}, identity, [1.0], [1.0]).statement == ""
