#!/usr/bin/env python3
# test_bony.py

import math

import numpy as np
import pytest

from bony import (bony_decompose, heat_trajectory_bank, key_product_indices, paraproduct,
                  paraproduct_estimate_check, paraproduct_support_defect, product_estimate_check,
                  random_pair_bank, remainder, remainder_estimate_check)
from hypotheses import HypothesisError
from lp_decomp import build_partition
from spectral_core import ScalarField, dealiased_product_coeffs, make_grid


@pytest.fixture
def grid():
    return make_grid(2, 64)


@pytest.fixture
def part(grid):
    return build_partition(grid)


@pytest.fixture
def pairs(grid, part):
    return random_pair_bank(grid, np.random.default_rng(21), 3, part)


def test_decomposition_reconstructs_product(pairs, part):
    for f, g in pairs:
        split = bony_decompose(f, g, part)
        expected = dealiased_product_coeffs(f.coeffs, g.coeffs, part.grid)
        scale = np.sqrt(np.sum(np.abs(expected) ** 2))
        assert np.sqrt(np.sum(np.abs(split.total().coeffs - expected) ** 2)) <= 1e-11 * scale


def test_paraproduct_pieces_are_not_symmetric(pairs, part):
    f, g = pairs[0]
    assert not np.allclose(paraproduct(g, f, part).coeffs, paraproduct(f, g, part).coeffs)


def test_paraproduct_terms_stay_near_their_band(pairs, part):
    f, g = pairs[1]
    assert paraproduct_support_defect(g, f, part) <= 1e-12


def test_paraproduct_is_bilinear(pairs, part):
    (f1, g), (f2, _) = pairs[0], pairs[1]
    combined = paraproduct(g, f1.scaled(2.0) + f2.scaled(-0.5), part).coeffs
    expected = 2.0 * paraproduct(g, f1, part).coeffs - 0.5 * paraproduct(g, f2, part).coeffs
    np.testing.assert_allclose(combined, expected, rtol=0, atol=1e-13 * np.max(np.abs(expected)))
    np.testing.assert_allclose(paraproduct(g.scaled(3.0), f1, part).coeffs, 3.0 * paraproduct(g, f1, part).coeffs,
                               rtol=0, atol=1e-13 * np.max(np.abs(expected)))


def test_remainder_is_symmetric(pairs, part):
    for f, g in pairs:
        forward = remainder(f, g, part).coeffs
        np.testing.assert_allclose(remainder(g, f, part).coeffs, forward, rtol=0,
                                   atol=1e-13 * np.max(np.abs(forward)))


def test_field_with_mean_is_rejected(grid, pairs, part):
    f, g = pairs[0]
    coeffs = g.coeffs.copy()
    coeffs[0, 0] = 1.0
    with pytest.raises(ValueError, match="not mean-free"):
        bony_decompose(f, ScalarField(grid=grid, coeffs=coeffs), part)


def test_field_beyond_covered_annulus_is_rejected(grid, pairs, part):
    f, _ = pairs[0]
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[15, 0] = coeffs[-15, 0] = 0.5
    with pytest.raises(ValueError, match="outside the covered band annulus"):
        bony_decompose(f, ScalarField(grid=grid, coeffs=coeffs), part)


def test_key_product_indices():
    idx = key_product_indices(2, 4.0, 2.0, 3.0)
    assert idx["s1"] == pytest.approx(2 / 4 - 1 + 2 / 3)
    assert idx["s2"] == idx["s1"]
    assert idx["r"] == 1.0
    assert idx["q"] == 3.0


def test_negative_variant_needs_negative_s1(part):
    with pytest.raises(HypothesisError, match="paraproduct_negative"):
        paraproduct_estimate_check([], [], {"s1": 0.5, "s2": 0.5, "p": 2.0, "r": 1.0, "r1": 2.0, "r2": 2.0},
                                   part, variant="negative")


def test_remainder_needs_matching_lebesgue_exponents(part):
    idx = {"s1": 0.25, "s2": 0.25, "p1": 4.0, "p2": 4.0, "p": 4.0, "r1": 2.0, "r2": 2.0}
    with pytest.raises(HypothesisError, match="1/p = 1/p1 \\+ 1/p2"):
        remainder_estimate_check([], [], idx, part)


class TestHarnesses:
    @pytest.fixture
    def setup(self):
        grid = make_grid(2, 32)
        part = build_partition(grid)
        bank = heat_trajectory_bank(grid, np.random.default_rng(5), 3, n_times=3, T=0.02)
        return part, bank

    def test_paraproduct_report(self, setup):
        part, bank = setup
        report = paraproduct_estimate_check(bank, bank, {"s": 0.5, "p": 2.0, "r": 2.0}, part, threads=1)
        assert report.lemma == "paraproduct_linf"
        assert report.n_trials == 3
        assert math.isfinite(report.max_ratio) and report.max_ratio > 0
        assert report.calibration_constant == pytest.approx(1.25 * report.calibration_max_ratio)
        assert report.drift == 0.0
        assert report.passed

    def test_key_product_report(self, setup):
        part, bank = setup
        report = product_estimate_check(bank, bank, key_product_indices(2, 2.0, 2.0, 3.0), part,
                                        variant="sobolev", threads=1)
        assert math.isfinite(report.max_ratio)
        assert report.passed
