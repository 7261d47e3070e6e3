#!/usr/bin/env python3
# test_experiments.py

import math

import numpy as np
import pytest

from experiments import (band_perturbation, calderon_pipeline, calderon_split, calibrate_smallness,
                         coeff_besov_norm, gronwall_calibration, gronwall_energy_check, gronwall_measures,
                         growth_monitor, heat_series, local_existence, magnetic_cancellation_identities,
                         solve_mhd_like, superposition_residual, trilinear_bank, trilinear_bound_check,
                         trilinear_form, weak_strong_gap, weak_surrogate, x_norm, x_norm_heat_check)
from hypotheses import HypothesisError
from jobs import run_weakstrong
from lp_decomp import build_partition
from mhd_core import MHDState, Trajectory, march, orszag_tang, random_mhd_data
from norm_suite import BesovSpec
from run_config import config_from_dict
from spectral_core import VectorField, make_grid, random_solenoidal_field

SPEC_BAR = BesovSpec(s=-0.5, p=4.0, r=2.0)


@pytest.fixture
def grid():
    return make_grid(2, 32)


@pytest.fixture
def part(grid):
    return build_partition(grid)


@pytest.fixture
def data(grid):
    return random_mhd_data(grid, np.random.default_rng(8), 1.0, 1.0, 6.0, 0.0)


def zero_trajectory(grid, T, dt, sample_every):
    zero = VectorField(grid=grid, coeffs=np.zeros((grid.dim,) + grid.shape, dtype=complex))
    return march(MHDState(u=zero, b=zero), T, dt, sample_every)


class TestCalderonSplit:
    def test_split_reconstructs_data(self, data, part):
        u0, b0 = data
        total = coeff_besov_norm(np.stack([u0.coeffs, b0.coeffs]), SPEC_BAR, part)
        split = calderon_split(u0, b0, SPEC_BAR, 0.99 * total, part)
        assert split.cut_band is not None
        assert split.tail_norm <= 0.99 * total
        np.testing.assert_allclose((split.v0 + split.w0).coeffs, u0.coeffs, atol=1e-15)
        np.testing.assert_allclose((split.g0 + split.h0).coeffs, b0.coeffs, atol=1e-15)
        below = part.grid.kmag < 0.75 * 2.0 ** split.cut_band
        assert np.all(split.w0.coeffs[:, below] == 0)
        assert np.all(split.h0.coeffs[:, below] == 0)

    def test_small_data_needs_no_split(self, data, part):
        u0, b0 = data
        total = coeff_besov_norm(np.stack([u0.coeffs, b0.coeffs]), SPEC_BAR, part)
        split = calderon_split(u0, b0, SPEC_BAR, 2 * total, part)
        assert split.cut_band is None
        assert np.all(split.v0.coeffs == 0)
        assert np.array_equal(split.w0.coeffs, u0.coeffs)

    def test_unreachable_threshold(self, data, part):
        with pytest.raises(ValueError, match="unreachable"):
            calderon_split(*data, SPEC_BAR, 1e-12, part)

    def test_threshold_must_be_positive(self, data, part):
        with pytest.raises(ValueError, match="threshold must be positive"):
            calderon_split(*data, SPEC_BAR, 0.0, part)


def test_mhd_like_system_without_background_is_mhd(grid, data):
    u0, b0 = data
    wh = zero_trajectory(grid, 0.02, 1e-3, 5)
    vg = solve_mhd_like(u0, b0, wh, 0.02, 1e-3, 5)
    direct = march(MHDState(u=u0, b=b0), 0.02, 1e-3, 5)
    np.testing.assert_allclose(vg.u, direct.u, atol=1e-15)
    np.testing.assert_allclose(vg.b, direct.b, atol=1e-15)


def test_background_must_cover_the_run(grid, data):
    wh = zero_trajectory(grid, 0.01, 1e-3, 5)
    with pytest.raises(ValueError, match="covers"):
        solve_mhd_like(*data, wh, 0.02, 1e-3, 5)


def test_superposition_of_split_solutions(grid, part, data):
    u0, b0 = data
    total = coeff_besov_norm(np.stack([u0.coeffs, b0.coeffs]), SPEC_BAR, part)
    run = calderon_pipeline(u0, b0, SPEC_BAR, 0.99 * total, part, 0.05, 1e-3, 10)
    direct = march(MHDState(u=u0, b=b0), 0.05, 1e-3, 10)
    report = superposition_residual(run.vg, run.wh, direct, 4.0, BesovSpec(s=0.0, p=2.0, r=2.0), part)
    assert report.passed
    assert report.terminal_gap <= 1e-3 * math.sqrt(np.sum(np.abs(direct.u[-1]) ** 2))


class TestGronwall:
    def test_zero_background_is_pure_decay(self, grid, part, data):
        u0, b0 = data
        wh = zero_trajectory(grid, 0.02, 1e-3, 5)
        vg = solve_mhd_like(u0, b0, wh, 0.02, 1e-3, 5)
        sup_ratio, needed, weight = gronwall_measures(vg, wh, 4.0, 2.0, part)
        assert sup_ratio <= 1.0 + 1e-9
        assert needed == 0.0
        assert weight == 0.0
        assert gronwall_energy_check(vg, wh, 4.0, 2.0, part, sup_bound=1.25, rate=0.0).passed

    def test_inflated_energy_fails(self, grid, part, data):
        u0, b0 = data
        wh = zero_trajectory(grid, 0.02, 1e-3, 5)
        vg = solve_mhd_like(u0, b0, wh, 0.02, 1e-3, 5)
        factors = np.full(len(vg.times), 10.0)
        factors[0] = 1.0
        shape = (-1,) + (1,) * (vg.u.ndim - 1)
        inflated = Trajectory(grid=grid, times=vg.times, u=vg.u * factors.reshape(shape),
                              b=vg.b * factors.reshape(shape))
        report = gronwall_energy_check(inflated, wh, 4.0, 2.0, part, sup_bound=1.25, rate=0.0)
        assert report.sup_ratio > 50
        assert report.rate_needed == math.inf
        assert not report.passed

    def test_constants_fitted_on_split_runs(self, part, data):
        u0, b0 = data
        threshold = 0.99 * coeff_besov_norm(np.stack([u0.coeffs, b0.coeffs]), SPEC_BAR, part)
        fits = gronwall_calibration([data], [data], SPEC_BAR, threshold, 4.0, 2.0, part, 0.02, 1e-3, 5, threads=1)
        assert [fit.lemma for fit in fits] == ["gronwall_sup", "gronwall_rate"]
        assert all(fit.passed and fit.drift == 0.0 for fit in fits)
        assert fits[0].calibration_constant >= 1.0
        run = calderon_pipeline(u0, b0, SPEC_BAR, threshold, part, 0.02, 1e-3, 5)
        report = gronwall_energy_check(run.vg, run.wh, 4.0, 2.0, part, fits[0].calibration_constant,
                                       fits[1].calibration_constant)
        assert report.passed

    def test_preset_replaces_fitted_constant(self, part, data):
        u0, b0 = data
        threshold = 0.99 * coeff_besov_norm(np.stack([u0.coeffs, b0.coeffs]), SPEC_BAR, part)
        sup_fit, _ = gronwall_calibration([data], [data], SPEC_BAR, threshold, 4.0, 2.0, part, 0.02, 1e-3, 5,
                                          presets={"gronwall_sup": 0.5}, threads=1)
        assert sup_fit.calibration_constant == 0.5
        assert not sup_fit.passed

    def test_indices(self, grid, part):
        wh = zero_trajectory(grid, 0.01, 1e-3, 5)
        with pytest.raises(HypothesisError, match="gronwall_energy"):
            gronwall_measures(wh, wh, 8.0, 8.0, part)


class TestTrilinear:
    def test_cancellation_identities_along_a_run(self, grid):
        u, b = orszag_tang(grid)
        traj = march(MHDState(u=u, b=b), 0.02, 1e-3, 10)
        for value in magnetic_cancellation_identities(traj).values():
            assert value <= 1e-12

    def test_antisymmetric_in_last_two_slots(self, grid):
        rng = np.random.default_rng(9)
        times = np.linspace(0.0, 0.1, 5)
        a, b, c = (heat_series(random_solenoidal_field(grid, rng, 1.0, 5.0), times) for _ in range(3))
        forward = trilinear_form(a, b, c, 0.1)
        assert abs(forward) > 0
        assert trilinear_form(a, c, b, 0.1) == pytest.approx(-forward, abs=1e-12)

    def test_form_outside_mesh(self, grid):
        times = np.linspace(0.0, 0.1, 3)
        a = heat_series(random_solenoidal_field(grid, np.random.default_rng(1)), times)
        with pytest.raises(ValueError, match="outside the mesh"):
            trilinear_form(a, a, a, 0.2)

    def test_bound_reports(self, part):
        bank = trilinear_bank(part.grid, np.random.default_rng(10), 2, n_times=5, T=0.1)
        reports = trilinear_bound_check(bank, bank, 2.0, 4.0, part, threads=1)
        assert [r.lemma for r in reports] == ["trilinear_product", "trilinear_split", "trilinear_split_aac"]
        assert all(r.passed and math.isfinite(r.max_ratio) for r in reports)

    def test_sigma_two_is_outside_hypotheses(self, part):
        with pytest.raises(HypothesisError, match="trilinear_integral_bound"):
            trilinear_bound_check([], [], 2.0, 2.0, part)


class TestXNorm:
    def test_zero_trajectory(self, grid):
        report = x_norm(zero_trajectory(grid, 0.01, 1e-3, 5), 2.0)
        assert report.total == 0.0

    def test_needs_r_above_one(self, grid):
        with pytest.raises(ValueError, match="need r > 1"):
            x_norm(zero_trajectory(grid, 0.01, 1e-3, 5), 1.0)

    def test_heat_flow_is_bounded_by_data(self, grid):
        rng = np.random.default_rng(12)
        bank = [random_mhd_data(grid, rng, 1.0, 1.0, 6.0) for _ in range(2)]
        report = x_norm_heat_check(bank, bank, 2.0, 0.5, n_times=16, threads=1)
        assert report.passed
        assert 0 < report.max_ratio < math.inf


class TestWeakStrong:
    def test_identical_runs(self, part, data):
        traj = march(MHDState(u=data[0], b=data[1]), 0.02, 1e-3, 10)
        report = weak_strong_gap(traj, traj, 2.0, 2.0, part)
        assert report.rate_needed == 0.0
        assert report.passed

    def test_coarse_surrogate(self, grid, part):
        u0, b0 = random_mhd_data(grid, np.random.default_rng(13), 1.0, 1.0, 4.0)
        du, db = band_perturbation(grid, np.random.default_rng(16), 0.05, 4.0, 5.0)
        strong = march(MHDState(u=u0, b=b0), 0.02, 1e-3, 10)
        weak = weak_surrogate(u0 + du, b0 + db, 16, 0.02, 1e-3, 10)
        assert weak.grid == grid
        np.testing.assert_allclose(weak.times, strong.times)
        report = weak_strong_gap(strong, weak, 2.0, 2.0, part)
        assert math.isfinite(report.rate_needed)
        assert report.passed

    def test_surrogate_sampling_must_divide(self, grid, data):
        with pytest.raises(ValueError, match="not a multiple of dt_factor"):
            weak_surrogate(*data, 16, 0.02, 1e-3, 5)

    def test_indices(self, part, data):
        traj = march(MHDState(u=data[0], b=data[1]), 0.01, 1e-3, 5)
        with pytest.raises(HypothesisError, match="weak_strong"):
            weak_strong_gap(traj, traj, 4.0, 4.0, part)

    def test_gap_shrinks_with_the_perturbation(self):
        cfg = config_from_dict({
            "grid": {"n": 64}, "solver": {"T": 0.02, "dt": 1e-3, "sample_every": 10},
            "experiment": {"name": "weakstrong", "coarse_n": 32, "perturbation": 1e-2, "energy": 0.1,
                           "k_max": 3.0, "bank_size": 2}})
        result = run_weakstrong(cfg)
        rows = result.summary["scales"]
        assert [row["perturbation"] for row in rows] == pytest.approx([1e-2, 5e-3, 2.5e-3])
        assert result.summary["monotone"] is True
        assert rows[0]["max_lhs"] > rows[-1]["max_lhs"] > 0


def test_growth_monitor_needs_p_above_two(part, data):
    with pytest.raises(HypothesisError, match="growth"):
        growth_monitor([0.5], *data, 2.0, 2.0, part, 0.01, 1e-3, 5, 0.5)


def test_growth_is_linear_for_small_data(part):
    u0, b0 = orszag_tang(part.grid)
    report = growth_monitor([0.05, 0.1, 0.2], u0, b0, 4.0, 2.0, part, 0.02, 1e-3, 5, 10.0)
    assert report.passed
    assert [row.scale for row in report.rows] == [0.05, 0.1, 0.2]
    for row in report.rows:
        assert row.data_norm == pytest.approx(row.scale, rel=1e-10)
        assert row.sup_norm >= row.data_norm * (1 - 1e-12)
    assert len(report.slopes) == 2
    assert all(abs(slope - 1.0) <= 0.05 for slope in report.slopes)


class TestLocalExistence:
    spec = BesovSpec(s=0.0, p=2.0, r=2.0)

    def test_small_data_keeps_the_horizon(self):
        grid = make_grid(2, 16)
        u0, b0 = random_mhd_data(grid, np.random.default_rng(14), 1e-8, 1.0, 4.0)
        traj, report = local_existence(u0, b0, 0.05, 6, 4.0, self.spec, 1e-12, 30)
        assert report.time == 0.05
        assert len(report.attempts) == 1
        assert traj.times[-1] == pytest.approx(0.05)

    def test_smallness_threshold(self):
        grid = make_grid(2, 16)
        part = build_partition(grid)
        trials = [random_mhd_data(grid, np.random.default_rng(15), 1.0, 1.0, 4.0)]
        report = calibrate_smallness(trials, [1e-4, 1e3], 0.05, 5, 4.0, self.spec, 1e-10, 10, part)
        assert report.epsilon0 == 1e-4
        assert report.rows[-1]["contracts"] == 0.0
