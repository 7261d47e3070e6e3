#!/usr/bin/env python3
# test_mhd_core.py

import math

import numpy as np
import pytest

from hypotheses import HypothesisError
from lp_decomp import build_partition
from mhd_core import (CFLViolation, ExponentialInterpolator, MHDState, band_decay_calibration, band_decay_check,
                      cancellation_residual, cfl_limit, energy, energy_balance, geometric_mesh, heat_lorentz_check,
                      heat_propagate, march, mild_residual, nonlinear_rhs, orszag_tang, picard_solve,
                      random_mhd_data, taylor_green, temporal_order, weighted_decay_check)
from norm_suite import BesovSpec
from spectral_core import VectorField, gradient, make_grid, random_scalar_field


def zero_field(grid):
    return VectorField(grid=grid, coeffs=np.zeros((grid.dim,) + grid.shape, dtype=complex))


@pytest.fixture
def grid():
    return make_grid(2, 32)


@pytest.fixture
def ot_state(grid):
    u, b = orszag_tang(grid)
    return MHDState(u=u, b=b)


def test_state_rejects_compressible_field(grid):
    f = random_scalar_field(grid, np.random.default_rng(1))
    with pytest.raises(ValueError, match="u is not divergence-free"):
        MHDState(u=gradient(f), b=zero_field(grid))


def test_taylor_green_is_a_steady_euler_flow(grid):
    du, db = nonlinear_rhs(MHDState(u=taylor_green(grid), b=zero_field(grid)))
    assert np.max(np.abs(du.coeffs)) < 1e-13
    assert np.max(np.abs(db.coeffs)) == 0.0


def test_taylor_green_energy_decays_exponentially(grid):
    state = MHDState(u=taylor_green(grid), b=zero_field(grid))
    traj = march(state, T=0.1, dt=0.01, sample_every=5)
    e0, e1 = energy(traj.u[0], traj.b[0]), energy(traj.u[-1], traj.b[-1])
    assert e1 == pytest.approx(e0 * math.exp(-4 * 0.1), rel=1e-10)
    assert energy_balance(traj).passed


def test_orszag_tang_energy_balance(ot_state):
    traj = march(ot_state, T=0.05, dt=1e-3, sample_every=10)
    report = energy_balance(traj)
    assert report.max_abs_drift <= 1e-5
    assert report.max_cancellation <= 1e-12
    assert report.passed
    np.testing.assert_allclose(traj.times, np.linspace(0.0, 0.05, 6))


def test_march_keeps_fields_solenoidal(ot_state):
    traj = march(ot_state, T=0.02, dt=1e-3, sample_every=5)
    for state in traj.states:
        assert isinstance(state, MHDState)


def test_field_series_norms(grid):
    traj = march(MHDState(u=taylor_green(grid), b=zero_field(grid)), T=0.02, dt=1e-3, sample_every=10)
    series = traj.u_series()
    l2 = series.norm_series()
    assert l2.shape == (3,)
    np.testing.assert_allclose(l2, l2[0] * np.exp(-2 * traj.times), rtol=1e-10)
    besov = series.norm_series(BesovSpec(s=0.0, p=2.0, r=2.0))
    assert np.all(besov > 0)


def test_cfl_violation(ot_state):
    assert cfl_limit(ot_state) < 0.2
    with pytest.raises(CFLViolation, match="exceeds CFL limit"):
        march(ot_state, T=0.4, dt=0.2)


def test_heat_propagate_rejects_negative_time(ot_state):
    with pytest.raises(ValueError, match="dt >= 0"):
        heat_propagate(ot_state.u, -0.1)


def test_cancellation_of_random_data(grid):
    u, b = random_mhd_data(grid, np.random.default_rng(2), 1.0, 1.0, 8.0, 0.0)
    assert cancellation_residual(u.coeffs, b.coeffs, grid) <= 1e-12


def test_equal_fields_have_no_nonlinear_tendency(grid):
    u, _ = random_mhd_data(grid, np.random.default_rng(10), 1.0, 1.0, 6.0)
    du, db = nonlinear_rhs(MHDState(u=u, b=u))
    scale = np.max(np.abs(u.coeffs))
    assert np.max(np.abs(db.coeffs)) <= 1e-13 * scale
    assert np.max(np.abs(du.coeffs)) <= 1e-13 * scale


def test_equal_fields_stay_equal_under_heat_flow(grid):
    u, _ = random_mhd_data(grid, np.random.default_rng(11), 1.0, 1.0, 6.0)
    traj = march(MHDState(u=u, b=u), T=0.05, dt=1e-3, sample_every=25)
    scale = np.max(np.abs(u.coeffs))
    np.testing.assert_allclose(traj.u, traj.b, rtol=0, atol=1e-13 * scale)
    np.testing.assert_allclose(traj.u[-1], heat_propagate(u, 0.05).coeffs, rtol=0, atol=1e-12 * scale)


def test_heat_semigroup(grid):
    f = random_scalar_field(grid, np.random.default_rng(12), 1.0, 8.0)
    np.testing.assert_array_equal(heat_propagate(f, 0.0).coeffs, f.coeffs)
    np.testing.assert_allclose(heat_propagate(heat_propagate(f, 0.03), 0.05).coeffs,
                               heat_propagate(f, 0.08).coeffs, rtol=1e-13, atol=1e-16)


def test_energy_inequality_in_three_dimensions():
    grid = make_grid(3, 16)
    u, b = random_mhd_data(grid, np.random.default_rng(13), 1.0, 1.0, 4.0)
    report = energy_balance(march(MHDState(u=u, b=b), T=0.02, dt=1e-3, sample_every=10))
    assert report.dim == 3
    assert report.max_abs_drift <= 1e-5
    assert report.passed


def test_temporal_order():
    u, b = orszag_tang(make_grid(2, 16))
    result = temporal_order(MHDState(u=u, b=b), 0.05, [0.01, 0.005])
    assert result["order"][0] > 3.0


def test_temporal_order_is_four():
    u, b = orszag_tang(make_grid(2, 16), 2.0)
    result = temporal_order(MHDState(u=u, b=b), 0.2, [4e-3, 2e-3, 1e-3])
    assert len(result["order"]) == 2
    for order in result["order"]:
        assert abs(order - 4.0) <= 0.3


class TestPicard:
    spec = BesovSpec(s=0.0, p=2.0, r=2.0)

    def test_zero_data_converges_at_once(self, grid):
        traj, report = picard_solve(zero_field(grid), zero_field(grid), 0.1, 5, 4.0, self.spec, 1e-12, 10)
        assert report.status == "converged"
        assert report.iterations == 1
        assert report.within_ball
        assert np.all(traj.u == 0)

    def test_small_data_matches_time_marching(self):
        grid = make_grid(2, 16)
        u0, b0 = random_mhd_data(grid, np.random.default_rng(3), 1e-8, 1.0, 4.0)
        traj, report = picard_solve(u0, b0, 0.1, 101, 4.0, self.spec, 1e-16, 20)
        assert report.status == "converged"
        assert report.within_ball
        assert all(f < 1 for f in report.contraction_factors)
        marched = march(MHDState(u=u0, b=b0), T=0.1, dt=1e-3, sample_every=1, track_cancellation=False)
        scale = max(np.max(np.abs(u0.coeffs)), np.max(np.abs(b0.coeffs)))
        assert np.max(np.abs(traj.stacked()[-1] - marched.stacked()[-1])) <= 1e-6 * scale
        assert mild_residual(traj, 4.0, self.spec) <= 1e-12

    def test_q_outside_range(self, grid):
        with pytest.raises(HypothesisError, match="mild_solution"):
            picard_solve(zero_field(grid), zero_field(grid), 0.1, 5, 2.0, self.spec, 1e-8, 10)

    def test_residual_sees_a_corrupted_sample(self):
        grid = make_grid(2, 16)
        u0, b0 = random_mhd_data(grid, np.random.default_rng(14), 1e-4, 1.0, 4.0)
        traj, report = picard_solve(u0, b0, 0.1, 21, 4.0, self.spec, 1e-14, 20)
        assert report.status == "converged"
        clean = mild_residual(traj, 4.0, self.spec)
        u = traj.u.copy()
        u[10] *= 1.1
        corrupted = mild_residual(traj.model_copy(update={"u": u}), 4.0, self.spec)
        assert corrupted > 0
        assert corrupted >= 10 * clean


class TestHeatMonitors:
    def test_band_decay_window_for_l2(self):
        grid = make_grid(2, 64)
        part = build_partition(grid)
        f0 = random_scalar_field(grid, np.random.default_rng(4), 1.0, 12.0)
        report = band_decay_check(f0, [0.0, 0.01, 0.05, 0.1], 2.0, part)
        assert report.passed
        assert (3 / 4) ** 2 <= report.values["min_rate"] <= report.values["max_rate"] <= (8 / 3) ** 2

    def test_band_decay_needs_band_rates_away_from_l2(self):
        grid = make_grid(2, 32)
        part = build_partition(grid)
        f0 = random_scalar_field(grid, np.random.default_rng(5), 1.0, 8.0)
        with pytest.raises(ValueError, match="one calibrated rate per band"):
            band_decay_check(f0, [0.0, 0.01], 4.0, part)
        with pytest.raises(ValueError, match="band rates"):
            band_decay_check(f0, [0.0, 0.01], 4.0, part, [0.5])

    def test_band_rates_fitted_per_band(self):
        grid = make_grid(2, 32)
        part = build_partition(grid)
        rng = np.random.default_rng(6)
        bank = [random_scalar_field(grid, rng, 1.0, 8.0, slope) for slope in (-1.0, 0.0)]
        times = [0.0, 0.005, 0.02, 0.05]
        rates, fits = band_decay_calibration(bank, bank, times, 4.0, part, threads=1)
        assert rates.shape == (part.n_bands,)
        assert len(fits) == int(np.sum(np.isfinite(rates))) > 1
        assert all(fit.passed and fit.kind == "lower" and fit.drift == 0.0 for fit in fits)
        assert all(fit.lemma.startswith("band_decay_p4_j") for fit in fits)
        assert band_decay_check(bank[0], times, 4.0, part, rates).passed

        # one band held to a rate it never reaches
        resolved = np.flatnonzero(np.isfinite(rates))
        strict = rates.copy()
        strict[resolved[0]] = 10 * band_decay_check(bank[0], times, 4.0, part, rates).values["max_rate"]
        assert not band_decay_check(bank[0], times, 4.0, part, strict).passed

    def test_band_rate_preset(self):
        grid = make_grid(2, 32)
        part = build_partition(grid)
        bank = [random_scalar_field(grid, np.random.default_rng(7), 1.0, 8.0)]
        fitted, _ = band_decay_calibration(bank, bank, [0.0, 0.01], 4.0, part, threads=1)
        idx = int(np.flatnonzero(np.isfinite(fitted))[0])
        name = f"band_decay_p4_j{part.bands[idx]}"
        rates, fits = band_decay_calibration(bank, bank, [0.0, 0.01], 4.0, part, threads=1, presets={name: 1e6})
        assert rates[idx] == 1e6
        assert [fit.passed for fit in fits if fit.lemma == name] == [False]

    def test_geometric_mesh(self):
        nodes, weights = geometric_mesh(2.0, 50)
        assert nodes[-1] == pytest.approx(2.0)
        assert np.all(np.diff(nodes) > 0)
        assert weights.sum() == pytest.approx(2.0)

    def test_heat_lorentz_ratio_is_finite(self, grid):
        f0 = random_scalar_field(grid, np.random.default_rng(5), 1.0, 8.0)
        report = heat_lorentz_check(f0, 4.0, 4.0, 1.0, n_mesh=100)
        assert 0 < report.values["ratio"] < math.inf
        assert report.passed

    def test_heat_lorentz_indices(self, grid):
        f0 = random_scalar_field(grid, np.random.default_rng(5))
        with pytest.raises(HypothesisError, match="heat_lorentz"):
            heat_lorentz_check(f0, 4.0, 3.0, 1.0)

    def test_weighted_decay_needs_p_above_dimension(self, ot_state):
        traj = march(ot_state, T=0.01, dt=1e-3, sample_every=5)
        with pytest.raises(HypothesisError, match="weighted_decay"):
            weighted_decay_check(traj, 1.5, 0)


class TestInterpolator:
    def test_reproduces_samples(self, ot_state):
        traj = march(ot_state, T=0.02, dt=1e-3, sample_every=10)
        interp = ExponentialInterpolator(traj)
        for i, t in enumerate(traj.times):
            np.testing.assert_array_equal(interp.at(t), traj.stacked()[i])
        assert interp.covers(0.0, 0.02)
        assert not interp.covers(0.0, 0.03)

    def test_between_samples(self):
        grid = make_grid(2, 16)
        u, b = orszag_tang(grid)
        state = MHDState(u=u, b=b)
        coarse = march(state, T=0.04, dt=1e-3, sample_every=10, track_cancellation=False)
        fine = march(state, T=0.04, dt=1e-3, sample_every=5, track_cancellation=False)
        estimate = ExponentialInterpolator(coarse).at(0.015)
        exact = fine.stacked()[3]
        assert fine.times[3] == pytest.approx(0.015)
        assert np.max(np.abs(estimate - exact)) <= 1e-3 * np.max(np.abs(exact))

    def test_outside_interval(self, ot_state):
        traj = march(ot_state, T=0.01, dt=1e-3, sample_every=5)
        with pytest.raises(ValueError, match="outside the stored interval"):
            ExponentialInterpolator(traj).at(0.5)
