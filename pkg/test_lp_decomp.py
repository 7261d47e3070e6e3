#!/usr/bin/env python3
# test_lp_decomp.py

import numpy as np
import pytest

from lp_decomp import (active_bands, band_decompose, bernstein_ratio, build_partition, chi_profile,
                       default_band_range, delta_j, is_band_resolved, partition_defect, phi_profile, s_j)
from spectral_core import ScalarField, make_grid, random_scalar_field


@pytest.fixture
def grid():
    return make_grid(2, 64)


@pytest.fixture
def part(grid):
    return build_partition(grid)


def test_profiles():
    assert chi_profile(0.5) == 1.0
    assert chi_profile(4.0 / 3.0) == 0.0
    assert phi_profile(0.7) == 0.0
    assert phi_profile(8.0 / 3.0) == 0.0
    r = np.linspace(0.8, 2.6, 50)
    assert np.all(phi_profile(r) > 0)


def test_default_band_range():
    assert default_band_range(128) == (-2, 4)
    assert default_band_range(64) == (-2, 3)


def test_partition_identities(part):
    defect = partition_defect(part)
    assert defect["inhomogeneous_unity"] <= 1e-12
    assert defect["homogeneous_unity"] <= 1e-12
    assert defect["orthogonality"] == 0.0


def test_top_band_must_fit_dealiased_disk(grid):
    with pytest.raises(ValueError, match="beyond the dealiased radius"):
        build_partition(grid, j_max=4)


def test_bands_sum_back_to_resolved_field(grid, part):
    rng = np.random.default_rng(3)
    f = random_scalar_field(grid, rng, 1.0, 12.0, -1.0)
    assert is_band_resolved(f, part)
    np.testing.assert_allclose(band_decompose(f.coeffs, part).sum(axis=0), f.coeffs, atol=1e-14)


def test_far_bands_are_orthogonal(grid, part):
    rng = np.random.default_rng(4)
    f = random_scalar_field(grid, rng, 1.0, 20.0)
    for j in part.bands:
        for k in part.bands:
            if abs(j - k) >= 2:
                twice = delta_j(delta_j(f, j, part), k, part)
                assert np.max(np.abs(twice.coeffs)) == 0.0


def test_low_pass_plus_band_is_next_low_pass(grid, part):
    rng = np.random.default_rng(5)
    f = random_scalar_field(grid, rng, 1.0, 12.0)
    np.testing.assert_allclose((s_j(f, 1, part) + delta_j(f, 1, part)).coeffs, s_j(f, 2, part).coeffs,
                               atol=1e-14)


def test_bernstein_ratio_in_annulus(grid, part):
    rng = np.random.default_rng(6)
    f = random_scalar_field(grid, rng, 1.0, 20.0)
    for j in active_bands(f, part):
        assert 0.75 <= bernstein_ratio(f, j, part, 2.0) / 2.0 ** j <= 8.0 / 3.0


def test_mean_is_rejected(grid, part):
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[0, 0] = 1.0
    coeffs[1, 0] = coeffs[-1, 0] = 0.5
    with pytest.raises(ValueError, match="not mean-free"):
        delta_j(ScalarField(grid=grid, coeffs=coeffs), 0, part)


def test_band_index_out_of_range(grid, part):
    f = random_scalar_field(grid, np.random.default_rng(1))
    with pytest.raises(ValueError, match="outside partition range"):
        delta_j(f, part.j_max + 1, part)
