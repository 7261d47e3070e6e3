"""
Desk-scale surrogates of the global and local existence statements.

Calderón splitting of large data into a finite-energy part and a small
critical-Besov part, the MHD-like system for the finite-energy part, the
trilinear form and its bounds, weak-strong stability and the 2D growth monitor.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.integrate import cumulative_trapezoid, trapezoid

from calibration import EstimateReport, calibrate_and_assert, map_bank
from hypotheses import (gronwall_indices, growth_indices, require, trilinear_indices,
                        weak_strong_indices)
from lp_decomp import DyadicPartition, band_lp_norms
from mhd_core import (ExponentialInterpolator, FieldSeries, MHDState, SolverError, Tendency, Trajectory,
                      dissipation, energy, flux_divergence, march, mild_residual, outer,
                      physical_masked, picard_solve, scale_to_norm)
from norm_suite import BesovSpec, LorentzSpec, band_weights, lorentz_norm, lr_sum
from spectral_core import (Grid, VectorField, lp_norm_values, make_grid, prolong, random_solenoidal_field,
                           restrict, to_physical)

logger = logging.getLogger("rich")


# ---------------------------------------------------------------------------
# Shared norm helpers on raw coefficient arrays

def coeff_besov_norm(coeffs: np.ndarray, spec: BesovSpec, part: DyadicPartition) -> float:
    """Ḃ^s_{p,r} norm of stacked components (any leading shape), components summed."""
    flat = coeffs.reshape((-1,) + part.grid.shape)
    w = band_weights(part, spec.s)
    return float(sum(lr_sum(band_lp_norms(c, part, spec.p) * w, spec.r) for c in flat))


def _l2_sq(x: np.ndarray) -> float:
    return float(np.sum(np.abs(x) ** 2))


def _grad_sq(x: np.ndarray, grid: Grid) -> float:
    return float(np.sum(grid.k2 * np.abs(x) ** 2))


def _vector_lp(coeffs: np.ndarray, grid: Grid, p: float) -> float:
    values = to_physical(coeffs, axes=tuple(range(-grid.dim, 0)))
    return lp_norm_values(np.sqrt(np.sum(values ** 2, axis=0)), p)


def _pair_lp(u: np.ndarray, b: np.ndarray, grid: Grid, p: float) -> float:
    return _vector_lp(u, grid, p) + _vector_lp(b, grid, p)


# ---------------------------------------------------------------------------
# Trilinear form

def trilinear_density(a: np.ndarray, b: np.ndarray, c: np.ndarray, grid: Grid) -> float:
    """∫(a·∇b)·c dx under the normalized measure, for coefficient arrays of shape (dim, ...)."""
    A = physical_masked(a, grid)
    C = physical_masked(c, grid)
    grad_b = to_physical(1j * grid.k[None] * (b * grid.dealias_mask)[:, None], axes=tuple(range(-grid.dim, 0)))
    return float(np.mean(np.einsum("j...,ij...,i...->...", A, grad_b, C)))


def _check_mesh(*series: FieldSeries) -> None:
    first = series[0]
    for other in series[1:]:
        if other.grid != first.grid:
            raise ValueError("series live on different grids")
        if len(other.times) != len(first.times) or not np.allclose(other.times, first.times, rtol=0, atol=1e-12):
            raise ValueError("series are sampled on different time meshes")


def _integrate_to(values: np.ndarray, times: np.ndarray, t: float) -> float:
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} outside the mesh [{times[0]}, {times[-1]}]")
    keep = times <= t + 1e-12
    tt, vv = times[keep], values[keep]
    if tt[-1] < t - 1e-12:
        tt = np.append(tt, t)
        vv = np.append(vv, np.interp(t, times, values))
    return float(trapezoid(vv, x=tt)) if len(tt) > 1 else 0.0


def trilinear_form(a: FieldSeries, b: FieldSeries, c: FieldSeries, t: float) -> float:
    """T(a,b,c) = ∫₀ᵗ∫(a·∇b)·c dx ds with trapezoid time quadrature."""
    _check_mesh(a, b, c)
    density = np.array([trilinear_density(a.coeffs[i], b.coeffs[i], c.coeffs[i], a.grid)
                        for i in range(len(a.times))])
    return _integrate_to(density, np.asarray(a.times, dtype=float), t)


def magnetic_cancellation_identities(traj: Trajectory) -> Dict[str, float]:
    """Max over samples of the three trilinear cancellations used in the energy estimates."""
    grid = traj.grid
    out = {"transport_u": 0.0, "transport_b": 0.0, "coupled": 0.0}
    for u, b in zip(traj.u, traj.b):
        scale = max(_l2_sq(u) + _l2_sq(b), 1e-300) * max(math.sqrt(_grad_sq(u, grid) + _grad_sq(b, grid)), 1.0)
        out["transport_u"] = max(out["transport_u"], abs(trilinear_density(u, u, u, grid)) / scale)
        out["transport_b"] = max(out["transport_b"], abs(trilinear_density(u, b, b, grid)) / scale)
        coupled = trilinear_density(b, b, u, grid) + trilinear_density(b, u, b, grid)
        out["coupled"] = max(out["coupled"], abs(coupled) / scale)
    return out


class TrilinearSample(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a: FieldSeries
    b: FieldSeries
    c: FieldSeries


def heat_series(field: VectorField, times: np.ndarray) -> FieldSeries:
    coeffs = np.array([field.coeffs * np.exp(-field.grid.k2 * t) for t in times])
    return FieldSeries(grid=field.grid, times=np.asarray(times, dtype=float), coeffs=coeffs)


def trilinear_bank(grid: Grid, rng: np.random.Generator, size: int, n_times: int = 9, T: float = 0.2,
                   slope_range: Tuple[float, float] = (-3.0, 0.0)) -> List[TrilinearSample]:
    """Triples of heat flows started from random solenoidal fields."""
    times = np.linspace(0.0, T, n_times)
    k_max = grid.n / 6
    bank = []
    for _ in range(size):
        fields = [random_solenoidal_field(grid, rng, 1.0, k_max, float(rng.uniform(*slope_range)),
                                          1.0) for _ in range(3)]
        bank.append(TrilinearSample(**{name: heat_series(f, times) for name, f in zip("abc", fields)}))
    return bank


def _trilinear_pieces(sample: TrilinearSample, r: float, sigma: float, part: DyadicPartition) -> Dict[str, float]:
    grid = sample.a.grid
    times = np.asarray(sample.a.times, dtype=float)
    spec = BesovSpec(s=grid.dim / r + 2 / sigma - 1, p=r, r=sigma)
    a_l2 = np.array([_l2_sq(x) for x in sample.a.coeffs])
    b_l2 = np.array([_l2_sq(x) for x in sample.b.coeffs])
    c_b = np.array([coeff_besov_norm(x, spec, part) for x in sample.c.coeffs]) ** sigma
    return {
        "a_inf": math.sqrt(a_l2.max()), "b_inf": math.sqrt(b_l2.max()),
        "a_grad": math.sqrt(trapezoid([_grad_sq(x, grid) for x in sample.a.coeffs], x=times)),
        "b_grad": math.sqrt(trapezoid([_grad_sq(x, grid) for x in sample.b.coeffs], x=times)),
        "c_norm": float(trapezoid(c_b, x=times)) ** (1 / sigma),
        "ab_weighted": float(trapezoid((a_l2 + b_l2) * c_b, x=times)),
        "aa_weighted": float(trapezoid(a_l2 * c_b, x=times)),
        "T": trilinear_form(sample.a, sample.b, sample.c, times[-1]),
        "T_aac": trilinear_form(sample.a, sample.a, sample.c, times[-1]),
    }


def _safe_ratio(lhs: float, rhs: float) -> float:
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return abs(lhs) / rhs


def trilinear_ratios(sample: TrilinearSample, r: float, sigma: float, part: DyadicPartition,
                     eps: float = 1.0) -> Dict[str, float]:
    """|T| over the product bound and the two ε-split bounds."""
    q = _trilinear_pieces(sample, r, sigma, part)
    A, Ag, B, Bg, C = q["a_inf"], q["a_grad"], q["b_inf"], q["b_grad"], q["c_norm"]
    product = C * (A ** (1 / sigma) * Ag ** (1 - 1 / sigma) * B ** (1 / sigma) * Bg ** (1 - 1 / sigma)
                   + Ag * B ** (2 / sigma) * Bg ** (1 - 2 / sigma)
                   + A ** (2 / sigma) * Ag ** (1 - 2 / sigma) * Bg)
    split = eps * (Ag ** 2 + Bg ** 2) + q["ab_weighted"] / eps
    split_aac = eps * Ag ** 2 + q["aa_weighted"] / eps
    return {"product": _safe_ratio(q["T"], product), "split": _safe_ratio(q["T"], split),
            "split_aac": _safe_ratio(q["T_aac"], split_aac)}


def trilinear_bound_check(bank_a: Sequence[TrilinearSample], bank_b: Sequence[TrilinearSample], r: float,
                          sigma: float, part: DyadicPartition, eps: float = 1.0,
                          presets: Optional[Dict[str, float]] = None,
                          threads: Optional[int] = None) -> List[EstimateReport]:
    """Calibrate/assert the product form and both ε-split forms of the trilinear bound."""
    require("trilinear_integral_bound", trilinear_indices(part.grid.dim, r, sigma))
    presets = presets or {}
    indices = {"r": r, "sigma": sigma, "eps": eps}
    reports = []
    for form in ("product", "split", "split_aac"):
        reports.append(calibrate_and_assert(
            f"trilinear_{form}", indices, lambda s, form=form: trilinear_ratios(s, r, sigma, part, eps)[form],
            bank_a, bank_b, preset=presets.get(f"trilinear_{form}"), threads=threads))
    return reports


# ---------------------------------------------------------------------------
# Calderón splitting and the MHD-like system

class SplitData(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    v0: VectorField
    g0: VectorField
    w0: VectorField
    h0: VectorField
    cut_band: Optional[int]
    tail_norm: float


def calderon_split(u0: VectorField, b0: VectorField, spec_bar: BesovSpec, threshold: float,
                   part: DyadicPartition) -> SplitData:
    """Keep bands j >= J in (w0, h0) with J minimal so their Besov norm stays under ``threshold``."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    MHDState(u=u0, b=b0)
    grid = u0.grid
    total = coeff_besov_norm(np.stack([u0.coeffs, b0.coeffs]), spec_bar, part)
    if total <= threshold:
        zero = np.zeros_like(u0.coeffs)
        return SplitData(v0=VectorField(grid=grid, coeffs=zero), g0=VectorField(grid=grid, coeffs=zero.copy()),
                         w0=u0, h0=b0, cut_band=None, tail_norm=total)
    w = band_weights(part, spec_bar.s)
    flat = np.stack([u0.coeffs, b0.coeffs]).reshape((-1,) + grid.shape)
    weighted = np.array([band_lp_norms(c, part, spec_bar.p) * w for c in flat])
    cut = None
    for idx, j in enumerate(part.bands):
        tail = float(np.sum(lr_sum(weighted[:, idx:], spec_bar.r)))
        if tail <= threshold:
            cut, tail_norm = j, tail
            break
    if cut is None:
        raise ValueError(f"threshold {threshold:g} unreachable: the top band alone has norm "
                         f"{float(np.sum(lr_sum(weighted[:, -1:], spec_bar.r))):.3e}")
    high = part.phi[cut - part.j_min:].sum(axis=0)
    w0, h0 = u0.coeffs * high, b0.coeffs * high
    logger.info(f"Calderón split at band J={cut}: tail norm {tail_norm:.3e} <= {threshold:g}")
    return SplitData(v0=VectorField(grid=grid, coeffs=u0.coeffs - w0), g0=VectorField(grid=grid, coeffs=b0.coeffs - h0),
                     w0=VectorField(grid=grid, coeffs=w0), h0=VectorField(grid=grid, coeffs=h0),
                     cut_band=cut, tail_norm=tail_norm)


def mhd_like_tendency(grid: Grid, background: ExponentialInterpolator) -> Tendency:
    """Couplings of (v, g) with themselves and with the known (w, h)."""
    def rhs(t: float, v: np.ndarray, g: np.ndarray):
        wh = background.at(t)
        V, G = physical_masked(v, grid), physical_masked(g, grid)
        W, H = physical_masked(wh[0], grid), physical_masked(wh[1], grid)
        dv = flux_divergence(outer(G, G) + outer(G, H) + outer(H, G)
                             - outer(V, V) - outer(V, W) - outer(W, V), grid)
        dg = flux_divergence(outer(G, V) + outer(H, V) + outer(G, W)
                             - outer(V, G) - outer(V, H) - outer(W, G), grid)
        speed = float(np.max(np.sqrt(np.sum((V + W) ** 2, axis=0)) + np.sqrt(np.sum((G + H) ** 2, axis=0))))
        return dv, dg, speed
    return rhs


def solve_mhd_like(v0: VectorField, g0: VectorField, wh: Trajectory, T: float, dt: float,
                   sample_every: Optional[int] = None) -> Trajectory:
    """March (v, g) with (w, h) taken from a stored trajectory."""
    state = MHDState(u=v0, b=g0, t=float(wh.times[0]))
    background = ExponentialInterpolator(wh)
    if not background.covers(state.t, state.t + T):
        raise ValueError(f"(w, h) trajectory covers [{wh.times[0]}, {wh.times[-1]}], not [0, {T}]")
    return march(state, T, dt, sample_every, rhs=mhd_like_tendency(v0.grid, background))


def recombine(vg: Trajectory, wh: Trajectory) -> Trajectory:
    if vg.grid != wh.grid or len(vg.times) != len(wh.times) or not np.allclose(vg.times, wh.times, atol=1e-12):
        raise ValueError("(v, g) and (w, h) are not sampled on one mesh")
    return Trajectory(grid=vg.grid, times=vg.times, u=vg.u + wh.u, b=vg.b + wh.b)


class SuperpositionReport(BaseModel):
    combined_residual: float
    direct_residual: float
    ratio: float
    terminal_gap: float
    passed: bool


def superposition_residual(vg: Trajectory, wh: Trajectory, direct: Trajectory, q: float, spec: BesovSpec,
                           part: DyadicPartition, factor: float = 5.0) -> SuperpositionReport:
    """Mild residual of (v + w, g + h) against the residual of a direct solve on the same mesh."""
    combined = recombine(vg, wh)
    res_c = mild_residual(combined, q, spec, part)
    res_d = mild_residual(direct, q, spec, part)
    gap = math.sqrt(_l2_sq(combined.u[-1] - direct.u[-1]) + _l2_sq(combined.b[-1] - direct.b[-1]))
    ratio = _safe_ratio(res_c, res_d) if res_d > 0 else (0.0 if res_c == 0 else math.inf)
    logger.info(f"superposition: combined residual {res_c:.3e}, direct {res_d:.3e}, terminal gap {gap:.3e}")
    return SuperpositionReport(combined_residual=res_c, direct_residual=res_d, ratio=ratio,
                               terminal_gap=gap, passed=bool(res_c <= factor * max(res_d, 1e-300) or res_c == 0))


# ---------------------------------------------------------------------------
# X-norm

class XNormReport(BaseModel):
    x1: float
    x2: float
    x3: float
    x4: float

    @property
    def total(self) -> float:
        return self.x1 + self.x2 + self.x3 + self.x4


def sample_cells(times: np.ndarray) -> np.ndarray:
    """Time measure attached to each sample (half of each adjacent interval)."""
    edges = np.concatenate([[times[0]], 0.5 * (times[1:] + times[:-1]), [times[-1]]])
    return np.diff(edges)


def x_norm(traj: Trajectory, r: float) -> XNormReport:
    """sup t^{1/4}‖·‖₄ + L⁴L⁴ + L²Ḣ¹ + L^{2r,2}L^{2r/(r−1)} of the (u, b) pair."""
    if r <= 1:
        raise ValueError(f"need r > 1, got {r}")
    grid = traj.grid
    times = traj.times - traj.times[0]
    l4 = np.array([_pair_lp(u, b, grid, 4.0) for u, b in zip(traj.u, traj.b)])
    grad = np.array([math.sqrt(_grad_sq(u, grid)) + math.sqrt(_grad_sq(b, grid)) for u, b in zip(traj.u, traj.b)])
    lorentz_q = 2 * r / (r - 1)
    lq = np.array([_pair_lp(u, b, grid, lorentz_q) for u, b in zip(traj.u, traj.b)])
    return XNormReport(
        x1=float(np.max(times ** 0.25 * l4)),
        x2=float(trapezoid(l4 ** 4, x=times) ** 0.25),
        x3=float(math.sqrt(trapezoid(grad ** 2, x=times))),
        x4=lorentz_norm(lq, sample_cells(times), LorentzSpec(p=2 * r, q=2.0)),
    )


def heat_trajectory(u0: VectorField, b0: VectorField, times: np.ndarray) -> Trajectory:
    return Trajectory(grid=u0.grid, times=np.asarray(times, dtype=float),
                      u=heat_series(u0, times).coeffs, b=heat_series(b0, times).coeffs)


def x_norm_heat_check(bank_a: Sequence[Tuple[VectorField, VectorField]],
                      bank_b: Sequence[Tuple[VectorField, VectorField]], r: float, T: float,
                      n_times: int = 48, preset: Optional[float] = None,
                      threads: Optional[int] = None) -> EstimateReport:
    """Free heat flow of L² data has X-norm bounded by a constant times the data norm."""
    times = np.concatenate([[0.0], T * np.geomspace(1e-4, 1.0, n_times - 1)])

    def ratio(pair):
        u0, b0 = pair
        base = math.sqrt(_l2_sq(u0.coeffs)) + math.sqrt(_l2_sq(b0.coeffs))
        return _safe_ratio(x_norm(heat_trajectory(u0, b0, times), r).total, base)

    return calibrate_and_assert("x_norm_heat", {"r": r, "T": T}, ratio, bank_a, bank_b,
                                preset=preset, threads=threads)


# ---------------------------------------------------------------------------
# Weak-strong stability

class WeakStrongReport(BaseModel):
    times: List[float]
    lhs: List[float]
    weight: List[float]
    initial_gap: float
    rate_needed: float
    rate: Optional[float]
    passed: bool


def energy_with_dissipation(traj: Trajectory) -> np.ndarray:
    """‖(u,b)(t)‖₂² + ∫₀ᵗ‖∇(u,b)‖₂² on the sample mesh."""
    grid = traj.grid
    e = np.array([energy(u, b) for u, b in zip(traj.u, traj.b)])
    d = np.array([dissipation(u, b, grid) for u, b in zip(traj.u, traj.b)])
    return e + cumulative_trapezoid(d, x=traj.times, initial=0.0)


def besov_weight(traj: Trajectory, spec: BesovSpec, r: float, part: DyadicPartition) -> np.ndarray:
    """∫₀ᵗ‖(u,b)‖^r in ``spec`` on the sample mesh."""
    values = np.array([coeff_besov_norm(np.stack([u, b]), spec, part) for u, b in zip(traj.u, traj.b)])
    return cumulative_trapezoid(values ** r, x=traj.times, initial=0.0)


def _rate_needed(lhs: np.ndarray, base: float, weight: np.ndarray) -> float:
    """Smallest c with lhs(t) <= exp(c W(t))·base at every sample."""
    needed = 0.0
    for value, w in zip(lhs, weight):
        if value <= base * (1 + 1e-12):
            continue
        if base == 0 or w <= 0:
            return math.inf
        needed = max(needed, math.log(value / base) / w)
    return needed


def weak_strong_gap(strong: Trajectory, weak: Trajectory, p: float, r: float, part: DyadicPartition,
                    rate: Optional[float] = None) -> WeakStrongReport:
    """Energy of the difference against the exponential envelope driven by the strong solution."""
    n = strong.grid.dim
    require("weak_strong", weak_strong_indices(n, p, r))
    if strong.grid != weak.grid or len(strong.times) != len(weak.times) \
            or not np.allclose(strong.times, weak.times, atol=1e-12):
        raise ValueError("strong and weak trajectories are not sampled on one mesh")
    diff = Trajectory(grid=strong.grid, times=strong.times, u=weak.u - strong.u, b=weak.b - strong.b)
    lhs = energy_with_dissipation(diff)
    base = float(lhs[0])
    weight = besov_weight(strong, BesovSpec(s=n / p + 2 / r - 1, p=p, r=r), r, part)
    needed = _rate_needed(lhs, base, weight)
    passed = bool(needed <= rate * (1 + 1e-12)) if rate is not None else math.isfinite(needed)
    return WeakStrongReport(times=[float(t) for t in strong.times], lhs=[float(x) for x in lhs],
                            weight=[float(x) for x in weight], initial_gap=base, rate_needed=needed,
                            rate=rate, passed=passed)


def weak_surrogate(u0: VectorField, b0: VectorField, coarse_n: int, T: float, dt: float,
                   sample_every: int, dt_factor: int = 2) -> Trajectory:
    """Coarser-grid, coarser-step run of the same data, prolonged back onto the data grid."""
    fine = u0.grid
    if sample_every % dt_factor:
        raise ValueError(f"sample_every={sample_every} is not a multiple of dt_factor={dt_factor}")
    coarse = make_grid(fine.dim, coarse_n)
    state = MHDState(u=restrict(u0, coarse), b=restrict(b0, coarse))
    run = march(state, T, dt * dt_factor, sample_every // dt_factor, track_cancellation=False)
    u = np.array([prolong(VectorField(grid=coarse, coeffs=x), fine).coeffs for x in run.u])
    b = np.array([prolong(VectorField(grid=coarse, coeffs=x), fine).coeffs for x in run.b])
    return Trajectory(grid=fine, times=run.times, u=u, b=b)


def band_perturbation(grid: Grid, rng: np.random.Generator, scale: float, k_min: float = 4.0,
                      k_max: float = 8.0) -> Tuple[VectorField, VectorField]:
    return (random_solenoidal_field(grid, rng, k_min, k_max, 0.0, scale),
            random_solenoidal_field(grid, rng, k_min, k_max, 0.0, scale))


# ---------------------------------------------------------------------------
# Energy bound for the MHD-like system

class GronwallReport(BaseModel):
    sup_ratio: float
    weight_total: float
    rate_needed: float
    sup_bound: float
    rate: float
    passed: bool


def gronwall_measures(vg: Trajectory, wh: Trajectory, p: float, r: float,
                      part: DyadicPartition) -> Tuple[float, float, float]:
    """(sup_t LHS/‖(v0,g0)‖², envelope rate needed, total Gronwall weight) of one split run.

    LHS(t) = ‖(v,g)(t)‖² + ∫₀ᵗ‖∇(v,g)‖², weighted by ∫‖(w,h)‖^r in Ḃ^{2/p+2/r−1}_{p,r}.
    """
    require("gronwall_energy", gronwall_indices(vg.grid.dim, p, r))
    if not np.allclose(vg.times, wh.times, atol=1e-12):
        raise ValueError("(v, g) and (w, h) are not sampled on one mesh")
    lhs = energy_with_dissipation(vg)
    base = float(lhs[0])
    weight = besov_weight(wh, BesovSpec(s=2 / p + 2 / r - 1, p=p, r=r), r, part)
    needed = _rate_needed(lhs, base, weight)
    sup_ratio = float(np.max(lhs) / base) if base > 0 else (0.0 if np.max(lhs) == 0 else math.inf)
    return sup_ratio, needed, float(weight[-1])


def gronwall_energy_check(vg: Trajectory, wh: Trajectory, p: float, r: float, part: DyadicPartition,
                          sup_bound: float, rate: float) -> GronwallReport:
    """(v, g) energy against C_cal·‖(v0,g0)‖² and against exp(c ∫‖(w,h)‖^r) times its initial value."""
    sup_ratio, needed, weight = gronwall_measures(vg, wh, p, r, part)
    passed = bool(sup_ratio <= sup_bound * (1 + 1e-12) and needed <= rate * (1 + 1e-12))
    log = logger.info if passed else logger.warning
    log(f"Gronwall check: sup ratio {sup_ratio:.4f} (C_cal {sup_bound:.4f}), weight {weight:.3e}, "
        f"rate needed {needed:.3e} (c {rate:.3e})")
    return GronwallReport(sup_ratio=sup_ratio, weight_total=weight, rate_needed=needed,
                          sup_bound=sup_bound, rate=rate, passed=passed)


def gronwall_calibration(bank_a: Sequence[Tuple[VectorField, VectorField]],
                         bank_b: Sequence[Tuple[VectorField, VectorField]], spec_bar: BesovSpec,
                         threshold: float, p: float, r: float, part: DyadicPartition, T: float, dt: float,
                         sample_every: int, presets: Optional[Dict[str, float]] = None,
                         threads: Optional[int] = None) -> List[EstimateReport]:
    """Fit C_cal for the energy bound and the envelope rate on split runs of bank A; assert both on bank B."""
    require("gronwall_energy", gronwall_indices(part.grid.dim, p, r))
    presets = presets or {}

    def measure(data):
        run = calderon_pipeline(data[0], data[1], spec_bar, threshold, part, T, dt, sample_every)
        return gronwall_measures(run.vg, run.wh, p, r, part)

    measured_a = map_bank(measure, bank_a, threads)
    measured_b = map_bank(measure, bank_b, threads)
    indices = {"p": p, "r": r, "threshold": threshold, "T": T}
    return [calibrate_and_assert(name, indices, lambda m, i=i: m[i], measured_a, measured_b,
                                 preset=presets.get(name), threads=1)
            for i, name in ((0, "gronwall_sup"), (1, "gronwall_rate"))]


# ---------------------------------------------------------------------------
# Calderón pipeline and growth monitor

class CalderonRun(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    split: SplitData
    wh: Trajectory
    vg: Trajectory

    def combined(self) -> Trajectory:
        return recombine(self.vg, self.wh)


def calderon_pipeline(u0: VectorField, b0: VectorField, spec_bar: BesovSpec, threshold: float,
                      part: DyadicPartition, T: float, dt: float, sample_every: int) -> CalderonRun:
    split = calderon_split(u0, b0, spec_bar, threshold, part)
    wh = march(MHDState(u=split.w0, b=split.h0), T, dt, sample_every)
    vg = solve_mhd_like(split.v0, split.g0, wh, T, dt, sample_every)
    return CalderonRun(split=split, wh=wh, vg=vg)


class GrowthRow(BaseModel):
    scale: float
    data_norm: float
    sup_norm: float


class GrowthReport(BaseModel):
    rows: List[GrowthRow]
    slopes: List[float]
    slopes_nondecreasing: bool
    passed: bool


def growth_monitor(data_scales: Sequence[float], u0: VectorField, b0: VectorField, p: float, r: float,
                   part: DyadicPartition, T: float, dt: float, sample_every: int,
                   threshold: float) -> GrowthReport:
    """sup_t Besov norm of the Calderón solution against the data norm, one run per scale."""
    require("growth", growth_indices(u0.grid.dim, p, r))
    spec = BesovSpec(s=2 / p - 1, p=p, r=r)
    rows = []
    for scale in sorted(data_scales):
        u, b = scale_to_norm(u0, b0, scale, spec, part)
        try:
            run = calderon_pipeline(u, b, spec, threshold, part, T, dt, sample_every)
        except SolverError as e:
            raise SolverError(f"growth run at data scale {scale:g} failed: {e}", t=e.t, step=e.step) from e
        combined = run.combined()
        sup = max(coeff_besov_norm(np.stack([x, y]), spec, part) for x, y in zip(combined.u, combined.b))
        rows.append(GrowthRow(scale=scale, data_norm=coeff_besov_norm(np.stack([u.coeffs, b.coeffs]), spec, part),
                              sup_norm=sup))
        logger.info(f"growth: data norm {rows[-1].data_norm:.3e} -> sup norm {sup:.3e}")
    slopes = [math.log(b.sup_norm / a.sup_norm) / math.log(b.data_norm / a.data_norm)
              for a, b in zip(rows, rows[1:]) if a.sup_norm > 0 and b.data_norm != a.data_norm]
    return GrowthReport(rows=rows, slopes=slopes,
                        slopes_nondecreasing=bool(all(y >= x - 1e-9 for x, y in zip(slopes, slopes[1:]))),
                        passed=bool(all(math.isfinite(row.sup_norm) for row in rows)))


# ---------------------------------------------------------------------------
# Local existence and the smallness threshold

class LocalExistenceReport(BaseModel):
    time: Optional[float]
    attempts: List[Dict[str, float]]


def local_existence(u0: VectorField, b0: VectorField, T0: float, n_times: int, q: float, spec: BesovSpec,
                    tol: float, max_iter: int, part: Optional[DyadicPartition] = None,
                    max_halvings: int = 8) -> Tuple[Optional[Trajectory], LocalExistenceReport]:
    """Halve the horizon until the Picard iteration contracts."""
    T = T0
    attempts = []
    for _ in range(max_halvings + 1):
        traj, report = picard_solve(u0, b0, T, n_times, q, spec, tol, max_iter, part)
        attempts.append({"T": T, "iterations": report.iterations,
                         "max_factor": max(report.contraction_factors, default=0.0),
                         "converged": float(report.status == "converged")})
        if traj is not None:
            logger.info(f"local existence: Picard contracts on [0, {T:g}]")
            return traj, LocalExistenceReport(time=T, attempts=attempts)
        T /= 2
    return None, LocalExistenceReport(time=None, attempts=attempts)


class SmallnessReport(BaseModel):
    epsilon0: Optional[float]
    rows: List[Dict[str, float]]


def calibrate_smallness(trial_bank: Sequence[Tuple[VectorField, VectorField]], scales: Sequence[float],
                        T: float, n_times: int, q: float, spec: BesovSpec, tol: float, max_iter: int,
                        part: DyadicPartition, factor_limit: float = 0.5) -> SmallnessReport:
    """Largest data norm whose trial data all converge with contraction factors below ``factor_limit``."""
    epsilon0 = None
    rows = []
    for scale in sorted(scales):
        worst = 0.0
        ok = True
        for u, b in trial_bank:
            u_s, b_s = scale_to_norm(u, b, scale, spec, part)
            traj, report = picard_solve(u_s, b_s, T, n_times, q, spec, tol, max_iter, part)
            worst = max(worst, max(report.contraction_factors, default=0.0))
            ok = ok and traj is not None and worst < factor_limit
        rows.append({"scale": scale, "max_factor": worst, "contracts": float(ok)})
        if not ok:
            break
        epsilon0 = scale
    logger.info(f"empirical smallness threshold: {epsilon0}")
    return SmallnessReport(epsilon0=epsilon0, rows=rows)
