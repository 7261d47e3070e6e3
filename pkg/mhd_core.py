"""
Incompressible MHD on the torus with unit viscosity and resistivity.

    u_t − Δu + P∇·(u⊗u) − P∇·(b⊗b) = 0
    b_t − Δb + P∇·(u⊗b) − P∇·(b⊗u) = 0

with (∇·(a⊗c))_i = ∂_j(a_j c_i). Two solver paths share one right-hand side:
integrating-factor RK4 marching and Picard iteration of the mild form.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import cumulative_trapezoid

import config
from calibration import EstimateReport, calibrate_and_assert, map_bank
from hypotheses import decay_indices, heat_lorentz_indices, mild_solution_indices, require
from lp_decomp import DyadicPartition, band_lp_norms, build_partition, require_mean_free
from norm_suite import (BesovSpec, LorentzSpec, MixedNormSpec, band_weights, besov_norm,
                        chemin_lerner_norm, lorentz_norm, lr_sum)
from spectral_core import (Grid, ScalarField, VectorField, from_physical_array,
                           leray_project_coeffs, lp_norm_values, random_solenoidal_field,
                           symmetrize, to_physical)

try:
    from scipy.integrate import cumulative_simpson
except ImportError:  # scipy < 1.12
    cumulative_simpson = None

logger = logging.getLogger("rich")

# (du, db, max pointwise |u| + |b|)
Tendency = Callable[[float, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, float]]


class SolverError(RuntimeError):
    def __init__(self, message: str, t: Optional[float] = None, step: Optional[int] = None):
        self.t = t
        self.step = step
        super().__init__(message)


class CFLViolation(SolverError):
    pass


class NonFiniteState(SolverError):
    pass


def _spatial(dim: int) -> Tuple[int, ...]:
    return tuple(range(-dim, 0))


def _solenoidal_defect(coeffs: np.ndarray, grid: Grid) -> float:
    div = np.max(np.abs(np.sum(grid.k * coeffs, axis=0)), initial=0.0)
    return float(div) / max(float(np.sqrt(np.sum(np.abs(coeffs) ** 2))), 1e-300)


class MHDState(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    u: VectorField
    b: VectorField
    t: float = 0.0

    @model_validator(mode="after")
    def _check_invariants(self):
        grid = self.u.grid
        if self.b.grid != grid:
            raise ValueError("u and b live on different grids")
        for name, field in (("u", self.u), ("b", self.b)):
            if _solenoidal_defect(field.coeffs, grid) > config.TOLERANCES['DIVERGENCE']:
                raise ValueError(f"{name} is not divergence-free")
            zero = np.max(np.abs(field.coeffs[(slice(None),) + (0,) * grid.dim]))
            scale = float(np.sqrt(np.sum(np.abs(field.coeffs) ** 2)))
            if zero > config.TOLERANCES['MEAN_FREE'] * max(scale, 1e-300) and zero > 1e-300:
                raise ValueError(f"{name} is not mean-free")
        return self

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: Grid, u: np.ndarray, b: np.ndarray, t: float = 0.0) -> "MHDState":
        return cls(u=VectorField(grid=grid, coeffs=u), b=VectorField(grid=grid, coeffs=b), t=t)

    def energy(self) -> float:
        return energy(self.u.coeffs, self.b.coeffs)


class FieldSeries(BaseModel):
    """A vector field sampled at increasing times."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    times: np.ndarray
    coeffs: np.ndarray

    def at(self, i: int) -> VectorField:
        return VectorField(grid=self.grid, coeffs=self.coeffs[i])

    def norm_series(self, spec: Optional[BesovSpec] = None, part: Optional[DyadicPartition] = None) -> np.ndarray:
        """Per-sample L² norm, or the Ḃ^s_{p,r} norm when a spec is given."""
        if spec is None:
            return np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=tuple(range(1, self.coeffs.ndim))))
        part = part or build_partition(self.grid)
        return np.array([besov_norm(self.at(i), spec, part) for i in range(len(self.times))])


class Trajectory(BaseModel):
    """Time-ordered samples of (u, b); arrays have shape (n_times, dim, n, ..., n)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    times: np.ndarray
    u: np.ndarray
    b: np.ndarray
    scalars: Dict[str, np.ndarray] = Field(default_factory=dict)
    ledger: Dict[str, np.ndarray] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self):
        expected = (len(self.times), self.grid.dim) + self.grid.shape
        if self.u.shape != expected or self.b.shape != expected:
            raise ValueError(f"trajectory arrays must have shape {expected}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        return self

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def state(self, i: int) -> MHDState:
        return MHDState.from_arrays(self.grid, self.u[i], self.b[i], float(self.times[i]))

    @property
    def states(self) -> List[MHDState]:
        return [self.state(i) for i in range(self.n_samples)]

    def u_series(self) -> FieldSeries:
        return FieldSeries(grid=self.grid, times=self.times, coeffs=self.u)

    def b_series(self) -> FieldSeries:
        return FieldSeries(grid=self.grid, times=self.times, coeffs=self.b)

    def stacked(self) -> np.ndarray:
        """(n_times, 2, dim, ...) with u first."""
        return np.stack([self.u, self.b], axis=1)

    @classmethod
    def from_stacked(cls, grid: Grid, times, x: np.ndarray, **extra) -> "Trajectory":
        return cls(grid=grid, times=np.asarray(times, dtype=float), u=x[:, 0], b=x[:, 1], **extra)


# ---------------------------------------------------------------------------
# Right-hand side

def outer(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Physical tensor T[i, j] = a_j c_i, so that (∇·(a⊗c))_i = ∂_j T[i, j]."""
    return a[None, :] * c[:, None]


def flux_divergence(flux: np.ndarray, grid: Grid) -> np.ndarray:
    """P(Σ_j ∂_j T[i, j]) for a physical tensor flux, dealiased."""
    hat = from_physical_array(flux, grid) * grid.dealias_mask
    return leray_project_coeffs(np.sum(1j * grid.k[None] * hat, axis=1), grid)


def physical_masked(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return to_physical(coeffs * grid.dealias_mask, axes=_spatial(grid.dim))


def max_speed(*fields: np.ndarray) -> float:
    return float(np.max(sum(np.sqrt(np.sum(f ** 2, axis=0)) for f in fields)))


def mhd_tendency(grid: Grid) -> Tendency:
    def rhs(t: float, u: np.ndarray, b: np.ndarray):
        U, B = physical_masked(u, grid), physical_masked(b, grid)
        du = flux_divergence(outer(B, B) - outer(U, U), grid)
        db = flux_divergence(outer(B, U) - outer(U, B), grid)
        return du, db, max_speed(U, B)
    return rhs


def nonlinear_rhs(state: MHDState) -> Tuple[VectorField, VectorField]:
    """Projected nonlinear tendencies (du, db); the heat part is handled exactly."""
    grid = state.grid
    for name, field in (("u", state.u), ("b", state.b)):
        if _solenoidal_defect(field.coeffs, grid) > config.TOLERANCES['DIVERGENCE']:
            raise ValueError(f"{name} is not divergence-free")
    du, db, _ = mhd_tendency(grid)(state.t, state.u.coeffs, state.b.coeffs)
    return VectorField(grid=grid, coeffs=du), VectorField(grid=grid, coeffs=db)


def heat_propagate(f, dt: float):
    """Exact heat semigroup e^{dtΔ}."""
    if dt < 0:
        raise ValueError(f"heat propagation needs dt >= 0, got {dt}")
    return type(f)(grid=f.grid, coeffs=f.coeffs * np.exp(-f.grid.k2 * dt))


def energy(u: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(np.abs(u) ** 2) + np.sum(np.abs(b) ** 2))


def dissipation(u: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(np.sum(grid.k2 * (np.abs(u) ** 2 + np.abs(b) ** 2)))


def _l2(values: np.ndarray, grid: Grid) -> float:
    """L² norm of stacked physical components under the normalized measure."""
    return float(np.sqrt(np.sum(values ** 2) / np.prod(grid.shape)))


def cancellation_residual(u: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """|((b·∇)b, u) + ((b·∇)u, b)| relative to the Cauchy-Schwarz size of the two terms."""
    U, B = physical_masked(u, grid), physical_masked(b, grid)
    grad_b = to_physical(1j * grid.k[None] * (b * grid.dealias_mask)[:, None], axes=_spatial(grid.dim))
    grad_u = to_physical(1j * grid.k[None] * (u * grid.dealias_mask)[:, None], axes=_spatial(grid.dim))
    first = np.mean(np.einsum("j...,ij...,i...->...", B, grad_b, U))
    second = np.mean(np.einsum("j...,ij...,i...->...", B, grad_u, B))
    b_sup = float(np.max(np.sqrt(np.sum(B ** 2, axis=0)), initial=0.0))
    scale = b_sup * (_l2(grad_b, grid) * _l2(U, grid) + _l2(grad_u, grid) * _l2(B, grid))
    total = abs(float(first + second))
    return total / scale if scale > 0 else total


# ---------------------------------------------------------------------------
# Integrating-factor RK4

def _ifrk4(rhs: Tendency, grid: Grid, t: float, u: np.ndarray, b: np.ndarray, dt: float):
    half = np.exp(-grid.k2 * dt / 2)
    full = half * half
    x = np.stack([u, b])

    def n(tt, y):
        du, db, speed = rhs(tt, y[0], y[1])
        return np.stack([du, db]), speed

    k1, speed = n(t, x)
    k2, _ = n(t + dt / 2, half * (x + dt / 2 * k1))
    k3, _ = n(t + dt / 2, half * x + dt / 2 * k2)
    k4, _ = n(t + dt, full * x + dt * half * k3)
    x = full * x + dt / 6 * (full * k1 + 2 * half * (k2 + k3) + k4)
    x = np.stack([symmetrize(leray_project_coeffs(c, grid), grid) for c in x])
    return x[0], x[1], speed


def cfl_limit(state: MHDState, safety: Optional[float] = None) -> float:
    """Advective limit safety·(2π/N)/max(|u| + |b|)."""
    safety = safety or config.SOLVER_DEFAULTS['cfl_safety']
    grid = state.grid
    speed = max_speed(physical_masked(state.u.coeffs, grid), physical_masked(state.b.coeffs, grid))
    return math.inf if speed == 0 else safety * (2 * np.pi / grid.n) / speed


def _check_step(grid: Grid, dt: float, speed: float, t: float, step: int, safety: float) -> None:
    limit = math.inf if speed == 0 else safety * (2 * np.pi / grid.n) / speed
    if dt > limit:
        raise CFLViolation(f"dt={dt:g} exceeds CFL limit {limit:.3g} at t={t:.4g}", t=t, step=step)


def _check_finite(u: np.ndarray, b: np.ndarray, t: float, step: int) -> None:
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(b))):
        raise NonFiniteState(f"non-finite state after step {step} (t={t:.4g})", t=t, step=step)


def step_ifrk4(state: MHDState, dt: float, rhs: Optional[Tendency] = None) -> MHDState:
    """One integrating-factor RK4 step."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    grid = state.grid
    rhs = rhs or mhd_tendency(grid)
    u, b, speed = _ifrk4(rhs, grid, state.t, state.u.coeffs, state.b.coeffs, dt)
    _check_step(grid, dt, speed, state.t, 0, config.SOLVER_DEFAULTS['cfl_safety'])
    _check_finite(u, b, state.t + dt, 1)
    return MHDState.from_arrays(grid, u, b, state.t + dt)


def march(state0: MHDState, T: float, dt: float, sample_every: Optional[int] = None,
          rhs: Optional[Tendency] = None, track_cancellation: bool = True,
          cfl_safety: Optional[float] = None) -> Trajectory:
    """IF-RK4 run over [t0, t0+T], sampling every ``sample_every`` steps.

    Energy and dissipation are recorded at every step in ``scalars`` so the
    energy monitor integrates on the step grid.
    """
    if not (T > 0 and dt > 0):
        raise ValueError(f"need T > 0 and dt > 0 (T={T}, dt={dt})")
    grid = state0.grid
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    sample_every = sample_every or config.SOLVER_DEFAULTS['sample_every']
    safety = cfl_safety or config.SOLVER_DEFAULTS['cfl_safety']
    custom = rhs is not None
    rhs = rhs or mhd_tendency(grid)
    logger.info(f"IF-RK4 march: dim={grid.dim}, N={grid.n}, dt={dt:g}, steps={n_steps}")

    u, b, t = state0.u.coeffs, state0.b.coeffs, state0.t
    times, us, bs, cancel = [t], [u], [b], []
    step_t, step_e, step_d = [t], [energy(u, b)], [dissipation(u, b, grid)]
    if track_cancellation and not custom:
        cancel.append(cancellation_residual(u, b, grid))
    for step in range(1, n_steps + 1):
        u, b, speed = _ifrk4(rhs, grid, t, u, b, dt)
        _check_step(grid, dt, speed, t, step, safety)
        t = state0.t + step * dt
        _check_finite(u, b, t, step)
        step_t.append(t)
        step_e.append(energy(u, b))
        step_d.append(dissipation(u, b, grid))
        if step % sample_every == 0 or step == n_steps:
            times.append(t)
            us.append(u)
            bs.append(b)
            if track_cancellation and not custom:
                cancel.append(cancellation_residual(u, b, grid))
            logger.debug(f"t={t:.4f} energy={step_e[-1]:.6e}")
    scalars = {"step_times": np.array(step_t), "energy": np.array(step_e), "dissipation": np.array(step_d)}
    if cancel:
        scalars["cancellation"] = np.array(cancel)
    return Trajectory(grid=grid, times=np.array(times), u=np.array(us), b=np.array(bs), scalars=scalars)


def terminal_state(state0: MHDState, T: float, dt: float) -> np.ndarray:
    traj = march(state0, T, dt, sample_every=max(1, int(round(T / dt))), track_cancellation=False)
    return traj.stacked()[-1]


def temporal_order(state0: MHDState, T: float, dts: List[float]) -> Dict[str, List[float]]:
    """Terminal errors against a dt/4 reference and the observed orders between consecutive dts."""
    dts = sorted(dts, reverse=True)
    reference = terminal_state(state0, T, dts[-1] / 4)
    errors = [float(np.sqrt(np.sum(np.abs(terminal_state(state0, T, dt) - reference) ** 2))) for dt in dts]
    orders = [math.log(a / b) / math.log(da / db) if a > 0 and b > 0 else math.nan
              for a, b, da, db in zip(errors, errors[1:], dts, dts[1:])]
    logger.info(f"self-convergence: errors {errors}, orders {orders}")
    return {"dt": dts, "error": errors, "order": orders}


# ---------------------------------------------------------------------------
# Monitors

class EnergyReport(BaseModel):
    dim: int
    initial_energy: float
    max_abs_drift: float
    final_drift: float
    max_cancellation: Optional[float] = None
    passed: bool
    drift_series: List[float]


def _cumulative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    if cumulative_simpson is not None and len(times) >= 3:
        return cumulative_simpson(values, x=times, initial=0.0)
    return cumulative_trapezoid(values, x=times, initial=0.0)


def energy_balance(traj: Trajectory, tol: Optional[float] = None) -> EnergyReport:
    """E(t) + 2∫D − E(0) relative to E(0); equality in 2D, inequality direction in 3D."""
    tol = tol or config.TOLERANCES['ENERGY_DRIFT']
    if "energy" in traj.scalars:
        t = traj.scalars["step_times"]
        e, d = traj.scalars["energy"], traj.scalars["dissipation"]
    else:
        t = traj.times
        e = np.array([energy(u, b) for u, b in zip(traj.u, traj.b)])
        d = np.array([dissipation(u, b, traj.grid) for u, b in zip(traj.u, traj.b)])
    e0 = e[0]
    drift = (e + 2 * _cumulative(d, t) - e0) / e0 if e0 > 0 else np.zeros_like(e)
    cancel = traj.scalars.get("cancellation")
    max_cancel = float(np.max(cancel)) if cancel is not None and len(cancel) else None
    if traj.grid.dim == 2:
        passed = bool(np.max(np.abs(drift)) <= tol)
    else:
        passed = bool(np.max(drift) <= 1e-6)
    if max_cancel is not None:
        passed = passed and max_cancel <= config.TOLERANCES['CANCELLATION']
    stride = max(1, len(drift) // 200)
    report = EnergyReport(dim=traj.grid.dim, initial_energy=float(e0),
                          max_abs_drift=float(np.max(np.abs(drift))), final_drift=float(drift[-1]),
                          max_cancellation=max_cancel, passed=passed,
                          drift_series=[float(x) for x in drift[::stride]])
    logger.info(f"energy balance: max |drift| {report.max_abs_drift:.3e}, cancellation {max_cancel}")
    return report


def record_ledger(traj: Trajectory, spec: BesovSpec, part: DyadicPartition) -> Trajectory:
    """Attach the per-band ledger 2^{js}‖Δ_j·‖_p (component sums) for u and b."""
    w = band_weights(part, spec.s)
    ledger = {}
    for name, arr in (("u", traj.u), ("b", traj.b)):
        ledger[name] = np.array([sum(band_lp_norms(c, part, spec.p) for c in sample) * w for sample in arr])
    return traj.model_copy(update={"ledger": ledger})


# ---------------------------------------------------------------------------
# Mild formulation

def duhamel(grid: Grid, times: np.ndarray, forcing: np.ndarray) -> np.ndarray:
    """Trapezoid Duhamel integrals ∫₀^{t_m} S(t_m − s) N(s) ds on any increasing mesh."""
    out = np.zeros_like(forcing)
    for m in range(1, len(times)):
        h = times[m] - times[m - 1]
        step = np.exp(-grid.k2 * h)
        out[m] = step * (out[m - 1] + h / 2 * forcing[m - 1]) + h / 2 * forcing[m]
    return out


def free_evolution(grid: Grid, times: np.ndarray, x0: np.ndarray) -> np.ndarray:
    return np.array([np.exp(-grid.k2 * t) * x0 for t in times])


def _forcing(grid: Grid, x: np.ndarray, rhs: Tendency, times) -> np.ndarray:
    out = np.empty_like(x)
    for m, t in enumerate(times):
        du, db, _ = rhs(t, x[m, 0], x[m, 1])
        out[m, 0], out[m, 1] = du, db
    return out


def working_norm(x: np.ndarray, times, q: float, spec: BesovSpec, part: DyadicPartition) -> float:
    """L̃^q(I; Ḃ^{s+2/q}_{p,r}) of the stacked (u, b) samples, components summed."""
    mixed = MixedNormSpec(rho=q, besov=BesovSpec(s=spec.s + 2.0 / q, p=spec.p, r=spec.r),
                          interval=[float(t) for t in times])
    n_t = x.shape[0]
    flat = x.reshape((n_t, -1) + x.shape[-part.grid.dim:])
    return float(sum(chemin_lerner_norm(flat[:, c], mixed, part) for c in range(flat.shape[1])))


def mild_residual(traj: Trajectory, q: float, spec: BesovSpec, part: Optional[DyadicPartition] = None,
                  rhs: Optional[Tendency] = None) -> float:
    """Discrepancy of the trajectory from the right side of the mild equations."""
    grid = traj.grid
    part = part or build_partition(grid)
    rhs = rhs or mhd_tendency(grid)
    x = traj.stacked()
    shift = traj.times - traj.times[0]
    image = free_evolution(grid, shift, x[0]) + duhamel(grid, shift, _forcing(grid, x, rhs, traj.times))
    return working_norm(x - image, shift, q, spec, part)


class PicardReport(BaseModel):
    status: str
    iterations: int
    contraction_factors: List[float]
    increments: List[float]
    k0: float
    max_iterate_norm: float
    within_ball: bool


def picard_solve(u0: VectorField, b0: VectorField, T: float, n_times: int, q: float, spec: BesovSpec,
                 tol: float, max_iter: int, part: Optional[DyadicPartition] = None,
                 streak: Optional[int] = None) -> Tuple[Optional[Trajectory], PicardReport]:
    """Fixed-point iteration of the time-discretized mild equations."""
    grid = u0.grid
    require("mild_solution", mild_solution_indices(grid.dim, spec.p, spec.r, q))
    if not T > 0 or n_times < 2:
        raise ValueError(f"need T > 0 and at least two time samples (T={T}, n_times={n_times})")
    MHDState(u=u0, b=b0)
    part = part or build_partition(grid)
    streak = streak or config.SOLVER_DEFAULTS['divergence_streak']
    rhs = mhd_tendency(grid)
    times = np.linspace(0.0, T, n_times)
    free = free_evolution(grid, times, np.stack([u0.coeffs, b0.coeffs]))
    k0 = working_norm(free, times, q, spec, part)
    current = free
    increments: List[float] = []
    factors: List[float] = []
    max_norm = k0
    bad = 0
    status = "max_iter"
    logger.info(f"Picard: N={grid.n}, T={T}, n_times={n_times}, K0={k0:.3e}")
    for it in range(1, max_iter + 1):
        nxt = free + duhamel(grid, times, _forcing(grid, current, rhs, times))
        if not np.all(np.isfinite(nxt)):
            status = "diverged"
            break
        inc = working_norm(nxt - current, times, q, spec, part)
        increments.append(inc)
        max_norm = max(max_norm, working_norm(nxt, times, q, spec, part))
        if len(increments) >= 2 and increments[-2] > 0:
            factor = inc / increments[-2]
            factors.append(factor)
            bad = bad + 1 if factor >= 1 else 0
            logger.info(f"  iteration {it}: increment {inc:.3e}, contraction factor {factor:.3e}")
        else:
            logger.info(f"  iteration {it}: increment {inc:.3e}")
        current = nxt
        if inc < tol:
            status = "converged"
            break
        if bad >= streak:
            status = "diverged"
            break
    report = PicardReport(status=status, iterations=len(increments), contraction_factors=factors,
                          increments=increments, k0=k0, max_iterate_norm=max_norm,
                          within_ball=bool(max_norm <= 2 * k0 * (1 + 1e-12)) if k0 > 0 else max_norm == 0)
    if status != "converged":
        logger.warning(f"Picard iteration {status} after {len(increments)} iterations")
        return None, report
    return Trajectory.from_stacked(grid, times, current), report


# ---------------------------------------------------------------------------
# Heat-flow decay monitors

class DecayReport(BaseModel):
    name: str
    values: Dict[str, float]
    passed: bool


def band_decay_rates(f0: ScalarField, times, p: float, part: DyadicPartition) -> np.ndarray:
    """Measured c with ‖Δ_j f(t)‖_p = e^{−c 4^j t}‖Δ_j f0‖_p, shape (n_times, n_bands); NaN where undefined."""
    base = band_lp_norms(f0.coeffs, part, p)
    scale = 4.0 ** np.arange(part.j_min, part.j_max + 1)
    rates = np.full((len(times), part.n_bands), np.nan)
    for i, t in enumerate(times):
        if t <= 0:
            continue
        now = band_lp_norms(heat_propagate(f0, t).coeffs, part, p)
        ok = (base > 1e-14 * base.max(initial=0.0)) & (now > 1e-250 * base)
        rates[i, ok] = -np.log(now[ok] / base[ok]) / (scale[ok] * t)
    return rates


def band_decay_check(f0: ScalarField, times, p: float, part: DyadicPartition,
                     c: Optional[Sequence[float]] = None) -> DecayReport:
    """Per-band heat decay against a rate c_j for each band.

    For p = 2 every band must fall in the exact window [(3/4)², (8/3)²]. Other p need ``c``, one calibrated
    lower rate per band of ``part``; a NaN entry leaves that band unchecked.
    """
    rates = band_decay_rates(f0, times, p, part)
    finite = rates[np.isfinite(rates)]
    lo = float(finite.min()) if finite.size else math.nan
    hi = float(finite.max()) if finite.size else math.nan
    if p == 2:
        passed = bool(finite.size == 0 or (lo >= (3 / 4) ** 2 - 1e-9 and hi <= (8 / 3) ** 2 + 1e-9))
    else:
        if c is None:
            raise ValueError(f"band decay for p={p:g} needs one calibrated rate per band")
        c = np.asarray(c, dtype=float)
        if c.shape != (part.n_bands,):
            raise ValueError(f"expected {part.n_bands} band rates, got shape {c.shape}")
        margin = rates - c[None, :] * (1 - 1e-12)
        passed = bool(np.all(margin[np.isfinite(margin)] >= 0))
    values = {"min_rate": lo, "max_rate": hi}
    for j, col in zip(part.bands, rates.T):
        col = col[np.isfinite(col)]
        if col.size:
            values[f"band_{j}"] = float(col.min())
    return DecayReport(name=f"band_decay_p{p:g}", values=values, passed=passed)


def band_decay_calibration(bank_a: Sequence[ScalarField], bank_b: Sequence[ScalarField], times, p: float,
                           part: DyadicPartition, presets: Optional[Dict[str, float]] = None,
                           threads: Optional[int] = None) -> Tuple[np.ndarray, List[EstimateReport]]:
    """Fit a lower decay rate c_j for each band on bank A and assert it on bank B.

    Returns the rates indexed like ``part.bands`` (NaN for bands neither bank resolves) and one report per
    fitted band, named ``band_decay_p<p>_j<j>``.
    """
    presets = presets or {}
    rates_a = map_bank(lambda f: band_decay_rates(f, times, p, part), bank_a, threads)
    rates_b = map_bank(lambda f: band_decay_rates(f, times, p, part), bank_b, threads)
    constants = np.full(part.n_bands, np.nan)
    reports = []
    for idx, j in enumerate(part.bands):
        def column(rates, idx=idx):
            col = rates[:, idx]
            return col[np.isfinite(col)]

        if not any(column(x).size for x in rates_a) or not any(column(x).size for x in rates_b):
            continue
        name = f"band_decay_p{p:g}_j{j}"
        report = calibrate_and_assert(name, {"p": p, "j": j}, column, rates_a, rates_b, kind="lower",
                                      preset=presets.get(name), threads=1)
        constants[idx] = report.calibration_constant
        reports.append(report)
    return constants, reports


def gradient_lp_sum(x: np.ndarray, grid: Grid, p: float, alpha: int) -> float:
    """Σ over components (and derivative directions when alpha = 1) of L^p norms."""
    flat = x.reshape((-1,) + grid.shape)
    if alpha == 1:
        flat = (1j * grid.k[None] * flat[:, None]).reshape((-1,) + grid.shape)
    values = to_physical(flat, axes=_spatial(grid.dim))
    return float(sum(lp_norm_values(v, p) for v in values))


def weighted_decay_ratio(traj: Trajectory, p: float, alpha: int, r: float,
                         part: Optional[DyadicPartition] = None) -> float:
    """sup_t t^{1/2 − n/(2p) + α/2}‖∇^α(u,b)‖_p over ‖(u0,b0)‖ in Ḃ^{n/p−1}_{p,r}."""
    grid = traj.grid
    part = part or build_partition(grid)
    n = grid.dim
    data = BesovSpec(s=n / p - 1, p=p, r=r)
    x0 = traj.stacked()[0]
    norm0 = sum(float(lr_sum(band_lp_norms(c, part, p) * band_weights(part, data.s), r))
                for c in x0.reshape((-1,) + grid.shape))
    power = 0.5 - n / (2 * p) + alpha / 2
    sup = 0.0
    for t, x in zip(traj.times, traj.stacked()):
        if t > 0:
            sup = max(sup, t ** power * gradient_lp_sum(x, grid, p, alpha))
    if norm0 == 0:
        return 0.0 if sup == 0 else math.inf
    return sup / norm0


def weighted_decay_check(traj: Trajectory, p: float, alpha: int, r: float = 2.0,
                         c_cal: Optional[float] = None, part: Optional[DyadicPartition] = None) -> DecayReport:
    require("weighted_decay", decay_indices(traj.grid.dim, p, alpha))
    ratio = weighted_decay_ratio(traj, p, alpha, r, part)
    return DecayReport(name=f"weighted_decay_alpha{alpha}", values={"ratio": ratio},
                       passed=bool(c_cal is None or ratio <= c_cal))


def geometric_mesh(T: float, n: int, t_min_fraction: float = 1e-8) -> Tuple[np.ndarray, np.ndarray]:
    """Geometric nodes on (0, T] and the measure of the cell each node represents."""
    nodes = T * np.geomspace(t_min_fraction, 1.0, n)
    mids = np.sqrt(nodes[1:] * nodes[:-1])
    edges = np.concatenate([[0.0], mids, [T]])
    return nodes, np.diff(edges)


def heat_lorentz_ratio(u0: ScalarField, p: float, q: float, T: float, n_mesh: int = 400) -> float:
    """‖S(t)u0‖ in L^{p,2}(0,T; L^q) over ‖u0‖₂."""
    nodes, weights = geometric_mesh(T, n_mesh)
    values = [lp_norm_values(to_physical(u0.coeffs * np.exp(-u0.grid.k2 * t)), q) for t in nodes]
    base = float(np.sqrt(np.sum(np.abs(u0.coeffs) ** 2)))
    norm = lorentz_norm(np.array(values), weights, LorentzSpec(p=p, q=2.0))
    if base == 0:
        return 0.0 if norm == 0 else math.inf
    return norm / base


def heat_lorentz_check(u0: ScalarField, p: float, q: float, T: float, c_cal: Optional[float] = None,
                       n_mesh: int = 400) -> DecayReport:
    require("heat_lorentz", heat_lorentz_indices(u0.grid.dim, p, q))
    require_mean_free(u0.coeffs, u0.grid.dim, "u0")
    ratio = heat_lorentz_ratio(u0, p, q, T, n_mesh)
    return DecayReport(name="heat_lorentz", values={"ratio": ratio}, passed=bool(c_cal is None or ratio <= c_cal))


# ---------------------------------------------------------------------------
# Initial data

def orszag_tang(grid: Grid, amplitude: float = 1.0) -> Tuple[VectorField, VectorField]:
    """u = (−sin y, sin x), b = (−sin y, sin 2x), extended by zero in 3D."""
    x = grid.coordinates()
    u = np.zeros((grid.dim,) + grid.shape)
    b = np.zeros((grid.dim,) + grid.shape)
    u[0], u[1] = -np.sin(x[1]), np.sin(x[0])
    b[0], b[1] = -np.sin(x[1]), np.sin(2 * x[0])
    return (VectorField(grid=grid, coeffs=amplitude * from_physical_array(u, grid)),
            VectorField(grid=grid, coeffs=amplitude * from_physical_array(b, grid)))


def taylor_green(grid: Grid, amplitude: float = 1.0) -> VectorField:
    x = grid.coordinates()
    u = np.zeros((grid.dim,) + grid.shape)
    if grid.dim == 2:
        u[0] = np.sin(x[0]) * np.cos(x[1])
        u[1] = -np.cos(x[0]) * np.sin(x[1])
    else:
        u[0] = np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2])
        u[1] = -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2])
    return VectorField(grid=grid, coeffs=amplitude * from_physical_array(u, grid))


def random_mhd_data(grid: Grid, rng: np.random.Generator, energy_: float = 1.0, k_min: float = 1.0,
                    k_max: float = 4.0, slope: float = -1.0) -> Tuple[VectorField, VectorField]:
    """Random solenoidal pair with ‖u‖² + ‖b‖² = energy_."""
    amp = math.sqrt(energy_ / 2)
    return (random_solenoidal_field(grid, rng, k_min, k_max, slope, amp),
            random_solenoidal_field(grid, rng, k_min, k_max, slope, amp))


def pair_besov_norm(u: VectorField, b: VectorField, spec: BesovSpec, part: DyadicPartition) -> float:
    return besov_norm(u, spec, part) + besov_norm(b, spec, part)


def scale_to_norm(u: VectorField, b: VectorField, target: float, spec: BesovSpec,
                  part: DyadicPartition) -> Tuple[VectorField, VectorField]:
    current = pair_besov_norm(u, b, spec, part)
    if current == 0:
        raise ValueError("cannot rescale zero data")
    return u.scaled(target / current), b.scaled(target / current)


# ---------------------------------------------------------------------------
# Evaluating a stored trajectory between samples

def _phi1(z: np.ndarray) -> np.ndarray:
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1 + z / 2 + z * z / 6, np.expm1(safe) / safe)


def _phi2(z: np.ndarray) -> np.ndarray:
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    return np.where(small, 0.5 + z / 6 + z * z / 24, (np.expm1(safe) - safe) / (safe * safe))


class ExponentialInterpolator:
    """Evaluate a trajectory at arbitrary times through the integrating-factor formula

        x(t_n + τ) ≈ e^{τΔ}x_n + τφ₁(−τ|k|²)N_n + (τ²/h)φ₂(−τ|k|²)(N_{n+1} − N_n).
    """

    def __init__(self, traj: Trajectory, rhs: Optional[Tendency] = None):
        self.traj = traj
        self.grid = traj.grid
        self.x = traj.stacked()
        self.forcing = _forcing(self.grid, self.x, rhs or mhd_tendency(self.grid), traj.times)

    def covers(self, t0: float, t1: float) -> bool:
        return self.traj.times[0] <= t0 + 1e-12 and t1 <= self.traj.times[-1] + 1e-12

    def at(self, t: float) -> np.ndarray:
        times = self.traj.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"t={t} outside the stored interval [{times[0]}, {times[-1]}]")
        n = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        tau = t - times[n]
        if abs(tau) <= 1e-14:
            return self.x[n]
        if abs(t - times[n + 1]) <= 1e-14:
            return self.x[n + 1]
        h = times[n + 1] - times[n]
        z = -self.grid.k2 * tau
        return (np.exp(z) * self.x[n] + tau * _phi1(z) * self.forcing[n]
                + tau * tau / h * _phi2(z) * (self.forcing[n + 1] - self.forcing[n]))
