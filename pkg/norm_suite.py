"""
Besov, inhomogeneous Besov, Chemin-Lerner and Lorentz norms, and the
Monte-Carlo checks of the Lorentz-space Hoelder/Young/convolution inequalities.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import fft as sfft
from scipy.integrate import trapezoid

from hypotheses import (convolution_endpoint_indices, describe, holder_lorentz_indices, inv,
                        require, young_lorentz_indices)
from lp_decomp import DyadicPartition, band_lp_norms, chi_profile, require_mean_free
from spectral_core import ScalarField, VectorField, lp_norm_values, to_physical

logger = logging.getLogger("rich")

Field = Union[ScalarField, VectorField]


class BesovSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: float
    p: float
    r: float

    @field_validator("p", "r")
    @classmethod
    def _at_least_one(cls, v, info):
        if not v >= 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    def label(self) -> str:
        return f"B^{self.s:g}_{{{self.p:g},{self.r:g}}}"


class MixedNormSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float
    besov: BesovSpec
    interval: List[float]
    refine: int = 1

    @model_validator(mode="after")
    def _check(self):
        if not self.rho >= 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        t = np.asarray(self.interval)
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("interval needs at least two strictly increasing sample times")
        if self.refine < 1:
            raise ValueError("refine must be a positive integer")
        return self


class LorentzSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    q: float

    @model_validator(mode="after")
    def _check(self):
        if not self.p > 1:
            raise ValueError(f"Lorentz p must be > 1, got {self.p}")
        if not self.q >= 1:
            raise ValueError(f"Lorentz q must be >= 1, got {self.q}")
        return self


class NormRecord(BaseModel):
    """One CSV row of the norm report."""
    norm_name: str
    s: Optional[float] = None
    p: Optional[float] = None
    r: Optional[float] = None
    rho: Optional[float] = None
    value: float


class InequalityReport(BaseModel):
    name: str
    indices: Dict[str, float]
    n_trials: int
    max_ratio: float
    bound: float
    violations: int
    passed: bool
    statement: str = ""


def lr_sum(values: np.ndarray, r: float, axis=-1) -> np.ndarray:
    """l^r norm along ``axis`` (sup when r = inf)."""
    values = np.abs(values)
    if math.isinf(r):
        return np.max(values, axis=axis, initial=0.0)
    return np.sum(values ** r, axis=axis) ** (1.0 / r)


def band_weights(part: DyadicPartition, s: float) -> np.ndarray:
    return 2.0 ** (s * np.arange(part.j_min, part.j_max + 1))


def _components(coeffs: np.ndarray, dim: int) -> List[np.ndarray]:
    return [coeffs] if coeffs.ndim == dim else list(coeffs)


def band_norms(f: Field, p: float, part: DyadicPartition) -> np.ndarray:
    """Per-band ‖Δ_j f_i‖_p, shape (components, n_bands)."""
    require_mean_free(f.coeffs, part.grid.dim)
    return np.array([band_lp_norms(c, part, p) for c in _components(f.coeffs, part.grid.dim)])


def _require_covered(coeffs: np.ndarray, part: DyadicPartition) -> None:
    energy = np.abs(coeffs) ** 2
    if energy.ndim > part.grid.dim:
        energy = energy.sum(axis=0)
    outside = (part.coverage() == 0) & (part.grid.k2 > 0)
    if energy.sum() > 0 and energy[outside].sum() > 1e-24 * energy.sum():
        raise ValueError("field has content outside every band of the partition")


def besov_norm(f: Field, spec: BesovSpec, part: DyadicPartition) -> float:
    """Homogeneous Besov norm; vector fields sum their component norms."""
    require_mean_free(f.coeffs, part.grid.dim)
    _require_covered(f.coeffs, part)
    norms = band_norms(f, spec.p, part) * band_weights(part, spec.s)
    return float(np.sum(lr_sum(norms, spec.r)))


def inhomog_besov_norm(f: Field, spec: BesovSpec, part: DyadicPartition) -> float:
    """Σ_{j>=0} part plus ‖S₀ f‖_p; the mean lives in the S₀ term."""
    dim = part.grid.dim
    low = chi_profile(part.grid.kmag)
    keep = [j - part.j_min for j in part.bands if j >= 0]
    total = 0.0
    for c in _components(f.coeffs, dim):
        s0 = lp_norm_values(to_physical(c * low), spec.p)
        mean_free = c.copy()
        mean_free[(0,) * dim] = 0.0
        norms = band_lp_norms(mean_free, part, spec.p)[keep] * band_weights(part, spec.s)[keep]
        total += float(lr_sum(norms, spec.r)) + s0
    return total


def _stack(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples
    return np.stack([f.coeffs for f in samples])


def time_lebesgue_norm(values: np.ndarray, times: Sequence[float], rho: float, axis: int = 0) -> np.ndarray:
    """Trapezoid L^ρ norm in time along ``axis``; sup when ρ = inf."""
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(rho):
        return np.max(values, axis=axis)
    return trapezoid(values ** rho, x=np.asarray(times, dtype=float), axis=axis) ** (1.0 / rho)


def _refine(series: np.ndarray, times: np.ndarray, refine: int):
    if refine == 1:
        return series, times
    fine = np.concatenate([np.linspace(a, b, refine, endpoint=False) for a, b in zip(times[:-1], times[1:])]
                          + [times[-1:]])
    flat = series.reshape(series.shape[0], -1)
    out = np.stack([np.interp(fine, times, col) for col in flat.T], axis=1)
    return out.reshape((fine.size,) + series.shape[1:]), fine


def band_norm_series(samples, p: float, part: DyadicPartition) -> np.ndarray:
    """‖Δ_j f_i(t)‖_p, shape (n_times, components, n_bands)."""
    coeffs = _stack(samples)
    for c in coeffs:
        require_mean_free(c, part.grid.dim)
    return np.array([[band_lp_norms(comp, part, p) for comp in _components(c, part.grid.dim)] for c in coeffs])


def chemin_lerner_norm(samples, spec: MixedNormSpec, part: DyadicPartition) -> float:
    """L̃^ρ(I; Ḃ^s_{p,r}): time norm per band first, then the weighted l^r sum."""
    coeffs = _stack(samples)
    if coeffs.shape[0] != len(spec.interval):
        raise ValueError(f"{coeffs.shape[0]} samples for {len(spec.interval)} sample times")
    series, times = _refine(band_norm_series(coeffs, spec.besov.p, part),
                            np.asarray(spec.interval, dtype=float), spec.refine)
    per_band = time_lebesgue_norm(series, times, spec.rho) * band_weights(part, spec.besov.s)
    return float(np.sum(lr_sum(per_band, spec.besov.r)))


def iterated_norm(samples, spec: MixedNormSpec, part: DyadicPartition) -> float:
    """L^ρ(I; Ḃ^s_{p,r}): Besov norm at each time first, then the time norm."""
    coeffs = _stack(samples)
    if coeffs.shape[0] != len(spec.interval):
        raise ValueError(f"{coeffs.shape[0]} samples for {len(spec.interval)} sample times")
    series, times = _refine(band_norm_series(coeffs, spec.besov.p, part),
                            np.asarray(spec.interval, dtype=float), spec.refine)
    besov_t = lr_sum(series * band_weights(part, spec.besov.s), spec.besov.r)
    return float(np.sum(time_lebesgue_norm(besov_t, times, spec.rho)))


def lorentz_norm(samples: np.ndarray, weights: Optional[np.ndarray], spec: LorentzSpec) -> float:
    """Lorentz (p,q) norm of a step function, exact on its decreasing rearrangement."""
    values = np.abs(np.asarray(samples, dtype=float)).ravel()
    if weights is None:
        weights = np.full(values.size, 1.0 / max(values.size, 1))
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape != values.shape:
        raise ValueError("one weight per sample required")
    if np.any(weights < 0):
        raise ValueError("negative weights")
    order = np.argsort(-values, kind="stable")
    f = values[order]
    t = np.cumsum(weights[order])
    keep = (f > 0) & (weights[order] > 0)
    f, t_hi = f[keep], t[keep]
    if f.size == 0:
        return 0.0
    t_lo = np.concatenate([[0.0], t[:-1]])[keep]
    p, q = spec.p, spec.q
    if math.isinf(q):
        return float(np.max(f * t_hi ** (1.0 / p)))
    total = np.sum(f ** q * (p / q) * (t_hi ** (q / p) - t_lo ** (q / p)))
    return float(total ** (1.0 / q))


def random_simple_function(rng: np.random.Generator, size: int, levels: int = 4) -> np.ndarray:
    """Nonnegative simple function with at most ``levels`` nonzero values."""
    heights = rng.exponential(1.0, levels) * 10.0 ** rng.uniform(-1, 1, levels)
    labels = rng.integers(0, levels + 1, size)
    sparsity = rng.random(size) < rng.uniform(0.05, 1.0)
    return np.where(sparsity & (labels > 0), heights[np.maximum(labels - 1, 0)], 0.0)


def periodic_convolution(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Convolution on the discrete torus with the normalized (probability) measure."""
    axes = tuple(range(f.ndim))
    return sfft.ifftn(sfft.fftn(f, axes=axes) * sfft.fftn(g, axes=axes), axes=axes).real / f.size


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs <= 1e-300 else math.inf


def _pairs(pairs, rng, trials, size):
    if pairs is not None:
        return list(pairs)
    return [(random_simple_function(rng, size), random_simple_function(rng, size)) for _ in range(trials)]


def _report(name, indices, ratios, bound) -> InequalityReport:
    ratios = np.asarray(ratios, dtype=float)
    violations = int(np.sum(ratios > bound * (1 + 1e-12)))
    report = InequalityReport(name=name, indices=indices, n_trials=int(ratios.size),
                              max_ratio=float(ratios.max(initial=0.0)), bound=bound,
                              violations=violations, passed=violations == 0, statement=describe(name))
    logger.info(f"{name}: max ratio {report.max_ratio:.4g} vs bound {bound:.4g}, {violations} violations")
    return report


def lorentz_holder_check(p1: float, q1: float, p2: float, q2: float, trials: int = 200,
                         s: Optional[float] = None, seed: int = 0, size: int = 512,
                         pairs=None) -> InequalityReport:
    """‖fg‖_{(r,s)} <= r'‖f‖_{(p1,q1)}‖g‖_{(p2,q2)} on random simple functions."""
    if s is None:
        s = 1.0 / (inv(q1) + inv(q2)) if inv(q1) + inv(q2) > 0 else math.inf
    require("lorentz_holder", holder_lorentz_indices(p1, q1, p2, q2, s))
    r = 1.0 / (inv(p1) + inv(p2))
    bound = r / (r - 1.0)
    rng = np.random.default_rng(seed)
    ratios = []
    for f, g in _pairs(pairs, rng, trials, size):
        lhs = lorentz_norm(f * g, None, LorentzSpec(p=r, q=s))
        rhs = lorentz_norm(f, None, LorentzSpec(p=p1, q=q1)) * lorentz_norm(g, None, LorentzSpec(p=p2, q=q2))
        ratios.append(_ratio(lhs, rhs))
    return _report("lorentz_holder", {"p1": p1, "q1": q1, "p2": p2, "q2": q2, "r": r, "s": s}, ratios, bound)


def lorentz_young_check(p1: float, q1: float, p2: float, q2: float, trials: int = 200,
                        s: Optional[float] = None, seed: int = 0, size: int = 512,
                        pairs=None) -> List[InequalityReport]:
    """Young's inequality in Lorentz spaces, its weak form, and the L^∞ convolution endpoint."""
    if s is None:
        s = 1.0 / (inv(q1) + inv(q2)) if inv(q1) + inv(q2) > 0 else math.inf
    require("lorentz_young", young_lorentz_indices(p1, q1, p2, q2, s))
    r = 1.0 / (inv(p1) + inv(p2) - 1.0)
    rng = np.random.default_rng(seed)
    pairs = _pairs(pairs, rng, trials, size)
    strong, weak, endpoint = [], [], []
    conj = p1 / (p1 - 1.0)
    for f, g in pairs:
        h = periodic_convolution(f, g)
        strong.append(_ratio(lorentz_norm(h, None, LorentzSpec(p=r, q=s)),
                             lorentz_norm(f, None, LorentzSpec(p=p1, q=q1))
                             * lorentz_norm(g, None, LorentzSpec(p=p2, q=q2))))
        weak.append(_ratio(lorentz_norm(h, None, LorentzSpec(p=r, q=math.inf)),
                           lorentz_norm(f, None, LorentzSpec(p=p1, q=math.inf))
                           * lorentz_norm(g, None, LorentzSpec(p=p2, q=math.inf))))
        endpoint.append(_ratio(float(np.max(np.abs(h), initial=0.0)),
                               lorentz_norm(f, None, LorentzSpec(p=p1, q=p1))
                               * lorentz_norm(g, None, LorentzSpec(p=conj, q=conj))))
    indices = {"p1": p1, "q1": q1, "p2": p2, "q2": q2, "r": r, "s": s}
    return [
        _report("lorentz_young", indices, strong, 3.0 * r),
        _report("lorentz_young_weak", {**indices, "q1": math.inf, "q2": math.inf, "s": math.inf},
                weak, 3.0 * r),
        convolution_endpoint_check(p1, p1, conj, pairs=pairs, ratios=endpoint),
    ]


def convolution_endpoint_check(p: float, q1: float, q2: float, trials: int = 200, seed: int = 0,
                               size: int = 512, pairs=None, ratios=None) -> InequalityReport:
    """‖f*g‖_∞ <= ‖f‖_{(p,q1)}‖g‖_{(p',q2)} for conjugate p, p'."""
    require("convolution_endpoint", convolution_endpoint_indices(p, q1, q2))
    conj = p / (p - 1.0)
    if ratios is None:
        rng = np.random.default_rng(seed)
        ratios = []
        for f, g in _pairs(pairs, rng, trials, size):
            ratios.append(_ratio(float(np.max(np.abs(periodic_convolution(f, g)), initial=0.0)),
                                 lorentz_norm(f, None, LorentzSpec(p=p, q=q1))
                                 * lorentz_norm(g, None, LorentzSpec(p=conj, q=q2))))
    return _report("convolution_endpoint", {"p": p, "q1": q1, "p_conj": conj, "q2": q2}, ratios, 1.0)
