"""
Bony paraproduct calculus on band-limited periodic fields, plus the
calibrate/assert harnesses for the paraproduct, remainder and product
estimates in Chemin-Lerner norms.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from calibration import EstimateReport, calibrate_and_assert
from hypotheses import (inv, paraproduct_indices, product_indices,
                        remainder_indices, remainder_target, require)
from lp_decomp import DyadicPartition, is_band_resolved, require_mean_free
from norm_suite import BesovSpec, MixedNormSpec, chemin_lerner_norm, time_lebesgue_norm
from spectral_core import (Grid, ScalarField, dealiased_product_coeffs, from_physical_array,
                           heat_factor, l2_norm_coeffs, lp_norm_values, random_coeffs,
                           to_physical)

logger = logging.getLogger("rich")

RECONSTRUCTION_TOL = 1e-11


class BonySplit(BaseModel):
    """T_g f, T_f g and R(f, g)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t_gf: ScalarField
    t_fg: ScalarField
    remainder: ScalarField

    def total(self) -> ScalarField:
        return self.t_gf + self.t_fg + self.remainder


def _check_pair(f: ScalarField, g: ScalarField, part: DyadicPartition) -> None:
    if f.grid != g.grid or f.grid != part.grid:
        raise ValueError("fields and partition live on different grids")
    require_mean_free(f.coeffs, part.grid.dim, "f")
    require_mean_free(g.coeffs, part.grid.dim, "g")


def _batched_product(left: np.ndarray, right: np.ndarray, grid: Grid) -> np.ndarray:
    """Σ_j of dealiased products left[j]·right[j]; one forward transform for the sum."""
    mask = grid.dealias_mask
    axes = tuple(range(1, left.ndim))
    phys = np.sum(to_physical(left * mask, axes=axes) * to_physical(right * mask, axes=axes), axis=0)
    return from_physical_array(phys, grid) * mask


def _low_pass_stack(coeffs: np.ndarray, part: DyadicPartition, shift: int = -1) -> np.ndarray:
    return np.array([coeffs * part.low_pass_multiplier(j + shift) for j in part.bands])


def _band_stack(coeffs: np.ndarray, part: DyadicPartition) -> np.ndarray:
    return part.phi * coeffs[None]


def paraproduct_coeffs(g: np.ndarray, f: np.ndarray, part: DyadicPartition) -> np.ndarray:
    return _batched_product(_low_pass_stack(g, part), _band_stack(f, part), part.grid)


def remainder_coeffs(f: np.ndarray, g: np.ndarray, part: DyadicPartition) -> np.ndarray:
    bands_g = _band_stack(g, part)
    near = bands_g.copy()
    near[1:] += bands_g[:-1]
    near[:-1] += bands_g[1:]
    return _batched_product(near, _band_stack(f, part), part.grid)


def paraproduct(g: ScalarField, f: ScalarField, part: DyadicPartition) -> ScalarField:
    """T_g f = Σ_j S_{j-1}g · Δ_j f with dealiased products."""
    _check_pair(f, g, part)
    return ScalarField(grid=f.grid, coeffs=paraproduct_coeffs(g.coeffs, f.coeffs, part))


def remainder(f: ScalarField, g: ScalarField, part: DyadicPartition) -> ScalarField:
    """R(f, g) = Σ_{|i-j|<=1} Δ_i g · Δ_j f."""
    _check_pair(f, g, part)
    return ScalarField(grid=f.grid, coeffs=remainder_coeffs(f.coeffs, g.coeffs, part))


def bony_decompose(f: ScalarField, g: ScalarField, part: DyadicPartition) -> BonySplit:
    _check_pair(f, g, part)
    for name, h in (("f", f), ("g", g)):
        if not is_band_resolved(h, part):
            raise ValueError(f"{name} has content outside the covered band annulus")
    split = BonySplit(t_gf=paraproduct(g, f, part), t_fg=paraproduct(f, g, part),
                      remainder=remainder(f, g, part))
    product = dealiased_product_coeffs(f.coeffs, g.coeffs, part.grid)
    scale = l2_norm_coeffs(product)
    defect = l2_norm_coeffs(split.total().coeffs - product)
    if defect > RECONSTRUCTION_TOL * scale and defect > 1e-300:
        raise RuntimeError(f"Bony reconstruction defect {defect / max(scale, 1e-300):.3e} relative")
    return split


def paraproduct_support_defect(g: ScalarField, f: ScalarField, part: DyadicPartition, gap: int = 5) -> float:
    """Largest ‖Δ_k(S_{j-1}g Δ_j f)‖₂ over |j-k| >= gap, relative to ‖T_g f‖₂."""
    _check_pair(f, g, part)
    total = l2_norm_coeffs(paraproduct_coeffs(g.coeffs, f.coeffs, part))
    worst = 0.0
    for j in part.bands:
        term = dealiased_product_coeffs(g.coeffs * part.low_pass_multiplier(j - 1),
                                        f.coeffs * part.band_multiplier(j), part.grid)
        for k in part.bands:
            if abs(j - k) >= gap:
                worst = max(worst, l2_norm_coeffs(term * part.band_multiplier(k)))
    return worst / total if total > 0 else worst


# ---------------------------------------------------------------------------
# Estimate harnesses

class TrajectoryPair(BaseModel):
    """Two scalar trajectories on a shared time mesh."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: List[float]
    u: np.ndarray
    v: np.ndarray


def heat_trajectory_bank(grid: Grid, rng: np.random.Generator, size: int, n_times: int = 5,
                         T: float = 0.05, slope_range: Tuple[float, float] = (-3.0, 1.0),
                         k_min: float = 1.0, k_max: Optional[float] = None) -> List[TrajectoryPair]:
    """Heat flows of random sloped fields; the slope sets the Besov regularity."""
    if k_max is None:
        k_max = grid.n / 6.0
    times = np.linspace(0.0, T, n_times)
    factors = np.array([heat_factor(grid, t) for t in times])
    bank = []
    for _ in range(size):
        pair = []
        for _ in range(2):
            c = random_coeffs(grid, rng, k_min, k_max, rng.uniform(*slope_range))
            pair.append(factors * (c / l2_norm_coeffs(c)))
        bank.append(TrajectoryPair(times=list(times), u=pair[0], v=pair[1]))
    return bank


def random_pair_bank(grid: Grid, rng: np.random.Generator, size: int, part: DyadicPartition,
                     slope_range: Tuple[float, float] = (-2.0, 1.0)) -> List[Tuple[ScalarField, ScalarField]]:
    """Band-resolved random pairs whose product stays inside the dealiased disk."""
    k_max = min(grid.n / 6.0, 0.75 * 2.0 ** (part.j_max + 1))
    bank = []
    for _ in range(size):
        f, g = (ScalarField(grid=grid, coeffs=random_coeffs(grid, rng, 1.0, k_max, rng.uniform(*slope_range)))
                for _ in range(2))
        bank.append((f, g))
    return bank


def _cl(coeffs: np.ndarray, times, rho: float, s: float, p: float, r: float, part) -> float:
    # homogeneous norms see fields modulo constants
    coeffs = coeffs.copy()
    coeffs[(Ellipsis,) + (0,) * part.grid.dim] = 0.0
    return chemin_lerner_norm(coeffs, MixedNormSpec(rho=rho, besov=BesovSpec(s=s, p=p, r=r),
                                                    interval=list(times)), part)


def _linf_time_norm(coeffs: np.ndarray, times, q: float) -> float:
    sup = [lp_norm_values(to_physical(c), math.inf) for c in coeffs]
    return float(time_lebesgue_norm(sup, times, q))


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs <= 1e-300 else math.inf


def _per_sample(fn, a: np.ndarray, b: np.ndarray, part) -> np.ndarray:
    return np.array([fn(x, y, part) for x, y in zip(a, b)])


def paraproduct_ratio(pair: TrajectoryPair, idx: Dict, part: DyadicPartition, variant: str = "linf") -> float:
    q, t = idx["q"], pair.times
    tuv = _per_sample(paraproduct_coeffs, pair.u, pair.v, part)
    if variant == "linf":
        lhs = _cl(tuv, t, q / 2, idx["s"], idx["p"], idx["r"], part)
        rhs = _linf_time_norm(pair.u, t, q) * _cl(pair.v, t, q, idx["s"], idx["p"], idx["r"], part)
    else:
        lhs = _cl(tuv, t, q / 2, idx["s1"] + idx["s2"], idx["p"], idx["r"], part)
        rhs = (_cl(pair.u, t, q, idx["s1"], math.inf, idx["r1"], part)
               * _cl(pair.v, t, q, idx["s2"], idx["p"], idx["r2"], part))
    return _ratio(lhs, rhs)


def remainder_ratio(pair: TrajectoryPair, idx: Dict, part: DyadicPartition) -> float:
    q, t = idx["q"], pair.times
    s_t, r_t = remainder_target(part.grid.dim, idx)
    ruv = _per_sample(remainder_coeffs, pair.u, pair.v, part)
    lhs = _cl(ruv, t, q / 2, s_t, idx["p"], r_t, part)
    rhs = (_cl(pair.u, t, q, idx["s1"], idx["p1"], idx["r1"], part)
           * _cl(pair.v, t, q, idx["s2"], idx["p2"], idx["r2"], part))
    return _ratio(lhs, rhs)


def product_ratio(pair: TrajectoryPair, idx: Dict, part: DyadicPartition, variant: str = "linf") -> float:
    q, t, n = idx["q"], pair.times, part.grid.dim
    uv = np.array([dealiased_product_coeffs(a, b, part.grid) for a, b in zip(pair.u, pair.v)])
    if variant == "linf":
        s, p, r = idx["s"], idx["p"], idx["r"]
        lhs = _cl(uv, t, q / 2, s, p, r, part)
        rhs = (_linf_time_norm(pair.u, t, q) * _cl(pair.v, t, q, s, p, r, part)
               + _cl(pair.u, t, q, s, p, r, part) * _linf_time_norm(pair.v, t, q))
    else:
        target = idx["s1"] + idx["s2"] - n * (inv(idx["p1"]) + inv(idx["p2"]) - inv(idx["p"]))
        lhs = _cl(uv, t, q / 2, target, idx["p"], idx["r"], part)
        rhs = (_cl(pair.u, t, q, idx["s1"], idx["p1"], idx["r1"], part)
               * _cl(pair.v, t, q, idx["s2"], idx["p2"], idx["r2"], part))
    return _ratio(lhs, rhs)


def _harness(lemma, idx, ratio, bank_a, bank_b, preset, threads) -> EstimateReport:
    return calibrate_and_assert(lemma, {k: float(v) for k, v in idx.items()}, ratio, bank_a, bank_b,
                                preset=preset, threads=threads)


def paraproduct_estimate_check(bank_a: Sequence[TrajectoryPair], bank_b: Sequence[TrajectoryPair],
                               indices: Dict, part: DyadicPartition, variant: str = "linf",
                               preset: Optional[float] = None, threads: Optional[int] = None) -> EstimateReport:
    """‖T_u v‖ in L̃^{q/2}Ḃ against the factor norms; ``variant`` is "linf" or "negative" (s1 < 0)."""
    idx = {"q": 4.0, **indices}
    lemma = f"paraproduct_{variant}"
    require(lemma, paraproduct_indices(variant, part.grid.dim, idx))
    return _harness(lemma, idx, lambda pair: paraproduct_ratio(pair, idx, part, variant),
                    bank_a, bank_b, preset, threads)


def remainder_estimate_check(bank_a: Sequence[TrajectoryPair], bank_b: Sequence[TrajectoryPair],
                             indices: Dict, part: DyadicPartition, preset: Optional[float] = None,
                             threads: Optional[int] = None) -> EstimateReport:
    idx = {"q": 4.0, **indices}
    require("remainder", remainder_indices(part.grid.dim, idx))
    return _harness("remainder", idx, lambda pair: remainder_ratio(pair, idx, part),
                    bank_a, bank_b, preset, threads)


def product_estimate_check(bank_a: Sequence[TrajectoryPair], bank_b: Sequence[TrajectoryPair],
                           indices: Dict, part: DyadicPartition, variant: str = "sobolev",
                           preset: Optional[float] = None, threads: Optional[int] = None) -> EstimateReport:
    """Product estimate; "linf" is the sum-of-two-terms form, "sobolev" the regularity-loss form."""
    idx = {"q": 4.0, **indices}
    lemma = f"product_{variant}"
    require(lemma, product_indices(variant, part.grid.dim, idx))
    return _harness(lemma, idx, lambda pair: product_ratio(pair, idx, part, variant),
                    bank_a, bank_b, preset, threads)


def key_product_indices(n: int, p: float, r: float, q: float) -> Dict:
    """The instance s1 = s2 = n/p - 1 + 2/q used by the contraction argument."""
    s = n / p - 1 + 2 / q
    return {"s1": s, "s2": s, "p1": p, "p2": p, "p": p, "r1": r, "r2": r, "r": r / 2, "q": q}

