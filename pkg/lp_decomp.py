"""
Littlewood-Paley decomposition on the torus lattice.

The radial profile χ equals 1 on |ξ| <= 3/4, vanishes on |ξ| >= 4/3 and is
C^∞ in between; φ(ξ) = χ(ξ/2) − χ(ξ) is supported in 3/4 < |ξ| < 8/3.
Δ_j multiplies by φ(2^{-j}k), S_j by χ(2^{-j}k).
"""
import logging
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

import config
from spectral_core import Grid, ScalarField, VectorField, lp_norm_values, to_physical

logger = logging.getLogger("rich")

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0
PHI_OUTER = 8.0 / 3.0


def _psi(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t) -> np.ndarray:
    """C^∞ step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a, b = _psi(t), _psi(1.0 - t)
    return a / (a + b)


def chi_profile(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 1.0 - smooth_step((r - CHI_INNER) / (CHI_OUTER - CHI_INNER))


def phi_profile(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return chi_profile(r / 2.0) - chi_profile(r)


class DyadicPartition(BaseModel):
    """Band multipliers φ(2^{-j}k) tabulated for j_min <= j <= j_max."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    j_min: int
    j_max: int
    phi: np.ndarray

    @model_validator(mode="after")
    def _check(self):
        if self.j_max < self.j_min:
            raise ValueError(f"empty band range [{self.j_min}, {self.j_max}]")
        if PHI_OUTER * 2.0 ** self.j_max > self.grid.dealias_radius * (1 + 1e-12):
            raise ValueError(
                f"top band j_max={self.j_max} reaches |k|={PHI_OUTER * 2.0 ** self.j_max:.2f}, "
                f"beyond the dealiased radius {self.grid.dealias_radius:.2f}")
        return self

    @property
    def bands(self) -> List[int]:
        return list(range(self.j_min, self.j_max + 1))

    @property
    def n_bands(self) -> int:
        return self.j_max - self.j_min + 1

    def band_multiplier(self, j: int) -> np.ndarray:
        self._check_band(j)
        return self.phi[j - self.j_min]

    def low_pass_multiplier(self, j: int) -> np.ndarray:
        return chi_profile(2.0 ** (-j) * self.grid.kmag)

    def coverage(self) -> np.ndarray:
        return self.phi.sum(axis=0)

    def covered_annulus(self):
        return CHI_OUTER * 2.0 ** self.j_min, CHI_INNER * 2.0 ** (self.j_max + 1)

    def _check_band(self, j: int) -> None:
        if not (self.j_min <= j <= self.j_max):
            raise ValueError(f"band j={j} outside partition range [{self.j_min}, {self.j_max}]")


def default_band_range(n: int):
    return -2, int(np.floor(np.log2(2.0 * n / 3.0))) - 2


def build_partition(grid: Grid, j_min: Optional[int] = None, j_max: Optional[int] = None) -> DyadicPartition:
    """Tabulate the band multipliers on ``grid``."""
    lo, hi = default_band_range(grid.n)
    j_min = lo if j_min is None else j_min
    j_max = hi if j_max is None else j_max
    if PHI_OUTER * 2.0 ** j_max > grid.dealias_radius * (1 + 1e-12):
        raise ValueError(
            f"top band j_max={j_max} reaches |k|={PHI_OUTER * 2.0 ** j_max:.2f}, "
            f"beyond the dealiased radius {grid.dealias_radius:.2f}")
    phi = np.array([phi_profile(2.0 ** (-j) * grid.kmag) for j in range(j_min, j_max + 1)])
    phi.setflags(write=False)
    logger.debug(f"partition on N={grid.n}: bands {j_min}..{j_max}")
    return DyadicPartition(grid=grid, j_min=j_min, j_max=j_max, phi=phi)


def require_mean_free(coeffs: np.ndarray, dim: int, what: str = "field") -> None:
    origin = (Ellipsis,) + (0,) * dim
    zero = np.max(np.abs(coeffs[origin]))
    scale = np.sqrt(np.sum(np.abs(coeffs) ** 2))
    if zero > config.TOLERANCES['MEAN_FREE'] * max(scale, 1e-300) and zero > 1e-300:
        raise ValueError(f"{what} is not mean-free (zero mode {zero:.3e})")


def delta_j(f, j: int, part: DyadicPartition):
    """Band-pass Δ_j of a mean-free scalar or vector field."""
    require_mean_free(f.coeffs, part.grid.dim)
    return type(f)(grid=f.grid, coeffs=f.coeffs * part.band_multiplier(j))


def s_j(f, j: int, part: DyadicPartition):
    """Low-pass S_j; j may run up to j_max + 1."""
    if not (part.j_min <= j <= part.j_max + 1):
        raise ValueError(f"low-pass index j={j} outside [{part.j_min}, {part.j_max + 1}]")
    require_mean_free(f.coeffs, part.grid.dim)
    return type(f)(grid=f.grid, coeffs=f.coeffs * part.low_pass_multiplier(j))


def band_decompose(coeffs: np.ndarray, part: DyadicPartition) -> np.ndarray:
    """All band pieces at once, shape (n_bands,) + coeffs.shape."""
    extra = coeffs.ndim - part.grid.dim
    phi = part.phi.reshape((part.n_bands,) + (1,) * extra + part.grid.shape)
    return phi * coeffs[None]


def band_lp_norms(coeffs: np.ndarray, part: DyadicPartition, p: float) -> np.ndarray:
    """‖Δ_j f‖_p per band for a scalar coefficient array (Parseval when p = 2)."""
    pieces = band_decompose(coeffs, part)
    axes = tuple(range(1, pieces.ndim))
    if p == 2:
        return np.sqrt(np.sum(np.abs(pieces) ** 2, axis=axes))
    values = to_physical(pieces, axes=axes)
    return np.array([lp_norm_values(v, p) for v in values])


def active_bands(f, part: DyadicPartition, tol: float = 1e-14) -> List[int]:
    scale = np.sqrt(np.sum(np.abs(f.coeffs) ** 2))
    norms = np.sqrt(np.sum(np.abs(band_decompose(f.coeffs, part)) ** 2,
                           axis=tuple(range(1, f.coeffs.ndim + 1))))
    return [j for j, v in zip(part.bands, norms) if v > tol * max(scale, 1e-300)]


def uncovered_content(coeffs: np.ndarray, part: DyadicPartition) -> float:
    """L² content of ``coeffs`` where the bands do not sum to one."""
    miss = np.abs(1.0 - part.coverage()) > 1e-12
    miss[(0,) * part.grid.dim] = False
    return float(np.sqrt(np.sum(np.abs(coeffs * miss) ** 2)))


def is_band_resolved(f, part: DyadicPartition, tol: float = 1e-12) -> bool:
    scale = np.sqrt(np.sum(np.abs(f.coeffs) ** 2))
    return uncovered_content(f.coeffs, part) <= tol * max(scale, 1e-300)


def bernstein_ratio(f: ScalarField, j: int, part: DyadicPartition, p: float) -> float:
    """‖∇Δ_j f‖_p / ‖Δ_j f‖_p with the pointwise Euclidean gradient."""
    piece = delta_j(f, j, part)
    base = lp_norm_values(piece.physical(), p)
    if base == 0.0:
        raise ValueError(f"Δ_{j} f vanishes")
    grad = to_physical(1j * part.grid.k * piece.coeffs, axes=range(1, part.grid.dim + 1))
    return lp_norm_values(np.sqrt(np.sum(grad ** 2, axis=0)), p) / base


def partition_defect(part: DyadicPartition) -> Dict[str, float]:
    """Deviations from the partition identities on the lattice."""
    kmag = part.grid.kmag
    top = CHI_INNER * 2.0 ** part.j_max
    inner = kmag <= top
    homog = (kmag >= CHI_OUTER * 2.0 ** part.j_min) & inner
    nonneg = [j for j in part.bands if j >= 0]
    inhom = chi_profile(kmag) + sum(part.phi[j - part.j_min] for j in nonneg)
    overlap = 0.0
    for a in range(part.n_bands):
        for b in range(a + 2, part.n_bands):
            overlap = max(overlap, float(np.max(np.abs(part.phi[a] * part.phi[b]))))
    return {
        "inhomogeneous_unity": float(np.max(np.abs(inhom[inner] - 1.0), initial=0.0)),
        "homogeneous_unity": float(np.max(np.abs(part.coverage()[homog] - 1.0), initial=0.0)),
        "orthogonality": overlap,
    }
