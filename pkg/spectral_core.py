"""
Spectral fields on the periodic torus [0, 2π)^dim.

Coefficients are stored in FFT order with the convention
f(x) = Σ_k f̂(k) e^{ik·x}, so Parseval reads ‖f‖₂² = Σ|f̂(k)|² under the
normalized measure dx/(2π)^dim. All transforms go through scipy.fft with
``norm="forward"``.
"""
import logging
import struct
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import fft as sfft

import config

logger = logging.getLogger("rich")

CHECKPOINT_MAGIC = b"BMHD1"
_HEADER = struct.Struct("<5sBIdI")


class Grid(BaseModel):
    """Uniform grid of ``n`` points per axis on the 2π-periodic torus."""
    model_config = ConfigDict(frozen=True)

    dim: int
    n: int

    @field_validator("dim")
    @classmethod
    def _check_dim(cls, v):
        if v not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {v}")
        return v

    @field_validator("n")
    @classmethod
    def _check_n(cls, v):
        if v < 16 or v & (v - 1):
            raise ValueError(f"grid size N must be a power of two >= 16, got {v}")
        return v

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def k(self) -> np.ndarray:
        """Integer wavevectors, shape (dim, n, ..., n)."""
        return _lattice(self.dim, self.n)[0]

    @property
    def k2(self) -> np.ndarray:
        return _lattice(self.dim, self.n)[1]

    @property
    def kmag(self) -> np.ndarray:
        return _lattice(self.dim, self.n)[2]

    @property
    def resolved(self) -> np.ndarray:
        """False on the Nyquist rows."""
        return _lattice(self.dim, self.n)[3]

    @property
    def dealias_mask(self) -> np.ndarray:
        """Spherical 2/3 rule: keep |k| < N/3."""
        return _lattice(self.dim, self.n)[4]

    @property
    def dealias_radius(self) -> float:
        return self.n / 3.0

    def coordinates(self) -> np.ndarray:
        x = 2.0 * np.pi * np.arange(self.n) / self.n
        return np.array(np.meshgrid(*([x] * self.dim), indexing="ij"))


@lru_cache(maxsize=16)
def _lattice(dim: int, n: int):
    k1 = sfft.fftfreq(n, 1.0 / n)
    k = np.array(np.meshgrid(*([k1] * dim), indexing="ij"))
    k2 = np.sum(k ** 2, axis=0)
    kmag = np.sqrt(k2)
    resolved = np.all(k != -n // 2, axis=0)
    dealias = resolved & (kmag < n / 3.0)
    for arr in (k, k2, kmag, resolved, dealias):
        arr.setflags(write=False)
    return k, k2, kmag, resolved, dealias


def make_grid(dim: int, n: int) -> Grid:
    """Build a grid and its wavenumber lattice."""
    grid = Grid(dim=dim, n=n)
    _lattice(dim, n)
    return grid


class ScalarField(BaseModel):
    """Real scalar field held by its Fourier coefficients."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    coeffs: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self):
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}")
        return self

    def physical(self) -> np.ndarray:
        return to_physical(self.coeffs)

    def mean(self) -> float:
        return float(self.coeffs[(0,) * self.grid.dim].real)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(grid=self.grid, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(grid=self.grid, coeffs=self.coeffs - other.coeffs)

    def scaled(self, factor: float) -> "ScalarField":
        return ScalarField(grid=self.grid, coeffs=factor * self.coeffs)


class VectorField(BaseModel):
    """``dim`` components stacked on a shared grid, coeffs shape (dim, n, ..., n)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    coeffs: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self):
        expected = (self.grid.dim,) + self.grid.shape
        if self.coeffs.shape != expected:
            raise ValueError(f"vector coefficient shape {self.coeffs.shape} does not match {expected}")
        return self

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        grid = components[0].grid
        if len(components) != grid.dim or any(c.grid != grid for c in components):
            raise ValueError("vector field needs dim components on one grid")
        return cls(grid=grid, coeffs=np.stack([c.coeffs for c in components]))

    @property
    def components(self) -> List[ScalarField]:
        return [ScalarField(grid=self.grid, coeffs=c) for c in self.coeffs]

    def physical(self) -> np.ndarray:
        return to_physical(self.coeffs, axes=range(1, self.grid.dim + 1))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(grid=self.grid, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(grid=self.grid, coeffs=self.coeffs - other.coeffs)

    def scaled(self, factor: float) -> "VectorField":
        return VectorField(grid=self.grid, coeffs=factor * self.coeffs)


def _spatial_axes(arr: np.ndarray, dim: int) -> Tuple[int, ...]:
    return tuple(range(arr.ndim - dim, arr.ndim))


def to_physical(coeffs: np.ndarray, axes=None) -> np.ndarray:
    """Inverse transform to real grid values."""
    if axes is None:
        axes = tuple(range(coeffs.ndim))
    return sfft.ifftn(coeffs, axes=tuple(axes), norm="forward", workers=config.THREADS).real


def from_physical_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Forward transform of real grid values, Nyquist rows zeroed."""
    axes = _spatial_axes(values, grid.dim)
    coeffs = sfft.fftn(values, axes=axes, norm="forward", workers=config.THREADS)
    coeffs *= grid.resolved
    return coeffs


def from_physical(grid: Grid, values: np.ndarray) -> ScalarField:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(f"values of shape {values.shape} do not live on grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite grid values")
    return ScalarField(grid=grid, coeffs=from_physical_array(values, grid))


def vector_from_physical(grid: Grid, values: np.ndarray) -> VectorField:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.dim,) + grid.shape:
        raise ValueError(f"vector values of shape {values.shape} do not live on grid {grid.shape}")
    return VectorField(grid=grid, coeffs=from_physical_array(values, grid))


def reflect(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """Return c(-k) for the trailing ``dim`` axes in FFT order."""
    axes = _spatial_axes(coeffs, dim)
    return np.roll(np.flip(coeffs, axis=axes), 1, axis=axes)


def symmetrize(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Project onto Hermitian-symmetric (real-valued) coefficients."""
    sym = 0.5 * (coeffs + np.conj(reflect(coeffs, grid.dim)))
    return sym * grid.resolved


def is_hermitian(coeffs: np.ndarray, grid: Grid, tol: float = 1e-12) -> bool:
    scale = max(float(np.max(np.abs(coeffs), initial=0.0)), 1e-300)
    return float(np.max(np.abs(coeffs - np.conj(reflect(coeffs, grid.dim))), initial=0.0)) <= tol * scale


def lp_norm(f, p: float) -> float:
    """‖f‖_p under the normalized measure; vector fields use the pointwise Euclidean norm."""
    if not (p >= 1):
        raise ValueError(f"p must be >= 1, got {p}")
    values = f.physical()
    if isinstance(f, VectorField):
        values = np.sqrt(np.sum(values ** 2, axis=0))
    return lp_norm_values(values, p)


def lp_norm_values(values: np.ndarray, p: float) -> float:
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite field values")
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    if p == 2:
        return float(np.sqrt(np.mean(a * a)))
    return float(np.mean(a ** p) ** (1.0 / p))


def l2_norm_coeffs(coeffs: np.ndarray) -> float:
    """Parseval L² norm of a coefficient array (all components)."""
    return float(np.sqrt(np.sum(np.abs(coeffs) ** 2)))


def inner_product(f, g) -> float:
    return float(np.sum(np.real(f.coeffs * np.conj(g.coeffs))))


def leray_project_coeffs(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    k = grid.k
    k2 = np.where(grid.k2 == 0, 1.0, grid.k2)
    kdotv = np.sum(k * coeffs, axis=0)
    return coeffs - k * (kdotv / k2)


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields; the mean passes through."""
    return VectorField(grid=v.grid, coeffs=leray_project_coeffs(v.coeffs, v.grid))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(grid=v.grid, coeffs=np.sum(1j * v.grid.k * v.coeffs, axis=0))


def gradient(f: ScalarField) -> VectorField:
    return VectorField(grid=f.grid, coeffs=1j * f.grid.k * f.coeffs)


def laplacian(f):
    """Δf for scalar or vector fields."""
    return type(f)(grid=f.grid, coeffs=-f.grid.k2 * f.coeffs)


def curl2d(v: VectorField) -> ScalarField:
    """Scalar vorticity ∂₁v₂ − ∂₂v₁ of a 2D field."""
    if v.grid.dim != 2:
        raise ValueError("curl2d needs a 2D field")
    k = v.grid.k
    return ScalarField(grid=v.grid, coeffs=1j * (k[0] * v.coeffs[1] - k[1] * v.coeffs[0]))


def dealiased_product_coeffs(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Coefficients of the 2/3-truncated product of two coefficient arrays."""
    mask = grid.dealias_mask
    prod = to_physical(a * mask, axes=_spatial_axes(a, grid.dim)) * to_physical(b * mask, axes=_spatial_axes(b, grid.dim))
    return from_physical_array(prod, grid) * mask


def multiply_dealiased(f: ScalarField, g: ScalarField) -> ScalarField:
    """Pointwise product with 2/3-rule truncation of inputs and output."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    return ScalarField(grid=f.grid, coeffs=dealiased_product_coeffs(f.coeffs, g.coeffs, f.grid))


def heat_factor(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-grid.k2 * t)


def resample_coeffs(coeffs: np.ndarray, source: Grid, target: Grid) -> np.ndarray:
    """Spectral zero padding (prolongation) or truncation (restriction)."""
    if source.dim != target.dim:
        raise ValueError("grids of different dimension")
    lead = coeffs.shape[: coeffs.ndim - source.dim]
    out = np.zeros(lead + target.shape, dtype=complex)
    m = min(source.n, target.n)
    idx = np.concatenate([np.arange(0, m // 2), np.arange(-m // 2 + 1, 0)])
    src = np.ix_(*([idx % source.n] * source.dim))
    dst = np.ix_(*([idx % target.n] * target.dim))
    out[(Ellipsis,) + dst] = coeffs[(Ellipsis,) + src]
    return out * target.resolved


def prolong(f, fine: Grid):
    return type(f)(grid=fine, coeffs=resample_coeffs(f.coeffs, f.grid, fine))


def restrict(f, coarse: Grid):
    return type(f)(grid=coarse, coeffs=resample_coeffs(f.coeffs, f.grid, coarse))


def random_coeffs(grid: Grid, rng: np.random.Generator, k_min: float, k_max: float,
                  slope: float = 0.0, components: int = 0) -> np.ndarray:
    """Random real coefficients with amplitude |k|^slope on the shell k_min <= |k| <= k_max."""
    shape = ((components,) if components else ()) + grid.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    shell = (grid.kmag >= k_min) & (grid.kmag <= k_max) & grid.resolved & (grid.k2 > 0)
    amp = np.where(shell, np.where(grid.k2 > 0, grid.kmag, 1.0) ** slope, 0.0)
    return symmetrize(raw * amp, grid)


def random_scalar_field(grid: Grid, rng: np.random.Generator, k_min: float = 1.0,
                        k_max: float = 8.0, slope: float = 0.0, norm: float = 1.0) -> ScalarField:
    coeffs = random_coeffs(grid, rng, k_min, k_max, slope)
    coeffs *= norm / max(l2_norm_coeffs(coeffs), 1e-300)
    return ScalarField(grid=grid, coeffs=coeffs)


def random_solenoidal_field(grid: Grid, rng: np.random.Generator, k_min: float = 1.0,
                            k_max: float = 8.0, slope: float = 0.0, norm: float = 1.0) -> VectorField:
    coeffs = leray_project_coeffs(random_coeffs(grid, rng, k_min, k_max, slope, grid.dim), grid)
    coeffs *= norm / max(l2_norm_coeffs(coeffs), 1e-300)
    return VectorField(grid=grid, coeffs=coeffs)


def write_checkpoint(path, fields: Sequence[VectorField], time: float) -> None:
    """Binary checkpoint: header then little-endian float64 (re, im) pairs per coefficient.

    Coefficients go out as ``<c16`` rather than single-precision complex64 pairs, so a read after a write
    returns the solver state bit for bit.
    """
    if not fields:
        raise ValueError("nothing to checkpoint")
    grid = fields[0].grid
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(CHECKPOINT_MAGIC, grid.dim, grid.n, float(time), len(fields)))
            for f in fields:
                if f.grid != grid:
                    raise ValueError("checkpoint fields must share a grid")
                fh.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())
    except OSError as e:
        raise OSError(f"cannot write checkpoint {path}: {e}") from e
    logger.debug(f"checkpoint written to {path} (t={time})")


def read_checkpoint(path) -> Tuple[List[VectorField], float]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated checkpoint header")
        magic, dim, n, time, count = _HEADER.unpack(head)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic {magic!r}")
        grid = make_grid(dim, n)
        size = dim * n ** dim
        fields = []
        for _ in range(count):
            raw = fh.read(16 * size)
            if len(raw) != 16 * size:
                raise ValueError(f"{path}: truncated checkpoint payload")
            coeffs = np.frombuffer(raw, dtype="<c16").astype(complex).reshape((dim,) + grid.shape)
            fields.append(VectorField(grid=grid, coeffs=coeffs))
    return fields, time
