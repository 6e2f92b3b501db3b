"""Fourier representation of fields on the periodic square [0, 2pi)^2.

Spectral coefficients are stored in the half-plane layout of a real FFT,
shape ``(N, N//2 + 1)``, normalised so that the coefficient of
``exp(i k.x)`` does not depend on ``N`` (a constant field ``c`` has
``hat[0, 0] == c``).  Axis 0 is the ``x`` direction, axis 1 is ``y``.

All integrals are taken over the torus (area ``4 pi^2``), not averaged.
"""

from __future__ import annotations

import os
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft

from . import tensor_core as tc

DEALIAS_RULES = ("two_thirds", "half")


def fft_workers() -> int:
    """Thread count for FFTs, capped by ``BEQT_THREADS``."""
    env = os.environ.get("BEQT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"BEQT_THREADS must be an integer, got {env!r}") from None
    return 1


class SpectralGrid:
    """Immutable description of an ``N x N`` periodic grid and its wavenumbers."""

    def __init__(self, N: int, dim: int = 2, dealias_rule: str = "two_thirds"):
        if dim != 2:
            raise ValueError("only two-dimensional grids are supported")
        if N < 16 or N & (N - 1):
            raise ValueError(f"N must be a power of two >= 16, got {N!r}")
        if dealias_rule not in DEALIAS_RULES:
            raise ValueError(f"dealias_rule must be one of {DEALIAS_RULES}")
        self.N = int(N)
        self.dim = dim
        self.dealias_rule = dealias_rule
        self.spec_shape = (N, N // 2 + 1)
        self.phys_shape = (N, N)
        self.area = (2 * np.pi) ** 2
        self.cell_area = self.area / N**2

        k1 = np.fft.fftfreq(N, 1.0 / N).round().astype(int)
        k2 = np.arange(N // 2 + 1)
        self.k1 = k1[:, None].astype(float)
        self.k2 = k2[None, :].astype(float)
        # first derivatives drop the unpaired Nyquist mode to stay skew-adjoint
        self.k1d = np.where(np.abs(k1) == N // 2, 0, k1)[:, None].astype(float)
        self.k2d = np.where(k2 == N // 2, 0, k2)[None, :].astype(float)
        self.ksq = self.k1**2 + self.k2**2
        self.kmag = np.sqrt(self.ksq)

        self.dealias_mask = self.mask_for(dealias_rule)
        self._dealias_f = self.dealias_mask.astype(float)

        # multiplicity of each stored mode in the full spectrum (Parseval weights)
        w = np.full(self.spec_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        self.weights = w
        self.workers = fft_workers()

    def __repr__(self):
        return f"SpectralGrid(N={self.N}, dealias_rule={self.dealias_rule!r})"

    def __eq__(self, other):
        return (
            isinstance(other, SpectralGrid)
            and self.N == other.N
            and self.dealias_rule == other.dealias_rule
        )

    def __hash__(self):
        return hash((self.N, self.dealias_rule))

    def with_size(self, N: int) -> "SpectralGrid":
        return SpectralGrid(N, self.dim, self.dealias_rule)

    def mask_for(self, rule: str) -> np.ndarray:
        """Boolean dealiasing mask: ``|k_j| < N/3`` (two_thirds) or ``< N/4`` (half)."""
        if rule not in DEALIAS_RULES:
            raise ValueError(f"dealias_rule must be one of {DEALIAS_RULES}")
        cutoff = self.N / 3.0 if rule == "two_thirds" else self.N / 4.0
        return (np.abs(self.k1) < cutoff) & (np.abs(self.k2) < cutoff)

    # --- transforms -------------------------------------------------------
    def coords(self):
        x = 2 * np.pi * np.arange(self.N) / self.N
        return np.meshgrid(x, x, indexing="ij")

    def to_spectral(self, phys: np.ndarray) -> np.ndarray:
        phys = np.asarray(phys, dtype=float)
        if phys.shape[-2:] != self.phys_shape:
            raise ValueError(f"physical array shape {phys.shape} does not match grid N={self.N}")
        return sfft.rfft2(phys, axes=(-2, -1), workers=self.workers) / self.N**2

    def to_physical(self, hat: np.ndarray) -> np.ndarray:
        if hat.shape[-2:] != self.spec_shape:
            raise ValueError(f"spectral array shape {hat.shape} does not match grid N={self.N}")
        return sfft.irfft2(hat * self.N**2, s=self.phys_shape, axes=(-2, -1), workers=self.workers)

    def filter_phys(self, phys: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return self.to_physical(self.to_spectral(phys) * mask)

    def dealias_phys(self, phys: np.ndarray) -> np.ndarray:
        return self.filter_phys(phys, self._dealias_f)

    # --- masks and multipliers --------------------------------------------
    def jn_mask(self, n: int) -> np.ndarray:
        """Indicator of the annulus ``1/n <= |k| <= n``."""
        if n < 1:
            raise ValueError(f"mollification level must be >= 1, got {n!r}")
        return ((self.kmag >= 1.0 / n) & (self.kmag <= n)).astype(float)

    def derivative_multiplier(self, multi_index: Sequence[int]) -> np.ndarray:
        m1, m2 = multi_index
        k1 = self.k1d if m1 % 2 else self.k1
        k2 = self.k2d if m2 % 2 else self.k2
        return (1j * k1) ** m1 * (1j * k2) ** m2

    # --- quadrature -------------------------------------------------------
    def integrate(self, phys: np.ndarray) -> np.ndarray:
        return phys.sum(axis=(-2, -1)) * self.cell_area

    def spectral_inner(self, f_hat: np.ndarray, g_hat: np.ndarray) -> float:
        """``int f g`` via Parseval, summed over any leading component axes."""
        return float(np.sum(self.weights * (f_hat * np.conj(g_hat)).real) * self.area)

    def l2_norm_sq(self, f_hat: np.ndarray) -> float:
        return self.spectral_inner(f_hat, f_hat)


def resample(hat: np.ndarray, N_from: int, N_to: int) -> np.ndarray:
    """Zero-pad or truncate coefficients between grid sizes.

    Only modes with ``|k_j| < min(N_from, N_to)/2`` are transferred; the
    unpaired Nyquist modes are dropped.
    """
    K = min(N_from, N_to)
    k = np.fft.fftfreq(N_from, 1.0 / N_from).round().astype(int)
    keep = np.nonzero(np.abs(k) < K // 2)[0]
    rows_to = k[keep] % N_to
    out = np.zeros(hat.shape[:-2] + (N_to, N_to // 2 + 1), dtype=complex)
    out[..., rows_to, : K // 2] = hat[..., keep, : K // 2]
    return out


def full_spectrum(hat: np.ndarray) -> np.ndarray:
    """Expand half-plane coefficients to the full ``N x N`` mode array."""
    N = hat.shape[-2]
    full = np.zeros(hat.shape[:-1] + (N,), dtype=complex)
    full[..., : N // 2 + 1] = hat
    rows = (-np.arange(N)) % N
    cols = np.arange(N // 2 + 1, N)
    full[..., cols] = np.conj(hat[..., rows, :][..., N - cols])
    return full


def half_spectrum(full: np.ndarray) -> np.ndarray:
    N = full.shape[-1]
    return np.array(full[..., : N // 2 + 1])


# --- fields -----------------------------------------------------------------


class Field:
    """Grid-aware field stored by its spectral coefficients.

    ``hat`` has shape ``comp_shape + grid.spec_shape``.  Physical samples are
    computed on demand and cached; instances are treated as immutable.
    """

    comp_ndim = 0

    def __init__(self, grid: SpectralGrid, hat: np.ndarray):
        hat = np.asarray(hat, dtype=complex)
        if hat.shape[-2:] != grid.spec_shape:
            raise ValueError(f"coefficient shape {hat.shape} does not match grid N={grid.N}")
        if hat.ndim != self.comp_ndim + 2:
            raise ValueError(f"{type(self).__name__} expects {self.comp_ndim} component axes")
        self.grid = grid
        self.hat = hat
        self._phys = None

    @classmethod
    def from_physical(cls, grid: SpectralGrid, phys: np.ndarray, **kw):
        return cls(grid, grid.to_spectral(phys), **kw)

    @classmethod
    def zeros(cls, grid: SpectralGrid, comp_shape=(), **kw):
        return cls(grid, np.zeros(tuple(comp_shape) + grid.spec_shape, dtype=complex), **kw)

    @property
    def phys(self) -> np.ndarray:
        if self._phys is None:
            self._phys = self.grid.to_physical(self.hat)
        return self._phys

    def _new(self, hat):
        return type(self)(self.grid, hat)

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check_grid(other)
        return self._new(self.hat + other.hat)

    def __sub__(self, other):
        self._check_grid(other)
        return self._new(self.hat - other.hat)

    def __neg__(self):
        return self._new(-self.hat)

    def __mul__(self, s):
        return self._new(self.hat * s)

    __rmul__ = __mul__

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.l2_norm_sq(self.hat)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.hat)))


class ScalarField(Field):
    comp_ndim = 0


class VectorField(Field):
    comp_ndim = 1

    def divergence(self) -> ScalarField:
        g = self.grid
        return ScalarField(g, 1j * g.k1d * self.hat[0] + 1j * g.k2d * self.hat[1])

    def divergence_residual(self) -> float:
        """Max over modes of ``|k . u_hat|`` relative to the largest ``|k||u_hat|``."""
        g = self.grid
        div = np.abs(g.k1d * self.hat[0] + g.k2d * self.hat[1])
        scale = np.max(np.sqrt(g.k1d**2 + g.k2d**2) * np.sqrt(np.sum(np.abs(self.hat) ** 2, axis=0)))
        return float(div.max() / scale) if scale > 0 else 0.0


class QTensorField(Field):
    """Traceless symmetric tensor field stored by minimal components."""

    comp_ndim = 1

    def __init__(self, grid: SpectralGrid, hat: np.ndarray, dim: int = 2):
        super().__init__(grid, hat)
        if hat.shape[0] != tc.NCOMP[dim]:
            raise ValueError(f"Q-tensor of dim {dim} needs {tc.NCOMP[dim]} components")
        self.dim = dim

    def _new(self, hat):
        return QTensorField(self.grid, hat, self.dim)

    @property
    def matrix(self) -> np.ndarray:
        """Physical samples as a ``(d, d, N, N)`` stack."""
        return tc.to_matrix(self.phys, self.dim)

    @property
    def matrix_hat(self) -> np.ndarray:
        return tc.to_matrix(self.hat, self.dim)

    @classmethod
    def from_matrix(cls, grid: SpectralGrid, m: np.ndarray) -> "QTensorField":
        return cls(grid, grid.to_spectral(tc.from_matrix(m)), m.shape[0])

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.l2_norm_sq(self.matrix_hat)))


class TensorField(Field):
    """General ``d x d`` tensor field (stresses)."""

    comp_ndim = 2


# --- operations ---------------------------------------------------------------


def transform(field_or_array, direction: str, grid: Optional[SpectralGrid] = None):
    """Move between representations.

    ``to_spectral`` takes a physical array (and ``grid``) and returns
    coefficients; ``to_physical`` takes a field or coefficient array.
    """
    if direction == "to_spectral":
        if isinstance(field_or_array, Field):
            return field_or_array.hat
        if grid is None:
            raise ValueError("a grid is required to transform a bare array")
        return grid.to_spectral(field_or_array)
    if direction == "to_physical":
        if isinstance(field_or_array, Field):
            return field_or_array.phys
        if grid is None:
            raise ValueError("a grid is required to transform a bare array")
        return grid.to_physical(field_or_array)
    raise ValueError(f"unknown direction {direction!r}")


def derivative(field: Field, multi_index: Sequence[int]) -> Field:
    return field._new(field.hat * field.grid.derivative_multiplier(multi_index))


def laplacian(field: Field) -> Field:
    return field._new(-field.grid.ksq * field.hat)


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(g, np.stack([1j * g.k1d * f.hat, 1j * g.k2d * f.hat]))


def leray_hat(grid: SpectralGrid, u_hat: np.ndarray) -> np.ndarray:
    k1, k2 = grid.k1d, grid.k2d
    kk = k1**2 + k2**2
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(kk > 0, 1.0 / np.where(kk > 0, kk, 1.0), 0.0)
    kdotu = (k1 * u_hat[0] + k2 * u_hat[1]) * inv
    return np.stack([u_hat[0] - k1 * kdotu, u_hat[1] - k2 * kdotu])


def leray_project(u: VectorField) -> VectorField:
    return VectorField(u.grid, leray_hat(u.grid, u.hat))


def mollify_Jn(field: Field, n: int) -> Field:
    return field._new(field.hat * field.grid.jn_mask(n))


def dealias(field: Field) -> Field:
    return field._new(field.hat * field.grid._dealias_f)


def padded_product(grid: SpectralGrid, f_hat: np.ndarray, g_hat: np.ndarray) -> np.ndarray:
    """Alias-free product of two fields, computed on a ``2N`` grid.

    The result is returned on the original grid (modes ``|k_j| < N/2``).
    """
    big = grid.with_size(2 * grid.N)
    fp = big.to_physical(resample(f_hat, grid.N, big.N))
    gp = big.to_physical(resample(g_hat, grid.N, big.N))
    return resample(big.to_spectral(fp * gp), big.N, grid.N)
