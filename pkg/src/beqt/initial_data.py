"""Initial-data generators.

``random_band_limited`` draws smooth random ``(Q, u)`` with prescribed
``||Q||_{H^1}`` and ``||u||_{L^2}``; ``director_winding`` builds a uniaxial
texture whose director angle winds an integer number of times across the
box.  Both are deterministic in their seed.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .evolution import SimState
from .spectral import QTensorField, SpectralGrid, VectorField, leray_hat
from .tensor_core import ModelParams

GENERATORS = ("random_band_limited", "director_winding")


def random_hat(grid: SpectralGrid, rng: np.random.Generator, ncomp: int,
               kmax: float, slope: float = 1.0) -> np.ndarray:
    """Random real-field coefficients supported on ``1 <= |k| <= kmax``.

    Amplitudes decay like ``exp(-slope |k| / kmax)``; the field is built in
    physical space so conjugate symmetry is exact.
    """
    shape = (ncomp,) + grid.spec_shape
    hat = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    support = (grid.kmag >= 1) & (grid.kmag <= kmax) & grid.dealias_mask
    hat = hat * support * np.exp(-slope * grid.kmag / kmax)
    # enforce Hermitian symmetry of the stored half-plane; the support is
    # symmetric under k -> -k, so re-applying it clears round-off only
    return grid.to_spectral(grid.to_physical(hat)) * support


def h1_norm(Q: QTensorField) -> float:
    g = Q.grid
    M = Q.matrix_hat
    return float(np.sqrt(g.l2_norm_sq(M) + g.l2_norm_sq(np.sqrt(g.ksq) * M)))


def random_band_limited(grid: SpectralGrid, params: ModelParams, seed: int,
                        kmax: float = 4.0, q_h1: float = 1.0, u_l2: float = 1.0,
                        slope: float = 1.0, galerkin_n: Optional[int] = None) -> SimState:
    rng = np.random.default_rng(seed)
    Q = QTensorField(grid, random_hat(grid, rng, 2, kmax, slope))
    u_hat = leray_hat(grid, random_hat(grid, rng, 2, kmax, slope))
    u = VectorField(grid, u_hat)
    qn = h1_norm(Q)
    un = u.l2_norm()
    Q = Q * (q_h1 / qn if qn > 0 else 0.0)
    u = u * (u_l2 / un if un > 0 else 0.0)
    return SimState(0.0, Q, u, params, galerkin_n)


def director_winding(grid: SpectralGrid, params: ModelParams, seed: int,
                     s: float = 0.5, winding=(1, 0), u_l2: float = 0.0,
                     kmax: float = 4.0, galerkin_n: Optional[int] = None) -> SimState:
    """Uniaxial ``s (n n - Id/2)`` with ``n = (cos th, sin th)``, ``th = m.x``.

    The velocity is random band-limited with norm ``u_l2`` (zero by default).
    """
    X, Y = grid.coords()
    th = winding[0] * X + winding[1] * Y
    comps = np.stack([0.5 * s * np.cos(2 * th), 0.5 * s * np.sin(2 * th)])
    Q = QTensorField.from_physical(grid, comps)
    rng = np.random.default_rng(seed)
    u = VectorField(grid, leray_hat(grid, random_hat(grid, rng, 2, kmax)))
    un = u.l2_norm()
    u = u * (u_l2 / un if un > 0 else 0.0)
    return SimState(0.0, Q, u, params, galerkin_n)


def make_initial(name: str, grid: SpectralGrid, params: ModelParams, seed: int, **kw) -> SimState:
    if name == "random_band_limited":
        return random_band_limited(grid, params, seed, **kw)
    if name == "director_winding":
        return director_winding(grid, params, seed, **kw)
    raise ValueError(f"unknown initial-data generator {name!r}; choose from {GENERATORS}")
