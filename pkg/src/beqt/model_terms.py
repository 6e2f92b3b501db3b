"""Constitutive terms of the coupled system on a grid.

Index convention: ``grad_u[a, b] = d_b u_a``, so that
``Omega[a, b] = (d_b u_a - d_a u_b) / 2``.

Every function here works with full ``(d, d, N, N)`` matrix stacks and
follows the printed formulas term by term.  Products are filtered through
``product`` after each pairwise multiplication (the grid's dealiasing mask
by default).  The time stepper uses the fused 2D route in ``evolution``;
the two are checked against each other in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import tensor_core as tc
from .spectral import QTensorField, SpectralGrid, TensorField, VectorField
from .tensor_core import ModelParams

Product = Callable[[np.ndarray], np.ndarray]


def _product(grid: SpectralGrid, product: Optional[Product]) -> Product:
    return grid.dealias_phys if product is None else product


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise ValueError("fields live on different grids")
    return g


def velocity_gradient(u: VectorField) -> np.ndarray:
    """``G[a, b] = d_b u_a`` as a physical ``(2, 2, N, N)`` stack."""
    g = u.grid
    kd = (g.k1d, g.k2d)
    G_hat = np.stack([np.stack([1j * kd[b] * u.hat[a] for b in range(2)]) for a in range(2)])
    return g.to_physical(G_hat)


def q_gradient(Q: QTensorField) -> np.ndarray:
    """``dQ[a, b, k] = d_k Q_ab`` as a physical ``(d, d, 2, N, N)`` stack."""
    g = Q.grid
    M_hat = Q.matrix_hat
    return g.to_physical(np.stack([1j * g.k1d * M_hat, 1j * g.k2d * M_hat], axis=2))


def q_laplacian(Q: QTensorField) -> np.ndarray:
    return Q.grid.to_physical(-Q.grid.ksq * Q.matrix_hat)


@dataclass(frozen=True)
class VelocityGradientParts:
    D: np.ndarray
    Omega: np.ndarray


def strain_rotation(u: VectorField) -> VelocityGradientParts:
    G = velocity_gradient(u)
    Gt = np.swapaxes(G, 0, 1)
    return VelocityGradientParts(D=0.5 * (G + Gt), Omega=0.5 * (G - Gt))


def _qfield(grid: SpectralGrid, m: np.ndarray) -> QTensorField:
    return QTensorField.from_matrix(grid, m)


def compute_S_matrix(u: VectorField, Q: QTensorField, p: ModelParams,
                     product: Optional[Product] = None) -> np.ndarray:
    g = _same_grid(u, Q)
    f = _product(g, product)
    d = Q.dim
    parts = strain_rotation(u)
    D, Om = parts.D, parts.Omega
    Qm = Q.matrix
    eye = tc.identity_like(Qm)
    G = D + Om
    A = p.xi * D + Om
    B = p.xi * D - Om
    # (xi D + Omega)(Q + Id/d) + (Q + Id/d)(xi D - Omega)
    S = f(tc.matmul(A, Qm)) + A / d + f(tc.matmul(Qm, B)) + B / d
    trQG = tc.trace(f(tc.matmul(Qm, G)))
    S = S - 2.0 * p.xi * (f(Qm * trQG) + eye * trQG / d)
    return S


def compute_S(u: VectorField, Q: QTensorField, p: ModelParams,
              product: Optional[Product] = None) -> QTensorField:
    return _qfield(Q.grid, compute_S_matrix(u, Q, p, product))


def compute_H_matrix(Q: QTensorField, p: ModelParams,
                     product: Optional[Product] = None) -> np.ndarray:
    f = _product(Q.grid, product)
    return tc.bulk_force_matrix(Q.matrix, p, product=f) + p.L * q_laplacian(Q)


def compute_H(Q: QTensorField, p: ModelParams,
              product: Optional[Product] = None) -> QTensorField:
    return _qfield(Q.grid, compute_H_matrix(Q, p, product))


def stress_tau(Q: QTensorField, H: QTensorField, p: ModelParams,
               product: Optional[Product] = None) -> TensorField:
    """Symmetric extra stress.

    The trace correction is ``+ L (delta_ab / d) |grad Q|^2``, the reading
    under which the elastic stress cancels the transport work of ``Q``.
    """
    g = _same_grid(Q, H)
    f = _product(g, product)
    d = Q.dim
    Qm, Hm = Q.matrix, H.matrix
    eye = tc.identity_like(Qm)
    QH = tc.trace(f(tc.matmul(Qm, Hm)))
    tau = -p.xi * (f(tc.matmul(Qm, Hm)) + Hm / d) - p.xi * (f(tc.matmul(Hm, Qm)) + Hm / d)
    tau = tau + 2.0 * p.xi * (f(Qm * QH) + eye * QH / d)
    dQ = q_gradient(Q)
    E = f(np.einsum("gda...,gdb...->ab...", dQ, dQ))
    tau = tau - p.L * (E - eye * tc.trace(E) / d)
    return TensorField.from_physical(g, tau)


def stress_sigma(Q: QTensorField, H: QTensorField,
                 product: Optional[Product] = None) -> TensorField:
    g = _same_grid(Q, H)
    f = _product(g, product)
    Qm, Hm = Q.matrix, H.matrix
    return TensorField.from_physical(g, f(tc.matmul(Qm, Hm)) - f(tc.matmul(Hm, Qm)))


def tensor_divergence(T: TensorField) -> VectorField:
    """``(div T)_a = d_b T_ab``."""
    g = T.grid
    return VectorField(g, np.stack([1j * g.k1d * T.hat[a, 0] + 1j * g.k2d * T.hat[a, 1]
                                    for a in range(2)]))


def advect_Q(u: VectorField, Q: QTensorField, product: Optional[Product] = None) -> QTensorField:
    """``u . grad Q``."""
    g = _same_grid(u, Q)
    f = _product(g, product)
    grad = g.to_physical(np.stack([1j * g.k1d * Q.hat, 1j * g.k2d * Q.hat]))
    up = u.phys
    return QTensorField.from_physical(g, f(up[0] * grad[0] + up[1] * grad[1]), dim=Q.dim)


def advect_u(u: VectorField, product: Optional[Product] = None) -> VectorField:
    """``u . grad u``."""
    g = u.grid
    f = _product(g, product)
    grad = g.to_physical(np.stack([1j * g.k1d * u.hat, 1j * g.k2d * u.hat]))
    up = u.phys
    return VectorField.from_physical(g, f(up[0] * grad[0] + up[1] * grad[1]))
