"""Pointwise algebra on traceless symmetric d x d matrices (d = 2, 3).

Matrices are stored through their minimal independent components, so that
symmetry and tracelessness hold by construction:

* d = 2: ``(q11, q12)``
* d = 3: ``(q11, q12, q13, q22, q23)`` with ``q33 = -q11 - q22``

The array helpers (``to_matrix``, ``from_matrix``, ``matmul``, ...) keep the
matrix indices on the *leading* axes, ``(d, d, *batch)``, so the same code
serves single tensors, Monte-Carlo batches and gridded fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

NCOMP = {2: 2, 3: 5}

_COMP_INDEX = {
    2: ((0, 0), (0, 1)),
    3: ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2)),
}


def _check_dim(dim: int) -> None:
    if dim not in NCOMP:
        raise ValueError(f"dim must be 2 or 3, got {dim!r}")


def to_matrix(comps: np.ndarray, dim: int) -> np.ndarray:
    """Rebuild the full ``(d, d, *batch)`` matrix from minimal components."""
    _check_dim(dim)
    comps = np.asarray(comps)
    if comps.shape[0] != NCOMP[dim]:
        raise ValueError(
            f"expected {NCOMP[dim]} components for dim={dim}, got {comps.shape[0]}"
        )
    m = np.zeros((dim, dim) + comps.shape[1:], dtype=comps.dtype)
    for c, (i, j) in enumerate(_COMP_INDEX[dim]):
        m[i, j] = comps[c]
        m[j, i] = comps[c]
    # the last diagonal entry closes the trace exactly
    if dim == 2:
        m[1, 1] = -comps[0]
    else:
        m[2, 2] = -(comps[0] + comps[3])
    return m


def from_matrix(m: np.ndarray) -> np.ndarray:
    """Extract minimal components from a (traceless symmetric) matrix stack."""
    dim = m.shape[0]
    _check_dim(dim)
    return np.stack([m[i, j] for i, j in _COMP_INDEX[dim]])


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ik...,kj...->ij...", a, b)


def trace(a: np.ndarray) -> np.ndarray:
    return np.einsum("ii...->...", a)


def frobenius_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``tr(A B)`` for symmetric arguments, i.e. ``A_ab B_ba``."""
    return np.einsum("ij...,ji...->...", a, b)


def identity_like(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    eye = np.zeros_like(a)
    for i in range(d):
        eye[i, i] = 1.0
    return eye


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the Beris-Edwards / Landau-de Gennes model."""

    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    L: float = 1.0
    Gamma: float = 1.0
    nu: float = 1.0
    xi: float = 0.0
    dim: int = 2

    def __post_init__(self):
        _check_dim(self.dim)
        for name in ("c", "L", "Gamma", "nu"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        for name in ("a", "b", "c", "L", "Gamma", "nu", "xi"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class QTensor:
    """A single traceless symmetric tensor stored by its minimal components."""

    dim: int
    comps: tuple

    def __post_init__(self):
        _check_dim(self.dim)
        comps = tuple(float(c) for c in self.comps)
        if len(comps) != NCOMP[self.dim]:
            raise ValueError(f"dim={self.dim} needs {NCOMP[self.dim]} components")
        object.__setattr__(self, "comps", comps)

    @classmethod
    def from_matrix(cls, m) -> "QTensor":
        m = np.asarray(m, dtype=float)
        return cls(m.shape[0], tuple(from_matrix(m)))

    @property
    def matrix(self) -> np.ndarray:
        return to_matrix(np.array(self.comps), self.dim)

    @property
    def norm(self) -> float:
        m = self.matrix
        return float(np.sqrt(np.sum(m * m)))

    def __add__(self, other: "QTensor") -> "QTensor":
        _same_dim(self, other)
        return QTensor(self.dim, tuple(x + y for x, y in zip(self.comps, other.comps)))

    def __sub__(self, other: "QTensor") -> "QTensor":
        _same_dim(self, other)
        return QTensor(self.dim, tuple(x - y for x, y in zip(self.comps, other.comps)))

    def __mul__(self, s: float) -> "QTensor":
        return QTensor(self.dim, tuple(s * x for x in self.comps))

    __rmul__ = __mul__


def _same_dim(a: QTensor, b: QTensor) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def uniaxial(n, s: float, dim: int) -> QTensor:
    """``s (n (x) n - Id/d)`` for a unit director ``n``."""
    _check_dim(dim)
    n = np.asarray(n, dtype=float)
    if n.shape != (dim,):
        raise ValueError(f"director must have {dim} components")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError(f"director is not a unit vector (|n| = {np.linalg.norm(n)!r})")
    m = s * (np.outer(n, n) - np.eye(dim) / dim)
    return QTensor.from_matrix(m)


def contract(A: QTensor, B: QTensor) -> float:
    _same_dim(A, B)
    return float(frobenius_dot(A.matrix, B.matrix))


def bulk_force_matrix(
    Q: np.ndarray,
    p: ModelParams,
    product: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """``-aQ + b[Q^2 - tr(Q^2)/d Id] - c Q tr(Q^2)`` on a ``(d, d, ...)`` stack.

    ``product`` filters the result of each pairwise product (dealiasing on
    grids); it defaults to the identity for pointwise use.
    """
    f = product if product is not None else (lambda x: x)
    d = Q.shape[0]
    Q2 = f(matmul(Q, Q))
    trQ2 = trace(Q2)
    eye = identity_like(Q)
    out = -p.a * Q + p.b * (Q2 - eye * (trQ2 / d)) - p.c * f(Q * trQ2)
    return out


def bulk_force(Q: QTensor, p: ModelParams) -> QTensor:
    if Q.dim != p.dim:
        raise ValueError(f"dimension mismatch: tensor dim {Q.dim}, params dim {p.dim}")
    return QTensor.from_matrix(bulk_force_matrix(Q.matrix, p))


def bulk_energy_density(Q: np.ndarray, p: ModelParams) -> np.ndarray:
    """``(a/2) tr Q^2 - (b/3) tr Q^3 + (c/4) tr^2(Q^2)`` on a matrix stack."""
    Q2 = matmul(Q, Q)
    trQ2 = trace(Q2)
    trQ3 = trace(matmul(Q2, Q))
    return 0.5 * p.a * trQ2 - p.b / 3.0 * trQ3 + 0.25 * p.c * trQ2 * trQ2


def cubic_trace_bound(Q: np.ndarray, delta: float):
    """Vectorised ``tr Q^3 <= (3 delta/8) tr^2 Q^2 + tr Q^2 / delta``.

    Returns ``(lhs, rhs, holds)`` arrays over the batch axes of ``Q``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    Q2 = matmul(Q, Q)
    trQ2 = trace(Q2)
    lhs = trace(matmul(Q2, Q))
    rhs = 3.0 * delta / 8.0 * trQ2 * trQ2 + trQ2 / delta
    holds = lhs <= rhs + 1e-12 * (1.0 + np.abs(rhs))
    return lhs, rhs, holds


def cubic_trace_bound_check(Q: QTensor, delta: float):
    if Q.dim != 3:
        raise ValueError("the cubic trace bound is stated for 3x3 tensors")
    lhs, rhs, holds = cubic_trace_bound(Q.matrix, delta)
    return float(lhs), float(rhs), bool(holds)


def random_traceless_symmetric(seed, dim: int, scale: float) -> QTensor:
    _check_dim(dim)
    if scale < 0:
        raise ValueError("scale must be non-negative")
    rng = np.random.default_rng(seed)
    comps = rng.uniform(-scale, scale, size=NCOMP[dim])
    return QTensor(dim, tuple(comps))


def random_batch(rng: np.random.Generator, dim: int, n: int, scale: float = 1.0) -> np.ndarray:
    """``n`` random tensors as a ``(d, d, n)`` matrix stack."""
    comps = rng.uniform(-scale, scale, size=(NCOMP[dim], n))
    return to_matrix(comps, dim)
