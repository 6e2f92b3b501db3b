"""Dyadic (Littlewood-Paley) analysis on the periodic grid.

Profiles
--------
The low-pass profile ``chi`` is the smoothstep ``PROFILE_VERSION``::

    chi(x) = 1                              x <= 1/2
    chi(x) = f(1 - t) / (f(1 - t) + f(t))   1/2 < x < 1,  t = 2x - 1
    chi(x) = 0                              x >= 1

with ``f(s) = exp(-1/s)``.  It is C-infinity, radial and non-increasing.
The ring profile is ``phi(x) = chi(x/2) - chi(x)`` and the blocks are

* ``S_0 = chi(|k|)`` (only ``k = 0`` on the integer lattice),
* ``Delta_q = phi(|k| / 2^q)`` for ``q = 0..q_max``.

``q_max`` is the smallest ``q`` with ``2^q`` at least the largest ``|k|``
kept by the dealiasing mask, so ``S_0 + sum_q Delta_q`` is the identity on
every dealiased field.  Calibrated constants (commutator, interpolation)
depend on this profile and are keyed by ``PROFILE_VERSION``.

Products and ``L^p`` norms are evaluated on a grid of twice the size, on
which the product of two dealiased fields is represented exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .spectral import Field, QTensorField, ScalarField, SpectralGrid, resample

PROFILE_VERSION = "smoothstep-exp-v1"

INF = float("inf")


def _f(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def chi(x) -> np.ndarray:
    """Low-pass profile evaluated at ``|xi| = x``."""
    x = np.asarray(x, dtype=float)
    t = np.clip(2.0 * x - 1.0, 0.0, 1.0)
    a, b = _f(1.0 - t), _f(t)
    return a / (a + b)


def phi(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return chi(0.5 * x) - chi(x)


def _hat_of(f) -> Tuple[SpectralGrid, np.ndarray]:
    """Grid and coefficient stack whose squared norms add up to ``|f|^2``."""
    if isinstance(f, QTensorField):
        return f.grid, f.matrix_hat
    if isinstance(f, Field):
        return f.grid, f.hat
    raise TypeError(f"expected a Field, got {type(f).__name__}")


def _lp(grid: SpectralGrid, phys_mag: np.ndarray, p: float) -> float:
    """``L^p`` norm (torus integral) of a non-negative pointwise magnitude."""
    if p == INF:
        return float(np.max(phys_mag))
    return float(grid.integrate(phys_mag**p)) ** (1.0 / p)


def _magnitude(phys: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean norm over all leading component axes."""
    if phys.ndim == 2:
        return np.abs(phys)
    return np.sqrt(np.sum(phys.reshape((-1,) + phys.shape[-2:]) ** 2, axis=0))


@dataclass(frozen=True)
class ShellSpectrum:
    s0_norm: float
    shell_norms: np.ndarray

    @property
    def total_sq(self) -> float:
        return self.s0_norm**2 + float(np.sum(self.shell_norms**2))

    def rows(self, t: float = 0.0) -> List[Tuple[float, int, float]]:
        """``(t, q, shell_norm)`` rows with ``q = -1`` denoting ``S_0``."""
        return [(t, -1, self.s0_norm)] + [(t, q, float(v)) for q, v in enumerate(self.shell_norms)]


class DyadicFrame:
    """Littlewood-Paley blocks for a grid.  Immutable; multipliers are cached."""

    def __init__(self, grid: SpectralGrid):
        self.grid = grid
        kept = grid.kmag[grid.dealias_mask]
        kmax = float(np.max(kept)) if kept.size else 0.0
        self.q_max = max(0, int(np.ceil(np.log2(kmax)))) if kmax > 1 else 0
        self._cache: Dict[Tuple[int, str, int], np.ndarray] = {}
        self.profile = PROFILE_VERSION

    def __repr__(self):
        return f"DyadicFrame(N={self.grid.N}, q_max={self.q_max}, profile={self.profile!r})"

    # -- multipliers -------------------------------------------------------------------
    def _check_q(self, q: int, lowest: int = 0):
        if not isinstance(q, (int, np.integer)):
            raise TypeError("shell index must be an integer")
        if q < lowest:
            raise ValueError(f"shell index {q} below {lowest}")
        if q > self.q_max:
            raise ValueError(f"shell index {q} exceeds q_max={self.q_max}")

    def phi_mult(self, q: int, grid: Optional[SpectralGrid] = None) -> np.ndarray:
        """Multiplier of ``Delta_q``; ``q = -1`` gives ``S_0``."""
        g = self.grid if grid is None else grid
        key = (g.N, "phi", int(q))
        if key not in self._cache:
            if q == -1:
                m = chi(g.kmag)
            else:
                m = phi(g.kmag / 2.0**q)
            self._cache[key] = m
        return self._cache[key]

    def chi_mult(self, q: int, grid: Optional[SpectralGrid] = None) -> np.ndarray:
        """Multiplier of ``S_q = chi(|k| / 2^q)``."""
        g = self.grid if grid is None else grid
        key = (g.N, "chi", int(q))
        if key not in self._cache:
            self._cache[key] = chi(g.kmag / 2.0**q)
        return self._cache[key]

    def blocks(self) -> range:
        """Block indices ``-1..q_max`` (``-1`` is ``S_0``)."""
        return range(-1, self.q_max + 1)

    # -- projections -------------------------------------------------------------------
    def shell_project(self, f: Field, q: int) -> Field:
        self._check_q(q)
        self._check_grid(f)
        return f._new(f.hat * self.phi_mult(q))

    def low_pass(self, f: Field, q: int) -> Field:
        self._check_q(q)
        self._check_grid(f)
        return f._new(f.hat * self.chi_mult(q))

    def block(self, f: Field, j: int) -> Field:
        self._check_q(j, lowest=-1)
        self._check_grid(f)
        return f._new(f.hat * self.phi_mult(j))

    def _check_grid(self, f: Field):
        if f.grid.N != self.grid.N:
            raise ValueError(f"field on N={f.grid.N}, frame built for N={self.grid.N}")

    # -- norms -------------------------------------------------------------------------
    def spectrum(self, f: Field) -> ShellSpectrum:
        self._check_grid(f)
        g, hat = _hat_of(f)
        s0 = np.sqrt(g.l2_norm_sq(hat * self.phi_mult(-1)))
        shells = np.array([np.sqrt(g.l2_norm_sq(hat * self.phi_mult(q)))
                           for q in range(self.q_max + 1)])
        return ShellSpectrum(float(s0), shells)

    def sobolev_norm(self, f: Field, s: float) -> float:
        """``(||S_0 f||^2 + sum_q 2^{2qs} ||Delta_q f||^2)^{1/2}``."""
        sp = self.spectrum(f)
        w = 2.0 ** (2.0 * s * np.arange(self.q_max + 1))
        return float(np.sqrt(sp.s0_norm**2 + np.sum(w * sp.shell_norms**2)))

    def sobolev_norm_sq_hat(self, hat: np.ndarray, s: float) -> float:
        """Shell ``H^s`` norm squared of a raw coefficient stack on the frame grid."""
        g = self.grid
        total = g.l2_norm_sq(hat * self.phi_mult(-1))
        for q in range(self.q_max + 1):
            total += 2.0 ** (2.0 * s * q) * g.l2_norm_sq(hat * self.phi_mult(q))
        return float(total)

    # -- paraproducts ------------------------------------------------------------------
    def _padded(self) -> SpectralGrid:
        return self.grid.with_size(2 * self.grid.N)

    def _to_big(self, hat):
        return resample(hat, self.grid.N, 2 * self.grid.N)

    def bony_decompose(self, a: ScalarField, b: ScalarField):
        """``(T_a b, T_b a, R(a, b))`` with ``T_a b = sum_q S_{q-1} a Delta_q b``."""
        if a.grid != b.grid:
            raise ValueError("fields live on different grids")
        self._check_grid(a)
        big = self._padded()
        ah, bh = self._to_big(a.hat), self._to_big(b.hat)
        blocks = list(self.blocks())
        A = {j: big.to_physical(ah * self.phi_mult(j, big)) for j in blocks}
        B = {j: big.to_physical(bh * self.phi_mult(j, big)) for j in blocks}

        def low(D, q):  # S_{q-1} = sum of blocks j <= q - 2
            out = np.zeros(big.phys_shape)
            for j in blocks:
                if j <= q - 2:
                    out = out + D[j]
            return out

        Tab = sum(low(A, q) * B[q] for q in blocks)
        Tba = sum(low(B, q) * A[q] for q in blocks)
        R = sum(A[q] * B[j] for q in blocks for j in blocks if abs(j - q) <= 1)
        back = lambda x: ScalarField(self.grid, resample(big.to_spectral(x), big.N, self.grid.N))  # noqa: E731
        return back(Tab), back(Tba), back(R)

    # -- analytic estimates ------------------------------------------------------------
    def commutator(self, q: int, u: ScalarField, v: ScalarField,
                   triples: Sequence[Tuple[float, float, float]] = ((2, INF, 2),)):
        """``[Delta_q, u] v = Delta_q(uv) - u Delta_q v`` and its bound ratios."""
        self._check_q(q)
        if u.grid != v.grid:
            raise ValueError("fields live on different grids")
        self._check_grid(u)
        for t in triples:
            check_holder(*t)
        big = self._padded()
        uh, vh = self._to_big(u.hat), self._to_big(v.hat)
        m = self.phi_mult(q, big)
        up, vp = big.to_physical(uh), big.to_physical(vh)
        uv_hat = big.to_spectral(up * vp)
        comm = big.to_physical(uv_hat * m) - up * big.to_physical(vh * m)
        grad_u = _magnitude(big.to_physical(np.stack([1j * big.k1d * uh, 1j * big.k2d * uh])))
        absv = np.abs(vp)
        absc = np.abs(comm)
        entries = []
        for p, r, s in triples:
            lhs = _lp(big, absc, p)
            scale = 2.0 ** (-q) * _lp(big, grad_u, r) * _lp(big, absv, s)
            entries.append(CommutatorEntry((p, r, s), lhs, scale,
                                           lhs / scale if scale > 0 else (0.0 if lhs == 0 else INF)))
        out = ScalarField(self.grid, resample(big.to_spectral(comm), big.N, self.grid.N))
        return out, CommutatorReport(q, entries)

    def interpolation_check(self, g: ScalarField, p: int) -> "InterpolationReport":
        """``||g||_{L^{2p}}`` against ``sqrt(p) ||g||^{1/p} ||grad g||^{1-1/p}``."""
        if int(p) != p or p < 1:
            raise ValueError("p must be an integer >= 1")
        self._check_grid(g)
        grid = g.grid
        l2 = np.sqrt(grid.l2_norm_sq(g.hat))
        gn = np.sqrt(grid.l2_norm_sq(np.sqrt(grid.ksq) * g.hat))
        if gn == 0:
            if l2 > 0:
                raise ValueError("interpolation inequality is degenerate for non-zero constants")
            return InterpolationReport(int(p), 0.0, 0.0, 0.0)
        big = self._padded()
        lhs = _lp(big, np.abs(big.to_physical(self._to_big(g.hat))), 2.0 * p)
        rhs = np.sqrt(p) * l2 ** (1.0 / p) * gn ** (1.0 - 1.0 / p)
        return InterpolationReport(int(p), lhs, float(rhs), lhs / rhs)

    def bernstein_check(self, f: ScalarField, q: int,
                        lp_pairs: Sequence[Tuple[float, float]] = ((2, 4), (2, INF)),
                        low_pass_p: Sequence[float] = (2, 4, INF)) -> "BernsteinReport":
        self._check_q(q)
        self._check_grid(f)
        g = f.grid
        d = 2
        big = self._padded()
        dq = f.hat * self.phi_mult(q)
        n = np.sqrt(g.l2_norm_sq(dq))
        if n == 0:
            return BernsteinReport(q, vacuous=True)
        gn = np.sqrt(g.l2_norm_sq(np.sqrt(g.ksq) * dq))
        grad_ratio = gn / (2.0**q * n)
        dq_abs = np.abs(big.to_physical(self._to_big(dq)))
        lp = {}
        for a, b in lp_pairs:
            inv = (1.0 / a) - (0.0 if b == INF else 1.0 / b)
            lp[(a, b)] = _lp(big, dq_abs, b) / (2.0 ** (d * inv * q) * _lp(big, dq_abs, a))
        sq = self._to_big(f.hat * self.chi_mult(q))
        grad_sq = _magnitude(big.to_physical(np.stack([1j * big.k1d * sq, 1j * big.k2d * sq])))
        f_abs = np.abs(big.to_physical(self._to_big(f.hat)))
        low = {}
        for p in low_pass_p:
            fn = _lp(big, f_abs, p)
            low[p] = 2.0 ** (-q) * _lp(big, grad_sq, p) / fn if fn > 0 else 0.0
        return BernsteinReport(q, False, float(grad_ratio), lp, low)


def check_holder(p: float, r: float, s: float):
    """Raise unless ``1/p = 1/r + 1/s`` (``inf`` allowed for ``r``, ``s``)."""
    inv = lambda x: Fraction(0) if x == INF else Fraction(x).limit_denominator(10**6) ** -1  # noqa: E731
    if p == INF or p < 1 or r < 1 or s < 1:
        raise ValueError(f"invalid exponents {(p, r, s)}")
    if inv(p) != inv(r) + inv(s):
        raise ValueError(f"exponents {(p, r, s)} violate 1/p = 1/r + 1/s")


@dataclass(frozen=True)
class CommutatorEntry:
    exponents: Tuple[float, float, float]
    lhs: float
    scale: float
    ratio: float

    def bound(self, C: float) -> float:
        return C * self.scale


@dataclass
class CommutatorReport:
    q: int
    entries: List[CommutatorEntry]

    @property
    def max_ratio(self) -> float:
        return max((e.ratio for e in self.entries), default=0.0)


@dataclass(frozen=True)
class InterpolationReport:
    p: int
    lhs: float
    rhs_over_C: float
    ratio: float


@dataclass
class BernsteinReport:
    q: int
    vacuous: bool
    gradient_ratio: float = float("nan")
    lp_ratios: Dict[Tuple[float, float], float] = field(default_factory=dict)
    low_pass_ratios: Dict[float, float] = field(default_factory=dict)

    @property
    def gradient_ok(self) -> bool:
        return self.vacuous or 0.5 <= self.gradient_ratio <= 2.0


@dataclass(frozen=True)
class LogEmbeddingReport:
    lhs: float
    rhs: float
    ratio: float


def q_gradient_hat(Q: QTensorField) -> np.ndarray:
    g = Q.grid
    M = Q.matrix_hat
    return np.stack([1j * g.k1d * M, 1j * g.k2d * M])


def log_embedding_monitor(frame: DyadicFrame, Q: QTensorField, s: float) -> LogEmbeddingReport:
    """``||Q||_inf`` against ``||Q||_{H^1} sqrt(ln(e + ||grad Q||^2_{H^s} / ||Q||_{H^1}))``.

    ``L^infty`` is the grid maximum of the Frobenius norm (no oversampling).
    """
    if s <= 0:
        raise ValueError("s must be positive")
    g = Q.grid
    M = Q.matrix_hat
    h1 = np.sqrt(g.l2_norm_sq(M) + g.l2_norm_sq(np.sqrt(g.ksq) * M))
    if h1 == 0:
        raise ValueError("log embedding is undefined for the zero field")
    lhs = float(np.max(_magnitude(Q.matrix)))
    grad_hs = frame.sobolev_norm_sq_hat(q_gradient_hat(Q), s)
    rhs = float(h1 * np.sqrt(np.log(np.e + grad_hs / h1)))
    return LogEmbeddingReport(lhs, rhs, lhs / rhs)


def phi_split(frame: DyadicFrame, state, s: float) -> Tuple[float, float, float]:
    """``phi = L ||grad Q||^2_{H^s} + ||u||^2_{H^s}``, its ``S_0`` part and the rest."""
    if s <= 0:
        raise ValueError("s must be positive")
    g = state.grid
    L = state.params.L
    gQ = q_gradient_hat(state.Q)
    uh = state.u.hat
    total = L * frame.sobolev_norm_sq_hat(gQ, s) + frame.sobolev_norm_sq_hat(uh, s)
    s0 = frame.phi_mult(-1)
    low = L * g.l2_norm_sq(gQ * s0) + g.l2_norm_sq(uh * s0)
    return float(total), float(low), float(total - low)


def multiplier_norm(f: Field, s: float) -> float:
    """``(sum (1 + |k|^2)^s |f_k|^2)^{1/2}`` (torus-integral normalization)."""
    g, hat = _hat_of(f)
    return float(np.sqrt(g.l2_norm_sq((1.0 + g.ksq) ** (0.5 * s) * hat)))


# --- calibration ---------------------------------------------------------------------


@dataclass
class Calibration:
    """A constant frozen as ``margin * max(calibration ratios)``."""

    name: str
    profile: str
    margin: float
    max_ratio: float
    constant: float
    n_samples: int

    def exceedances(self, ratios: Iterable[float]) -> int:
        return int(sum(1 for r in ratios if r > self.constant))


def calibrate(name: str, ratios: Iterable[float], margin: float = 2.0) -> Calibration:
    r = np.asarray(list(ratios), dtype=float)
    if r.size == 0:
        raise ValueError("no calibration samples")
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite calibration ratio")
    m = float(np.max(r))
    return Calibration(name, PROFILE_VERSION, margin, m, margin * m, int(r.size))


COMMUTATOR_TRIPLES = ((2, INF, 2), (2, 4, 4), (4.0 / 3.0, 2, 4))
INTERPOLATION_PS = (1, 2, 4, 8, 16)


def random_scalar(grid: SpectralGrid, rng: np.random.Generator, kmax: float,
                  mean_zero: bool = True, slope: float = 1.0) -> ScalarField:
    from .initial_data import random_hat

    hat = random_hat(grid, rng, 1, kmax, slope)[0]
    if not mean_zero:
        hat[0, 0] = rng.standard_normal()
    return ScalarField(grid, hat)


def commutator_ratios(frame: DyadicFrame, rng: np.random.Generator, n_samples: int,
                      triples=COMMUTATOR_TRIPLES) -> np.ndarray:
    """Array ``(n_samples, n_shells, n_triples)`` of realized ratios."""
    g = frame.grid
    kcap = g.N / 3.0
    out = np.zeros((n_samples, frame.q_max + 1, len(triples)))
    for i in range(n_samples):
        u = random_scalar(g, rng, rng.uniform(2.0, kcap), mean_zero=False)
        v = random_scalar(g, rng, rng.uniform(2.0, kcap), mean_zero=False)
        for q in range(frame.q_max + 1):
            _, rep = frame.commutator(q, u, v, triples)
            out[i, q] = [e.ratio for e in rep.entries]
    return out


def interpolation_ratios(frame: DyadicFrame, rng: np.random.Generator, n_samples: int,
                         ps=INTERPOLATION_PS) -> np.ndarray:
    """Array ``(n_samples, len(ps))`` on random mean-zero band-limited samples."""
    g = frame.grid
    out = np.zeros((n_samples, len(ps)))
    for i in range(n_samples):
        f = random_scalar(g, rng, rng.uniform(1.5, g.N / 3.0))
        out[i] = [frame.interpolation_check(f, p).ratio for p in ps]
    return out


def spectrum_rows(frame: DyadicFrame, f: Field, t: float = 0.0,
                  s_values: Sequence[float] = (0.0, 1.0, 2.0)):
    """CSV-ready ``(t, q, shell_norm)`` and ``(t, s, sobolev_norm)`` rows."""
    shells = frame.spectrum(f).rows(t)
    sob = [(t, float(s), frame.sobolev_norm(f, s)) for s in s_values]
    return shells, sob


Number = Union[int, float]
