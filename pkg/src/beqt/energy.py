"""Free energy, Lyapunov functional, dissipation identity and a-priori monitors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np
from scipy.optimize import least_squares

from . import tensor_core as tc
from .evolution import SimState, Trajectory
from .model_terms import compute_H, velocity_gradient
from .spectral import QTensorField, VectorField
from .tensor_core import ModelParams


@dataclass(frozen=True)
class EnergyReport:
    t: float
    kinetic: float
    elastic: float
    bulk: float
    total: float
    diss_viscous: float
    diss_rotational: float

    def as_row(self) -> Dict[str, float]:
        return {
            "E_total": self.total,
            "E_kin": self.kinetic,
            "E_elastic": self.elastic,
            "E_bulk": self.bulk,
            "diss_visc": self.diss_viscous,
            "diss_rot": self.diss_rotational,
        }


def free_energy(Q: QTensorField, p: ModelParams):
    """``(elastic, bulk)`` parts of the Landau-de Gennes energy."""
    g = Q.grid
    elastic = 0.5 * p.L * g.spectral_inner(np.sqrt(g.ksq) * Q.matrix_hat,
                                           np.sqrt(g.ksq) * Q.matrix_hat)
    bulk = float(g.integrate(tc.bulk_energy_density(Q.matrix, p)))
    return elastic, bulk


def kinetic_energy(u: VectorField) -> float:
    return 0.5 * u.grid.l2_norm_sq(u.hat)


def total_energy(state: SimState) -> EnergyReport:
    g, p = state.grid, state.params
    kin = kinetic_energy(state.u)
    elastic, bulk = free_energy(state.Q, p)
    diss_visc = p.nu * g.spectral_inner(np.sqrt(g.ksq) * state.u.hat, np.sqrt(g.ksq) * state.u.hat)
    H = compute_H(state.Q, p)
    diss_rot = p.Gamma * g.l2_norm_sq(H.matrix_hat)
    return EnergyReport(state.t, kin, elastic, bulk, kin + elastic + bulk, diss_visc, diss_rot)


def energy_observer(state: SimState) -> Dict[str, float]:
    return total_energy(state).as_row()


def norms_observer(state: SimState) -> Dict[str, float]:
    """Norms feeding the a-priori monitors."""
    g = state.grid
    M = state.Q.matrix_hat
    l2Q = g.l2_norm_sq(M)
    gradQ = g.spectral_inner(np.sqrt(g.ksq) * M, np.sqrt(g.ksq) * M)
    lapQ = g.l2_norm_sq(g.ksq * M)
    gradu = g.spectral_inner(np.sqrt(g.ksq) * state.u.hat, np.sqrt(g.ksq) * state.u.hat)
    return {
        "H1_Q": float(np.sqrt(l2Q + gradQ)),
        "L2_u": float(np.sqrt(g.l2_norm_sq(state.u.hat))),
        "gradQ_sq": gradQ,
        "lapQ_sq": lapQ,
        "gradu_sq": gradu,
    }


@dataclass
class LyapunovResidual:
    t_mid: np.ndarray
    residuals: np.ndarray
    max_abs: float
    max_dissipation: float

    @property
    def relative(self) -> float:
        return self.max_abs / self.max_dissipation if self.max_dissipation > 0 else self.max_abs


def lyapunov_residual(traj: Trajectory) -> LyapunovResidual:
    """``(E_{k+1} - E_k)/dt + midpoint dissipation`` per sample interval."""
    if len(traj) < 3:
        raise ValueError("need at least 3 samples for the dissipation residual")
    t = np.asarray(traj.times)
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * max(dt[0], 1e-300):
        raise ValueError("samples must be uniformly spaced in time")
    E = traj.series("E_total")
    D = traj.series("diss_visc") + traj.series("diss_rot")
    r = np.diff(E) / dt + 0.5 * (D[1:] + D[:-1])
    return LyapunovResidual(0.5 * (t[1:] + t[:-1]), r, float(np.max(np.abs(r))), float(np.max(D)))


def convergence_order(coarse: LyapunovResidual, fine: LyapunovResidual) -> float:
    """Observed order from residuals at ``dt`` and ``dt/2``."""
    return float(np.log2(coarse.max_abs / fine.max_abs))


def lemma1_residual(Qp: QTensorField, Q: QTensorField, u: VectorField):
    """Both sides of the rotational cancellation identity.

    Returns ``(lhs, rhs)`` with
    ``lhs = int tr((Omega Q' - Q' Omega) Delta Q)`` and
    ``rhs = int d_b(Q'_ag DQ_gb - DQ_ag Q'_gb) u_a``.
    """
    g = Q.grid
    if not (Qp.grid == g == u.grid):
        raise ValueError("fields live on different grids")
    G = velocity_gradient(u)
    Om = 0.5 * (G - np.swapaxes(G, 0, 1))
    Qpm = Qp.matrix
    LQ = g.to_physical(-g.ksq * Q.matrix_hat)
    lhs = float(g.integrate(tc.trace(tc.matmul(tc.matmul(Om, Qpm) - tc.matmul(Qpm, Om), LQ))))
    M_hat = g.to_spectral(tc.matmul(Qpm, LQ) - tc.matmul(LQ, Qpm))
    div = np.stack([1j * g.k1d * M_hat[a, 0] + 1j * g.k2d * M_hat[a, 1] for a in range(2)])
    rhs = g.spectral_inner(div, u.hat)
    return lhs, rhs


def lemma1_check(Qp: QTensorField, Q: QTensorField, u: VectorField) -> float:
    lhs, rhs = lemma1_residual(Qp, Q, u)
    return lhs - rhs


def lemma1_scale(Qp: QTensorField, Q: QTensorField, u: VectorField) -> float:
    """``||Q'|| ||Delta Q|| ||grad u||`` (L^2 norms), the natural size of either side."""
    g = Q.grid
    lap = g.ksq * Q.matrix_hat
    gu = np.sqrt(g.ksq) * u.hat
    return float(Qp.l2_norm() * np.sqrt(g.l2_norm_sq(lap)) * np.sqrt(g.l2_norm_sq(gu)))


@dataclass
class CoercivityReport:
    holds: bool
    integral: float
    certified: bool
    A_min: Optional[float]

    def __bool__(self):
        return self.holds


def coercivity_threshold(p: ModelParams, delta: float, dim: Optional[int] = None) -> Optional[float]:
    """Smallest ``A >= 0`` for which the cubic-trace bound certifies coercivity.

    ``None`` when ``delta`` is too large for the quartic term to absorb the
    cubic one.
    """
    dim = p.dim if dim is None else dim
    if dim == 2:
        return float(np.sqrt(max(0.0, -p.a)))
    b = abs(p.b)
    if 0.25 * p.c - b * delta / 8.0 < 0:
        return None
    return float(np.sqrt(max(0.0, 2.0 * b / (3.0 * delta) - p.a)))


def coercivity_check(Q: Union[QTensorField, np.ndarray], A: float, delta: float,
                     p: ModelParams) -> CoercivityReport:
    """Integrated ``(A^2/2 + a/2)|Q|^2 - (b/3) tr Q^3 + (c/4)|Q|^4 >= 0``.

    ``Q`` is either a field or a ``(d, d, n)`` stack of samples (equal
    weights).  ``certified`` says whether the pointwise lower bound obtained
    from the cubic-trace inequality with this ``delta`` is non-negative.
    """
    if not (A > 0 and delta > 0):
        raise ValueError("A and delta must be positive")
    if isinstance(Q, QTensorField):
        m = Q.matrix
        integrate = lambda x: float(Q.grid.integrate(x))  # noqa: E731
    else:
        m = np.asarray(Q, dtype=float)
        integrate = lambda x: float(np.mean(x))  # noqa: E731
    d = m.shape[0]
    Q2 = tc.matmul(m, m)
    nrm2 = tc.trace(Q2)
    trQ3 = tc.trace(tc.matmul(Q2, m))
    g = (0.5 * A * A + 0.5 * p.a) * nrm2 - p.b / 3.0 * trQ3 + 0.25 * p.c * nrm2 * nrm2
    total = integrate(g)
    scale = integrate(np.abs((0.5 * A * A + 0.5 * abs(p.a)) * nrm2) + np.abs(p.b / 3.0 * trQ3)
                      + 0.25 * p.c * nrm2 * nrm2)
    holds = total >= -1e-12 * (1.0 + scale)
    if d == 2:
        lower = (0.5 * A * A + 0.5 * p.a) * nrm2 + 0.25 * p.c * nrm2 * nrm2
    else:
        b = abs(p.b)
        lower = ((0.5 * A * A + 0.5 * p.a - b / (3.0 * delta)) * nrm2
                 + (0.25 * p.c - b * delta / 8.0) * nrm2 * nrm2)
    certified = bool(np.all(lower >= -1e-12 * (1.0 + np.abs(g))))
    return CoercivityReport(bool(holds), total, certified, coercivity_threshold(p, delta, d))


# --- a-priori bound monitoring -------------------------------------------------


@dataclass
class EnvelopeFit:
    """``c1 + c2 exp(c3 t)`` fitted to a series in log space."""

    c1: float
    c2: float
    c3: float
    rms_log_residual: float
    max_excess: float
    flagged: List[int] = field(default_factory=list)
    degenerate: bool = False

    def __call__(self, t):
        return self.c1 + self.c2 * np.exp(self.c3 * np.asarray(t))


def fit_envelope(t: np.ndarray, y: np.ndarray, tolerance: float = 0.05) -> EnvelopeFit:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    if np.all(y <= 0) or np.ptp(y) == 0 and y[0] <= 0:
        return EnvelopeFit(0.0, 0.0, 0.0, 0.0, 0.0, [], degenerate=True)
    floor = 1e-300
    ly = np.log(np.maximum(y, floor))
    if np.ptp(y) <= 1e-14 * abs(y[0]) or len(y) < 3:
        c1 = float(np.max(y))
        return EnvelopeFit(c1, 0.0, 0.0, 0.0, float(np.max(y / c1) - 1.0), [])
    span = max(t[-1] - t[0], 1e-300)
    slope = np.polyfit(t - t[0], ly, 1)[0]
    c1_0 = 0.5 * float(np.min(y))
    c2_0 = max(float(y[0]) - c1_0, 1e-12 * float(np.max(y)))
    x0 = np.array([c1_0, c2_0, float(np.clip(slope, -50 / span, 50 / span))])

    def resid(theta):
        env = theta[0] + theta[1] * np.exp(theta[2] * (t - t[0]))
        return np.log(np.maximum(env, floor)) - ly

    sol = least_squares(resid, x0, bounds=([0.0, 0.0, -50 / span], [np.inf, np.inf, 50 / span]))
    c1, c2, c3 = sol.x
    c2 = c2 * np.exp(-c3 * t[0])
    fit = EnvelopeFit(float(c1), float(c2), float(c3), 0.0, 0.0)
    env = fit(t)
    ratio = y / env
    fit.rms_log_residual = float(np.sqrt(np.mean(sol.fun**2)))
    fit.max_excess = float(np.max(ratio) - 1.0)
    fit.flagged = [int(i) for i in np.nonzero(ratio > 1.0 + tolerance)[0]]
    return fit


@dataclass
class AprioriReport:
    times: np.ndarray
    h1_Q: np.ndarray
    aggregate: np.ndarray
    aggregate_terms: Dict[str, np.ndarray]
    h1_fit: EnvelopeFit
    aggregate_fit: EnvelopeFit
    all_finite: bool
    terms_nonnegative: bool

    @property
    def flagged(self) -> bool:
        return bool(self.h1_fit.flagged or self.aggregate_fit.flagged)

    def summary(self) -> dict:
        return {
            "all_finite": self.all_finite,
            "terms_nonnegative": self.terms_nonnegative,
            "h1_fit": asdict(self.h1_fit),
            "aggregate_fit": asdict(self.aggregate_fit),
            "flagged": self.flagged,
        }


def _cumtrapz(t, y):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def apriori_monitor(traj: Trajectory, params: ModelParams) -> AprioriReport:
    """Track ``||Q||_{H^1}`` and the energy-type aggregate
    ``||u||^2 + 2 nu int ||grad u||^2 + L ||grad Q||^2 + Gamma L^2 int ||Delta Q||^2``
    against fitted ``c1 + c2 exp(c3 t)`` envelopes.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    t = np.asarray(traj.times, dtype=float)
    h1 = traj.series("H1_Q")
    terms = {
        "u_sq": traj.series("L2_u") ** 2,
        "visc_int": 2.0 * params.nu * _cumtrapz(t, traj.series("gradu_sq")),
        "gradQ": params.L * traj.series("gradQ_sq"),
        "lapQ_int": params.Gamma * params.L**2 * _cumtrapz(t, traj.series("lapQ_sq")),
    }
    agg = sum(terms.values())
    finite = bool(np.all(np.isfinite(h1)) and np.all(np.isfinite(agg)))
    nonneg = all(bool(np.all(v >= 0)) for v in terms.values())
    return AprioriReport(t, h1, agg, terms, fit_envelope(t, h1), fit_envelope(t, agg),
                         finite, nonneg)


# --- variational consistency -------------------------------------------------------


@dataclass
class VariationalReport:
    hs: np.ndarray
    errors: np.ndarray
    exact: float
    order: float


def _observed_order(hs, errors) -> float:
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    if np.any(errors <= 0):
        return float("inf")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


def variational_check(Q: QTensorField, V: QTensorField, p: ModelParams,
                      hs=(1e-3, 1e-4, 1e-5)) -> VariationalReport:
    """Central differences of the free energy along ``V`` against ``-<H, V>``.

    ``H`` is evaluated without product filtering, so it is the exact
    gradient of the grid energy (Parseval elastic part plus quadrature bulk).
    """
    g = Q.grid

    def F(X):
        e, b = free_energy(X, p)
        return e + b

    H = compute_H(Q, p, product=lambda x: x)
    exact = -float(g.integrate(tc.frobenius_dot(H.matrix, V.matrix)))
    errs = np.array([abs((F(Q + V * h) - F(Q + V * (-h))) / (2 * h) - exact) for h in hs])
    return VariationalReport(np.asarray(hs, float), errs, exact, _observed_order(hs, errs))


def pointwise_variational_check(Q: np.ndarray, V: np.ndarray, p: ModelParams,
                                hs=(1e-3, 1e-4, 1e-5)) -> VariationalReport:
    """Same check for the bulk density on a ``(d, d, n)`` stack (``d = 3`` exercises ``b``)."""
    def F(X):
        return float(np.sum(tc.bulk_energy_density(X, p)))

    exact = -float(np.sum(tc.frobenius_dot(tc.bulk_force_matrix(Q, p), V)))
    errs = np.array([abs((F(Q + h * V) - F(Q - h * V)) / (2 * h) - exact) for h in hs])
    return VariationalReport(np.asarray(hs, float), errs, exact, _observed_order(hs, errs))


@dataclass(frozen=True)
class LogLinearFit:
    """Least-squares line ``alpha + beta t`` through ``log y``.

    ``shift`` lifts the line onto an upper envelope (``log y <= alpha +
    shift + beta t`` at every sample).  ``rms_residual`` and
    ``max_residual`` are normalized by the range of ``log y``.
    """

    alpha: float
    beta: float
    shift: float
    rms_residual: float
    max_residual: float

    def upper(self, t) -> np.ndarray:
        return np.exp(self.alpha + self.shift + self.beta * np.asarray(t))


def log_linear_upper_fit(t, y) -> LogLinearFit:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("series must be finite and positive")
    ly = np.log(y)
    beta, alpha = np.polyfit(t, ly, 1)
    res = ly - (alpha + beta * t)
    span = float(np.ptp(ly)) or 1.0
    return LogLinearFit(float(alpha), float(beta), float(np.max(res)),
                        float(np.sqrt(np.mean(res**2)) / span), float(np.max(np.abs(res)) / span))
