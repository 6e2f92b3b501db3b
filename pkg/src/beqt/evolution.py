"""Right-hand side of the coupled Q-tensor / Navier-Stokes system and the
IMEX time stepper.

Only the stiff Laplacians (``Gamma L Delta Q`` and ``nu Delta u``) are
implicit; everything else, including the bulk terms, is explicit.  The
pressure never appears: the velocity tendency is Leray-projected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .spectral import QTensorField, SpectralGrid, VectorField, leray_hat
from .tensor_core import ModelParams

SCHEMES = ("imex_euler", "imex_sbdf2")


class BlowUpError(RuntimeError):
    """Non-finite values or a CFL violation; ``record`` holds the forensics."""

    def __init__(self, record: dict, trajectory=None):
        super().__init__(f"{record.get('reason', 'blow-up')} at t={record.get('t')}")
        self.record = record
        self.trajectory = trajectory


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "imex_sbdf2"
    dealias_rule: str = "two_thirds"
    cfl_guard: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class _History:
    Q_hat: np.ndarray
    u_hat: np.ndarray
    NQ: np.ndarray
    Nu: np.ndarray
    dt: float


@dataclass(frozen=True)
class SimState:
    t: float
    Q: QTensorField
    u: VectorField
    params: ModelParams
    galerkin_n: Optional[int] = None
    history: Optional[_History] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.Q.grid != self.u.grid:
            raise ValueError("Q and u live on different grids")
        if self.Q.dim != self.params.dim:
            raise ValueError("Q dimension does not match params.dim")
        if self.galerkin_n is not None and self.galerkin_n < 1:
            raise ValueError("galerkin_n must be >= 1")

    @property
    def grid(self) -> SpectralGrid:
        return self.Q.grid

    def without_history(self) -> "SimState":
        return dataclasses.replace(self, history=None)


def zero_state(grid: SpectralGrid, params: ModelParams, galerkin_n=None) -> SimState:
    return SimState(
        0.0,
        QTensorField.zeros(grid, (2,)),
        VectorField.zeros(grid, (2,)),
        params,
        galerkin_n,
    )


class RHSAssembler:
    """Explicit tendencies of the 2D system in spectral space.

    Products go through four dealiasing passes (quadratic products, cubic
    completions, ``tr(QH)`` / ``QH - HQ``, and ``Q tr(QH)``).  With
    ``galerkin_n`` set, inputs are pre-mollified and the annulus mask is
    folded into every product filter and into the output.
    """

    def __init__(self, grid: SpectralGrid, params: ModelParams,
                 galerkin_n: Optional[int] = None, dealias_rule: Optional[str] = None):
        if params.dim != 2:
            raise ValueError("dynamics are two-dimensional")
        self.grid = grid
        self.p = params
        self.galerkin_n = galerkin_n
        mask = grid.mask_for(dealias_rule or grid.dealias_rule).astype(float)
        self.jn = grid.jn_mask(galerkin_n) if galerkin_n is not None else None
        self.mask = mask * self.jn if self.jn is not None else mask
        g = grid
        self.ik1 = 1j * g.k1d
        self.ik2 = 1j * g.k2d
        self.ksq = g.ksq

    def _filter(self, phys):
        return self.grid.to_spectral(phys) * self.mask

    def prepare(self, Q_hat, u_hat):
        if self.jn is not None:
            Q_hat = Q_hat * self.jn
            u_hat = leray_hat(self.grid, u_hat * self.jn)
        return Q_hat, u_hat

    def __call__(self, Q_hat: np.ndarray, u_hat: np.ndarray):
        g, p = self.grid, self.p
        ik1, ik2 = self.ik1, self.ik2
        Q_hat, u_hat = self.prepare(Q_hat, u_hat)
        q_h, r_h = Q_hat
        u1_h, u2_h = u_hat
        prim_hat = np.stack([
            q_h, r_h, ik1 * q_h, ik2 * q_h, ik1 * r_h, ik2 * r_h,
            u1_h, u2_h, ik1 * u1_h, ik2 * u1_h, ik1 * u2_h, ik2 * u2_h,
        ])
        prim = np.ascontiguousarray(g.to_physical(prim_hat))
        q, r = prim[0], prim[1]

        A_hat = self._filter(kernels.stage_a(prim))
        s2t = np.ascontiguousarray(g.to_physical(A_hat[0:2]))
        B_hat = self._filter(kernels.stage_b(q, r, s2t[0], s2t[1]))

        F_hat = -p.a * Q_hat - p.c * B_hat[0:2]
        H_hat = F_hat - p.L * self.ksq * Q_hat
        h = np.ascontiguousarray(g.to_physical(H_hat))
        C_hat = self._filter(kernels.stage_c(q, r, h[0], h[1]))
        m = np.ascontiguousarray(g.to_physical(C_hat[0]))
        D_hat = self._filter(kernels.stage_d(q, r, m))

        (trQ2, trQD, adv_q, adv_r, w_r, w_q,
         adv_u1, adv_u2, E11, E12, E22) = A_hat
        e_hat = 0.5 * (prim_hat[9] + prim_hat[10])
        S11 = p.xi * prim_hat[8] + 2.0 * w_r - 2.0 * p.xi * B_hat[2]
        S12 = p.xi * e_hat - 2.0 * w_q - 2.0 * p.xi * B_hat[3]
        NQ = np.stack([-adv_q + S11, -adv_r + S12]) + p.Gamma * F_hat

        sig = C_hat[1]
        T11 = -p.xi * H_hat[0] + 2.0 * p.xi * D_hat[0] - 0.5 * p.L * (E11 - E22)
        T22 = -T11
        T12_sym = -p.xi * H_hat[1] + 2.0 * p.xi * D_hat[1] - p.L * E12
        f1 = ik1 * T11 + ik2 * (T12_sym + sig)
        f2 = ik1 * (T12_sym - sig) + ik2 * T22
        Nu = leray_hat(g, np.stack([-adv_u1 + f1, -adv_u2 + f2]))

        if self.jn is not None:
            NQ = NQ * self.jn
            Nu = Nu * self.jn
        return NQ, Nu


@lru_cache(maxsize=16)
def _assembler(grid: SpectralGrid, params: ModelParams, galerkin_n, dealias_rule) -> RHSAssembler:
    return RHSAssembler(grid, params, galerkin_n, dealias_rule)


def assembler_for(state: SimState, dealias_rule: Optional[str] = None) -> RHSAssembler:
    return _assembler(state.grid, state.params, state.galerkin_n,
                      dealias_rule or state.grid.dealias_rule)


def _check_finite(state: SimState, where: str):
    for name, fld in (("Q", state.Q), ("u", state.u)):
        bad = ~np.isfinite(fld.hat)
        if bad.any():
            comp, i, j = (int(x) for x in np.argwhere(bad)[0])
            g = state.grid
            raise BlowUpError({
                "reason": f"non-finite values {where}",
                "t": state.t,
                "field": name,
                "component": comp,
                "mode": [int(g.k1[i, 0]), int(g.k2[0, j])],
            })


def rhs_Q(state: SimState, dealias_rule: Optional[str] = None) -> QTensorField:
    """Full tendency ``-u.grad Q + S(grad u, Q) + Gamma H``."""
    _check_finite(state, "in rhs inputs")
    asm = assembler_for(state, dealias_rule)
    NQ, _ = asm(state.Q.hat, state.u.hat)
    Q_hat, _ = asm.prepare(state.Q.hat, state.u.hat)
    lin = -state.params.Gamma * state.params.L * state.grid.ksq * Q_hat
    if asm.jn is not None:
        lin = lin * asm.jn
    return QTensorField(state.grid, NQ + lin)


def rhs_u(state: SimState, dealias_rule: Optional[str] = None) -> VectorField:
    """Leray-projected ``-u.grad u + nu Delta u + div(tau + sigma)``."""
    _check_finite(state, "in rhs inputs")
    asm = assembler_for(state, dealias_rule)
    _, Nu = asm(state.Q.hat, state.u.hat)
    _, u_hat = asm.prepare(state.Q.hat, state.u.hat)
    lin = -state.params.nu * state.grid.ksq * u_hat
    if asm.jn is not None:
        lin = lin * asm.jn
    return VectorField(state.grid, Nu + lin)


def _euler(asm, p, Q_hat, u_hat, dt, NQ=None, Nu=None):
    if NQ is None:
        NQ, Nu = asm(Q_hat, u_hat)
    ksq = asm.ksq
    Qn = (Q_hat + dt * NQ) / (1.0 + dt * p.Gamma * p.L * ksq)
    un = (u_hat + dt * Nu) / (1.0 + dt * p.nu * ksq)
    return Qn, un


def _cfl(state: SimState, cfg: StepperConfig):
    if cfg.cfl_guard is None:
        return
    umax = float(np.max(np.abs(state.u.phys)))
    cfl = umax * cfg.dt / (2 * np.pi / state.grid.N)
    if cfl > cfg.cfl_guard:
        raise BlowUpError({
            "reason": "CFL violation",
            "t": state.t,
            "cfl": cfl,
            "limit": cfg.cfl_guard,
        })


def step(state: SimState, cfg: StepperConfig) -> SimState:
    """Advance by ``cfg.dt``.

    SBDF2 needs the previous level; a state without history (or with a
    different ``dt``) is bootstrapped by a Richardson-extrapolated pair of
    IMEX-Euler steps, whose local error matches the multistep scheme.
    """
    _check_finite(state, "before step")
    _cfl(state, cfg)
    asm = assembler_for(state, cfg.dealias_rule)
    p, dt = state.params, cfg.dt
    Q0, u0 = state.Q.hat, state.u.hat
    if state.galerkin_n is not None:
        # the Galerkin system lives on the range of J_n
        Q0, u0 = asm.prepare(Q0, u0)
    NQ0, Nu0 = asm(Q0, u0)
    hist = state.history

    if cfg.scheme == "imex_euler":
        Q1, u1 = _euler(asm, p, Q0, u0, dt, NQ0, Nu0)
    elif hist is None or hist.dt != dt:
        Qf, uf = _euler(asm, p, Q0, u0, dt, NQ0, Nu0)
        Qh, uh = _euler(asm, p, Q0, u0, 0.5 * dt, NQ0, Nu0)
        Qh, uh = _euler(asm, p, Qh, uh, 0.5 * dt)
        Q1, u1 = 2.0 * Qh - Qf, 2.0 * uh - uf
    else:
        ksq = asm.ksq
        Q1 = (4.0 * Q0 - hist.Q_hat + 2.0 * dt * (2.0 * NQ0 - hist.NQ)) / (
            3.0 + 2.0 * dt * p.Gamma * p.L * ksq)
        u1 = (4.0 * u0 - hist.u_hat + 2.0 * dt * (2.0 * Nu0 - hist.Nu)) / (
            3.0 + 2.0 * dt * p.nu * ksq)

    u1 = leray_hat(state.grid, u1)
    new = SimState(
        state.t + dt,
        QTensorField(state.grid, Q1, state.Q.dim),
        VectorField(state.grid, u1),
        p,
        state.galerkin_n,
        _History(Q0, u0, NQ0, Nu0, dt) if cfg.scheme == "imex_sbdf2" else None,
    )
    _check_finite(new, "after step")
    return new


Observer = Callable[[SimState], Dict[str, float]]


@dataclass
class Trajectory:
    """Samples recorded by ``run``: one dict of observer outputs per time."""

    times: List[float] = field(default_factory=list)
    records: List[Dict[str, float]] = field(default_factory=list)
    final: Optional[SimState] = None
    blowup: Optional[dict] = None

    def __len__(self):
        return len(self.times)

    def series(self, name: str) -> np.ndarray:
        return np.array([rec[name] for rec in self.records], dtype=float)

    @property
    def columns(self) -> List[str]:
        return list(self.records[0]) if self.records else []


def _observe(state: SimState, observers: Sequence[Observer]) -> Dict[str, float]:
    rec: Dict[str, float] = {}
    for obs in observers:
        rec.update(obs(state))
    return rec


def run(initial: SimState, cfg: StepperConfig, T: float,
        observers: Sequence[Observer] = (), cadence: int = 1,
        on_sample: Optional[Callable[[float, Dict[str, float]], None]] = None) -> Trajectory:
    """Integrate to ``T``, sampling every ``cadence`` steps and at the end.

    A blow-up raises ``BlowUpError`` carrying the partial trajectory.
    """
    if T < initial.t:
        raise ValueError("final time precedes the initial time")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    nsteps = int(round((T - initial.t) / cfg.dt))
    if nsteps and abs(initial.t + nsteps * cfg.dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T - t0 must be an integer multiple of dt")
    traj = Trajectory()

    def sample(s):
        rec = _observe(s, observers)
        traj.times.append(s.t)
        traj.records.append(rec)
        if on_sample is not None:
            on_sample(s.t, rec)

    state = initial
    # overflow is detected explicitly by the finiteness checks
    with np.errstate(over="ignore", invalid="ignore"):
        traj = _integrate(state, cfg, nsteps, cadence, sample, traj)
    return traj


def _integrate(state, cfg, nsteps, cadence, sample, traj):
    sample(state)
    for k in range(1, nsteps + 1):
        try:
            state = step(state, cfg)
        except BlowUpError as exc:
            exc.record.setdefault("step", k)
            traj.blowup = exc.record
            traj.final = state
            exc.trajectory = traj
            raise
        if k % cadence == 0 or k == nsteps:
            sample(state)
    traj.final = state
    return traj
