"""Twin runs: one initial datum evolved at two resolutions.

The coarse solution is embedded into the fine grid by zero-padding its
coefficients; the difference ``delta = fine - embed(coarse)`` is measured
with the energy-type quantity
``(L/2) ||grad dQ||^2 + 1/2 ||dQ||^2 + 1/2 ||du||^2`` (torus integrals,
Frobenius norm for ``dQ``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..evolution import SimState, StepperConfig, run
from ..spectral import QTensorField, SpectralGrid, VectorField, resample

TWIN_COLUMNS = ("t", "dQ_L2", "grad_dQ_L2", "du_L2", "delta_energy")


class EmbeddingError(ValueError):
    """Initial data not representable on the coarse grid."""


@dataclass
class TwinRunReport:
    N_coarse: int
    N_fine: int
    times: List[float] = field(default_factory=list)
    dQ_L2: List[float] = field(default_factory=list)
    grad_dQ_L2: List[float] = field(default_factory=list)
    du_L2: List[float] = field(default_factory=list)
    delta_energy: List[float] = field(default_factory=list)

    @property
    def sup_delta_energy(self) -> float:
        return float(max(self.delta_energy)) if self.delta_energy else 0.0

    def rows(self):
        return list(zip(self.times, self.dQ_L2, self.grad_dQ_L2, self.du_L2, self.delta_energy))

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TWIN_COLUMNS)
            for row in self.rows():
                w.writerow([repr(float(x)) for x in row])
        return path


def restrict_state(state: SimState, grid: SpectralGrid, strict: bool = True) -> SimState:
    """Move ``state`` onto ``grid``.

    With ``strict`` the data must lie inside the target grid's dealiasing
    mask; otherwise :class:`EmbeddingError` is raised.
    """
    src = state.grid
    Qh = resample(state.Q.hat, src.N, grid.N)
    uh = resample(state.u.hat, src.N, grid.N)
    if strict:
        lost = (src.l2_norm_sq(state.Q.hat) - grid.l2_norm_sq(Qh * grid.dealias_mask)
                + src.l2_norm_sq(state.u.hat) - grid.l2_norm_sq(uh * grid.dealias_mask))
        total = src.l2_norm_sq(state.Q.hat) + src.l2_norm_sq(state.u.hat)
        if lost > 1e-24 * max(total, 1e-300):
            raise EmbeddingError(f"initial data carries energy {lost:.3e} outside the "
                                 f"N={grid.N} dealiasing mask")
    return SimState(state.t, QTensorField(grid, Qh * grid.dealias_mask),
                    VectorField(grid, uh * grid.dealias_mask), state.params, state.galerkin_n)


def delta_metrics(fine: SimState, coarse_Q_hat: np.ndarray, coarse_u_hat: np.ndarray,
                  N_coarse: int):
    g = fine.grid
    dQ = QTensorField(g, fine.Q.hat - resample(coarse_Q_hat, N_coarse, g.N)).matrix_hat
    du = fine.u.hat - resample(coarse_u_hat, N_coarse, g.N)
    l2Q = g.l2_norm_sq(dQ)
    gQ = g.l2_norm_sq(np.sqrt(g.ksq) * dQ)
    l2u = g.l2_norm_sq(du)
    energy = 0.5 * fine.params.L * gQ + 0.5 * l2Q + 0.5 * l2u
    return float(np.sqrt(l2Q)), float(np.sqrt(gQ)), float(np.sqrt(l2u)), float(energy)


def twin_run(initial: SimState, N_coarse: int, N_fine: int, cfg: StepperConfig, T: float,
             cadence: int = 1, fine_samples: Optional[list] = None) -> TwinRunReport:
    """Evolve ``initial`` on both grids and measure the difference at each sample.

    ``fine_samples`` may carry precomputed ``(t, Q_hat, u_hat)`` fine-grid
    samples (same ``cfg``, ``T`` and ``cadence``) so that one fine
    reference can serve several coarse resolutions.
    """
    if N_coarse > N_fine:
        raise ValueError("N_coarse must not exceed N_fine")
    rule = cfg.dealias_rule
    gc = SpectralGrid(N_coarse, dealias_rule=rule)
    coarse0 = restrict_state(initial, gc)
    coarse = []
    run(coarse0, cfg, T, [lambda s: coarse.append((s.t, s.Q.hat, s.u.hat)) or {}], cadence)
    if fine_samples is None:
        fine_samples = fine_reference(initial, N_fine, cfg, T, cadence)
    if len(fine_samples) != len(coarse):
        raise ValueError("fine reference sampled at different times")
    rep = TwinRunReport(N_coarse, N_fine)
    gf = SpectralGrid(N_fine, dealias_rule=rule)
    for (tc, Qc, uc), (tf, Qf, uf) in zip(coarse, fine_samples):
        if abs(tc - tf) > 1e-12 * max(1.0, abs(tf)):
            raise ValueError("fine reference sampled at different times")
        fine_state = SimState(tf, QTensorField(gf, Qf), VectorField(gf, uf), initial.params)
        m = delta_metrics(fine_state, Qc, uc, N_coarse)
        rep.times.append(tf)
        rep.dQ_L2.append(m[0])
        rep.grad_dQ_L2.append(m[1])
        rep.du_L2.append(m[2])
        rep.delta_energy.append(m[3])
    return rep


def fine_reference(initial: SimState, N_fine: int, cfg: StepperConfig, T: float,
                   cadence: int = 1) -> list:
    gf = SpectralGrid(N_fine, dealias_rule=cfg.dealias_rule)
    fine0 = restrict_state(initial, gf)
    out = []
    run(fine0, cfg, T, [lambda s: out.append((s.t, s.Q.hat, s.u.hat)) or {}], cadence)
    return out
