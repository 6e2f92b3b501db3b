"""Monte-Carlo certification suites run by ``beqt verify``.

Each suite is deterministic in its seed and returns a :class:`SuiteResult`
whose ``details`` are JSON-serializable.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .. import tensor_core as tc
from ..energy import lemma1_residual, lemma1_scale, pointwise_variational_check, variational_check
from ..evolution import StepperConfig, run
from ..initial_data import random_band_limited, random_hat
from ..littlewood_paley import (
    COMMUTATOR_TRIPLES,
    INTERPOLATION_PS,
    DyadicFrame,
    calibrate,
    commutator_ratios,
    interpolation_ratios,
    random_scalar,
)
from ..spectral import QTensorField, SpectralGrid, VectorField, mollify_Jn
from ..tensor_core import ModelParams

DEFAULT_SEED = 20240611
COMMUTATOR_MARGIN = 2.0
INTERPOLATION_MARGIN = 2.0


@dataclass
class SuiteResult:
    name: str
    passed: bool
    seed: int
    seconds: float = 0.0
    details: Dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), salt])


def _random_Q(grid, rng, kmax=8.0, scale=1.0) -> QTensorField:
    return QTensorField(grid, scale * random_hat(grid, rng, 2, kmax))


def _random_u(grid, rng, kmax=8.0) -> VectorField:
    return VectorField(grid, random_hat(grid, rng, 2, kmax))


def suite_lemma1(seed: int, n: int = 100, N: int = 64, tol: float = 1e-10) -> SuiteResult:
    rng = _rng(seed, 1)
    g = SpectralGrid(N)
    worst = 0.0
    for _ in range(n):
        Qp, Q, u = _random_Q(g, rng), _random_Q(g, rng), _random_u(g, rng)
        lhs, rhs = lemma1_residual(Qp, Q, u)
        worst = max(worst, abs(lhs - rhs) / lemma1_scale(Qp, Q, u))
    return SuiteResult("lemma1", worst <= tol, seed,
                       details={"samples": n, "N": N, "max_scaled_residual": worst, "tol": tol})


def suite_trace_inequality(seed: int, n: int = 100_000, deltas=(0.1, 1.0, 10.0)) -> SuiteResult:
    rng = _rng(seed, 2)
    # mix of scales so both the quadratic and quartic regimes are exercised
    scales = 10.0 ** rng.uniform(-2, 2, size=n)
    Q = tc.random_batch(rng, 3, n) * scales
    violations, worst = {}, {}
    for d in deltas:
        lhs, rhs, holds = tc.cubic_trace_bound(Q, d)
        violations[str(d)] = int(np.count_nonzero(~holds))
        worst[str(d)] = float(np.max((lhs - rhs) / (1.0 + np.abs(rhs))))
    ok = all(v == 0 for v in violations.values())
    return SuiteResult("trace-inequality", ok, seed,
                       details={"samples": n, "violations": violations, "max_scaled_excess": worst})


def suite_partition(seed: int, n: int = 50, N: int = 64) -> SuiteResult:
    rng = _rng(seed, 3)
    g = SpectralGrid(N)
    fr = DyadicFrame(g)
    recon, overlap = 0.0, 0.0
    for _ in range(n):
        f = random_scalar(g, rng, g.N / 3.0, mean_zero=False, slope=0.0)
        blocks = {j: fr.block(f, j).hat for j in fr.blocks()}
        rec = sum(blocks.values())
        scale = np.max(np.abs(f.hat))
        recon = max(recon, float(np.max(np.abs(rec - f.hat * g.dealias_mask))) / scale)
        for p in blocks:
            for q in blocks:
                if abs(p - q) >= 2:
                    ip = abs(g.spectral_inner(blocks[p], blocks[q]))
                    overlap = max(overlap, ip / g.l2_norm_sq(f.hat))
    ok = recon <= 1e-12 and overlap <= 1e-13
    return SuiteResult("partition", ok, seed,
                       details={"samples": n, "q_max": fr.q_max, "max_reconstruction_error": recon,
                                "max_disjoint_inner": overlap})


def suite_bernstein(seed: int, n: int = 100, N: int = 64) -> SuiteResult:
    rng = _rng(seed, 4)
    g = SpectralGrid(N)
    fr = DyadicFrame(g)
    lo, hi, checked, vacuous = np.inf, 0.0, 0, 0
    lp_max: Dict[str, float] = {}
    low_max: Dict[str, float] = {}
    for _ in range(n):
        f = random_scalar(g, rng, rng.uniform(2.0, g.N / 3.0), mean_zero=False)
        for q in range(fr.q_max + 1):
            rep = fr.bernstein_check(f, q)
            if rep.vacuous:
                vacuous += 1
                continue
            checked += 1
            lo, hi = min(lo, rep.gradient_ratio), max(hi, rep.gradient_ratio)
            for k, v in rep.lp_ratios.items():
                lp_max[str(k)] = max(lp_max.get(str(k), 0.0), v)
            for k, v in rep.low_pass_ratios.items():
                low_max[str(k)] = max(low_max.get(str(k), 0.0), v)
    ok = checked > 0 and lo >= 0.5 and hi <= 2.0
    return SuiteResult("bernstein", ok, seed,
                       details={"samples": n, "shells_checked": checked, "vacuous": vacuous,
                                "gradient_ratio_min": float(lo), "gradient_ratio_max": float(hi),
                                "lp_ratio_max": lp_max, "low_pass_ratio_max": low_max})


def suite_commutator(seed: int, n: int = 100, N: int = 64) -> SuiteResult:
    g = SpectralGrid(N)
    fr = DyadicFrame(g)
    cal = commutator_ratios(fr, _rng(seed, 5), n)
    hold = commutator_ratios(fr, _rng(seed, 6), n)
    c = calibrate("C_phi", cal.ravel(), COMMUTATOR_MARGIN)
    per_triple = {str(t): {"calibration_max": float(cal[..., i].max()),
                           "holdout_max": float(hold[..., i].max()),
                           "holdout_exceedances": c.exceedances(hold[..., i].ravel())}
                  for i, t in enumerate(COMMUTATOR_TRIPLES)}
    exceed = c.exceedances(hold.ravel())
    return SuiteResult("commutator", exceed == 0, seed,
                       details={"samples": n, "C_phi": c.constant, "margin": c.margin,
                                "profile": c.profile, "holdout_exceedances": exceed,
                                "per_triple": per_triple})


def suite_interpolation(seed: int, n: int = 100, N: int = 64) -> SuiteResult:
    g = SpectralGrid(N)
    fr = DyadicFrame(g)
    cal = interpolation_ratios(fr, _rng(seed, 7), n)
    hold = interpolation_ratios(fr, _rng(seed, 8), n)
    c = calibrate("C_interp", cal.ravel(), INTERPOLATION_MARGIN)
    exceed = c.exceedances(hold.ravel())
    per_p = {str(p): {"calibration_max": float(cal[:, i].max()), "holdout_max": float(hold[:, i].max())}
             for i, p in enumerate(INTERPOLATION_PS)}
    return SuiteResult("interpolation", exceed == 0 and c.constant >= 1.0, seed,
                       details={"samples": n, "C": c.constant, "margin": c.margin,
                                "holdout_exceedances": exceed, "per_p": per_p})


def suite_variational(seed: int, n: int = 20, N: int = 32, min_order: float = 1.9) -> SuiteResult:
    rng = _rng(seed, 9)
    g = SpectralGrid(N)
    p2 = ModelParams(a=-0.7, b=0.0, c=1.3, L=0.8)
    orders = []
    for _ in range(n):
        Q = _random_Q(g, rng, kmax=6.0)
        V = _random_Q(g, rng, kmax=6.0, scale=10.0)
        orders.append(variational_check(Q, V, p2).order)
    p3 = ModelParams(a=-0.5, b=1.7, c=0.9, dim=3)
    orders3 = []
    for _ in range(n):
        Q = tc.random_batch(rng, 3, 64)
        V = 10.0 * tc.random_batch(rng, 3, 64)
        orders3.append(pointwise_variational_check(Q, V, p3).order)
    ok = min(orders) >= min_order and min(orders3) >= min_order
    return SuiteResult("variational", ok, seed,
                       details={"pairs": n, "min_order_field_2d": float(min(orders)),
                                "min_order_pointwise_3d": float(min(orders3)),
                                "required": min_order})


def suite_mollifier(seed: int, n_level: int = 8, steps: int = 100, N: int = 64) -> SuiteResult:
    rng = _rng(seed, 10)
    g = SpectralGrid(N)
    Q = _random_Q(g, rng, kmax=g.N / 3.0)
    once = mollify_Jn(Q, n_level)
    idempotent = bool(np.array_equal(mollify_Jn(once, n_level).hat, once.hat))
    p = ModelParams(xi=0.5)
    s = random_band_limited(g, p, int(rng.integers(2**31)), kmax=12.0, galerkin_n=n_level)
    traj = run(s, StepperConfig(1e-3), steps * 1e-3, (), cadence=steps)
    fin = traj.final
    outside = 1.0 - g.jn_mask(n_level)
    leak = g.l2_norm_sq(fin.Q.hat * outside) + g.l2_norm_sq(fin.u.hat * outside)
    ok = idempotent and leak <= 1e-14
    return SuiteResult("mollifier", ok, seed,
                       details={"n": n_level, "steps": steps, "idempotent_bit_exact": idempotent,
                                "energy_outside_annulus": leak})


SUITES: Dict[str, Callable[[int], SuiteResult]] = {
    "lemma1": suite_lemma1,
    "trace-inequality": suite_trace_inequality,
    "partition": suite_partition,
    "bernstein": suite_bernstein,
    "commutator": suite_commutator,
    "interpolation": suite_interpolation,
    "variational": suite_variational,
    "mollifier": suite_mollifier,
}


def run_suites(names: Optional[List[str]] = None, seed: int = DEFAULT_SEED) -> List[SuiteResult]:
    names = list(SUITES) if not names or names == ["all"] else names
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}")
    out = []
    for name in names:
        t0 = time.perf_counter()
        res = SUITES[name](seed)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out
