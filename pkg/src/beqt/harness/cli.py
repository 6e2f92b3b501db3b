"""Command-line entry point ``beqt``.

Subcommands
-----------
simulate   run a config, write time-series CSV, JSON summary and final checkpoint
twin       run a config at two resolutions and report the difference
verify     run the certification suites, one JSON verdict per suite
spectrum   dyadic shell report of a checkpoint
energy     energy report of a checkpoint

Exit codes: 0 success, 1 verification failure, 2 configuration / input
error, 3 numerical blow-up, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .. import kernels
from ..energy import apriori_monitor, energy_observer, lyapunov_residual, norms_observer, total_energy
from ..evolution import BlowUpError, SimState, run
from ..initial_data import make_initial
from ..littlewood_paley import DyadicFrame, log_embedding_monitor, phi_split, spectrum_rows
from ..spectral import SpectralGrid
from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, load_config
from .suites import DEFAULT_SEED, SUITES, run_suites
from .twin import EmbeddingError, twin_run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 1, 2, 3, 4

CSV_COLUMNS = ("t", "E_total", "E_kin", "E_elastic", "E_bulk", "diss_visc", "diss_rot",
               "lyap_residual", "H1_Q", "L2_u", "phi", "phi1", "phi2", "Linf_Q", "log_embed_ratio")

log = logging.getLogger("beqt")


def _fmt(x) -> str:
    return repr(float(x))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
        fh.write("\n")
    return path


def build_initial(cfg: RunConfig) -> SimState:
    grid = SpectralGrid(cfg.N, dealias_rule=cfg.stepper.dealias_rule)
    return make_initial(cfg.initial.generator, grid, cfg.params, cfg.initial.seed,
                        galerkin_n=cfg.galerkin_n, **cfg.initial.kwargs())


def monitor_observers(s_index: float):
    """Observers producing every CSV column except ``lyap_residual``."""
    frames: Dict[int, DyadicFrame] = {}

    def lp_observer(state: SimState):
        frame = frames.setdefault(state.grid.N, DyadicFrame(state.grid))
        phi, phi1, phi2 = phi_split(frame, state, s_index)
        try:
            rep = log_embedding_monitor(frame, state.Q, s_index)
            linf, ratio = rep.lhs, rep.ratio
        except ValueError:  # zero Q
            linf, ratio = 0.0, float("nan")
        return {"phi": phi, "phi1": phi1, "phi2": phi2, "Linf_Q": linf, "log_embed_ratio": ratio}

    return [energy_observer, norms_observer, lp_observer]


class CsvStream:
    """Writes one row per sample, filling ``lyap_residual`` from the previous row."""

    def __init__(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(CSV_COLUMNS)
        self.prev: Optional[tuple] = None

    def __call__(self, t: float, rec: Dict[str, float]):
        D = rec["diss_visc"] + rec["diss_rot"]
        if self.prev is None:
            res = float("nan")
        else:
            t0, E0, D0 = self.prev
            res = (rec["E_total"] - E0) / (t - t0) + 0.5 * (D + D0)
        self.prev = (t, rec["E_total"], D)
        row = dict(rec, t=t, lyap_residual=res)
        self.w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])

    def close(self):
        self.fh.close()


def simulate(cfg: RunConfig, quiet: bool = False) -> int:
    out = Path(cfg.out_dir)
    stem = cfg.prefix
    state = build_initial(cfg)
    csv_path = out / f"{stem}.csv"
    stream = CsvStream(csv_path)
    t0 = time.perf_counter()
    summary = {"config": cfg.as_dict(), "kernel_backend": kernels.BACKEND, "csv": str(csv_path)}
    try:
        try:
            traj = run(state, cfg.stepper, cfg.T, monitor_observers(cfg.sobolev_s), cfg.cadence,
                       on_sample=stream)
        finally:
            stream.close()
    except BlowUpError as exc:
        traj = exc.trajectory
        forensic = dict(summary, status="blowup", record=exc.record,
                        samples=len(traj.times) if traj else 0,
                        last_sample=(dict(traj.records[-1], t=traj.times[-1]) if traj and traj.records
                                     else None),
                        wall_seconds=time.perf_counter() - t0)
        if traj is not None and traj.final is not None:
            forensic["last_good_checkpoint"] = str(write_checkpoint(traj.final, out / f"{stem}_last_good.beqt"))
        path = write_json(out / f"{stem}_blowup.json", forensic)
        log.error("blow-up: %s (forensics in %s)", exc.record, path)
        return EXIT_BLOWUP
    E = traj.series("E_total")
    inc = np.diff(E) - 1e-6 * (1.0 + np.abs(E[:-1]))
    summary.update(
        status="ok",
        steps=int(round((cfg.T) / cfg.stepper.dt)),
        samples=len(traj),
        wall_seconds=time.perf_counter() - t0,
        final=total_energy(traj.final).as_row(),
        energy_monotone=bool(np.all(inc <= 0)) if len(E) > 1 else True,
        checkpoint=str(write_checkpoint(traj.final, out / f"{stem}_final.beqt")),
    )
    if len(traj) >= 3:
        lr = lyapunov_residual(traj)
        summary["lyapunov_max_residual"] = lr.max_abs
        summary["lyapunov_relative_residual"] = lr.relative
        summary["apriori"] = apriori_monitor(traj, cfg.params).summary()
    write_json(out / f"{stem}_summary.json", summary)
    if not quiet:
        log.info("done: %d samples, E %.6g -> %.6g, %.2fs", len(traj), E[0], E[-1],
                 summary["wall_seconds"])
    return EXIT_OK


def twin(cfg: RunConfig, n_coarse: int, n_fine: int, quiet: bool = False) -> int:
    state = build_initial(cfg)
    try:
        rep = twin_run(state, n_coarse, n_fine, cfg.stepper, cfg.T, cfg.cadence)
    except EmbeddingError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except BlowUpError as exc:
        write_json(Path(cfg.out_dir) / f"{cfg.prefix}_twin_blowup.json", {"record": exc.record})
        log.error("blow-up during twin run: %s", exc.record)
        return EXIT_BLOWUP
    out = Path(cfg.out_dir)
    rep.write_csv(out / f"{cfg.prefix}_twin_{n_coarse}_{n_fine}.csv")
    write_json(out / f"{cfg.prefix}_twin_{n_coarse}_{n_fine}.json",
               {"N_coarse": n_coarse, "N_fine": n_fine, "sup_delta_energy": rep.sup_delta_energy,
                "samples": len(rep.times), "config": cfg.as_dict()})
    if not quiet:
        log.info("twin %d vs %d: sup delta-energy %.3e", n_coarse, n_fine, rep.sup_delta_energy)
    return EXIT_OK


def verify(names: List[str], seed: int, out: Optional[Path], quiet: bool = False) -> int:
    try:
        results = run_suites(names, seed)
    except KeyError as exc:
        log.error("%s", exc.args[0])
        return EXIT_CONFIG
    verdicts = [r.as_dict() for r in results]
    if out is not None:
        write_json(out / "verify.json", verdicts)
    for v in verdicts:
        print(json.dumps({"suite": v["name"], "passed": v["passed"], "seed": v["seed"],
                          "seconds": round(v["seconds"], 3)}, default=_json_default))
        if not quiet:
            log.info("%s: %s", v["name"], json.dumps(v["details"], default=_json_default))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def spectrum(checkpoint: Path, out: Path, s_values=(0.0, 1.0, 2.0)) -> int:
    state = read_checkpoint(checkpoint)
    frame = DyadicFrame(state.grid)
    out.mkdir(parents=True, exist_ok=True)
    stem = checkpoint.stem
    with open(out / f"{stem}_shells.csv", "w", newline="") as fs, \
            open(out / f"{stem}_sobolev.csv", "w", newline="") as fb:
        ws, wb = csv.writer(fs, lineterminator="\n"), csv.writer(fb, lineterminator="\n")
        ws.writerow(("field", "t", "q", "shell_norm"))
        wb.writerow(("field", "t", "s", "sobolev_norm"))
        for name, f in (("Q", state.Q), ("u", state.u)):
            shells, sob = spectrum_rows(frame, f, state.t, s_values)
            for t, q, v in shells:
                ws.writerow((name, _fmt(t), q, _fmt(v)))
            for t, s, v in sob:
                wb.writerow((name, _fmt(t), _fmt(s), _fmt(v)))
    return EXIT_OK


def energy(checkpoint: Path, out: Optional[Path]) -> int:
    state = read_checkpoint(checkpoint)
    rep = total_energy(state)
    obj = {"t": rep.t, **rep.as_row(), "N": state.grid.N}
    if out is not None:
        write_json(out / f"{checkpoint.stem}_energy.json", obj)
    print(json.dumps(obj, sort_keys=True))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beqt", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, type=Path, help="run configuration (TOML)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed (u64)")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")

    common(sub.add_parser("simulate", help="run a configuration"))
    p = sub.add_parser("twin", help="coarse/fine twin run")
    common(p)
    p.add_argument("--n-coarse", type=int, default=64)
    p.add_argument("--n-fine", type=int, default=None, help="defaults to grid.N of the config")
    p = sub.add_parser("verify", help="run certification suites")
    common(p, config=False)
    p.add_argument("--suite", action="append", default=None,
                   help=f"suite name (repeatable); one of {sorted(SUITES)} or 'all'")
    for name in ("spectrum", "energy"):
        p = sub.add_parser(name, help=f"{name} report of a checkpoint")
        p.add_argument("checkpoint", type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--quiet", action="store_true")
    return ap


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_out(str(args.out))
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="beqt: %(message)s", stream=sys.stderr)
    try:
        if args.command == "simulate":
            return simulate(_config(args), args.quiet)
        if args.command == "twin":
            cfg = _config(args)
            n_fine = args.n_fine if args.n_fine is not None else cfg.N
            if args.n_coarse > n_fine:
                raise ConfigError("--n-coarse must not exceed --n-fine")
            return twin(cfg, args.n_coarse, n_fine, args.quiet)
        if args.command == "verify":
            seed = DEFAULT_SEED if args.seed is None else args.seed
            return verify(args.suite or ["all"], seed, args.out, args.quiet)
        if args.command == "spectrum":
            return spectrum(args.checkpoint, args.out or args.checkpoint.parent)
        if args.command == "energy":
            return energy(args.checkpoint, args.out)
    except (ConfigError, CheckpointError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    return EXIT_CONFIG  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
