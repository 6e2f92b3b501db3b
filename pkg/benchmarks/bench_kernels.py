"""Compare the compiled and numpy pointwise kernels.

Times the four stage kernels on their own and inside a full explicit
tendency evaluation.  The full evaluation swaps the module-level kernel
bindings, so both backends run through identical FFT and filtering code.

    python3 benchmarks/bench_kernels.py --N 128 256 --repeat 20
"""

import argparse
import json
import timeit
from contextlib import contextmanager

import numpy as np

from beqt import kernels
from beqt.evolution import RHSAssembler
from beqt.initial_data import random_band_limited
from beqt.spectral import SpectralGrid
from beqt.tensor_core import ModelParams

STAGES = ("stage_a", "stage_b", "stage_c", "stage_d")


@contextmanager
def using(impl):
    saved = {s: getattr(kernels, s) for s in STAGES}
    try:
        for s in STAGES:
            setattr(kernels, s, getattr(impl, s))
        yield
    finally:
        for s, f in saved.items():
            setattr(kernels, s, f)


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(N: int, repeat: int) -> dict:
    rng = np.random.default_rng(0)
    inp = np.ascontiguousarray(rng.standard_normal((12, N, N)))
    q, r, a, b = inp[0], inp[1], inp[2], inp[3]
    state = random_band_limited(SpectralGrid(N), ModelParams(xi=0.5), 1, kmax=N / 4)
    asm = RHSAssembler(state.grid, state.params)
    row = {"N": N}
    for name, impl in kernels.backends().items():
        kern = best_of(lambda: (impl.stage_a(inp), impl.stage_b(q, r, a, b),
                                impl.stage_c(q, r, a, b), impl.stage_d(q, r, a)), repeat)
        with using(impl):
            full = best_of(lambda: asm(state.Q.hat, state.u.hat), repeat)
        row[name] = {"kernels_ms": 1e3 * kern, "rhs_ms": 1e3 * full}
    if "cython" in row:
        row["kernel_speedup"] = row["python"]["kernels_ms"] / row["cython"]["kernels_ms"]
        row["rhs_speedup"] = row["python"]["rhs_ms"] / row["cython"]["rhs_ms"]
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--N", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--json", action="store_true", help="print one JSON object per size")
    args = ap.parse_args(argv)
    print(f"default backend: {kernels.BACKEND}; available: {sorted(kernels.backends())}")
    for N in args.N:
        row = bench(N, args.repeat)
        if args.json:
            print(json.dumps(row))
            continue
        for name in ("python", "cython"):
            if name in row:
                print(f"N={N:4d} {name:7s} kernels {row[name]['kernels_ms']:8.3f} ms   "
                      f"rhs {row[name]['rhs_ms']:8.3f} ms")
        if "kernel_speedup" in row:
            print(f"N={N:4d} speedup kernels x{row['kernel_speedup']:.2f}   rhs x{row['rhs_speedup']:.2f}")


if __name__ == "__main__":
    main()
