import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beqt import kernels
from beqt import tensor_core as tc

BACKENDS = kernels.backends()


def test_compiled_backend_selected_when_available():
    if "cython" in BACKENDS:
        assert kernels.BACKEND == "cython"
    else:  # pragma: no cover - build without a compiler
        assert kernels.BACKEND == "python"


def test_pure_python_override():
    code = "from beqt import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, BEQT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def _inputs(seed, n=16):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((12, n, n))


@pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")
@given(st.integers(0, 2**32 - 1), st.sampled_from([8, 16, 33]))
def test_backends_agree(seed, n):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    inp = _inputs(seed, n)
    np.testing.assert_allclose(cy.stage_a(inp), py.stage_a(inp), rtol=1e-14, atol=1e-14)
    q, r, a, b = inp[0], inp[1], inp[2], inp[3]
    np.testing.assert_allclose(cy.stage_b(q, r, a, b), py.stage_b(q, r, a, b), rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(cy.stage_c(q, r, a, b), py.stage_c(q, r, a, b), rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(cy.stage_d(q, r, a), py.stage_d(q, r, a), rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_stage_a_against_matrix_algebra(name):
    impl = BACKENDS[name]
    inp = _inputs(3)
    q, r, qx, qy, rx, ry, u1, u2, u1x, u1y, u2x, u2y = inp
    out = dict(zip(kernels.STAGE_A_OUTPUTS, impl.stage_a(inp)))
    Q = tc.to_matrix(np.stack([q, r]), 2)
    G = np.array([[u1x, u1y], [u2x, u2y]])  # G[a, b] = d_b u_a
    D = 0.5 * (G + np.swapaxes(G, 0, 1))
    Om = 0.5 * (G - np.swapaxes(G, 0, 1))
    np.testing.assert_allclose(out["trQ2"], tc.trace(tc.matmul(Q, Q)), rtol=1e-13)
    np.testing.assert_allclose(out["trQD"], tc.trace(tc.matmul(Q, D)), rtol=1e-12, atol=1e-13)
    rot = tc.matmul(Om, Q) - tc.matmul(Q, Om)
    np.testing.assert_allclose(2 * out["w_r"], rot[0, 0], rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(-2 * out["w_q"], rot[0, 1], rtol=1e-12, atol=1e-13)
    dQ = np.array([[qx, qy], [rx, ry]])
    dQm = tc.to_matrix(dQ, 2)  # dQm[a, b, k]
    E = np.einsum("gda...,gdb...->ab...", dQm, dQm)
    np.testing.assert_allclose(out["E11"], E[0, 0], rtol=1e-12)
    np.testing.assert_allclose(out["E12"], E[0, 1], rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(out["E22"], E[1, 1], rtol=1e-12)
    np.testing.assert_allclose(out["adv_u1"], u1 * u1x + u2 * u1y, rtol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_stage_c_identities(name):
    impl = BACKENDS[name]
    rng = np.random.default_rng(4)
    q, r, h1, h2 = rng.standard_normal((4, 9, 9))
    QH, sig = impl.stage_c(q, r, h1, h2)
    Q = tc.to_matrix(np.stack([q, r]), 2)
    H = tc.to_matrix(np.stack([h1, h2]), 2)
    np.testing.assert_allclose(QH, tc.trace(tc.matmul(Q, H)), rtol=1e-13)
    comm = tc.matmul(Q, H) - tc.matmul(H, Q)
    np.testing.assert_allclose(sig, comm[0, 1], rtol=1e-13, atol=1e-14)


def test_benchmark_smoke():
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    row = mod.bench(16, 1)
    assert row["N"] == 16 and "python" in row
    assert kernels.stage_a is getattr(BACKENDS[kernels.BACKEND], "stage_a")
