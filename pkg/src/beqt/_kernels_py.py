"""Pure-numpy pointwise stage kernels for the 2D right-hand side.

A 2D Q-tensor is ``[[q, r], [r, -q]]``.  Each stage evaluates every
pairwise product needed between two dealiasing passes; the caller filters
the outputs before they enter the next stage.
"""

import numpy as np

STAGE_A_OUTPUTS = (
    "trQ2", "trQD", "adv_q", "adv_r", "w_r", "w_q",
    "adv_u1", "adv_u2", "E11", "E12", "E22",
)


def stage_a(inp, out=None):
    """Quadratic products of the primitive fields.

    ``inp`` rows: q, r, q_x, q_y, r_x, r_y, u1, u2, u1_x, u1_y, u2_x, u2_y.
    """
    q, r, qx, qy, rx, ry, u1, u2, u1x, u1y, u2x, u2y = inp
    if out is None:
        out = np.empty((11,) + q.shape)
    dxx = 0.5 * (u1x - u2y)
    e = 0.5 * (u1y + u2x)
    w = 0.5 * (u1y - u2x)
    out[0] = 2.0 * (q * q + r * r)
    out[1] = 2.0 * (dxx * q + e * r)
    out[2] = u1 * qx + u2 * qy
    out[3] = u1 * rx + u2 * ry
    out[4] = w * r
    out[5] = w * q
    out[6] = u1 * u1x + u2 * u1y
    out[7] = u1 * u2x + u2 * u2y
    out[8] = 2.0 * (qx * qx + rx * rx)
    out[9] = 2.0 * (qx * qy + rx * ry)
    out[10] = 2.0 * (qy * qy + ry * ry)
    return out


def stage_b(q, r, trQ2, trQD, out=None):
    """Cubic completions: ``Q tr(Q^2)`` and ``Q tr(Q grad u)``."""
    if out is None:
        out = np.empty((4,) + q.shape)
    out[0] = q * trQ2
    out[1] = r * trQ2
    out[2] = q * trQD
    out[3] = r * trQD
    return out


def stage_c(q, r, h1, h2, out=None):
    """``tr(QH)`` and the independent entry of ``QH - HQ``."""
    if out is None:
        out = np.empty((2,) + q.shape)
    out[0] = 2.0 * (q * h1 + r * h2)
    out[1] = 2.0 * (q * h2 - r * h1)
    return out


def stage_d(q, r, m, out=None):
    if out is None:
        out = np.empty((2,) + q.shape)
    out[0] = q * m
    out[1] = r * m
    return out
