"""Compiled inner loops: analytic pulse evaluation and the timing line search.

The RRC numerator needs sin(pi x (1 - a)) and cos(pi x (1 + a)) on a
uniform grid shifted by a fractional offset; both are obtained from one
complex rotation per offset and precomputed per-sample phasors.
"""

import numpy as np
from numba import njit

EPS_RESOLUTION = 1e-6
SINGULAR_TOL = 1e-8
EDGE_TOL = 1e-12
INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True)
def quantize(x):
    return np.rint(x / EPS_RESOLUTION) * EPS_RESOLUTION


@njit(cache=True)
def _pulse_at(x, a, edge_value, zero_value, sin_term, cos_term):
    # x in symbol periods; sin_term/cos_term already evaluated at x
    ax = abs(x)
    if ax < SINGULAR_TOL:
        return zero_value
    if abs(ax - 1.0 / (4.0 * a)) < SINGULAR_TOL:
        return edge_value
    return (sin_term + 4.0 * a * x * cos_term) / (np.pi * x * (1.0 - (4.0 * a * x) ** 2))


@njit(cache=True)
def _support_weight(x, half_span_sym):
    # truncation edges take half the pulse value (midpoint of the jump)
    d = abs(x) - half_span_sym
    if d > EDGE_TOL:
        return 0.0
    if d >= -EDGE_TOL:
        return 0.5
    return 1.0


@njit(cache=True)
def _fill_row(eps, a, half_span_sym, Q, scale, edge_value, zero_value, rot_lo, rot_hi, out):
    # out[j] = scale * rrc(j/Q - half_span - eps), zero where |t| > half_span
    x0 = -half_span_sym - eps
    ph_lo = np.exp(1j * np.pi * (1.0 - a) * x0)
    ph_hi = np.exp(1j * np.pi * (1.0 + a) * x0)
    for j in range(out.size):
        x = j / Q + x0
        w = _support_weight(x, half_span_sym)
        if w == 0.0:
            out[j] = 0.0
            continue
        s = (ph_lo * rot_lo[j]).imag
        c = (ph_hi * rot_hi[j]).real
        out[j] = w * scale * _pulse_at(x, a, edge_value, zero_value, s, c)


@njit(cache=True)
def _dot_row(eps, a, half_span_sym, Q, scale, edge_value, zero_value, rot_lo, rot_hi, weights):
    x0 = -half_span_sym - eps
    ph_lo = np.exp(1j * np.pi * (1.0 - a) * x0)
    ph_hi = np.exp(1j * np.pi * (1.0 + a) * x0)
    acc = 0.0
    for j in range(weights.size):
        x = j / Q + x0
        w = _support_weight(x, half_span_sym)
        if w == 0.0:
            continue
        s = (ph_lo * rot_lo[j]).imag
        c = (ph_hi * rot_hi[j]).real
        acc += w * weights[j] * _pulse_at(x, a, edge_value, zero_value, s, c)
    return scale * acc


class PulseTables:
    """Per-pulse constants for the compiled evaluators (times in symbol periods)."""

    def __init__(self, rolloff, span_symbols, samples_per_symbol, scale, kernel_length):
        a = float(rolloff)
        Q = samples_per_symbol
        j = np.arange(kernel_length)
        self.args = (
            a,
            0.5 * span_symbols,
            float(Q),
            float(scale),
            (a / np.sqrt(2))
            * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * a)) + (1 - 2 / np.pi) * np.cos(np.pi / (4 * a))),
            1 - a + 4 * a / np.pi,
            np.exp(1j * np.pi * (1.0 - a) * j / Q),
            np.exp(1j * np.pi * (1.0 + a) * j / Q),
        )


@njit(cache=True)
def kernel_rows(eps, a, hs, Q, scale, ev, zv, rot_lo, rot_hi, out):
    for i in range(eps.size):
        _fill_row(eps[i], a, hs, Q, scale, ev, zv, rot_lo, rot_hi, out[i])


@njit(cache=True)
def line_search(rotated, eps_prev, grid, grid_scores, tol, dt, a, hs, Q, scale, ev, zv, rot_lo, rot_hi):
    """Per-sensor argmax of dt * rotated[l] @ kernel(eps).

    Grid winner, then golden-section refinement within one grid step either
    side; the previous offset is kept unless strictly beaten.
    """
    L = rotated.shape[0]
    G = grid.size
    step = 1.0 / G
    upper = 1.0 - EPS_RESOLUTION
    out = np.empty(L)
    for l in range(L):
        w = rotated[l]
        ib = 0
        for g in range(1, G):
            if grid_scores[l, g] > grid_scores[l, ib]:
                ib = g
        best_e = grid[ib]
        best_v = grid_scores[l, ib]

        lo = max(0.0, best_e - step)
        hi = min(upper, best_e + step)
        c = hi - INV_PHI * (hi - lo)
        d = lo + INV_PHI * (hi - lo)
        qc = quantize(c)
        qd = quantize(d)
        fc = dt * _dot_row(qc, a, hs, Q, scale, ev, zv, rot_lo, rot_hi, w)
        fd = dt * _dot_row(qd, a, hs, Q, scale, ev, zv, rot_lo, rot_hi, w)
        if fc > best_v:
            best_v = fc
            best_e = qc
        if fd > best_v:
            best_v = fd
            best_e = qd
        while hi - lo > tol:
            if fc > fd:
                hi = d
                d = c
                fd = fc
                c = hi - INV_PHI * (hi - lo)
                qx = quantize(c)
                fc = dt * _dot_row(qx, a, hs, Q, scale, ev, zv, rot_lo, rot_hi, w)
                fx = fc
            else:
                lo = c
                c = d
                fc = fd
                d = lo + INV_PHI * (hi - lo)
                qx = quantize(d)
                fd = dt * _dot_row(qx, a, hs, Q, scale, ev, zv, rot_lo, rot_hi, w)
                fx = fd
            if fx > best_v:
                best_v = fx
                best_e = qx

        prev = quantize(eps_prev[l])
        prev_v = dt * _dot_row(prev, a, hs, Q, scale, ev, zv, rot_lo, rot_hi, w)
        out[l] = best_e if best_v > prev_v else prev
    return out
