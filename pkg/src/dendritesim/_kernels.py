"""Compiled stepping loops for the transient engine.

Plain arrays in, plain arrays out: the Python side in ``transient`` flattens
the network into these arrays and unpacks the results. Kernels release the
GIL so sweeps can run them from a thread pool.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Logistic slope: 1 % -> 99 % across one transition width.
SMOOTH_SLOPE = 2.0 * math.log(99.0)

STATUS_OK = 0
STATUS_DIVERGED = 1

GATE_FROM_STIMULUS = 0
GATE_FROM_MEMBRANE = 1

KIND_HARD = 0
KIND_SMOOTH = 1

POLARITY_N = 0
POLARITY_P = 1


@njit(cache=True, nogil=True)
def gate_conductance(
    v_gate: float,
    kind: int,
    polarity: int,
    v_threshold: float,
    g_on: float,
    g_off: float,
    width: float,
    vdd: float,
) -> float:
    if polarity == POLARITY_N:
        overdrive = v_gate - v_threshold
    else:
        overdrive = (vdd - v_threshold) - v_gate
    if kind == KIND_HARD:
        return g_on if overdrive >= 0.0 else g_off
    x = SMOOTH_SLOPE * overdrive / width
    if x >= 0.0:
        s = 1.0 / (1.0 + math.exp(-x))
    else:
        e = math.exp(x)
        s = e / (1.0 + e)
    return g_off + (g_on - g_off) * s


@njit(cache=True, nogil=True)
def step_network(
    c_r: np.ndarray,
    c_m: np.ndarray,
    g_a: np.ndarray,
    g_l: np.ndarray,
    rail_d: np.ndarray,
    rail_l: np.ndarray,
    polarity: np.ndarray,
    gate_seg: np.ndarray,
    gate_src_kind: np.ndarray,
    gate_src: np.ndarray,
    gate_kind: np.ndarray,
    gate_vth: np.ndarray,
    gate_g_on: np.ndarray,
    gate_g_off: np.ndarray,
    gate_width: np.ndarray,
    stim: np.ndarray,
    v_r0: np.ndarray,
    v_m0: np.ndarray,
    vdd: float,
    dt: float,
    theta: float,
    n_steps: int,
    stride: int,
    lo: float,
    hi: float,
) -> tuple[np.ndarray, np.ndarray, int, int, int, float]:
    """Theta-method integration of every segment's two-node RC system.

    Drain conductance is frozen at the gate voltages of step k while solving
    for step k+1; stimuli and upstream membranes are both read at step k.

    Returns:
        (recorded v_R, recorded v_M, status, failing step, failing node,
        failing value). Node index 2*i is segment i's reservoir and 2*i+1 its
        membrane.
    """
    n_seg = c_r.shape[0]
    n_gates = gate_seg.shape[0]
    n_rec = n_steps // stride + 1
    rec_r = np.empty((n_rec, n_seg))
    rec_m = np.empty((n_rec, n_seg))
    v_r = v_r0.copy()
    v_m = v_m0.copy()
    g = np.empty(n_seg)
    rec_r[0, :] = v_r
    rec_m[0, :] = v_m
    row = 1
    for k in range(n_steps):
        for i in range(n_seg):
            g[i] = 0.0
        for j in range(n_gates):
            if gate_src_kind[j] == GATE_FROM_STIMULUS:
                v_gate = stim[gate_src[j], k]
            else:
                v_gate = v_m[gate_src[j]]
            seg = gate_seg[j]
            g[seg] += gate_conductance(
                v_gate,
                gate_kind[j],
                polarity[seg],
                gate_vth[j],
                gate_g_on[j],
                gate_g_off[j],
                gate_width[j],
                vdd,
            )
        for i in range(n_seg):
            ga = g_a[i]
            gl = g_l[i]
            gd = g[i]
            # f(x) = M x + s
            m00 = -(gd + ga)
            m01 = ga
            m11 = -(ga + gl)
            s0 = gd * rail_d[i]
            s1 = gl * rail_l[i]
            cr = c_r[i] / dt
            cm = c_m[i] / dt
            explicit = 1.0 - theta
            b0 = cr * v_r[i] + explicit * (m00 * v_r[i] + m01 * v_m[i]) + s0
            b1 = cm * v_m[i] + explicit * (m01 * v_r[i] + m11 * v_m[i]) + s1
            l00 = cr - theta * m00
            l01 = -theta * m01
            l11 = cm - theta * m11
            det = l00 * l11 - l01 * l01
            new_r = (b0 * l11 - l01 * b1) / det
            new_m = (l00 * b1 - l01 * b0) / det
            if not (math.isfinite(new_r) and lo <= new_r <= hi):
                return rec_r[:row], rec_m[:row], STATUS_DIVERGED, k + 1, 2 * i, new_r
            if not (math.isfinite(new_m) and lo <= new_m <= hi):
                return rec_r[:row], rec_m[:row], STATUS_DIVERGED, k + 1, 2 * i + 1, new_m
            v_r[i] = new_r
            v_m[i] = new_m
        if (k + 1) % stride == 0:
            rec_r[row, :] = v_r
            rec_m[row, :] = v_m
            row += 1
    return rec_r[:row], rec_m[:row], STATUS_OK, n_steps, -1, 0.0


@njit(cache=True, nogil=True)
def step_linear(
    step_matrix: np.ndarray,
    drive: np.ndarray,
    u: np.ndarray,
    x0: np.ndarray,
    n_steps: int,
    stride: int,
    lo: float,
    hi: float,
) -> tuple[np.ndarray, int, int, int, float]:
    """Iterate x[k+1] = P x[k] + d u[k] for a time-invariant linear network."""
    n = x0.shape[0]
    n_rec = n_steps // stride + 1
    rec = np.empty((n_rec, n))
    x = x0.copy()
    nxt = np.empty(n)
    rec[0, :] = x
    row = 1
    for k in range(n_steps):
        for i in range(n):
            acc = drive[i] * u[k]
            for j in range(n):
                acc += step_matrix[i, j] * x[j]
            nxt[i] = acc
        for i in range(n):
            if not (math.isfinite(nxt[i]) and lo <= nxt[i] <= hi):
                return rec[:row], STATUS_DIVERGED, k + 1, i, nxt[i]
            x[i] = nxt[i]
        if (k + 1) % stride == 0:
            rec[row, :] = x
            row += 1
    return rec[:row], STATUS_OK, n_steps, -1, 0.0
