"""Compiled Monte Carlo inner loop.

Per trial the sensor trig is evaluated once; every arrival angle then only
rotates sensor 2's sequence by the propagation phase, and every quantizer and
weight set reuses the same rotated samples. Results are summed over trials in
index order so the output does not depend on anything but the inputs.
"""
import math

import numpy as np
from numba import njit


@njit(inline="always")
def _quantize(x, inv, delta, lo, hi):
    v = x * inv
    k = float(math.trunc(v))
    r = v - k
    k = k + (1.0 if r >= 0.5 else 0.0) - (1.0 if r <= -0.5 else 0.0)
    return min(max(k, lo), hi) * delta


@njit(inline="always")
def _quantize_into(out, src, delta, lo, hi):
    if delta == 0.0:
        out[:] = src
        return
    inv = 1.0 / delta
    for n in range(src.shape[0]):
        out[n] = _quantize(src[n], inv, delta, lo, hi)


@njit(fastmath={"reassoc"}, cache=True)
def simulate_power(
    signal_phase, mis1, mis2, gain1, gain2, amplitude, omega_ts, length,
    delays, quant, weights,
):
    """Mean-square beamformer output for every (quantizer, design, angle).

    Parameters
    ----------
    signal_phase, mis1, mis2 : (T,) arrays
        Source initial phase and per-sensor phase mismatch for each trial.
    gain1, gain2 : (T,) arrays
        Sensor gains per trial.
    amplitude : float
    omega_ts : float
        Phase advance per sample, ``w0 * Ts``.
    length : int
        Samples per trial.
    delays : (K,) array
        Propagation phase ``w0 * zeta0(theta)`` of sensor 2 per angle.
    quant : (Q, 6) array
        ``delta, lo, hi`` for the in-phase rail followed by the quadrature
        rail; ``delta == 0`` disables that rail's quantizer.
    weights : (D, 2) complex array
        Design weights per sensor; sensor phase and gain are inverted per trial.

    Returns
    -------
    total, total_sq : (Q, D, K) arrays
        Sum over trials of the per-trial power and of its square.
    """
    T = signal_phase.shape[0]
    Q = quant.shape[0]
    D = weights.shape[0]
    K = delays.shape[0]
    total = np.zeros((Q, D, K))
    total_sq = np.zeros((Q, D, K))

    c1 = np.empty(length)
    s1 = np.empty(length)
    c2 = np.empty(length)
    s2 = np.empty(length)
    x2 = np.empty(length)
    y2 = np.empty(length)
    qc1 = np.empty((Q, length))
    qs1 = np.empty((Q, length))
    qx = np.empty(length)
    qy = np.empty(length)
    cos_d = np.cos(delays)
    sin_d = np.sin(delays)
    h = np.empty((D, 4))

    for t in range(T):
        a1 = gain1[t] * amplitude
        a2 = gain2[t] * amplitude
        p1 = signal_phase[t] + mis1[t]
        p2 = signal_phase[t] + mis2[t]
        for n in range(length):
            p = omega_ts * n
            c1[n] = a1 * math.cos(p + p1)
            s1[n] = a1 * math.sin(p + p1)
            c2[n] = a2 * math.cos(p + p2)
            s2[n] = a2 * math.sin(p + p2)
        for q in range(Q):
            _quantize_into(qc1[q], c1, quant[q, 0], quant[q, 1], quant[q, 2])
            _quantize_into(qs1[q], s1, quant[q, 3], quant[q, 4], quant[q, 5])
        for d in range(D):
            h1 = weights[d, 0] / gain1[t] * complex(math.cos(mis1[t]), -math.sin(mis1[t]))
            h2 = weights[d, 1] / gain2[t] * complex(math.cos(mis2[t]), -math.sin(mis2[t]))
            h[d, 0] = h1.real
            h[d, 1] = h1.imag
            h[d, 2] = h2.real
            h[d, 3] = h2.imag
        for k in range(K):
            cb = cos_d[k]
            sb = sin_d[k]
            for n in range(length):
                x2[n] = c2[n] * cb + s2[n] * sb
                y2[n] = s2[n] * cb - c2[n] * sb
            for q in range(Q):
                _quantize_into(qx, x2, quant[q, 0], quant[q, 1], quant[q, 2])
                _quantize_into(qy, y2, quant[q, 3], quant[q, 4], quant[q, 5])
                for d in range(D):
                    h1r = h[d, 0]
                    h1i = h[d, 1]
                    h2r = h[d, 2]
                    h2i = h[d, 3]
                    acc = 0.0
                    for n in range(length):
                        b = h1r * qc1[q, n] - h1i * qs1[q, n] + h2r * qx[n] - h2i * qy[n]
                        acc += b * b
                    p = acc / length
                    total[q, d, k] += p
                    total_sq[q, d, k] += p * p
    return total, total_sq
