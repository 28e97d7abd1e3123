"""Monte Carlo beampattern estimation and the figures of merit derived from it.

The beampattern at an arrival angle is the trial-averaged mean-square output
of the quantized beamformer, with the source phase and both sensor phase
mismatches redrawn uniformly on ``[0, 2*pi)`` for every trial. Trial ``t``
draws its randomness from ``numpy.random.default_rng([master_seed, t])``, so
any trial can be reproduced on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernel
from .beamformer import compensate, decompose, beamform_quantized, ideal_response
from .quantizer import UniformQuantizer
from .synthesis import (
    SensorChannel,
    SourceSignal,
    intersensor_delay,
    synth_inphase,
    synth_quadrature,
)

TWO_PI = 2.0 * math.pi
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class EmptyResultError(ValueError):
    pass


class GridTooCoarseError(ValueError):
    pass


@dataclass(frozen=True)
class MonteCarloPlan:
    """Trial count, seed and the sensor gain model.

    ``gain`` is either a constant applied to both sensors or a ``(low, high)``
    pair drawn uniformly per sensor and trial.
    """

    trials: int = 5000
    master_seed: int = 0
    gain: float | tuple = 1.0

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials}")
        if isinstance(self.gain, (tuple, list)):
            lo, hi = self.gain
            if not 0 < lo <= hi:
                raise ValueError(f"gain range must satisfy 0 < low <= high, got {self.gain}")
            object.__setattr__(self, "gain", (float(lo), float(hi)))
        elif not self.gain > 0:
            raise ValueError(f"gain must be > 0, got {self.gain}")

    def trial_draws(self, t):
        """``(phi_sig, phi_s1, phi_s2, g1, g2)`` for trial ``t``."""
        rng = np.random.default_rng([self.master_seed, t])
        phases = rng.uniform(0.0, TWO_PI, 3)
        if isinstance(self.gain, tuple):
            g1, g2 = rng.uniform(self.gain[0], self.gain[1], 2)
        else:
            g1 = g2 = self.gain
        return phases[0], phases[1], phases[2], float(g1), float(g2)

    def draws(self):
        """Arrays of the per-trial draws, each of shape ``(trials,)``."""
        return _draws(self.trials, self.master_seed, self.gain)


@lru_cache(maxsize=16)
def _draws(trials, seed, gain):
    plan = MonteCarloPlan(trials, seed, gain)
    out = np.array([plan.trial_draws(t) for t in range(trials)], dtype=float).reshape(trials, 5)
    out.setflags(write=False)
    return tuple(out.T)


@dataclass
class BeampatternResult:
    """Estimated power response over an angle grid.

    ``power`` is linear mean-square output per angle; ``stderr`` its Monte
    Carlo standard error.
    """

    angles: np.ndarray
    power: np.ndarray
    stderr: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)

    @property
    def max_index(self):
        if self.power.size == 0:
            raise EmptyResultError("beampattern has no samples")
        return int(np.argmax(self.power))

    @property
    def max_power(self):
        return float(self.power[self.max_index])

    @property
    def max_angle(self):
        return float(self.angles[self.max_index])

    def power_at(self, angle):
        """Power at ``angle`` (deg); linear interpolation between grid points."""
        if self.power.size == 0:
            raise EmptyResultError("beampattern has no samples")
        hit = np.flatnonzero(np.isclose(self.angles, angle, rtol=0, atol=1e-9))
        if hit.size:
            return float(self.power[hit[0]])
        order = np.argsort(self.angles)
        a, p = self.angles[order], self.power[order]
        if not a[0] <= angle <= a[-1]:
            raise ValueError(f"angle {angle} deg lies outside the grid [{a[0]}, {a[-1]}]")
        return float(np.interp(angle, a, p))

    def normalized_db(self):
        return 10.0 * np.log10(self.power / self.max_power)


def fold_angle(angle_deg):
    """Map angles onto [0, 180] deg; the response only depends on cos(theta)."""
    a = np.mod(np.asarray(angle_deg, dtype=float), 360.0)
    return np.where(a > 180.0, 360.0 - a, a)


def _quant_row(q):
    if isinstance(q, UniformQuantizer):
        q = (q, q)
    row = []
    for rail in q:
        delta = rail.step_size()
        if delta is None:
            row += [0.0, 0.0, 0.0]
        else:
            lo, hi = rail.code_range()
            row += [delta, float(lo), float(hi)]
    return row


def simulate(source, geometry, sampling, quantizers, designs, plan, angles):
    """Run the Monte Carlo for every quantizer x design x angle at once.

    Parameters
    ----------
    source : SourceSignal
        Amplitude and frequency; the initial phase is redrawn per trial.
    geometry : ArrayGeometry
    sampling : SamplingConfig
    quantizers : sequence
        Each entry a :class:`UniformQuantizer` or an ``(in_phase, quadrature)``
        pair of them.
    designs : sequence of FirstOrderDesign
    plan : MonteCarloPlan
    angles : array_like
        Arrival angles in degrees.

    Returns
    -------
    mean, stderr : ndarray of shape ``(len(quantizers), len(designs), len(angles))``
    """
    for d in designs:
        if not math.isclose(d.angular_frequency, source.angular_frequency, rel_tol=1e-12):
            raise ValueError("design frequency differs from the source frequency")
        if d.geometry != geometry:
            raise ValueError("design geometry differs from the simulated geometry")
    sampling.check_nyquist(source.frequency_hz)
    folded = fold_angle(angles)
    uniq, inverse = np.unique(folded, return_inverse=True)
    delays = source.angular_frequency * intersensor_delay(geometry, np.radians(uniq))
    quant = np.array([_quant_row(q) for q in quantizers], dtype=float).reshape(-1, 6)
    weights = np.array([d.weights for d in designs], dtype=complex).reshape(-1, 2)
    sig, mis1, mis2, g1, g2 = plan.draws()
    total, total_sq = _kernel.simulate_power(
        sig, mis1, mis2, g1, g2,
        float(source.amplitude),
        source.angular_frequency * sampling.sample_period,
        int(sampling.sequence_length),
        delays, quant, weights,
    )
    T = plan.trials
    mean = total / T
    if T > 1:
        var = np.maximum(total_sq / T - mean**2, 0.0) * T / (T - 1)
        stderr = np.sqrt(var / T)
    else:
        stderr = np.full_like(mean, np.nan)
    return mean[..., inverse], stderr[..., inverse]


def simulate_trial_reference(source, geometry, sampling, quantizer, design, plan, t, angle):
    """Slow direct evaluation of one trial at one angle.

    Synthesizes both sensors from the closed-form sinusoids, quantizes each
    rail, compensates and beamforms. Returns a dict with the sequences so
    callers can check the error decomposition.
    """
    if isinstance(quantizer, UniformQuantizer):
        quantizer = (quantizer, quantizer)
    q_in, q_quad = quantizer
    phi_sig, m1, m2, g1, g2 = plan.trial_draws(t)
    src = SourceSignal(source.amplitude, source.angular_frequency, phi_sig)
    channels = [SensorChannel(g1, m1), SensorChannel(g2, m2)]
    zeta = [0.0, float(intersensor_delay(geometry, math.radians(angle)))]
    exact, zq = [], []
    for ch, delay in zip(channels, zeta):
        x = synth_inphase(src, ch, sampling, delay)
        y = synth_quadrature(src, ch, sampling, delay)
        exact.append(x + 1j * y)
        zq.append(q_in.quantize_seq(x).values + 1j * q_quad.quantize_seq(y).values)
    H = compensate(design, channels)
    out = beamform_quantized(zq, H)
    ideal, err = decompose(zq, exact, H)
    return {
        "output": out,
        "ideal": ideal,
        "error": err,
        "H": H,
        "channels": channels,
        "source": src,
        "power": float(np.mean(out**2)),
    }


def estimate_beampattern(source, geometry, sampling, quantizer, design, plan, grid):
    """Monte Carlo beampattern of one design under one quantizer.

    ``grid`` is a sequence of arrival angles in degrees.
    """
    grid = np.asarray(grid, dtype=float)
    mean, se = simulate(source, geometry, sampling, [quantizer], [design], plan, grid)
    meta = {
        "null_angle": design.null_angle,
        "bits": _bits_label(quantizer),
        "frequency_hz": source.frequency_hz,
        "spacing": geometry.spacing,
        "trials": plan.trials,
        "seed": plan.master_seed,
    }
    return BeampatternResult(grid, mean[0, 0], se[0, 0], meta)


def _bits_label(q):
    if isinstance(q, UniformQuantizer):
        return q.bits
    return tuple(r.bits for r in q)


def sdn(result, null_angle, normalization="max"):
    """Suppression depth at ``null_angle`` in dB.

    ``normalization='max'`` references the grid maximum; ``'look'`` the
    response toward 0 deg.
    """
    if result.power.size == 0:
        raise EmptyResultError("beampattern has no samples")
    if normalization == "max":
        ref = result.max_power
    elif normalization == "look":
        ref = result.power_at(0.0)
    else:
        raise ValueError(f"normalization must be 'max' or 'look', got {normalization!r}")
    return 10.0 * math.log10(result.power_at(null_angle) / ref)


def _error_floor(design, channels, quantizer):
    if isinstance(quantizer, UniformQuantizer):
        quantizer = (quantizer, quantizer)
    d_in, d_quad = (q.step_size() or 0.0 for q in quantizer)
    mags = np.abs(design.weights)
    floor = 0.0
    if channels is None:
        # phase mismatch averaged over U(0, 2*pi)
        for w in mags:
            floor += w**2 * (d_in**2 + d_quad**2) / 24.0
        return floor
    channels = list(channels)
    H = compensate(design, channels)
    for h in H:
        a = np.angle(h)
        floor += abs(h) ** 2 * (d_in**2 * math.cos(a) ** 2 + d_quad**2 * math.sin(a) ** 2) / 12.0
    return floor


def predict_beampattern(design, quantizer, amplitude=1.0, angles=None, channels=None):
    """Analytic beampattern: noise-free power plus the quantization error floor.

    The floor is the variance of the propagated error when every rail's error
    is uniform on ``[-delta/2, delta/2]`` and independent of the others.
    ``channels=None`` averages the floor over uniformly random sensor phase.
    """
    if angles is None:
        angles = np.arange(0.0, 180.0 + 0.125, 0.25)
    angles = np.asarray(angles, dtype=float)
    resp = ideal_response(design, np.radians(angles))
    power = amplitude**2 * np.abs(resp) ** 2 / 2.0 + _error_floor(design, channels, quantizer)
    return BeampatternResult(angles, power, np.zeros_like(power), {"predicted": True})


def predict_sdn(design, quantizer, amplitude=1.0, channels=None, grid=None, normalization="max"):
    """Suppression depth predicted from the uniform error model, in dB.

    Error floor (plus any residual noise-free response at the null) over the
    noise-free mainlobe power ``B**2 * |A|**2 / 2``, taken at the grid
    maximum (default 0..180 deg in 0.25 deg steps) or toward 0 deg.
    """
    if grid is None:
        grid = np.arange(0.0, 180.0 + 0.125, 0.25)
    grid = np.union1d(np.asarray(grid, dtype=float), [0.0, design.null_angle])
    at_null = predict_beampattern(design, quantizer, amplitude, [design.null_angle], channels).power[0]
    mainlobe = amplitude**2 * np.abs(ideal_response(design, np.radians(grid))) ** 2 / 2.0
    if normalization == "max":
        ref = float(np.max(mainlobe))
    elif normalization == "look":
        ref = float(mainlobe[0])
    else:
        raise ValueError(f"normalization must be 'max' or 'look', got {normalization!r}")
    return 10.0 * math.log10(at_null / ref)


def _half_plane(result, max_step=1.0):
    a = fold_angle(result.angles)
    order = np.lexsort((result.angles, a))
    a, p = a[order], result.power[order]
    keep = np.concatenate([[True], np.diff(a) > 1e-12])
    a, p = a[keep], p[keep]
    if a.size < 2 or a[0] > 1e-9 or a[-1] < 180.0 - 1e-9:
        raise GridTooCoarseError("grid must cover 0 to 180 deg")
    if np.max(np.diff(a)) > max_step + 1e-9:
        raise GridTooCoarseError(f"grid spacing {np.max(np.diff(a)):.3g} deg exceeds {max_step} deg")
    return np.radians(a), p


def _sin_weighted_integral(theta, p, lo, hi):
    sel = (theta >= lo - 1e-12) & (theta <= hi + 1e-12)
    t, v = theta[sel], p[sel]
    for edge in (lo, hi):
        if not np.any(np.isclose(t, edge, atol=1e-12)):
            t = np.append(t, edge)
            v = np.append(v, np.interp(edge, theta, p))
    order = np.argsort(t)
    t, v = t[order], v[order]
    return float(_trapezoid(v * np.sin(t), t))


def directivity_factor(result):
    """Directivity factor (dB) of an axisymmetric beampattern.

    ``BP(0) / (0.5 * integral_0^pi BP(theta) sin(theta) dtheta)`` by the
    trapezoid rule on the result's own grid (spacing at most 1 deg).
    """
    theta, p = _half_plane(result)
    denom = 0.5 * _sin_weighted_integral(theta, p, 0.0, math.pi)
    return 10.0 * math.log10(p[0] / denom)


def front_to_back(result):
    """Front-to-back ratio (dB): front over back hemisphere sin-weighted power."""
    theta, p = _half_plane(result)
    front = _sin_weighted_integral(theta, p, 0.0, math.pi / 2)
    back = _sin_weighted_integral(theta, p, math.pi / 2, math.pi)
    return 10.0 * math.log10(front / back)
