"""Invariant checks behind the ``validate`` subcommand."""
from __future__ import annotations

import math

import numpy as np

from .beamformer import NAMED_PATTERNS
from .experiments import ExperimentOutput, _check_max, half_grid, _peak_candidates
from .metrics import BeampatternResult, MonteCarloPlan, predict_sdn, sdn, simulate, simulate_trial_reference
from .quantizer import UniformQuantizer

TWO_PI = 2.0 * math.pi


def check_decomposition(config, n_trials=100, seed=None):
    """Worst relative mismatch between the output and ideal + error parts."""
    rng = np.random.default_rng(config.master_seed if seed is None else seed)
    patterns = list(NAMED_PATTERNS)
    plan = MonteCarloPlan(n_trials, config.master_seed, config.plan().gain)
    worst = 0.0
    for t in range(n_trials):
        p = patterns[t % len(patterns)]
        bits = int(rng.integers(8, 17))
        angle = float(rng.uniform(0.0, 360.0))
        ref = simulate_trial_reference(
            config.source(), config.geometry(), config.sampling(), config.quantizer(bits),
            config.design(NAMED_PATTERNS[p]), plan, t, angle,
        )
        out = ref["output"]
        gap = np.max(np.abs(out - (ref["ideal"] + ref["error"]))) / np.max(np.abs(out))
        worst = max(worst, float(gap))
    return worst


def check_quantizer(n=200_000, seed=0):
    """Idempotence, monotonicity and the half-step bound on random inputs."""
    rng = np.random.default_rng(seed)
    failures = {"idempotence": 0, "monotonicity": 0, "bound": 0}
    for bits in (1, 3, 8, 12, 16, 24):
        q = UniformQuantizer(bits)
        delta = q.step_size()
        x = rng.uniform(-1.2, 1.2, n)
        y = q.quantize_seq(x).values
        failures["idempotence"] += int(np.count_nonzero(q.quantize_seq(y).values != y))
        xs = np.sort(x)
        failures["monotonicity"] += int(np.count_nonzero(np.diff(q.quantize_seq(xs).values) < 0))
        inside = np.abs(x) <= 1.0 - delta / 2
        failures["bound"] += int(np.count_nonzero(np.abs(y - x)[inside] > delta / 2))
    return failures


def error_moments(bits=12, n_phases=256, length=4096, frequency_hz=1999.0, sample_rate_hz=44100.0,
                  amplitude=1.0, seed=0):
    """Error statistics over random-phase sinusoids.

    Returns ``(mean/step, variance/step**2, saturated_fraction)`` where the
    moments cover the in-range samples only; clipped samples are counted
    separately because their error is not bounded by half a step.
    """
    rng = np.random.default_rng(seed)
    q = UniformQuantizer(bits)
    delta = q.step_size()
    n = np.arange(length)
    phases = rng.uniform(0.0, TWO_PI, n_phases)
    x = amplitude * np.cos(TWO_PI * frequency_hz / sample_rate_hz * n[None, :] + phases[:, None])
    sat = q.saturated(x)
    e = q.error(x)[~sat]
    return float(e.mean() / delta), float(e.var() / delta**2), float(sat.mean())


def check_oracle(config, bits=tuple(range(8, 17))):
    """Largest |Monte Carlo SDN - predicted SDN| over the named patterns and ``bits``."""
    grid = half_grid(config.polar_grid_deg)
    designs = [config.design(a) for a in NAMED_PATTERNS.values()]
    angles = set()
    for d in designs:
        angles |= _peak_candidates(d, grid) | {d.null_angle}
    angles = sorted(angles)
    qs = [config.quantizer(b) for b in bits]
    mean, se = simulate(config.source(), config.geometry(), config.sampling(), qs, designs, config.plan(), angles)
    worst = 0.0
    table = {}
    for i, d in enumerate(designs):
        for j, (b, q) in enumerate(zip(bits, qs)):
            res = BeampatternResult(angles, mean[j, i], se[j, i])
            gap = abs(sdn(res, d.null_angle) - predict_sdn(d, q, config.amplitude, grid=grid))
            table[(d.null_angle, b)] = gap
            worst = max(worst, gap)
    return worst, table


def run_validation(config):
    out = ExperimentOutput("validate")
    out.checks.append(_check_max("decomposition identity (relative)", check_decomposition(config), 1e-12))
    fails = check_quantizer()
    for name, count in fails.items():
        out.checks.append(_check_max(f"quantizer {name} violations", count, 0))
    mean, var, sat = error_moments()
    out.checks.append(_check_max("quantizer error mean / step at 12 bits", abs(mean), 0.01))
    out.checks.append(_check_max("quantizer error variance vs step^2/12 (relative)", abs(var * 12 - 1), 0.05))
    out.notes.append(f"full-scale sinusoid at 12 bits: {100 * sat:.2f}% of samples clip at the top code")
    worst, _ = check_oracle(config)
    out.checks.append(_check_max("Monte Carlo SDN vs predicted SDN (dB)", worst, 1.0))
    return out
