import math

import numpy as np
import pytest
from scipy.integrate import quad

from dmaquant.beamformer import NAMED_PATTERNS, design_first_order
from dmaquant.metrics import (
    BeampatternResult,
    EmptyResultError,
    GridTooCoarseError,
    MonteCarloPlan,
    directivity_factor,
    estimate_beampattern,
    fold_angle,
    front_to_back,
    predict_beampattern,
    predict_sdn,
    sdn,
    simulate,
    simulate_trial_reference,
)
from dmaquant.quantizer import UniformQuantizer
from dmaquant.synthesis import ArrayGeometry, SamplingConfig, SensorChannel, SourceSignal

from conftest import F0


def ideal_pattern(null_deg):
    c = math.cos(math.radians(null_deg))
    a = -c / (1.0 - c)
    return lambda th: (a + (1.0 - a) * np.cos(th)) ** 2


def quad_df(p):
    return 10 * math.log10(p(0.0) / (0.5 * quad(lambda t: p(t) * math.sin(t), 0, math.pi)[0]))


def quad_fbr(p):
    front = quad(lambda t: p(t) * math.sin(t), 0, math.pi / 2)[0]
    back = quad(lambda t: p(t) * math.sin(t), math.pi / 2, math.pi)[0]
    return 10 * math.log10(front / back)


def sampled(p, step=0.25, stop=180.0):
    ang = np.linspace(0.0, stop, int(round(stop / step)) + 1)
    return BeampatternResult(ang, p(np.radians(ang)), np.zeros_like(ang))


# closed forms: DF = 3 (dipole, cardioid), 27/7 (hyper); FBR = 7 (cardioid), 13 (hyper)
@pytest.mark.parametrize(
    "pattern, df_db, fbr_db",
    [
        ("dipole", 10 * math.log10(3), 0.0),
        ("cardioid", 10 * math.log10(3), 10 * math.log10(7)),
        ("hypercardioid", 10 * math.log10(27 / 7), 10 * math.log10(13)),
        ("supercardioid", 5.44, 10.87),
    ],
)
def test_df_fbr_on_ideal_patterns(pattern, df_db, fbr_db):
    p = ideal_pattern(NAMED_PATTERNS[pattern])
    res = sampled(p)
    assert directivity_factor(res) == pytest.approx(quad_df(p), abs=0.01)
    assert front_to_back(res) == pytest.approx(quad_fbr(p), abs=0.01)
    assert directivity_factor(res) == pytest.approx(df_db, abs=0.05)
    assert front_to_back(res) == pytest.approx(fbr_db, abs=0.05)


def test_constant_pattern_is_isotropic():
    res = sampled(lambda th: np.ones_like(th))
    assert directivity_factor(res) == pytest.approx(0.0, abs=1e-4)
    assert front_to_back(res) == pytest.approx(0.0, abs=1e-12)


def test_full_circle_grid_is_folded():
    p = ideal_pattern(120.0)
    full = sampled(p, 0.5, 359.5)
    half = sampled(p, 0.5)
    assert directivity_factor(full) == pytest.approx(directivity_factor(half), abs=1e-12)


def test_grid_checks():
    with pytest.raises(GridTooCoarseError):
        directivity_factor(sampled(ideal_pattern(90), step=2.0))
    with pytest.raises(GridTooCoarseError):
        front_to_back(sampled(ideal_pattern(90), stop=90.0))
    with pytest.raises(EmptyResultError):
        sdn(BeampatternResult([], [], []), 90.0)


def test_power_at_interpolates():
    res = BeampatternResult([0.0, 10.0], [1.0, 3.0], [0.0, 0.0])
    assert res.power_at(10.0) == 3.0
    assert res.power_at(2.5) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        res.power_at(20.0)


def test_fold_angle():
    np.testing.assert_array_equal(fold_angle([0, 90, 180, 270, 359, 360, -30]), [0, 90, 180, 90, 1, 0, 30])


def test_plan_draws_are_per_trial(rng):
    plan = MonteCarloPlan(50, 99)
    sig, m1, m2, g1, g2 = plan.draws()
    assert plan.trial_draws(17) == (sig[17], m1[17], m2[17], g1[17], g2[17])
    assert np.all((sig >= 0) & (sig < 2 * math.pi))
    np.testing.assert_array_equal(g1, 1.0)
    # a longer plan extends, never reshuffles, the earlier trials
    np.testing.assert_array_equal(MonteCarloPlan(80, 99).draws()[0][:50], sig)
    ranged = MonteCarloPlan(10, 1, (0.8, 1.2)).draws()
    assert np.all((ranged[3] >= 0.8) & (ranged[3] <= 1.2))
    for bad in (dict(trials=0), dict(gain=0.0), dict(gain=(1.2, 0.8))):
        with pytest.raises(ValueError):
            MonteCarloPlan(**bad)


@pytest.mark.parametrize("bits", [None, 6, 12, 16])
def test_kernel_matches_reference_path(source, geometry, sampling, designs, bits):
    plan = MonteCarloPlan(12, 21, (0.8, 1.0))
    angles = [0.0, 33.0, 90.0, 135.0, 180.0, 250.0]
    ds = [designs["dipole"], designs["supercardioid"]]
    q = UniformQuantizer(bits)
    mean, _ = simulate(source, geometry, sampling, [q], ds, plan, angles)
    for i, d in enumerate(ds):
        for k, a in enumerate(angles):
            ref = np.mean([simulate_trial_reference(source, geometry, sampling, q, d, plan, t, a)["power"] for t in range(12)])
            assert mean[0, i, k] == pytest.approx(ref, rel=1e-9, abs=1e-25)


def test_split_rail_quantizers(source, geometry, sampling, designs):
    plan = MonteCarloPlan(6, 2)
    pair = (UniformQuantizer(10), UniformQuantizer(14))
    mean, _ = simulate(source, geometry, sampling, [pair], [designs["cardioid"]], plan, [40.0, 180.0])
    for k, a in enumerate((40.0, 180.0)):
        ref = np.mean([simulate_trial_reference(source, geometry, sampling, pair, designs["cardioid"], plan, t, a)["power"] for t in range(6)])
        assert mean[0, 0, k] == pytest.approx(ref, rel=1e-9)


def test_bypass_endfire_power(source, geometry, sampling, designs):
    res = estimate_beampattern(source, geometry, sampling, UniformQuantizer(None), designs["dipole"], MonteCarloPlan(200, 4), [0.0])
    w = source.angular_frequency * sampling.sample_period
    P = sampling.sequence_length
    # per-trial mean of cos^2 deviates from 1/2 by at most this
    bound = abs(math.sin(P * w)) / (2 * P * abs(math.sin(w)))
    assert abs(res.power[0] - 0.5) <= bound
    P = 22050  # 1999 * 22050 / 44100 is a whole number of half cycles
    res = estimate_beampattern(source, geometry, SamplingConfig(44100.0, P), UniformQuantizer(None), designs["dipole"], MonteCarloPlan(3, 4), [0.0])
    assert res.power[0] == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("pattern", list(NAMED_PATTERNS))
def test_bypass_nulls_are_numerically_exact(source, geometry, sampling, designs, pattern):
    d = designs[pattern]
    res = estimate_beampattern(source, geometry, sampling, UniformQuantizer(None), d, MonteCarloPlan(20, 1), [0.0, d.null_angle])
    assert sdn(res, d.null_angle) <= -200.0


def test_symmetry_of_reference_path(source, geometry, sampling, designs):
    plan = MonteCarloPlan(4, 8)
    for t in range(4):
        for a in (20.0, 75.0, 160.0):
            p1 = simulate_trial_reference(source, geometry, sampling, UniformQuantizer(12), designs["hypercardioid"], plan, t, a)["power"]
            p2 = simulate_trial_reference(source, geometry, sampling, UniformQuantizer(12), designs["hypercardioid"], plan, t, -a)["power"]
            assert p1 == pytest.approx(p2, rel=1e-12)


def test_symmetry_within_standard_errors(source, geometry, sampling, designs):
    grid = np.arange(0.0, 360.0, 15.0)
    res = estimate_beampattern(source, geometry, sampling, UniformQuantizer(14), designs["cardioid"], MonteCarloPlan(200, 5), grid)
    for a in grid:
        b = (360.0 - a) % 360.0
        gap = abs(res.power_at(a) - res.power_at(b))
        assert gap <= 3 * max(res.stderr[grid == a][0], 1e-30)


def test_predict_sdn_values(designs):
    d = designs["dipole"]
    # 2 * W^2 * step^2 / 12 over 0.5, W = 1 / (2 sin(tau/2)), step = 2**-15
    w = 1.0 / (2 * math.sin(2 * math.pi * 0.04 / 2))
    oracle = 10 * math.log10(2 * w**2 * 2.0**-30 / 12 / 0.5)
    assert predict_sdn(d, UniformQuantizer(16)) == pytest.approx(oracle, abs=1e-6)
    assert predict_sdn(d, UniformQuantizer(16)) == pytest.approx(-83.07, abs=0.01)
    assert predict_sdn(d, UniformQuantizer(10)) == pytest.approx(-46.9, abs=0.1)


@pytest.mark.parametrize("pattern", list(NAMED_PATTERNS))
def test_predict_bit_law(designs, pattern):
    d = designs[pattern]
    for b in range(6, 20):
        step = predict_sdn(d, UniformQuantizer(b + 1)) - predict_sdn(d, UniformQuantizer(b))
        assert step == pytest.approx(-10 * math.log10(4), abs=1e-6)


def test_predict_channels(designs):
    d = designs["cardioid"]
    q = UniformQuantizer(16)
    same = predict_sdn(d, q, channels=[SensorChannel(1, 0.3), SensorChannel(1, 2.0)])
    assert same == pytest.approx(predict_sdn(d, q), abs=1e-9)
    # lower sensor gain means a larger compensating weight and a higher floor
    worse = predict_sdn(d, q, channels=[SensorChannel(0.5, 0.3), SensorChannel(0.5, 2.0)])
    assert worse == pytest.approx(predict_sdn(d, q) + 10 * math.log10(4), abs=1e-6)


def test_predicted_beampattern_is_floor_plus_response(designs):
    d = designs["dipole"]
    bp = predict_beampattern(d, UniformQuantizer(16), angles=[0.0, 90.0])
    floor = 2 * abs(d.weights[0]) ** 2 * 2.0**-30 / 12
    assert bp.power[1] == pytest.approx(floor, rel=1e-9)
    assert bp.power[0] == pytest.approx(0.5 + floor, rel=1e-12)


def test_monte_carlo_tracks_prediction(source, geometry, sampling, designs):
    plan = MonteCarloPlan(300, 3)
    for p, d in designs.items():
        res = estimate_beampattern(source, geometry, sampling, UniformQuantizer(16), d, plan, [0.0, 180.0, d.null_angle])
        assert sdn(res, d.null_angle) == pytest.approx(predict_sdn(d, UniformQuantizer(16)), abs=0.5)


def test_scale_invariance(geometry, sampling, designs):
    d = designs["hypercardioid"]
    plan = MonteCarloPlan(50, 6)
    base = estimate_beampattern(SourceSignal.from_hz(F0), geometry, sampling, UniformQuantizer(14), d, plan, [0.0, 120.0])
    for k in (0.25, 3.0, 10.0):
        scaled = estimate_beampattern(SourceSignal.from_hz(F0, amplitude=k), geometry, sampling, UniformQuantizer(14, k), d, plan, [0.0, 120.0])
        assert sdn(scaled, 120.0) == pytest.approx(sdn(base, 120.0), abs=1e-9)


def test_frequency_invariance_at_fixed_relative_spacing(sampling):
    plan = MonteCarloPlan(100, 2)
    depths = []
    for f in (1000.0, 3000.0, 6000.0):
        src = SourceSignal.from_hz(f)
        geo = ArrayGeometry.from_wavelength_ratio(0.04, f)
        d = design_first_order(geo, src.angular_frequency, 90.0)
        res = estimate_beampattern(src, geo, sampling, UniformQuantizer(12), d, plan, [0.0, 90.0, 180.0])
        depths.append(sdn(res, 90.0))
    assert max(depths) - min(depths) <= 2.0


def test_simulation_is_deterministic(source, geometry, sampling, designs):
    args = (source, geometry, sampling, [UniformQuantizer(12)], [designs["dipole"]], MonteCarloPlan(30, 77), [0.0, 90.0])
    a, _ = simulate(*args)
    b, _ = simulate(*args)
    assert a.tobytes() == b.tobytes()
    c, _ = simulate(*args[:5], MonteCarloPlan(30, 78), args[6])
    assert a.tobytes() != c.tobytes()


def test_scenario_consistency_checked(source, geometry, sampling, designs):
    other = design_first_order(geometry, 2 * math.pi * 3000.0, 90.0)
    with pytest.raises(ValueError, match="frequency"):
        simulate(source, geometry, sampling, [UniformQuantizer(8)], [other], MonteCarloPlan(2), [0.0])
    with pytest.raises(ValueError, match="twice"):
        simulate(source, geometry, SamplingConfig(3000.0, 16), [UniformQuantizer(8)], [designs["dipole"]], MonteCarloPlan(2), [0.0])


def test_look_normalization(source, geometry, sampling, designs):
    res = estimate_beampattern(source, geometry, sampling, UniformQuantizer(16), designs["dipole"], MonteCarloPlan(50, 1), [0.0, 90.0, 180.0])
    assert sdn(res, 90.0, "look") == pytest.approx(sdn(res, 90.0), abs=0.01)
    with pytest.raises(ValueError):
        sdn(res, 90.0, "peak")
