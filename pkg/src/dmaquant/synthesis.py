"""Narrowband plane-wave synthesis for a two-sensor endfire array.

Sensor 1 is the phase reference. Sensor 2 sits ``spacing`` metres further
along the array axis and sees the source delayed by ``spacing*cos(theta)/c``
and rotated by its own gain/phase mismatch. Fractional delays are applied
inside the cosine argument, so no interpolation filter is involved.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SourceSignal:
    """Narrowband source ``B*cos(w0*t + phase)``."""

    amplitude: float = 1.0
    angular_frequency: float = TWO_PI * 1999.0
    initial_phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if not self.angular_frequency > 0:
            raise ValueError(f"angular_frequency must be > 0, got {self.angular_frequency}")

    @classmethod
    def from_hz(cls, frequency_hz, amplitude=1.0, initial_phase=0.0):
        return cls(amplitude, TWO_PI * frequency_hz, initial_phase)

    @property
    def frequency_hz(self):
        return self.angular_frequency / TWO_PI


@dataclass(frozen=True)
class ArrayGeometry:
    spacing: float
    sound_speed: float = 343.0
    sensor_count: int = 2

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")
        if not self.sound_speed > 0:
            raise ValueError(f"sound_speed must be > 0, got {self.sound_speed}")
        if self.sensor_count != 2:
            raise ValueError("only two-sensor (first-order) arrays are supported")

    @classmethod
    def from_wavelength_ratio(cls, ratio, frequency_hz, sound_speed=343.0):
        """Geometry with ``spacing = ratio * c / f``."""
        return cls(ratio * sound_speed / frequency_hz, sound_speed)

    def wavelength_ratio(self, frequency_hz):
        return self.spacing * frequency_hz / self.sound_speed

    def check_differential(self, frequency_hz, limit=0.2):
        """Warn when the spacing is too large for the finite-difference regime."""
        ratio = self.wavelength_ratio(frequency_hz)
        if ratio > limit:
            warnings.warn(
                f"spacing is {ratio:.3f} wavelengths at {frequency_hz} Hz; "
                f"differential operation assumes spacing << wavelength",
                stacklevel=2,
            )
        return ratio


@dataclass(frozen=True)
class SensorChannel:
    """Sensor transfer function ``gain * exp(j*phase)`` at the source frequency."""

    gain: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.gain >= 0 or not math.isfinite(self.gain):
            raise ValueError(f"gain must be finite and non-negative, got {self.gain}")
        object.__setattr__(self, "phase", float(self.phase) % TWO_PI)

    @property
    def transfer(self):
        return self.gain * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class SamplingConfig:
    sample_rate: float = 44100.0
    sequence_length: int = 4096

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if int(self.sequence_length) != self.sequence_length or self.sequence_length < 1:
            raise ValueError(f"sequence_length must be a positive integer, got {self.sequence_length}")

    @property
    def sample_period(self):
        return 1.0 / self.sample_rate

    def check_nyquist(self, frequency_hz):
        if not self.sample_rate > 2.0 * frequency_hz:
            raise ValueError(
                f"sample_rate {self.sample_rate} Hz does not exceed twice the source frequency {frequency_hz} Hz"
            )


def intersensor_delay(geometry, theta):
    """Propagation delay (s) of sensor 2 relative to sensor 1.

    ``theta`` is the arrival angle in radians (0 = endfire). Accepts scalars
    or arrays.
    """
    return geometry.spacing * np.cos(theta) / geometry.sound_speed


def _phase(src, chan, samp, delay, n):
    if n is None:
        n = np.arange(samp.sequence_length)
    n = np.asarray(n, dtype=float)
    frac_delay = delay / samp.sample_period
    return (
        src.angular_frequency * (n - frac_delay) * samp.sample_period
        + src.initial_phase
        + chan.phase
    )


def synth_inphase(src, chan, samp, delay=0.0, n=None):
    """Pre-quantization in-phase samples ``G*B*cos(w0*(n - N0)*Ts + phi_sig + phi_s)``."""
    return chan.gain * src.amplitude * np.cos(_phase(src, chan, samp, delay, n))


def synth_quadrature(src, chan, samp, delay=0.0, n=None):
    """Pre-quantization quadrature samples, the exact sine counterpart of :func:`synth_inphase`."""
    return chan.gain * src.amplitude * np.sin(_phase(src, chan, samp, delay, n))
