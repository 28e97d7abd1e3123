"""First-order two-sensor differential beamformer.

Weights are designed at a single frequency from two constraints: unit gain
toward endfire (0 deg) and a zero at the requested null angle. Sensor
mismatch is removed by multiplying each weight with the inverse of the
sensor's known transfer function, and the beamformer output is the real part
of the weighted sum of the complex (in-phase + j*quadrature) sensor streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .synthesis import ArrayGeometry, SensorChannel

NAMED_PATTERNS = {
    "dipole": 90.0,
    "cardioid": 180.0,
    "hypercardioid": 120.0,
    "supercardioid": 135.0,
}

SINGULAR_TOL = 1e-9


class SingularDesignError(ValueError):
    """The look and null constraints address (nearly) the same steering vector."""


class ZeroGainError(ValueError):
    pass


class LengthMismatchError(ValueError):
    pass


def resolve_null_angle(pattern=None, null_angle=None):
    """Null angle in degrees for a named pattern or an explicit angle."""
    if pattern is not None and pattern != "custom":
        try:
            named = NAMED_PATTERNS[pattern]
        except KeyError:
            raise ValueError(
                f"unknown pattern {pattern!r}; expected one of {sorted(NAMED_PATTERNS)} or 'custom'"
            ) from None
        if null_angle is not None and not math.isclose(null_angle, named):
            raise ValueError(f"pattern {pattern!r} fixes the null at {named} deg, got {null_angle}")
        return named
    if null_angle is None:
        raise ValueError("a custom pattern needs an explicit null_angle")
    null_angle = float(null_angle)
    if not 0.0 <= null_angle <= 180.0:
        raise ValueError(f"null_angle must lie in [0, 180] deg, got {null_angle}")
    return null_angle


def _steering(tau, theta):
    """Rows ``[1, exp(-j*tau*cos(theta))]`` for each angle (radians)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return np.stack([np.ones_like(theta, dtype=complex), np.exp(-1j * tau * np.cos(theta))], axis=-1)


@dataclass(frozen=True)
class FirstOrderDesign:
    """Complex filter weights ``W_i*exp(j*Psi_i)`` for sensors 1 and 2."""

    weights: np.ndarray
    angular_frequency: float
    geometry: ArrayGeometry
    null_angle: float  # degrees
    diagonal_loading: float = 0.0

    @property
    def tau(self):
        """Endfire phase lag across the array, ``w0*spacing/c`` (rad)."""
        return self.angular_frequency * self.geometry.spacing / self.geometry.sound_speed

    @property
    def magnitudes(self):
        return np.abs(self.weights)

    @property
    def phases(self):
        return np.angle(self.weights)

    def response(self, theta):
        return ideal_response(self, theta)


def design_first_order(geometry, angular_frequency, null_angle, diagonal_loading=0.0):
    """Solve the distortionless-plus-null weight pair.

    Parameters
    ----------
    geometry : ArrayGeometry
    angular_frequency : float
        Design frequency (rad/s).
    null_angle : float
        Null direction in degrees, in ``(0, 180]``.
    diagonal_loading : float
        Regularization added to the constraint Gram matrix. With the default
        0 both constraints are met exactly.

    Raises
    ------
    SingularDesignError
        When ``|exp(-j*tau) - exp(-j*tau*cos(null))| < 1e-9``.
    """
    tau = angular_frequency * geometry.spacing / geometry.sound_speed
    theta_null = math.radians(null_angle)
    C = _steering(tau, [0.0, theta_null])
    det = C[1, 1] - C[0, 1]
    if null_angle <= 0.0 or abs(det) < SINGULAR_TOL:
        raise SingularDesignError(
            f"null at {null_angle} deg is indistinguishable from the look direction "
            f"(|det| = {abs(det):.3g})"
        )
    f = np.array([1.0 + 0j, 0.0 + 0j])
    if diagonal_loading:
        gram = C @ C.conj().T + diagonal_loading * np.eye(2)
        w = C.conj().T @ np.linalg.solve(gram, f)
    else:
        w = np.linalg.solve(C, f)
    return FirstOrderDesign(w, float(angular_frequency), geometry, float(null_angle), float(diagonal_loading))


def ideal_response(design, theta):
    """Unquantized array response ``A(theta) = sum_i w_i exp(-j*w0*zeta_i(theta))``.

    ``theta`` in radians; returns a complex scalar for scalar input.
    """
    out = _steering(design.tau, theta) @ design.weights
    return complex(out[0]) if np.ndim(theta) == 0 else out


def compensate(design, channels):
    """Per-sensor complex weights ``H_i = w_i / (G_i*exp(j*phi_i))``."""
    channels = list(channels)
    if len(channels) != len(design.weights):
        raise LengthMismatchError(f"need {len(design.weights)} channels, got {len(channels)}")
    H = np.empty(len(channels), dtype=complex)
    for i, (w, ch) in enumerate(zip(design.weights, channels)):
        if ch.gain == 0:
            raise ZeroGainError(f"sensor {i + 1} has zero gain; mismatch cannot be inverted")
        H[i] = (abs(w) / ch.gain) * np.exp(1j * (np.angle(w) - ch.phase))
    return H


def _stack(seqs, what):
    seqs = [np.asarray(s) for s in seqs]
    lengths = {s.shape for s in seqs}
    if len(lengths) != 1:
        raise LengthMismatchError(f"{what} sequences differ in length: {sorted(lengths)}")
    return np.stack(seqs)


def beamform_quantized(zq, H):
    """Beamformer output ``Re{sum_i H_i * zq_i[n]}``.

    ``zq`` holds one complex sequence (in-phase + j*quadrature) per sensor.
    """
    Z = _stack(zq, "sensor")
    H = np.asarray(H, dtype=complex)
    if Z.shape[0] != H.shape[0]:
        raise LengthMismatchError(f"{Z.shape[0]} sensor streams but {H.shape[0]} weights")
    # per-rail form: Re(H)*in - Im(H)*quad
    return H.real @ Z.real - H.imag @ Z.imag


def decompose(zq, exact, H):
    """Split the beamformer output into its noise-free part and propagated error.

    Returns ``(ideal_part, error_part)`` where the error part carries each
    sensor's in-phase and quadrature quantization errors through
    ``|H|cos(arg H)`` and ``-|H|sin(arg H)`` respectively.
    """
    Z = _stack(zq, "quantized")
    X = _stack(exact, "exact")
    if Z.shape != X.shape:
        raise LengthMismatchError(f"quantized {Z.shape} and exact {X.shape} shapes differ")
    H = np.asarray(H, dtype=complex)
    ideal = beamform_quantized(X, H)
    eps_in = Z.real - X.real
    eps_quad = Z.imag - X.imag
    mag, arg = np.abs(H), np.angle(H)
    error = (mag * np.cos(arg)) @ eps_in - (mag * np.sin(arg)) @ eps_quad
    return ideal, error


class FirstOrderDMA(BaseEstimator):
    """Estimator wrapper around :func:`design_first_order`.

    ``fit`` designs the weights for the configured geometry and frequency;
    ``transform`` beamforms complex sensor data of shape ``(n_samples, 2)``.

    Parameters
    ----------
    pattern : {'dipole', 'cardioid', 'hypercardioid', 'supercardioid', 'custom'}
    null_angle : float, optional
        Null direction in degrees; required when ``pattern='custom'``.
    frequency : float
        Design frequency in Hz.
    spacing : float, optional
        Sensor spacing in metres. Defaults to ``spacing_ratio`` wavelengths.
    spacing_ratio : float
        Spacing as a fraction of the design wavelength, used when
        ``spacing`` is None.
    sound_speed : float
    diagonal_loading : float
    """

    def __init__(
        self,
        pattern="dipole",
        null_angle=None,
        *,
        frequency=1999.0,
        spacing=None,
        spacing_ratio=0.04,
        sound_speed=343.0,
        diagonal_loading=0.0,
    ):
        self.pattern = pattern
        self.null_angle = null_angle
        self.frequency = frequency
        self.spacing = spacing
        self.spacing_ratio = spacing_ratio
        self.sound_speed = sound_speed
        self.diagonal_loading = diagonal_loading

    def _geometry(self):
        if self.spacing is not None:
            return ArrayGeometry(self.spacing, self.sound_speed)
        return ArrayGeometry.from_wavelength_ratio(self.spacing_ratio, self.frequency, self.sound_speed)

    def fit(self, X=None, y=None):
        null = resolve_null_angle(self.pattern, self.null_angle)
        self.geometry_ = self._geometry()
        self.design_ = design_first_order(
            self.geometry_, 2 * math.pi * self.frequency, null, self.diagonal_loading
        )
        self.weights_ = self.design_.weights
        self.null_angle_ = null
        return self

    def response(self, theta_deg):
        check_is_fitted(self, "design_")
        return ideal_response(self.design_, np.radians(theta_deg))

    def compensated_weights(self, channels=None):
        check_is_fitted(self, "design_")
        if channels is None:
            channels = [SensorChannel(), SensorChannel()]
        return compensate(self.design_, channels)

    def transform(self, X, channels=None):
        check_is_fitted(self, "design_")
        # check_array refuses complex input
        X = np.asarray(X, dtype=complex)
        if X.ndim != 2 or not np.all(np.isfinite(X)):
            raise ValueError("expected a finite 2-D array of shape (n_samples, 2)")
        if X.shape[1] != 2:
            raise LengthMismatchError(f"expected 2 sensor columns, got {X.shape[1]}")
        return beamform_quantized(X.T, self.compensated_weights(channels))
