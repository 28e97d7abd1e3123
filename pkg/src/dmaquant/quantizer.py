"""Uniform mid-tread quantizer standing in for the DAQ converter."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array


class QuantizedSequence(NamedTuple):
    values: np.ndarray
    n_saturated: int


def _round_half_away(v):
    # trunc + exact remainder; floor(|v| + 0.5) misrounds 0.5 - ulp
    k = np.trunc(v)
    r = v - k
    return k + (r >= 0.5) - (r <= -0.5)


class UniformQuantizer(TransformerMixin, BaseEstimator):
    """Mid-tread, saturating uniform quantizer.

    Parameters
    ----------
    bits : int or None
        Converter resolution. ``None`` bypasses quantization entirely.
    full_scale : float
        Largest representable magnitude. The step is ``2*full_scale / 2**bits``
        and codes run from ``-2**(bits-1)`` to ``2**(bits-1) - 1``.

    The quantizer is stateless; ``fit`` only validates parameters so the
    object can sit inside a :class:`sklearn.pipeline.Pipeline`.
    """

    def __init__(self, bits=16, full_scale=1.0):
        self.bits = bits
        self.full_scale = full_scale

    def _validate_params(self):
        if self.bits is not None:
            if isinstance(self.bits, bool) or int(self.bits) != self.bits or self.bits < 1:
                raise ValueError(f"bits must be an integer >= 1 or None, got {self.bits!r}")
        if not (self.full_scale > 0 and math.isfinite(self.full_scale)):
            raise ValueError(f"full_scale must be positive and finite, got {self.full_scale!r}")

    @property
    def bypass(self):
        return self.bits is None

    def step_size(self):
        """Quantization step, or ``None`` in bypass mode."""
        self._validate_params()
        if self.bypass:
            return None
        return 2.0 * self.full_scale / 2.0 ** int(self.bits)

    def code_range(self):
        if self.bypass:
            return None
        half = 2 ** (int(self.bits) - 1)
        return -half, half - 1

    def quantize_seq(self, xs):
        xs = np.asarray(xs, dtype=float)
        if not np.all(np.isfinite(xs)):
            raise ValueError("input contains non-finite values")
        delta = self.step_size()
        if delta is None:
            return QuantizedSequence(xs, 0)
        lo, hi = self.code_range()
        k = _round_half_away(xs / delta)
        n_sat = int(np.count_nonzero((k < lo) | (k > hi)))
        return QuantizedSequence(np.clip(k, lo, hi) * delta, n_sat)

    def saturated(self, xs):
        """Boolean mask of samples that fall outside the code range."""
        xs = np.asarray(xs, dtype=float)
        if self.bypass:
            return np.zeros(xs.shape, dtype=bool)
        lo, hi = self.code_range()
        k = _round_half_away(xs / self.step_size())
        return (k < lo) | (k > hi)

    def quantize(self, x):
        out = self.quantize_seq(x).values
        return float(out) if out.ndim == 0 else out

    def error(self, xs):
        """Quantization error ``Q(x) - x``; all zeros in bypass mode."""
        xs = np.asarray(xs, dtype=float)
        return self.quantize_seq(xs).values - xs

    def fit(self, X=None, y=None):
        self._validate_params()
        self.step_ = self.step_size()
        return self

    def transform(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        return self.quantize_seq(X).values

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = False
        return tags


def step_size(spec):
    return spec.step_size()


def quantize(x, spec):
    return spec.quantize(x)


def quantize_seq(xs, spec):
    return spec.quantize_seq(xs)


def error_seq(xs, spec):
    return spec.error(xs)
