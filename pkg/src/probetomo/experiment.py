"""Finite-shot measurement simulation with symmetric detector error.

Each probe measurement is a Bernoulli trial against the excited-state
probability p = (1 + signal)/2; every recorded outcome is flipped
independently with the detector error probability. The estimator returned
per setting is 2 * (success fraction) - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .response import EXACT, SignalSeries

P_TOL = 1e-9


@dataclass(frozen=True)
class ShotConfig:
    """Shot budget, detector error probability, and RNG seed for one run."""

    shots_per_setting: int
    detector_error: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.shots_per_setting, (int, np.integer)) or self.shots_per_setting < 1:
            raise ValueError("shots_per_setting must be a positive integer")
        if not (math.isfinite(self.detector_error) and 0.0 <= self.detector_error <= 0.5):
            raise ValueError("detector_error must lie in [0, 0.5]")
        object.__setattr__(self, "shots_per_setting", int(self.shots_per_setting))
        object.__setattr__(self, "detector_error", float(self.detector_error))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))


def _estimate(rng, value: float, shots: int, error: float) -> float:
    p = 0.5 * (1.0 + value)
    if p < -P_TOL or p > 1.0 + P_TOL:
        raise ValueError(f"signal value {value!r} implies unphysical probability {p!r}")
    p = min(max(p, 0.0), 1.0)
    hits = rng.random(shots) < p
    flipped = hits ^ (rng.random(shots) < error)
    return 2.0 * float(np.count_nonzero(flipped)) / shots - 1.0


def sample_signal(true_series: SignalSeries, config: ShotConfig) -> SignalSeries:
    """Draw a finite-shot realization of an exact series.

    The seed fully determines the result: draws run over settings in order,
    even signal before odd, and for each signal the ``shots`` outcome
    uniforms are consumed before the ``shots`` flip uniforms.
    """
    if not true_series.is_exact:
        raise ValueError("sampling requires an exact input series")
    rng = np.random.default_rng(config.rng_seed)
    shots = config.shots_per_setting
    error = config.detector_error
    even = np.empty(len(true_series))
    odd = np.empty(len(true_series))
    for i in range(len(true_series)):
        even[i] = _estimate(rng, true_series.even_values[i], shots, error)
        odd[i] = _estimate(rng, true_series.odd_values[i], shots, error)
    return SignalSeries(true_series.settings, even, odd,
                        shots_per_point=shots, kind=true_series.kind)


def debias(sampled: SignalSeries, detector_error: float) -> SignalSeries:
    """Invert the mean shrinkage of the flip channel: value -> value/(1 - 2e).

    Results are clamped to [-1, 1]. Exact series pass through unchanged
    apart from the clamp when detector_error is 0.
    """
    if not 0.0 <= detector_error < 0.5:
        raise ValueError("detector_error must lie in [0, 0.5) to be invertible")
    scale = 1.0 / (1.0 - 2.0 * detector_error)
    even = np.clip(sampled.even_values * scale, -1.0, 1.0)
    odd = np.clip(sampled.odd_values * scale, -1.0, 1.0)
    return SignalSeries(sampled.settings, even, odd,
                        shots_per_point=sampled.shots_per_point, kind=sampled.kind)
