"""Exact probe signals: characteristic-function values of a state under the coupled evolution.

The probe couples through exp(i(k X + q P)), which equals the displacement
operator D(lambda) with lambda = (i k - q)/sqrt(2) and likewise equals the
ordered product e^{ikX} e^{iqP} e^{ikq/2}. Everything here is evaluated in
closed form from the Laguerre expression for displacement matrix elements;
grid quadrature exists only as a test oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .states import DensityMatrix, FockState

State = Union[FockState, DensityMatrix]

POSITION = "position"
MOMENTUM = "momentum"
REPRESENTATIONS = (POSITION, MOMENTUM)

PLAIN = "plain"
TILDE = "tilde"
EXACT = "exact"

TWO_PI = 2.0 * math.pi
SIGNAL_BOUND_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentSetting:
    """One probe configuration: coupling phases k, q and free-evolution phase.

    k and q are the dimensionless conjugate variables accumulated by the
    position and momentum couplings; omega_t0 is the free-evolution phase
    applied to the state before the probe couples, stored canonically in
    [0, 2*pi). ``representation`` records which quadrature plays the role of
    the transform variable downstream.
    """

    k: float = 0.0
    q: float = 0.0
    omega_t0: float = 0.0
    representation: str = POSITION

    def __post_init__(self):
        for name in ("k", "q", "omega_t0"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "omega_t0", self.omega_t0 % TWO_PI)
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def main_variable(self) -> float:
        """The transform variable: k in position, q in momentum representation."""
        return self.k if self.representation == POSITION else self.q

    @property
    def aux_variable(self) -> float:
        return self.q if self.representation == POSITION else self.k


@dataclass(frozen=True)
class SignalSeries:
    """Sampled or exact probe signals over an ordered list of settings."""

    settings: tuple
    even_values: np.ndarray
    odd_values: np.ndarray
    shots_per_point: object = EXACT
    kind: str = PLAIN

    def __post_init__(self):
        settings = tuple(self.settings)
        if not settings:
            raise ValueError("series needs at least one setting")
        reps = {s.representation for s in settings}
        if len(reps) != 1:
            raise ValueError("all settings in a series must share a representation")
        even = np.array(self.even_values, dtype=float)
        odd = np.array(self.odd_values, dtype=float)
        if even.shape != (len(settings),) or odd.shape != (len(settings),):
            raise ValueError("even/odd values must match the number of settings")
        if not (np.all(np.isfinite(even)) and np.all(np.isfinite(odd))):
            raise ValueError("signal values must be finite")
        if self.kind not in (PLAIN, TILDE):
            raise ValueError(f"unknown series kind {self.kind!r}")
        if self.shots_per_point != EXACT:
            if not isinstance(self.shots_per_point, (int, np.integer)) or self.shots_per_point < 1:
                raise ValueError("shots_per_point must be 'exact' or a positive integer")
        if self.kind == PLAIN and self.shots_per_point == EXACT:
            worst = np.max(even**2 + odd**2)
            if worst > 1.0 + SIGNAL_BOUND_TOL:
                raise ValueError(
                    f"exact signals violate the characteristic-function bound "
                    f"(even^2 + odd^2 = {worst!r})")
        even.flags.writeable = False
        odd.flags.writeable = False
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "even_values", even)
        object.__setattr__(self, "odd_values", odd)

    def __len__(self):
        return len(self.settings)

    @property
    def is_exact(self) -> bool:
        return self.shots_per_point == EXACT

    @property
    def representation(self) -> str:
        return self.settings[0].representation

    @cached_property
    def k_values(self) -> np.ndarray:
        out = np.array([s.k for s in self.settings])
        out.flags.writeable = False
        return out

    @cached_property
    def q_values(self) -> np.ndarray:
        out = np.array([s.q for s in self.settings])
        out.flags.writeable = False
        return out

    @cached_property
    def omega_t0_values(self) -> np.ndarray:
        out = np.array([s.omega_t0 for s in self.settings])
        out.flags.writeable = False
        return out

    @property
    def main_values(self) -> np.ndarray:
        return self.k_values if self.representation == POSITION else self.q_values

    @property
    def aux_values(self) -> np.ndarray:
        return self.q_values if self.representation == POSITION else self.k_values

    def complex_values(self) -> np.ndarray:
        return self.even_values + 1j * self.odd_values


# --- displacement matrix elements -------------------------------------------

def displacement_matrix(n_cut: int, k: float, q: float = 0.0) -> np.ndarray:
    """Matrix <m| e^{ikX} e^{iqP} e^{ikq/2} |n> over the truncated Fock basis.

    Equal to the displacement operator D(lambda) with
    lambda = (i k - q)/sqrt(2). Row m is the bra index. The closed form uses
    associated Laguerre polynomials,

        <m|D|n> = sqrt(n!/m!) lambda^{m-n} e^{-|lambda|^2/2} L_n^{(m-n)}(|lambda|^2)

    for m >= n, with lambda -> -conj(lambda) under index exchange; the
    factorial ratio is evaluated through log-gamma to stay bounded.
    """
    if n_cut < 1:
        raise ValueError("n_cut must be at least 1")
    lam = (1j * k - q) / np.sqrt(2.0)
    idx = np.arange(n_cut)
    row = idx[:, None]
    col = idx[None, :]
    diff = row - col
    order = np.abs(diff)
    low = np.minimum(row, col)
    base = np.where(diff >= 0, lam, -np.conj(lam))
    prefactor = np.exp(0.5 * (gammaln(low + 1) - gammaln(np.maximum(row, col) + 1)))
    mag2 = abs(lam) ** 2
    return prefactor * base**order * eval_genlaguerre(low, order, mag2) * np.exp(-mag2 / 2)


def displacement_element(m: int, n: int, k: float, q: float = 0.0) -> complex:
    """Single element <m| e^{ikX} e^{iqP} e^{ikq/2} |n>."""
    for name, idx in (("m", m), ("n", n)):
        if not isinstance(idx, (int, np.integer)) or idx < 0:
            raise ValueError(f"index {name} must be a non-negative integer")
    size = max(m, n) + 1
    return complex(displacement_matrix(size, k, q)[m, n])


def _rotated(state: State, phase: float) -> State:
    if phase == 0.0:
        return state
    return state.rotated(phase)


def expectation(state: State, k: float, q: float = 0.0, omega_t0: float = 0.0) -> complex:
    """<e^{i(kX + qP)}> for a pure or mixed state, after free evolution omega_t0."""
    state = _rotated(state, omega_t0)
    if isinstance(state, FockState):
        matrix = displacement_matrix(state.cutoff, k, q)
        amps = state.amplitudes
        return complex(amps.conj() @ (matrix @ amps))
    if isinstance(state, DensityMatrix):
        matrix = displacement_matrix(state.cutoff, k, q)
        return complex(np.trace(state.entries @ matrix))
    raise TypeError("expected FockState or DensityMatrix")


def pz_even(state: State, k: float) -> float:
    """Even probe signal: the cosine moment of the position density."""
    return expectation(state, k).real


def pz_odd(state: State, k: float) -> float:
    """Odd probe signal: the sine moment of the position density."""
    return expectation(state, k).imag


def pz_tilde(state: FockState, k: float, q: float) -> tuple:
    """(even, odd) probe signals under the combined k X + q P coupling.

    Defined for pure states; evaluated exactly, with no small-q expansion.
    """
    if not isinstance(state, FockState):
        raise TypeError("combined-coupling signals are defined for pure states")
    value = expectation(state, k, q)
    return (value.real, value.imag)


def pz_even_rotated(rho: DensityMatrix, k: float, phase: float) -> float:
    """Even signal after free evolution: entry (n,m) weighted by e^{-i(n-m) phase}."""
    return expectation(rho, k, omega_t0=phase).real


def pz_odd_rotated(rho: DensityMatrix, k: float, phase: float) -> float:
    return expectation(rho, k, omega_t0=phase).imag


# --- setting grids and exact series ------------------------------------------

def _value_grid(v_max: float, dv: float) -> np.ndarray:
    if dv <= 0 or v_max <= 0:
        raise ValueError("grid extent and spacing must be positive")
    steps = int(round(v_max / dv))
    if abs(steps * dv - v_max) > 1e-9 * max(1.0, v_max):
        raise ValueError("v_max must be an integer multiple of dv")
    return np.arange(steps + 1) * dv


def plain_settings(k_max: float, dk: float, representation: str = POSITION):
    """Settings {0, dk, ..., k_max} for the single-quadrature coupling."""
    values = _value_grid(k_max, dk)
    if representation == POSITION:
        return tuple(ExperimentSetting(k=v, representation=POSITION) for v in values)
    if representation == MOMENTUM:
        return tuple(ExperimentSetting(q=v, representation=MOMENTUM) for v in values)
    raise ValueError(f"unknown representation {representation!r}")


def tilde_settings(k_max: float, dk: float, ratio: float, representation: str = POSITION):
    """Settings for the combined coupling, with the weak variable locked to
    ratio * (transform variable)."""
    if ratio == 0.0:
        raise ValueError("ratio must be nonzero")
    values = _value_grid(k_max, dk)
    if representation == POSITION:
        return tuple(ExperimentSetting(k=v, q=ratio * v, representation=POSITION)
                     for v in values)
    if representation == MOMENTUM:
        return tuple(ExperimentSetting(k=ratio * v, q=v, representation=MOMENTUM)
                     for v in values)
    raise ValueError(f"unknown representation {representation!r}")


def rotated_settings(k_list, t0_list):
    """Cartesian schedule for mixed-state runs: t0 outer, k inner, q = 0."""
    k_list = np.asarray(k_list, dtype=float)
    t0_list = np.asarray(t0_list, dtype=float)
    if k_list.size == 0 or t0_list.size == 0:
        raise ValueError("k and t0 schedules must be non-empty")
    return tuple(ExperimentSetting(k=float(k), omega_t0=float(t0))
                 for t0 in t0_list for k in k_list)


def simulate_exact(state: State, settings, kind: str | None = None) -> SignalSeries:
    """Evaluate the exact (infinite-shot) signals for every setting."""
    settings = tuple(settings)
    values = np.array([expectation(state, s.k, s.q, s.omega_t0) for s in settings])
    if kind is None:
        aux = np.array([s.aux_variable for s in settings])
        kind = TILDE if np.any(aux != 0.0) else PLAIN
    return SignalSeries(settings, values.real, values.imag,
                        shots_per_point=EXACT, kind=kind)


# --- CSV interface ------------------------------------------------------------

SERIES_COLUMNS = ("k", "q", "omega_t0", "even", "odd", "shots")


def write_series(path, series: SignalSeries):
    """Write a series as CSV with columns k, q, omega_t0, even, odd, shots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        shots = EXACT if series.is_exact else int(series.shots_per_point)
        for s, even, odd in zip(series.settings, series.even_values, series.odd_values):
            writer.writerow([repr(s.k), repr(s.q), repr(s.omega_t0),
                             repr(float(even)), repr(float(odd)), shots])


def read_series(path, representation: str | None = None,
                kind: str | None = None) -> SignalSeries:
    """Read a series CSV. Representation and kind are inferred when omitted:
    a series with all q = 0 (or all k = 0) is plain in position (momentum)
    representation; otherwise it is a combined-coupling series whose larger
    column is the transform variable."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(SERIES_COLUMNS)}")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    ks, qs, t0s, evens, odds, shots_seen = [], [], [], [], [], set()
    for row in rows:
        if len(row) != 6:
            raise ValueError(f"{path}: malformed row {row!r}")
        ks.append(float(row[0]))
        qs.append(float(row[1]))
        t0s.append(float(row[2]))
        evens.append(float(row[3]))
        odds.append(float(row[4]))
        shots_seen.add(row[5].strip())
    if len(shots_seen) != 1:
        raise ValueError(f"{path}: mixed shot counts in one series")
    shots_text = shots_seen.pop()
    shots = EXACT if shots_text == EXACT else int(shots_text)
    ks = np.array(ks)
    qs = np.array(qs)
    if representation is None:
        if np.all(qs == 0.0):
            representation = POSITION
        elif np.all(ks == 0.0):
            representation = MOMENTUM
        else:
            representation = POSITION if np.max(np.abs(ks)) >= np.max(np.abs(qs)) \
                else MOMENTUM
    if kind is None:
        aux = qs if representation == POSITION else ks
        kind = PLAIN if np.all(aux == 0.0) else TILDE
    settings = tuple(ExperimentSetting(k=k, q=q, omega_t0=t0, representation=representation)
                     for k, q, t0 in zip(ks, qs, t0s))
    return SignalSeries(settings, np.array(evens), np.array(odds),
                        shots_per_point=shots, kind=kind)
