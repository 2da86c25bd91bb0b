"""Oscillator states in a truncated Fock basis and their position-space wavefunctions."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_CUTOFF = 16
COHERENT_TRUNCATION_TOL = 1e-6

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


class TruncationWarning(UserWarning):
    """Non-negligible amplitude weight was lost to the finite Fock cutoff."""


def _check_finite(name, values):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} must be finite")


def hermite_table(n_max: int, x: np.ndarray) -> np.ndarray:
    """Stack of oscillator eigenfunctions psi_0..psi_{n_max} on ``x``.

    Returns an array of shape ``(n_max + 1,) + x.shape``. Row n holds
    psi_n(x) = (sqrt(pi) 2^n n!)^(-1/2) H_n(x) exp(-x^2/2), built with the
    three-term recurrence on the *normalized* functions,

        psi_{n+1}(x) = x sqrt(2/(n+1)) psi_n(x) - sqrt(n/(n+1)) psi_{n-1}(x),

    so neither raw Hermite polynomials nor factorials are ever formed and
    every intermediate stays of order one.
    """
    x = np.asarray(x, dtype=float)
    table = np.empty((n_max + 1,) + x.shape)
    table[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        table[1] = np.sqrt(2.0) * x * table[0]
    for n in range(1, n_max):
        table[n + 1] = x * np.sqrt(2.0 / (n + 1)) * table[n] \
            - np.sqrt(n / (n + 1.0)) * table[n - 1]
    return table


def hermite_wavefunction(n: int, x):
    """Real amplitude psi_n(x) of the n-th oscillator eigenfunction.

    ``x`` may be a float or an ndarray; the return type matches. Non-finite
    positions and negative indices are rejected.
    """
    if not isinstance(n, (int, np.integer)) or n < 0:
        raise ValueError("Fock index must be a non-negative integer")
    x_arr = np.asarray(x, dtype=float)
    _check_finite("x", x_arr)
    out = hermite_table(n, x_arr)[n]
    if x_arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class FockState:
    """Pure oscillator state: complex amplitudes over Fock levels 0..cutoff-1.

    Amplitudes are normalized on construction and immutable afterwards.
    """

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < 1:
            raise ValueError("amplitudes must be a non-empty 1-d vector")
        _check_finite("amplitudes", amps)
        norm = np.linalg.norm(amps)
        if norm == 0.0:
            raise ValueError("cannot normalize a zero amplitude vector")
        amps /= norm
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size

    def rotated(self, phase: float) -> "FockState":
        """Free evolution by ``phase``: level n acquires exp(-i n phase)."""
        return FockState(self.amplitudes * np.exp(-1j * phase * np.arange(self.cutoff)))

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix in the Fock basis."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError("entries must be a square matrix")
        _check_finite("entries", m)
        asym = np.max(np.abs(m - m.conj().T))
        if asym > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (asymmetry {asym:.3e})")
        m = 0.5 * (m + m.conj().T)
        trace = m.trace().real
        if abs(trace - 1.0) > TRACE_TOL:
            raise ValueError(f"trace is {trace!r}, expected 1")
        lowest = np.linalg.eigvalsh(m)[0]
        if lowest < -PSD_TOL:
            raise ValueError(f"matrix has negative eigenvalue {lowest:.3e}")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def cutoff(self) -> int:
        return self.entries.shape[0]

    def rotated(self, phase: float) -> "DensityMatrix":
        """Free evolution by ``phase``: entry (n, m) acquires exp(-i (n-m) phase)."""
        n = np.arange(self.cutoff)
        return DensityMatrix(self.entries * np.exp(-1j * phase * (n[:, None] - n[None, :])))

    def purity(self) -> float:
        return float(np.trace(self.entries @ self.entries).real)


@dataclass(frozen=True)
class PositionGrid:
    """Uniform grid of dimensionless positions (reused verbatim for momentum)."""

    x_min: float = -8.0
    x_max: float = 8.0
    n_points: int = 1024

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must lie below x_max")
        if self.n_points < 2:
            raise ValueError("grid needs at least two points")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def xs(self) -> np.ndarray:
        xs = np.linspace(self.x_min, self.x_max, self.n_points)
        xs.flags.writeable = False
        return xs

    @property
    def extent(self) -> float:
        """Largest |x| represented; sets the aliasing limit for signal grids."""
        return max(abs(self.x_min), abs(self.x_max))


def position_amplitude(state: FockState, x):
    """Complex wavefunction value(s) sum_n a_n psi_n(x) of a pure state."""
    x_arr = np.asarray(x, dtype=float)
    _check_finite("x", x_arr)
    table = hermite_table(state.cutoff - 1, x_arr)
    out = np.tensordot(state.amplitudes, table, axes=(0, 0))
    if x_arr.ndim == 0:
        return complex(out)
    return out


def position_density(state, x):
    """Position density <x|rho|x> for a FockState or DensityMatrix."""
    x_arr = np.asarray(x, dtype=float)
    if isinstance(state, FockState):
        amp = position_amplitude(state, x_arr)
        out = np.abs(amp) ** 2
    elif isinstance(state, DensityMatrix):
        table = hermite_table(state.cutoff - 1, x_arr)
        out = np.einsum("nm,n...,m...->...", state.entries, table, table).real
    else:
        raise TypeError("expected FockState or DensityMatrix")
    if x_arr.ndim == 0:
        return float(out)
    return out


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError("complex values given as pairs must be [re, im]")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def superposition_state(terms, cutoff: int | None = None) -> FockState:
    """Normalized superposition from (fock index, complex weight) pairs."""
    terms = list(terms)
    if not terms:
        raise ValueError("superposition needs at least one term")
    indices = []
    for n, _ in terms:
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("Fock indices must be non-negative integers")
        indices.append(int(n))
    needed = max(indices) + 1
    if cutoff is None:
        cutoff = max(DEFAULT_CUTOFF, needed)
    elif cutoff < needed:
        raise ValueError(f"cutoff {cutoff} too small for Fock index {needed - 1}")
    amps = np.zeros(cutoff, dtype=complex)
    for (n, w) in terms:
        amps[int(n)] += _as_complex(w)
    return FockState(amps)


def coherent_state(alpha, cutoff: int | None = None) -> FockState:
    """Coherent state truncated at ``cutoff`` and renormalized.

    Warns with TruncationWarning when the discarded tail weight exceeds
    COHERENT_TRUNCATION_TOL.
    """
    alpha = _as_complex(alpha)
    if cutoff is None:
        cutoff = DEFAULT_CUTOFF
    amps = np.zeros(cutoff, dtype=complex)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cutoff):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    lost = max(0.0, 1.0 - float(np.sum(np.abs(amps) ** 2)))
    if lost > COHERENT_TRUNCATION_TOL:
        warnings.warn(
            f"coherent state |alpha|={abs(alpha):.3g} loses weight {lost:.3e} "
            f"at cutoff {cutoff}; renormalizing",
            TruncationWarning,
            stacklevel=2,
        )
    return FockState(amps)


def make_standard_state(spec: dict, cutoff: int | None = None) -> FockState:
    """Build a named pure state from a descriptor dict.

    Supported kinds::

        {"kind": "superposition", "terms": [[n, weight], ...]}
        {"kind": "coherent", "alpha": a}

    Weights and alpha accept plain numbers or [re, im] pairs.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("state spec must be a dict with a 'kind' field")
    kind = spec["kind"]
    if kind == "superposition":
        return superposition_state(spec.get("terms", []), cutoff=cutoff)
    if kind == "coherent":
        if "alpha" not in spec:
            raise ValueError("coherent state spec needs an 'alpha' field")
        return coherent_state(spec["alpha"], cutoff=cutoff)
    raise ValueError(f"unknown state kind {kind!r}")


def depolarize(rho: DensityMatrix, eps: float) -> DensityMatrix:
    """Mix ``rho`` with the maximally mixed state: (1-eps) rho + eps I/d."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    d = rho.cutoff
    return DensityMatrix((1.0 - eps) * rho.entries + eps * np.eye(d) / d)


# --- JSON descriptors -------------------------------------------------------

def _complex_pairs(arr: np.ndarray):
    return [[float(v.real), float(v.imag)] for v in arr]


def state_to_dict(state) -> dict:
    if isinstance(state, FockState):
        return {"cutoff": state.cutoff, "amplitudes": _complex_pairs(state.amplitudes)}
    if isinstance(state, DensityMatrix):
        return {"cutoff": state.cutoff,
                "entries": [_complex_pairs(row) for row in state.entries]}
    raise TypeError("expected FockState or DensityMatrix")


def state_from_dict(data: dict):
    if "amplitudes" in data:
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        if "cutoff" in data and int(data["cutoff"]) != amps.size:
            raise ValueError("cutoff does not match amplitude count")
        return FockState(amps)
    if "entries" in data:
        rows = [[complex(re, im) for re, im in row] for row in data["entries"]]
        entries = np.array(rows)
        if "cutoff" in data and int(data["cutoff"]) != entries.shape[0]:
            raise ValueError("cutoff does not match matrix size")
        return DensityMatrix(entries)
    raise ValueError("state dict needs 'amplitudes' or 'entries'")


def save_state(path, state):
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh, indent=1)
        fh.write("\n")


def load_state(path):
    with open(path) as fh:
        return state_from_dict(json.load(fh))
