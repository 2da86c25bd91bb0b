"""Density-matrix estimation from free-evolution-rotated probe signals.

Signals taken after a free-evolution phase t0 depend linearly on the matrix
entries: entry (n, m) is weighted by e^{-i(n-m) t0} times the Fock matrix
element of e^{ikX}. Stacking the real and imaginary signal parts over a
schedule of (k, t0) pairs gives a real linear system for the independent
parameters of a Hermitian unit-trace matrix, solved by least squares with
the trace eliminated by substitution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import NumericsError
from .response import EXACT, SignalSeries, displacement_matrix, rotated_settings
from .states import DensityMatrix

DEFAULT_K_COUNT = 40
DEFAULT_K_MAX = 6.0
RIDGE_FRACTION = 1e-4


def default_k_list(n_k: int = DEFAULT_K_COUNT, k_max: float = DEFAULT_K_MAX) -> np.ndarray:
    return np.linspace(0.0, k_max, n_k)


def default_t0_list(n_cut: int) -> np.ndarray:
    """2*n_cut evenly spaced free-evolution phases j*pi/(2*n_cut).

    Enough to separate every coherence frequency n - m in the truncated
    basis; verified by the rank checks in the tests.
    """
    return np.arange(2 * n_cut) * (np.pi / (2 * n_cut))


def parameter_labels(n_cut: int):
    labels = [f"c{n}{n}" for n in range(n_cut)]
    for n in range(n_cut):
        for m in range(n + 1, n_cut):
            labels.append(f"Re c{n}{m}")
            labels.append(f"Im c{n}{m}")
    return labels


def density_to_parameters(rho: DensityMatrix) -> np.ndarray:
    """Real parameter vector: diagonals, then Re/Im of each upper entry."""
    n_cut = rho.cutoff
    out = [rho.entries[n, n].real for n in range(n_cut)]
    for n in range(n_cut):
        for m in range(n + 1, n_cut):
            out.append(rho.entries[n, m].real)
            out.append(rho.entries[n, m].imag)
    return np.array(out)


def parameters_to_entries(params: np.ndarray, n_cut: int) -> np.ndarray:
    entries = np.zeros((n_cut, n_cut), dtype=complex)
    entries[np.diag_indices(n_cut)] = params[:n_cut]
    col = n_cut
    for n in range(n_cut):
        for m in range(n + 1, n_cut):
            entries[n, m] = params[col] + 1j * params[col + 1]
            entries[m, n] = params[col] - 1j * params[col + 1]
            col += 2
    return entries


@dataclass(frozen=True)
class DesignMatrix:
    """Real linear map from density-matrix parameters to stacked signals.

    Row 2i is the even signal of setting i, row 2i+1 the odd one. Columns
    follow :func:`parameter_labels`.
    """

    matrix: np.ndarray
    n_cut: int
    settings: tuple

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        settings = tuple(self.settings)
        if matrix.shape != (2 * len(settings), self.n_cut**2):
            raise ValueError("design shape disagrees with settings and cutoff")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "settings", settings)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_parameters(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def singular_values(self) -> np.ndarray:
        out = np.linalg.svd(self.matrix, compute_uv=False)
        out.flags.writeable = False
        return out

    @property
    def condition_number(self) -> float:
        s = self.singular_values
        if s[-1] <= s[0] * np.finfo(float).eps * max(self.matrix.shape):
            return float("inf")
        return float(s[0] / s[-1])

    @property
    def rank(self) -> int:
        s = self.singular_values
        return int(np.sum(s > s[0] * np.finfo(float).eps * max(self.matrix.shape)))


def build_design_matrix(k_list, t0_list, n_cut: int) -> DesignMatrix:
    """Assemble the design for every (k, t0) pair (t0 outer, k inner)."""
    if n_cut < 1:
        raise ValueError("n_cut must be at least 1")
    settings = rotated_settings(k_list, t0_list)
    matrix = np.zeros((2 * len(settings), n_cut**2))
    for i, s in enumerate(settings):
        elements = displacement_matrix(n_cut, s.k, 0.0)
        coeffs = np.zeros(n_cut**2, dtype=complex)
        coeffs[:n_cut] = np.diag(elements)
        col = n_cut
        for n in range(n_cut):
            for m in range(n + 1, n_cut):
                phase = np.exp(-1j * (n - m) * s.omega_t0)
                coeffs[col] = phase * elements[m, n] + np.conj(phase) * elements[n, m]
                coeffs[col + 1] = 1j * (phase * elements[m, n] - np.conj(phase) * elements[n, m])
                col += 2
        matrix[2 * i] = coeffs.real
        matrix[2 * i + 1] = coeffs.imag
    return DesignMatrix(matrix, n_cut, settings)


def measurement_vector(design: DesignMatrix, measurements) -> np.ndarray:
    """Interleave even/odd values of the series in design row order.

    ``measurements`` is one SignalSeries or a sequence whose concatenated
    settings must match the design schedule.
    """
    if isinstance(measurements, SignalSeries):
        measurements = [measurements]
    settings = []
    values = np.empty(2 * len(design.settings))
    pos = 0
    for series in measurements:
        for s, even, odd in zip(series.settings, series.even_values, series.odd_values):
            if pos >= len(design.settings):
                raise ValueError("more measurements than design rows")
            expected = design.settings[pos]
            if abs(s.k - expected.k) > 1e-12 or abs(s.omega_t0 - expected.omega_t0) > 1e-12 \
                    or s.q != 0.0:
                raise ValueError(
                    f"measurement {pos} at (k={s.k}, t0={s.omega_t0}, q={s.q}) does not "
                    f"match design setting (k={expected.k}, t0={expected.omega_t0})")
            values[2 * pos] = even
            values[2 * pos + 1] = odd
            pos += 1
        settings.append(series)
    if pos != len(design.settings):
        raise ValueError(f"design needs {len(design.settings)} measurements, got {pos}")
    return values


@dataclass(frozen=True)
class SolveReport:
    """Diagnostics of one least-squares inversion."""

    residual: float
    condition_number: float
    rank: int
    n_rows: int
    n_parameters: int
    ridge: float
    min_eigenvalue: float
    projected: bool

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "condition_number": self.condition_number,
            "rank": self.rank,
            "n_rows": self.n_rows,
            "n_parameters": self.n_parameters,
            "ridge": self.ridge,
            "min_eigenvalue": self.min_eigenvalue,
            "projected": self.projected,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def _all_exact(measurements) -> bool:
    if isinstance(measurements, SignalSeries):
        return measurements.is_exact
    return all(series.is_exact for series in measurements)


def solve_density_matrix(design: DesignMatrix, measurements, *,
                         ridge: float | None = None,
                         project_psd: bool | None = None):
    """Least-squares estimate of the density matrix; returns (rho, report).

    The unit trace is enforced by eliminating the last diagonal parameter.
    ``ridge`` defaults to 0 for exact measurements and to RIDGE_FRACTION
    times the squared largest singular value for sampled ones; PSD projection
    (clip negative eigenvalues, renormalize) likewise defaults on only for
    sampled data. A rank-deficient reduced system without ridge is refused.
    """
    b = measurement_vector(design, measurements)
    exact = _all_exact(measurements)
    if ridge is None:
        ridge = 0.0 if exact else RIDGE_FRACTION
        auto_ridge_fraction = not exact
    else:
        auto_ridge_fraction = False
    if ridge < 0.0:
        raise ValueError("ridge must be non-negative")
    if project_psd is None:
        project_psd = not exact

    n_cut = design.n_cut
    a = design.matrix
    last = n_cut - 1  # column of the eliminated diagonal parameter
    keep = [j for j in range(design.n_parameters) if j != last]
    a_red = a[:, keep].copy()
    a_red[:, :last] -= a[:, [last]]
    b_red = b - a[:, last]

    if a_red.shape[1] == 0:
        params_red = np.empty(0)
        residual = float(np.linalg.norm(b_red))
        cond = 1.0
        rank = 0
        ridge_used = 0.0
    else:
        s = np.linalg.svd(a_red, compute_uv=False)
        tol = s[0] * np.finfo(float).eps * max(a_red.shape)
        rank = int(np.sum(s > tol))
        cond = float(s[0] / s[-1]) if s[-1] > tol else float("inf")
        ridge_used = ridge * s[0] ** 2 if auto_ridge_fraction else ridge
        if rank < a_red.shape[1] and ridge_used == 0.0:
            raise NumericsError(
                f"design is rank deficient ({rank} of {a_red.shape[1]}); "
                "add settings or enable ridge regularization")
        if ridge_used > 0.0:
            a_solve = np.vstack([a_red, np.sqrt(ridge_used) * np.eye(a_red.shape[1])])
            b_solve = np.concatenate([b_red, np.zeros(a_red.shape[1])])
        else:
            a_solve = a_red
            b_solve = b_red
        params_red, *_ = np.linalg.lstsq(a_solve, b_solve, rcond=None)
        residual = float(np.linalg.norm(a_red @ params_red - b_red))

    params = np.empty(design.n_parameters)
    params[:last] = params_red[:last]
    params[last] = 1.0 - np.sum(params_red[:last])
    params[last + 1:] = params_red[last:]
    entries = parameters_to_entries(params, n_cut)

    eigs = np.linalg.eigvalsh(0.5 * (entries + entries.conj().T))
    min_eig = float(eigs[0])
    if project_psd:
        w, v = np.linalg.eigh(0.5 * (entries + entries.conj().T))
        w = np.clip(w, 0.0, None)
        if w.sum() <= 0.0:
            raise NumericsError("estimate collapsed to the zero matrix after projection")
        w /= w.sum()
        entries = (v * w) @ v.conj().T
    rho = DensityMatrix(entries)
    report = SolveReport(residual=residual, condition_number=cond, rank=rank,
                         n_rows=design.n_rows, n_parameters=design.n_parameters,
                         ridge=float(ridge_used), min_eigenvalue=min_eig,
                         projected=bool(project_psd))
    return rho, report


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2, in [0, 1]."""
    if a.cutoff != b.cutoff:
        raise ValueError("states live in different cutoffs")
    wa, va = np.linalg.eigh(a.entries)
    root = (va * np.sqrt(np.clip(wa, 0.0, None))) @ va.conj().T
    inner = root @ b.entries @ root
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(1.0, value)
