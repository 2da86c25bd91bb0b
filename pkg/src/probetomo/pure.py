"""Wavefunction reconstruction from probe signal series.

Three stages, usable separately or through :func:`reconstruct_pure`:

1. recover_density_profile -- inverse Fourier transform of the plain signals
   gives the position (or momentum) density.
2. compute_g -- the difference between combined-coupling and plain signals,
   divided by the weak coupling variable, transforms to
   G(x) = conj(psi(x)) * d/dx psi(x).
3. integrate_phase -- the log-derivative f = G/|psi|^2 drives a coupled ODE
   for Re psi and Im psi, integrated outward from an anchor where the
   density peaks, with the anchor value fixed real and positive.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .response import MOMENTUM, PLAIN, POSITION, TILDE, SignalSeries, \
    plain_settings, simulate_exact, tilde_settings
from .states import FockState, PositionGrid

DEFAULT_K_MAX = 8.0
DEFAULT_DK = 0.05
DEFAULT_RATIO = 0.5e-3
NODE_THRESHOLD_FRACTION = 1e-4
TAIL_MAGNITUDE_WARN = 1e-3
_PHASE_SCAN_COARSE = 4096
_PHASE_SCAN_FINE = 512


class CoverageWarning(UserWarning):
    """The sampled signal grid does not decay to negligible magnitude."""


@dataclass(frozen=True)
class DensityProfile:
    """Recovered |psi|^2 on a grid, with the inversion's imaginary residue."""

    grid: PositionGrid
    values: np.ndarray
    imag_residual: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError("profile values must match the grid")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def mass(self) -> float:
        """Trapezoid integral of the profile; 1 for a faithful density."""
        return float(np.trapezoid(self.values, dx=self.grid.dx))

    @property
    def min_value(self) -> float:
        """Most negative excursion (0 for a clean profile); noise diagnostic."""
        return float(min(0.0, self.values.min()))


@dataclass(frozen=True)
class ComplexProfile:
    """Recovered complex wavefunction with a trust mask for the phase."""

    grid: PositionGrid
    values: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        mask = np.array(self.valid_mask, dtype=bool)
        if values.shape != (self.grid.n_points,) or mask.shape != values.shape:
            raise ValueError("values and mask must match the grid")
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid_mask", mask)


def _uniform_main_grid(series: SignalSeries) -> tuple:
    """Validate that the transform variable runs 0, dv, ..., V; return (v, dv)."""
    v = series.main_values
    if v.size < 2:
        raise ValueError("series needs at least two settings")
    if abs(v[0]) > 1e-12:
        raise ValueError("signal grid must start at 0")
    dv = v[1] - v[0]
    if dv <= 0:
        raise ValueError("signal grid must be increasing")
    if np.max(np.abs(np.diff(v) - dv)) > 1e-9 * dv:
        raise ValueError("signal grid must be uniform")
    return v, float(dv)


def _symmetric_extension(series: SignalSeries) -> tuple:
    """Extend a half-line series to negative variables by parity.

    The even signal is an even function of the transform variable and the odd
    signal an odd one, both for plain series and for combined-coupling series
    whose weak variable is proportional to the transform variable, so
    c(-v) = conj(c(v)).
    """
    v, dv = _uniform_main_grid(series)
    c = series.complex_values()
    v_full = np.concatenate([-v[:0:-1], v])
    c_full = np.concatenate([np.conj(c[:0:-1]), c])
    return v_full, c_full, dv


def _inverse_transform(v: np.ndarray, values: np.ndarray, xs: np.ndarray,
                       dv: float) -> np.ndarray:
    """(1/2pi) * trapezoid integral of values(v) e^{-i v x} over the v grid."""
    weights = np.full(v.size, dv)
    weights[0] = weights[-1] = 0.5 * dv
    kernel = np.exp(-1j * np.outer(v, xs))
    return (weights * values) @ kernel / (2.0 * np.pi)


def recover_density_profile(series: SignalSeries, grid: PositionGrid) -> DensityProfile:
    """Invert plain signals to the density |psi|^2 on ``grid``.

    The signals are extended to negative transform variables by parity and
    inverted with a trapezoid quadrature. The result is real by construction;
    the largest leftover imaginary part is reported as a diagnostic. A grid
    spacing above pi/extent aliases the density and is rejected; a series
    whose magnitude has not decayed below TAIL_MAGNITUDE_WARN at the largest
    sampled variable triggers a warning.
    """
    if series.kind != PLAIN:
        raise ValueError("density recovery needs a plain series")
    v_full, c_full, dv = _symmetric_extension(series)
    if dv > np.pi / grid.extent:
        raise NumericsError(
            f"signal spacing {dv!r} aliases positions beyond {np.pi / dv:.3g}; "
            f"grid extends to {grid.extent:.3g}")
    edge = abs(c_full[-1])
    if edge > TAIL_MAGNITUDE_WARN:
        warnings.warn(
            f"signal magnitude {edge:.3g} at the end of the sampled range; "
            "density may be truncated",
            CoverageWarning,
            stacklevel=2,
        )
    transformed = _inverse_transform(v_full, c_full, grid.xs, dv)
    return DensityProfile(grid, transformed.real,
                          imag_residual=float(np.max(np.abs(transformed.imag))))


def _series_ratio(tilde: SignalSeries) -> float:
    v = tilde.main_values
    aux = tilde.aux_values
    nz = v != 0.0
    if not np.any(nz):
        raise ValueError("combined-coupling series has no nonzero settings")
    ratios = aux[nz] / v[nz]
    if np.max(np.abs(ratios - ratios[0])) > 1e-9 * max(1e-30, abs(ratios[0])):
        raise ValueError("weak variable is not proportional to the transform variable")
    return float(ratios[0])


def compute_g(plain: SignalSeries, tilde: SignalSeries, ratio: float | None = None,
              grid: PositionGrid | None = None) -> np.ndarray:
    """Recover G(x) = conj(psi) psi' from paired plain and combined series.

    The combined series must lock its weak variable to ratio * (transform
    variable); ``ratio`` is checked against the settings when given and read
    off them when omitted. The integrand has a removable 0/0 at the origin,
    filled by quadratic extrapolation from the first three positive points.
    Returns the complex G values on ``grid``.
    """
    if grid is None:
        grid = PositionGrid()
    if tilde.kind != TILDE:
        raise ValueError("second series must be a combined-coupling series")
    if plain.kind != PLAIN:
        raise ValueError("first series must be plain")
    if plain.representation != tilde.representation:
        raise ValueError("series disagree on representation")
    v_plain, _ = _uniform_main_grid(plain)
    v_tilde, _ = _uniform_main_grid(tilde)
    if v_plain.size != v_tilde.size or np.max(np.abs(v_plain - v_tilde)) > 1e-9:
        raise ValueError("mismatched signal grids")
    if v_plain.size < 4:
        raise ValueError("need at least four settings to fill the origin")
    found = _series_ratio(tilde)
    if ratio is None:
        ratio = found
    else:
        if ratio == 0.0:
            raise ValueError("ratio must be nonzero")
        if abs(found - ratio) > 1e-9 * abs(ratio):
            raise ValueError(f"series were taken at ratio {found!r}, not {ratio!r}")

    v, c_plain, dv = _symmetric_extension(plain)
    _, c_tilde, _ = _symmetric_extension(tilde)
    weak = ratio * v
    center = v.size // 2
    weak_safe = np.where(weak == 0.0, 1.0, weak)
    if plain.representation == POSITION:
        integrand = (c_tilde * np.exp(-0.5j * v * weak) - c_plain) / weak_safe
    else:
        integrand = (c_plain - c_tilde * np.exp(0.5j * v * weak)) / weak_safe
    integrand[center] = (3.0 * integrand[center + 1] - 3.0 * integrand[center + 2]
                         + integrand[center + 3])
    return _inverse_transform(v, integrand, grid.xs, dv)


# --- phase integration ---------------------------------------------------------

def _rk4_step(y: complex, fa: complex, fm: complex, fb: complex, h: float) -> complex:
    k1 = fa * y
    k2 = fm * (y + 0.5 * h * k1)
    k3 = fm * (y + 0.5 * h * k2)
    k4 = fb * (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_segment(f: np.ndarray, lo: int, hi: int, anchor: int,
                       start: float, dx: float) -> np.ndarray:
    """March psi' = f psi across grid indices [lo, hi] from psi[anchor] = start.

    Midpoint values of f come from linear interpolation between grid samples.
    """
    psi = np.zeros(hi - lo + 1, dtype=complex)
    psi[anchor - lo] = start
    for i in range(anchor, hi):
        fm = 0.5 * (f[i] + f[i + 1])
        psi[i + 1 - lo] = _rk4_step(psi[i - lo], f[i], fm, f[i + 1], dx)
    for i in range(anchor, lo, -1):
        fm = 0.5 * (f[i] + f[i - 1])
        psi[i - 1 - lo] = _rk4_step(psi[i - lo], f[i], fm, f[i - 1], -dx)
    return psi


def _segments(mask: np.ndarray):
    runs = []
    start = None
    for i, ok in enumerate(mask):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, mask.size - 1))
    return runs


def _glue_phase(x_fixed: float, psi_fixed: complex, g_fixed: complex,
                x_free: float, psi_free: complex, g_free: complex) -> float:
    """Phase for the free side of a node gap.

    Chooses the rotation of the free segment that best matches the finite
    difference across the gap against the derivative G/conj(psi) predicted on
    both edges. Scans coarsely over the full circle, then refines around the
    best candidate.
    """
    span = x_free - x_fixed

    def cost(thetas):
        cand = psi_free * np.exp(1j * thetas)
        numeric = (cand - psi_fixed) / span
        predicted = 0.5 * (g_fixed / np.conj(psi_fixed) + g_free / np.conj(cand))
        return np.abs(numeric - predicted)

    coarse = np.linspace(0.0, 2.0 * np.pi, _PHASE_SCAN_COARSE, endpoint=False)
    best = coarse[np.argmin(cost(coarse))]
    step = 2.0 * np.pi / _PHASE_SCAN_COARSE
    fine = best + np.linspace(-step, step, _PHASE_SCAN_FINE)
    return float(fine[np.argmin(cost(fine))])


def integrate_phase(g: np.ndarray, profile: DensityProfile,
                    node_threshold: float | None = None) -> ComplexProfile:
    """Lift a density profile to the complex wavefunction using G(x).

    The coupled system for (Re psi, Im psi) driven by f = G/|psi|^2 is the
    complex scalar equation psi' = f psi; it is integrated with fixed-step
    RK4 at the grid spacing, outward from the profile maximum where psi is
    anchored real positive (the free global phase). Points with profile below
    ``node_threshold`` (default NODE_THRESHOLD_FRACTION of the peak) are
    masked invalid; each contiguous valid segment is integrated from its own
    local re-anchor at +sqrt(profile) and then rotated to minimize the
    derivative mismatch across the masked gap toward the anchored region.
    """
    g = np.asarray(g, dtype=complex)
    values = profile.values
    if g.shape != values.shape:
        raise ValueError("G and profile must share the grid")
    peak = float(values.max())
    if peak <= 0.0:
        raise NumericsError("profile has no positive values")
    if node_threshold is None:
        node_threshold = NODE_THRESHOLD_FRACTION * peak
    mask = values >= node_threshold
    if not mask.any():
        raise NumericsError("profile is everywhere below the node threshold")

    f = np.zeros_like(g)
    f[mask] = g[mask] / values[mask]
    if not np.all(np.isfinite(f[mask])):
        raise NumericsError("log-derivative is not finite on trusted points")

    xs = profile.grid.xs
    dx = profile.grid.dx
    runs = _segments(mask)
    pieces = []
    for lo, hi in runs:
        local = lo + int(np.argmax(values[lo:hi + 1]))
        piece = _integrate_segment(f, lo, hi, local, np.sqrt(values[local]), dx)
        pieces.append(piece)

    anchor_idx = next(i for i, (lo, hi) in enumerate(runs)
                      if lo <= int(np.argmax(values)) <= hi)
    psi = np.zeros(values.size, dtype=complex)
    lo, hi = runs[anchor_idx]
    psi[lo:hi + 1] = pieces[anchor_idx]
    for i in range(anchor_idx + 1, len(runs)):
        prev_hi = runs[i - 1][1]
        lo, hi = runs[i]
        theta = _glue_phase(xs[prev_hi], psi[prev_hi], g[prev_hi],
                            xs[lo], pieces[i][0], g[lo])
        psi[lo:hi + 1] = pieces[i] * np.exp(1j * theta)
    for i in range(anchor_idx - 1, -1, -1):
        prev_lo = runs[i + 1][0]
        lo, hi = runs[i]
        theta = _glue_phase(xs[prev_lo], psi[prev_lo], g[prev_lo],
                            xs[hi], pieces[i][-1], g[hi])
        psi[lo:hi + 1] = pieces[i] * np.exp(1j * theta)

    # Masked points get magnitude from the profile and the phase of the
    # nearest trusted point; they remain flagged invalid.
    if not mask.all():
        valid_idx = np.flatnonzero(mask)
        invalid_idx = np.flatnonzero(~mask)
        nearest = valid_idx[np.argmin(np.abs(invalid_idx[:, None] - valid_idx[None, :]),
                                      axis=1)]
        phases = np.where(np.abs(psi[nearest]) > 0,
                          psi[nearest] / np.abs(psi[nearest]), 1.0)
        psi[invalid_idx] = np.sqrt(np.maximum(values[invalid_idx], 0.0)) * phases
    return ComplexProfile(profile.grid, psi, mask)


def reconstruct_pure(plain: SignalSeries | None = None,
                     tilde: SignalSeries | None = None, *,
                     state: FockState | None = None,
                     representation: str = POSITION,
                     grid: PositionGrid | None = None,
                     k_max: float = DEFAULT_K_MAX,
                     dk: float = DEFAULT_DK,
                     ratio: float = DEFAULT_RATIO,
                     node_threshold: float | None = None) -> ComplexProfile:
    """Full pure-state pipeline: density recovery, G extraction, phase lift.

    Either pass measured ``plain`` and ``tilde`` series, or pass ``state`` to
    simulate exact series under the requested representation first. In the
    momentum representation the two couplings swap roles and the output grid
    is read as momentum.
    """
    if state is not None:
        if plain is not None or tilde is not None:
            raise ValueError("give either a state or measured series, not both")
        plain = simulate_exact(state, plain_settings(k_max, dk, representation))
        tilde = simulate_exact(state, tilde_settings(k_max, dk, ratio, representation))
    if plain is None or tilde is None:
        raise ValueError("reconstruction needs both a plain and a combined series")
    if grid is None:
        grid = PositionGrid()
    profile = recover_density_profile(plain, grid)
    g = compute_g(plain, tilde, grid=grid)
    return integrate_phase(g, profile, node_threshold=node_threshold)


# --- profile CSV ----------------------------------------------------------------

PROFILE_COLUMNS = ("x", "re", "im", "abs2", "valid")


def write_profile(path, density: DensityProfile, psi: ComplexProfile | None = None):
    """Write x, re, im, abs2, valid rows; re/im are NaN when no phase was lifted."""
    xs = density.grid.xs
    if psi is not None and psi.grid != density.grid:
        raise ValueError("profile and wavefunction grids differ")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_COLUMNS)
        for i, x in enumerate(xs):
            if psi is None:
                re = im = float("nan")
                valid = 0
            else:
                re = float(psi.values[i].real)
                im = float(psi.values[i].imag)
                valid = int(psi.valid_mask[i])
            writer.writerow([repr(float(x)), repr(re), repr(im),
                             repr(float(density.values[i])), valid])


def read_profile(path) -> dict:
    """Read a profile CSV back into arrays keyed by column name, plus 'grid'."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PROFILE_COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(PROFILE_COLUMNS)}")
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise ValueError(f"{path}: too few rows")
    data = {name: np.array([float(row[i]) for row in rows])
            for i, name in enumerate(("x", "re", "im", "abs2"))}
    data["valid"] = np.array([row[4].strip() not in ("0", "") for row in rows])
    xs = data["x"]
    spacing = np.diff(xs)
    if np.max(np.abs(spacing - spacing[0])) > 1e-9 * abs(spacing[0]):
        raise ValueError(f"{path}: x column is not a uniform grid")
    data["grid"] = PositionGrid(float(xs[0]), float(xs[-1]), xs.size)
    return data
