"""Manifest-driven command line: simulate signals, reconstruct states, compare.

A run manifest is a JSON file::

    {
      "mode": "pure",                          # or "mixed"
      "state": {"kind": "superposition", "terms": [[0, [1, 0]], [1, [0, 1]]]},
      "cutoff": 16,                            # optional Fock cutoff
      "depolarize": 0.1,                       # optional channel strength
      "schedule": {                            # pure mode
        "k_max": 8.0, "dk": 0.05,
        "beta_over_alpha": 0.0005,
        "representation": "position"
      },                                       # mixed mode instead uses
                                               # "k_list": {"k_max": 6, "n_k": 40}
                                               # (or an explicit list) and
                                               # "t0_count" or "t0_list"
      "shots": "exact",                        # or {"shots_per_setting": ...,
                                               #     "detector_error": 0.01,
                                               #     "rng_seed": 7}
      "reconstruction": {"debias": true},      # optional stage options
      "out": "runs/demo"
    }

``state`` may also be {"path": "state.json"} pointing at a stored state.
Simulation writes signal CSVs plus provenance.json; reconstruction writes
psi.csv (pure) or rho.json + report.json (mixed) plus metrics.json when the
manifest provides the true state. Existing files are never overwritten
without --force. Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import ManifestError, NumericsError
from .states import (DensityMatrix, FockState, PositionGrid, depolarize,
                     load_state, make_standard_state, position_amplitude,
                     position_density, save_state, state_from_dict)
from .response import (EXACT, MOMENTUM, POSITION, SignalSeries, plain_settings,
                       read_series, rotated_settings, simulate_exact,
                       tilde_settings, write_series)
from .experiment import ShotConfig, debias, sample_signal
from .pure import (ComplexProfile, DensityProfile, compute_g, integrate_phase,
                   read_profile, recover_density_profile, write_profile)
from .mixed import (build_design_matrix, default_k_list, default_t0_list,
                    fidelity, solve_density_matrix)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICS = 3


# --- manifest handling ---------------------------------------------------------

def load_manifest(path) -> dict:
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}")
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})")
    if not isinstance(manifest, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    manifest.setdefault("_dir", os.path.dirname(os.path.abspath(path)))
    return manifest


def _field(manifest: dict, name: str, default=None, required=False):
    if name not in manifest:
        if required:
            raise ManifestError(f"manifest is missing required field {name!r}")
        return default
    return manifest[name]


def _resolve_path(manifest: dict, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(manifest.get("_dir", "."), path)


def build_truth(manifest: dict, cutoff: int | None = None):
    """State described by the manifest: FockState, or DensityMatrix when the
    manifest depolarizes or declares mixed mode."""
    spec = _field(manifest, "state", required=True)
    if not isinstance(spec, dict):
        raise ManifestError("manifest field 'state' must be an object")
    cutoff = cutoff or _field(manifest, "cutoff")
    if "path" in spec:
        state = load_state(_resolve_path(manifest, spec["path"]))
        if cutoff is not None and state.cutoff != cutoff:
            raise ManifestError(
                f"stored state has cutoff {state.cutoff}, manifest wants {cutoff}")
    else:
        try:
            state = make_standard_state(spec, cutoff=cutoff)
        except ValueError as exc:
            raise ManifestError(f"manifest field 'state': {exc}")
    eps = _field(manifest, "depolarize", 0.0)
    mode = _field(manifest, "mode", "pure")
    if mode not in ("pure", "mixed"):
        raise ManifestError(f"manifest field 'mode' must be pure or mixed, got {mode!r}")
    if eps or mode == "mixed":
        if isinstance(state, FockState):
            state = state.density_matrix()
        if eps:
            try:
                state = depolarize(state, float(eps))
            except ValueError as exc:
                raise ManifestError(f"manifest field 'depolarize': {exc}")
    return state


def _schedule(manifest: dict) -> dict:
    schedule = _field(manifest, "schedule", required=True)
    if not isinstance(schedule, dict):
        raise ManifestError("manifest field 'schedule' must be an object")
    return schedule


def pure_schedule(manifest: dict, args=None) -> dict:
    schedule = _schedule(manifest)
    out = {
        "k_max": float(schedule.get("k_max", 8.0)),
        "dk": float(schedule.get("dk", 0.05)),
        "beta_over_alpha": float(schedule.get("beta_over_alpha", 0.5e-3)),
        "representation": schedule.get("representation", POSITION),
    }
    if args is not None:
        if getattr(args, "k_max", None) is not None:
            out["k_max"] = args.k_max
        if getattr(args, "dk", None) is not None:
            out["dk"] = args.dk
        if getattr(args, "beta_over_alpha", None) is not None:
            out["beta_over_alpha"] = args.beta_over_alpha
        if getattr(args, "representation", None) is not None:
            out["representation"] = args.representation
    if out["k_max"] <= 0 or out["dk"] <= 0:
        raise ManifestError("schedule.k_max and schedule.dk must be positive")
    if out["beta_over_alpha"] == 0.0:
        raise ManifestError("schedule.beta_over_alpha must be nonzero")
    if out["representation"] not in (POSITION, MOMENTUM):
        raise ManifestError(
            f"schedule.representation must be position or momentum, "
            f"got {out['representation']!r}")
    return out


def mixed_schedule(manifest: dict, cutoff: int) -> tuple:
    schedule = _schedule(manifest)
    k_spec = schedule.get("k_list", {})
    if isinstance(k_spec, dict):
        k_list = default_k_list(int(k_spec.get("n_k", 40)),
                                float(k_spec.get("k_max", 6.0)))
    else:
        k_list = np.asarray(k_spec, dtype=float)
    if "t0_list" in schedule:
        t0_list = np.asarray(schedule["t0_list"], dtype=float)
    else:
        count = int(schedule.get("t0_count", 2 * cutoff))
        if count < 1:
            raise ManifestError("schedule.t0_count must be positive")
        t0_list = np.arange(count) * (np.pi / (2 * cutoff))
    if k_list.size == 0 or t0_list.size == 0:
        raise ManifestError("schedule k and t0 lists must be non-empty")
    return k_list, t0_list


def shot_config(manifest: dict, seed_override=None) -> ShotConfig | None:
    shots = _field(manifest, "shots", EXACT)
    if shots == EXACT or shots is None:
        return None
    if not isinstance(shots, dict):
        raise ManifestError("manifest field 'shots' must be 'exact' or an object")
    try:
        return ShotConfig(
            shots_per_setting=int(shots.get("shots_per_setting", 0)),
            detector_error=float(shots.get("detector_error", 0.01)),
            rng_seed=int(seed_override if seed_override is not None
                         else shots.get("rng_seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"manifest field 'shots': {exc}")


# --- output helpers -------------------------------------------------------------

def _check_output(path, force: bool):
    if os.path.exists(path) and not force:
        raise ManifestError(f"refusing to overwrite {path} (use --force)")


def _out_dir(manifest: dict, args) -> str:
    out = getattr(args, "out", None) or _field(manifest, "out")
    if not out:
        raise ManifestError("no output directory: set manifest field 'out' or pass --out")
    out = _resolve_path(manifest, out) if "_dir" in manifest else out
    os.makedirs(out, exist_ok=True)
    return out


def _write_provenance(path, command: str, manifest: dict, outputs, force: bool):
    _check_output(path, force)
    record = {
        "tool": "probetomo",
        "version": __version__,
        "command": command,
        "manifest": {k: v for k, v in manifest.items() if not k.startswith("_")},
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    with open(path, "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")


# --- metrics ---------------------------------------------------------------------

def align_global_phase(values: np.ndarray, reference: np.ndarray,
                       mask: np.ndarray | None = None) -> tuple:
    """Rotate ``values`` by the phase that best matches ``reference``.

    Returns (aligned values, phase). The optimum of the quadratic alignment
    problem is the argument of the masked inner product.
    """
    values = np.asarray(values, dtype=complex)
    reference = np.asarray(reference, dtype=complex)
    if mask is None:
        mask = np.ones(values.shape, dtype=bool)
    inner = np.sum(values[mask] * np.conj(reference[mask]))
    phase = float(np.angle(inner)) if inner != 0 else 0.0
    return values * np.exp(-1j * phase), phase


def profile_metrics(data: dict, truth, representation: str = POSITION,
                    x_limit: float | None = None) -> dict:
    """Error metrics of a reconstructed profile CSV against a true state."""
    grid: PositionGrid = data["grid"]
    xs = grid.xs
    if isinstance(truth, FockState):
        source = truth if representation == POSITION else truth.rotated(np.pi / 2)
        psi_true = position_amplitude(source, xs)
        density_true = np.abs(psi_true) ** 2
    else:
        source = truth if representation == POSITION else truth.rotated(np.pi / 2)
        psi_true = None
        density_true = position_density(source, xs)
    metrics = {
        "n_points": int(xs.size),
        "density_l2": float(np.sqrt(np.trapezoid(
            (data["abs2"] - density_true) ** 2, dx=grid.dx))),
        "mass": float(np.trapezoid(data["abs2"], dx=grid.dx)),
    }
    mask = data["valid"].copy()
    if x_limit is not None:
        mask &= np.abs(xs) <= x_limit
    if psi_true is not None and np.any(mask) and np.all(np.isfinite(data["re"][mask])):
        psi_rec = data["re"] + 1j * data["im"]
        aligned, phase = align_global_phase(psi_rec, psi_true, mask)
        diff = np.abs(aligned - psi_true)[mask]
        metrics.update({
            "n_valid": int(np.count_nonzero(mask)),
            "global_phase": phase,
            "psi_sup": float(diff.max()),
            "psi_l2": float(np.sqrt(np.sum(diff**2) * grid.dx)),
        })
    return metrics


def density_metrics(rho: DensityMatrix, truth) -> dict:
    if isinstance(truth, FockState):
        truth = truth.density_matrix()
    if truth.cutoff != rho.cutoff:
        raise ManifestError(
            f"cutoff mismatch: reconstruction {rho.cutoff}, truth {truth.cutoff}")
    return {
        "fidelity": fidelity(rho, truth),
        "frobenius": float(np.linalg.norm(rho.entries - truth.entries)),
        "purity": rho.purity(),
    }


def _write_json(path, payload: dict, force: bool):
    _check_output(path, force)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


# --- commands ---------------------------------------------------------------------

def cmd_simulate(manifest: dict, args) -> list:
    out = _out_dir(manifest, args)
    cutoff = getattr(args, "cutoff", None)
    truth = build_truth(manifest, cutoff)
    config = shot_config(manifest, getattr(args, "seed", None))
    mode = _field(manifest, "mode", "pure")
    force = getattr(args, "force", False)

    written = []
    if mode == "pure":
        if not isinstance(truth, FockState):
            raise ManifestError("pure mode needs a pure state without depolarization")
        sched = pure_schedule(manifest, args)
        rep = sched["representation"]
        series = {
            "plain": simulate_exact(truth, plain_settings(sched["k_max"], sched["dk"], rep)),
            "tilde": simulate_exact(truth, tilde_settings(
                sched["k_max"], sched["dk"], sched["beta_over_alpha"], rep)),
        }
    else:
        if isinstance(truth, FockState):
            truth = truth.density_matrix()
        k_list, t0_list = mixed_schedule(manifest, truth.cutoff)
        series = {"rotated": simulate_exact(truth, rotated_settings(k_list, t0_list))}

    paths = {}
    for name, data in series.items():
        paths[f"{name}_exact"] = data
        if config is not None:
            paths[f"{name}_sampled"] = sample_signal(data, config)
    for name in paths:
        _check_output(os.path.join(out, f"{name}.csv"), force)
    for name, data in paths.items():
        target = os.path.join(out, f"{name}.csv")
        write_series(target, data)
        written.append(target)
    _write_provenance(os.path.join(out, "provenance.json"), "simulate",
                      manifest, written, force)
    written.append(os.path.join(out, "provenance.json"))
    return written


def _pick_series(out: str, name: str, use: str) -> str | None:
    sampled = os.path.join(out, f"{name}_sampled.csv")
    exact = os.path.join(out, f"{name}_exact.csv")
    if use == "sampled":
        return sampled if os.path.exists(sampled) else None
    if use == "exact":
        return exact if os.path.exists(exact) else None
    if os.path.exists(sampled):
        return sampled
    if os.path.exists(exact):
        return exact
    return None


def _load_series(manifest: dict, out: str, name: str, options: dict,
                 required: bool, representation: str | None = None):
    inputs = _field(manifest, "inputs", {})
    if name in inputs:
        path = _resolve_path(manifest, inputs[name])
        if not os.path.exists(path):
            raise ManifestError(f"input series not found: {path}")
    else:
        path = _pick_series(out, name, options.get("use", "auto"))
        if path is None:
            if required:
                raise ManifestError(
                    f"missing {name} series: expected {name}_sampled.csv or "
                    f"{name}_exact.csv in {out}")
            return None
    series = read_series(path, representation=representation)
    if not series.is_exact and options.get("debias", True):
        config = shot_config(manifest)
        error = config.detector_error if config is not None else 0.0
        if error:
            series = debias(series, error)
    return series


def cmd_reconstruct(manifest: dict, args) -> dict:
    out = _out_dir(manifest, args)
    mode = _field(manifest, "mode", "pure")
    options = dict(_field(manifest, "reconstruction", {}) or {})
    force = getattr(args, "force", False)
    if getattr(args, "node_threshold", None) is not None:
        options["node_threshold"] = args.node_threshold
    cutoff = getattr(args, "cutoff", None)
    truth = build_truth(manifest, cutoff) if "state" in manifest else None

    if mode == "pure":
        sched = pure_schedule(manifest, args)
        rep = sched["representation"]
        plain = _load_series(manifest, out, "plain", options, True, rep)
        grid = PositionGrid()
        profile = recover_density_profile(plain, grid)
        want_phase = options.get("phase", True)
        psi = None
        if want_phase:
            tilde = _load_series(manifest, out, "tilde", options, True, rep)
            g = compute_g(plain, tilde, grid=grid)
            psi = integrate_phase(g, profile, options.get("node_threshold"))
        target = os.path.join(out, "psi.csv")
        _check_output(target, force)
        write_profile(target, profile, psi)
        result = {"outputs": [target]}
        if truth is not None:
            metrics = profile_metrics(read_profile(target), truth, rep,
                                      getattr(args, "x_limit", None))
            metrics["imag_residual"] = profile.imag_residual
            _write_json(os.path.join(out, "metrics.json"), metrics, force)
            result["metrics"] = metrics
        return result

    if truth is None:
        raise ManifestError("mixed reconstruction needs the manifest 'state' to "
                            "fix the cutoff (it is also used for metrics)")
    rho_truth = truth if isinstance(truth, DensityMatrix) else truth.density_matrix()
    k_list, t0_list = mixed_schedule(manifest, rho_truth.cutoff)
    design = build_design_matrix(k_list, t0_list, rho_truth.cutoff)
    series = _load_series(manifest, out, "rotated", options, True, POSITION)
    rho, report = solve_density_matrix(
        design, series,
        ridge=options.get("ridge"),
        project_psd=options.get("project_psd"),
    )
    rho_path = os.path.join(out, "rho.json")
    report_path = os.path.join(out, "report.json")
    _check_output(rho_path, force)
    _check_output(report_path, force)
    save_state(rho_path, rho)
    report.save(report_path)
    metrics = density_metrics(rho, rho_truth)
    metrics["residual"] = report.residual
    _write_json(os.path.join(out, "metrics.json"), metrics, force)
    return {"outputs": [rho_path, report_path], "metrics": metrics}


def _load_truth_file(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"truth file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})")
    if isinstance(payload, dict) and ("amplitudes" in payload or "entries" in payload):
        return state_from_dict(payload)
    if isinstance(payload, dict) and "state" in payload:
        payload.setdefault("_dir", os.path.dirname(os.path.abspath(path)))
        return build_truth(payload)
    raise ManifestError(f"{path}: not a state descriptor or manifest")


def cmd_compare(args) -> dict:
    truth = _load_truth_file(args.truth)
    if args.profile:
        data = read_profile(args.profile)
        metrics = profile_metrics(data, truth, args.representation or POSITION,
                                  args.x_limit)
    elif args.rho:
        rho = load_state(args.rho)
        if not isinstance(rho, DensityMatrix):
            raise ManifestError(f"{args.rho}: expected a density matrix")
        metrics = density_metrics(rho, truth)
    else:
        raise ManifestError("compare needs --profile or --rho")
    if args.out:
        _write_json(args.out, metrics, getattr(args, "force", False))
    return metrics


# --- entry point --------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("manifest", help="path to the run manifest JSON")
    parser.add_argument("--out", help="output directory (overrides manifest)")
    parser.add_argument("--seed", type=int, help="override the sampling seed")
    parser.add_argument("--force", action="store_true",
                        help="overwrite existing output files")
    parser.add_argument("--cutoff", type=int, help="override the Fock cutoff")
    parser.add_argument("--k-max", dest="k_max", type=float)
    parser.add_argument("--dk", type=float)
    parser.add_argument("--beta-over-alpha", dest="beta_over_alpha", type=float)
    parser.add_argument("--node-threshold", dest="node_threshold", type=float)
    parser.add_argument("--representation", choices=(POSITION, MOMENTUM))
    parser.add_argument("--x-limit", dest="x_limit", type=float,
                        help="restrict wavefunction metrics to |x| <= limit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probetomo",
        description="Simulate probe tomography signals and reconstruct states.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "write exact and sampled signal series"),
                       ("reconstruct", "recover a wavefunction or density matrix"),
                       ("full-run", "simulate, reconstruct, and compare in one go")):
        _add_common(sub.add_parser(name, help=text))
    comp = sub.add_parser("compare", help="score a reconstruction against a true state")
    comp.add_argument("--truth", required=True,
                      help="state JSON or manifest describing the true state")
    comp.add_argument("--profile", help="reconstructed profile CSV")
    comp.add_argument("--rho", help="reconstructed density-matrix JSON")
    comp.add_argument("--out", help="write metrics JSON here")
    comp.add_argument("--force", action="store_true")
    comp.add_argument("--x-limit", dest="x_limit", type=float)
    comp.add_argument("--representation", choices=(POSITION, MOMENTUM))
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "compare":
        metrics = cmd_compare(args)
        print(json.dumps(metrics, indent=1, sort_keys=True))
        return EXIT_OK
    manifest = load_manifest(args.manifest)
    if args.command == "simulate":
        for path in cmd_simulate(manifest, args):
            print(path)
        return EXIT_OK
    if args.command == "reconstruct":
        result = cmd_reconstruct(manifest, args)
    else:  # full-run
        cmd_simulate(manifest, args)
        result = cmd_reconstruct(manifest, args)
    for path in result["outputs"]:
        print(path)
    if "metrics" in result:
        print(json.dumps(result["metrics"], indent=1, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except (ManifestError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
