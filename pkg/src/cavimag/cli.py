"""Command-line front end: simulate | map | analyze | fit | converge.

Exit codes: 0 success, 1 runtime/convergence failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FeatureKind,
    PhaseJump,
    convergence_study,
    extract_branches,
    find_features,
    predict_coupling_behavior,
)
from .engine import SingularFrequencyError, Spectrum, magnon_map, sweep
from .fileio import (
    CsvFormatError,
    read_branches_csv,
    read_map_csv,
    read_spectrum_csv,
    write_branches_csv,
    write_convergence_csv,
    write_manifest,
    write_map_csv,
    write_spectrum_csv,
    write_touchstone,
)
from .fitting import FitConvergenceError, fit_effective_model
from .model import ConfigError, FrequencyGrid, load_config, validate_system

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class CliError(Exception):
    def __init__(self, message: str, code: int = USAGE_ERROR):
        super().__init__(message)
        self.code = code


def _grid_from_args(args, prefix: str = "") -> FrequencyGrid:
    fmin = getattr(args, prefix + "fmin" if prefix else "fmin")
    fmax = getattr(args, prefix + "fmax" if prefix else "fmax")
    points = getattr(args, prefix + "points" if prefix else "points")
    try:
        return FrequencyGrid(fmin, fmax, points)
    except ConfigError as exc:
        raise CliError(str(exc)) from None


def _load_config(path: str):
    try:
        spec = load_config(path)
    except ConfigError as exc:
        raise CliError(f"config error: {exc}") from None
    for diag in validate_system(spec):
        if diag.severity == "warning":
            print(f"warning: {diag.message}", file=sys.stderr)
    return spec


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _feature_table(features) -> str:
    lines = ["kind            freq_ghz    prominence_db  phase_jump"]
    for f in features:
        lines.append(
            f"{f.kind.value:<14}{f.frequency:>10.6f}{f.prominence:>15.2f}  {f.phase_jump.value}"
        )
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    started = time.monotonic()
    spec = _load_config(args.config)
    grid = _grid_from_args(args)
    spectrum = sweep(spec, grid)
    out = _out_dir(args)
    outputs = []
    csv_path = out / "spectrum.csv"
    write_spectrum_csv(csv_path, spectrum)
    outputs.append(csv_path.name)
    if args.format == "touchstone":
        ts_path = out / "spectrum.s2p"
        write_touchstone(ts_path, spectrum)
        outputs.append(ts_path.name)
    features = find_features(spectrum, args.prominence_db)
    print(_feature_table(features))
    write_manifest(out, "simulate", _manifest_params(args), outputs, args.config, started, __version__)
    return 0


def cmd_map(args) -> int:
    started = time.monotonic()
    spec = _load_config(args.config)
    if spec.n_magnons < 1:
        raise CliError("map requires a configuration with at least one magnon mode")
    drive = _grid_from_args(args)
    try:
        magnon_grid = FrequencyGrid(args.magnon_min, args.magnon_max, args.magnon_points)
    except ConfigError as exc:
        raise CliError(str(exc)) from None
    m = magnon_map(spec, args.magnon_index, magnon_grid, drive)
    window = None
    if args.window_min is not None or args.window_max is not None:
        if args.window_min is None or args.window_max is None:
            raise CliError("give both --window-min and --window-max or neither")
        window = (args.window_min, args.window_max)
    branch = extract_branches(m, window=window, min_prominence_db=args.prominence_db)
    out = _out_dir(args)
    map_path = out / "map.csv"
    branch_path = out / "branches.csv"
    write_map_csv(map_path, m)
    write_branches_csv(branch_path, branch)
    n_merged = int(np.sum(branch.merged_mask))
    print(
        f"map: {m.magnon_freqs.size} x {m.drive_freqs.size} points; "
        f"branches extracted, {n_merged} merged columns"
    )
    write_manifest(
        out, "map", _manifest_params(args), [map_path.name, branch_path.name], args.config,
        started, __version__,
    )
    return 0


def cmd_analyze(args) -> int:
    started = time.monotonic()
    freqs, s21 = read_spectrum_csv(args.spectrum)
    if freqs.size < 5:
        raise CliError(f"insufficient data: need at least 5 spectrum rows, got {freqs.size}")
    spectrum = Spectrum(freqs=freqs, s=s21.reshape(-1, 1, 1))
    features = find_features(spectrum, args.prominence_db, out_port=1, in_port=1)
    print(_feature_table(features))
    dips = [f for f in features if f.kind is FeatureKind.ANTIRESONANCE]
    if dips:
        if args.reference_ghz is not None:
            anchor = min(dips, key=lambda f: abs(f.frequency - args.reference_ghz))
        else:
            anchor = max(dips, key=lambda f: f.prominence)
        print(f"\ncoupling predictions versus antiresonance at {anchor.frequency:.6f} GHz:")
        for f in features:
            if f.kind is not FeatureKind.RESONANCE:
                continue
            if PhaseJump.INDETERMINATE in (f.phase_jump, anchor.phase_jump):
                verdict = "indeterminate"
            else:
                verdict = predict_coupling_behavior(anchor.phase_jump, f.phase_jump).value
            print(f"  mode at {f.frequency:.6f} GHz: {verdict}")
    if args.out is not None:
        out = _out_dir(args)
        report = out / "features.csv"
        lines = ["kind,freq_ghz,prominence_db,phase_jump,linewidth_ghz"]
        for f in features:
            lines.append(
                f"{f.kind.value},{f.frequency:.12g},{f.prominence:.12g},"
                f"{f.phase_jump.value},{f.linewidth_estimate:.12g}"
            )
        report.write_text("\n".join(lines) + "\n")
        write_manifest(out, "analyze", _manifest_params(args), [report.name], None, started, __version__)
    return 0


def cmd_fit(args) -> int:
    started = time.monotonic()
    path = Path(args.data)
    if not path.exists():
        raise CliError(f"input file not found: {path}")
    header = path.read_text().splitlines()[0] if path.read_text() else ""
    if header.startswith("f_magnon_ghz,branch_lo_ghz"):
        branch = read_branches_csv(path)
    elif header.startswith("f_magnon_ghz"):
        m = read_map_csv(path)
        window = None
        if args.window_min is not None and args.window_max is not None:
            window = (args.window_min, args.window_max)
        branch = extract_branches(m, window=window, min_prominence_db=args.prominence_db)
    else:
        raise CliError(f"{path}: not a map or branch CSV")
    try:
        fit = fit_effective_model(branch)
    except (ValueError, FitConvergenceError) as exc:
        raise CliError(f"fit failed: {exc}", RUNTIME_ERROR) from None
    report = {
        "omega_ar_ghz": fit.omega_ar,
        "g_ar_ghz": fit.g_ar_magnitude,
        "phi_ar_rad": fit.phi_ar,
        "verdict": fit.verdict.value,
        "rms_residual_ghz": fit.rms_residual,
        "ambiguous": fit.ambiguous,
        "n_samples": fit.n_samples,
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.out is not None:
        out = _out_dir(args)
        (out / "fit.json").write_text(text + "\n")
        write_manifest(out, "fit", _manifest_params(args), ["fit.json"], None, started, __version__)
    return 0


def cmd_converge(args) -> int:
    started = time.monotonic()
    spec = _load_config(args.config)
    grid = _grid_from_args(args)
    ordering = None
    if args.ordering:
        try:
            ordering = [int(x) for x in args.ordering.split(",")]
        except ValueError:
            raise CliError(f"--ordering must be a comma-separated list of indices") from None
    try:
        report = convergence_study(
            spec, ordering, args.reference_ghz, grid, args.prominence_db
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    out = _out_dir(args)
    csv_path = out / "convergence.csv"
    write_convergence_csv(csv_path, report)
    for k, f, d in zip(report.mode_counts, report.antires_freq, report.mismatch):
        if np.isfinite(f):
            print(f"k={k}: antiresonance {f:.6f} GHz, mismatch {d * 1e3:.3f} MHz")
        else:
            print(f"k={k}: antiresonance absent")
    write_manifest(
        out, "converge", _manifest_params(args), [csv_path.name], args.config, started, __version__
    )
    return 0


def _manifest_params(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavimag",
        description="Frequency-domain simulator and analyzer for cavity-magnon networks. "
        "Thread count for map sweeps is read from CAVIMAG_THREADS.",
    )
    parser.add_argument("--version", action="version", version=f"cavimag {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_grid(p):
        p.add_argument("--fmin", type=float, required=True, help="drive grid start, GHz")
        p.add_argument("--fmax", type=float, required=True, help="drive grid stop, GHz")
        p.add_argument("--points", type=int, required=True, help="drive grid points (>= 2)")

    def add_out(p, required=True):
        p.add_argument("--out", default="." if required else None, help="output directory")

    p = sub.add_parser("simulate", help="sweep a configuration and export the spectrum")
    p.add_argument("--config", required=True)
    add_grid(p)
    add_out(p)
    p.add_argument("--format", choices=("csv", "touchstone"), default="csv")
    p.add_argument("--prominence-db", type=float, default=3.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("map", help="2D magnon-frequency map with branch extraction")
    p.add_argument("--config", required=True)
    add_grid(p)
    p.add_argument("--magnon-min", type=float, required=True)
    p.add_argument("--magnon-max", type=float, required=True)
    p.add_argument("--magnon-points", type=int, required=True)
    p.add_argument("--magnon-index", type=int, default=0)
    p.add_argument("--window-min", type=float, default=None, help="branch search window, GHz")
    p.add_argument("--window-max", type=float, default=None)
    p.add_argument("--prominence-db", type=float, default=1.0)
    add_out(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("analyze", help="feature report for a spectrum CSV")
    p.add_argument("spectrum", help="spectrum CSV path")
    p.add_argument("--prominence-db", type=float, default=3.0)
    p.add_argument("--reference-ghz", type=float, default=None,
                   help="pick the antiresonance nearest this frequency as the anchor")
    add_out(p, required=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit the effective antiresonance model to a map or branch CSV")
    p.add_argument("data", help="map.csv or branches.csv")
    p.add_argument("--window-min", type=float, default=None)
    p.add_argument("--window-max", type=float, default=None)
    p.add_argument("--prominence-db", type=float, default=1.0)
    add_out(p, required=False)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("converge", help="antiresonance versus number of modes kept")
    p.add_argument("--config", required=True)
    add_grid(p)
    p.add_argument("--reference-ghz", type=float, required=True)
    p.add_argument("--ordering", default=None, help="comma-separated photon mode order")
    p.add_argument("--prominence-db", type=float, default=3.0)
    add_out(p)
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except SingularFrequencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
