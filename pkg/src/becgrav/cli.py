"""``becgrav`` command line.

Subcommands write data files plus a JSON summary into ``--out-dir``. Exit
status is 0 only when every output was written; config and input errors
exit with 1 and a message on stderr, usage errors with 2.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import DegenerateFringeError, UnderSampledError, extract_g, fit_fringes
from .bragg import BraggPulse, DesignWindowError, FitError, bragg_spectroscopy, design_pulse, ensemble_transfer
from .config import ConfigError, Experiment, load_config, preset_names, resolve, resolve_cloud, resolve_constants, resolve_trap
from .interferometer import ClosureError, effective_order, simulate_fringe_scan
from .io import (
    EmptyScanError,
    ScanFormatError,
    dumps,
    fit_document,
    read_scan_csv,
    write_json,
    write_scan_csv,
    write_sensitivity_csv,
    write_spectroscopy_csv,
)
from .meanfield import MeanFieldModel, sensitivity_curves
from .source import REFERENCE_TRAP

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(args) -> dict:
    if args.config and args.preset:
        raise UsageError("--config and --preset are mutually exclusive")
    if not args.config and not args.preset:
        raise UsageError("one of --config or --preset is required")
    return load_config(args.config, None) if args.config else load_config(None, args.preset)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(text: str, name: str) -> np.ndarray:
    """``a,b,c`` list or ``start:stop:num`` log-spaced grid, in seconds."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.geomspace(float(a), float(b), int(n))
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise UsageError(f"cannot parse {name} grid {text!r}") from None


def cmd_fringes(args) -> int:
    exp: Experiment = resolve(_load(args), seed=args.seed)
    out = _out_dir(args)
    s = exp.scan
    mapper = map
    pool = None
    if args.workers > 1:
        pool = ProcessPoolExecutor(args.workers)
        mapper = lambda f, it: pool.map(f, it, chunksize=8)  # noqa: E731
    try:
        scan = simulate_fringe_scan(
            exp.sequence, exp.cloud, exp.alpha_grid(), exp.aberration, s["detected_atoms"], s["seed"],
            s["g_true"], exp.constants, s["ensemble_size"], s["mirror_jitter"], s["tilt"], 1,
            s["cycle_time"], mapper,
        )
    finally:
        if pool is not None:
            pool.shutdown()
    csv_path = write_scan_csv(scan, out / exp.outputs["csv"])
    summary = {
        "command": "fringes",
        "config": exp.resolved,
        "n_eff": exp.n_eff,
        "period_model": exp.period,
        "model": {k: scan.metadata[k] for k in ("model_offset", "model_visibility", "model_phase")},
        "outputs": {"csv": csv_path.name},
    }
    try:
        # the scan is centred on the expected resonance, which also picks the fringe
        fit = fit_fringes(scan, exp.period, constants=exp.constants, alpha_ref=s["alpha_center"])
        summary.update(fit_document(fit, extract_g(fit, exp.constants)))
    except (DegenerateFringeError, UnderSampledError) as exc:
        summary["fit_error"] = str(exc)
    write_json(summary, out / exp.outputs["summary"])
    print(dumps({k: summary[k] for k in summary if k in ("n_eff", "fit", "g", "fit_error")}), end="")
    return EXIT_OK


def cmd_fit(args) -> int:
    scan = read_scan_csv(args.csv)
    fit = fit_fringes(scan, args.period_guess, fix_period=args.fix_period, alpha_ref=args.alpha_ref)
    doc = fit_document(fit, extract_g(fit) if fit.converged else None)
    doc["command"] = "fit"
    doc["input"] = str(args.csv)
    out = _out_dir(args)
    write_json(doc, out / args.output)
    print(dumps(doc), end="")
    return EXIT_OK if fit.converged else EXIT_ERROR


def cmd_dephasing(args) -> int:
    T = _grid(args.T_grid, "T")
    t_exp = _grid(args.t_exp, "t_exp")
    if T.size == 0 or t_exp.size == 0 or np.any(T <= 0) or np.any(t_exp < 0):
        raise UsageError("grids must be non-empty with T > 0 and t_exp ≥ 0")
    if args.config or args.preset:
        raw = _load(args)
        constants = resolve_constants(raw.get("constants", {}))
        src = raw["source"]
        trap = resolve_trap(src)
        if trap is None:
            raise ConfigError("dephasing needs a trap", "source.trap")
        N = float(src["atom_number"]) if args.atoms is None else args.atoms
        config = raw
    else:
        from .constants import RB87 as constants

        trap = REFERENCE_TRAP
        N = 1e6 if args.atoms is None else args.atoms
        config = {"trap_hz": [w / (2 * math.pi) for w in trap.frequencies], "atom_number": N}
    model = MeanFieldModel.from_trap(N, trap, constants)
    table = sensitivity_curves(model, T, t_exp, n=args.order)
    out = _out_dir(args)
    path = write_sensitivity_csv(table, out / "sensitivity.csv")
    summary = {"command": "dephasing", "config": config, "order": args.order, "atom_number": N,
               "outputs": {"csv": path.name}, "units": {"T_s": "s", "t_exp_s": "s"}}
    write_json(summary, out / "dephasing.json")
    print(f"wrote {len(T) * len(t_exp)} rows to {path}")
    return EXIT_OK


def cmd_pulse_calibrate(args) -> int:
    if args.dp is not None:
        from .constants import RB87 as constants

        dp = args.dp
        source = {"dp_long_hbar_k": dp}
    else:
        raw = _load(args)
        constants = resolve_constants(raw.get("constants", {}))
        dp = resolve_cloud(raw["source"], constants).dp_long
        source = raw["source"]
    pulse = design_pulse(args.order, args.target, dp, constants)
    eff = ensemble_transfer(pulse, dp, constants)
    doc = {
        "command": "pulse-calibrate",
        "source": source,
        "order": args.order,
        "target": args.target,
        "dp_long": dp,
        "pulse": {"tau": pulse.tau, "omega_peak": pulse.omega_peak, "envelope": pulse.envelope,
                  "half_window": pulse.half_window},
        "ensemble_transfer": eff,
        "units": {"tau": "s", "omega_peak": "rad/s", "half_window": "s", "dp_long": "hbar_k"},
    }
    write_json(doc, _out_dir(args) / "pulse.json")
    print(dumps(doc), end="")
    return EXIT_OK


def cmd_spectroscopy(args) -> int:
    raw = _load(args)
    constants = resolve_constants(raw.get("constants", {}))
    cloud = resolve_cloud(raw["source"], constants)
    probe = BraggPulse(1, args.probe_tau, 1.0)
    probe = probe.with_omega(math.pi / probe.area)
    wr = constants.recoil_frequency
    span = args.span * max(cloud.dp_long, 1.0 / (4 * wr * args.probe_tau)) * 4 * wr
    grid = np.linspace(-span, span, args.points)
    res = bragg_spectroscopy(cloud, probe, grid, constants)
    out = _out_dir(args)
    path = write_spectroscopy_csv(res, out / "spectroscopy.csv")
    doc = {"command": "spectroscopy", "config": raw, "probe_tau": args.probe_tau,
           "width": res.width, "width_err": res.width_err, "cloud_dp_long": cloud.dp_long,
           "units": {"width": "hbar_k", "width_err": "hbar_k", "probe_tau": "s", "cloud_dp_long": "hbar_k"},
           "outputs": {"csv": path.name}}
    write_json(doc, out / "spectroscopy.json")
    print(dumps({k: doc[k] for k in ("width", "width_err", "cloud_dp_long")}), end="")
    return EXIT_OK


def cmd_bloch_area(args) -> int:
    exp = resolve(_load(args))
    n_eff = effective_order(exp.sequence, exp.constants)
    doc = {"command": "bloch-area", "config": exp.resolved, "n_eff": n_eff,
           "period": 1.0 / (n_eff * exp.sequence.T**2), "units": {"period": "Hz/s"}}
    write_json(doc, _out_dir(args) / "bloch_area.json")
    print(dumps({"n_eff": n_eff, "period": doc["period"]}), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (TOML or JSON)")
    common.add_argument("--preset", help=f"shipped preset, one of: {', '.join(preset_names())}")
    common.add_argument("--seed", type=int, help="override the scan seed")
    common.add_argument("--out-dir", default=".", help="directory for output files")

    parser = argparse.ArgumentParser(prog="becgrav", description="BEC gravimeter simulation and fringe analysis")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fringes", parents=[common], help="simulate and fit a chirp-scanned fringe")
    p.add_argument("--workers", type=int, default=1, help="parallel processes for scan points")
    p.set_defaults(func=cmd_fringes)

    p = sub.add_parser("fit", parents=[common], help="fit a fringe CSV and extract g")
    p.add_argument("csv", type=Path)
    p.add_argument("--period-guess", type=float, required=True, help="fringe period guess (Hz/s)")
    p.add_argument("--fix-period", action="store_true")
    p.add_argument("--alpha-ref", type=float, help="chirp prior (Hz/s) selecting the fringe; default from g_ref")
    p.add_argument("--output", default="fit.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("dephasing", parents=[common], help="mean-field dephasing vs shot-noise table")
    p.add_argument("--T-grid", dest="T_grid", default="1e-3:1.0:40", help="seconds; 'a,b,c' or 'start:stop:num'")
    p.add_argument("--t-exp", default="0.012,0.040", help="expansion times in seconds")
    p.add_argument("--atoms", type=float, help="override the atom number")
    p.add_argument("--order", type=int, default=1)
    p.set_defaults(func=cmd_dephasing)

    p = sub.add_parser("pulse-calibrate", parents=[common], help="design a Bragg pulse for a cloud")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--target", choices=("half", "full"), default="full")
    p.add_argument("--dp", type=float, help="longitudinal 1-σ width in ħk (instead of a config)")
    p.set_defaults(func=cmd_pulse_calibrate)

    p = sub.add_parser("spectroscopy", parents=[common], help="simulated Bragg spectroscopy of the source")
    p.add_argument("--probe-tau", type=float, default=1e-3, help="probe 1-σ duration (s)")
    p.add_argument("--points", type=int, default=81)
    p.add_argument("--span", type=float, default=5.0, help="half-span in cloud widths")
    p.set_defaults(func=cmd_spectroscopy)

    p = sub.add_parser("bloch-area", parents=[common], help="effective order of a sequence")
    p.set_defaults(func=cmd_bloch_area)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, EmptyScanError) as exc:
        print(f"becgrav {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ScanFormatError, DesignWindowError, ClosureError, FitError,
            DegenerateFringeError, UnderSampledError, OSError, ValueError) as exc:
        print(f"becgrav {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
