"""Command-line interface.

Exit codes: 0 success, 1 failed self-check, 2 bad input, 3 solver failure.
"""
from __future__ import annotations

import argparse
import functools
import json
import sys
import time

import numpy as np

from . import __version__, adiabatic, analysis, io, selfcheck
from .parallel import ordered_map, resolve_workers
from .physics import MICRON, ConfigError, config_from_mapping, load_config, simulation_domain
from .solver import ConvergenceError, GridSpec, probabilities_signed

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class InputError(ValueError):
    """Command-line input that cannot be acted on."""


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_config(p):
    p.add_argument("--config", required=True, help="JSON laser/atom configuration")
    p.add_argument("--out", help="output file (stdout when omitted; a manifest is written next to files)")
    p.add_argument("--workers", type=int, help="parallel worker processes (overrides DIODELAB_WORKERS)")
    p.add_argument("--margin", type=float, default=10.0, help="domain margin in Gaussian widths (default 10)")


def _add_velocity(p, points=200):
    p.add_argument("--v-from", type=float, default=0.005, help="lowest speed, m/s")
    p.add_argument("--v-to", type=float, default=1.2, help="highest speed, m/s")
    p.add_argument("--v-points", type=int, default=points, help="number of speeds")
    p.add_argument("--v-scale", choices=("log", "linear"), default="log")


def _add_epsilon(p):
    p.add_argument("--epsilon", type=float, default=analysis.DEFAULT_EPSILON, help="failure threshold (default 0.01)")


def _add_range(p, name, unit="um"):
    p.add_argument(f"--{name}", type=_float_list, help=f"comma-separated values in {unit}")
    p.add_argument(f"--{name}-from", type=float)
    p.add_argument(f"--{name}-to", type=float)
    p.add_argument(f"--{name}-step", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diodelab", description="Two-level atom diode scattering toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scatter", help="signed-velocity scattering probabilities")
    _add_config(p)
    _add_velocity(p)
    p.add_argument("--v", type=_float_list, help="explicit comma-separated speeds, m/s (overrides the range)")
    p.add_argument("--sides", choices=("both", "left", "right"), default="both")
    p.add_argument("--channel", type=int, choices=(1, 2), default=1)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("window", help="diodic velocity window for one configuration")
    _add_config(p)
    _add_velocity(p)
    _add_epsilon(p)
    p.set_defaults(func=cmd_window)

    p = sub.add_parser("scan-d", help="window and limits versus mirror half-separation")
    _add_config(p)
    _add_velocity(p)
    _add_epsilon(p)
    _add_range(p, "d")
    p.set_defaults(func=cmd_scan_d)

    p = sub.add_parser("scan-shift", help="window and limits versus pump displacement")
    _add_config(p)
    _add_velocity(p)
    _add_epsilon(p)
    _add_range(p, "delta")
    p.set_defaults(func=cmd_scan_shift)

    p = sub.add_parser("adiabatic", help="adiabatic potentials, overlaps and couplings on an x grid")
    _add_config(p)
    p.add_argument("--x-from", type=float, help="um (default: left end of the domain)")
    p.add_argument("--x-to", type=float, help="um (default: right end of the domain)")
    p.add_argument("--x-points", type=int, default=2001)
    p.add_argument("--q-out", help="also write the adiabaticity measure q(v) on the velocity grid")
    _add_velocity(p)
    p.set_defaults(func=cmd_adiabatic)

    p = sub.add_parser("predict", help="adiabatic amplitude prediction for every incidence")
    _add_config(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("selfcheck", help="run the invariant suite")
    p.add_argument("--step-factor", type=float, default=1.0, help="scale the solver step (values > 1 coarsen it)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("rerun", help="regenerate an output from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write here instead of the recorded path")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_rerun)
    return parser


# -- helpers ------------------------------------------------------------------

def _config(args):
    if getattr(args, "config_data", None) is not None:
        return config_from_mapping(args.config_data)
    return load_config(args.config)


def _grid(args) -> GridSpec:
    try:
        return GridSpec(margin=args.margin)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _vgrid(args) -> analysis.VelocityGrid:
    try:
        return analysis.VelocityGrid(args.v_from, args.v_to, args.v_points, args.v_scale)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _range(args, name) -> list[float]:
    values = getattr(args, name)
    if values is None:
        lo, hi, step = (getattr(args, f"{name}_{k}") for k in ("from", "to", "step"))
        if None in (lo, hi, step):
            raise InputError(f"give --{name} or all of --{name}-from/--{name}-to/--{name}-step")
        if step <= 0 or hi < lo:
            raise InputError(f"--{name}-step must be positive and --{name}-to >= --{name}-from")
        values = list(np.round(np.arange(lo, hi + 0.5 * step, step), 9))
    if not values:
        raise InputError(f"empty --{name} list")
    return [float(v) for v in values]


def _recorded_arguments(args) -> dict:
    skip = {"func", "out", "workers", "config_data", "manifest"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _emit(args, cfg, text: str, started: float, extra_outputs=()) -> None:
    if not args.out:
        sys.stdout.write(text)
        return
    io.write_text(args.out, text)
    manifest = io.RunManifest(
        subcommand=args.command,
        config=cfg.to_units(),
        arguments=_recorded_arguments(args),
        outputs=[str(args.out), *map(str, extra_outputs)],
        version=__version__,
        duration_s=round(time.time() - started, 3),
    )
    manifest.write(io.manifest_path(args.out))


def _scatter_row(cfg, grid, channel, w):
    try:
        return (w, *probabilities_signed(cfg, w, channel, grid), None)
    except ConvergenceError as exc:
        nan = float("nan")
        return (w, nan, nan, nan, nan, str(exc))


# -- commands -----------------------------------------------------------------

def cmd_scatter(args) -> int:
    started = time.time()
    cfg = _config(args)
    grid = _grid(args)
    if args.v is not None:
        speeds = args.v
        if not speeds:
            raise InputError("empty velocity list")
    else:
        speeds = _vgrid(args).values().tolist()
    if any(not v > 0 for v in speeds):
        raise InputError("speeds must be positive")
    signed = []
    if args.sides in ("both", "right"):
        signed += [-v for v in speeds]
    if args.sides in ("both", "left"):
        signed += list(speeds)
    signed.sort()
    rows = ordered_map(functools.partial(_scatter_row, cfg, grid, args.channel), signed, resolve_workers(args.workers))
    text = io.scatter_csv(cfg, args.channel, rows, margin=args.margin)
    _emit(args, cfg, text, started)
    return EXIT_SOLVER if any(r[5] for r in rows) else EXIT_OK


def cmd_window(args) -> int:
    started = time.time()
    cfg = _config(args)
    grid, vgrid = _grid(args), _vgrid(args)
    if not args.epsilon > 0:
        raise InputError("--epsilon must be positive")
    window = analysis.find_window(cfg, args.epsilon, vgrid, grid, workers=resolve_workers(args.workers))
    limits = adiabatic.adiabatic_limits(cfg, args.epsilon, v_lower=vgrid.v_from, v_upper=vgrid.v_to, points=vgrid.points)
    _emit(args, cfg, io.window_csv(cfg, window, limits, vgrid, margin=args.margin), started)
    return EXIT_OK


def _scan(args, parameter, values) -> int:
    started = time.time()
    cfg = _config(args)
    grid, vgrid = _grid(args), _vgrid(args)
    if not args.epsilon > 0:
        raise InputError("--epsilon must be positive")
    try:
        if parameter == "d":
            table = analysis.scan_d(cfg, [v * MICRON for v in values], args.epsilon, vgrid, grid, resolve_workers(args.workers))
        else:
            table = analysis.scan_shift(cfg, [v * MICRON for v in values], args.epsilon, vgrid, grid, resolve_workers(args.workers))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise InputError(str(exc)) from None
    _emit(args, cfg, io.scan_csv(table, margin=args.margin), started)
    return EXIT_SOLVER if any(r.error for r in table.rows) else EXIT_OK


def cmd_scan_d(args) -> int:
    return _scan(args, "d", _range(args, "d"))


def cmd_scan_shift(args) -> int:
    return _scan(args, "delta", _range(args, "delta"))


def cmd_adiabatic(args) -> int:
    started = time.time()
    cfg = _config(args)
    lo, hi = simulation_domain(cfg, _grid(args).margin)
    x_from = lo if args.x_from is None else args.x_from * MICRON
    x_to = hi if args.x_to is None else args.x_to * MICRON
    if args.x_points < 2 or not x_to > x_from:
        raise InputError("need at least two x points and --x-to > --x-from")
    profile = adiabatic.adiabatic_frame(np.linspace(x_from, x_to, args.x_points), cfg)
    extra = []
    if args.q_out:
        measure = adiabatic.AdiabaticityMeasure(cfg)
        vs = [v for v in _vgrid(args).values() if v > measure.v_lambda_min]
        io.write_text(args.q_out, io.q_csv(cfg, vs, [measure(v) for v in vs]))
        extra.append(args.q_out)
    _emit(args, cfg, io.adiabatic_csv(cfg, profile), started, extra)
    return EXIT_OK


def cmd_predict(args) -> int:
    started = time.time()
    cfg = _config(args)
    entries = []
    for side in ("left", "right"):
        for channel in (1, 2):
            p = adiabatic.adiabatic_prediction(cfg, side, channel)
            probs = p.probabilities
            a = channel
            entries.append({
                "side": side,
                "channel": channel,
                "c_minus": p.c_minus,
                "c_plus": p.c_plus,
                "amplitudes": {f"R1{a}": p.r1, f"R2{a}": p.r2, f"T1{a}": p.t1, f"T2{a}": p.t2},
                "probabilities": {f"R1{a}": probs[0], f"R2{a}": probs[1], f"T1{a}": probs[2], f"T2{a}": probs[3]},
                "total": sum(probs),
            })
    doc = {"config": cfg.to_units(), "case": cfg.case.value, "predictions": entries}
    _emit(args, cfg, json.dumps(doc, indent=2, sort_keys=True) + "\n", started)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    if not args.step_factor > 0:
        raise InputError("--step-factor must be positive")
    results = selfcheck.run(args.step_factor, args.seed)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("selfcheck: " + ("all checks passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_rerun(args) -> int:
    try:
        manifest = io.RunManifest.read(args.manifest)
    except (OSError, ValueError, TypeError) as exc:
        raise InputError(f"cannot read manifest {args.manifest}: {exc}") from None
    inner = build_parser().parse_args([manifest.subcommand, "--config", "-"])
    for key, value in manifest.arguments.items():
        setattr(inner, key, value)
    inner.config_data = manifest.config
    inner.out = args.out or manifest.outputs[0]
    inner.workers = args.workers
    return inner.func(inner)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
