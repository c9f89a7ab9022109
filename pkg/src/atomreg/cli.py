"""Command-line entry point.

Subcommands: siden-sweep, error-sweep, grid-count, bounds, register,
decompose.  Sweep subcommands share the flat key=value configuration:
defaults, then --config file, then per-key flags, in that order.  Exit
codes: 0 success, 1 configuration or input error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import plotting
from .atoms import evaluate_pattern
from .errors import ConfigError, NumericalError
from .experiments import (
    SweepConfig,
    apply_overrides,
    bound_report_csv,
    default_config,
    format_config,
    parse_config_text,
    run_bounds_report,
    run_error_sweep,
    run_grid_count,
    run_siden_sweep,
)
from .ingestion import (
    default_dictionary,
    load_pattern,
    load_raster,
    matching_pursuit,
    save_pattern,
)
from .registration import multiscale_register, two_stage_register

_SWEEPS = {
    "siden-sweep": (run_siden_sweep, plotting.render_siden_sweep),
    "error-sweep": (run_error_sweep, plotting.render_error_sweep),
    "grid-count": (run_grid_count, plotting.render_grid_count),
}


def _add_sweep_parser(sub, name: str, help_text: str):
    sp = sub.add_parser(name, help=help_text)
    sp.add_argument("--config", help="key = value configuration file")
    sp.add_argument(
        "--show-config", action="store_true",
        help="print the effective configuration and exit",
    )
    sp.add_argument(
        "--no-plot", action="store_true", help="skip the PNG next to the CSV"
    )
    for f in dataclasses.fields(SweepConfig):
        sp.add_argument(
            f"--{f.name.replace('_', '-')}", dest=f"key_{f.name}", metavar="V",
            help=argparse.SUPPRESS,
        )
    return sp


def _sweep_config(name: str, args) -> SweepConfig:
    cfg = default_config(name)
    if args.config:
        cfg = apply_overrides(cfg, parse_config_text(Path(args.config).read_text()))
    flags = {
        f.name: getattr(args, f"key_{f.name}")
        for f in dataclasses.fields(SweepConfig)
        if getattr(args, f"key_{f.name}") is not None
    }
    return apply_overrides(cfg, flags)


def _run_sweep(name: str, args) -> int:
    cfg = _sweep_config(name, args)
    if args.show_config:
        print(format_config(cfg), end="")
        return 0
    if name == "bounds":
        rep = run_bounds_report(cfg)
        print(rep.to_text(), end="")
        Path(cfg.out).write_text(bound_report_csv(rep))
        print(f"wrote {cfg.out}")
        return 0
    runner, renderer = _SWEEPS[name]
    result = runner(cfg)
    result.write(cfg.out)
    print(f"wrote {cfg.out}")
    if not args.no_plot:
        figure = Path(cfg.out).with_suffix(".png")
        renderer(result, figure)
        print(f"wrote {figure}")
    return 0


def _run_register(args) -> int:
    p = load_pattern(args.pattern)
    q = load_pattern(args.target)
    rhos = tuple(float(tok) for tok in args.rho.split(",") if tok.strip())
    if not rhos:
        raise ConfigError("--rho needs at least one value")
    opts = {"grad_tol": args.grad_tol, "n_directions": args.n_directions}
    if len(rhos) == 1:
        res = two_stage_register(p, q, rhos[0], args.t_range, **opts)
    else:
        res = multiscale_register(p, q, rhos, args.t_range, **opts)
    print(f"translation = ({float(res.translation[0])!r}, {float(res.translation[1])!r})")
    print(f"distance_value = {float(res.distance_value)!r}")
    print(f"iterations = {res.iterations}")
    print(f"converged = {str(res.converged).lower()}")
    if args.out:
        header = "est_tx,est_ty,iterations,converged,distance_value"
        row = ",".join(
            [
                repr(float(res.translation[0])),
                repr(float(res.translation[1])),
                str(res.iterations),
                str(res.converged).lower(),
                repr(float(res.distance_value)),
            ]
        )
        Path(args.out).write_text(header + "\n" + row + "\n")
        print(f"wrote {args.out}")
    return 0


def _run_decompose(args) -> int:
    img = load_raster(args.input, format=args.format, extent=args.extent)
    spec = default_dictionary(
        img, psi_count=args.psi_count, tau_subsample=args.tau_subsample
    )
    pattern = matching_pursuit(img, spec, args.atoms)
    save_pattern(pattern, args.out)
    recon = evaluate_pattern(pattern, img.width, img.height, img.extent)
    total = float((img.pixels ** 2).sum())
    left = float(((img.pixels - recon.pixels) ** 2).sum())
    share = 1.0 - left / total if total > 0.0 else 1.0
    print(f"wrote {args.out}")
    print(f"captured energy fraction = {share:.6f}")
    if not args.no_plot:
        figure = Path(args.out).with_suffix(".png")
        plotting.render_raster_pair(img, recon, figure)
        print(f"wrote {figure}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atomreg",
        description="Gaussian-atom pattern registration experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_sweep_parser(sub, "siden-sweep", "certified vs located descent radii")
    _add_sweep_parser(sub, "error-sweep", "registration error vs noise level")
    _add_sweep_parser(sub, "grid-count", "coarse grid size vs filter size")
    _add_sweep_parser(sub, "bounds", "dump every certified constant")

    reg = sub.add_parser("register", help="align two pattern files")
    reg.add_argument("--pattern", required=True, help="reference pattern CSV")
    reg.add_argument("--target", required=True, help="target pattern CSV")
    reg.add_argument(
        "--rho", default="0",
        help="filter size, or comma list for a coarse-to-fine schedule",
    )
    reg.add_argument("--t-range", type=float, default=4.0)
    reg.add_argument("--grad-tol", type=float, default=1e-8)
    reg.add_argument("--n-directions", type=int, default=128)
    reg.add_argument("--out", default="")

    dec = sub.add_parser("decompose", help="matching pursuit on a raster")
    dec.add_argument("--input", required=True, help="PGM or CSV raster")
    dec.add_argument("--atoms", type=int, default=20)
    dec.add_argument("--out", default="pattern.csv")
    dec.add_argument("--extent", type=float, default=1.0)
    dec.add_argument("--format", choices=("pgm", "csv"), default=None)
    dec.add_argument("--psi-count", type=int, default=8)
    dec.add_argument("--tau-subsample", type=int, default=2)
    dec.add_argument("--no-plot", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in _SWEEPS or args.command == "bounds":
            return _run_sweep(args.command, args)
        if args.command == "register":
            return _run_register(args)
        return _run_decompose(args)
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
