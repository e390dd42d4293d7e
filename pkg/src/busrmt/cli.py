"""Command-line interface.

Every subcommand accepts ``--config FILE`` (flat ``key=value`` lines); flags
given on the command line override file values. Failures exit with status 1
and a diagnostic naming the stage that failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiment as exp
from .equilibrium import EquilibriumData
from .model_line import ModelParams
from .multitime import TimeGrid, kernel_consistency
from .orthopoly import JacobiBasis
from .rmt_reference import (
    gaudin_cdf,
    gaudin_density,
    gue_number_variance,
    gue_number_variance_asymptote,
    poisson_spacing_cdf,
    wigner_surmise,
)


def _line_flags(p):
    p.add_argument("--N", type=int, help="jumps per bus over [0, T]")
    p.add_argument("--n", type=int, help="number of buses")
    p.add_argument("--x", type=int, help="observation site")
    p.add_argument("--T", type=float, help="time horizon")


def _experiment_flags(p, stochastic=True):
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int, help="master seed" + (" (required, here or in --config)" if stochastic else ""))
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", dest="out_dir")


def _stat_flags(p):
    p.add_argument("--sampler", choices=["auto", "rejection", "dpp"])
    p.add_argument("--unfold", choices=["exact", "equilibrium"])
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--edge-fraction", dest="edge_fraction", type=float)
    p.add_argument("--s-grid", dest="s_grid", help="comma-separated window lengths")
    p.add_argument("--ks-tolerance", dest="ks_tolerance", type=float)
    p.add_argument("--nv-tolerance", dest="nv_tolerance", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="busrmt", description="Non-intersecting Poisson buses: simulation, exact formulas and GUE comparisons.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="flat key=value config file")
        return p

    p = add("simulate-line", "sample arrival times of the line model and write arrivals.csv")
    _line_flags(p)
    _experiment_flags(p)
    p.add_argument("--sampler", choices=["auto", "rejection", "dpp"])
    p.add_argument("--dump-trajectories", action="store_true", help="also write full jump times (rejection sampler)")

    for name, what in (("spacing", "nearest-neighbour spacing histogram"), ("number-variance", "number variance curve")):
        p = add(name, f"{what} of unfolded arrivals vs the GUE reference")
        _line_flags(p)
        _experiment_flags(p)
        _stat_flags(p)

    p = add("run", "full pipeline from a config file or preset")
    p.add_argument("--preset", choices=sorted(exp.PRESETS))
    _line_flags(p)
    _experiment_flags(p, stochastic=False)
    _stat_flags(p)

    p = add("simulate-circle", "rejection-sample the circle model and compare with the exact law")
    p.add_argument("--M", type=int, help="number of sites")
    p.add_argument("--k", type=int, help="number of buses")
    p.add_argument("--t", type=float, help="observation time")
    p.add_argument("--T", type=float, help="bridge horizon for the Q_t table")
    _experiment_flags(p)

    p = add("gap-prob", "exact probability that no bus arrives in [c, d]")
    _line_flags(p)
    p.add_argument("--c", type=float, required=True, help="window start, in time units")
    p.add_argument("--d", type=float, required=True, help="window end, in time units")

    p = add("reference", "tabulate sine-kernel reference curves")
    p.add_argument("--s-max", dest="s_max", type=float, default=4.0)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--out", type=Path, default=Path("reference.csv"))

    p = add("equilibrium", "equilibrium endpoints and density")
    p.add_argument("--nu", type=float)
    p.add_argument("--eta", type=float)
    _line_flags(p)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--out", type=Path)

    p = add("multitime-check", "compare the extended kernel with exhaustive enumeration")
    _line_flags(p)
    p.add_argument("--times", default="0.3,0.6", help="comma-separated observation times")
    p.add_argument("--samples", type=int, default=512, help="contour points per circle")
    p.add_argument("--tolerance", type=float, default=1e-8)
    return parser


def _settings(args, keys):
    """Merge config-file values under explicit flags, keeping only ``keys``."""
    values = {}
    if getattr(args, "config", None):
        values.update(exp.parse_flat_config(args.config.read_text()))
    for key in keys:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


CONFIG_KEYS = [f.name for f in exp.fields(exp.ExperimentConfig)]


def _experiment_config(args, **forced):
    values = _settings(args, CONFIG_KEYS)
    values.update(forced)
    preset = getattr(args, "preset", None)
    if "seed" not in values and not preset:
        raise exp.StageError("validate", ValueError("--seed is required (flag or config file)"))
    try:
        return exp.make_config(values, preset=preset)
    except (ValueError, KeyError, TypeError) as err:
        raise exp.StageError("validate", err) from err


def _report(bundle):
    for key, value in bundle.summary.items():
        print(f"{key}={value}")
    for key, ok in bundle.checks.items():
        print(f"check.{key}={'pass' if ok else 'fail'}")
    for name, path in bundle.files.items():
        print(f"wrote {name}: {path}")
    if not bundle.passed:
        failed = ", ".join(k for k, ok in bundle.checks.items() if not ok)
        print(f"error: stage 'compare' failed: tolerance checks not met: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_pipeline(args, **forced):
    config = _experiment_config(args, **forced)
    bundle = exp.run_experiment(config, dump_trajectories=getattr(args, "dump_trajectories", False))
    return _report(bundle)


def cmd_gap_prob(args):
    v = _settings(args, ["N", "n", "x", "T"])
    try:
        params = ModelParams(int(v["N"]), int(v["n"]), int(v["x"]), float(v.get("T", 1.0)))
    except (KeyError, ValueError) as err:
        raise exp.StageError("validate", err) from err
    if not 0 <= args.c <= args.d <= params.T:
        raise exp.StageError("validate", ValueError(f"need 0 <= c <= d <= T, got c={args.c}, d={args.d}"))
    basis = JacobiBasis.from_params(params)
    value = basis.gap_probability(2 * args.c / params.T - 1, 2 * args.d / params.T - 1)
    print(f"gap_probability={exp.format_real(value)}")
    return 0


def cmd_reference(args):
    s = np.round(np.arange(args.step, args.s_max + 0.5 * args.step, args.step), 12)
    rows = []
    for method, values in (
        ("gaudin_density", gaudin_density(s)),
        ("gaudin_cdf", gaudin_cdf(s)),
        ("wigner_surmise", wigner_surmise(s)),
        ("poisson_cdf", poisson_spacing_cdf(s)),
        ("gue_number_variance", gue_number_variance(s)),
        ("gue_number_variance_asymptote", gue_number_variance_asymptote(s)),
    ):
        rows.extend((float(a), float(b), method) for a, b in zip(s, values))
    exp.write_csv(args.out, ["s", "value", "method"], rows)
    print(f"wrote reference: {args.out}")
    return 0


def cmd_equilibrium(args):
    v = _settings(args, ["nu", "eta", "N", "n", "x", "T"])
    if "nu" in v and "eta" in v:
        eq = EquilibriumData.solve(float(v["nu"]), float(v["eta"]))
    elif {"N", "n", "x"} <= set(v):
        eq = EquilibriumData.from_params(ModelParams(int(v["N"]), int(v["n"]), int(v["x"]), float(v.get("T", 1.0))))
    else:
        raise exp.StageError("validate", ValueError("give --nu and --eta, or --N, --n and --x"))
    print(f"a={exp.format_real(eq.a)}")
    print(f"b={exp.format_real(eq.b)}")
    print(f"mass={exp.format_real(eq.mass())}")
    if args.out:
        y = np.linspace(eq.a, eq.b, args.points)[1:-1]
        exp.write_csv(args.out, ["y", "density"], zip(y.tolist(), eq.density(y).tolist()))
        print(f"wrote density: {args.out}")
    return 0


def cmd_multitime(args):
    v = _settings(args, ["N", "n", "x", "T"])
    params = ModelParams(int(v.get("N", 3)), int(v.get("n", 2)), int(v.get("x", 1)), float(v.get("T", 1.0)))
    grid = TimeGrid([float(t) for t in args.times.split(",")], params.T)
    errors = kernel_consistency(params, grid, args.samples)
    for key, value in errors.items():
        print(f"{key}_max_error={value:.3e}")
    ok = max(errors.values()) < args.tolerance
    print(f"check.multitime_kernel={'pass' if ok else 'fail'}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = {"gap-prob": "gap_probability", "reference": "reference", "equilibrium": "equilibrium"}
    try:
        if args.command == "simulate-line":
            return cmd_pipeline(args, model="line", statistics=())
        if args.command == "spacing":
            return cmd_pipeline(args, model="line", statistics=("spacing",))
        if args.command == "number-variance":
            return cmd_pipeline(args, model="line", statistics=("number_variance",))
        if args.command == "run":
            return cmd_pipeline(args)
        if args.command == "simulate-circle":
            return cmd_pipeline(args, model="circle", statistics=())
        if args.command == "gap-prob":
            return cmd_gap_prob(args)
        if args.command == "reference":
            return cmd_reference(args)
        if args.command == "equilibrium":
            return cmd_equilibrium(args)
        return cmd_multitime(args)
    except exp.StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - report the stage and exit nonzero
        name = stage.get(args.command, args.command)
        print(f"error: stage '{name}' failed: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
