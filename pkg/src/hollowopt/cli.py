"""Command-line entry point: ``hollowopt <subcommand> ...``.

Exit codes: 0 success, 1 inadmissible shape or detected violation,
2 usage error or malformed shape file, 3 I/O failure.  Results go to stdout
as JSON; the resolved configuration is echoed to stderr unless --quiet.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__
from .flowsim import entry_points, monte_carlo_resistance, ray_table
from .highdim import Domain, appendix_bound, count_lattice_cubes, md_table
from .optimize import minimize
from .resistance import Weight, integrand_samples, resistance_weighted
from .shapes import ShapeFormatError, load_shape, make_u0, save_shape, u0
from .sic import SIC_TOL, check_sic, check_strong_sic
from .transforms import STAGES, TransformError, run_pipeline

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _finite(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(obj) -> None:
    print(json.dumps(_finite(obj), indent=2))


def _weight(text: str) -> Weight:
    try:
        return Weight.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    shape = load_shape(args.shape)
    if args.strong is not None:
        if not args.strong > 0:
            raise UsageError("--strong must be positive")
        rep = check_strong_sic(shape, args.strong, tol=args.tol)
    else:
        rep = check_sic(shape, tol=args.tol)
    _emit(rep.to_dict())
    return EXIT_OK if rep.admissible else EXIT_VERDICT


def cmd_resist(args) -> int:
    shape = load_shape(args.shape)
    w = _weight(args.weight)
    res = resistance_weighted(shape, w)
    _emit(res.to_dict())
    if args.csv:
        write_csv(args.csv, ["x", "f", "g"], integrand_samples(shape, w, args.samples))
    return EXIT_OK


def cmd_transform(args) -> int:
    shape = load_shape(args.shape)
    stages = [s.strip() for s in args.pipeline.split(",") if s.strip()]
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise UsageError(f"unknown stage(s) {', '.join(bad)}; choose from {', '.join(STAGES)}")
    try:
        res = run_pipeline(
            shape, stages, _weight(args.weight), q=args.q, eta=args.eta, c=args.c,
            n_segments=args.n_segments, sigma=args.sigma, gap=args.gap,
        )
    except TransformError as exc:
        print(f"transform failed: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    rows = [(r.stage, r.value, r.margin, r.eps) for r in res.trace]
    if args.out:
        save_shape(res.shape, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "F", "sic_margin", "eps"])
            for st, *nums in rows:
                w.writerow([st, *(_fmt(v) for v in nums)])
    _emit({"stages": [{"stage": st, "F": v, "sic_margin": m, "eps": e} for st, v, m, e in rows]})
    return EXIT_OK


def cmd_flow(args) -> int:
    shape = load_shape(args.shape)
    if args.n < 1:
        raise UsageError("-n must be positive")
    res = monte_carlo_resistance(shape, args.n, seed=args.seed, threads=args.threads)
    _emit(res.to_dict())
    if args.dump_rays:
        xs = entry_points(min(args.n, args.dump_limit), args.seed)
        write_csv(args.dump_rays, ["entry_x", "hit_x", "hit_y", "dir_x", "dir_y", "second_hit_flag"],
                  ray_table(shape, xs))
    return EXIT_VERDICT if res.n_violations else EXIT_OK


def cmd_optimize(args) -> int:
    run = minimize(_weight(args.weight), n_segments=args.n, budget=args.budget, seed=args.seed)
    if args.out:
        save_shape(run.best_shape, args.out)
    if args.history:
        write_csv(args.history, ["iteration", "value"], run.history)
    _emit(run.summary())
    return EXIT_OK


def cmd_mdtable(args) -> int:
    if args.max_d < 1:
        raise UsageError("--max-d must be >= 1")
    rows = md_table(args.max_d)
    if args.csv:
        write_csv(args.csv, ["d", "m_d"], rows)
    _emit([{"d": d, "m_d": v} for d, v in rows])
    return EXIT_OK


def cmd_appendix(args) -> int:
    try:
        dom = Domain.parse(args.domain, args.dim)
        cover = count_lattice_cubes(dom, args.dim, args.delta)
        bound = appendix_bound(cover, args.inner)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = cover.to_dict()
    out.update(inner_resistance=args.inner, bound=bound)
    _emit(out)
    return EXIT_OK


def cmd_u0(args) -> int:
    shape = make_u0()
    xs = np.linspace(-1.0, 1.0, args.points)
    if args.csv:
        write_csv(args.csv, ["x", "u0", "du0"], np.column_stack([xs, u0(xs), shape.derivatives(xs)]))
    if args.out:
        save_shape(shape, args.out)
    _emit(resistance_weighted(shape).to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (64-bit integer)")
    common.add_argument("--tol", type=float, default=SIC_TOL, help="tolerance of the SIC chord checks")
    common.add_argument("--quiet", action="store_true", help="do not echo the configuration to stderr")

    p = argparse.ArgumentParser(prog="hollowopt", description="Minimal-resistance hollows under the single impact condition.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("check", parents=[common], help="check SIC admissibility of a shape")
    s.add_argument("--shape", required=True, help="shape JSON file")
    s.add_argument("--strong", type=float, metavar="DELTA", help="check strong SIC with this margin")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("resist", parents=[common], help="weighted resistance of a shape")
    s.add_argument("--shape", required=True)
    s.add_argument("--weight", default="constant", help="constant or radial:d")
    s.add_argument("--csv", help="write integrand samples (x, f, g) here")
    s.add_argument("--samples", type=int, default=1001, help="number of integrand samples")
    s.set_defaults(func=cmd_resist)

    s = sub.add_parser("transform", parents=[common], help="run the transformation pipeline")
    s.add_argument("--shape", required=True)
    s.add_argument("--pipeline", default=",".join(STAGES), help="comma-separated stages")
    s.add_argument("--out", help="write the final shape here")
    s.add_argument("--trace", help="write per-stage F and SIC margin CSV here")
    s.add_argument("--weight", default="constant")
    s.add_argument("--q", type=float, default=0.99, help="scaling factor of strongify")
    s.add_argument("--eta", type=float, default=1e-3, help="zone half-width of strongify")
    s.add_argument("--c", type=float, default=None, help="flattening level of strongify (default: automatic)")
    s.add_argument("--n-segments", type=int, default=64, help="cells of the PL approximation")
    s.add_argument("--sigma", type=float, default=1e-3, help="slope shrink of the PL approximation")
    s.add_argument("--gap", type=float, default=1e-3, help="gap width of the PL approximation")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("flow", parents=[common], help="Monte Carlo particle flow")
    s.add_argument("--shape", required=True)
    s.add_argument("-n", type=int, default=1_000_000, help="number of particles")
    s.add_argument("--threads", type=int, default=None, help="worker threads (default HOLLOWOPT_THREADS or 1)")
    s.add_argument("--dump-rays", help="write per-ray CSV here")
    s.add_argument("--dump-limit", type=int, default=10000, help="rays written by --dump-rays")
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("optimize", parents=[common], help="minimize resistance over PL profiles")
    s.add_argument("--weight", default="constant")
    s.add_argument("-n", type=int, default=64, help="number of uniform segments (even)")
    s.add_argument("--budget", type=int, default=20000, help="objective evaluations")
    s.add_argument("--out", help="write the best shape here")
    s.add_argument("--history", help="write (iteration, value) CSV here")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("mdtable", parents=[common], help="radial minimal values m_d")
    s.add_argument("--max-d", type=int, default=50)
    s.add_argument("--csv", help="write (d, m_d) CSV here")
    s.set_defaults(func=cmd_mdtable)

    s = sub.add_parser("appendix", parents=[common], help="lattice cover accounting in dimension d")
    s.add_argument("--domain", default="ball:1.0", help="ball:R or box:L[,L...]")
    s.add_argument("--dim", type=int, default=3)
    s.add_argument("--delta", type=float, default=0.05, help="lattice pitch")
    s.add_argument("--inner", type=float, default=0.51, help="resistance inside each cube")
    s.set_defaults(func=cmd_appendix)

    s = sub.add_parser("u0", parents=[common], help="the optimal profile u0")
    s.add_argument("--csv", help="write (x, u0, u0') CSV here")
    s.add_argument("--out", help="write u0 as a shape JSON here")
    s.add_argument("--points", type=int, default=1001)
    s.set_defaults(func=cmd_u0)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.quiet:
        cfg = {k: v for k, v in vars(args).items() if k != "func"}
        print(json.dumps({"config": cfg}), file=sys.stderr)
    try:
        return args.func(args)
    except (ShapeFormatError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
