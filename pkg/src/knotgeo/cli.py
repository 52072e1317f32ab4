"""``knotgeo`` command-line interface.

Settings resolve as command-line flag, then ``KNOTGEO_*`` environment
variable, then built-in default.  Exit status: 0 on success, 1 when a
``check`` gate fails, 2 on usage or input errors, 3 when a solver stops
early (aborted shot, stalled flow, unconverged connect).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .curve import CurveError, EmbeddingError, generate, min_separation
from .energy import energy_from_table, energy_report
from .io import ParseError, parse_curve, parse_field, read_frames, write_curve, write_frames, write_obj
from .kernel import Quadrature, build_pair_table, check_exponent
from .metric import PositivityError

__all__ = ["RunConfig", "build_parser", "main"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_EARLY = 0, 1, 2, 3


@dataclass
class RunConfig:
    s: float = 1.75
    reduction: str = "ordered"
    seed: int = 0
    tol: float = 1e-6
    quad: Quadrature = Quadrature()

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        quad = Quadrature(self_correction=not args.no_self_correction, skip_adjacent=args.skip_adjacent)
        return cls(
            s=args.s,
            reduction=args.reduction,
            seed=getattr(args, "seed", 0),
            tol=getattr(args, "tol", 1e-6),
            quad=quad,
        )


def _exponent(text):
    try:
        return check_exponent(float(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _env(name, default, conv=str):
    raw = os.environ.get(f"KNOTGEO_{name}")
    if raw is None:
        return default
    try:
        return conv(raw)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise SystemExit(f"knotgeo: invalid KNOTGEO_{name}={raw!r}: {exc}")


def _common(p):
    p.add_argument("--s", type=_exponent, default=_env("S", 1.75, _exponent), help="energy exponent in (1.5, 2) (default 1.75)")
    p.add_argument(
        "--reduction",
        choices=("ordered", "parallel"),
        default=_env("REDUCTION", "ordered"),
        help="energy summation order (default ordered, bit-reproducible)",
    )
    p.add_argument("--skip-adjacent", action="store_true", help="drop pairs of edges sharing a vertex from the quadrature")
    p.add_argument("--no-self-correction", action="store_true", help="use plain midpoint quadrature without the diagonal term")


def _out(p, required=False):
    p.add_argument("--out", required=required, help="output JSONL file")
    p.add_argument("--obj", metavar="DIR", help="also write one OBJ polyline per frame into DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knotgeo", description="Tangent-point energy and its Riemannian metric on closed polygons.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a curve file")
    p.add_argument("kind", choices=("circle", "torus_knot", "figure_eight", "random_smooth"))
    p.add_argument("--n", type=int, required=True, help="vertex count")
    p.add_argument("--p", type=int, default=2, help="torus knot: turns around the axis")
    p.add_argument("--q", type=int, default=3, help="torus knot: turns around the tube")
    p.add_argument("--radius", type=float, default=1.0, help="circle radius")
    p.add_argument("--scale", type=float, default=1.0, help="figure-eight scale")
    p.add_argument("--dim", type=int, default=3, help="ambient dimension for circle and random_smooth")
    p.add_argument("--seed", type=int, default=_env("SEED", 0, int), help="random_smooth seed")
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("energy", help="energy report for a curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    _common(p)

    p = sub.add_parser("flow", help="metric-preconditioned energy flow")
    p.add_argument("--curve", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--step", type=float, help="fixed step size (default: Armijo rule)")
    _out(p, required=True)
    _common(p)

    p = sub.add_parser("shoot", help="integrate a geodesic from a curve and velocity")
    p.add_argument("--curve", required=True)
    p.add_argument("--velocity", required=True, help='tangent field file {"dim": m, "values": [...]}')
    p.add_argument("--T", type=float, default=1.0, help="final time")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--constraint", choices=("none", "length", "barycenter"), default="none")
    p.add_argument("--reproject", action="store_true", help="Newton-project onto the constraint after every step")
    p.add_argument("--fixed-step", action="store_true", help="disable the step-halving retry")
    _out(p, required=True)
    _common(p)

    p = sub.add_parser("connect", help="minimize the discrete path energy between two curves")
    p.add_argument("--from", dest="src", required=True)
    p.add_argument("--to", dest="dst", required=True)
    p.add_argument("--K", type=int, default=16, help="number of time segments")
    p.add_argument("--tol", type=float, default=_env("TOL", 1e-6, float))
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--init", help="warm start: JSONL path with K+1 frames")
    _out(p, required=True)
    _common(p)

    p = sub.add_parser("check", help="run the invariant gates and print a JSON report")
    p.add_argument("suite", nargs="?", default="all", choices=("identities", "gradients", "geodesic", "all"))
    p.add_argument("--seed", type=int, default=_env("SEED", 0, int))
    _common(p)
    return parser


def _write(traj_or_frames, args):
    write_frames(traj_or_frames, args.out)
    if args.obj:
        write_obj(traj_or_frames, args.obj)


def _cmd_gen(args):
    params = {}
    if args.kind == "torus_knot":
        params = {"p": args.p, "q": args.q}
    elif args.kind == "circle":
        params = {"radius": args.radius, "dim": args.dim}
    elif args.kind == "figure_eight":
        params = {"scale": args.scale}
    elif args.kind == "random_smooth":
        params = {"rng": args.seed, "dim": args.dim}
    c = generate(args.kind, args.n, **params)
    if args.out:
        write_curve(c, args.out)
    else:
        json.dump(c.to_dict(), sys.stdout)
        sys.stdout.write("\n")
    return EXIT_OK


def _cmd_energy(args, cfg):
    c = parse_curve(args.curve)
    rep = energy_report(c, cfg.s, cfg.quad)
    if cfg.reduction == "parallel":
        rep.E = energy_from_table(build_pair_table(c, cfg.s, cfg.quad), "parallel")
    if args.json:
        print(json.dumps(rep.to_dict()))
    else:
        for k, v in rep.to_dict().items():
            print(f"{k:16s} {v}")
    return EXIT_OK


def _cmd_flow(args, cfg):
    from .geodesic import flow

    traj = flow(parse_curve(args.curve), cfg.s, steps=args.steps, step=args.step, quad=cfg.quad)
    _write(traj, args)
    if traj.stalled:
        print(f"knotgeo: flow stalled: {traj.message}", file=sys.stderr)
        return EXIT_EARLY
    return EXIT_OK


def _cmd_shoot(args, cfg):
    from .geodesic import barycenter_constraint, length_constraint, shoot, shoot_constrained

    c = parse_curve(args.curve)
    x = np.asarray(c)
    v = parse_field(args.velocity, x.shape)
    opts = dict(s=cfg.s, T=args.T, steps=args.steps, quad=cfg.quad, adaptive=not args.fixed_step)
    if args.constraint == "none":
        traj = shoot(x, v, **opts)
    else:
        if args.constraint == "length":
            con = length_constraint(float(np.linalg.norm(np.roll(x, -1, axis=0) - x, axis=1).sum()))
        else:
            con = barycenter_constraint(x.mean(axis=0))
        traj = shoot_constrained(x, v, con, reproject=args.reproject, **opts)
        print(f"constraint drift {traj.constraint_drift:.3e}", file=sys.stderr)
    _write(traj, args)
    print(f"speed drift {traj.speed_drift:.3e}", file=sys.stderr)
    if traj.message:
        print(f"knotgeo: {traj.message}", file=sys.stderr)
    return EXIT_EARLY if traj.aborted else EXIT_OK


def path_frames(path, s, quad):
    """JSONL frames for a ``DiscretePath``; ``speed`` is the G-speed of the
    segment leaving each curve (the last curve repeats the final segment)."""
    K = path.K
    frames = []
    for k, x in enumerate(path.curves):
        table = build_pair_table(x, s, quad)
        frames.append(
            {
                "t": k / K,
                "vertices": x.tolist(),
                "energy": energy_from_table(table),
                "length": float(table.lengths.sum()),
                "speed": float(path.segment_speeds[min(k, K - 1)]),
                "min_separation": min_separation(x),
            }
        )
    return frames


def _cmd_connect(args, cfg):
    from .geodesic import connect

    a, b = parse_curve(args.src), parse_curve(args.dst)
    init = None
    if args.init:
        init = np.stack([fr["vertices"] for fr in read_frames(args.init)])
    path = connect(a, b, cfg.s, K=args.K, tol=cfg.tol, max_iter=args.max_iter, init=init, quad=cfg.quad)
    _write(path_frames(path, cfg.s, cfg.quad), args)
    print(
        f"path energy {path.energy:.10g}, iterations {path.iterations}, "
        f"stationarity {path.grad_norm:.3e}, speed spread {path.speed_spread:.3e}",
        file=sys.stderr,
    )
    if not path.converged:
        print(f"knotgeo: not converged: {path.message}", file=sys.stderr)
        return EXIT_EARLY
    return EXIT_OK


def _cmd_check(args, cfg):
    from .checks import run_suite

    report = run_suite(args.suite, seed=cfg.seed, s=cfg.s, quad=cfg.quad)
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["passed"] else EXIT_FAIL


_COMMANDS = {
    "energy": _cmd_energy,
    "flow": _cmd_flow,
    "shoot": _cmd_shoot,
    "connect": _cmd_connect,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        return _COMMANDS[args.command](args, RunConfig.from_args(args))
    except (ParseError, CurveError, EmbeddingError, PositivityError, ValueError, OSError) as exc:
        print(f"knotgeo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
