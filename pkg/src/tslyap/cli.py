"""``tslyap`` command line.

Exit codes: 0 Feasible / success, 1 Infeasible / check failed, 2 Inconclusive,
3 usage error (bad flags, unknown fixture, malformed hyperparameters).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Optional

from . import acceptance
from .conditions import KINDS, ConditionSpec, spec_from_args
from .fixtures import catalog, fixture
from .regions import LyapunovFn, RegionSpec, largest_sublevel
from .sdp import SolverOptions, Status, solve
from .search import Axis, NoFeasibleBracket, bisect_hyper, compare_sweeps, sweep, sweep_svg
from .verify import validate_da

EXIT = {Status.FEASIBLE: 0, Status.INFEASIBLE: 1, Status.INCONCLUSIVE: 2}
USAGE_ERROR = 3
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


@dataclass
class RunManifest:
    command: str
    fixture: Optional[str] = None
    params: dict = field(default_factory=dict)
    condition: Optional[str] = None
    hyperparameters: dict = field(default_factory=dict)
    solver_options: dict = field(default_factory=dict)
    grid: Optional[list] = None
    outputs: list = field(default_factory=list)
    version: str = field(default_factory=_version)
    wall_time: float = 0.0
    argv: list = field(default_factory=list)

    def write(self, out: Path) -> Path:
        path = out / MANIFEST
        path.write_text(json.dumps(asdict(self), indent=2, default=str))
        return path


def _add_model(p):
    p.add_argument("--fixture", required=True, help=f"one of: {', '.join(catalog())}")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float, help="model parameter of example2 (see --b-bound for b_i)")
    p.add_argument("--mu", type=float)
    p.add_argument("--seed", type=int)


def _add_condition(p, required=True):
    p.add_argument("--condition", choices=KINDS, required=required)
    p.add_argument("--phi", help="phi_i: scalar or comma list")
    p.add_argument("--b-bound", dest="b_bound", help="b_i: scalar or comma list")
    p.add_argument("--eta", help="eta")
    p.add_argument("--eps", type=float, help="strictness margin (default scales with max ||A_i||)")


def _add_solver(p):
    p.add_argument("--sdp-iters", type=int, default=200)
    p.add_argument("--sdp-tol", type=float, default=1e-8)
    p.add_argument("--sdp-restarts", type=int, default=5)
    p.add_argument("--out", default="tslyap-out", help="output directory")


def _grid(text: str) -> tuple:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like 11x11") from None
    if nx < 1 or ny < 1:
        raise argparse.ArgumentTypeError("grid counts must be positive")
    return nx, ny


def _range(text: str) -> tuple:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("range must look like lo:hi") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tslyap", description="LMI stability certificates for fuzzy models")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="decide one condition on one model")
    _add_model(p)
    _add_condition(p)
    _add_solver(p)

    p = sub.add_parser("maximize", help="bisect the largest feasible hyperparameter")
    _add_model(p)
    _add_condition(p)
    _add_solver(p)
    p.add_argument("--param", choices=("phi", "b", "eta"))
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--tol", type=float, default=1e-3, help="relative bracket width")

    p = sub.add_parser("sweep", help="feasibility over a grid of two model parameters")
    p.add_argument("--fixture", default="example2")
    _add_condition(p)
    _add_solver(p)
    p.add_argument("--grid", type=_grid, default=(11, 11))
    p.add_argument("--x-param", default="a")
    p.add_argument("--y-param", default="b")
    p.add_argument("--x-range", type=_range, default=(-10.0, 0.0))
    p.add_argument("--y-range", type=_range, default=(0.0, 200.0))
    p.add_argument("--reference-phi", type=float, default=0.85,
                   help="phi of the slack-matrix FLF sweep drawn as filled markers (0 disables)")
    p.add_argument("--threads", type=int)

    for name, helptext in (("da", "largest certified sublevel set"),
                           ("validate", "integrate samples of the certified sublevel set")):
        p = sub.add_parser(name, help=helptext)
        _add_model(p)
        _add_condition(p)
        _add_solver(p)
        p.add_argument("--resolution", type=int, default=401)
        if name == "validate":
            p.add_argument("--samples", type=int, default=500)
            p.add_argument("--horizon", type=float, default=50.0)
            p.add_argument("--dt", type=float, default=1e-3)
            p.add_argument("--inflate", type=float, default=1.0, help="audit c* times this factor")
            p.add_argument("--audit-seed", type=int, default=0)

    p = sub.add_parser("reproduce", help="run the acceptance criteria")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", help="criteria at their stated grids (default)")
    mode.add_argument("--full", action="store_true", help="denser sweep grid")
    mode.add_argument("--list", action="store_true", help="list criteria without running")
    p.add_argument("--only", help="comma list of criterion numbers")
    p.add_argument("--out", default=None, help="write a JSON report here")
    return parser


def _model_params(args) -> dict:
    return {k: getattr(args, k) for k in ("a", "b", "mu", "seed") if getattr(args, k, None) is not None}


def _options(args) -> SolverOptions:
    return SolverOptions(max_iters=args.sdp_iters, tol=args.sdp_tol, restarts=args.sdp_restarts)


def _spec(args) -> ConditionSpec:
    return spec_from_args(args.condition, args.phi, args.b_bound, args.eta, args.eps)


def _manifest(args, spec=None, grid=None) -> RunManifest:
    return RunManifest(
        command=args.command, fixture=getattr(args, "fixture", None), params=_model_params(args),
        condition=None if spec is None else spec.kind,
        hyperparameters={} if spec is None else {k: v for k, v in spec.hyper.items()},
        solver_options=asdict(_options(args)) if hasattr(args, "sdp_iters") else {},
        grid=grid, argv=sys.argv[1:])


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, doc: dict) -> None:
    path.write_text(json.dumps({**doc, "manifest": MANIFEST}, indent=2, default=float))


def region_for(spec: ConditionSpec, model) -> RegionSpec:
    """Validity region in which the condition's Lyapunov function decreases."""
    if spec.kind in ("tanaka", "mozelli"):
        return RegionSpec.omega(model, spec.phi)
    if spec.kind in ("vertex", "overbound"):
        return RegionSpec.hb(model, spec.b)
    if spec.kind == "ball":
        return RegionSpec.ueta(model, spec.eta)
    if spec.kind == "combined":
        return RegionSpec.intersection([RegionSpec.omega(model, spec.phi), RegionSpec.hb(model, spec.b)])
    return RegionSpec.hb(model, 1.0)  # the whole box


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    model = fixture(args.fixture, **_model_params(args))
    spec = _spec(args)
    problem = spec.build(model)
    verdict = solve(problem, _options(args))
    out = _outdir(args)
    print(f"{args.fixture} {spec.label()}: {verdict.status.value}")
    doc = {"status": verdict.status.value, "condition": spec.label(), "stats": verdict.stats}
    if verdict.margins is not None:
        worst = verdict.margins.worst
        print(f"  margin eps = {problem.margin:.3g}; worst constraint {worst.label!r} slack {worst.slack:.3g}")
        doc["margins"] = [asdict(c) for c in verdict.margins.constraints]
    if verdict.feasible:
        doc["certificate"] = {k: v.tolist() for k, v in verdict.named().items()}
    _dump(out / "certificate.json", doc)
    man = _manifest(args, spec)
    man.outputs = ["certificate.json"]
    man.wall_time = time.perf_counter() - t0
    man.write(out)
    return EXIT[verdict.status]


def cmd_maximize(args) -> int:
    t0 = time.perf_counter()
    model = fixture(args.fixture, **_model_params(args))
    spec = _spec(args)
    try:
        res = bisect_hyper(model, spec, args.param, args.lo, args.hi, args.tol, _options(args))
    except NoFeasibleBracket as exc:
        print(str(exc))
        return 1
    print(f"{res.param_name}* = {res.best:.6g}  (bracket [{res.lo:.6g}, {res.hi:.6g}], {len(res.trace)} solves)")
    out = _outdir(args)
    _dump(out / "maximize.json", res.to_dict())
    man = _manifest(args, spec)
    man.outputs = ["maximize.json"]
    man.wall_time = time.perf_counter() - t0
    man.write(out)
    return 0


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    spec = _spec(args)
    nx, ny = args.grid
    axes = (Axis(args.x_param, *args.x_range, nx), Axis(args.y_param, *args.y_range, ny))
    opts = _options(args)
    res = sweep(args.fixture, axes, spec, opts, threads=args.threads)
    out = _outdir(args)
    res.to_csv(out / "sweep.csv")
    outputs = ["sweep.csv", "sweep.svg"]
    ref = None
    if args.reference_phi and spec.kind in KINDS:
        ref = sweep(args.fixture, axes, ConditionSpec("mozelli", phi=(args.reference_phi,)), opts,
                    threads=args.threads)
        ref.to_csv(out / "reference.csv")
        outputs.append("reference.csv")
        print(compare_sweeps(ref, res).summary())
    if ref is not None:
        sweep_svg(out / "sweep.svg", ref, res)
    else:
        sweep_svg(out / "sweep.svg", res)
    print(f"{spec.label()}: {res.counts()} over {nx}x{ny} cells")
    man = _manifest(args, spec, [nx, ny])
    man.outputs = outputs
    man.wall_time = time.perf_counter() - t0
    man.write(out)
    return 0


def _estimate(args):
    model = fixture(args.fixture, **_model_params(args))
    spec = _spec(args)
    verdict = solve(spec.build(model), _options(args))
    if not verdict.feasible:
        return spec, verdict, None
    lyap = LyapunovFn.from_certificate(model, spec.kind, verdict.named())
    return spec, verdict, largest_sublevel(lyap, region_for(spec, model), args.resolution)


def cmd_da(args) -> int:
    t0 = time.perf_counter()
    spec, verdict, est = _estimate(args)
    if est is None:
        print(f"{spec.label()}: {verdict.status.value}; no certificate, no estimate")
        return EXIT[verdict.status]
    out = _outdir(args)
    est.to_csv(out / "da.csv")
    outputs = ["da.csv", "da.json"]
    if est.lyapunov.model.n <= 2:
        est.to_svg(out / "da.svg")
        outputs.append("da.svg")
    _dump(out / "da.json", {
        "level": est.level, "region_level": est.region_level, "box_level": est.box_level,
        "region": est.region.describe(), "approximate": est.region.approximate,
        "cells": est.cell_count, "resolution": list(est.resolution),
        "lyapunov": est.lyapunov.to_dict(),
    })
    print(f"c* = {est.level:.6g} on {est.region.describe()} ({est.cell_count} grid cells inside)")
    man = _manifest(args, spec, list(est.resolution))
    man.outputs = outputs
    man.wall_time = time.perf_counter() - t0
    man.write(out)
    return 0


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    spec, verdict, est = _estimate(args)
    if est is None:
        print(f"{spec.label()}: {verdict.status.value}; nothing to validate")
        return EXIT[verdict.status]
    out = _outdir(args)
    audit = validate_da(est, args.samples, args.horizon, args.dt, args.audit_seed,
                        level=est.level * args.inflate)
    audit.to_json(out / "audit.json")
    print(f"c* = {audit.level:.6g}: {audit.fraction_converged:.1%} converged, "
          f"{audit.fraction_monotone:.1%} monotone, flags: {', '.join(audit.flags) or 'none'}")
    man = _manifest(args, spec, list(est.resolution))
    man.outputs = ["audit.json"]
    man.wall_time = time.perf_counter() - t0
    man.write(out)
    return 0 if audit.clean else 1


def cmd_reproduce(args) -> int:
    numbers = None
    if args.only:
        try:
            numbers = [int(k) for k in args.only.split(",")]
        except ValueError:
            raise UsageError("--only takes a comma list of criterion numbers") from None
        unknown = [k for k in numbers if k not in acceptance.CRITERIA]
        if unknown:
            raise UsageError(f"no criteria {unknown}")
    if args.list:
        for k, (title, _) in sorted(acceptance.CRITERIA.items()):
            if numbers is None or k in numbers:
                print(f"{k}. {title}")
        return 0
    results = acceptance.run_all(numbers, full=args.full)
    print()
    print(f"{'#':>2}  {'result':6}  {'seconds':>8}  criterion")
    for r in results:
        print(f"{r.number:>2}  {'PASS' if r.passed else 'FAIL':6}  {r.seconds:8.1f}  {r.title}")
    if args.out:
        Path(args.out).write_text(json.dumps(
            [{"number": r.number, "title": r.title, "passed": r.passed, "detail": r.detail,
              "seconds": r.seconds} for r in results], indent=2))
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"check": cmd_check, "maximize": cmd_maximize, "sweep": cmd_sweep, "da": cmd_da,
            "validate": cmd_validate, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, KeyError) as exc:
        print(f"tslyap: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
