"""Acceptance criteria, runnable from the test-suite and from ``tslyap reproduce``.

Every criterion returns a :class:`CriterionResult`; tolerances are fixed here and are not
configurable. ``Context`` shares expensive intermediate results (bisections, sweeps) and
collects every Feasible verdict so the certificate-soundness criterion can re-check them.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .conditions import ConditionSpec
from .fixtures import fixture
from .regions import LyapunovFn, RegionSpec, largest_sublevel
from .sdp import SolverOptions, Status, solve, validate_certificate
from .search import Axis, bisect_hyper, compare_sweeps, sweep
from .verify import integrate, validate_da

EXAMPLE2_POINT = {"a": -8.0, "b": 100.0}
TARGETS = {"phi": 4.0789, "b": 0.2603, "eta": 1.1645}
MAXIMA_REL_TOL = 0.05
MAXIMA_BUDGET = 120.0
SWEEP_BUDGET = 15 * 60.0
INCLUSION_TOL = 0.02
DA_SAMPLES = 500
DA_RESOLUTION = 401
ORACLE_TOL = 1e-6


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    parts: list = field(default_factory=list)  # (label, passed, detail)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title} | {self.detail}"


class Context:
    def __init__(self, full: bool = False, options: Optional[SolverOptions] = None):
        self.full = full
        self.options = options or SolverOptions()
        self.refute = SolverOptions(**{**vars(self.options), "restart_on": "always"})
        self.feasible_log = []  # (source, problem, verdict)
        self.results = {}
        self.bisections = {}
        self.sweeps = {}
        self._lock = threading.Lock()

    def observe(self, source: str) -> Callable:
        def record(problem, verdict):
            if verdict.feasible:
                with self._lock:
                    self.feasible_log.append((source, problem, verdict))
        return record

    def solve(self, source: str, problem, options=None):
        verdict = solve(problem, options or self.options)
        self.observe(source)(problem, verdict)
        return verdict

    def ensure(self, *numbers) -> None:
        for k in numbers:
            if k not in self.results:
                run_criterion(k, self)


def criterion_1(ctx: Context) -> CriterionResult:
    model = fixture("example2", **EXAMPLE2_POINT)
    specs = {
        "phi": ConditionSpec("mozelli", phi=(1.0,)),
        "b": ConditionSpec("vertex", b=(0.1,)),
        "eta": ConditionSpec("ball", eta=0.1),
    }
    t0 = time.perf_counter()
    parts = []
    for param, spec in specs.items():
        res = bisect_hyper(model, spec, param, options=ctx.options, observer=ctx.observe(f"c1 {param}"))
        ctx.bisections[param] = res
        err = abs(res.best - TARGETS[param]) / TARGETS[param]
        parts.append((f"{param}*", err <= MAXIMA_REL_TOL,
                      f"{res.best:.5g} vs {TARGETS[param]} (rel. err {err:.1%})"))
    elapsed = time.perf_counter() - t0
    parts.append(("runtime", elapsed < MAXIMA_BUDGET, f"{elapsed:.1f}s < {MAXIMA_BUDGET:.0f}s"))
    ok = all(p[1] for p in parts)
    detail = "; ".join(f"{lab} {d}{'' if good else ' FAIL'}" for lab, good, d in parts)
    return CriterionResult(1, "hyperparameter maxima at (a,b)=(-8,100)", ok, detail, elapsed, parts)


SWEEP_SPECS = {
    "mozelli": ConditionSpec("mozelli", phi=(0.85,)),
    "vertex0.1": ConditionSpec("vertex", b=(0.1,)),
    "vertex0.2": ConditionSpec("vertex", b=(0.2,)),
    "overbound0.1": ConditionSpec("overbound", b=(0.1,)),
    "ball0.9": ConditionSpec("ball", eta=0.9),
    "combined": ConditionSpec("combined", phi=(0.85,), b=(0.2,)),
}


def example2_axes(count: int = 11):
    return (Axis("a", -10.0, 0.0, count), Axis("b", 0.0, 200.0, count))


def _definite_both_ways(report) -> bool:
    one = any(code == Status.INFEASIBLE.code for *_, code in report.a_not_b)
    other = any(code == Status.INFEASIBLE.code for *_, code in report.b_not_a)
    return one and other


def criterion_2(ctx: Context) -> CriterionResult:
    axes = example2_axes(21 if ctx.full else 11)
    t0 = time.perf_counter()
    for key, spec in SWEEP_SPECS.items():
        ctx.sweeps[key] = sweep("example2", axes, spec, ctx.options, observer=ctx.observe(f"c2 {key}"))
    elapsed = time.perf_counter() - t0
    moz = ctx.sweeps["mozelli"]
    parts = []
    for tag, key in (("(i)", "vertex0.1"), ("(iii)", "overbound0.1"), ("(iv)", "ball0.9"), ("(v)", "combined")):
        rep = compare_sweeps(moz, ctx.sweeps[key])
        parts.append((f"{tag} mozelli <= {key}", rep.a_in_b_within(INCLUSION_TOL),
                      f"{len(rep.a_not_b)} violating of {moz.feasible.sum()} feasible"))
    rep = compare_sweeps(moz, ctx.sweeps["vertex0.2"])
    parts.insert(1, ("(ii) mozelli vs vertex0.2 neither", _definite_both_ways(rep),
                     f"{len(rep.a_not_b)} only mozelli, {len(rep.b_not_a)} only vertex"))
    parts.append(("runtime", elapsed < SWEEP_BUDGET, f"{elapsed:.0f}s < {SWEEP_BUDGET:.0f}s"))
    ok = all(p[1] for p in parts)
    detail = "; ".join(f"{lab}: {'ok' if good else 'FAIL'} ({d})" for lab, good, d in parts)
    return CriterionResult(2, "inclusion sweeps on the (a,b) grid", ok, detail, elapsed, parts)


CUBIC_LEVELS = (1e-3, 1e-2, 1e-1, 0.5, 1.0)
PHI_LEVELS = (0.1, 1.0, 10.0)


def limitation_probes():
    """All condition/hyperparameter pairs the limitation suite tries on the cubic fixture."""
    out = [ConditionSpec("qlf")]
    out += [ConditionSpec(k, phi=(p,)) for k in ("tanaka", "mozelli") for p in PHI_LEVELS]
    out += [ConditionSpec(k, b=(v,)) for k in ("vertex", "overbound") for v in CUBIC_LEVELS]
    out += [ConditionSpec("ball", eta=v) for v in CUBIC_LEVELS]
    out += [ConditionSpec("combined", phi=(p,), b=(v,)) for p in PHI_LEVELS for v in CUBIC_LEVELS]
    return out


def criterion_3(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    parts = []
    cubic = fixture("cubic")
    bad = [s.label() for s in limitation_probes()
           if ctx.solve("c3 cubic", s.build(cubic), ctx.refute).feasible]
    parts.append(("cubic: all kinds non-feasible", not bad, f"feasible at {bad}" if bad else "0 feasible"))
    sine = fixture("scalar-sine")
    bad = [s.label() for s in (ConditionSpec(k, phi=(p,)) for k in ("tanaka", "mozelli") for p in PHI_LEVELS)
           if ctx.solve("c3 sine", s.build(sine), ctx.refute).feasible]
    parts.append(("scalar-sine: FLF non-feasible", not bad, f"feasible at {bad}" if bad else "0 feasible"))
    v = ctx.solve("c3 sine", ConditionSpec("vertex", b=(0.05,)).build(sine))
    parts.append(("scalar-sine: vertex b=0.05 feasible", v.feasible, v.status.value))
    vdp = fixture("vdp", mu=-2.0)
    bad = [s.label() for s in (ConditionSpec(k, phi=(p,)) for k in ("tanaka", "mozelli") for p in PHI_LEVELS)
           if ctx.solve("c3 vdp", s.build(vdp), ctx.refute).feasible]
    parts.append(("vdp: FLF non-feasible", not bad, f"feasible at {bad}" if bad else "0 feasible"))
    small = [ConditionSpec("vertex", b=(1e-3,)), ConditionSpec("overbound", b=(1e-3,)),
             ConditionSpec("ball", eta=1e-4)]
    miss = [s.label() for s in small if not ctx.solve("c3 vdp", s.build(vdp)).feasible]
    parts.append(("vdp: local QLF feasible", not miss, f"not feasible: {miss}" if miss else "3/3 feasible"))
    ok = all(p[1] for p in parts)
    detail = "; ".join(f"{lab}: {'ok' if good else 'FAIL'} ({d})" for lab, good, d in parts)
    return CriterionResult(3, "fundamental-limitation suite", ok, detail, time.perf_counter() - t0, parts)


CONVERSE_MODELS = 50


def criterion_4(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    specs = [ConditionSpec("vertex", b=(1e-3,)), ConditionSpec("overbound", b=(1e-3,)),
             ConditionSpec("ball", eta=1e-6)]
    failures = []
    for seed in range(CONVERSE_MODELS):
        model = fixture("random2", seed=seed)
        for s in specs:
            if not ctx.solve("c4", s.build(model)).feasible:
                failures.append((seed, s.kind))
    total = CONVERSE_MODELS * len(specs)
    ok = not failures
    detail = f"{total - len(failures)}/{total} feasible" + (f"; failures {failures}" if failures else "")
    return CriterionResult(4, "converse property on random Hurwitz models", ok, detail,
                           time.perf_counter() - t0)


def criterion_5(ctx: Context) -> CriterionResult:
    ctx.ensure(1, 2, 3, 4)
    t0 = time.perf_counter()
    bad = []
    for source, problem, verdict in ctx.feasible_log:
        report = validate_certificate(problem, verdict.certificate)
        if not report.passed:
            bad.append((source, problem.name, report.worst.label))
    ok = not bad and len(ctx.feasible_log) > 0
    detail = f"{len(ctx.feasible_log)} Feasible certificates re-validated, {len(bad)} failures"
    if bad:
        detail += f": {bad[:5]}"
    return CriterionResult(5, "certificate soundness", ok, detail, time.perf_counter() - t0)


def _da(model, bis, region):
    spec = bis.best_spec
    lyap = LyapunovFn.from_certificate(model, spec.kind, bis.best_verdict.named())
    return largest_sublevel(lyap, region, DA_RESOLUTION)


def criterion_6(ctx: Context) -> CriterionResult:
    ctx.ensure(1)
    t0 = time.perf_counter()
    model = fixture("example2", **EXAMPLE2_POINT)
    phi, eta = ctx.bisections["phi"], ctx.bisections["eta"]
    moz = _da(model, phi, RegionSpec.omega(model, phi.best))
    ball = _da(model, eta, RegionSpec.ueta(model, eta.best))
    parts = []
    for name, est in (("mozelli", moz), ("ball", ball)):
        audit = validate_da(est, DA_SAMPLES)
        parts.append((f"{name} DA audit", audit.clean,
                      f"{audit.fraction_converged:.0%} converged, {audit.fraction_monotone:.0%} monotone"))
    m_mask, b_mask = moz.sublevel_mask, ball.sublevel_mask
    contained = bool(np.all(b_mask | ~m_mask))
    strict = contained and b_mask.sum() > m_mask.sum()
    parts.append(("ball set strictly contains mozelli set", strict,
                  f"cells {b_mask.sum()} vs {m_mask.sum()}, {np.count_nonzero(m_mask & ~b_mask)} mozelli cells outside"))
    ok = all(p[1] for p in parts)
    detail = (f"phi*={phi.best:.5g}, eta*={eta.best:.5g} (bisected); "
              + "; ".join(f"{lab}: {'ok' if good else 'FAIL'} ({d})" for lab, good, d in parts))
    return CriterionResult(6, "domain-of-attraction audit", ok, detail, time.perf_counter() - t0, parts)


def criterion_7(ctx: Context) -> CriterionResult:
    t0 = time.perf_counter()
    x0 = 0.5
    rep = integrate(fixture("cubic"), [x0], horizon=10.0, dt=1e-3)
    errs = {}
    for T in (1.0, 10.0):
        k = int(np.argmin(np.abs(rep.t - T)))
        errs[T] = abs(rep.x[k, 0] - x0 / np.sqrt(1 + 2 * x0 ** 2 * T))
    ok = all(e <= ORACLE_TOL for e in errs.values())
    detail = ", ".join(f"|err(t={T:g})| = {e:.2e}" for T, e in errs.items()) + f" (tol {ORACLE_TOL:g})"
    return CriterionResult(7, "RK4 against the cubic closed form", ok, detail, time.perf_counter() - t0)


CRITERIA = {
    1: ("hyperparameter maxima", criterion_1),
    2: ("inclusion sweeps", criterion_2),
    3: ("fundamental limitation", criterion_3),
    4: ("converse property", criterion_4),
    5: ("certificate soundness", criterion_5),
    6: ("DA audit", criterion_6),
    7: ("integrator oracle", criterion_7),
}


def run_criterion(number: int, ctx: Context) -> CriterionResult:
    if number not in CRITERIA:
        raise KeyError(f"no criterion {number}")
    result = CRITERIA[number][1](ctx)
    ctx.results[number] = result
    return result


def run_all(numbers=None, full: bool = False, stream: Optional[Callable] = print,
            options: Optional[SolverOptions] = None) -> list:
    ctx = Context(full=full, options=options)
    out = []
    for k in numbers or sorted(CRITERIA):
        res = ctx.results.get(k) or run_criterion(k, ctx)
        out.append(res)
        if stream is not None:
            stream(res.line())
    return out
