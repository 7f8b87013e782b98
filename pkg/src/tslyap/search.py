"""Largest feasible hyperparameter by bisection, and feasibility sweeps over model parameters."""
from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .conditions import ConditionSpec
from .fixtures import fixture
from .model import FuzzyModel
from .sdp import FeasibilityVerdict, SolverOptions, Status, solve

# default brackets; phi and eta are unbounded above, so the upper end may be doubled
DEFAULT_BRACKETS = {"phi": (0.0, 20.0), "b": (0.0, 1.0), "eta": (0.0, 4.0)}
PARAM_OF_KIND = {"tanaka": "phi", "mozelli": "phi", "vertex": "b", "overbound": "b", "ball": "eta"}


class NoFeasibleBracket(ValueError):
    pass


def worker_count() -> int:
    env = os.environ.get("TSLYAP_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@dataclass
class BisectionResult:
    param_name: str
    lo: float
    hi: float
    best: float
    trace: list = field(default_factory=list)  # (value, status code)
    best_verdict: Optional[FeasibilityVerdict] = field(default=None, repr=False)
    spec: Optional[ConditionSpec] = None

    @property
    def best_spec(self) -> ConditionSpec:
        return self.spec.with_value(self.param_name, self.best)

    def to_dict(self) -> dict:
        return {"param": self.param_name, "lo": self.lo, "hi": self.hi, "best": self.best,
                "trace": [[v, s] for v, s in self.trace]}


def _uniform(spec: ConditionSpec, param: str, value: float) -> ConditionSpec:
    return spec.with_value(param, value if param == "eta" else (value,))


def bisect_hyper(model: FuzzyModel, spec: ConditionSpec, param: Optional[str] = None,
                 lo: Optional[float] = None, hi: Optional[float] = None, tol: float = 1e-3,
                 options: Optional[SolverOptions] = None, max_expand: int = 8,
                 observer: Optional[Callable] = None) -> BisectionResult:
    """Largest uniform value of ``param`` keeping ``spec`` feasible on ``model``.

    Feasibility is assumed downward closed in the parameter. ``lo = 0`` is taken as the
    feasible limit without solving. Stops when ``hi - lo <= tol * hi``. ``observer`` is
    called with ``(problem, verdict)`` after every solve.
    """
    param = param or PARAM_OF_KIND.get(spec.kind)
    if param is None:
        raise ValueError(f"condition {spec.kind!r} needs an explicit parameter to bisect")
    dlo, dhi = DEFAULT_BRACKETS[param]
    lo = dlo if lo is None else float(lo)
    hi = dhi if hi is None else float(hi)
    if not hi > lo >= 0:
        raise ValueError("need 0 <= lo < hi")
    trace = []
    best_verdict = None

    def probe(v):
        problem = _uniform(spec, param, v).build(model)
        verdict = solve(problem, options)
        if observer is not None:
            observer(problem, verdict)
        trace.append((v, verdict.status.code))
        return verdict

    if lo > 0:
        best_verdict = probe(lo)
        if not best_verdict.feasible:
            raise NoFeasibleBracket(f"{spec.kind} is not feasible at {param}={lo:g}: no feasible bracket")
    top = probe(hi)
    expansions = 0
    while top.feasible:
        if param == "b" and hi >= 1.0:
            return BisectionResult(param, hi, hi, hi, trace, top, spec)
        if expansions >= max_expand:
            raise ValueError(f"{param} still feasible at {hi:g}; no upper bracket found")
        lo, best_verdict = hi, top
        hi = min(2 * hi, 1.0) if param == "b" else 2 * hi
        top = probe(hi)
        expansions += 1
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        verdict = probe(mid)
        if verdict.feasible:
            lo, best_verdict = mid, verdict
        else:
            hi = mid
    if best_verdict is None:
        raise NoFeasibleBracket(f"{spec.kind} never feasible on ({lo:g}, {hi:g}]: no feasible bracket")
    return BisectionResult(param, lo, hi, lo, trace, best_verdict, spec)


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class SweepResult:
    axes: tuple
    verdicts: np.ndarray  # str codes F / I / U, shape (count_0, count_1)
    condition: ConditionSpec
    wall_times: np.ndarray
    fixture_name: str = ""
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(ax.count for ax in self.axes)
        if self.verdicts.shape != shape or self.wall_times.shape != shape:
            raise ValueError("verdict matrix does not match axis counts")

    @property
    def feasible(self) -> np.ndarray:
        return self.verdicts == Status.FEASIBLE.code

    def counts(self) -> dict:
        codes, k = np.unique(self.verdicts, return_counts=True)
        return {str(c): int(n) for c, n in zip(codes, k)}

    def cell_params(self, i: int, j: int) -> dict:
        a0, a1 = self.axes
        return {**self.fixed, a0.name: float(a0.values[i]), a1.name: float(a1.values[j])}

    def to_csv(self, path) -> None:
        a0, a1 = self.axes
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([a0.name, a1.name, "verdict", "seconds"])
            for i, u in enumerate(a0.values):
                for j, v in enumerate(a1.values):
                    w.writerow([f"{u:g}", f"{v:g}", self.verdicts[i, j], f"{self.wall_times[i, j]:.4f}"])

    def to_dict(self) -> dict:
        return {
            "fixture": self.fixture_name,
            "fixed": self.fixed,
            "condition": self.condition.label(),
            "axes": [vars(ax) for ax in self.axes],
            "verdicts": self.verdicts.tolist(),
            "seconds": self.wall_times.round(4).tolist(),
        }


def sweep(fixture_name: str, axes, spec: ConditionSpec, options: Optional[SolverOptions] = None,
          fixed: Optional[dict] = None, threads: Optional[int] = None,
          observer: Optional[Callable] = None) -> SweepResult:
    """One independent verdict per grid cell; solver trouble becomes ``U``, never an abort."""
    axes = tuple(ax if isinstance(ax, Axis) else Axis(*ax) for ax in axes)
    if len(axes) != 2:
        raise ValueError("sweeps run over exactly two parameters")
    fixed = dict(fixed or {})
    shape = (axes[0].count, axes[1].count)
    verdicts = np.full(shape, Status.INCONCLUSIVE.code, dtype="<U1")
    times = np.zeros(shape)
    # fail fast on a bad fixture/parameter combination before spawning work
    fixture(fixture_name, **{**fixed, axes[0].name: axes[0].lo, axes[1].name: axes[1].lo})

    def cell(idx):
        i, j = idx
        t0 = time.perf_counter()
        params = {**fixed, axes[0].name: float(axes[0].values[i]), axes[1].name: float(axes[1].values[j])}
        try:
            model = fixture(fixture_name, **params)
            problem = spec.build(model)
            verdict = solve(problem, options)
            if observer is not None:
                observer(problem, verdict)
        except Exception as exc:  # a broken cell is recorded, the sweep goes on
            verdict = FeasibilityVerdict(Status.INCONCLUSIVE, stats={"error": str(exc)})
        verdicts[i, j] = verdict.status.code
        times[i, j] = time.perf_counter() - t0

    cells = [(i, j) for i in range(shape[0]) for j in range(shape[1])]
    with ThreadPoolExecutor(max_workers=threads or worker_count()) as pool:
        list(pool.map(cell, cells))
    return SweepResult(axes, verdicts, spec, times, fixture_name, fixed)


@dataclass
class InclusionReport:
    a_label: str
    b_label: str
    a_not_b: list  # cells feasible under a but not b: (i, j, verdict of b)
    b_not_a: list
    cells: int

    @property
    def a_in_b(self) -> bool:
        return not self.a_not_b

    @property
    def b_in_a(self) -> bool:
        return not self.b_not_a

    @property
    def relation(self) -> str:
        if self.a_in_b and self.b_in_a:
            return "equal"
        if self.a_in_b:
            return "a<=b"
        if self.b_in_a:
            return "b<=a"
        return "neither"

    def a_in_b_within(self, fraction: float = 0.02) -> bool:
        """``a <= b`` up to ``fraction`` violating cells, each one an Inconclusive verdict of ``b``."""
        return (len(self.a_not_b) <= fraction * self.cells
                and all(code == Status.INCONCLUSIVE.code for *_, code in self.a_not_b))

    def summary(self) -> str:
        return (f"{self.a_label} vs {self.b_label}: {self.relation} "
                f"({len(self.a_not_b)} cells only in a, {len(self.b_not_a)} only in b)")


def compare_sweeps(a: SweepResult, b: SweepResult) -> InclusionReport:
    """Inclusion between the Feasible sets of two sweeps; Inconclusive counts as not feasible."""
    if a.axes != b.axes:
        raise ValueError("sweeps have different axes")
    fa, fb = a.feasible, b.feasible
    a_not_b = [(int(i), int(j), str(b.verdicts[i, j])) for i, j in zip(*np.nonzero(fa & ~fb))]
    b_not_a = [(int(i), int(j), str(a.verdicts[i, j])) for i, j in zip(*np.nonzero(fb & ~fa))]
    return InclusionReport(a.condition.label(), b.condition.label(), a_not_b, b_not_a, fa.size)


def sweep_svg(path, reference: SweepResult, other: Optional[SweepResult] = None, title: str = "") -> None:
    """Scatter of feasible cells: filled dots for ``reference``, open circles for ``other``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    a0, a1 = reference.axes
    U, W = np.meshgrid(a0.values, a1.values, indexing="ij")
    fig, ax = plt.subplots(figsize=(5, 4))
    if other is not None:
        m = other.feasible
        ax.scatter(U[m], W[m], s=70, facecolors="none", edgecolors="tab:blue",
                   label=other.condition.label())
    m = reference.feasible
    ax.scatter(U[m], W[m], s=18, color="k", label=reference.condition.label())
    ax.set_xlabel(a0.name)
    ax.set_ylabel(a1.name)
    ax.set_xlim(a0.lo - 0.05 * (a0.hi - a0.lo), a0.hi + 0.05 * (a0.hi - a0.lo))
    ax.set_ylim(a1.lo - 0.05 * (a1.hi - a1.lo), a1.hi + 0.05 * (a1.hi - a1.lo))
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
