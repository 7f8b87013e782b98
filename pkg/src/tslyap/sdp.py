"""Feasibility of :class:`~tslyap.lmi.LmiProblem` via a conic solver, with independent checks.

Each problem is posed as ``min t`` with every strict constraint shifted by ``t I`` and the
decision matrices confined to a unit spectral-norm ball (all conditions here are
homogeneous, so the ball only fixes scale). A returned certificate is re-checked with
dense eigenvalues before it is believed.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import cvxpy as cp
import numpy as np

from .lmi import NEG, POS, LmiProblem

log = logging.getLogger(__name__)


class Status(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"

    @property
    def code(self) -> str:
        return {"feasible": "F", "infeasible": "I", "inconclusive": "U"}[self.value]


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 200
    tol: float = 1e-8
    restarts: int = 5
    # "inconclusive": restart only when the first attempt is undecided; "always": also
    # keep searching after an infeasible verdict (used when asserting infeasibility)
    restart_on: str = "inconclusive"
    solver: str = "CLARABEL"
    seed: int = 0


@dataclass
class ConstraintMargin:
    label: str
    sense: str
    min_eig: float
    max_eig: float
    threshold: float
    passed: bool

    @property
    def slack(self) -> float:
        """Distance to the pass threshold; negative means failed."""
        if self.sense == NEG:
            return self.threshold - self.max_eig
        return self.min_eig - self.threshold


@dataclass
class MarginReport:
    margin: float
    constraints: list[ConstraintMargin]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    @property
    def worst(self) -> Optional[ConstraintMargin]:
        return min(self.constraints, key=lambda c: c.slack, default=None)


@dataclass
class FeasibilityVerdict:
    status: Status
    certificate: Optional[dict] = None
    margins: Optional[MarginReport] = None
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE

    def named(self) -> dict[str, np.ndarray]:
        if not self.certificate:
            return {}
        return {v.name: np.asarray(X) for v, X in self.certificate.items()}


def validate_certificate(problem: LmiProblem, assignment: Mapping) -> MarginReport:
    """Dense eigenvalue check of every constraint at ``assignment`` against ``eps/2``."""
    eps = problem.margin
    out = []
    for c in problem.constraints:
        S = c.expr.evaluate(assignment)
        w = np.linalg.eigvalsh(S)
        lo, hi = float(w[0]), float(w[-1])
        if c.sense == NEG:
            thr, ok = -eps / 2, hi <= -eps / 2
        elif c.sense == POS:
            thr, ok = eps / 2, lo >= eps / 2
        else:
            thr, ok = 0.0, lo >= 0.0
        out.append(ConstraintMargin(c.label, c.sense, lo, hi, thr, bool(ok)))
    return MarginReport(eps, out)


def _psd(expr) -> cp.Constraint:
    return (expr + expr.T) / 2 >> 0


def _attempt(problem: LmiProblem, compiled, options: SolverOptions, weights):
    _, nz = problem.offsets()
    scale = max((np.abs(F).max(initial=0.0) for _, F in compiled), default=1.0) or 1.0
    eps = problem.margin / scale
    z = cp.Variable(nz)
    t = cp.Variable()
    cons = []
    for (C, F), c in zip(compiled, problem.constraints):
        m = C.shape[0]
        E = C / scale + cp.reshape(F / scale @ z, (m, m), order="C")
        eye = np.eye(m)
        if c.sense == NEG:
            cons.append(_psd(t * eye - E))
        elif c.sense == POS:
            cons.append(_psd(E + t * eye))
        else:
            # non-strict: keep a sliver of room so round-off cannot push it negative
            cons.append(_psd(E - 0.1 * eps * eye))
    offsets, _ = problem.offsets()
    for v, w in zip(problem.variables, weights):
        k = offsets[id(v)]
        B = np.zeros((v.n * v.n, v.size))
        for j in range(v.size):
            e = np.zeros(v.size)
            e[j] = 1.0
            B[:, j] = v.from_vector(e).ravel()
        X = cp.reshape(B @ z[k:k + v.size], (v.n, v.n), order="C")
        W = np.diag(w)
        if v.symmetric:
            cons += [_psd(W - X), _psd(W + X)]
        else:
            cons.append(_psd(cp.bmat([[W, X], [X.T, W]])))
    prob = cp.Problem(cp.Minimize(t), cons)
    kwargs = {}
    if options.solver == "CLARABEL":
        kwargs = dict(max_iter=options.max_iters, tol_gap_abs=options.tol, tol_gap_rel=options.tol,
                      tol_feas=options.tol)
    elif options.solver == "SCS":
        kwargs = dict(max_iters=max(options.max_iters, 2000), eps=options.tol)
    prob.solve(solver=options.solver, **kwargs)
    stats = {
        "solver_status": prob.status,
        "t": None if t.value is None else float(t.value),
        "eps_scaled": eps,
        "scale": scale,
        "iterations": getattr(prob.solver_stats, "num_iters", None),
        "solve_time": getattr(prob.solver_stats, "solve_time", None),
    }
    zval = None if z.value is None else np.asarray(z.value, dtype=float)
    return prob.status, stats, zval


def _classify(problem, status, stats, zval):
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or zval is None or stats["t"] is None:
        return FeasibilityVerdict(Status.INCONCLUSIVE, stats=stats)
    tstar, eps = stats["t"], stats["eps_scaled"]
    if tstar <= -eps / 2:
        cert = problem.unpack(zval)
        report = validate_certificate(problem, cert)
        if report.passed:
            return FeasibilityVerdict(Status.FEASIBLE, cert, report, stats)
        stats["rejected"] = "certificate failed eigenvalue re-validation"
        return FeasibilityVerdict(Status.INCONCLUSIVE, cert, report, stats)
    if status == cp.OPTIMAL and tstar >= -eps / 10:
        # the best achievable margin is (numerically) nonpositive
        return FeasibilityVerdict(Status.INFEASIBLE, stats=stats)
    return FeasibilityVerdict(Status.INCONCLUSIVE, stats=stats)


def solve(problem: LmiProblem, options: Optional[SolverOptions] = None) -> FeasibilityVerdict:
    """Decide ``problem``; never raises on numerical trouble (returns Inconclusive)."""
    options = options or SolverOptions()
    t0 = time.perf_counter()
    try:
        compiled = problem.compile()
    except Exception as exc:  # malformed expressions are a caller bug, not a verdict
        raise ValueError(f"cannot compile problem {problem.name!r}: {exc}") from exc
    rng = np.random.default_rng(options.seed)
    attempts = []
    verdict = None
    for k in range(1 + max(options.restarts, 0)):
        if k == 0:
            weights = [np.ones(v.n) for v in problem.variables]
        else:
            weights = [10.0 ** rng.uniform(-1, 1, size=v.n) for v in problem.variables]
        try:
            status, stats, zval = _attempt(problem, compiled, options, weights)
            current = _classify(problem, status, stats, zval)
        except (cp.SolverError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            log.debug("solver breakdown on %s: %s", problem.name, exc)
            current = FeasibilityVerdict(Status.INCONCLUSIVE, stats={"error": str(exc)})
        attempts.append(current.status.value)
        if verdict is None or current.feasible or (
                verdict.status is Status.INCONCLUSIVE and current.status is Status.INFEASIBLE):
            verdict = current
        if current.feasible:
            break
        if current.status is Status.INFEASIBLE and options.restart_on != "always":
            break
    verdict.stats["attempts"] = attempts
    verdict.stats["wall_time"] = time.perf_counter() - t0
    return verdict
