import numpy as np
import pytest

from conftest import assert_sound
from tslyap.conditions import ConditionSpec, build_qlf_common
from tslyap.fixtures import fixture
from tslyap.lmi import NEG, AffineSymExpr, identity_problem, lyap_expr
from tslyap.model import Box, FuzzyModel, MembershipFamily
from tslyap.sdp import SolverOptions, Status, solve, validate_certificate


def single_rule(A):
    A = np.atleast_2d(A)
    n = A.shape[0]
    mf = MembershipFamily(1, n, lambda x: np.ones(x.shape[:-1] + (1,)),
                          lambda x: np.zeros(x.shape[:-1] + (1, n)))
    return FuzzyModel([A], mf, Box(-np.ones(n), np.ones(n)))


def test_identity_certificate_margin():
    prob, P = identity_problem(2, 1e-6)
    report = validate_certificate(prob, {P: np.eye(2)})
    assert report.passed
    assert report.worst.slack == pytest.approx(1 - 1e-6 / 2)
    assert report.constraints[0].min_eig == pytest.approx(1.0)


def test_corrupted_certificate_fails():
    prob, P = identity_problem(2)
    assert not validate_certificate(prob, {P: -np.eye(2)}).passed


def test_qlf_single_hurwitz_feasible():
    prob = build_qlf_common(single_rule([[-1.0, 2.0], [0.0, -3.0]]))
    v = solve(prob)
    assert v.status is Status.FEASIBLE
    assert_sound(prob, v)
    assert v.margins.passed


def test_qlf_cubic_infeasible():
    v = solve(build_qlf_common(fixture("cubic")))
    assert v.status is Status.INFEASIBLE
    assert v.certificate is None


def test_vertex_scalar_sine_feasible():
    prob = ConditionSpec("vertex", b=0.05).build(fixture("scalar-sine"))
    v = solve(prob)
    assert v.feasible
    assert_sound(prob, v)


def test_example2_vertex_certificate_passes(ex2):
    prob = ConditionSpec("vertex", b=0.2603).build(ex2)
    v = solve(prob)
    assert v.feasible
    assert validate_certificate(prob, v.certificate).passed
    assert set(v.named()) == {"P", "M"}


def test_determinism(ex2):
    prob = ConditionSpec("mozelli", phi=2.0).build(ex2)
    runs = [solve(prob).status for _ in range(3)]
    assert len(set(runs)) == 1


@pytest.mark.parametrize("b", [0.1, 0.25, 0.3])
def test_monotone_under_extra_constraints(ex2, b):
    base = ConditionSpec("vertex", b=b).build(ex2)
    more = ConditionSpec("vertex", b=b).build(ex2)
    P = next(v for v in more.variables if v.name == "P")
    more.add(lyap_expr(ex2.A[0], P), NEG, "extra")
    vb, vm = solve(base), solve(more)
    if vm.feasible:
        assert vb.feasible


def test_breakdown_is_inconclusive(ex2):
    prob = ConditionSpec("combined", phi=0.85, b=0.2).build(ex2)
    v = solve(prob, SolverOptions(max_iters=1, restarts=1))
    assert v.status is Status.INCONCLUSIVE
    assert v.stats["attempts"] == ["inconclusive", "inconclusive"]


def test_unknown_solver_is_inconclusive():
    prob, _ = identity_problem(2)
    v = solve(prob, SolverOptions(solver="NOT_A_SOLVER", restarts=0))
    assert v.status is Status.INCONCLUSIVE
    assert "error" in v.stats


def test_restarts_always_keeps_searching():
    v = solve(build_qlf_common(fixture("cubic")), SolverOptions(restart_on="always", restarts=5))
    assert v.status is not Status.FEASIBLE
    assert len(v.stats["attempts"]) == 6


def test_status_codes():
    assert [s.code for s in Status] == ["F", "I", "U"]


def test_psd_sense_validated():
    prob, P = identity_problem(1)
    prob.add(AffineSymExpr.var(P) * -1.0 + AffineSymExpr.const([[2.0]]), "psd", "P <= 2")
    assert validate_certificate(prob, {P: [[2.0]]}).passed
    assert not validate_certificate(prob, {P: [[2.5]]}).passed
