import numpy as np
import pytest

from conftest import assert_sound
from tslyap.conditions import (KINDS, MAX_COMBINED_RULES, ConditionSpec, build, default_margin,
                               expected_constraint_count, spec_from_args)
from tslyap.fixtures import fixture
from tslyap.model import Box, FuzzyModel, MembershipFamily
from tslyap.sdp import SolverOptions, Status, solve

REFUTE = SolverOptions(restart_on="always")


def check(spec, model, options=None):
    prob = spec.build(model)
    v = solve(prob, options)
    assert_sound(prob, v)
    return v


def single_rule_hurwitz():
    mf = MembershipFamily(1, 2, lambda x: np.ones(x.shape[:-1] + (1,)),
                          lambda x: np.zeros(x.shape[:-1] + (1, 2)))
    return FuzzyModel([[[-1.0, 1.0], [0.0, -2.0]]], mf, Box([-1.0, -1.0], [1.0, 1.0]))


def test_spec_validation():
    with pytest.raises(ValueError):
        ConditionSpec("vertex")
    with pytest.raises(ValueError):
        ConditionSpec("vertex", b=0.1, phi=1.0)
    with pytest.raises(ValueError):
        ConditionSpec("vertex", b=1.5)
    with pytest.raises(ValueError):
        ConditionSpec("ball", eta=-1.0)
    with pytest.raises(ValueError):
        ConditionSpec("nope")
    s = spec_from_args("combined", phi="0.85", b="0.2,0.3,0.2,0.2")
    assert s.phi == (0.85,) and s.b == (0.2, 0.3, 0.2, 0.2)
    assert s.label() == "combined phi=0.85 b=0.2,0.3,0.2,0.2"


def test_per_rule_vector_length_checked(ex2):
    with pytest.raises(ValueError):
        ConditionSpec("vertex", b=(0.1, 0.2)).build(ex2)


def test_default_margin(ex2):
    assert default_margin(ex2) == pytest.approx(1e-6 * (1 + ex2.max_vertex_norm()))


@pytest.mark.parametrize("kind", KINDS)
def test_constraint_counts(ex2, kind):
    hyper = {"qlf": {}, "tanaka": {"phi": 1.0}, "mozelli": {"phi": 1.0}, "vertex": {"b": 0.1},
             "overbound": {"b": 0.1}, "ball": {"eta": 0.1}, "combined": {"phi": 1.0, "b": 0.1}}[kind]
    prob = build(ConditionSpec(kind, **hyper), ex2)
    assert len(prob.constraints) == expected_constraint_count(kind, ex2.r)
    assert expected_constraint_count("vertex", 4) == 17
    assert expected_constraint_count("combined", 4) == 4 + 16 + 16 * 10


def test_ball_structure(ex2):
    prob = ConditionSpec("ball", eta=0.5).build(ex2)
    names = {v.name: v for v in prob.variables}
    assert not names["M"].symmetric and names["P"].symmetric and names["G"].symmetric
    assert max(c.expr.size for c in prob.constraints) == (ex2.r + 1) * ex2.n


def test_combined_rule_guard():
    r = MAX_COMBINED_RULES + 1
    mf = MembershipFamily(r, 1, lambda x: np.full(x.shape[:-1] + (r,), 1.0 / r))
    model = FuzzyModel([[[-1.0]]] * r, mf, Box([-1.0], [1.0]))
    with pytest.raises(ValueError):
        ConditionSpec("combined", phi=1.0, b=0.1).build(model)


def test_single_rule_hurwitz_all_local_feasible():
    model = single_rule_hurwitz()
    assert check(ConditionSpec("qlf"), model).feasible
    assert check(ConditionSpec("tanaka", phi=0.1), model).feasible
    assert check(ConditionSpec("vertex", b=0.0), model).feasible
    assert check(ConditionSpec("overbound", b=0.0), model).feasible


def test_b_zero_reduces_to_nominal(ex2):
    assert check(ConditionSpec("vertex", b=0.0), ex2).feasible
    assert check(ConditionSpec("overbound", b=0.0), ex2).feasible


def test_example2_regression_baseline(ex2):
    # frozen from a first run: no common quadratic function exists at this point
    assert check(ConditionSpec("qlf"), ex2).status is Status.INFEASIBLE


def test_example2_known_points(ex2):
    assert check(ConditionSpec("mozelli", phi=4.07), ex2).feasible
    assert check(ConditionSpec("mozelli", phi=6.0), ex2).status is not Status.FEASIBLE
    assert check(ConditionSpec("vertex", b=0.2603), ex2).feasible
    assert check(ConditionSpec("ball", eta=1e-3), ex2).feasible


def test_overbound_implies_vertex(ex2):
    for b in (0.05, 0.1, 0.2, 0.3):
        if check(ConditionSpec("overbound", b=b), ex2).feasible:
            assert check(ConditionSpec("vertex", b=b), ex2).feasible


@pytest.mark.parametrize("phi", [0.1, 1.0, 10.0])
def test_scalar_sine_flf_infeasible(phi):
    model = fixture("scalar-sine")
    for kind in ("tanaka", "mozelli"):
        assert check(ConditionSpec(kind, phi=phi), model, REFUTE).status is not Status.FEASIBLE


def test_vdp_tanaka_infeasible():
    assert check(ConditionSpec("tanaka", phi=0.5), fixture("vdp", mu=-2.0), REFUTE).status is not Status.FEASIBLE


def test_ball_small_eta_feasible():
    assert check(ConditionSpec("ball", eta=1e-4), fixture("vdp", mu=-2.0)).feasible


def test_combined_dominates_parents(ex2):
    moz = check(ConditionSpec("mozelli", phi=0.85), ex2)
    vert = check(ConditionSpec("vertex", b=0.2), ex2)
    assert moz.feasible and vert.feasible
    assert check(ConditionSpec("combined", phi=0.85, b=0.2), ex2).feasible
    # any b with the FLF part feasible, any phi with the vertex part feasible
    assert check(ConditionSpec("combined", phi=0.85, b=0.9), ex2).feasible
    assert check(ConditionSpec("combined", phi=50.0, b=0.2), ex2).feasible


def test_combined_certificate_names(ex2):
    v = check(ConditionSpec("combined", phi=0.85, b=0.2), ex2)
    assert set(v.named()) == {"P0", "P1", "P2", "P3", "P4", "M", "N", "W"}


@pytest.mark.parametrize("kind,hyper", [
    ("qlf", {}), ("tanaka", {"phi": 1.0}), ("mozelli", {"phi": 1.0}), ("vertex", {"b": 0.5}),
    ("overbound", {"b": 0.5}), ("ball", {"eta": 0.5}), ("combined", {"phi": 1.0, "b": 0.5}),
])
def test_cubic_never_feasible(kind, hyper):
    assert check(ConditionSpec(kind, **hyper), fixture("cubic"), REFUTE).status is not Status.FEASIBLE


@pytest.mark.parametrize("seed", range(10))
def test_converse_small_hyper(seed):
    model = fixture("random2", seed=seed)
    assert check(ConditionSpec("vertex", b=1e-3), model).feasible
    assert check(ConditionSpec("overbound", b=1e-3), model).feasible
    assert check(ConditionSpec("ball", eta=1e-6), model).feasible


def test_mozelli_feasible_implies_vertex_for_small_b():
    from tslyap.search import bisect_hyper
    for a, b in [(-8.0, 100.0), (-2.0, 20.0), (-6.0, 160.0)]:
        model = fixture("example2", a=a, b=b)
        if check(ConditionSpec("mozelli", phi=0.85), model).feasible:
            res = bisect_hyper(model, ConditionSpec("vertex", b=0.1), "b", tol=1e-2)
            assert res.best > 0
