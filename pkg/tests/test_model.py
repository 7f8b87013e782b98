import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tslyap.fixtures import catalog, fixture
from tslyap.model import Box, FuzzyModel, MembershipFamily, OutOfRegionError, in_simplex

SMOOTH = [("example2", {"a": -8.0, "b": 100.0}), ("cubic", {}), ("decay", {}), ("vdp", {"mu": -2.0}),
          ("scalar-sine", {}), ("random2", {"seed": 3})]
ALL = SMOOTH + [("example5", {}), ("discontinuous", {})]


def test_box_validation():
    with pytest.raises(ValueError):
        Box([1.0], [2.0])  # origin outside
    with pytest.raises(ValueError):
        Box([0.0], [0.0])
    box = Box([-1.0, -2.0], [1.0, 2.0])
    assert box.n == 2 and box.origin_interior
    assert not Box([0.0], [1.0]).origin_interior
    assert box.contains(np.zeros(2))
    assert not box.contains([1.5, 0.0])


def test_box_grid_shape():
    box = Box([-1.0, -1.0], [1.0, 1.0])
    axes, X = box.grid(5)
    assert X.shape == (5, 5, 2)
    assert np.allclose(axes[0], np.linspace(-1, 1, 5))


@pytest.mark.parametrize("name,params", ALL)
def test_simplex_property(name, params):
    model = fixture(name, **params)
    X = model.region.sample(np.random.default_rng(0), 10_000)
    assert np.all(in_simplex(model.memberships(X), 1e-12))


@pytest.mark.parametrize("name,params", ALL)
def test_alpha_at_origin_matches_eval(name, params):
    mf = fixture(name, **params).memberships
    assert np.array_equal(mf.alpha_at_origin, mf(np.zeros(mf.n)))


@pytest.mark.parametrize("name,params", [p for p in SMOOTH if p[0] != "random2"])
def test_representation_matches_nonlinear_system(name, params):
    model = fixture(name, **params)
    assert model.reference_dynamics is not None
    X = model.region.sample(np.random.default_rng(1), 2000)
    assert np.allclose(model.eval_dynamics(X), model.reference_dynamics(X), rtol=0, atol=1e-10)


@pytest.mark.parametrize("name,params", ALL)
def test_deviation_sums_to_zero(name, params):
    model = fixture(name, **params)
    X = model.region.sample(np.random.default_rng(2), 500)
    assert np.allclose(model.membership_deviation(X).sum(axis=-1), 0.0, atol=1e-14)


def test_origin_is_equilibrium(ex2):
    assert np.array_equal(ex2.eval_dynamics(np.zeros(2)), np.zeros(2))


def test_cubic_dynamics_value():
    assert fixture("cubic").eval_dynamics([0.5]) == pytest.approx([-0.125])


def test_cubic_deviation_value():
    assert fixture("cubic").membership_deviation([0.5]) == pytest.approx([0.25, -0.25])


def test_example2_nominal(ex2):
    assert np.allclose(ex2.memberships.alpha_at_origin, 0.25)
    assert np.allclose(ex2.nominal_matrix(), [[-3.5, -4.0], [49.5, -5.0]])
    assert np.allclose(ex2.system_matrix(np.zeros(2)), ex2.A.mean(axis=0))
    assert np.allclose(ex2.region.lower, -np.pi / 2) and np.allclose(ex2.region.upper, np.pi / 2)


def test_nominal_matrices_of_small_fixtures():
    assert fixture("cubic").nominal_matrix() == pytest.approx(np.zeros((1, 1)))
    assert fixture("scalar-sine").nominal_matrix() == pytest.approx(-np.ones((1, 1)))
    cubic = fixture("cubic")
    assert cubic.A[:, 0, 0] == pytest.approx([-1.0, 0.0])
    assert np.allclose(cubic.region.lower, -1) and np.allclose(cubic.region.upper, 1)


@pytest.mark.parametrize("mu", [-0.1, -1.0, -2.0, -5.0])
def test_vdp_matrices_and_hurwitz(mu):
    model = fixture("vdp", mu=mu)
    assert np.allclose(model.A[0], [[0, 1], [-1, mu]])
    assert np.all(np.linalg.eigvals(model.nominal_matrix()).real < 0)


@pytest.mark.parametrize("seed", range(20))
def test_random2_nominal_is_hurwitz(seed):
    model = fixture("random2", seed=seed)
    assert np.linalg.eigvals(model.nominal_matrix()).real.max() <= -0.1 + 1e-12


def test_out_of_region_rejected(ex2):
    with pytest.raises(OutOfRegionError):
        ex2.eval_dynamics([2.0, 0.0])
    with pytest.raises(ValueError):
        ex2.eval_dynamics([0.1, 0.1, 0.1])


def test_fixture_errors():
    with pytest.raises(ValueError, match="unknown fixture"):
        fixture("nope")
    with pytest.raises(ValueError, match="needs"):
        fixture("example2", a=-8.0)
    with pytest.raises(ValueError):
        fixture("cubic", a=1.0)
    assert "example2" in catalog()


def test_model_validation():
    mf = MembershipFamily(2, 1, lambda x: np.stack([x[..., 0] ** 2, 1 - x[..., 0] ** 2], -1))
    box = Box([-1.0], [1.0])
    with pytest.raises(ValueError):
        FuzzyModel([[[-1.0]]], mf, box)
    with pytest.raises(ValueError):
        FuzzyModel([np.eye(2), np.eye(2)], mf, box)


def test_json_round_trip(ex2):
    doc = json.loads(ex2.to_json())
    assert doc["r"] == 4 and doc["n"] == 2
    again = FuzzyModel.from_dict(doc)
    assert np.array_equal(again.A, ex2.A)


def test_gradients_analytic_vs_finite_difference(ex2, rng):
    X = ex2.region.sample(rng, 200)
    exact = ex2.memberships.gradient(X)
    approx = ex2.memberships._finite_difference(X)
    assert np.allclose(exact, approx, atol=1e-7)


def test_gradient_free_family_flagged():
    assert fixture("example5").memberships.gradient_is_approximate
    assert not fixture("example2", a=-8, b=100).memberships.gradient_is_approximate


@settings(max_examples=200, deadline=None)
@given(st.floats(-np.pi / 2, np.pi / 2), st.floats(-np.pi / 2, np.pi / 2))
def test_system_matrix_is_convex_combination(x1, x2):
    model = fixture("example2", a=-3.0, b=40.0)
    A = model.system_matrix([x1, x2])
    alpha = model.memberships([x1, x2])
    assert np.allclose(A, np.tensordot(alpha, model.A, axes=1))
    lo, hi = model.A.min(axis=0), model.A.max(axis=0)
    assert np.all(A >= lo - 1e-12) and np.all(A <= hi + 1e-12)
