import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tslyap.conditions import ConditionSpec
from tslyap.fixtures import fixture
from tslyap.model import Box, FuzzyModel, MembershipFamily
from tslyap.regions import (LyapunovFn, RegionSpec, UnsupportedRegionError, ball_inclusion_radius,
                            contains, largest_sublevel)
from tslyap.sdp import solve

EX2_GRID = 101
MOZELLI_C_STAR = 0.033004


@pytest.fixture(scope="module")
def ex2_mozelli(ex2):
    spec = ConditionSpec("mozelli", phi=4.07)
    v = solve(spec.build(ex2))
    assert v.feasible
    return LyapunovFn.from_certificate(ex2, "mozelli", v.named()), RegionSpec.omega(ex2, 4.07)


@pytest.fixture(scope="module")
def ex2_ball(ex2):
    v = solve(ConditionSpec("ball", eta=0.16).build(ex2))
    assert v.feasible
    return LyapunovFn.from_certificate(ex2, "ball", v.named()), RegionSpec.ueta(ex2, 0.16)


def square_model():
    mf = MembershipFamily(2, 2, lambda x: np.stack([np.full(x.shape[:-1], 0.5)] * 2, -1),
                          lambda x: np.zeros(x.shape[:-1] + (2, 2)))
    return FuzzyModel([-np.eye(2), -2 * np.eye(2)], mf, Box([-1.0, -1.0], [1.0, 1.0]))


def test_origin_in_every_region(ex2):
    for region in (RegionSpec.hb(ex2, 0.01), RegionSpec.omega(ex2, 0.01), RegionSpec.ueta(ex2, 1e-6)):
        assert contains(region, np.zeros(2))
    e5 = fixture("example5")
    assert contains(RegionSpec.omega(e5, 0.1), np.zeros(1))


def test_region_spec_validation(ex2):
    with pytest.raises(ValueError):
        RegionSpec.hb(ex2, -0.1)
    with pytest.raises(ValueError):
        RegionSpec.ueta(ex2, -1.0)
    with pytest.raises(ValueError):
        RegionSpec.intersection([])
    with pytest.raises(ValueError):
        RegionSpec.omega(ex2, (1.0, 2.0))


def test_discontinuous_sequence_outside_h():
    model = fixture("discontinuous")
    region = RegionSpec.hb(model, 0.49)
    xk = np.array([[1.0 / (4 * k + 1)] for k in range(1, 200)])
    assert np.allclose(np.abs(model.membership_deviation(xk)[:, 0]), 0.5)
    assert not contains(region, xk).any()


def test_omega_unsupported_without_derivative():
    model = fixture("discontinuous")
    with pytest.raises(UnsupportedRegionError):
        contains(RegionSpec.omega(model, 1.0), np.array([0.1]))


def test_approximate_flag(ex2):
    assert RegionSpec.omega(fixture("example5"), 1.0).approximate
    assert not RegionSpec.omega(ex2, 1.0).approximate
    assert not RegionSpec.hb(fixture("example5"), 0.1).approximate


def test_intersection(ex2, rng):
    X = ex2.region.sample(rng, 2000)
    h, o = RegionSpec.hb(ex2, 0.2), RegionSpec.omega(ex2, 1.0)
    both = RegionSpec.intersection([h, o])
    assert np.array_equal(contains(both, X), contains(h, X) & contains(o, X))
    assert "H(0.2)" in both.describe()


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_monotone_in_b_and_eta(b1, b2):
    model = fixture("example2", a=-8.0, b=100.0)
    lo, hi = sorted((b1, b2))
    _, X = model.region.grid(31)
    assert np.all(~contains(RegionSpec.hb(model, lo), X) | contains(RegionSpec.hb(model, hi), X))
    assert np.all(~contains(RegionSpec.ueta(model, lo), X) | contains(RegionSpec.ueta(model, hi), X))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 20.0), st.floats(0.01, 20.0))
def test_monotone_in_phi(p1, p2):
    model = fixture("example2", a=-8.0, b=100.0)
    lo, hi = sorted((p1, p2))
    _, X = model.region.grid(31)
    assert np.all(~contains(RegionSpec.omega(model, lo), X) | contains(RegionSpec.omega(model, hi), X))


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 2.0))
def test_u_inside_h_sqrt_eta(eta):
    model = fixture("example2", a=-8.0, b=100.0)
    _, X = model.region.grid(41)
    inside_u = contains(RegionSpec.ueta(model, eta), X)
    assert np.all(~inside_u | contains(RegionSpec.hb(model, np.sqrt(eta)), X))


def test_whole_box_unit_circle():
    model = square_model()
    V = LyapunovFn.quadratic(model, np.eye(2))
    est = largest_sublevel(V, RegionSpec.hb(model, 1.0), 201)
    assert est.level == pytest.approx(1.0)
    assert est.region_level == np.inf
    assert est.box_level == pytest.approx(1.0)


def test_cubic_whole_box():
    model = fixture("cubic")
    est = largest_sublevel(LyapunovFn.quadratic(model, [[1.0]]), RegionSpec.hb(model, 1.0), 101)
    assert est.level == pytest.approx(1.0)
    assert len(est.boundary_samples) == 0 or np.allclose(np.abs(est.boundary_samples), 1.0)


def test_degenerate_region_rejected():
    model = fixture("scalar-sine")
    # every nonzero state is outside H(0); the origin grid cell is inside but nothing else fits
    with pytest.raises(ValueError):
        largest_sublevel(LyapunovFn.quadratic(model, [[1.0]]), RegionSpec.hb(model, 0.0), 51)


def test_non_positive_v_rejected(ex2):
    with pytest.raises(ValueError, match="positive"):
        largest_sublevel(LyapunovFn.quadratic(ex2, np.diag([1.0, -1.0])), RegionSpec.hb(ex2, 1.0), 21)


def test_sublevel_safety(ex2_mozelli):
    V, region = ex2_mozelli
    est = largest_sublevel(V, region, EX2_GRID)
    assert est.level > 0
    assert np.all(est.in_region[est.sublevel_mask])
    assert len(est.boundary_samples) > 10
    assert np.allclose(V(est.boundary_samples), est.level, rtol=5e-2)


def test_sublevel_resolution_stability(ex2_mozelli, ex2_ball):
    for V, region in (ex2_mozelli, ex2_ball):
        c1 = largest_sublevel(V, region, 201).level
        c2 = largest_sublevel(V, region, 401).level
        assert abs(c1 - c2) / c2 < 0.05


def test_mozelli_level_regression(ex2):
    # frozen at resolution 401 from the certificate at the bisected maximum
    v = solve(ConditionSpec("mozelli", phi=4.0747).build(ex2))
    V = LyapunovFn.from_certificate(ex2, "mozelli", v.named())
    est = largest_sublevel(V, RegionSpec.omega(ex2, 4.0747), 401)
    assert est.level == pytest.approx(MOZELLI_C_STAR, rel=0.02)


def test_exports(tmp_path, ex2_mozelli):
    V, region = ex2_mozelli
    est = largest_sublevel(V, region, 41)
    est.to_csv(tmp_path / "da.csv")
    est.to_svg(tmp_path / "da.svg")
    lines = (tmp_path / "da.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,V,in_region,on_boundary"
    assert len(lines) == 41 * 41 + 1
    assert (tmp_path / "da.svg").read_text().lstrip().startswith("<?xml")


def test_scalar_export(tmp_path):
    model = fixture("cubic")
    est = largest_sublevel(LyapunovFn.quadratic(model, [[1.0]]), RegionSpec.hb(model, 0.25), 101)
    assert est.level == pytest.approx(0.25, rel=0.05)
    est.to_svg(tmp_path / "c.svg")
    assert len(est.boundary_samples) == 2


def test_ball_radius_smooth_positive(ex2):
    for b in (0.01, 0.1, 0.5):
        assert ball_inclusion_radius(RegionSpec.hb(ex2, b), 61) > 0
    assert ball_inclusion_radius(RegionSpec.omega(ex2, 0.5), 61) > 0
    assert ball_inclusion_radius(RegionSpec.hb(fixture("vdp", mu=-2.0), 1e-3), 61) > 0


def test_ball_radius_discontinuous_zero():
    assert ball_inclusion_radius(RegionSpec.hb(fixture("discontinuous"), 0.3), 201) == 0.0


def test_ball_radius_example5_omega():
    # |alpha_1'| stays bounded while |A(alpha) x| -> 0, so the product vanishes at the origin
    # and the grid finds a ball; the estimate is flagged approximate (finite differences)
    region = RegionSpec.omega(fixture("example5"), 0.5)
    assert region.approximate
    assert ball_inclusion_radius(region, 201) > 0


def test_combined_lyapunov_value(ex2):
    P0 = np.eye(2)
    Ps = [k * np.eye(2) for k in range(1, 5)]
    V = LyapunovFn.combined(ex2, P0, Ps)
    x = np.array([0.3, -0.2])
    alpha = ex2.memberships(x)
    expected = x @ (P0 + sum(a * P for a, P in zip(alpha, Ps))) @ x
    assert V(x) == pytest.approx(expected)
    assert V.kind == "combined"
