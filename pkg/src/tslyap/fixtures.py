"""Hand-coded example systems.

Catalog (``fixture(name, **params)``):

==============  =========================  ==================================================
name            params                     system
==============  =========================  ==================================================
example2        a, b (required)            4-rule, 2-state model, ``mu_i = (1 - sin x_i)/2``
cubic           none                       ``x' = -x^3`` as ``A = (-1, 0)``, ``alpha_1 = x^2``
decay           none                       ``x' = -x`` as ``A = (-1, 0)``, ``alpha_1 = 1``
vdp             mu (required)              van der Pol-type model, ``alpha_1 = (1 + x_2)/2``
scalar-sine     none                       ``x' = (2 sin x - 1) x`` on ``[0, pi/2]``
example5        a1=-1, a2=-2               differentiable MFs with a discontinuous derivative
discontinuous   a1=-1, a2=-2               ``alpha_1 = sin(pi/(2x))/2 + 1/2``, discontinuous at 0
random2         seed (required), spread=1  random 2-rule model with Hurwitz ``A_0``
==============  =========================  ==================================================

On ``example2``: the membership products use ``beta_i = 1 - mu_i``. Read literally,
the definition ``beta_i = 1 - alpha_i`` would make the four weights fail to sum to one,
so it is treated as a typo.
"""
from __future__ import annotations

import numpy as np

from .model import Box, FuzzyModel, MembershipFamily

HALF_PI = np.pi / 2


def _two_rule(n, alpha1, grad1=None, **kw) -> MembershipFamily:
    def evaluate(x):
        a1 = alpha1(x)
        return np.stack([a1, 1.0 - a1], axis=-1)

    def gradient(x):
        g = grad1(x)
        return np.stack([g, -g], axis=-2)

    return MembershipFamily(2, n, evaluate, gradient if grad1 is not None else None, **kw)


def example2(a: float, b: float) -> FuzzyModel:
    a, b = float(a), float(b)
    A = [
        [[-5, -4], [-1, a]],
        [[-4, -4], [(3 * b - 2) / 5, (3 * a - 4) / 5]],
        [[-3, -4], [(2 * b - 3) / 5, (2 * a - 6) / 5]],
        [[-2, -4], [b, -2]],
    ]

    def evaluate(x):
        mu = (1.0 - np.sin(x)) / 2
        m1, m2 = mu[..., 0], mu[..., 1]
        return np.stack([m1 * m2, m1 * (1 - m2), (1 - m1) * m2, (1 - m1) * (1 - m2)], axis=-1)

    def gradient(x):
        mu = (1.0 - np.sin(x)) / 2
        dmu = -np.cos(x) / 2
        m1, m2 = mu[..., 0], mu[..., 1]
        d1, d2 = dmu[..., 0], dmu[..., 1]
        z = np.zeros_like(m1)
        rows = [
            [d1 * m2, m1 * d2],
            [d1 * (1 - m2), -m1 * d2],
            [-d1 * m2, (1 - m1) * d2],
            [-d1 * (1 - m2), -(1 - m1) * d2],
        ]
        return np.stack([np.stack([p + z, q + z], axis=-1) for p, q in rows], axis=-2)

    def reference(x):
        # bilinear in (mu_1, mu_2); the mu_1*mu_2 coefficients cancel
        mu = (1.0 - np.sin(x)) / 2
        m1, m2 = mu[..., 0], mu[..., 1]
        x1, x2 = x[..., 0], x[..., 1]
        f1 = (-2 - 2 * m1 - m2) * x1 - 4 * x2
        c1 = b - 0.4 * (b + 1) * m1 - 0.6 * (b + 1) * m2
        c2 = -2 + 0.6 * (a + 2) * m1 + 0.4 * (a + 2) * m2
        return np.stack([f1, c1 * x1 + c2 * x2], axis=-1)

    box = Box([-HALF_PI, -HALF_PI], [HALF_PI, HALF_PI])
    return FuzzyModel(A, MembershipFamily(4, 2, evaluate, gradient), box,
                      fixture="example2", params={"a": a, "b": b}, reference_dynamics=reference)


def cubic() -> FuzzyModel:
    mf = _two_rule(1, lambda x: x[..., 0] ** 2, lambda x: 2 * x)
    return FuzzyModel([[[-1.0]], [[0.0]]], mf, Box([-1.0], [1.0]), fixture="cubic",
                      reference_dynamics=lambda x: -x ** 3)


def decay() -> FuzzyModel:
    mf = _two_rule(1, lambda x: np.ones_like(x[..., 0]), lambda x: np.zeros_like(x))
    return FuzzyModel([[[-1.0]], [[0.0]]], mf, Box([-1.0], [1.0]), fixture="decay",
                      reference_dynamics=lambda x: -x)


def vdp(mu: float) -> FuzzyModel:
    mu = float(mu)
    A = [[[0, 1], [-1, mu]], [[0, 1], [-1, 0]]]

    def grad1(x):
        g = np.zeros_like(x)
        g[..., 1] = 0.5
        return g

    def reference(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2, -x1 + mu * (1 + x2) * x2 / 2], axis=-1)

    mf = _two_rule(2, lambda x: (1 + x[..., 1]) / 2, grad1)
    return FuzzyModel(A, mf, Box([-1.0, -1.0], [1.0, 1.0]), fixture="vdp",
                      params={"mu": mu}, reference_dynamics=reference)


def scalar_sine() -> FuzzyModel:
    mf = _two_rule(1, lambda x: np.sin(x[..., 0]), lambda x: np.cos(x))
    return FuzzyModel([[[1.0]], [[-1.0]]], mf, Box([0.0], [HALF_PI]), fixture="scalar-sine",
                      reference_dynamics=lambda x: (2 * np.sin(x) - 1) * x)


def _oscillating(x, inner):
    x = x[..., 0]
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 0.0, inner(safe))


def example5(a1: float = -1.0, a2: float = -2.0) -> FuzzyModel:
    def alpha1(x):
        return _oscillating(x, lambda s: s ** 2 * (0.5 * np.sin(np.pi / (2 * s)) + 0.5))

    mf = _two_rule(1, alpha1, None, smooth=False)
    return FuzzyModel([[[float(a1)]], [[float(a2)]]], mf, Box([-1.0], [1.0]),
                      fixture="example5", params={"a1": float(a1), "a2": float(a2)})


def discontinuous(a1: float = -1.0, a2: float = -2.0) -> FuzzyModel:
    def alpha1(x):
        return _oscillating(x, lambda s: 0.5 * np.sin(np.pi / (2 * s))) + 0.5

    mf = _two_rule(1, alpha1, None, smooth=False, continuous=False)
    return FuzzyModel([[[float(a1)]], [[float(a2)]]], mf, Box([-1.0], [1.0]),
                      fixture="discontinuous", params={"a1": float(a1), "a2": float(a2)})


def random2(seed: int, spread: float = 1.0) -> FuzzyModel:
    """Random 2-state, 2-rule model whose nominal matrix has spectral abscissa <= -0.1."""
    seed = int(seed)
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(2, 2))
    shift = np.max(np.linalg.eigvals(B).real) + 0.1 + rng.uniform(0, 1)
    A0 = B - shift * np.eye(2)
    D = float(spread) * rng.normal(size=(2, 2))
    c = rng.uniform(0.2, 0.8)
    w = min(c, 1 - c)

    def alpha1(x):
        return c + w * np.sin(x[..., 0]) * np.cos(x[..., 1])

    def grad1(x):
        return w * np.stack([np.cos(x[..., 0]) * np.cos(x[..., 1]),
                             -np.sin(x[..., 0]) * np.sin(x[..., 1])], axis=-1)

    # alpha_1(0) A_1 + alpha_2(0) A_2 = A0 by construction
    A = [A0 + (1 - c) * D, A0 - c * D]
    return FuzzyModel(A, _two_rule(2, alpha1, grad1), Box([-1.0, -1.0], [1.0, 1.0]),
                      fixture="random2", params={"seed": seed, "spread": float(spread)})


_CATALOG = {
    "example2": (example2, ("a", "b")),
    "cubic": (cubic, ()),
    "decay": (decay, ()),
    "vdp": (vdp, ("mu",)),
    "scalar-sine": (scalar_sine, ()),
    "example5": (example5, ()),
    "discontinuous": (discontinuous, ()),
    "random2": (random2, ("seed",)),
}


def catalog() -> list[str]:
    return sorted(_CATALOG)


def fixture(name: str, **params) -> FuzzyModel:
    try:
        build, required = _CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown fixture {name!r}; known: {', '.join(catalog())}") from None
    missing = [p for p in required if params.get(p) is None]
    if missing:
        raise ValueError(f"fixture {name!r} needs parameter(s): {', '.join(missing)}")
    params = {k: v for k, v in params.items() if v is not None}
    try:
        return build(**params)
    except TypeError as exc:
        raise ValueError(f"bad parameters for fixture {name!r}: {exc}") from None
