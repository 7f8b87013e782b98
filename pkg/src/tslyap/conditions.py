"""LMI stability conditions for fuzzy models, one builder per condition.

=========  ==========================================================  ===========
kind       Lyapunov candidate / bound on the memberships                hyper
=========  ==========================================================  ===========
qlf        common quadratic ``x^T P x``                                 none
tanaka     fuzzy ``x^T P(alpha) x`` with ``|d alpha_k/dt| <= phi_k``     phi
mozelli    as tanaka, plus slack ``M`` from ``sum_k d alpha_k/dt = 0``   phi
vertex     local quadratic, ``alpha - alpha(0)`` in a box, all vertices  b
overbound  local quadratic, box handled by over-bounding                b
ball       local quadratic, ``|alpha - alpha(0)|^2 <= eta``              eta
combined   ``x^T P_0 x + x^T P(alpha) x`` with both bounds               phi, b
=========  ==========================================================  ===========

Strict inequalities become ``<= -eps I`` / ``>= eps I`` with
``eps = 1e-6 (1 + max_i ||A_i||_2)`` unless a margin is given.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lmi import (NEG, POS, PSD, AffineExpr, AffineSymExpr, LmiProblem, lyap_expr, schur_embed,
                  vertex_enumerate)
from .model import FuzzyModel

KINDS = ("qlf", "tanaka", "mozelli", "vertex", "overbound", "ball", "combined")
MAX_COMBINED_RULES = 12


def default_margin(model: FuzzyModel) -> float:
    return 1e-6 * (1.0 + model.max_vertex_norm())


def per_rule(value, r: int, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1:
        v = np.full(r, float(v[0]))
    if v.shape != (r,):
        raise ValueError(f"{name} needs 1 or {r} entries, got {v.size}")
    return v


@dataclass(frozen=True)
class ConditionSpec:
    kind: str
    phi: Optional[tuple] = None
    b: Optional[tuple] = None
    eta: Optional[float] = None
    margin: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown condition {self.kind!r}; choose from {', '.join(KINDS)}")
        need = {
            "qlf": (), "tanaka": ("phi",), "mozelli": ("phi",), "vertex": ("b",),
            "overbound": ("b",), "ball": ("eta",), "combined": ("phi", "b"),
        }[self.kind]
        for name in ("phi", "b", "eta"):
            given = getattr(self, name) is not None
            if name in need and not given:
                raise ValueError(f"condition {self.kind!r} needs --{name}")
            if name not in need and given:
                raise ValueError(f"condition {self.kind!r} does not take {name}")
        for name in ("phi", "b"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(float(x) for x in np.atleast_1d(val)))
        if self.phi is not None and min(self.phi) <= 0:
            raise ValueError("phi must be positive")
        if self.b is not None and not all(0 <= x <= 1 for x in self.b):
            raise ValueError("b must lie in [0, 1]")
        if self.eta is not None:
            object.__setattr__(self, "eta", float(self.eta))
            if self.eta <= 0:
                raise ValueError("eta must be positive")

    @property
    def hyper(self) -> dict:
        return {k: getattr(self, k) for k in ("phi", "b", "eta") if getattr(self, k) is not None}

    def with_value(self, param: str, value) -> "ConditionSpec":
        """Copy with ``param`` replaced (scalars stay uniform across rules)."""
        kw = dict(kind=self.kind, phi=self.phi, b=self.b, eta=self.eta, margin=self.margin)
        kw[param] = value
        return ConditionSpec(**kw)

    def build(self, model: FuzzyModel) -> LmiProblem:
        return build(self, model)

    def label(self) -> str:
        parts = [self.kind] + [f"{k}={_fmt(v)}" for k, v in self.hyper.items()]
        return " ".join(parts)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(f"{x:g}" for x in v) if len(set(v)) > 1 else f"{v[0]:g}"
    return f"{v:g}"


def _vertex_tag(delta) -> str:
    return "(" + ", ".join(f"{d:+.6g}" for d in delta) + ")"


def _problem(model: FuzzyModel, name: str, margin) -> LmiProblem:
    return LmiProblem(default_margin(model) if margin is None else float(margin), name=name)


def _pair_sum(A: np.ndarray, Ps, i: int, j: int) -> AffineSymExpr:
    """``(A_i^T P_j + P_j A_i + A_j^T P_i + P_i A_j) / 2``."""
    return 0.5 * (lyap_expr(A[i], Ps[j]) + lyap_expr(A[j], Ps[i]))


def build_qlf_common(model: FuzzyModel, margin=None) -> LmiProblem:
    prob = _problem(model, "qlf", margin)
    P = prob.var("P", model.n)
    prob.add(AffineSymExpr.var(P), POS, "P > 0")
    for i, A in enumerate(model.A, start=1):
        prob.add(lyap_expr(A, P), NEG, f"He(A{i},P) < 0")
    return prob


def build_flf_tanaka(model: FuzzyModel, phi, margin=None) -> LmiProblem:
    r, n = model.r, model.n
    phi = per_rule(phi, r, "phi")
    prob = _problem(model, "tanaka", margin)
    Ps = [prob.var(f"P{i + 1}", n) for i in range(r)]
    for i, P in enumerate(Ps, start=1):
        prob.add(AffineSymExpr.var(P), POS, f"P{i} > 0")
    drift = sum((AffineSymExpr.var(P, phi[k]) for k, P in enumerate(Ps)), AffineSymExpr.zeros(n))
    for i in range(r):
        for j in range(i, r):
            prob.add(drift + _pair_sum(model.A, Ps, i, j), NEG, f"pair({i + 1},{j + 1})")
    return prob


def build_flf_mozelli(model: FuzzyModel, phi, margin=None) -> LmiProblem:
    r, n = model.r, model.n
    phi = per_rule(phi, r, "phi")
    prob = _problem(model, "mozelli", margin)
    Ps = [prob.var(f"P{i + 1}", n) for i in range(r)]
    M = prob.var("M", n)
    for i, P in enumerate(Ps, start=1):
        prob.add(AffineSymExpr.var(P), POS, f"P{i} > 0")
        prob.add(AffineSymExpr.var(P) + AffineSymExpr.var(M), PSD, f"P{i} + M >= 0")
    drift = AffineSymExpr.zeros(n)
    for k, P in enumerate(Ps):
        drift = drift + AffineSymExpr.var(P, phi[k]) + AffineSymExpr.var(M, phi[k])
    for i in range(r):
        for j in range(i, r):
            prob.add(drift + _pair_sum(model.A, Ps, i, j), NEG, f"pair({i + 1},{j + 1})")
    return prob


def _vertex_terms(model: FuzzyModel, P, M, delta) -> AffineSymExpr:
    """``A_0^T P + P A_0 + sum_i delta_i (A_i^T P + P A_i + M)``."""
    expr = lyap_expr(model.nominal_matrix(), P)
    for d, A in zip(delta, model.A):
        if d != 0.0:
            expr = expr + d * (lyap_expr(A, P) + AffineSymExpr.var(M))
    return expr


def build_local_qlf_vertex(model: FuzzyModel, b, margin=None) -> LmiProblem:
    b = per_rule(b, model.r, "b")
    prob = _problem(model, "vertex", margin)
    P = prob.var("P", model.n)
    M = prob.var("M", model.n)
    prob.add(AffineSymExpr.var(P), POS, "P > 0")
    for delta in vertex_enumerate(b):
        prob.add(_vertex_terms(model, P, M, delta), NEG, f"vertex{_vertex_tag(delta)}")
    return prob


def build_local_qlf_overbound(model: FuzzyModel, b, margin=None) -> LmiProblem:
    b = per_rule(b, model.r, "b")
    n = model.n
    prob = _problem(model, "overbound", margin)
    P = prob.var("P", n)
    M = prob.var("M", n)
    prob.add(AffineSymExpr.var(P), POS, "P > 0")
    outer = lyap_expr(model.nominal_matrix(), P)
    for i, A in enumerate(model.A):
        local = lyap_expr(A, P) + AffineSymExpr.var(M)
        prob.add(local, NEG, f"He(A{i + 1},P) + M < 0")
        outer = outer - b[i] * local
    prob.add(outer, NEG, "nominal - sum b_i (...) < 0")
    return prob


def build_local_qlf_ball(model: FuzzyModel, eta: float, margin=None) -> LmiProblem:
    eta = float(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    n = model.n
    prob = _problem(model, "ball", margin)
    P = prob.var("P", n)
    G = prob.var("G", n)
    M = prob.var("M", n, symmetric=False)
    prob.add(AffineSymExpr.var(P), POS, "P > 0")
    # implied by the lower-right block, but the Schur step needs it explicitly
    prob.add(AffineSymExpr.var(G), POS, "G > 0")
    top = AffineSymExpr.var(G, eta) + lyap_expr(model.nominal_matrix(), P)
    gamma = [AffineExpr.product(P, A) + AffineExpr.var(M) for A in model.A]
    prob.add(schur_embed(top, gamma, G, model.r), NEG, "ball block < 0")
    return prob


def build_combined(model: FuzzyModel, phi, b, margin=None) -> LmiProblem:
    r, n = model.r, model.n
    if r > MAX_COMBINED_RULES:
        raise ValueError(f"combined condition limited to {MAX_COMBINED_RULES} rules, model has {r}")
    phi = per_rule(phi, r, "phi")
    b = per_rule(b, r, "b")
    alpha0 = model.memberships.alpha_at_origin
    prob = _problem(model, "combined", margin)
    P0 = prob.var("P0", n)
    Ps = [prob.var(f"P{i + 1}", n) for i in range(r)]
    M = prob.var("M", n)
    N = prob.var("N", n)
    W = prob.var("W", n)
    for i, P in enumerate(Ps, start=1):
        prob.add(AffineSymExpr.var(P) + AffineSymExpr.var(N), POS, f"P{i} + N > 0")
    mean_part = AffineSymExpr.var(P0)
    for a, P in zip(alpha0, Ps):
        mean_part = mean_part + AffineSymExpr.var(P, a)
    drift = AffineSymExpr.zeros(n)
    for k, P in enumerate(Ps):
        drift = drift + AffineSymExpr.var(P, phi[k]) + AffineSymExpr.var(N, phi[k])
    vertices = vertex_enumerate(b)
    for delta in vertices:
        pos = mean_part
        for d, P in zip(delta, Ps):
            if d != 0.0:
                pos = pos + d * (AffineSymExpr.var(P) + AffineSymExpr.var(W))
        prob.add(pos, POS, f"positivity{_vertex_tag(delta)}")
    for delta in vertices:
        local = _vertex_terms(model, P0, M, delta)
        for i in range(r):
            for j in range(i, r):
                prob.add(drift + _pair_sum(model.A, Ps, i, j) + local, NEG,
                         f"decrease{_vertex_tag(delta)}({i + 1},{j + 1})")
    return prob


def build(spec: ConditionSpec, model: FuzzyModel) -> LmiProblem:
    m = spec.margin
    if spec.kind == "qlf":
        return build_qlf_common(model, m)
    if spec.kind == "tanaka":
        return build_flf_tanaka(model, spec.phi, m)
    if spec.kind == "mozelli":
        return build_flf_mozelli(model, spec.phi, m)
    if spec.kind == "vertex":
        return build_local_qlf_vertex(model, spec.b, m)
    if spec.kind == "overbound":
        return build_local_qlf_overbound(model, spec.b, m)
    if spec.kind == "ball":
        return build_local_qlf_ball(model, spec.eta, m)
    return build_combined(model, spec.phi, spec.b, m)


def parse_vector(text: Optional[str]) -> Optional[tuple]:
    if text is None:
        return None
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def spec_from_args(kind: str, phi: Optional[str] = None, b: Optional[str] = None,
                   eta: Optional[str] = None, margin: Optional[float] = None) -> ConditionSpec:
    return ConditionSpec(kind, phi=parse_vector(phi), b=parse_vector(b),
                         eta=None if eta is None else float(eta), margin=margin)


def expected_constraint_count(kind: str, r: int) -> int:
    pairs = r * (r + 1) // 2
    return {
        "qlf": r + 1,
        "tanaka": r + pairs,
        "mozelli": 2 * r + pairs,
        "vertex": 2 ** r + 1,
        "overbound": r + 2,
        "ball": 3,
        "combined": r + 2 ** r + 2 ** r * pairs,
    }[kind]


__all__ = [
    "KINDS", "ConditionSpec", "build", "build_qlf_common", "build_flf_tanaka",
    "build_flf_mozelli", "build_local_qlf_vertex", "build_local_qlf_overbound",
    "build_local_qlf_ball", "build_combined", "default_margin", "spec_from_args",
    "expected_constraint_count", "per_rule",
]
