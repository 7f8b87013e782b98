"""Affine symmetric-matrix expressions in matrix decision variables.

Every linear piece is stored as ``coef * L @ X @ R`` and always enters an
:class:`AffineSymExpr` together with its transpose, so evaluation is symmetric
bit-for-bit no matter what the caller passes in.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

MAX_VERTEX_RULES = 20

NEG = "neg"  # expr <= -eps I
POS = "pos"  # expr >= eps I
PSD = "psd"  # expr >= 0 (non-strict)
SENSES = (NEG, POS, PSD)


class MissingAssignmentError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class MatrixVar:
    """An n-by-n matrix unknown. Compared by identity."""

    name: str
    n: int
    symmetric: bool = True

    @property
    def size(self) -> int:
        return self.n * (self.n + 1) // 2 if self.symmetric else self.n * self.n

    def basis_pairs(self) -> list[tuple[int, int]]:
        if self.symmetric:
            return [(a, b) for a in range(self.n) for b in range(a, self.n)]
        return [(a, b) for a in range(self.n) for b in range(self.n)]

    def from_vector(self, z: np.ndarray) -> np.ndarray:
        X = np.zeros((self.n, self.n))
        for k, (a, b) in enumerate(self.basis_pairs()):
            X[a, b] = z[k]
            if self.symmetric:
                X[b, a] = z[k]
        return X

    def to_vector(self, X: np.ndarray) -> np.ndarray:
        return np.array([X[a, b] for a, b in self.basis_pairs()])

    def __repr__(self):
        kind = "sym" if self.symmetric else "gen"
        return f"MatrixVar({self.name}, {self.n}, {kind})"


@dataclass(frozen=True)
class Term:
    coef: float
    var: MatrixVar
    left: np.ndarray
    right: np.ndarray

    def value(self, X: np.ndarray) -> np.ndarray:
        return self.coef * (self.left @ X @ self.right)

    def placed(self, E: np.ndarray, F: np.ndarray) -> "Term":
        return Term(self.coef, self.var, E @ self.left, self.right @ F.T)

    def scaled(self, s: float) -> "Term":
        return Term(self.coef * s, self.var, self.left, self.right)


def _term(coef, var, left=None, right=None) -> Term:
    eye = np.eye(var.n)
    L = eye if left is None else np.atleast_2d(np.asarray(left, dtype=float))
    R = eye if right is None else np.atleast_2d(np.asarray(right, dtype=float))
    if L.shape[1] != var.n or R.shape[0] != var.n or L.shape[0] != R.shape[1]:
        raise ValueError(f"term shapes {L.shape} x {var.n} x {R.shape} do not conform")
    return Term(float(coef), var, L, R)


def _lookup(assignment: Mapping, var: MatrixVar) -> np.ndarray:
    try:
        X = assignment[var]
    except KeyError:
        raise MissingAssignmentError(f"no value assigned to {var.name}") from None
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape != (var.n, var.n):
        raise ValueError(f"{var.name} expects shape {(var.n, var.n)}, got {X.shape}")
    return X


@dataclass(frozen=True)
class AffineExpr:
    """General (not necessarily symmetric) affine matrix expression ``C + sum coef L X R``.

    Only used for off-diagonal blocks handed to :func:`schur_embed`.
    """

    constant: np.ndarray
    terms: tuple[Term, ...] = ()

    @classmethod
    def product(cls, var: MatrixVar, right, coef: float = 1.0) -> "AffineExpr":
        """``coef * X @ right``."""
        right = np.atleast_2d(np.asarray(right, dtype=float))
        return cls(np.zeros((var.n, right.shape[1])), (_term(coef, var, None, right),))

    @classmethod
    def var(cls, var: MatrixVar, coef: float = 1.0) -> "AffineExpr":
        return cls(np.zeros((var.n, var.n)), (_term(coef, var),))

    def __add__(self, other: "AffineExpr") -> "AffineExpr":
        return AffineExpr(self.constant + other.constant, self.terms + other.terms)

    @property
    def shape(self) -> tuple[int, int]:
        return self.constant.shape

    def evaluate(self, assignment: Mapping) -> np.ndarray:
        out = np.array(self.constant, dtype=float)
        for t in self.terms:
            out = out + t.value(_lookup(assignment, t.var))
        return out


@dataclass(frozen=True)
class AffineSymExpr:
    """``sym(C) + sum_t (T_t + T_t^T)`` with ``T_t = coef L X R``."""

    constant: np.ndarray
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.constant, dtype=float))
        if C.shape[0] != C.shape[1]:
            raise ValueError("constant block must be square")
        C = (C + C.T) / 2
        C.setflags(write=False)
        object.__setattr__(self, "constant", C)
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.left.shape[0] != C.shape[0]:
                raise ValueError("term does not match expression size")

    @classmethod
    def zeros(cls, m: int) -> "AffineSymExpr":
        return cls(np.zeros((m, m)))

    @classmethod
    def const(cls, C) -> "AffineSymExpr":
        return cls(np.atleast_2d(np.asarray(C, dtype=float)))

    @classmethod
    def var(cls, var: MatrixVar, coef: float = 1.0) -> "AffineSymExpr":
        """``coef * X`` (symmetric part, for general X)."""
        return cls(np.zeros((var.n, var.n)), (_term(coef / 2, var),))

    @classmethod
    def congruence(cls, var: MatrixVar, left, coef: float = 1.0) -> "AffineSymExpr":
        """``coef * L X L^T``."""
        L = np.atleast_2d(np.asarray(left, dtype=float))
        return cls(np.zeros((L.shape[0],) * 2), (_term(coef / 2, var, L, L.T),))

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    @property
    def variables(self) -> list[MatrixVar]:
        seen = {}
        for t in self.terms:
            seen.setdefault(id(t.var), t.var)
        return list(seen.values())

    def __add__(self, other: "AffineSymExpr") -> "AffineSymExpr":
        if not isinstance(other, AffineSymExpr):
            return NotImplemented
        if other.size != self.size:
            raise ValueError(f"cannot add {self.size}x{self.size} and {other.size}x{other.size}")
        return AffineSymExpr(self.constant + other.constant, self.terms + other.terms)

    def __mul__(self, s) -> "AffineSymExpr":
        s = float(s)
        return AffineSymExpr(self.constant * s, tuple(t.scaled(s) for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> "AffineSymExpr":
        return self * -1.0

    def __sub__(self, other: "AffineSymExpr") -> "AffineSymExpr":
        return self + (-other)

    def placed(self, E: np.ndarray) -> "AffineSymExpr":
        """Embed as ``E S E^T`` (E selects the rows of the target block)."""
        return AffineSymExpr(E @ self.constant @ E.T, tuple(t.placed(E, E) for t in self.terms))

    def evaluate(self, assignment: Mapping) -> np.ndarray:
        S = np.array(self.constant, dtype=float)
        for t in self.terms:
            T = t.value(_lookup(assignment, t.var))
            S += T + T.T
        return S

    def coefficients(self, offsets: Mapping[int, int], nz: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(C, F)`` with ``expr = C + reshape(F @ z)`` for stacked unknowns ``z``."""
        m = self.size
        F = np.zeros((m, m, nz))
        for t in self.terms:
            base = offsets[id(t.var)]
            for k, (a, b) in enumerate(t.var.basis_pairs()):
                T = np.outer(t.left[:, a], t.right[b, :])
                if t.var.symmetric and a != b:
                    T = T + np.outer(t.left[:, b], t.right[a, :])
                F[:, :, base + k] += t.coef * (T + T.T)
        return np.array(self.constant), F.reshape(m * m, nz)


def evaluate(expr, assignment: Mapping) -> np.ndarray:
    return expr.evaluate(assignment)


def lyap_expr(A, P: MatrixVar) -> AffineSymExpr:
    """``A^T P + P A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (P.n, P.n):
        raise ValueError(f"A is {A.shape}, P is {P.n}x{P.n}")
    return AffineSymExpr(np.zeros((P.n, P.n)), (_term(1.0, P, None, A),))


def vertex_enumerate(bounds: Sequence[float]) -> np.ndarray:
    """All sign combinations ``(+-b_1, ..., +-b_r)``, lexicographic with ``-`` first.

    Zero bounds collapse an axis; duplicate vertices are dropped keeping first occurrence.
    """
    b = np.atleast_1d(np.asarray(bounds, dtype=float))
    r = b.size
    if r < 1:
        raise ValueError("need at least one bound")
    if r > MAX_VERTEX_RULES:
        raise ValueError(f"{r} rules would need 2^{r} vertices; limit is {MAX_VERTEX_RULES}")
    if np.any(b < 0):
        raise ValueError("bounds must be nonnegative")
    out, seen = [], set()
    for signs in itertools.product((-1.0, 1.0), repeat=r):
        v = tuple(np.asarray(signs) * b)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return np.array(out)


def block_selector(block: int, n: int, blocks: int) -> np.ndarray:
    E = np.zeros((n * blocks, n))
    E[block * n:(block + 1) * n, :] = np.eye(n)
    return E


def schur_embed(block11: AffineSymExpr, block21: Sequence[AffineExpr], block22_var: MatrixVar,
                copies: int) -> AffineSymExpr:
    """``[[S, Gamma^T], [Gamma, -I_copies (x) G]]`` with Gamma stacked from ``block21``."""
    n = block11.size
    if copies != len(block21):
        raise ValueError(f"copies={copies} but {len(block21)} off-diagonal blocks")
    if block22_var.n != n or any(blk.shape != (n, n) for blk in block21):
        raise ValueError("inconsistent block dimensions")
    blocks = copies + 1
    E0 = block_selector(0, n, blocks)
    out = block11.placed(E0)
    for i, blk in enumerate(block21, start=1):
        Ei = block_selector(i, n, blocks)
        C = Ei @ blk.constant @ E0.T
        terms = tuple(t.placed(Ei, E0) for t in blk.terms)
        out = out + AffineSymExpr(C + C.T, terms)
        out = out + AffineSymExpr.congruence(block22_var, Ei, -1.0)
    return out


@dataclass
class Constraint:
    expr: AffineSymExpr
    sense: str
    label: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")


@dataclass
class LmiProblem:
    """Constraints ``expr <= -eps I`` (neg), ``expr >= eps I`` (pos) or ``expr >= 0`` (psd)."""

    margin: float
    variables: list[MatrixVar] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("margin must be positive")

    def var(self, name: str, n: int, symmetric: bool = True) -> MatrixVar:
        v = MatrixVar(name, n, symmetric)
        self.variables.append(v)
        return v

    def add(self, expr: AffineSymExpr, sense: str, label: str = "") -> None:
        declared = {id(v) for v in self.variables}
        for v in expr.variables:
            if id(v) not in declared:
                raise ValueError(f"constraint {label!r} uses undeclared variable {v.name}")
        self.constraints.append(Constraint(expr, sense, label))

    def offsets(self) -> tuple[dict[int, int], int]:
        offsets, k = {}, 0
        for v in self.variables:
            offsets[id(v)] = k
            k += v.size
        return offsets, k

    def compile(self) -> list[tuple[np.ndarray, np.ndarray]]:
        offsets, nz = self.offsets()
        return [c.expr.coefficients(offsets, nz) for c in self.constraints]

    def unpack(self, z: np.ndarray) -> dict:
        offsets, _ = self.offsets()
        return {v: v.from_vector(z[offsets[id(v)]:offsets[id(v)] + v.size]) for v in self.variables}

    def by_name(self, assignment: Mapping) -> dict[str, np.ndarray]:
        return {v.name: np.asarray(assignment[v]) for v in self.variables if v in assignment}

    def to_dict(self) -> dict:
        offsets, nz = self.offsets()
        cons = []
        for c in self.constraints:
            C, F = c.expr.coefficients(offsets, nz)
            m = c.expr.size
            cons.append({
                "label": c.label,
                "sense": c.sense,
                "size": m,
                "constant": C.tolist(),
                "coefficients": [F[:, k].reshape(m, m).tolist() for k in range(nz)],
            })
        return {
            "name": self.name,
            "margin": self.margin,
            "variables": [
                {"name": v.name, "n": v.n, "symmetric": v.symmetric, "offset": offsets[id(v)],
                 "size": v.size}
                for v in self.variables
            ],
            "unknowns": nz,
            "constraints": cons,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def identity_problem(n: int = 2, margin: float = 1e-6) -> tuple[LmiProblem, MatrixVar]:
    """``P >= eps I`` on its own; handy for smoke tests."""
    prob = LmiProblem(margin, name="identity")
    P = prob.var("P", n)
    prob.add(AffineSymExpr.var(P), POS, "P > 0")
    return prob, P

