"""Takagi-Sugeno fuzzy models: memberships, vertex matrices and the modelling box."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

SIMPLEX_TOL = 1e-12


class OutOfRegionError(ValueError):
    """A state lies outside the modelling box, where the fuzzy model is undefined."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Box:
    """Axis-aligned modelling region ``{x : lower <= x <= upper}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower))
        hi = _frozen(np.atleast_1d(self.upper))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("box bounds must be equal-length vectors")
        if not np.all(lo < hi):
            raise ValueError("box needs lower < upper on every axis")
        # The scalar-sine fixture lives on [0, pi/2], so the origin may sit on a face.
        if not np.all((lo <= 0) & (hi >= 0)):
            raise ValueError("box must contain the origin")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def origin_interior(self) -> bool:
        return bool(np.all((self.lower < 0) & (self.upper > 0)))

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def axes(self, resolution) -> list[np.ndarray]:
        res = np.broadcast_to(np.atleast_1d(resolution), (self.n,))
        return [np.linspace(lo, hi, int(k)) for lo, hi, k in zip(self.lower, self.upper, res)]

    def grid(self, resolution) -> tuple[list[np.ndarray], np.ndarray]:
        """Tensor grid over the box; returns the axes and an array of shape (*counts, n)."""
        axes = self.axes(resolution)
        mesh = np.meshgrid(*axes, indexing="ij")
        return axes, np.stack(mesh, axis=-1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(size, self.n))

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


class MembershipFamily:
    """Vectorised membership functions ``alpha(x)`` mapping ``(..., n)`` states to ``(..., r)``.

    ``gradient`` (optional) maps ``(..., n)`` to the ``(..., r, n)`` Jacobian. Without it,
    central differences are used and :attr:`gradient_is_approximate` is set.
    ``smooth`` records whether the family is continuously differentiable on the box.
    """

    def __init__(
        self,
        r: int,
        n: int,
        evaluate: Callable[[np.ndarray], np.ndarray],
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        *,
        smooth: bool = True,
        continuous: bool = True,
    ):
        if r < 1 or n < 1:
            raise ValueError("need r >= 1 and n >= 1")
        self.r = int(r)
        self.n = int(n)
        self._evaluate = evaluate
        self._gradient = gradient
        self.smooth = bool(smooth)
        self.continuous = bool(continuous)
        self.alpha_at_origin = _frozen(self(np.zeros(self.n)))

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    @property
    def gradient_is_approximate(self) -> bool:
        return self._gradient is None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"state has dimension {x.shape[-1]}, memberships expect {self.n}")
        alpha = np.asarray(self._evaluate(x), dtype=float)
        if alpha.shape != x.shape[:-1] + (self.r,):
            raise ValueError(f"membership evaluator returned shape {alpha.shape}")
        return alpha

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._gradient is not None:
            return np.asarray(self._gradient(x), dtype=float)
        return self._finite_difference(x)

    def _finite_difference(self, x: np.ndarray) -> np.ndarray:
        jac = np.empty(x.shape[:-1] + (self.r, self.n))
        for k in range(self.n):
            h = 1e-6 * (1.0 + np.abs(x[..., k]))
            xp = x.copy()
            xm = x.copy()
            xp[..., k] += h
            xm[..., k] -= h
            jac[..., :, k] = (self._evaluate(xp) - self._evaluate(xm)) / (2.0 * h)[..., None]
        return jac


def in_simplex(alpha, tol: float = SIMPLEX_TOL) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    bounded = np.all((alpha >= -tol) & (alpha <= 1 + tol), axis=-1)
    return bounded & (np.abs(alpha.sum(axis=-1) - 1.0) <= tol)


class FuzzyModel:
    """``x' = sum_i alpha_i(x) A_i x`` on a modelling box.

    Immutable after construction. ``fixture``/``params`` are bookkeeping for
    serialisation; memberships are code and cannot round-trip through JSON on their own.
    """

    def __init__(
        self,
        vertex_matrices,
        memberships: MembershipFamily,
        region: Box,
        *,
        fixture: Optional[str] = None,
        params: Optional[dict] = None,
        reference_dynamics: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        mats = [np.atleast_2d(np.asarray(A, dtype=float)) for A in vertex_matrices]
        if not mats:
            raise ValueError("need at least one vertex matrix")
        n = mats[0].shape[0]
        for A in mats:
            if A.shape != (n, n):
                raise ValueError("vertex matrices must all be square with the same size")
        if memberships.r != len(mats):
            raise ValueError(f"{len(mats)} vertex matrices but {memberships.r} memberships")
        if memberships.n != n or region.n != n:
            raise ValueError("state dimension disagrees between matrices, memberships and box")
        self.A = _frozen(np.stack(mats))
        self.memberships = memberships
        self.region = region
        self.fixture = fixture
        self.params = dict(params or {})
        self.reference_dynamics = reference_dynamics
        self._A0 = _frozen(np.einsum("i,ijk->jk", memberships.alpha_at_origin, self.A))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @property
    def vertex_matrices(self) -> list[np.ndarray]:
        return list(self.A)

    def nominal_matrix(self) -> np.ndarray:
        """``A_0 = sum_i alpha_i(0) A_i``, the linearisation-consistent vertex at the origin."""
        return self._A0

    def _checked(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"state has dimension {x.shape[-1]}, model has n={self.n}")
        if not np.all(self.region.contains(x)):
            raise OutOfRegionError("state lies outside the modelling region")
        return x

    def system_matrix(self, x, check: bool = True) -> np.ndarray:
        x = self._checked(x) if check else np.asarray(x, dtype=float)
        return np.einsum("...i,ijk->...jk", self.memberships(x), self.A)

    def eval_dynamics(self, x, check: bool = True) -> np.ndarray:
        """``A(alpha(x)) x``; accepts a single state or a stack of shape (..., n)."""
        x = self._checked(x) if check else np.asarray(x, dtype=float)
        Ax = np.einsum("ijk,...k->...ij", self.A, x)
        return np.einsum("...i,...ij->...j", self.memberships(x), Ax)

    def membership_deviation(self, x, check: bool = True) -> np.ndarray:
        x = self._checked(x) if check else np.asarray(x, dtype=float)
        return self.memberships(x) - self.memberships.alpha_at_origin

    def max_vertex_norm(self) -> float:
        return float(max(np.linalg.norm(A, 2) for A in self.A))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "A": self.A.tolist(),
            "region": self.region.to_dict(),
            "fixture": self.fixture,
            "params": self.params,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "FuzzyModel":
        """Rebuild from a document written by :meth:`to_dict` (memberships come from the fixture)."""
        from .fixtures import fixture

        if not doc.get("fixture"):
            raise ValueError("document does not name a fixture; memberships cannot be rebuilt")
        model = fixture(doc["fixture"], **doc.get("params", {}))
        if not np.allclose(model.A, np.asarray(doc["A"], dtype=float), rtol=0, atol=1e-12):
            raise ValueError("vertex matrices in document disagree with the fixture")
        return model

    def __repr__(self):
        tag = self.fixture or "custom"
        return f"FuzzyModel({tag}, n={self.n}, r={self.r}, params={self.params})"
