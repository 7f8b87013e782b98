"""Validity regions of the local conditions and Lyapunov sublevel-set estimates.

``H(b)``      ``|alpha_i(x) - alpha_i(0)| <= b_i``
``Omega(phi)``  ``|grad alpha_i(x)^T A(alpha(x)) x| <= phi_i``
``U(eta)``    ``sum_i (alpha_i(x) - alpha_i(0))^2 <= eta``

The domain-of-attraction level ``c*`` is found on a dense grid: it is the smallest
value of ``V`` over grid points outside the region, after growing the outside set by
one cell, and never more than the smallest ``V`` on the faces of the modelling box.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .model import FuzzyModel


class UnsupportedRegionError(ValueError):
    """The region needs derivatives the membership family does not have."""


@dataclass(frozen=True)
class RegionSpec:
    kind: str  # "H" | "Omega" | "U" | "Intersection"
    model: FuzzyModel
    value: object = None
    parts: tuple = ()

    @classmethod
    def hb(cls, model: FuzzyModel, b) -> "RegionSpec":
        return cls("H", model, _nonneg(b, model.r, "b"))

    @classmethod
    def omega(cls, model: FuzzyModel, phi) -> "RegionSpec":
        return cls("Omega", model, _nonneg(phi, model.r, "phi"))

    @classmethod
    def ueta(cls, model: FuzzyModel, eta: float) -> "RegionSpec":
        eta = float(eta)
        if eta < 0:
            raise ValueError("eta must be nonnegative")
        return cls("U", model, eta)

    @classmethod
    def intersection(cls, parts: Sequence["RegionSpec"]) -> "RegionSpec":
        parts = tuple(parts)
        if not parts:
            raise ValueError("intersection of no regions")
        return cls("Intersection", parts[0].model, None, parts)

    @property
    def approximate(self) -> bool:
        """True when membership of Omega relies on finite-difference gradients."""
        if self.kind == "Intersection":
            return any(p.approximate for p in self.parts)
        return self.kind == "Omega" and self.model.memberships.gradient_is_approximate

    def describe(self) -> str:
        if self.kind == "Intersection":
            return " & ".join(p.describe() for p in self.parts)
        v = self.value
        if isinstance(v, np.ndarray):
            v = f"{v[0]:g}" if np.all(v == v[0]) else ",".join(f"{x:g}" for x in v)
        return f"{self.kind}({v})"


def _nonneg(v, r, name) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.size == 1:
        v = np.full(r, float(v[0]))
    if v.shape != (r,) or np.any(v < 0):
        raise ValueError(f"{name} must be {r} nonnegative values")
    v.setflags(write=False)
    return v


def membership_rates(model: FuzzyModel, x) -> np.ndarray:
    """``grad alpha_i(x)^T A(alpha(x)) x`` for every rule, shape (..., r)."""
    x = np.asarray(x, dtype=float)
    mf = model.memberships
    if mf.gradient_is_approximate and not mf.continuous:
        raise UnsupportedRegionError(
            "Omega(phi) needs membership derivatives; this family is not differentiable")
    grad = mf.gradient(x)
    f = model.eval_dynamics(x, check=False)
    return np.einsum("...ij,...j->...i", grad, f)


def contains(region: RegionSpec, x) -> np.ndarray:
    """Exact membership test; ``x`` may be a single state or a stack (..., n)."""
    model = region.model
    x = model._checked(x)
    if region.kind == "Intersection":
        out = np.ones(x.shape[:-1], dtype=bool)
        for part in region.parts:
            out &= contains(part, x)
        return out
    if region.kind == "H":
        dev = model.membership_deviation(x, check=False)
        return np.all(np.abs(dev) <= region.value, axis=-1)
    if region.kind == "U":
        dev = model.membership_deviation(x, check=False)
        return np.sum(dev ** 2, axis=-1) <= region.value
    if region.kind == "Omega":
        return np.all(np.abs(membership_rates(model, x)) <= region.value, axis=-1)
    raise ValueError(f"unknown region kind {region.kind!r}")


@dataclass(frozen=True)
class LyapunovFn:
    """``x^T P0 x + sum_i alpha_i(x) x^T P_i x`` with either part optional."""

    model: FuzzyModel
    P0: Optional[np.ndarray] = None
    Ps: tuple = ()

    @property
    def kind(self) -> str:
        if self.Ps and self.P0 is not None:
            return "combined"
        return "fuzzy" if self.Ps else "quadratic"

    @classmethod
    def quadratic(cls, model, P) -> "LyapunovFn":
        return cls(model, np.asarray(P, dtype=float))

    @classmethod
    def fuzzy(cls, model, Ps) -> "LyapunovFn":
        return cls(model, None, tuple(np.asarray(P, dtype=float) for P in Ps))

    @classmethod
    def combined(cls, model, P0, Ps) -> "LyapunovFn":
        return cls(model, np.asarray(P0, dtype=float), tuple(np.asarray(P, dtype=float) for P in Ps))

    @classmethod
    def from_certificate(cls, model: FuzzyModel, kind: str, named: dict) -> "LyapunovFn":
        """Lyapunov function of a solved condition (``named``: variable name -> matrix)."""
        r = model.r
        if kind in ("qlf", "vertex", "overbound", "ball"):
            return cls.quadratic(model, named["P"])
        Ps = [named[f"P{i + 1}"] for i in range(r)]
        if kind in ("tanaka", "mozelli"):
            return cls.fuzzy(model, Ps)
        if kind == "combined":
            return cls.combined(model, named["P0"], Ps)
        raise ValueError(f"no Lyapunov function for condition {kind!r}")

    def matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.model.n
        out = np.zeros(x.shape[:-1] + (n, n))
        if self.P0 is not None:
            out = out + self.P0
        if self.Ps:
            alpha = self.model.memberships(x)
            out = out + np.einsum("...i,ijk->...jk", alpha, np.stack(self.Ps))
        return out

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...j,...jk,...k->...", x, self.matrix(x), x)

    def to_dict(self) -> dict:
        doc = {"kind": self.kind}
        if self.P0 is not None:
            doc["P0" if self.Ps else "P"] = self.P0.tolist()
        if self.Ps:
            doc["P_rules"] = [P.tolist() for P in self.Ps]
        return doc


@dataclass
class DaEstimate:
    lyapunov: LyapunovFn
    level: float
    region: RegionSpec
    resolution: tuple
    boundary_samples: np.ndarray
    region_level: float = np.inf
    box_level: float = np.inf
    axes: list = field(default_factory=list, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)
    in_region: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def sublevel_mask(self) -> np.ndarray:
        return self.values <= self.level

    @property
    def cell_count(self) -> int:
        return int(np.count_nonzero(self.sublevel_mask))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def on_boundary(self) -> np.ndarray:
        inside = self.sublevel_mask
        structure = ndimage.generate_binary_structure(inside.ndim, inside.ndim)
        return inside & ndimage.binary_dilation(~inside, structure)

    def to_csv(self, path) -> None:
        pts = self.points().reshape(-1, len(self.axes))
        boundary = self.on_boundary().ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(pts.shape[1])] + ["V", "in_region", "on_boundary"])
            for p, v, inr, onb in zip(pts, self.values.ravel(), self.in_region.ravel(), boundary):
                w.writerow([f"{c:.10g}" for c in p] + [f"{v:.10g}", int(inr), int(onb)])

    def to_svg(self, path, title: str = "") -> None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 5))
        if len(self.axes) == 2:
            x1, x2 = self.axes
            ax.contourf(x1, x2, self.in_region.T.astype(float), levels=[0.5, 1.5], colors=["0.8"])
            ax.contour(x1, x2, self.values.T, levels=[self.level], colors=["red"], linewidths=1.5)
            ax.set_xlabel("$x_1$")
            ax.set_ylabel("$x_2$")
            ax.set_aspect("equal")
        elif len(self.axes) == 1:
            x = self.axes[0]
            ax.fill_between(x, 0, self.values.max(), where=self.in_region, color="0.8", step="mid")
            ax.plot(x, self.values, "k-", lw=1)
            ax.axhline(self.level, color="red")
            ax.set_xlabel("$x$")
            ax.set_ylabel("$V(x)$")
        else:
            raise ValueError("SVG overlay only drawn for n <= 2")
        ax.set_title(title or f"{self.region.describe()}, c* = {self.level:.4g}")
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)


def _box_faces(shape, model: FuzzyModel) -> np.ndarray:
    """Mask of grid points on the box faces, skipping faces that pass through the origin."""
    mask = np.zeros(shape, dtype=bool)
    lo, hi = model.region.lower, model.region.upper
    for k in range(len(shape)):
        idx = [slice(None)] * len(shape)
        if lo[k] < 0:
            idx[k] = 0
            mask[tuple(idx)] = True
        if hi[k] > 0:
            idx[k] = -1
            mask[tuple(idx)] = True
    return mask


def _trace_level(axes, values, level) -> np.ndarray:
    if len(axes) == 1:
        x, v = axes[0], values
        pts = []
        for k in range(len(x) - 1):
            a, b = v[k] - level, v[k + 1] - level
            if a == 0:
                pts.append([x[k]])
            elif a * b < 0:
                pts.append([x[k] + (x[k + 1] - x[k]) * a / (a - b)])
        return np.array(pts).reshape(-1, 1)
    if len(axes) == 2:
        import contourpy

        gen = contourpy.contour_generator(axes[0], axes[1], values.T)
        lines = gen.lines(level)
        return np.vstack(lines) if lines else np.empty((0, 2))
    return np.empty((0, len(axes)))


def largest_sublevel(lyap: LyapunovFn, region: RegionSpec, resolution=401) -> DaEstimate:
    """Largest grid-certified ``c`` with ``{V <= c}`` inside ``region`` and the modelling box."""
    model = region.model
    n = model.n
    if n > 3:
        raise ValueError("grid sublevel search is limited to n <= 3")
    res = tuple(int(k) for k in np.broadcast_to(np.atleast_1d(resolution), (n,)))
    axes, X = model.region.grid(res)
    V = lyap(X)
    norms = np.linalg.norm(X, axis=-1)
    if np.any(V[norms > 0] <= 0):
        raise ValueError("Lyapunov function is not positive on the grid")
    inside = contains(region, X)
    origin_idx = np.unravel_index(np.argmin(norms), norms.shape)
    if not inside[origin_idx]:
        raise ValueError("region excludes the grid cell at the origin")
    structure = ndimage.generate_binary_structure(n, n)
    outside = ndimage.binary_dilation(~inside, structure)
    region_level = float(V[outside].min()) if outside.any() else np.inf
    faces = _box_faces(V.shape, model)
    box_level = float(V[faces].min()) if faces.any() else np.inf
    level = min(region_level, box_level)
    if not np.isfinite(level) or level <= 0:
        raise ValueError("degenerate region: no positive sublevel set fits")
    level = float(np.nextafter(level, 0.0))
    return DaEstimate(lyap, level, region, res, _trace_level(axes, V, level), region_level,
                      box_level, axes, V, inside)


def ball_inclusion_radius(region: RegionSpec, resolution=201, scales: int = 7) -> float:
    """Largest radius of an origin-centred ball the grid certifies to lie in ``region``.

    The region is probed on grids over the box shrunk by 1, 1/10, ..., 10^-(scales-1).
    If outside points persist at the finest scale, no ball is certified and 0 is returned.
    """
    model = region.model
    box = model.region
    rho = np.inf
    bounds = np.concatenate([np.abs(box.lower[box.lower < 0]), box.upper[box.upper > 0]])
    rho_box = float(bounds.min()) if bounds.size else 0.0
    finest_has_outside = False
    for k in range(scales):
        s = 10.0 ** (-k)
        axes = [np.linspace(s * lo, s * hi, resolution) for lo, hi in zip(box.lower, box.upper)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, model.n)
        out = ~contains(region, X)
        if out.any():
            rho = min(rho, float(np.linalg.norm(X[out], axis=-1).min()))
        finest_has_outside = bool(out.any())
    if finest_has_outside:
        return 0.0
    return float(min(rho, rho_box))
