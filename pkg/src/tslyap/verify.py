"""Dynamical checks of certified domains of attraction: fixed-step RK4 on ``x' = A(alpha(x)) x``."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .model import FuzzyModel
from .regions import DaEstimate, LyapunovFn, RegionSpec, contains

CONVERGED_NORM = 1e-4
MONOTONE_SLACK = 1e-8


@dataclass
class TrajectoryReport:
    x0: np.ndarray
    t: np.ndarray
    x: np.ndarray
    V: Optional[np.ndarray]
    converged: bool
    lyapunov_monotone: bool
    left_region: bool
    max_v_increase: float = 0.0

    @property
    def samples(self):
        V = self.V if self.V is not None else [None] * len(self.t)
        return list(zip(self.t, self.x, V))

    def to_csv(self, path) -> None:
        n = self.x.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + (["V"] if self.V is not None else []))
            for k in range(len(self.t)):
                row = [f"{self.t[k]:.6g}"] + [f"{c:.12g}" for c in self.x[k]]
                if self.V is not None:
                    row.append(f"{self.V[k]:.12g}")
                w.writerow(row)


@dataclass
class BatchOutcome:
    final: np.ndarray
    converged: np.ndarray
    monotone: np.ndarray
    left_region: np.ndarray
    max_v_increase: np.ndarray
    t: np.ndarray = field(repr=False)
    path: Optional[np.ndarray] = field(default=None, repr=False)  # (steps, m, n)
    V_path: Optional[np.ndarray] = field(default=None, repr=False)


def _rk4_step(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_batch(model: FuzzyModel, X0, horizon: float = 50.0, dt: float = 1e-3,
                    lyapunov: Optional[LyapunovFn] = None, record_every: int = 0,
                    converged_norm: float = CONVERGED_NORM, slack: float = MONOTONE_SLACK) -> BatchOutcome:
    """Integrate many initial states at once. A trajectory leaving the box is frozen there."""
    if dt <= 0 or horizon < 0:
        raise ValueError("need dt > 0 and horizon >= 0")
    X = np.array(X0, dtype=float, ndmin=2)
    if X.shape[-1] != model.n:
        raise ValueError(f"states must have {model.n} components")
    if not np.all(model.region.contains(X)):
        raise ValueError("initial states must lie in the modelling box")
    steps = int(round(horizon / dt))
    m = X.shape[0]
    f = lambda z: model.eval_dynamics(z, check=False)  # noqa: E731
    active = np.ones(m, dtype=bool)
    left = np.zeros(m, dtype=bool)
    monotone = np.ones(m, dtype=bool)
    max_inc = np.zeros(m)
    V = lyapunov(X) if lyapunov is not None else None
    path, vpath, times = None, None, None
    if record_every:
        keep = list(range(0, steps + 1, record_every))
        if keep[-1] != steps:
            keep.append(steps)
        times = np.array(keep) * dt
        path = np.empty((len(keep), m, model.n))
        path[0] = X
        vpath = np.empty((len(keep), m)) if V is not None else None
        if vpath is not None:
            vpath[0] = V
        slot = 1
    for k in range(1, steps + 1):
        if not active.any():
            if record_every:
                while slot < len(keep):
                    path[slot] = X
                    if vpath is not None:
                        vpath[slot] = V
                    slot += 1
            break
        Xa = X[active]
        nxt = _rk4_step(f, Xa, dt)
        if not np.all(np.isfinite(nxt)):
            bad = np.flatnonzero(active)[~np.all(np.isfinite(nxt), axis=1)][0]
            raise FloatingPointError(f"non-finite state at t={k * dt:g} from x0={np.array(X0, ndmin=2)[bad]}")
        inside = model.region.contains(nxt)
        idx = np.flatnonzero(active)
        left[idx[~inside]] = True
        active[idx[~inside]] = False
        moved = idx[inside]
        X[moved] = nxt[inside]
        if V is not None and moved.size:
            Vn = lyapunov(X[moved])
            inc = Vn - V[moved]
            max_inc[moved] = np.maximum(max_inc[moved], inc)
            monotone[moved] &= inc <= slack
            V[moved] = Vn
        if record_every and (k == keep[slot]):
            path[slot] = X
            if vpath is not None:
                vpath[slot] = V
            slot += 1
    if times is None:
        times = np.array([0.0, steps * dt])
    converged = (~left) & (np.linalg.norm(X, axis=1) < converged_norm)
    return BatchOutcome(X, converged, monotone, left, max_inc, times, path, vpath)


def integrate(model: FuzzyModel, x0, horizon: float = 50.0, dt: float = 1e-3,
              lyapunov: Optional[LyapunovFn] = None, record_every: int = 1, **kw) -> TrajectoryReport:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    out = integrate_batch(model, x0[None, :], horizon, dt, lyapunov, max(1, record_every), **kw)
    return TrajectoryReport(
        x0=x0, t=out.t, x=out.path[:, 0, :], V=None if out.V_path is None else out.V_path[:, 0],
        converged=bool(out.converged[0]), lyapunov_monotone=bool(out.monotone[0]),
        left_region=bool(out.left_region[0]), max_v_increase=float(out.max_v_increase[0]))


def sample_sublevel(estimate: DaEstimate, count: int, rng: np.random.Generator,
                    level: Optional[float] = None) -> np.ndarray:
    """Uniform samples of ``{V <= level} & box`` by rejection from the sublevel bounding box."""
    level = estimate.level if level is None else level
    box = estimate.lyapunov.model.region
    mask = estimate.values <= level
    pts = estimate.points()[mask]
    lo = np.maximum(pts.min(axis=0) - _spacing(estimate), box.lower)
    hi = np.minimum(pts.max(axis=0) + _spacing(estimate), box.upper)
    got = []
    total = 0
    for _ in range(1000):
        cand = rng.uniform(lo, hi, size=(max(4 * count, 256), len(lo)))
        cand = cand[estimate.lyapunov(cand) <= level]
        got.append(cand)
        total += len(cand)
        if total >= count:
            break
    out = np.concatenate(got)[:count]
    if len(out) < count:
        raise RuntimeError("could not draw enough samples from the sublevel set")
    return out


def _spacing(estimate: DaEstimate) -> np.ndarray:
    return np.array([ax[1] - ax[0] if len(ax) > 1 else 0.0 for ax in estimate.axes])


@dataclass
class DaAudit:
    level: float
    samples: int
    fraction_converged: float
    fraction_monotone: float
    max_v_increase: float
    left_region: int
    outside_region: int
    horizon: float
    dt: float

    @property
    def clean(self) -> bool:
        return (self.fraction_converged == 1.0 and self.fraction_monotone == 1.0
                and self.left_region == 0)

    @property
    def flags(self) -> list:
        out = []
        if self.fraction_monotone < 1.0:
            out.append("V increase")
        if self.left_region:
            out.append("region exit")
        if self.fraction_converged < 1.0:
            out.append("not converged")
        if self.outside_region:
            out.append("samples outside certified region")
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps({**asdict(self), "flags": self.flags}, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def validate_da(estimate: DaEstimate, sample_count: int = 500, horizon: float = 50.0,
                dt: float = 1e-3, seed: int = 0, level: Optional[float] = None) -> DaAudit:
    """Integrate uniform samples of ``L_V(c*)`` and report how many behave as certified."""
    level = estimate.level if level is None else float(level)
    rng = np.random.default_rng(seed)
    X0 = sample_sublevel(estimate, sample_count, rng, level)
    outside = int(np.count_nonzero(~contains(estimate.region, X0)))
    out = integrate_batch(estimate.lyapunov.model, X0, horizon, dt, estimate.lyapunov)
    return DaAudit(
        level=level, samples=len(X0),
        fraction_converged=float(out.converged.mean()),
        fraction_monotone=float(out.monotone.mean()),
        max_v_increase=float(out.max_v_increase.max()),
        left_region=int(out.left_region.sum()), outside_region=outside,
        horizon=horizon, dt=dt)


def lyapunov_derivative(lyap: LyapunovFn, x, h: float = 1e-6) -> np.ndarray:
    """``dV/dt`` along the flow; exact for quadratic V, central difference along f otherwise."""
    x = np.asarray(x, dtype=float)
    f = lyap.model.eval_dynamics(x, check=False)
    if lyap.kind == "quadratic":
        return 2.0 * np.einsum("...i,ij,...j->...", x, lyap.P0, f)
    step = h / np.maximum(np.linalg.norm(f, axis=-1, keepdims=True), 1e-300) * np.maximum(
        np.linalg.norm(x, axis=-1, keepdims=True), 1e-12)
    return (lyap(x + step * f) - lyap(x - step * f)) / (2 * step[..., 0])


def check_decrease(lyap: LyapunovFn, region: RegionSpec, points: int = 1000, seed: int = 0,
                   tol: Optional[float] = None) -> dict:
    """Sign of ``dV/dt`` at random points of ``region``; returns the worst normalised value."""
    rng = np.random.default_rng(seed)
    box = lyap.model.region
    got = []
    total = 0
    for _ in range(1000):
        cand = box.sample(rng, 4 * points)
        cand = cand[contains(region, cand) & (np.linalg.norm(cand, axis=1) > 0)]
        got.append(cand)
        total += len(cand)
        if total >= points:
            break
    X = np.concatenate(got)[:points]
    tol = tol if tol is not None else (1e-8 if lyap.kind == "quadratic" else 1e-6)
    dV = lyapunov_derivative(lyap, X)
    scaled = dV / (1.0 + np.abs(lyap(X)))
    return {"points": len(X), "worst": float(scaled.max()), "tol": tol,
            "passed": bool(np.all(scaled <= tol))}
