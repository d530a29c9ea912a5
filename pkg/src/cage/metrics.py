"""Multi-objective evaluation kernels: hypervolume, mean inner product, Pareto filter.

Maximization convention throughout: larger rewards are better, and the
hypervolume measures the region between the reference point and the
solution set.  The reference point is always supplied by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import DomainError


@dataclass(frozen=True, eq=False)
class ParetoPoint:
    """A (preference vector, achieved reward vector) pair."""

    preference: np.ndarray
    reward: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.preference, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        if w.shape != r.shape or w.ndim != 1 or w.size not in (2, 3):
            raise DomainError("preference/reward must be matching vectors of length 2 or 3")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("preference must be nonnegative and sum to 1")
        object.__setattr__(self, "preference", w)
        object.__setattr__(self, "reward", r)


def pareto_filter(points) -> np.ndarray:
    """Non-dominated subset under componentwise >= with one strict; duplicates kept once."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        return pts.reshape(0, 0)
    pts = np.unique(pts, axis=0)
    keep = []
    for i, p in enumerate(pts):
        dominated = False
        for q in pts:
            if np.all(q >= p) and np.any(q > p):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return pts[keep]


def hypervolume(points, z) -> float:
    """Exact dominated hypervolume of a point set relative to reference z (d in {2, 3})."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = np.asarray(z, dtype=float)
    if pts.size == 0:
        return 0.0
    d = pts.shape[1]
    if z.shape != (d,):
        raise DomainError("reference point dimension mismatch")
    if d == 2:
        return _hv2(pts, z)
    if d == 3:
        return _hv3(pts, z)
    raise DomainError(f"hypervolume supports d in {{2, 3}}, got {d}")


def _hv2(pts: np.ndarray, z: np.ndarray) -> float:
    pts = pts[np.all(pts >= z, axis=1)]
    if pts.size == 0:
        return 0.0
    pts = pareto_filter(pts)
    order = np.argsort(-pts[:, 0])  # x descending -> y ascending on a front
    hv = 0.0
    prev_y = z[1]
    for x, y in pts[order]:
        if y > prev_y:
            hv += (x - z[0]) * (y - prev_y)
            prev_y = y
    return hv


def _hv3(pts: np.ndarray, z: np.ndarray) -> float:
    pts = pts[np.all(pts >= z, axis=1)]
    if pts.size == 0:
        return 0.0
    levels = np.unique(pts[:, 2])[::-1]  # third coordinate, descending
    hv = 0.0
    for k, level in enumerate(levels):
        lower = levels[k + 1] if k + 1 < levels.size else z[2]
        active = pts[pts[:, 2] >= level][:, :2]
        hv += _hv2(active, z[:2]) * (level - lower)
    return hv


def hypervolume_monte_carlo(points, z, upper, n_samples: int, seed: int = 0):
    """Monte-Carlo estimate of the dominated volume inside the box [z, upper].

    Independent check for the exact 3-D sweep; returns (estimate, standard_error).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = np.asarray(z, dtype=float)
    upper = np.asarray(upper, dtype=float)
    pts = pts[np.all(pts >= z, axis=1)]
    box = float(np.prod(upper - z))
    if pts.size == 0 or box <= 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    samples = rng.uniform(z, upper, size=(n_samples, z.size))
    hit = np.zeros(n_samples, dtype=bool)
    for p in pts:
        hit |= np.all(samples <= p, axis=1)
    frac = hit.mean()
    se = box * float(np.sqrt(max(frac * (1 - frac), 0.0) / n_samples))
    return box * float(frac), se


def mean_inner_product(points) -> float:
    """Average preference/reward inner product over (preference, reward) pairs."""
    pairs = list(points)
    if not pairs:
        raise DomainError("mean_inner_product needs at least one point")
    total = 0.0
    for point in pairs:
        if isinstance(point, ParetoPoint):
            pref, reward = point.preference, point.reward
        else:
            pref, reward = point
        w = np.asarray(pref, dtype=float)
        r = np.asarray(reward, dtype=float)
        if w.shape != r.shape:
            raise DomainError("preference and reward dimensions differ")
        total += float(w @ r)
    return total / len(pairs)
