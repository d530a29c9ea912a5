"""Independent equilibrium computation in policy space.

Two policy-space objectives characterize the equilibrium policy: the
aggregate-surplus potential and the user-side regularized utility.  Both
are maximized by entropic mirror ascent with subgradients for the
nonsmooth max terms.  A brute-force grid search over the principals'
boxes provides a third, fully independent certificate on tiny instances.
All of this exists to cross-validate the round-based solver.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .game import DomainError, GameInstance, PolicySimplex, br_probs, kl_divergence

MIRROR_STEP_SCALE = 0.1
MIRROR_MAX_ITERS = 5000
MIRROR_VALUE_TOL = 1e-10


class InfeasibleError(ValueError):
    """Requested policy cannot be implemented under the incentive boxes."""


class ObjectiveMode(enum.Enum):
    AGGREGATE_SURPLUS = "aggregate-surplus"
    USER_REG = "user-reg"


class CRule(enum.Enum):
    MAX_ZERO_CMIN = "max-zero-cmin"
    RAW_CMIN = "raw-cmin"


@dataclass(frozen=True)
class SurplusObjective:
    mode: ObjectiveMode = ObjectiveMode.AGGREGATE_SURPLUS
    floor: float = 1e-9


def aggregate_score_vector(g: GameInstance) -> np.ndarray:
    """Weighted sum of all principals' rewards."""
    return g.box.sum(axis=0)


def cmin_cmax(pi, g: GameInstance) -> tuple[float, float]:
    """Range of the common shift implementing pi under the incentive boxes.

    pi is reachable iff c_min <= c_max.
    """
    p = np.asarray(pi, dtype=float)
    if np.any(p <= 0):
        raise DomainError("policy must be strictly positive")
    log_ratio = g.tau * (np.log(p) - g.log_pi0)
    ybar = aggregate_score_vector(g)
    c_min = float(np.max(-log_ratio))
    c_max = float(np.min(ybar - log_ratio))
    return c_min, c_max


def min_cost_incentive(pi, g: GameInstance, c_rule: CRule = CRule.MAX_ZERO_CMIN) -> np.ndarray:
    """Cheapest aggregate incentive whose best response is pi."""
    p = np.asarray(pi, dtype=float)
    c_min, c_max = cmin_cmax(p, g)
    c = max(0.0, c_min) if c_rule is CRule.MAX_ZERO_CMIN else c_min
    if c > c_max + 1e-9:
        raise InfeasibleError(f"policy unreachable: shift {c} exceeds c_max {c_max}")
    Y = g.tau * (np.log(p) - g.log_pi0) + c
    return np.clip(Y, 0.0, None)


def _psi(p: np.ndarray, g: GameInstance) -> tuple[float, int]:
    """Minimal-shift cost max(0, c_min) and its attaining index (lowest on ties)."""
    terms = -g.tau * (np.log(p) - g.log_pi0)
    k = int(np.argmax(terms))
    return max(0.0, float(terms[k])), k


def policy_objective_value(pi, g: GameInstance, mode: ObjectiveMode) -> float:
    p = np.asarray(pi, dtype=float)
    if np.any(p <= 0):
        raise DomainError("policy must be strictly positive")
    qbar = aggregate_score_vector(g)
    kl = kl_divergence(p, g.pi0.probs)
    if mode is ObjectiveMode.AGGREGATE_SURPLUS:
        psi, _ = _psi(p, g)
        return float(p @ qbar) - g.tau * kl - psi
    J = g.num_principals
    c_min, _ = cmin_cmax(p, g)
    return float(p @ qbar) - J * g.tau * kl - J * c_min


def _objective_subgradient(p: np.ndarray, g: GameInstance, mode: ObjectiveMode) -> np.ndarray:
    qbar = aggregate_score_vector(g)
    kl_grad = np.log(p) - g.log_pi0 + 1.0
    if mode is ObjectiveMode.AGGREGATE_SURPLUS:
        grad = qbar - g.tau * kl_grad
        psi, k = _psi(p, g)
        if psi > 0:
            grad[k] += g.tau / p[k]
        return grad
    J = g.num_principals
    grad = qbar - J * g.tau * kl_grad
    terms = -g.tau * (np.log(p) - g.log_pi0)
    k = int(np.argmax(terms))
    grad[k] += J * g.tau / p[k]
    return grad


def maximize_policy_objective(
    g: GameInstance, objective: SurplusObjective | None = None
) -> PolicySimplex:
    """Entropic mirror ascent over the floored simplex.

    Strict concavity of both objectives on the interior guarantees a unique
    maximizer; the floor keeps the log terms finite.  For the user-side mode
    the reachability constraint is handled by a subgradient penalty, and an
    unreachable final point raises InfeasibleError.
    """
    objective = objective or SurplusObjective()
    if not 0 < objective.floor < 1.0 / g.n:
        raise DomainError("floor must lie in (0, 1/N)")
    qbar = aggregate_score_vector(g)
    scale = float(np.max(np.abs(qbar)))
    step = MIRROR_STEP_SCALE / scale if scale > 0 else MIRROR_STEP_SCALE
    penalty = 10.0 * (1.0 + scale)

    p = g.pi0.probs.copy()
    value = policy_objective_value(p, g, objective.mode)
    for _ in range(MIRROR_MAX_ITERS):
        grad = _objective_subgradient(p, g, objective.mode)
        if objective.mode is ObjectiveMode.USER_REG:
            c_min, c_max = cmin_cmax(p, g)
            if c_min > c_max:
                # push back toward the reachable set
                terms = -g.tau * (np.log(p) - g.log_pi0)
                k_min = int(np.argmax(terms))
                ybar = qbar
                k_max = int(np.argmin(ybar - (-terms)))
                grad[k_min] += penalty * g.tau / p[k_min]
                grad[k_max] -= penalty * g.tau / p[k_max]
        p_new = p * np.exp(np.clip(step * grad, -30.0, 30.0))
        p_new = np.clip(p_new / p_new.sum(), objective.floor, None)
        p_new /= p_new.sum()
        value_new = policy_objective_value(p_new, g, objective.mode)
        p = p_new
        if abs(value_new - value) <= MIRROR_VALUE_TOL:
            value = value_new
            break
        value = value_new

    if objective.mode is ObjectiveMode.USER_REG:
        c_min, c_max = cmin_cmax(p, g)
        if c_min > c_max + 1e-6:
            raise InfeasibleError("no reachable policy found for user-side objective")
    return PolicySimplex(p)


@dataclass(frozen=True)
class BruteForceResult:
    y: np.ndarray
    policy: PolicySimplex
    worst_improvement: np.ndarray
    certified: bool
    grid_step: float


def brute_force_equilibrium(
    g: GameInstance,
    grid_step: float = 0.02,
    improve_tol: float = 1e-3,
    max_rounds: int = 200,
) -> BruteForceResult:
    """Grid best-response iteration with an exhaustive deviation certificate.

    Refuses anything beyond N <= 3, J <= 2: the per-principal grids grow
    exponentially and this oracle is only meant for tiny instances.
    """
    if g.n > 3 or g.num_principals > 2:
        raise DomainError("brute force restricted to N <= 3, J <= 2")
    if grid_step <= 0:
        raise DomainError("grid_step must be positive")

    grids = [_box_grid(g.box[j], grid_step) for j in range(g.num_principals)]
    J = g.num_principals
    y = np.zeros((J, g.n))

    for _ in range(max_rounds):
        moved = False
        for j in range(J):
            rest = y.sum(axis=0) - y[j]
            best = grids[j][_grid_argmax(grids[j], rest, g.box[j], g)]
            if np.max(np.abs(best - y[j])) > 0:
                y[j] = best
                moved = True
        if not moved:
            break

    worst = np.empty(J)
    for j in range(J):
        rest = y.sum(axis=0) - y[j]
        values = _grid_values(grids[j], rest, g.box[j], g)
        current = _grid_values(y[j][None, :], rest, g.box[j], g)[0]
        worst[j] = float(values.max() - current)
    policy = PolicySimplex(br_probs(g.log_pi0, y.sum(axis=0), g.tau))
    return BruteForceResult(y, policy, worst, bool(np.all(worst <= improve_tol)), grid_step)


def _box_grid(b: np.ndarray, step: float) -> np.ndarray:
    axes = []
    for bi in b:
        ax = np.arange(0.0, bi + step * 0.5, step)
        if ax.size == 0 or ax[-1] < bi - 1e-12:
            ax = np.append(ax, bi)
        axes.append(ax)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _grid_values(ys: np.ndarray, rest: np.ndarray, b: np.ndarray, g: GameInstance) -> np.ndarray:
    logits = g.log_pi0[None, :] + (rest[None, :] + ys) / g.tau
    logits = logits - logits.max(axis=1, keepdims=True)
    pis = np.exp(logits)
    pis /= pis.sum(axis=1, keepdims=True)
    return np.einsum("ij,ij->i", pis, b[None, :] - ys)


def _grid_argmax(ys: np.ndarray, rest: np.ndarray, b: np.ndarray, g: GameInstance) -> int:
    return int(np.argmax(_grid_values(ys, rest, b, g)))
