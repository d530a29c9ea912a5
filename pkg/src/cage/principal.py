"""One principal's box-constrained subproblem.

After substituting the agent's closed-form response, each principal
maximizes a smooth objective over the box [0, w^j q^j].  Projected
gradient ascent with Armijo backtracking is enough here: the gradient is
exact, the geometry is a box, and dimension is small, so a heavyweight
NLP solver would only add latency.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .game import ConstraintError, GameInstance, IncentiveVector, PolicySimplex, br_probs

ACTIVE_ATOL = 1e-7


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 500
    grad_tol: float = 1e-8
    line_search_shrink: float = 0.5
    armijo_c: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1 or self.grad_tol <= 0:
            raise ValueError("max_iters and grad_tol must be positive")
        if not 0 < self.line_search_shrink < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("shrink and armijo_c must lie in (0, 1)")


class Activity(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"
    FREE = "free"


@dataclass(frozen=True)
class MpecResult:
    incentive: IncentiveVector
    policy: PolicySimplex
    value: float
    iterations: int
    converged: bool


def projected_gradient_norm(grad, x, lower, upper, atol: float = ACTIVE_ATOL) -> float:
    """Sup-norm of the reduced gradient: components that could still improve."""
    reduced = np.array(grad, dtype=float)
    at_lower = x <= lower + atol
    at_upper = x >= upper - atol
    reduced[at_lower] = np.maximum(reduced[at_lower], 0.0)
    reduced[at_upper & ~at_lower] = np.minimum(reduced[at_upper & ~at_lower], 0.0)
    return float(np.max(np.abs(reduced))) if reduced.size else 0.0


def maximize_over_box(value_fn, grad_fn, lower, upper, x0, opts: SolverOptions):
    """Projected gradient ascent with Armijo backtracking.

    Returns (x, value, iterations, converged).  Every iterate is clipped into
    the box exactly, and accepted steps never decrease the objective.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    f = value_fn(x)
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        grad = grad_fn(x)
        if projected_gradient_norm(grad, x, lower, upper) <= opts.grad_tol:
            converged = True
            break
        step = 1.0
        accepted = False
        while step > 1e-16:
            cand = np.clip(x + step * grad, lower, upper)
            diff = cand - x
            f_cand = value_fn(cand)
            if f_cand >= f + opts.armijo_c * float(grad @ diff):
                x, f = cand, f_cand
                accepted = True
                break
            step *= opts.line_search_shrink
        if not accepted:
            # no productive step at machine precision; treat as stationary
            converged = projected_gradient_norm(grad, x, lower, upper) <= max(
                opts.grad_tol, 1e-10
            )
            break
    return x, f, it, converged


def solve_mpec(
    j: int,
    Y_minus_j,
    g: GameInstance,
    opts: SolverOptions | None = None,
    warm_start: IncentiveVector | None = None,
) -> MpecResult:
    """Best response of principal j to the others' aggregate incentive."""
    opts = opts or SolverOptions()
    rest = np.asarray(Y_minus_j, dtype=float)
    if np.any(rest < -1e-9):
        raise ConstraintError("other principals' aggregate must be nonnegative")
    b = g.box[j]
    log_pi0, tau = g.log_pi0, g.tau

    def value(y):
        pi = br_probs(log_pi0, rest + y, tau)
        return float(pi @ (b - y))

    def grad(y):
        pi = br_probs(log_pi0, rest + y, tau)
        r = b - y
        return (pi * r - pi * float(pi @ r)) / tau - pi

    x0 = np.zeros_like(b)
    if warm_start is not None:
        g.check_box(j, warm_start.y)
        if value(warm_start.y) > value(x0):
            x0 = warm_start.y
    y, f, iters, converged = maximize_over_box(value, grad, np.zeros_like(b), b, x0, opts)
    pi = PolicySimplex(br_probs(log_pi0, rest + y, tau))
    return MpecResult(IncentiveVector(y), pi, f, iters, converged)


def active_pattern(y_j, g: GameInstance, j: int, atol: float = ACTIVE_ATOL):
    """Per-coordinate LOWER/UPPER/FREE tags; degenerate boxes tag LOWER."""
    y = np.asarray(y_j, dtype=float)
    g.check_box(j, y, atol=atol)
    b = g.box[j]
    tags = []
    for yi, bi in zip(y, b):
        if bi <= atol or yi <= atol:
            tags.append(Activity.LOWER)
        elif yi >= bi - atol:
            tags.append(Activity.UPPER)
        else:
            tags.append(Activity.FREE)
    return tuple(tags)
