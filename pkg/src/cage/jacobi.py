"""Round-based best-response iteration over all principals.

Each round every principal re-solves its box subproblem against the
other principals' incentives; convergence is declared when both the
incentive profile and the induced policy stop moving in sup-norm.
Non-convergence is a structured status, never an exception, so callers
keep a usable last iterate.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .game import (
    ConstraintError,
    GameInstance,
    IncentiveProfile,
    PolicySimplex,
    br_probs,
    ir_value,
)
from .principal import SolverOptions, projected_gradient_norm, solve_mpec

IR_SLACK_TOL = -1e-10


class IRViolationError(RuntimeError):
    """Participation slack went negative at an accepted iterate."""


class UpdateMode(enum.Enum):
    JACOBI = "jacobi"
    GAUSS_SEIDEL = "gauss-seidel"


@dataclass(frozen=True)
class JacobiOptions:
    epsilon: float = 1e-4
    max_rounds: int = 100
    update_mode: UpdateMode = UpdateMode.JACOBI
    keep_trace: bool = True

    def __post_init__(self):
        if self.epsilon <= 0 or self.max_rounds < 1:
            raise ValueError("epsilon and max_rounds must be positive")


@dataclass(frozen=True)
class TraceRound:
    """Snapshot after one round: incentives (J, N), policy, per-principal step norms."""

    y: np.ndarray
    policy: np.ndarray
    step_norms: np.ndarray
    policy_change: float


@dataclass(frozen=True)
class EquilibriumTrace:
    init_y: np.ndarray
    rounds: tuple


@dataclass(frozen=True)
class EquilibriumResult:
    incentives: IncentiveProfile
    policy: PolicySimplex
    rounds: int
    converged: bool
    status: str
    trace: EquilibriumTrace | None


def solve_equilibrium(
    g: GameInstance,
    init: IncentiveProfile | None = None,
    opts: JacobiOptions | None = None,
    solver_opts: SolverOptions | None = None,
) -> EquilibriumResult:
    opts = opts or JacobiOptions()
    solver_opts = solver_opts or SolverOptions()
    J, n = g.num_principals, g.n

    if init is None:
        y = np.zeros((J, n))
    else:
        y = init.as_matrix().copy()
        for j in range(J):
            try:
                g.check_box(j, y[j])
            except ConstraintError as exc:
                raise ConstraintError(f"infeasible init: {exc}") from exc

    pi = br_probs(g.log_pi0, y.sum(axis=0), g.tau)
    trace_rounds = []
    init_y = y.copy()
    converged = False
    rounds = 0

    for rounds in range(1, opts.max_rounds + 1):
        new_y = y.copy()
        if opts.update_mode is UpdateMode.JACOBI:
            total = y.sum(axis=0)
            for j in range(J):
                res = solve_mpec(
                    j, total - y[j], g, solver_opts, warm_start=_warm(y[j])
                )
                new_y[j] = res.incentive.y
        else:
            for j in range(J):
                rest = new_y.sum(axis=0) - new_y[j]
                res = solve_mpec(j, rest, g, solver_opts, warm_start=_warm(new_y[j]))
                new_y[j] = res.incentive.y

        Y = new_y.sum(axis=0)
        new_pi = br_probs(g.log_pi0, Y, g.tau)
        slack = ir_value(Y, g)
        if slack < IR_SLACK_TOL:
            raise IRViolationError(f"IR slack {slack} at round {rounds}")

        step_norms = np.max(np.abs(new_y - y), axis=1)
        policy_change = float(np.max(np.abs(new_pi - pi)))
        if opts.keep_trace:
            trace_rounds.append(
                TraceRound(new_y.copy(), new_pi.copy(), step_norms, policy_change)
            )
        y, pi = new_y, new_pi
        if float(step_norms.max()) <= opts.epsilon and policy_change <= opts.epsilon:
            converged = True
            break

    trace = EquilibriumTrace(init_y, tuple(trace_rounds)) if opts.keep_trace else None
    return EquilibriumResult(
        incentives=IncentiveProfile.from_matrix(y),
        policy=PolicySimplex(pi),
        rounds=rounds,
        converged=converged,
        status="converged" if converged else "no-equilibrium-found",
        trace=trace,
    )


def _warm(y_row: np.ndarray):
    from .game import IncentiveVector

    return IncentiveVector(y_row.copy())


@dataclass(frozen=True)
class StationarityReport:
    grad_norms: np.ndarray
    tol: float
    passed: bool


def check_stationarity(
    result: EquilibriumResult, g: GameInstance, tol: float = 1e-6
) -> StationarityReport:
    """Projected-gradient norms of every principal at the returned profile."""
    y = result.incentives.as_matrix()
    total = y.sum(axis=0)
    norms = np.empty(g.num_principals)
    for j in range(g.num_principals):
        pi = br_probs(g.log_pi0, total, g.tau)
        r = g.box[j] - y[j]
        grad = (pi * r - pi * float(pi @ r)) / g.tau - pi
        norms[j] = projected_gradient_norm(grad, y[j], np.zeros(g.n), g.box[j])
    return StationarityReport(norms, tol, bool(np.all(norms <= tol)))
