"""Game-dynamics diagnostics: regret traces, smoothing threshold, stability probes.

Deviation proxies a_t measure distance to the final iterate, not the true
fixed point (which is unknown mid-run); every report states that
substitution explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import DomainError, GameInstance, br_probs
from .jacobi import EquilibriumResult, JacobiOptions, solve_equilibrium
from .principal import SolverOptions, active_pattern, maximize_over_box

REGRET_SLACK = 1e-6
A_PROXY_NOTE = "a_t computed against the final iterate as a stand-in for the fixed point"


def lipschitz_constant(g: GameInstance) -> float:
    """Uniform Lipschitz bound R/tau + 1 on every principal's utility."""
    R = float(np.max(np.linalg.norm(g.box, axis=1)))
    return R / g.tau + 1.0


def tau_threshold(N: int, J: int, R: float, pi_lower: float) -> float:
    """Smoothing threshold 2 N^2 J R / (pi_ (1 - (N-1) pi_))."""
    if N < 2 or J < 1 or R < 0:
        raise DomainError("need N >= 2, J >= 1, R >= 0")
    if not 0 < pi_lower < 1.0 / (N - 1):
        raise DomainError("pi_lower must lie in (0, 1/(N-1))")
    denom = pi_lower * (1.0 - (N - 1) * pi_lower)
    if denom <= 0:
        return math.inf
    return 2.0 * N * N * J * R / denom


@dataclass(frozen=True)
class RegretReport:
    cumulative: np.ndarray  # (J, T) regret after each horizon
    instantaneous: np.ndarray  # (J, T) per-round realized gaps vs final comparator
    bound: np.ndarray  # (T,) deviation-based bound, shared across principals
    bound_satisfied: bool
    lipschitz: float
    a_proxy: np.ndarray  # (T+1,) deviations a_0..a_T against the final iterate
    note: str = A_PROXY_NOTE


def regret_trace(g: GameInstance, result: EquilibriumResult,
                 solver_opts: SolverOptions | None = None) -> RegretReport:
    """Hindsight regret of each principal along a recorded run.

    The best fixed incentive for a horizon T maximizes the summed utility
    against the realized opponents' incentives of rounds 1..T; that inner
    maximization reuses the box solver on the summed objective, so all
    regret figures carry the solver's tolerance.
    """
    if result.trace is None or not result.trace.rounds:
        raise DomainError("regret_trace needs a nonempty trace")
    solver_opts = solver_opts or SolverOptions()
    J, n = g.num_principals, g.n
    ys = [result.trace.init_y] + [r.y for r in result.trace.rounds]
    T = len(ys) - 1
    y_star = ys[-1]
    a = np.array([np.max(np.linalg.norm(ys[t] - y_star, axis=1)) for t in range(T + 1)])

    L = lipschitz_constant(g)
    bound = 2.0 * L * (J - 1) * np.cumsum(a[1:] + a[:-1])

    cumulative = np.empty((J, T))
    instantaneous = np.empty((J, T))
    log_pi0, tau = g.log_pi0, g.tau
    for j in range(J):
        b = g.box[j]
        rests = np.stack([ys[t].sum(axis=0) - ys[t][j] for t in range(1, T + 1)])
        realized = np.array(
            [_util(log_pi0, tau, rests[t - 1], ys[t][j], b) for t in range(1, T + 1)]
        )
        comparator = np.zeros(n)
        for horizon in range(1, T + 1):
            active = rests[:horizon]

            def value(y):
                return sum(_util(log_pi0, tau, rest, y, b) for rest in active)

            def grad(y):
                total = np.zeros(n)
                for rest in active:
                    pi = br_probs(log_pi0, rest + y, tau)
                    r = b - y
                    total += (pi * r - pi * float(pi @ r)) / tau - pi
                return total

            comparator, best_sum, _, _ = maximize_over_box(
                value, grad, np.zeros(n), b, comparator, solver_opts
            )
            cumulative[j, horizon - 1] = best_sum - realized[:horizon].sum()
        final_fixed = np.array(
            [_util(log_pi0, tau, rest, comparator, b) for rest in rests]
        )
        instantaneous[j] = final_fixed - realized

    ok = bool(np.all(cumulative <= bound[None, :] + REGRET_SLACK))
    return RegretReport(cumulative, instantaneous, bound, ok, L, a)


def _util(log_pi0, tau, rest, y, b) -> float:
    pi = br_probs(log_pi0, rest + y, tau)
    return float(pi @ (b - y))


@dataclass(frozen=True)
class StabilityReport:
    tau_threshold: float
    tau_above_threshold: bool
    ratios: dict  # target name -> array of ||delta pi|| / delta over probes
    pattern_stable: bool
    invalid_probes: int
    delta: float


def stability_probe(
    g: GameInstance,
    delta: float = 1e-3,
    n_probes: int = 5,
    seed: int = 0,
    jacobi_opts: JacobiOptions | None = None,
    solver_opts: SolverOptions | None = None,
) -> StabilityReport:
    """Empirical sensitivity of the equilibrium policy to parameter noise.

    Perturbs log pi0 (then renormalizes) and each principal's rewards by
    random vectors of norm delta, re-solves, and reports sensitivity
    ratios plus whether every probe kept the same box-activity pattern.
    """
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    jacobi_opts = jacobi_opts or JacobiOptions(keep_trace=False)
    base = solve_equilibrium(g, opts=jacobi_opts, solver_opts=solver_opts)
    if not base.converged:
        raise DomainError("base instance did not converge; cannot probe stability")
    y_star = base.incentives.as_matrix()
    pi_star = base.policy.probs

    R = float(np.max(np.linalg.norm(g.box - y_star, axis=1)))
    pi_lower = float(np.min(pi_star))
    try:
        threshold = tau_threshold(g.n, g.num_principals, R, pi_lower)
    except DomainError:
        threshold = math.inf

    base_patterns = [
        active_pattern(y_star[j], g, j) for j in range(g.num_principals)
    ]
    rng = np.random.default_rng(seed)
    ratios: dict[str, list[float]] = {}
    pattern_stable = True
    invalid = 0
    targets = ["pi0"] + [f"q{j}" for j in range(g.num_principals)]
    for target in targets:
        vals = []
        for _ in range(n_probes):
            perturbed = _perturb(g, target, delta, rng)
            res = solve_equilibrium(perturbed, opts=jacobi_opts, solver_opts=solver_opts)
            if not res.converged:
                invalid += 1
                continue
            if delta > 0:
                vals.append(float(np.linalg.norm(res.policy.probs - pi_star)) / delta)
            else:
                vals.append(0.0)
            y_new = res.incentives.as_matrix()
            for j in range(perturbed.num_principals):
                if active_pattern(y_new[j], perturbed, j) != base_patterns[j]:
                    pattern_stable = False
        ratios[target] = np.array(vals)
    return StabilityReport(
        threshold, g.tau > threshold, ratios, pattern_stable, invalid, delta
    )


def _perturb(g: GameInstance, target: str, delta: float, rng) -> GameInstance:
    if delta == 0:
        return g
    v = rng.standard_normal(g.n)
    norm = np.linalg.norm(v)
    v = v * (delta / norm) if norm > 0 else v
    pi0 = g.pi0.probs
    rewards = [q.values.copy() for q in g.rewards]
    if target == "pi0":
        logits = g.log_pi0 + v
        logits -= logits.max()
        p = np.exp(logits)
        pi0 = p / p.sum()
    else:
        j = int(target[1:])
        rewards[j] = np.clip(rewards[j] + v, 0.0, None)
    return GameInstance.create(pi0, rewards, g.weights.w, g.tau)
