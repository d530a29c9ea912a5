"""Core data model for one decoding-step incentive game.

An agent picks a distribution over N candidate tokens while J principals
offer bounded incentive vectors on top of their weighted rewards.  Every
operation here is closed-form and pure; instances are immutable and safe
to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SIMPLEX_ATOL = 1e-12


class DomainError(ValueError):
    """Input outside an operation's mathematical domain."""


class ConstraintError(ValueError):
    """Box / simplex feasibility constraint violated."""


def _frozen_vector(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PolicySimplex:
    """Probability vector over the N candidates."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _frozen_vector(self.probs, "probs")
        if np.any(arr < 0):
            raise ConstraintError("probabilities must be nonnegative")
        if abs(arr.sum() - 1.0) > SIMPLEX_ATOL * max(1, arr.size):
            raise ConstraintError(f"probabilities sum to {arr.sum()!r}, not 1")
        object.__setattr__(self, "probs", arr)

    def full_support(self, floor: float = 1e-12) -> bool:
        return bool(np.all(self.probs >= floor))

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class RewardVector:
    """Per-candidate reward of one principal."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_vector(self.values, "values"))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class PreferenceWeights:
    """Nonnegative importance weights, one per principal."""

    w: np.ndarray

    def __post_init__(self):
        arr = _frozen_vector(self.w, "w")
        if np.any(arr < 0):
            raise ConstraintError("weights must be nonnegative")
        if not np.any(arr > 0):
            raise ConstraintError("at least one weight must be positive")
        object.__setattr__(self, "w", arr)

    def __len__(self) -> int:
        return self.w.size


@dataclass(frozen=True, eq=False)
class IncentiveVector:
    """One principal's incentive over the candidates."""

    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen_vector(self.y, "y"))

    def __len__(self) -> int:
        return self.y.size


@dataclass(frozen=True, eq=False)
class IncentiveProfile:
    """All principals' incentives plus their precomputed aggregate."""

    per_principal: tuple
    aggregate: np.ndarray

    def __post_init__(self):
        per = tuple(self.per_principal)
        agg = _frozen_vector(self.aggregate, "aggregate")
        total = np.sum([p.y for p in per], axis=0)
        if np.max(np.abs(total - agg)) > 1e-12 * max(1, len(per)):
            raise ConstraintError("aggregate does not match sum of incentives")
        object.__setattr__(self, "per_principal", per)
        object.__setattr__(self, "aggregate", agg)

    @classmethod
    def from_matrix(cls, y: np.ndarray) -> "IncentiveProfile":
        y = np.asarray(y, dtype=float)
        return cls(tuple(IncentiveVector(row) for row in y), y.sum(axis=0))

    def as_matrix(self) -> np.ndarray:
        return np.stack([p.y for p in self.per_principal])

    @classmethod
    def zeros(cls, num_principals: int, n: int) -> "IncentiveProfile":
        return cls.from_matrix(np.zeros((num_principals, n)))


@dataclass(frozen=True, eq=False)
class GameInstance:
    """One decoding-step game: base policy, rewards, weights, temperature."""

    pi0: PolicySimplex
    rewards: tuple
    weights: PreferenceWeights
    tau: float

    def __post_init__(self):
        rewards = tuple(self.rewards)
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise DomainError("tau must be a positive real")
        n = len(self.pi0)
        if n < 2:
            raise DomainError("need at least two candidates")
        if len(rewards) < 1:
            raise DomainError("need at least one principal")
        if len(self.weights) != len(rewards):
            raise DomainError("weights / rewards length mismatch")
        for q in rewards:
            if len(q) != n:
                raise DomainError("reward length does not match candidate count")
        if not self.pi0.full_support():
            raise ConstraintError("base policy must have full support")
        box = self.weights.w[:, None] * np.stack([q.values for q in rewards])
        if np.any(box < -1e-12):
            raise ConstraintError("weighted rewards must be nonnegative")
        box = np.clip(box, 0.0, None)
        box.setflags(write=False)
        log_pi0 = np.log(self.pi0.probs)
        log_pi0.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "_box", box)
        object.__setattr__(self, "_log_pi0", log_pi0)

    @property
    def n(self) -> int:
        return len(self.pi0)

    @property
    def num_principals(self) -> int:
        return len(self.rewards)

    @property
    def log_pi0(self) -> np.ndarray:
        return self._log_pi0

    @property
    def box(self) -> np.ndarray:
        """Upper bounds w^j * q^j of each principal's incentive box, shape (J, N)."""
        return self._box

    def reward_matrix(self) -> np.ndarray:
        return np.stack([q.values for q in self.rewards])

    def check_box(self, j: int, y: np.ndarray, atol: float = 1e-9) -> None:
        if np.any(y < -atol) or np.any(y > self._box[j] + atol):
            raise ConstraintError(f"incentive of principal {j} violates its box")

    @classmethod
    def create(cls, pi0, rewards, weights, tau) -> "GameInstance":
        return cls(
            PolicySimplex(np.asarray(pi0, dtype=float)),
            tuple(RewardVector(np.asarray(q, dtype=float)) for q in rewards),
            PreferenceWeights(np.asarray(weights, dtype=float)),
            float(tau),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "tau": self.tau,
                "pi0": self.pi0.probs.tolist(),
                "weights": self.weights.w.tolist(),
                "rewards": [q.values.tolist() for q in self.rewards],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GameInstance":
        obj = json.loads(text)
        return cls.create(obj["pi0"], obj["rewards"], obj["weights"], obj["tau"])


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    p = np.exp(z)
    return p / p.sum()


def br_probs(log_pi0: np.ndarray, Y: np.ndarray, tau: float) -> np.ndarray:
    """Raw best-response probabilities; internal fast path without validation."""
    return _softmax(log_pi0 + Y / tau)


def best_response(Y, g: GameInstance) -> PolicySimplex:
    """KL-tilted softmax of the base policy under aggregate incentive Y."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (g.n,) or not np.all(np.isfinite(Y)):
        raise DomainError("aggregate incentive must be a finite length-N vector")
    return PolicySimplex(br_probs(g.log_pi0, Y, g.tau))


def kl_divergence(pi: np.ndarray, pi0: np.ndarray) -> float:
    """KL(pi || pi0) with the 0*log(0/p) = 0 convention."""
    mask = pi > 0
    if np.any(pi0[mask] <= 0):
        raise DomainError("pi puts mass where the reference policy has none")
    p = pi[mask]
    return float(np.dot(p, np.log(p / pi0[mask])))


def agent_utility(pi: PolicySimplex, Y, g: GameInstance) -> float:
    """pi . Y  -  tau * KL(pi || pi0)."""
    Y = np.asarray(Y, dtype=float)
    p = pi.probs
    return float(np.dot(p, Y)) - g.tau * kl_divergence(p, g.pi0.probs)


def principal_utility(j: int, y_j, Y_minus_j, g: GameInstance) -> float:
    """Expected payoff of principal j net of its offered incentive."""
    y = np.asarray(y_j, dtype=float)
    rest = np.asarray(Y_minus_j, dtype=float)
    g.check_box(j, y)
    if np.any(rest < -1e-9):
        raise ConstraintError("other principals' aggregate must be nonnegative")
    pi = br_probs(g.log_pi0, rest + y, g.tau)
    return float(np.dot(pi, g.box[j] - y))


def response_jacobian(Y, g: GameInstance) -> np.ndarray:
    """Jacobian of the best response at Y: (Diag(pi) - pi pi^T) / tau."""
    pi = best_response(Y, g).probs
    return (np.diag(pi) - np.outer(pi, pi)) / g.tau


def principal_gradient(j: int, y_j, Y_minus_j, g: GameInstance) -> np.ndarray:
    """Exact gradient of principal_utility in the principal's own incentive."""
    y = np.asarray(y_j, dtype=float)
    rest = np.asarray(Y_minus_j, dtype=float)
    g.check_box(j, y)
    if np.any(rest < -1e-9):
        raise ConstraintError("other principals' aggregate must be nonnegative")
    pi = br_probs(g.log_pi0, rest + y, g.tau)
    S = (np.diag(pi) - np.outer(pi, pi)) / g.tau
    return S @ (g.box[j] - y) - pi


def ir_value(Y, g: GameInstance) -> float:
    """Agent's participation slack at the best response to Y.

    Nonnegative whenever Y >= 0, since the best response weakly improves on
    staying at the base policy and the base policy already collects pi0 . Y.
    """
    Y = np.asarray(Y, dtype=float)
    pi = br_probs(g.log_pi0, Y, g.tau)
    return float(np.dot(pi, Y)) - g.tau * kl_divergence(pi, g.pi0.probs)
