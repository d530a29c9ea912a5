"""Token-level decoding over logit-dump streams.

Each stream record carries the base model's log-probabilities and one
guidance model's log-probabilities per objective over the same candidate
set.  Per step the harness extracts implicit rewards, builds a game over
the candidates, solves the equilibrium (optionally warm-started from the
previous step) and selects a token.  No tokenizer, no model execution:
streams come from files or from the synthetic generator below.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .game import ConstraintError, GameInstance, IncentiveProfile, PreferenceWeights
from .jacobi import EquilibriumResult, JacobiOptions, solve_equilibrium
from .principal import SolverOptions


class StreamFormatError(ValueError):
    """Malformed or mis-ordered logit stream."""


class RewardNormalization(enum.Enum):
    SHIFT_MIN_TO_ZERO = "shift"
    CLAMP_NEGATIVE_TO_ZERO = "clamp"


class Selection(enum.Enum):
    GREEDY = "greedy"
    SAMPLE = "sample"


@dataclass(frozen=True, eq=False)
class LogitRecord:
    """One decoding step: candidate ids, base and per-objective log-probabilities."""

    step: int
    candidate_ids: tuple
    base_logprobs: np.ndarray
    objective_logprobs: np.ndarray  # (J, N)

    def __post_init__(self):
        base = np.asarray(self.base_logprobs, dtype=float)
        obj = np.atleast_2d(np.asarray(self.objective_logprobs, dtype=float))
        ids = tuple(self.candidate_ids)
        if base.ndim != 1 or len(ids) != base.size or obj.shape[1] != base.size:
            raise StreamFormatError(f"length mismatch in record at step {self.step}")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(obj))):
            raise StreamFormatError(f"non-finite log-probabilities at step {self.step}")
        object.__setattr__(self, "candidate_ids", ids)
        object.__setattr__(self, "base_logprobs", base)
        object.__setattr__(self, "objective_logprobs", obj)

    @property
    def num_objectives(self) -> int:
        return self.objective_logprobs.shape[0]


@dataclass(frozen=True)
class DecodeOptions:
    top_n: int = 50
    tau: float = 0.1
    epsilon: float = 1e-4
    max_new_tokens: int = 512
    selection: Selection = Selection.GREEDY
    seed: int = 0
    reward_normalization: RewardNormalization = RewardNormalization.SHIFT_MIN_TO_ZERO
    warm_start: bool = True  # carry incentives across steps; off = strict per-step solves
    max_rounds: int = 100


@dataclass
class DecodeOutcome:
    chosen_ids: list
    chosen_indices: list
    policies: list  # per-step equilibrium policy arrays
    cumulative_rewards: np.ndarray  # per-objective totals of raw rewards of chosen tokens
    converged: list  # per-step convergence flags
    fallback_steps: list  # steps where the non-converged fallback policy was used
    options: DecodeOptions


def extract_rewards(rec: LogitRecord, norm: RewardNormalization) -> np.ndarray:
    """Implicit rewards: guidance/base log-ratio per candidate, normalized to >= 0."""
    raw = rec.objective_logprobs - rec.base_logprobs[None, :]
    if norm is RewardNormalization.SHIFT_MIN_TO_ZERO:
        return raw - raw.min(axis=1, keepdims=True)
    return np.clip(raw, 0.0, None)


def raw_rewards(rec: LogitRecord) -> np.ndarray:
    return rec.objective_logprobs - rec.base_logprobs[None, :]


def _base_policy(rec: LogitRecord) -> np.ndarray:
    z = rec.base_logprobs - rec.base_logprobs.max()
    p = np.exp(z)
    return p / p.sum()


def step_decode(
    rec: LogitRecord,
    weights,
    opts: DecodeOptions | None = None,
    warm: IncentiveProfile | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[int, EquilibriumResult]:
    """Solve one step's game and pick a candidate index."""
    opts = opts or DecodeOptions()
    w = PreferenceWeights(np.asarray(weights, dtype=float))
    if len(w) != rec.num_objectives:
        raise ConstraintError("preference dimension does not match stream objectives")
    rewards = extract_rewards(rec, opts.reward_normalization)
    g = GameInstance.create(_base_policy(rec), rewards, w.w, opts.tau)

    init = None
    if warm is not None:
        clipped = np.minimum(np.clip(warm.as_matrix(), 0.0, None), g.box)
        init = IncentiveProfile.from_matrix(clipped)
    result = solve_equilibrium(
        g,
        init=init,
        opts=JacobiOptions(epsilon=opts.epsilon, max_rounds=opts.max_rounds, keep_trace=False),
    )
    pi = result.policy.probs
    if opts.selection is Selection.GREEDY:
        idx = int(np.argmax(pi))
    else:
        if rng is None:
            rng = np.random.default_rng(opts.seed)
        idx = int(rng.choice(pi.size, p=pi / pi.sum()))
    return idx, result


def decode_stream(records, weights, opts: DecodeOptions | None = None) -> DecodeOutcome:
    """Sequentially decode a step-ordered record stream."""
    opts = opts or DecodeOptions()
    rng = np.random.default_rng(opts.seed) if opts.selection is Selection.SAMPLE else None
    chosen_ids: list = []
    chosen_indices: list = []
    policies: list = []
    converged: list = []
    fallback: list = []
    totals: np.ndarray | None = None
    warm: IncentiveProfile | None = None
    prev_step = None
    for rec in records:
        if prev_step is not None and rec.step <= prev_step:
            raise StreamFormatError(f"records out of order at step {rec.step}")
        prev_step = rec.step
        if len(chosen_ids) >= opts.max_new_tokens:
            break
        idx, result = step_decode(rec, weights, opts, warm=warm, rng=rng)
        if totals is None:
            totals = np.zeros(rec.num_objectives)
        totals += raw_rewards(rec)[:, idx]
        chosen_ids.append(rec.candidate_ids[idx])
        chosen_indices.append(idx)
        policies.append(result.policy.probs)
        converged.append(result.converged)
        if not result.converged:
            fallback.append(rec.step)
        warm = result.incentives if opts.warm_start else None
    if totals is None:
        totals = np.zeros(0)
    return DecodeOutcome(
        chosen_ids, chosen_indices, policies, totals, converged, fallback, opts
    )


def synth_stream(
    n_steps: int,
    n_candidates: int,
    num_objectives: int,
    correlation: float = 1.0,
    seed: int = 0,
) -> list:
    """Reproducible synthetic logit records with controlled objective correlation.

    correlation=1 gives every objective the identical candidate ranking at
    every step; correlation=-1 reverses it (exactly, for two objectives).
    """
    if not -1.0 <= correlation <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    rng = np.random.default_rng(seed)
    records = []
    for step in range(n_steps):
        base = rng.standard_normal(n_candidates)
        base_logprobs = base - _logsumexp(base)
        anchor = rng.standard_normal(n_candidates)
        objs = np.empty((num_objectives, n_candidates))
        for j in range(num_objectives):
            if j == 0:
                score = anchor
            else:
                sign_anchor = anchor if correlation >= 0 else -anchor
                mix = abs(correlation)
                noise = rng.standard_normal(n_candidates)
                score = mix * sign_anchor + np.sqrt(max(1 - mix * mix, 0.0)) * noise
            logits = base_logprobs + score
            objs[j] = logits - _logsumexp(logits)
        records.append(
            LogitRecord(step, tuple(range(n_candidates)), base_logprobs, objs)
        )
    return records


def _logsumexp(x: np.ndarray) -> float:
    m = x.max()
    return float(m + np.log(np.exp(x - m).sum()))


def read_stream(path) -> list:
    """Parse a JSONL stream file; raises StreamFormatError with the bad line number."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(
                    LogitRecord(
                        int(obj["step"]),
                        tuple(obj["ids"]),
                        obj["base"],
                        obj["objectives"],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise StreamFormatError(f"line {lineno}: {exc}") from exc
    return records


def write_stream(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "step": rec.step,
                        "ids": list(rec.candidate_ids),
                        "base": rec.base_logprobs.tolist(),
                        "objectives": rec.objective_logprobs.tolist(),
                    }
                )
                + "\n"
            )
