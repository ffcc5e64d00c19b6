"""Ground-truth behaviors, trial sampling and a randomized-settings protocol harness."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .behavior import BehaviorTable, OutcomeCountTable, outcome_to_bit
from .chsh import deterministic_strategy_behavior
from .errors import InvalidBehavior, ResponderFailure, VisibilityOutOfRange

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SingletAngles:
    a0: float
    a1: float
    b0: float
    b1: float

    def __post_init__(self):
        for name in ("a0", "a1", "b0", "b1"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidBehavior(f"angle {name} must be finite, got {v!r}")
            object.__setattr__(self, name, math.fmod(v, TWO_PI) % TWO_PI)


def pr_box_behavior() -> BehaviorTable:
    """P(a, b | x, y) = 1/2 when bit(a) xor bit(b) = x*y."""
    arr = np.zeros((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            for ba in (0, 1):
                arr[x, y, ba, ba ^ (x & y)] = 0.5
    return BehaviorTable(arr)


def singlet_behavior(angles: SingletAngles) -> BehaviorTable:
    """Spin singlet measured along coplanar directions; E(x, y) = -cos(θa - θb)."""
    theta_a = (angles.a0, angles.a1)
    theta_b = (angles.b0, angles.b1)
    arr = np.empty((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            e = -math.cos(theta_a[x] - theta_b[y])
            for ba in (0, 1):
                for bb in (0, 1):
                    ab = (1 - 2 * ba) * (1 - 2 * bb)
                    arr[x, y, ba, bb] = (1.0 + ab * e) / 4.0
    return BehaviorTable(arr)


def lhv_behavior(weights: Sequence[float]) -> BehaviorTable:
    """Convex mixture of the 16 deterministic strategies."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (16,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidBehavior("weights must be 16 nonnegative numbers summing to 1")
    arr = sum(w[k] * deterministic_strategy_behavior(k).probs for k in range(16))
    # renormalize away summation roundoff only; validity was checked above
    arr = arr / arr.sum(axis=(2, 3), keepdims=True)
    return BehaviorTable(arr)


def mix_with_noise(behavior: BehaviorTable, visibility: float) -> BehaviorTable:
    if not 0.0 <= visibility <= 1.0:
        raise VisibilityOutOfRange(f"visibility must be in [0, 1], got {visibility!r}")
    return BehaviorTable(visibility * behavior.probs + (1.0 - visibility) * 0.25)


def sample_trials(behavior: BehaviorTable, n_per_block: int, seed: int) -> OutcomeCountTable:
    """Multinomial draw of ``n_per_block`` trials for each setting pair."""
    if n_per_block < 1:
        raise ValueError("n_per_block must be >= 1")
    rng = np.random.default_rng(seed)
    pvals = behavior.probs.reshape(4, 4)
    # guard against pvals summing to 1 + tiny, which multinomial rejects
    pvals = pvals / pvals.sum(axis=1, keepdims=True)
    draws = rng.multinomial(n_per_block, pvals)
    return OutcomeCountTable(draws.reshape(2, 2, 2, 2))


# --- protocol harness ---------------------------------------------------------

class SessionPolicy(str, enum.Enum):
    PER_TRIAL = "PER_TRIAL"
    PER_BLOCK = "PER_BLOCK"
    NEVER = "NEVER"


class Responder(Protocol):
    """One party. It sees its own role and setting, never the remote setting."""

    def __call__(self, role: str, setting: int, trial: int, session: str) -> int: ...


@dataclass(frozen=True)
class TrialLogEntry:
    trial: int
    x: int
    y: int
    a: int
    b: int
    alice_session: str
    bob_session: str

    def to_dict(self) -> dict:
        return {"trial": self.trial, "x": self.x, "y": self.y, "a": self.a, "b": self.b,
                "alice_session": self.alice_session, "bob_session": self.bob_session}


def _session_token(role: str, trial: int, policy: SessionPolicy, block_size: int) -> str:
    prefix = "A" if role == "alice" else "B"
    if policy is SessionPolicy.PER_TRIAL:
        index = trial
    elif policy is SessionPolicy.PER_BLOCK:
        index = trial // block_size
    else:
        index = 0
    return f"{prefix}-{index:06d}"


def _query(responder: Callable, role: str, setting: int, trial: int, session: str) -> int:
    out = responder(role, setting, trial, session)
    if out not in (1, -1) or isinstance(out, bool):
        raise InvalidBehavior(f"responder returned {out!r}; outcomes must be +1 or -1")
    return int(out)


def run_protocol(alice: Responder, bob: Responder, n_trials: int, seed: int,
                 new_session_policy: SessionPolicy | str = SessionPolicy.PER_TRIAL,
                 block_size: int = 100) -> tuple[OutcomeCountTable, list[TrialLogEntry]]:
    """Run ``n_trials`` rounds with settings drawn uniformly from a private generator.

    Each responder is called with only its own setting. Session tokens are a
    function of role, trial index and policy alone, so they carry no setting
    information. Under ``PER_BLOCK`` a fresh session starts every
    ``block_size`` trials.
    """
    policy = SessionPolicy(new_session_policy)
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    rng = np.random.default_rng(seed)
    settings = rng.integers(0, 2, size=(n_trials, 2))
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    log: list[TrialLogEntry] = []
    for t in range(n_trials):
        x, y = int(settings[t, 0]), int(settings[t, 1])
        sa = _session_token("alice", t, policy, block_size)
        sb = _session_token("bob", t, policy, block_size)
        outcomes = {}
        for role, responder, setting, session in (("alice", alice, x, sa), ("bob", bob, y, sb)):
            try:
                outcomes[role] = _query(responder, role, setting, t, session)
            except Exception as exc:
                raise ResponderFailure(role, t, OutcomeCountTable(counts), log, exc) from exc
        a, b = outcomes["alice"], outcomes["bob"]
        counts[x, y, outcome_to_bit(a), outcome_to_bit(b)] += 1
        log.append(TrialLogEntry(t, x, y, a, b, sa, sb))
    return OutcomeCountTable(counts), log


def write_protocol_log(log: Sequence[TrialLogEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry.to_dict(), sort_keys=False) + "\n")


def strategy_responder(outcomes: Sequence[int]) -> Callable[..., int]:
    """Responder answering ``outcomes[setting]`` regardless of trial or session."""
    table = tuple(int(o) for o in outcomes)

    def respond(role: str, setting: int, trial: int, session: str) -> int:
        return table[setting]

    return respond
