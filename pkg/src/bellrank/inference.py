"""Uncertainty quantification for CHSH values.

Resampling randomness is counter based: replicate ``i`` draws from a
generator seeded by ``SeedSequence(seed, spawn_key=(i,))``. Replicates are
therefore independent of evaluation order and can be computed in any
schedule without changing the result.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .behavior import (
    OutcomeCountTable,
    _parse_outcome,
    _parse_setting,
    _read_rows,
    outcome_to_bit,
)
from .chsh import ALL_CONVENTIONS, STANDARD, SignConvention, chsh_values_all
from .errors import (
    DegenerateResamples,
    EmptyBlock,
    InvalidBehavior,
    NoEligibleParticipants,
    TooFewSamples,
    ZeroVariance,
)

_AB_SIGNS = np.array([1.0, -1.0, -1.0, 1.0])  # a*b over cells (bit_a, bit_b) flattened


class IntervalMethod(str, enum.Enum):
    BOOTSTRAP_PERCENTILE = "BOOTSTRAP_PERCENTILE"
    PERMUTATION_NULL = "PERMUTATION_NULL"


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    level: float
    method: IntervalMethod

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level!r}")
        if not self.lower <= self.point <= self.upper:
            raise ValueError("interval must satisfy lower <= point <= upper")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper,
                "level": self.level, "method": self.method.value}


@dataclass(frozen=True)
class TrialRecord:
    participant_id: Hashable
    x: int
    y: int
    a: int
    b: int

    def __post_init__(self):
        if self.x not in (0, 1) or self.y not in (0, 1):
            raise InvalidBehavior(f"settings must be 0 or 1, got x={self.x!r}, y={self.y!r}")
        if self.a not in (1, -1) or self.b not in (1, -1):
            raise InvalidBehavior(f"outcomes must be +1 or -1, got a={self.a!r}, b={self.b!r}")


def trials_to_counts(trials: Sequence[TrialRecord]) -> OutcomeCountTable:
    arr = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for t in trials:
        arr[t.x, t.y, outcome_to_bit(t.a), outcome_to_bit(t.b)] += 1
    return OutcomeCountTable(arr)


def read_trials_csv(path: Path | str, bit_outcomes: bool = False) -> list[TrialRecord]:
    trials = []
    for lineno, row in _read_rows(path, ("participant_id", "x", "y", "a", "b")):
        trials.append(TrialRecord(
            row["participant_id"],
            _parse_setting(row["x"], "x", lineno),
            _parse_setting(row["y"], "y", lineno),
            _parse_outcome(row["a"], "a", lineno, bit_outcomes),
            _parse_outcome(row["b"], "b", lineno, bit_outcomes),
        ))
    return trials


def _replicate_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def _check_blocks(totals: np.ndarray) -> None:
    for x in (0, 1):
        for y in (0, 1):
            if totals[x, y] == 0:
                raise EmptyBlock(x, y)


def _correlators_from_counts(counts: np.ndarray) -> np.ndarray:
    """Correlators of a (..., 4, 4) block-by-cell count array; NaN for empty blocks."""
    totals = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        e = (counts @ _AB_SIGNS) / totals
    return e.reshape(e.shape[:-1] + (2, 2))


def bootstrap_correlators(counts: OutcomeCountTable, n_resamples: int, seed: int) -> np.ndarray:
    """Correlation matrices of ``n_resamples`` block-wise multinomial resamples.

    Returns an array of shape ``(n_resamples, 2, 2)``.
    """
    totals = counts.block_totals
    _check_blocks(totals)
    blocks = counts.counts.reshape(4, 4)
    n = totals.reshape(4)
    pvals = blocks / n[:, None]
    out = np.empty((n_resamples, 4, 4), dtype=np.int64)
    for i in range(n_resamples):
        out[i] = _replicate_rng(seed, i).multinomial(n, pvals)
    return _correlators_from_counts(out)


def _percentile_interval(point: float, replicates: np.ndarray, level: float) -> IntervalEstimate:
    undefined = ~np.isfinite(replicates)
    if undefined.mean() > 0.5:
        raise DegenerateResamples(f"{undefined.sum()} of {replicates.size} replicates undefined")
    good = replicates[~undefined]
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(good, [alpha, 1.0 - alpha])
    # percentile intervals can exclude the point estimate for skewed replicates
    lower, upper = min(float(lower), point), max(float(upper), point)
    return IntervalEstimate(point, lower, upper, level, IntervalMethod.BOOTSTRAP_PERCENTILE)


def _observed_correlators(counts: OutcomeCountTable) -> np.ndarray:
    _check_blocks(counts.block_totals)
    return _correlators_from_counts(counts.counts.reshape(4, 4).astype(float))


def bootstrap_ci_chsh(counts: OutcomeCountTable, convention: SignConvention = STANDARD,
                      n_resamples: int = 2000, seed: int = 0,
                      level: float = 0.95) -> IntervalEstimate:
    """Percentile bootstrap interval for S, resampling each setting block separately."""
    return bootstrap_ci_all(counts, n_resamples, seed, level, conventions=(convention,))[convention.label]


def bootstrap_ci_all(counts: OutcomeCountTable, n_resamples: int = 2000, seed: int = 0,
                     level: float = 0.95,
                     conventions: Sequence[SignConvention] = ALL_CONVENTIONS,
                     ) -> dict[str, IntervalEstimate]:
    """Intervals for several conventions from one shared set of replicates."""
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    e_obs = _observed_correlators(counts)
    reps = bootstrap_correlators(counts, n_resamples, seed)
    s_obs = chsh_values_all(e_obs)
    s_reps = chsh_values_all(reps)  # (n_resamples, 8)
    index = {c.label: j for j, c in enumerate(ALL_CONVENTIONS)}
    out = {}
    for conv in conventions:
        j = index[conv.label]
        out[conv.label] = _percentile_interval(float(s_obs[j]), s_reps[:, j], level)
    return out


class ParticipantChsh(NamedTuple):
    participant_id: Hashable
    s: float
    n_trials_per_block: tuple[tuple[int, int], tuple[int, int]]


class ParticipantLevel(NamedTuple):
    included: list[ParticipantChsh]
    excluded: list[Hashable]


def participant_level_chsh(trials: Sequence[TrialRecord],
                           convention: SignConvention = STANDARD) -> ParticipantLevel:
    """S per participant from that participant's own correlators.

    Participants lacking any setting pair are listed in ``excluded``.
    """
    grouped: dict[Hashable, list[TrialRecord]] = {}
    for t in trials:
        grouped.setdefault(t.participant_id, []).append(t)
    included, excluded = [], []
    j = [c.label for c in ALL_CONVENTIONS].index(convention.label)
    for pid, rows in grouped.items():
        counts = trials_to_counts(rows)
        totals = counts.block_totals
        if np.any(totals == 0):
            excluded.append(pid)
            continue
        s = float(chsh_values_all(_observed_correlators(counts))[j])
        n_blocks = tuple(tuple(int(v) for v in row) for row in totals)
        included.append(ParticipantChsh(pid, s, n_blocks))
    if not included:
        raise NoEligibleParticipants("no participant has trials in all four setting pairs")
    return ParticipantLevel(included, excluded)


class TTestResult(NamedTuple):
    t: float
    p_two_sided: float
    df: int


def naive_t_test(per_unit_s: Sequence[float], null_value: float = 2.0) -> TTestResult:
    """One-sample t-test of per-unit S values against ``null_value``.

    Provided to reproduce the commonly reported analysis for side-by-side
    comparison with the resampling intervals; it assumes independent,
    normally distributed units.
    """
    x = np.asarray(per_unit_s, dtype=float)
    if x.size < 2:
        raise TooFewSamples("need at least two values")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        raise ZeroVariance("sample standard deviation is zero")
    df = x.size - 1
    t = (float(np.mean(x)) - null_value) / (sd / math.sqrt(x.size))
    p = float(min(1.0, 2.0 * stats.t.sf(abs(t), df)))
    return TTestResult(float(t), p, int(df))


class PermutationResult(NamedTuple):
    observed_s: float
    p: float


def _s_from_arrays(block: np.ndarray, prod: np.ndarray, sizes: np.ndarray, signs: np.ndarray) -> float:
    e = np.bincount(block, weights=prod, minlength=4) / sizes
    return float(e @ signs)


def permutation_test_chsh(trials: Sequence[TrialRecord], convention: SignConvention = STANDARD,
                          n_permutations: int = 1000, seed: int = 0) -> PermutationResult:
    """Permutation test of "no setting dependence".

    Outcome pairs (a, b) are shuffled across the pooled setting labels, which
    keeps the outcome margins and block sizes while breaking any association
    between settings and outcomes. ``p = (#{|S_perm| >= |S_obs|} + 1) / (n + 1)``.
    """
    block = np.array([2 * t.x + t.y for t in trials], dtype=np.int64)
    prod = np.array([t.a * t.b for t in trials], dtype=float)
    sizes = np.bincount(block, minlength=4).astype(float)
    for k in range(4):
        if sizes[k] == 0:
            raise EmptyBlock(k // 2, k % 2)
    signs = np.array(convention.signs, dtype=float)
    observed = _s_from_arrays(block, prod, sizes, signs)
    # relative slack so exact ties are not lost to summation order
    threshold = abs(observed) - 1e-12 * max(1.0, abs(observed))
    hits = 0
    for i in range(n_permutations):
        perm = _replicate_rng(seed, i).permutation(prod.size)
        if abs(_s_from_arrays(block, prod[perm], sizes, signs)) >= threshold:
            hits += 1
    return PermutationResult(observed, (hits + 1) / (n_permutations + 1))
