"""Bipartite measurement statistics for the two-setting, two-outcome scenario.

Tables are stored as ``(2, 2, 2, 2)`` arrays indexed ``[x, y, bit_a, bit_b]``
where the outcome ``a = (-1) ** bit_a``; bit 0 is the +1 outcome.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Mapping

import numpy as np

from .errors import EmptyBlock, InvalidBehavior, MissingSettingWeights, SchemaViolation

NORM_TOL = 1e-12

OUTCOMES = (1, -1)
# a*b for cells [bit_a, bit_b]
_PRODUCT_SIGNS = np.array([[1.0, -1.0], [-1.0, 1.0]])


def outcome_to_bit(a: int) -> int:
    if a == 1:
        return 0
    if a == -1:
        return 1
    raise InvalidBehavior(f"outcome must be +1 or -1, got {a!r}")


def bit_to_outcome(bit: int) -> int:
    if bit in (0, 1):
        return 1 - 2 * int(bit)
    raise InvalidBehavior(f"bit must be 0 or 1, got {bit!r}")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OutcomeCountTable:
    """Raw tallies n(a, b | x, y).

    ``encoding`` records the outcome alphabet the data arrived in
    (``"pm1"`` or ``"bit"``); storage is always in the ±1 convention.
    """

    counts: np.ndarray
    encoding: str = "pm1"

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.shape != (2, 2, 2, 2):
            raise InvalidBehavior(f"count table must have shape (2,2,2,2), got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr != np.round(arr)):
            raise InvalidBehavior("counts must be nonnegative integers")
        object.__setattr__(self, "counts", _readonly(arr.astype(np.int64)))

    @classmethod
    def zeros(cls) -> "OutcomeCountTable":
        return cls(np.zeros((2, 2, 2, 2), dtype=np.int64))

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[int, int, int, int], int],
                     encoding: str = "pm1") -> "OutcomeCountTable":
        """Build from ``{(x, y, a, b): count}`` with ±1 outcomes; absent cells are 0."""
        arr = np.zeros((2, 2, 2, 2), dtype=np.int64)
        for (x, y, a, b), n in mapping.items():
            arr[x, y, outcome_to_bit(a), outcome_to_bit(b)] += n
        return cls(arr, encoding=encoding)

    @property
    def block_totals(self) -> np.ndarray:
        return self.counts.sum(axis=(2, 3))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, x: int, y: int, a: int, b: int) -> int:
        return int(self.counts[x, y, outcome_to_bit(a), outcome_to_bit(b)])

    def as_records(self) -> list[dict]:
        return [
            {"x": x, "y": y, "a": a, "b": b, "count": self.count(x, y, a, b)}
            for x in (0, 1) for y in (0, 1) for a in OUTCOMES for b in OUTCOMES
        ]

    def __add__(self, other: "OutcomeCountTable") -> "OutcomeCountTable":
        return OutcomeCountTable(self.counts + other.counts, encoding=self.encoding)


@dataclass(frozen=True, eq=False)
class BehaviorTable:
    """Conditional distributions P(a, b | x, y)."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=float)
        if arr.shape != (2, 2, 2, 2):
            raise InvalidBehavior(f"behavior must have shape (2,2,2,2), got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidBehavior("probabilities must be finite and nonnegative")
        sums = arr.sum(axis=(2, 3))
        bad = np.abs(sums - 1.0) > NORM_TOL
        if np.any(bad):
            x, y = np.argwhere(bad)[0]
            raise InvalidBehavior(
                f"block (x={x}, y={y}) sums to {sums[x, y]!r}, not 1 within {NORM_TOL}")
        object.__setattr__(self, "probs", _readonly(arr))

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[int, int, int, int], float]) -> "BehaviorTable":
        arr = np.zeros((2, 2, 2, 2))
        for (x, y, a, b), p in mapping.items():
            arr[x, y, outcome_to_bit(a), outcome_to_bit(b)] += p
        return cls(arr)

    @classmethod
    def uniform(cls) -> "BehaviorTable":
        return cls(np.full((2, 2, 2, 2), 0.25))

    def prob(self, x: int, y: int, a: int, b: int) -> float:
        return float(self.probs[x, y, outcome_to_bit(a), outcome_to_bit(b)])

    def as_records(self) -> list[dict]:
        return [
            {"x": x, "y": y, "a": a, "b": b, "p": self.prob(x, y, a, b)}
            for x in (0, 1) for y in (0, 1) for a in OUTCOMES for b in OUTCOMES
        ]


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """``e[x, y] = E(A_x B_y)``."""

    e: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.e, dtype=float)
        if arr.shape != (2, 2):
            raise InvalidBehavior(f"correlation matrix must be 2x2, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1 + NORM_TOL):
            raise InvalidBehavior("correlators must lie in [-1, 1]")
        object.__setattr__(self, "e", _readonly(arr))

    def tolist(self) -> list[list[float]]:
        return self.e.tolist()


def _response_array(dist) -> np.ndarray:
    if isinstance(dist, Mapping):
        arr = np.zeros((2, 2))
        for (a, b), p in dist.items():
            arr[outcome_to_bit(a), outcome_to_bit(b)] += p
        return arr
    arr = np.asarray(dist, dtype=float)
    if arr.shape != (2, 2):
        raise InvalidBehavior(f"response must be a 2x2 table over (a, b), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class HiddenVariableModel:
    """Hidden-variable model: P(λ), P(a, b | x, y, λ), optionally P(λ | x, y).

    ``response`` maps ``(λ, x, y)`` to a distribution over ``(a, b)``, given
    either as ``{(a, b): p}`` or as a 2x2 array indexed by outcome bits.
    ``setting_dependent_weights`` maps ``(x, y)`` to ``{λ: weight}``.
    """

    lambda_weights: Mapping[Hashable, float]
    response: Mapping[tuple, object]
    setting_dependent_weights: Mapping[tuple[int, int], Mapping[Hashable, float]] | None = None
    _responses: dict = field(init=False, repr=False)

    def __post_init__(self):
        total = sum(self.lambda_weights.values())
        if abs(total - 1.0) > NORM_TOL or any(w < 0 for w in self.lambda_weights.values()):
            raise InvalidBehavior(f"lambda weights must be nonnegative and sum to 1, got {total!r}")
        responses = {}
        for lam in self.lambda_weights:
            for x in (0, 1):
                for y in (0, 1):
                    if (lam, x, y) not in self.response:
                        raise InvalidBehavior(f"missing response for (lambda={lam!r}, x={x}, y={y})")
                    arr = _response_array(self.response[(lam, x, y)])
                    if np.any(arr < 0) or abs(arr.sum() - 1.0) > NORM_TOL:
                        raise InvalidBehavior(f"response for {(lam, x, y)!r} is not a distribution")
                    responses[(lam, x, y)] = arr
        object.__setattr__(self, "_responses", responses)
        if self.setting_dependent_weights is not None:
            for xy in ((0, 0), (0, 1), (1, 0), (1, 1)):
                dist = self.setting_dependent_weights.get(xy)
                if dist is None:
                    raise InvalidBehavior(f"setting_dependent_weights missing pair {xy}")
                if abs(sum(dist.values()) - 1.0) > NORM_TOL or any(w < 0 for w in dist.values()):
                    raise InvalidBehavior(f"P(lambda | x,y={xy}) is not a distribution")

    def response_table(self, lam, x: int, y: int) -> np.ndarray:
        return self._responses[(lam, x, y)]

    def behavior(self) -> BehaviorTable:
        """Observed behavior, using P(λ | x, y) when present and P(λ) otherwise."""
        arr = np.zeros((2, 2, 2, 2))
        for x in (0, 1):
            for y in (0, 1):
                weights = (self.setting_dependent_weights[(x, y)]
                           if self.setting_dependent_weights is not None else self.lambda_weights)
                for lam, w in weights.items():
                    arr[x, y] += w * self._responses[(lam, x, y)]
        return BehaviorTable(arr)


def normalize_counts(counts: OutcomeCountTable) -> BehaviorTable:
    """Empirical conditional distribution of each (x, y) block."""
    totals = counts.block_totals
    for x in (0, 1):
        for y in (0, 1):
            if totals[x, y] == 0:
                raise EmptyBlock(x, y)
    return BehaviorTable(counts.counts / totals[:, :, None, None])


def correlator(behavior: BehaviorTable, x: int, y: int) -> float:
    return float(np.sum(_PRODUCT_SIGNS * behavior.probs[x, y]))


def correlation_matrix(behavior: BehaviorTable) -> CorrelationMatrix:
    e = np.einsum("xyab,ab->xy", behavior.probs, _PRODUCT_SIGNS)
    return CorrelationMatrix(np.clip(e, -1.0, 1.0))


def nonsignalling_residual(behavior: BehaviorTable) -> float:
    """Largest change in one party's marginal when the distant setting flips."""
    p = behavior.probs
    alice = p.sum(axis=3)  # [x, y, a]
    bob = p.sum(axis=2)  # [x, y, b]
    return float(max(np.max(np.abs(alice[:, 0] - alice[:, 1])),
                     np.max(np.abs(bob[0] - bob[1]))))


def factorization_residual(model: HiddenVariableModel) -> float:
    worst = 0.0
    for lam in model.lambda_weights:
        for x in (0, 1):
            for y in (0, 1):
                joint = model.response_table(lam, x, y)
                product = np.outer(joint.sum(axis=1), joint.sum(axis=0))
                worst = max(worst, float(np.max(np.abs(joint - product))))
    return worst


def measurement_independence_residual(model: HiddenVariableModel,
                                      setting_prior: np.ndarray | None = None) -> float:
    """max |P(λ|x,y) - P(λ)| with P(λ) averaged over settings.

    ``setting_prior`` is a 2x2 array of setting-pair probabilities; uniform
    when omitted.
    """
    if model.setting_dependent_weights is None:
        raise MissingSettingWeights(
            "model has no setting-dependent weights; measurement independence holds by construction")
    prior = np.full((2, 2), 0.25) if setting_prior is None else np.asarray(setting_prior, dtype=float)
    if prior.shape != (2, 2) or np.any(prior < 0) or abs(prior.sum() - 1.0) > NORM_TOL:
        raise InvalidBehavior("setting_prior must be a 2x2 distribution")
    sdw = model.setting_dependent_weights
    labels = set(model.lambda_weights)
    for dist in sdw.values():
        labels.update(dist)
    worst = 0.0
    for lam in labels:
        cond = np.array([[sdw[(x, y)].get(lam, 0.0) for y in (0, 1)] for x in (0, 1)])
        marginal = float(np.sum(prior * cond))
        worst = max(worst, float(np.max(np.abs(cond - marginal))))
    return worst


# --- CSV ingestion -----------------------------------------------------------

COUNT_HEADER = ("x", "y", "a", "b", "count")


def _parse_setting(value: str, name: str, lineno: int) -> int:
    try:
        v = int(value)
    except ValueError:
        raise SchemaViolation(f"line {lineno}: {name}={value!r} is not an integer") from None
    if v not in (0, 1):
        raise SchemaViolation(f"line {lineno}: {name}={v} must be 0 or 1")
    return v


def _parse_outcome(value: str, name: str, lineno: int, bit_outcomes: bool) -> int:
    try:
        v = int(value)
    except ValueError:
        raise SchemaViolation(f"line {lineno}: {name}={value!r} is not an integer") from None
    if bit_outcomes:
        if v not in (0, 1):
            raise SchemaViolation(f"line {lineno}: {name}={v} must be 0 or 1 with bit outcomes")
        return bit_to_outcome(v)
    if v not in (1, -1):
        raise SchemaViolation(f"line {lineno}: {name}={v} must be -1 or +1")
    return v


def _read_rows(path: Path | str, header: tuple[str, ...]) -> Iterable[tuple[int, dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != header:
            raise SchemaViolation(f"{path}: expected header {','.join(header)}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise SchemaViolation(f"line {lineno}: wrong number of fields")
            yield lineno, {k.strip(): v.strip() for k, v in row.items()}


def read_counts_csv(path: Path | str, bit_outcomes: bool = False) -> OutcomeCountTable:
    """Read ``x,y,a,b,count`` rows; duplicate rows are summed."""
    arr = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for lineno, row in _read_rows(path, COUNT_HEADER):
        x = _parse_setting(row["x"], "x", lineno)
        y = _parse_setting(row["y"], "y", lineno)
        a = _parse_outcome(row["a"], "a", lineno, bit_outcomes)
        b = _parse_outcome(row["b"], "b", lineno, bit_outcomes)
        try:
            n = int(row["count"])
        except ValueError:
            raise SchemaViolation(f"line {lineno}: count={row['count']!r} is not an integer") from None
        if n < 0:
            raise SchemaViolation(f"line {lineno}: negative count")
        arr[x, y, outcome_to_bit(a), outcome_to_bit(b)] += n
    return OutcomeCountTable(arr, encoding="bit" if bit_outcomes else "pm1")


def write_counts_csv(counts: OutcomeCountTable, path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUNT_HEADER)
        for rec in counts.as_records():
            writer.writerow([rec[k] for k in COUNT_HEADER])
