"""CHSH functionals, bound classification and local-model membership."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .behavior import (
    BehaviorTable,
    CorrelationMatrix,
    correlation_matrix,
    nonsignalling_residual,
    outcome_to_bit,
)
from .errors import IndexOutOfRange, InvalidBehavior, SignallingInput

LOCAL_BOUND = 2.0
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
ALGEBRAIC_BOUND = 4.0
CLASSIFY_EPS = 1e-9

# term order of the sign tuple
_TERMS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class SignConvention:
    """Signs applied to (E00, E01, E10, E11); one or three of them negative."""

    signs: tuple[int, int, int, int]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if len(signs) != 4 or any(s not in (1, -1) for s in signs):
            raise InvalidBehavior(f"signs must be four values in {{+1, -1}}, got {self.signs!r}")
        if signs.count(-1) not in (1, 3):
            raise InvalidBehavior(f"{self.signs!r} is not a CHSH placement (need one or three minus signs)")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def parse(cls, label: str) -> "SignConvention":
        if len(label) != 4 or set(label) - {"+", "-"}:
            raise InvalidBehavior(f"convention label must look like '+++-', got {label!r}")
        return cls(tuple(1 if c == "+" else -1 for c in label))

    @property
    def label(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs)

    def __str__(self) -> str:
        return self.label


ALL_CONVENTIONS: tuple[SignConvention, ...] = tuple(
    SignConvention(s) for s in itertools.product((1, -1), repeat=4) if s.count(-1) in (1, 3)
)
STANDARD = SignConvention((1, 1, 1, -1))

_SIGN_MATRIX = np.array([[s for s in c.signs] for c in ALL_CONVENTIONS], dtype=float)


class Classification(str, enum.Enum):
    LOCAL = "LOCAL"
    QUANTUM_COMPATIBLE = "QUANTUM_COMPATIBLE"
    SUPRA_QUANTUM = "SUPRA_QUANTUM"
    INVALID = "INVALID"


def _as_matrix(corr) -> np.ndarray:
    if isinstance(corr, CorrelationMatrix):
        return corr.e
    return np.asarray(corr, dtype=float).reshape(2, 2)


def chsh_value(corr: CorrelationMatrix, conv: SignConvention = STANDARD) -> float:
    e = _as_matrix(corr)
    return float(sum(s * e[x, y] for s, (x, y) in zip(conv.signs, _TERMS)))


def chsh_values_all(corr) -> np.ndarray:
    """S under every convention in ``ALL_CONVENTIONS`` order.

    Accepts a single 2x2 matrix or a stack with trailing shape (2, 2).
    """
    e = np.asarray(_as_matrix(corr) if isinstance(corr, CorrelationMatrix) else corr, dtype=float)
    flat = e.reshape(e.shape[:-2] + (4,))
    return flat @ _SIGN_MATRIX.T


def classify(s_max_abs: float, eps: float = CLASSIFY_EPS) -> Classification:
    if s_max_abs <= LOCAL_BOUND + eps:
        return Classification.LOCAL
    if s_max_abs <= TSIRELSON_BOUND + eps:
        return Classification.QUANTUM_COMPATIBLE
    if s_max_abs <= ALGEBRAIC_BOUND + eps:
        return Classification.SUPRA_QUANTUM
    return Classification.INVALID


@dataclass(frozen=True)
class ChshReport:
    s_by_convention: dict[str, float]
    s_max_abs: float
    classification: Classification
    bounds: tuple[float, float, float] = (LOCAL_BOUND, TSIRELSON_BOUND, ALGEBRAIC_BOUND)

    @property
    def argmax_convention(self) -> str:
        return max(self.s_by_convention, key=lambda k: abs(self.s_by_convention[k]))

    def to_dict(self) -> dict:
        return {
            "s_by_convention": dict(self.s_by_convention),
            "s_max_abs": self.s_max_abs,
            "classification": self.classification.value,
            "bounds": {"local": self.bounds[0], "tsirelson": self.bounds[1],
                       "algebraic": self.bounds[2]},
        }


def chsh_report(corr: CorrelationMatrix) -> ChshReport:
    values = chsh_values_all(corr)
    by_conv = {c.label: float(v) for c, v in zip(ALL_CONVENTIONS, values)}
    s_max_abs = float(np.max(np.abs(values)))
    return ChshReport(by_conv, s_max_abs, classify(s_max_abs))


# --- local polytope -----------------------------------------------------------

def strategy_responses(k: int) -> tuple[int, int, int, int]:
    """Outcomes (a(x=0), a(x=1), b(y=0), b(y=1)) of deterministic strategy ``k``.

    The four bits of ``k``, most significant first, are the outcome bits;
    bit 0 means +1, so ``k = 0`` answers +1 everywhere.
    """
    if not 0 <= int(k) < 16 or int(k) != k:
        raise IndexOutOfRange(f"strategy index must be in 0..15, got {k!r}")
    k = int(k)
    return tuple(1 - 2 * ((k >> shift) & 1) for shift in (3, 2, 1, 0))


def strategy_index(a0: int, a1: int, b0: int, b1: int) -> int:
    bits = [outcome_to_bit(v) for v in (a0, a1, b0, b1)]
    return bits[0] << 3 | bits[1] << 2 | bits[2] << 1 | bits[3]


def deterministic_strategy_behavior(k: int) -> BehaviorTable:
    a0, a1, b0, b1 = strategy_responses(k)
    arr = np.zeros((2, 2, 2, 2))
    for x, a in ((0, a0), (1, a1)):
        for y, b in ((0, b0), (1, b1)):
            arr[x, y, outcome_to_bit(a), outcome_to_bit(b)] = 1.0
    return BehaviorTable(arr)


# columns: strategies; rows: flattened (x, y, bit_a, bit_b) cells
_VERTICES = np.stack([deterministic_strategy_behavior(k).probs.ravel() for k in range(16)], axis=1)


@dataclass(frozen=True)
class LocalDecomposition:
    weights: dict[int, float]
    residual: float

    def to_dict(self) -> dict:
        return {"feasible": True, "weights": {str(k): w for k, w in self.weights.items()},
                "residual": self.residual}


@dataclass(frozen=True)
class Infeasible:
    """No local model within tolerance; the most violated CHSH convention certifies it."""

    convention: str
    value: float
    min_residual: float

    def to_dict(self) -> dict:
        return {"feasible": False, "certificate": {"convention": self.convention, "value": self.value},
                "min_residual": self.min_residual}


def local_model_decompose(behavior: BehaviorTable,
                          tolerance: float = 1e-9) -> LocalDecomposition | Infeasible:
    """Find a mixture of the 16 deterministic strategies reproducing ``behavior``.

    Solves min t subject to |V w - p| <= t cellwise, w >= 0, sum(w) = 1.
    """
    ns = nonsignalling_residual(behavior)
    if ns > tolerance:
        raise SignallingInput(f"nonsignalling residual {ns:.3g} exceeds tolerance {tolerance:.3g}")
    p = behavior.probs.ravel()
    n_cells, n_vert = _VERTICES.shape
    # variables: w_0..w_15, t
    c = np.zeros(n_vert + 1)
    c[-1] = 1.0
    ones = np.ones((n_cells, 1))
    a_ub = np.vstack([np.hstack([_VERTICES, -ones]), np.hstack([-_VERTICES, -ones])])
    b_ub = np.concatenate([p, -p])
    a_eq = np.hstack([np.ones((1, n_vert)), np.zeros((1, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n_vert + 1), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(f"local-model LP failed: {res.message}")
    w = np.clip(res.x[:n_vert], 0.0, None)
    w /= w.sum()
    residual = float(np.max(np.abs(_VERTICES @ w - p)))
    if residual <= tolerance:
        weights = {k: float(v) for k, v in enumerate(w) if v > 0.0}
        return LocalDecomposition(weights, residual)
    values = chsh_values_all(correlation_matrix(behavior))
    worst = int(np.argmax(values))
    return Infeasible(ALL_CONVENTIONS[worst].label, float(values[worst]), residual)
