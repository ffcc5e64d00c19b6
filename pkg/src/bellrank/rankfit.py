"""Discrete-likelihood fitting and model selection for rank-frequency tables.

Every family is a pmf over the finite support ``1..V``: an unnormalized
weight ``w(i)`` divided by ``sum_{j<=V} w(j)``. Fits maximize the multinomial
log-likelihood ``sum_i n_i log p(i)`` (the data-only combinatorial constant is
dropped for every family alike).

Bose-Einstein rank form (``BE_RANK``), with rank playing the role of energy::

    w(i) = 1 / (A exp(i / B) - 1),   A > exp(-1 / B),  B > 0

For ``i << B`` this is close to ``1 / ((A - 1) + (A / B) i)``, a
Zipf-Mandelbrot shape, and for ``A exp(i / B) >> 1`` it decays like
``exp(-i / B) / A``. :func:`zipf_regime_report` quantifies both.
"""

from __future__ import annotations

import collections
import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln, logit, logsumexp

from .errors import (
    NonPositiveLevel,
    OptimizationFailed,
    ParamOutOfDomain,
    RankOutOfSupport,
    TooFewLevels,
)


class Family(str, enum.Enum):
    BE_RANK = "BE_RANK"
    MB_EXPONENTIAL = "MB_EXPONENTIAL"
    ZIPF = "ZIPF"
    ZIPF_MANDELBROT = "ZIPF_MANDELBROT"
    DISCRETE_LOGNORMAL = "DISCRETE_LOGNORMAL"
    STRETCHED_EXPONENTIAL = "STRETCHED_EXPONENTIAL"
    YULE_SIMON = "YULE_SIMON"


@dataclass(frozen=True, eq=False)
class RankTable:
    """(rank, count) pairs with ranks strictly increasing.

    ``V`` is the support size and defaults to the largest rank. ``labels``
    optionally carries the token for each entry.
    """

    ranks: np.ndarray
    counts: np.ndarray
    V: int | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64).reshape(-1)
        counts = np.asarray(self.counts).reshape(-1)
        if ranks.shape != counts.shape:
            raise ValueError("ranks and counts must have equal length")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValueError("counts must be nonnegative integers")
        if ranks.size and (ranks[0] < 1 or np.any(np.diff(ranks) <= 0)):
            raise ValueError("ranks must be positive and strictly increasing")
        max_rank = int(ranks[-1]) if ranks.size else 0
        V = max_rank if self.V is None else int(self.V)
        if V < max_rank:
            raise RankOutOfSupport(f"support V={V} is smaller than max rank {max_rank}")
        if self.labels is not None and len(self.labels) != ranks.size:
            raise ValueError("labels must match entries")
        for arr in (ranks, counts):
            arr.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "counts", counts.astype(np.int64))
        object.__setattr__(self, "V", V)

    @classmethod
    def from_counts(cls, counts: Sequence[int], V: int | None = None) -> "RankTable":
        """Counts for ranks 1, 2, ... in order."""
        counts = np.asarray(counts)
        return cls(np.arange(1, counts.size + 1), counts, V)

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    def with_support(self, V: int) -> "RankTable":
        return RankTable(self.ranks, self.counts, V, self.labels)

    def dense_counts(self) -> np.ndarray:
        """Counts for ranks 1..V, zeros filled in."""
        out = np.zeros(self.V, dtype=np.int64)
        out[self.ranks - 1] = self.counts
        return out


# --- families -----------------------------------------------------------------

def _log_expm1(u: np.ndarray) -> np.ndarray:
    """log(exp(u) - 1) for u > 0 without overflow or cancellation."""
    u = np.asarray(u, dtype=float)
    big = u > 1.0
    out = np.empty_like(u)
    out[big] = u[big] + np.log1p(-np.exp(-u[big]))
    out[~big] = np.log(np.expm1(u[~big]))
    return out


def _be_log_weights_c(c: float, B: float, ranks: np.ndarray) -> np.ndarray:
    # c = log(A) + 1/B > 0, so A exp(i/B) = exp(c + (i-1)/B)
    return -_log_expm1(c + (ranks - 1.0) / B)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ParamOutOfDomain(msg)


def _finite(params: Mapping[str, float], names: Iterable[str]) -> None:
    for n in names:
        if n not in params:
            raise ParamOutOfDomain(f"missing parameter {n!r}")
        _check(math.isfinite(params[n]), f"parameter {n}={params[n]!r} is not finite")


def _lw_be(p, i):
    _finite(p, ("A", "B"))
    A, B = p["A"], p["B"]
    _check(B > 0, f"BE_RANK needs B > 0, got {B!r}")
    _check(A > 0 and math.log(A) + 1.0 / B > 0,
           f"BE_RANK pole: A={A!r} <= exp(-1/B) makes A*exp(i/B) <= 1")
    return _be_log_weights_c(math.log(A) + 1.0 / B, B, i)


def _lw_mb(p, i):
    _finite(p, ("B",))
    _check(p["B"] > 0, f"MB_EXPONENTIAL needs B > 0, got {p['B']!r}")
    return -i / p["B"]


def _lw_zipf(p, i):
    _finite(p, ("s",))
    _check(p["s"] > 0, f"ZIPF needs s > 0, got {p['s']!r}")
    return -p["s"] * np.log(i)


def _lw_zm(p, i):
    _finite(p, ("s", "q"))
    _check(p["s"] > 0, f"ZIPF_MANDELBROT needs s > 0, got {p['s']!r}")
    _check(p["q"] > -1, f"ZIPF_MANDELBROT needs q > -1, got {p['q']!r}")
    return -p["s"] * np.log(i + p["q"])


def _lw_dln(p, i):
    _finite(p, ("mu", "sigma"))
    _check(p["sigma"] > 0, f"DISCRETE_LOGNORMAL needs sigma > 0, got {p['sigma']!r}")
    li = np.log(i)
    return -((li - p["mu"]) ** 2) / (2.0 * p["sigma"] ** 2) - li


def _lw_se(p, i):
    _finite(p, ("lam", "beta"))
    _check(p["lam"] > 0, f"STRETCHED_EXPONENTIAL needs lam > 0, got {p['lam']!r}")
    _check(0 < p["beta"] <= 1, f"STRETCHED_EXPONENTIAL needs 0 < beta <= 1, got {p['beta']!r}")
    return -((i / p["lam"]) ** p["beta"])


def _lw_ys(p, i):
    _finite(p, ("rho",))
    _check(p["rho"] > 0, f"YULE_SIMON needs rho > 0, got {p['rho']!r}")
    rho = p["rho"]
    return gammaln(i) + gammaln(rho + 1.0) - gammaln(i + rho + 1.0)


@dataclass(frozen=True)
class _FamilyDef:
    names: tuple[str, ...]
    log_weights: Callable[[Mapping[str, float], np.ndarray], np.ndarray]
    # unconstrained coordinates theta <-> parameters
    to_params: Callable[[np.ndarray], dict]
    start_grid: Callable[[int], list[np.ndarray]]
    theta_log_weights: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def _be_to_params(th):
    B = math.exp(th[1])
    A = math.exp(-1.0 / B) + math.exp(th[0])
    # exp(alpha) can vanish next to exp(-1/B) in float; step to the first in-domain A
    while not (A > 0 and math.log(A) + 1.0 / B > 0):
        A = math.nextafter(A, math.inf)
    return {"A": A, "B": B}


def _be_theta_lw(th, i):
    B = math.exp(th[1])
    # A exp(1/B) = 1 + exp(alpha + 1/B): exact positivity of the first denominator
    c = math.log1p(math.exp(th[0] + 1.0 / B)) if th[0] + 1.0 / B < 700 else th[0] + 1.0 / B
    return _be_log_weights_c(c, B, i)


_LOG5 = lambda lo, hi: np.log(np.logspace(np.log10(lo), np.log10(hi), 5))  # noqa: E731

# Multi-start lattices, five points per unconstrained coordinate:
#   BE_RANK                A - exp(-1/B) in 1e-6..1e2, B in V*1e-2..V*1e2 (log-spaced)
#   MB_EXPONENTIAL         B in V*1e-3..V*10
#   ZIPF                   s in 0.25..4
#   ZIPF_MANDELBROT        s in 0.25..4, q + 1 in 0.1..1000
#   DISCRETE_LOGNORMAL     mu in ln(V) * {-0.5, 0, 0.25, 0.5, 1}, sigma in 0.25..4
#   STRETCHED_EXPONENTIAL  lam in V*1e-4..V, beta in {0.1, 0.25, 0.5, 0.75, 0.95}
#   YULE_SIMON             rho in 0.1..10
_DEFS: dict[Family, _FamilyDef] = {
    Family.BE_RANK: _FamilyDef(
        ("A", "B"), _lw_be, _be_to_params,
        lambda V: [_LOG5(1e-6, 1e2), _LOG5(V * 1e-2, V * 1e2)],
        _be_theta_lw),
    Family.MB_EXPONENTIAL: _FamilyDef(
        ("B",), _lw_mb, lambda th: {"B": math.exp(th[0])},
        lambda V: [_LOG5(V * 1e-3, V * 10.0)]),
    Family.ZIPF: _FamilyDef(
        ("s",), _lw_zipf, lambda th: {"s": math.exp(th[0])},
        lambda V: [_LOG5(0.25, 4.0)]),
    Family.ZIPF_MANDELBROT: _FamilyDef(
        ("s", "q"), _lw_zm, lambda th: {"s": math.exp(th[0]), "q": math.exp(th[1]) - 1.0},
        lambda V: [_LOG5(0.25, 4.0), _LOG5(0.1, 1000.0)]),
    Family.DISCRETE_LOGNORMAL: _FamilyDef(
        ("mu", "sigma"), _lw_dln, lambda th: {"mu": float(th[0]), "sigma": math.exp(th[1])},
        lambda V: [math.log(V) * np.array([-0.5, 0.0, 0.25, 0.5, 1.0]), _LOG5(0.25, 4.0)]),
    Family.STRETCHED_EXPONENTIAL: _FamilyDef(
        ("lam", "beta"), _lw_se, lambda th: {"lam": math.exp(th[0]), "beta": float(expit(th[1]))},
        lambda V: [_LOG5(V * 1e-4, V), logit(np.array([0.1, 0.25, 0.5, 0.75, 0.95]))]),
    Family.YULE_SIMON: _FamilyDef(
        ("rho",), _lw_ys, lambda th: {"rho": math.exp(th[0])},
        lambda V: [_LOG5(0.1, 10.0)]),
}


def param_names(family: Family | str) -> tuple[str, ...]:
    return _DEFS[Family(family)].names


def n_params(family: Family | str) -> int:
    return len(param_names(family))


@dataclass(frozen=True)
class FamilySpec:
    family: Family
    params: Mapping[str, float]
    V: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if int(self.V) < 1:
            raise ValueError("support size V must be >= 1")
        object.__setattr__(self, "V", int(self.V))
        extra = set(self.params) - set(param_names(self.family))
        if extra:
            raise ParamOutOfDomain(f"unknown parameters for {self.family.value}: {sorted(extra)}")

    def to_dict(self) -> dict:
        return {"family": self.family.value, "params": dict(self.params), "V": self.V}


def log_weights(spec: FamilySpec, ranks: np.ndarray | None = None) -> np.ndarray:
    """Unnormalized log weights at ``ranks`` (default 1..V)."""
    i = np.arange(1, spec.V + 1, dtype=float) if ranks is None else np.asarray(ranks, dtype=float)
    return np.asarray(_DEFS[spec.family].log_weights(spec.params, i), dtype=float)


def log_pmf_vector(spec: FamilySpec) -> np.ndarray:
    """log p(i) for i = 1..V."""
    lw = log_weights(spec)
    return lw - logsumexp(lw)


def pmf_vector(spec: FamilySpec) -> np.ndarray:
    return np.exp(log_pmf_vector(spec))


def pmf(spec: FamilySpec, i: int) -> float:
    if not 1 <= i <= spec.V:
        raise RankOutOfSupport(f"rank {i} outside support 1..{spec.V}")
    return float(np.exp(log_pmf_vector(spec)[int(i) - 1]))


def loglik(spec: FamilySpec, table: RankTable) -> float:
    """Multinomial log-likelihood sum_i n_i log p(i)."""
    if table.N == 0:
        # still validate the parameters
        log_weights(spec, np.array([1.0]))
        return 0.0
    mask = table.counts > 0
    ranks = table.ranks[mask]
    if ranks[-1] > spec.V:
        raise RankOutOfSupport(f"rank {ranks[-1]} outside support 1..{spec.V}")
    lp = log_pmf_vector(spec)
    return float(np.dot(table.counts[mask], lp[ranks - 1]))


def sample_rank_table(spec: FamilySpec, N: int, seed: int) -> RankTable:
    """Multinomial draw of ``N`` tokens over ranks 1..V, keeping the true rank labels."""
    p = pmf_vector(spec)
    counts = np.random.default_rng(seed).multinomial(N, p / p.sum())
    return RankTable(np.arange(1, spec.V + 1), counts, spec.V)


# --- fitting ------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    """Nelder-Mead settings applied from every lattice start.

    ``fatol`` applies to the mean per-token log-likelihood, so the stopping
    rule does not depend on corpus size.
    """

    xatol: float = 1e-8
    fatol: float = 1e-10
    max_evals_per_dim: int = 2000
    agree_tol: float = 1e-6
    simplex_step: float = 0.5


@dataclass(frozen=True)
class FitResult:
    spec: FamilySpec
    loglik: float
    aic: float
    bic: float
    k: int
    N: int
    converged: bool
    optimizer_trace_summary: dict = field(default_factory=dict)

    @property
    def family(self) -> Family:
        return self.spec.family

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "params": dict(self.spec.params),
            "V": self.spec.V,
            "k": self.k,
            "N": self.N,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
            "optimizer": dict(self.optimizer_trace_summary),
        }


def _objective_factory(family: Family, table: RankTable, V: int):
    d = _DEFS[family]
    all_ranks = np.arange(1, V + 1, dtype=float)
    mask = table.counts > 0
    idx = table.ranks[mask] - 1
    freq = table.counts[mask] / table.N
    counter = collections.Counter()

    def mean_loglik(theta: np.ndarray) -> float:
        counter["evals"] += 1
        try:
            if d.theta_log_weights is not None:
                lw = d.theta_log_weights(theta, all_ranks)
            else:
                lw = d.log_weights(d.to_params(theta), all_ranks)
        except (ParamOutOfDomain, OverflowError, ValueError):
            return -math.inf
        lw = np.asarray(lw, dtype=float)
        if not np.all(np.isfinite(lw)):
            return -math.inf
        val = float(np.dot(freq, lw[idx]) - logsumexp(lw))
        return val if math.isfinite(val) else -math.inf

    return mean_loglik, counter


def _aic_bic(ll: float, k: int, N: int) -> tuple[float, float]:
    return 2.0 * k - 2.0 * ll, k * math.log(N) - 2.0 * ll


def fit_mle(family: Family | str, table: RankTable, V: int | None = None,
            config: FitConfig | None = None) -> FitResult:
    """Maximum-likelihood fit of one family by multi-start Nelder-Mead.

    Searches unconstrained coordinates (logs, logits, and for ``BE_RANK``
    ``A = exp(-1/B) + exp(alpha)``, ``B = exp(beta)``) so every trial point
    is in the parameter domain. ``converged`` requires the best start to
    terminate normally and the two best starts to agree within
    ``config.agree_tol`` in mean per-token log-likelihood.
    """
    family = Family(family)
    config = config or FitConfig()
    if table.N < 1:
        raise ValueError("cannot fit an empty table (N = 0)")
    V = table.V if V is None else int(V)
    max_observed = int(table.ranks[table.counts > 0][-1])
    if V < max_observed:
        raise RankOutOfSupport(f"support V={V} is smaller than max observed rank {max_observed}")
    d = _DEFS[family]
    k = len(d.names)
    mean_ll, counter = _objective_factory(family, table, V)

    def neg(theta):
        v = mean_ll(theta)
        return -v if math.isfinite(v) else 1e300

    starts = [np.array(p, dtype=float) for p in itertools.product(*d.start_grid(V))]
    opts = {"xatol": config.xatol, "fatol": config.fatol,
            "maxfev": config.max_evals_per_dim * k, "maxiter": config.max_evals_per_dim * k}
    runs = []
    for si, x0 in enumerate(starts):
        simplex = np.vstack([x0] + [x0 + config.simplex_step * e for e in np.eye(k)])
        res = minimize(neg, x0, method="Nelder-Mead", options={**opts, "initial_simplex": simplex})
        runs.append((float(res.fun), si, res))
    runs.sort(key=lambda r: (r[0], r[1]))
    finite = [r for r in runs if r[0] < 1e299]
    ok = [r for r in finite if r[2].success]
    if not ok:
        raise OptimizationFailed(f"{family.value}: no start converged")
    best_f, best_i, best = ok[0]
    # restart from the winner to shake off a collapsed simplex
    simplex = np.vstack([best.x] + [best.x + 0.1 * config.simplex_step * e for e in np.eye(k)])
    polish = minimize(neg, best.x, method="Nelder-Mead", options={**opts, "initial_simplex": simplex})
    theta = polish.x if polish.fun <= best_f else best.x
    best_f = min(best_f, float(polish.fun))
    gap = (ok[1][0] - ok[0][0]) if len(ok) > 1 else 0.0
    converged = bool(best.success and gap <= config.agree_tol)

    params = d.to_params(theta)
    spec = FamilySpec(family, params, V)
    ll = -best_f * table.N
    aic, bic = _aic_bic(ll, k, table.N)
    notes = []
    n_distinct = int(np.count_nonzero(table.counts))
    if n_distinct <= k:
        notes.append(f"only {n_distinct} distinct observed rank(s) for {k} parameter(s); "
                     "estimates are weakly identified")
    if not converged:
        notes.append("best two starts disagree; likelihood surface has multiple optima or ridges")
    summary = {
        "method": "Nelder-Mead multi-start",
        "n_starts": len(starts),
        "n_converged_starts": len(ok),
        "best_start": best_i,
        "n_evaluations": int(counter["evals"]),
        "top2_mean_loglik_gap": gap,
        "theta": [float(t) for t in theta],
        "notes": notes,
    }
    return FitResult(spec, ll, aic, bic, k, table.N, converged, summary)


@dataclass(frozen=True)
class ModelSelection:
    """Fits ranked by AIC (ties: fewer parameters, then family name)."""

    ranked: list[FitResult]
    excluded: dict[str, str]

    def __iter__(self):
        return iter(self.ranked)

    def __len__(self):
        return len(self.ranked)

    def __getitem__(self, i):
        return self.ranked[i]

    @property
    def best(self) -> FitResult:
        return self.ranked[0]


def model_select(table: RankTable, families: Iterable[Family | str], V: int | None = None,
                 config: FitConfig | None = None) -> ModelSelection:
    fams = list(dict.fromkeys(Family(f) for f in families))
    if len(fams) < 2:
        raise ValueError("model selection needs at least two families")
    fits, excluded = [], {}
    for fam in fams:
        try:
            fits.append(fit_mle(fam, table, V, config))
        except OptimizationFailed as exc:
            excluded[fam.value] = str(exc)
    if not fits:
        raise OptimizationFailed("every family failed to fit")
    fits.sort(key=lambda f: (f.aic, f.k, f.family.value))
    return ModelSelection(fits, excluded)


def holdout_loglik(fit: FitResult, test_table: RankTable) -> float:
    """Log-likelihood of held-out counts under the frozen fitted parameters."""
    if test_table.N and test_table.ranks[test_table.counts > 0][-1] > fit.spec.V:
        raise RankOutOfSupport("held-out table has ranks beyond the fitted support")
    return loglik(fit.spec, test_table)


# --- BE regime diagnostics ----------------------------------------------------

def _be_domain(A: float, B: float) -> None:
    _check(math.isfinite(A) and math.isfinite(B) and B > 0, f"BE needs finite A and B > 0, got A={A!r}, B={B!r}")
    _check(A > math.exp(-1.0 / B), f"BE pole: A={A!r} <= exp(-1/B)")


def _rank_array(i) -> np.ndarray:
    arr = np.asarray(i, dtype=float)
    if np.any(arr < 1) or np.any(arr != np.floor(arr)):
        raise RankOutOfSupport("ranks start at 1")
    return arr


def _scalar_or_array(value: np.ndarray, like):
    return float(value) if np.ndim(like) == 0 else value


def be_weight(A: float, B: float, i):
    """Exact unnormalized BE occupancy 1 / (A exp(i/B) - 1)."""
    _be_domain(A, B)
    r = _rank_array(i)
    # A e^x - 1 = A (e^x - 1) + (A - 1) keeps precision when A is near 1
    return _scalar_or_array(1.0 / (A * np.expm1(r / B) + (A - 1.0)), i)


def be_small_i_approx(A: float, B: float, i):
    """First-order expansion 1 / ((A - 1) + (A / B) i), valid for i << B."""
    _be_domain(A, B)
    r = _rank_array(i)
    return _scalar_or_array(1.0 / ((A - 1.0) + (A / B) * r), i)


def be_tail_approx(A: float, B: float, i):
    """Exponential tail exp(-i/B) / A, valid once A exp(i/B) >> 1."""
    _be_domain(A, B)
    r = _rank_array(i)
    return _scalar_or_array(np.exp(-r / B) / A, i)


@dataclass(frozen=True)
class RegimeReport:
    i_over_B_max: float
    A_minus_1: float
    small_i_max_rel_err: float
    tail_max_rel_err: float | None
    tail_start: int | None
    zipf_window: tuple[int, int] | None
    zipf_threshold: float

    def to_dict(self) -> dict:
        return {
            "i_over_B_max": self.i_over_B_max,
            "A_minus_1": self.A_minus_1,
            "small_i_max_rel_err": self.small_i_max_rel_err,
            "tail_max_rel_err": self.tail_max_rel_err,
            "tail_start": self.tail_start,
            "zipf_window": list(self.zipf_window) if self.zipf_window else None,
            "zipf_threshold": self.zipf_threshold,
        }


def widest_inverse_rank_window(ranks: np.ndarray, weights: np.ndarray, threshold: float,
                               min_span: float = 10.0) -> tuple[int, int] | None:
    """Widest run of consecutive ranks on which ``weights`` matches const/i.

    A constant ``c`` with ``|w(i) i / c - 1| <= threshold`` exists on a window
    exactly when ``max(w i) / min(w i) <= (1 + threshold) / (1 - threshold)``.
    "Widest" is by ``hi / lo``; windows spanning less than ``min_span``
    (one decade by default) are not reported.
    """
    g = np.log(np.asarray(weights, dtype=float)) + np.log(np.asarray(ranks, dtype=float))
    limit = math.log((1.0 + threshold) / (1.0 - threshold))
    maxq: collections.deque = collections.deque()
    minq: collections.deque = collections.deque()
    left = 0
    best = None
    best_span = 0.0
    for right in range(g.size):
        while maxq and g[maxq[-1]] <= g[right]:
            maxq.pop()
        maxq.append(right)
        while minq and g[minq[-1]] >= g[right]:
            minq.pop()
        minq.append(right)
        while g[maxq[0]] - g[minq[0]] > limit:
            left += 1
            if maxq[0] < left:
                maxq.popleft()
            if minq[0] < left:
                minq.popleft()
        span = ranks[right] / ranks[left]
        if span > best_span:
            best_span, best = span, (int(ranks[left]), int(ranks[right]))
    if best is None or best_span < min_span:
        return None
    return best


def zipf_regime_report(spec: FamilySpec, observed_ranks: tuple[int, int],
                       zipf_threshold: float = 0.05, tail_factor: float = 100.0,
                       min_span: float = 10.0) -> RegimeReport:
    """How closely a BE-rank fit behaves like Zipf-Mandelbrot / Zipf / exponential.

    ``tail_max_rel_err`` covers the observed ranks with ``A exp(i/B) >=
    tail_factor`` and is ``None`` when no observed rank gets there.
    """
    if Family(spec.family) is not Family.BE_RANK:
        raise ValueError("regime report applies to BE_RANK fits only")
    A, B = spec.params["A"], spec.params["B"]
    _be_domain(A, B)
    lo, hi = int(observed_ranks[0]), int(observed_ranks[1])
    if lo < 1 or hi < lo:
        raise RankOutOfSupport(f"invalid observed rank interval {observed_ranks!r}")
    i = np.arange(lo, hi + 1, dtype=float)
    exact = be_weight(A, B, i)
    small_err = float(np.max(np.abs(be_small_i_approx(A, B, i) / exact - 1.0)))
    in_tail = np.log(A) + i / B >= math.log(tail_factor)
    if np.any(in_tail):
        ti = i[in_tail]
        tail_err = float(np.max(np.abs(be_tail_approx(A, B, ti) / be_weight(A, B, ti) - 1.0)))
        tail_start = int(ti[0])
    else:
        tail_err, tail_start = None, None
    window = widest_inverse_rank_window(i, exact, zipf_threshold, min_span)
    return RegimeReport(hi / B, A - 1.0, small_err, tail_err, tail_start, window, zipf_threshold)


# --- level spacing -------------------------------------------------------------

def spacing_exponent(levels: Sequence[tuple[int, float]]) -> tuple[float, float]:
    """Exponent ``d`` of ``E_n ∝ n**d`` by least squares on log-log axes.

    Returns ``(d, r_squared)``. A particle in a box (``E_n ∝ n**2``) gives
    ``d = 2``.
    """
    if len(levels) < 3:
        raise TooFewLevels(f"need at least 3 levels, got {len(levels)}")
    n = np.array([lv[0] for lv in levels], dtype=float)
    e = np.array([lv[1] for lv in levels], dtype=float)
    if np.any(n < 1) or np.any(np.diff(n) <= 0):
        raise ValueError("level indices must be positive and strictly increasing")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise NonPositiveLevel("energies must be strictly positive")
    x, y = np.log(n), np.log(e)
    xc, yc = x - x.mean(), y - y.mean()
    d = float(np.dot(xc, yc) / np.dot(xc, xc))
    ss_res = float(np.sum((yc - d * xc) ** 2))
    ss_tot = float(np.dot(yc, yc))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return d, r2
