import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellrank.errors import (
    NonPositiveLevel,
    ParamOutOfDomain,
    RankOutOfSupport,
    TooFewLevels,
)
from bellrank.rankfit import (
    Family,
    FamilySpec,
    RankTable,
    be_small_i_approx,
    be_tail_approx,
    be_weight,
    fit_mle,
    holdout_loglik,
    loglik,
    model_select,
    pmf,
    pmf_vector,
    sample_rank_table,
    spacing_exponent,
    widest_inverse_rank_window,
    zipf_regime_report,
)

mpmath.mp.dps = 40


def oracle_weight(family, p, i):
    """Textbook family shapes in arbitrary precision."""
    i = mpmath.mpf(i)
    if family == "BE_RANK":
        return 1 / (p["A"] * mpmath.exp(i / p["B"]) - 1)
    if family == "MB_EXPONENTIAL":
        return mpmath.exp(-i / p["B"])
    if family == "ZIPF":
        return i ** (-p["s"])
    if family == "ZIPF_MANDELBROT":
        return (i + p["q"]) ** (-p["s"])
    if family == "DISCRETE_LOGNORMAL":
        return mpmath.exp(-(mpmath.log(i) - p["mu"]) ** 2 / (2 * p["sigma"] ** 2)) / i
    if family == "STRETCHED_EXPONENTIAL":
        return mpmath.exp(-((i / p["lam"]) ** p["beta"]))
    if family == "YULE_SIMON":
        return mpmath.beta(i, p["rho"] + 1)
    raise KeyError(family)


def random_params(family, rng):
    if family == "BE_RANK":
        B = float(10 ** rng.uniform(-1, 5))
        return {"A": math.exp(-1 / B) + float(10 ** rng.uniform(-8, 2)), "B": B}
    if family == "MB_EXPONENTIAL":
        return {"B": float(10 ** rng.uniform(-2, 5))}
    if family == "ZIPF":
        return {"s": float(rng.uniform(0.01, 5))}
    if family == "ZIPF_MANDELBROT":
        return {"s": float(rng.uniform(0.01, 5)), "q": float(rng.uniform(-0.99, 100))}
    if family == "DISCRETE_LOGNORMAL":
        return {"mu": float(rng.uniform(-5, 10)), "sigma": float(rng.uniform(0.05, 5))}
    if family == "STRETCHED_EXPONENTIAL":
        return {"lam": float(10 ** rng.uniform(-2, 4)), "beta": float(rng.uniform(0.01, 1))}
    return {"rho": float(10 ** rng.uniform(-2, 1.5))}


# --- pmf ------------------------------------------------------------------------

def test_zipf_harmonic_example():
    spec = FamilySpec("ZIPF", {"s": 1.0}, 3)
    for i, frac in ((1, Fraction(6, 11)), (2, Fraction(3, 11)), (3, Fraction(2, 11))):
        assert pmf(spec, i) == pytest.approx(float(frac), abs=1e-15)


def test_be_weight_example():
    expected = float(1 / (2 * mpmath.exp(mpmath.mpf("0.1")) - 1))
    assert be_weight(2.0, 10.0, 1) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.82620, abs=2e-5)  # quoted value is truncated, not rounded


def test_be_pole_rejected():
    with pytest.raises(ParamOutOfDomain):
        pmf(FamilySpec("BE_RANK", {"A": 0.5, "B": 10.0}, 20), 1)
    with pytest.raises(ParamOutOfDomain):
        be_weight(0.5, 10.0, 1)


@pytest.mark.parametrize("family,params", [
    ("ZIPF", {"s": 0.0}), ("ZIPF_MANDELBROT", {"s": 1.0, "q": -1.0}),
    ("MB_EXPONENTIAL", {"B": -1.0}), ("DISCRETE_LOGNORMAL", {"mu": 0.0, "sigma": 0.0}),
    ("STRETCHED_EXPONENTIAL", {"lam": 1.0, "beta": 1.5}), ("YULE_SIMON", {"rho": 0.0}),
    ("ZIPF", {"s": math.nan}), ("ZIPF", {}),
])
def test_domain_errors(family, params):
    with pytest.raises(ParamOutOfDomain):
        pmf(FamilySpec(family, params, 10), 1)


def test_rank_out_of_support():
    spec = FamilySpec("ZIPF", {"s": 1.0}, 5)
    for i in (0, 6):
        with pytest.raises(RankOutOfSupport):
            pmf(spec, i)


@pytest.mark.parametrize("family", [f.value for f in Family])
def test_pmf_matches_oracle(family):
    rng = np.random.default_rng(hash(family) % 2**32)
    for _ in range(5):
        p = random_params(family, rng)
        V = int(rng.integers(2, 40))
        w = [oracle_weight(family, p, i) for i in range(1, V + 1)]
        z = mpmath.fsum(w)
        ours = pmf_vector(FamilySpec(family, p, V))
        assert np.allclose(ours, [float(x / z) for x in w], rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("family", [f.value for f in Family])
def test_pmf_normalized_random_draws(family):
    rng = np.random.default_rng(7)
    for _ in range(100):
        V = int(rng.integers(1, 5000))
        p = pmf_vector(FamilySpec(family, random_params(family, rng), V))
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-9


# --- loglik ----------------------------------------------------------------------

def test_loglik_examples():
    point = RankTable.from_counts([50], V=10)
    ll = loglik(FamilySpec("ZIPF", {"s": 60.0}, 10), point)
    assert -1e-12 < ll <= 0
    V, n = 40, 25
    uniform = RankTable.from_counts([n] * V)
    assert loglik(FamilySpec("ZIPF", {"s": 1e-9}, V), uniform) == pytest.approx(n * V * math.log(1 / V), rel=1e-7)
    empty = RankTable.from_counts([0, 0, 0])
    assert loglik(FamilySpec("ZIPF", {"s": 1.0}, 3), empty) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=2, max_size=30), st.sampled_from([f.value for f in Family]),
       st.integers(0, 2**31))
def test_loglik_nonpositive(counts, family, seed):
    table = RankTable.from_counts(counts)
    spec = FamilySpec(family, random_params(family, np.random.default_rng(seed)), len(counts))
    ll = loglik(spec, table)
    assert ll <= 0
    if np.count_nonzero(counts) >= 2:
        assert ll < 0


def test_loglik_rank_beyond_support():
    with pytest.raises(RankOutOfSupport):
        loglik(FamilySpec("ZIPF", {"s": 1.0}, 3), RankTable.from_counts([1, 1, 1, 1]))


# --- fitting -----------------------------------------------------------------------

def test_fit_rescaling_invariance():
    table = sample_rank_table(FamilySpec("ZIPF_MANDELBROT", {"s": 1.3, "q": 4.0}, 300), 5000, 3)
    scaled = RankTable(table.ranks, table.counts * 4, table.V)
    a = fit_mle("ZIPF_MANDELBROT", table)
    b = fit_mle("ZIPF_MANDELBROT", scaled)
    for k in a.spec.params:
        assert b.spec.params[k] == pytest.approx(a.spec.params[k], rel=1e-9)
    assert b.loglik == pytest.approx(4 * a.loglik, rel=1e-9)


@pytest.mark.parametrize("family", [f.value for f in Family])
def test_fit_identities_and_optimum(family):
    rng = np.random.default_rng(11)
    truth = FamilySpec(family, random_params(family, rng), 200)
    table = sample_rank_table(truth, 20000, 5)
    fit = fit_mle(family, table)
    assert fit.aic == 2 * fit.k - 2 * fit.loglik
    assert fit.bic == fit.k * math.log(fit.N) - 2 * fit.loglik
    assert fit.loglik == pytest.approx(loglik(fit.spec, table), rel=1e-9, abs=1e-9)
    assert fit.loglik >= loglik(truth, table) - 1e-6 * table.N
    fit.to_dict()


def test_fit_n1_degenerate_but_in_domain():
    table = RankTable.from_counts([1], V=10)
    for fam in Family:
        fit = fit_mle(fam, table)
        assert fit.converged
        assert fit.loglik <= 0 and fit.loglik > -1e-6
        pmf_vector(fit.spec)  # params stay in domain
        assert any("weakly identified" in n for n in fit.optimizer_trace_summary["notes"])


def test_fit_support_checks():
    table = RankTable.from_counts([5, 3, 1])
    with pytest.raises(RankOutOfSupport):
        fit_mle("ZIPF", table, V=2)
    with pytest.raises(ValueError):
        fit_mle("ZIPF", RankTable.from_counts([0, 0]))
    assert fit_mle("ZIPF", table, V=50).spec.V == 50


def test_fit_deterministic():
    table = sample_rank_table(FamilySpec("BE_RANK", {"A": 1.01, "B": 100.0}, 500), 20000, 1)
    a, b = fit_mle("BE_RANK", table), fit_mle("BE_RANK", table)
    assert a.to_dict() == b.to_dict()


def test_be_truth_beats_zipf():
    table = sample_rank_table(FamilySpec("BE_RANK", {"A": 1.001, "B": 1e4}, 10_000), 10**6, 42)
    be, zipf = fit_mle("BE_RANK", table), fit_mle("ZIPF", table)
    assert be.loglik >= zipf.loglik


def test_model_select_needs_two_families():
    table = RankTable.from_counts([5, 3, 1])
    with pytest.raises(ValueError):
        model_select(table, ["ZIPF"])
    with pytest.raises(ValueError):
        model_select(table, ["ZIPF", "ZIPF"])


def test_model_select_mb_truth():
    table = sample_rank_table(FamilySpec("MB_EXPONENTIAL", {"B": 200.0}, 2000), 10**5, 9)
    sel = model_select(table, ["MB_EXPONENTIAL", "BE_RANK", "ZIPF"])
    by = {f.family.value: f for f in sel}
    assert by["BE_RANK"].loglik >= by["MB_EXPONENTIAL"].loglik - 1e-6
    assert by["MB_EXPONENTIAL"].bic < by["BE_RANK"].bic
    assert sel.ranked == sorted(sel.ranked, key=lambda f: (f.aic, f.k, f.family.value))
    assert sel.best is sel[0] and not sel.excluded


def test_holdout_examples():
    table = sample_rank_table(FamilySpec("ZIPF", {"s": 1.1}, 100), 3000, 0)
    fit = fit_mle("ZIPF", table)
    assert holdout_loglik(fit, table) == pytest.approx(fit.loglik, rel=1e-12)
    assert holdout_loglik(fit, RankTable.from_counts([0] * 100)) == 0.0
    with pytest.raises(RankOutOfSupport):
        holdout_loglik(fit, RankTable.from_counts([1] * 101))


def test_holdout_mb_beats_be_on_mb_data():
    spec = FamilySpec("MB_EXPONENTIAL", {"B": 30.0}, 300)
    diffs = []
    for seed in range(8):
        train = sample_rank_table(spec, 1000, 100 + seed)
        test = sample_rank_table(spec, 1000, 500 + seed)
        diffs.append(holdout_loglik(fit_mle("MB_EXPONENTIAL", train), test)
                     - holdout_loglik(fit_mle("BE_RANK", train), test))
    assert np.mean(diffs) > 0


# --- approximants and regime report -------------------------------------------------

def test_approximant_examples():
    i = np.arange(1, 101)
    err5 = np.abs(be_small_i_approx(1.001, 1e4, i) / be_weight(1.001, 1e4, i) - 1)
    assert err5.max() < 0.01
    exact = float(1 / (2 * mpmath.exp(10) - 1))
    assert abs(be_tail_approx(2.0, 10.0, 100) / exact - 1) < 1e-4
    for fn in (be_weight, be_small_i_approx, be_tail_approx):
        with pytest.raises(RankOutOfSupport):
            fn(2.0, 10.0, 0)
        with pytest.raises(ParamOutOfDomain):
            fn(0.5, 10.0, 1)


def test_approximant_errors_monotone():
    A = 1.001
    xs = np.logspace(-6, -0.5, 40)[::-1]  # i/B shrinking
    err5 = [abs(be_small_i_approx(A, 50.0 / x, 50) / be_weight(A, 50.0 / x, 50) - 1) for x in xs]
    assert all(b <= a for a, b in zip(err5, err5[1:]))
    A, B = 2.0, 10.0
    err6 = [abs(be_tail_approx(A, B, i) / be_weight(A, B, i) - 1) for i in range(1, 300)]
    assert all(b < a for a, b in zip(err6, err6[1:]))


def brute_window(ranks, weights, thr, min_span):
    g = np.log(weights * ranks)
    limit = math.log((1 + thr) / (1 - thr))
    best, span = None, 0.0
    for lo, hi in itertools.combinations_with_replacement(range(len(ranks)), 2):
        seg = g[lo:hi + 1]
        if seg.max() - seg.min() <= limit and ranks[hi] / ranks[lo] > span:
            best, span = (int(ranks[lo]), int(ranks[hi])), ranks[hi] / ranks[lo]
    return best if best is not None and span >= min_span else None


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=1, max_size=40), st.sampled_from([1.0, 3.0, 10.0]))
def test_window_matches_brute_force(noise, min_span):
    ranks = np.arange(1, len(noise) + 1, dtype=float)
    weights = np.exp(np.cumsum(noise)) / ranks
    assert widest_inverse_rank_window(ranks, weights, 0.05, min_span) == brute_window(ranks, weights, 0.05, min_span)


def test_regime_exponential_has_no_window():
    rep = zipf_regime_report(FamilySpec("BE_RANK", {"A": 2.0, "B": 10.0}, 200), (1, 200))
    assert rep.zipf_window is None
    assert rep.tail_max_rel_err is not None and rep.tail_max_rel_err >= 0
    assert rep.small_i_max_rel_err >= 0


def test_regime_offset_dominated_case():
    # A - 1 = 1e-3 with B = 1e6: B (A - 1) = 1000 dwarfs ranks up to 100, so the
    # weight is nearly flat there and no 1/i window exists
    spec = FamilySpec("BE_RANK", {"A": 1.001, "B": 1e6}, 100)
    rep = zipf_regime_report(spec, (1, 100))
    i = np.arange(1, 101, dtype=float)
    assert rep.zipf_window is None
    assert brute_window(i, be_weight(1.001, 1e6, i), 0.05, 10) is None
    assert rep.tail_max_rel_err is None and rep.tail_start is None


def test_regime_near_one_covers_head():
    spec = FamilySpec("BE_RANK", {"A": 1 + 1e-6, "B": 1e4}, 100)
    rep = zipf_regime_report(spec, (1, 100))
    assert rep.zipf_window == (1, 100)
    assert rep.i_over_B_max == pytest.approx(0.01)
    assert rep.A_minus_1 == pytest.approx(1e-6, rel=1e-9)
    rep.to_dict()


def test_regime_rejects_other_families():
    with pytest.raises(ValueError):
        zipf_regime_report(FamilySpec("ZIPF", {"s": 1.0}, 10), (1, 10))


# --- spacing exponent ------------------------------------------------------------------

def test_spacing_examples():
    n = range(1, 51)
    d, r2 = spacing_exponent([(k, float(k * k)) for k in n])
    assert d == pytest.approx(2.0, abs=1e-6) and r2 == pytest.approx(1.0, abs=1e-12)
    assert spacing_exponent([(k, 3.0) for k in n])[0] == pytest.approx(0.0, abs=1e-12)
    assert spacing_exponent([(k, float(k)) for k in n])[0] == pytest.approx(1.0, abs=1e-12)


def test_spacing_errors():
    with pytest.raises(TooFewLevels):
        spacing_exponent([(1, 1.0), (2, 4.0)])
    with pytest.raises(NonPositiveLevel):
        spacing_exponent([(1, 1.0), (2, 0.0), (3, 9.0)])
    with pytest.raises(ValueError):
        spacing_exponent([(1, 1.0), (1, 4.0), (3, 9.0)])
