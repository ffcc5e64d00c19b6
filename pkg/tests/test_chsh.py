import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from _gen import random_nonsignalling
from bellrank.behavior import BehaviorTable, CorrelationMatrix, correlation_matrix, nonsignalling_residual
from bellrank.chsh import (
    ALL_CONVENTIONS,
    STANDARD,
    Classification,
    Infeasible,
    LocalDecomposition,
    SignConvention,
    chsh_report,
    chsh_value,
    classify,
    deterministic_strategy_behavior,
    local_model_decompose,
    strategy_index,
    strategy_responses,
)
from bellrank.errors import IndexOutOfRange, InvalidBehavior, SignallingInput
from bellrank.simulators import SingletAngles, mix_with_noise, pr_box_behavior, singlet_behavior

PR_MATRIX = [[1, 1], [1, -1]]


def test_convention_set():
    assert len(ALL_CONVENTIONS) == 8
    labels = {c.label for c in ALL_CONVENTIONS}
    assert "+++-" in labels and "---+" in labels
    assert STANDARD.label == "+++-"
    for bad in [(1, 1, 1, 1), (1, 1, -1, -1), (-1, -1, -1, -1)]:
        with pytest.raises(InvalidBehavior):
            SignConvention(bad)
    assert SignConvention.parse("-+++") == SignConvention((-1, 1, 1, 1))


def test_chsh_value_examples():
    assert chsh_value(CorrelationMatrix(np.ones((2, 2))), STANDARD) == 2.0
    assert chsh_value(CorrelationMatrix(PR_MATRIX), STANDARD) == 4.0
    for conv in ALL_CONVENTIONS:
        assert chsh_value(CorrelationMatrix(np.zeros((2, 2))), conv) == 0.0


def test_report_pr_box():
    rep = chsh_report(CorrelationMatrix(PR_MATRIX))
    assert rep.s_max_abs == 4.0
    assert rep.classification is Classification.SUPRA_QUANTUM
    assert len(rep.s_by_convention) == 8


def test_report_singlet_matches_direct_evaluation():
    angles = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
    # oracle: E = -cos(theta_a - theta_b) evaluated directly, all 8 sign placements
    e = [[-math.cos(angles[x] - angles[2 + y]) for y in (0, 1)] for x in (0, 1)]
    values = []
    for signs in itertools.product((1, -1), repeat=4):
        if signs.count(-1) in (1, 3):
            values.append(signs[0] * e[0][0] + signs[1] * e[0][1] + signs[2] * e[1][0] + signs[3] * e[1][1])
    assert min(values) == pytest.approx(-2 * math.sqrt(2), abs=1e-12)
    rep = chsh_report(correlation_matrix(singlet_behavior(SingletAngles(*angles))))
    assert rep.s_max_abs == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    assert rep.classification is Classification.QUANTUM_COMPATIBLE


def test_strategies_exhaustive():
    maxima = {c.label: -math.inf for c in ALL_CONVENTIONS}
    for k in range(16):
        rep = chsh_report(correlation_matrix(deterministic_strategy_behavior(k)))
        assert rep.s_max_abs == 2.0
        assert rep.classification is Classification.LOCAL
        for label, v in rep.s_by_convention.items():
            assert abs(v) <= 2.0
            maxima[label] = max(maxima[label], v)
    assert set(maxima.values()) == {2.0}


def test_classification_tolerance():
    t = 2 * math.sqrt(2)
    assert classify(2.0 + 5e-10) is Classification.LOCAL
    assert classify(2.0 + 2e-9) is Classification.QUANTUM_COMPATIBLE
    assert classify(t + 5e-10) is Classification.QUANTUM_COMPATIBLE
    assert classify(t + 2e-9) is Classification.SUPRA_QUANTUM
    assert classify(4.0 + 5e-10) is Classification.SUPRA_QUANTUM
    assert classify(4.1) is Classification.INVALID


def test_strategy_encoding():
    assert strategy_responses(0) == (1, 1, 1, 1)
    beh = deterministic_strategy_behavior(0)
    assert all(beh.prob(x, y, 1, 1) == 1.0 for x in (0, 1) for y in (0, 1))
    k = strategy_index(1, 1, 1, -1)  # a = +1, b(y) = (-1)^y
    e = correlation_matrix(deterministic_strategy_behavior(k)).e
    assert_allclose(e, [[1, -1], [1, -1]])
    for k in range(16):
        assert strategy_index(*strategy_responses(k)) == k
        assert nonsignalling_residual(deterministic_strategy_behavior(k)) == 0.0
    for bad in (-1, 16):
        with pytest.raises(IndexOutOfRange):
            deterministic_strategy_behavior(bad)


def test_decompose_vertex():
    for k in (0, 5, 15):
        dec = local_model_decompose(deterministic_strategy_behavior(k))
        assert isinstance(dec, LocalDecomposition)
        assert dec.weights[k] == pytest.approx(1.0, abs=1e-9)
        assert dec.residual <= 1e-9


def test_decompose_pr_box_infeasible():
    res = local_model_decompose(pr_box_behavior())
    assert isinstance(res, Infeasible)
    assert res.value == 4.0
    assert res.convention == "+++-"


def test_decompose_uniform():
    uniform_mix = sum(deterministic_strategy_behavior(k).probs for k in range(16)) / 16
    assert_allclose(uniform_mix, 0.25, atol=0, rtol=0)
    dec = local_model_decompose(BehaviorTable.uniform())
    assert isinstance(dec, LocalDecomposition)
    assert sum(dec.weights.values()) == pytest.approx(1.0, abs=1e-9)
    assert dec.residual <= 1e-9


def test_decompose_rejects_signalling():
    mapping = {(0, 0, 1, 1): 1.0, (0, 1, 1, 1): 0.5, (0, 1, -1, -1): 0.5,
               (1, 0, 1, 1): 1.0, (1, 1, 1, 1): 1.0}
    with pytest.raises(SignallingInput):
        local_model_decompose(BehaviorTable.from_mapping(mapping))


def test_decomposition_reconstructs_behavior():
    rng = np.random.default_rng(4)
    for _ in range(20):
        beh = random_nonsignalling(rng)
        res = local_model_decompose(beh)
        if isinstance(res, LocalDecomposition):
            rebuilt = sum(w * deterministic_strategy_behavior(k).probs for k, w in res.weights.items())
            assert np.max(np.abs(rebuilt - beh.probs)) <= 1e-9 + 1e-12


def test_fine_criterion_small_sample():
    rng = np.random.default_rng(11)
    for _ in range(200):
        beh = random_nonsignalling(rng)
        local = max(chsh_report(correlation_matrix(beh)).s_by_convention.values()) <= 2 + 1e-7
        assert isinstance(local_model_decompose(beh), LocalDecomposition) == local


corr_entry = st.floats(-1, 1)
matrix = st.lists(corr_entry, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))


@settings(max_examples=100, deadline=None)
@given(matrix, matrix, st.floats(0, 1))
def test_chsh_linear(m1, m2, alpha):
    mixed = CorrelationMatrix(alpha * m1 + (1 - alpha) * m2)
    for conv in ALL_CONVENTIONS:
        lhs = chsh_value(mixed, conv)
        rhs = alpha * chsh_value(CorrelationMatrix(m1), conv) + (1 - alpha) * chsh_value(CorrelationMatrix(m2), conv)
        assert lhs == pytest.approx(rhs, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_noise_mixing_never_increases_s(seed, v1, v2):
    beh = random_nonsignalling(np.random.default_rng(seed))
    hi, lo = max(v1, v2), min(v1, v2)
    s_hi = chsh_report(correlation_matrix(mix_with_noise(beh, hi))).s_max_abs
    s_lo = chsh_report(correlation_matrix(mix_with_noise(beh, lo))).s_max_abs
    s_full = chsh_report(correlation_matrix(beh)).s_max_abs
    assert s_lo <= s_hi + 1e-12 <= s_full + 2e-12
