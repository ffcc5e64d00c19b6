import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellrank.corpus import (
    PreprocessConfig,
    build_rank_table,
    rank_table_from_token_counts,
    read_rank_table_csv,
    split_holdout,
    thin_rank_table,
    tokenize,
    write_config_json,
    write_rank_table_csv,
    write_token_map_csv,
)
from bellrank.errors import DegenerateSplit, SchemaViolation
from bellrank.rankfit import FamilySpec, RankTable, fit_mle, holdout_loglik, pmf_vector


def test_tokenize_examples():
    assert tokenize("The cat. The hat.") == ["the", "cat", "the", "hat"]
    assert tokenize("The cat. The hat.", PreprocessConfig(stopword_list={"the"})) == ["cat", "hat"]
    assert tokenize("") == []
    assert tokenize("The cat.", PreprocessConfig(case_fold=False, strip_punctuation=False)) == ["The", "cat."]
    assert tokenize("a bb ccc", PreprocessConfig(min_token_length=2)) == ["bb", "ccc"]
    assert tokenize("-- ... !!") == []
    assert tokenize("don't (stop)") == ["don't", "stop"]


def test_config_echo():
    d = PreprocessConfig(stopword_list={"b", "a"}).to_dict()
    assert d["lemmatization"] == "not performed"
    assert d["stopword_list"] == ["a", "b"]
    with pytest.raises(ValueError):
        PreprocessConfig(min_token_length=0)


def test_rank_table_examples():
    t = build_rank_table(["a", "a", "b"])
    assert list(zip(t.ranks, t.counts)) == [(1, 2), (2, 1)]
    assert build_rank_table(["b", "a"]).labels == ("a", "b")
    empty = build_rank_table([])
    assert empty.N == 0 and empty.ranks.size == 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(list("abcdefg")), max_size=60), st.randoms(use_true_random=False))
def test_rank_table_invariants(tokens, rnd):
    t = build_rank_table(tokens)
    assert t.N == len(tokens)
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    u = build_rank_table(shuffled)
    assert np.array_equal(t.counts, u.counts) and t.labels == u.labels


def test_rank_table_from_pairs_sums_duplicates():
    t = rank_table_from_token_counts([("x", 2), ("y", 5), ("x", 4)])
    assert t.labels == ("x", "y") and list(t.counts) == [6, 5]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(list("abcdefghij")), min_size=2, max_size=200),
       st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_split_conserves_tokens(tokens, frac, seed):
    try:
        sp = split_holdout(tokens, frac, seed)
    except DegenerateSplit:
        return
    assert sp.train.N + sp.test.N + sp.oov_count == len(tokens)
    assert sp.test.labels == sp.train.labels
    assert sp.test.V == sp.train.V


def test_split_examples():
    rng = np.random.default_rng(0)
    tokens = [f"w{k}" for k in rng.integers(0, 50, size=20000)]
    sp = split_holdout(tokens, 0.001, 1)
    assert sp.test.N + sp.oov_count < 60 and sp.train.N > 19900
    again = split_holdout(tokens, 0.001, 1)
    assert np.array_equal(sp.test.counts, again.test.counts)
    one = split_holdout(["z"] * 100, 0.5, 3)
    assert one.train.V == one.test.V == 1 and one.oov_count == 0
    with pytest.raises(DegenerateSplit):
        split_holdout(["a", "b"], 0.999999, 0)
    with pytest.raises(ValueError):
        split_holdout(["a", "b"], 1.0, 0)


def test_oov_excluded_from_likelihood():
    tokens = ["a"] * 50 + ["b"] * 30 + ["c"] * 20 + [f"rare{k}" for k in range(40)]
    sp = split_holdout(tokens, 0.5, 4)
    assert sp.oov_count > 0
    fit = fit_mle("ZIPF", sp.train)
    # the holdout table only holds in-vocabulary counts
    assert sp.test.N == len(tokens) - sp.train.N - sp.oov_count
    assert sp.test.ranks[-1] <= sp.train.V
    assert np.isfinite(holdout_loglik(fit, sp.test))


def test_thinning_keeps_ranks():
    table = RankTable.from_counts([100, 50, 20, 5])
    sp = thin_rank_table(table, 0.3, 0)
    assert np.array_equal(sp.train.counts + sp.test.counts, table.counts)
    assert np.array_equal(sp.train.ranks, table.ranks)


def test_csv_roundtrip(tmp_path):
    t = build_rank_table(tokenize("b a a c c c"))
    write_rank_table_csv(t, tmp_path / "r.csv")
    back = read_rank_table_csv(tmp_path / "r.csv")
    assert np.array_equal(back.counts, t.counts) and np.array_equal(back.ranks, t.ranks)
    write_token_map_csv(t, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[:2] == ["token,rank,count", "c,1,3"]
    write_config_json(PreprocessConfig(), tmp_path / "c.json")
    assert json.loads((tmp_path / "c.json").read_text())["case_fold"] is True
    (tmp_path / "tok.csv").write_text("token,count\nx,1\ny,9\n")
    assert read_rank_table_csv(tmp_path / "tok.csv").labels == ("y", "x")


@pytest.mark.parametrize("body", ["rank,freq\n1,2\n", "rank,count\n1,x\n", "rank,count\n1,2\n1,3\n",
                                  "rank,count\n0,2\n", "rank,count\n1,-2\n", "rank,count\n1,2,3\n"])
def test_csv_schema_violations(tmp_path, body):
    (tmp_path / "bad.csv").write_text(body)
    with pytest.raises(SchemaViolation):
        read_rank_table_csv(tmp_path / "bad.csv")


def test_zipf_pipeline_sanity():
    p = pmf_vector(FamilySpec("ZIPF", {"s": 1.0}, 1000))
    draws = np.random.default_rng(2024).choice(1000, size=10**6, p=p)
    vocab = np.array([f"tok{k:04d}" for k in range(1000)])
    table = build_rank_table(vocab[draws].tolist())
    assert fit_mle("ZIPF", table).spec.params["s"] == pytest.approx(1.0, abs=0.05)
