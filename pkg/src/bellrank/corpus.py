"""Corpus preprocessing and rank-table construction.

Every preprocessing choice is carried in :class:`PreprocessConfig` and echoed
into outputs. Lemmatization is never performed; the echo says so explicitly.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateSplit, SchemaViolation
from .rankfit import RankTable


@dataclass(frozen=True)
class PreprocessConfig:
    case_fold: bool = True
    strip_punctuation: bool = True
    stopword_list: frozenset[str] | None = None
    min_token_length: int = 1

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")
        if self.stopword_list is not None:
            object.__setattr__(self, "stopword_list", frozenset(self.stopword_list))

    def to_dict(self) -> dict:
        return {
            "tokenization": "whitespace split",
            "case_fold": self.case_fold,
            "strip_punctuation": self.strip_punctuation,
            "stopword_list": sorted(self.stopword_list) if self.stopword_list is not None else None,
            "min_token_length": self.min_token_length,
            "lemmatization": "not performed",
        }


def _strip_edges(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def tokenize(text: str, config: PreprocessConfig | None = None) -> list[str]:
    """Whitespace tokenization followed by the configured filters.

    Stopwords are compared after case folding and edge stripping, so a
    lower-case stopword list matches "The" and "the." when folding is on.
    """
    config = config or PreprocessConfig()
    stop = config.stopword_list or frozenset()
    out = []
    for tok in text.split():
        if config.case_fold:
            tok = tok.casefold()
        if config.strip_punctuation:
            tok = _strip_edges(tok)
        if not tok or len(tok) < config.min_token_length or tok in stop:
            continue
        out.append(tok)
    return out


def rank_order(counts: Counter) -> list[tuple[str, int]]:
    """Tokens by descending count; equal counts in lexicographic order."""
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def build_rank_table(tokens: Iterable[str]) -> RankTable:
    """Rank table with the token for each rank kept in ``labels``."""
    ordered = rank_order(Counter(tokens))
    if not ordered:
        return RankTable(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), 0, ())
    labels = tuple(t for t, _ in ordered)
    counts = np.array([c for _, c in ordered], dtype=np.int64)
    return RankTable(np.arange(1, len(ordered) + 1), counts, len(ordered), labels)


def rank_table_from_token_counts(pairs: Iterable[tuple[str, int]]) -> RankTable:
    """Assign ranks to externally supplied ``(token, count)`` pairs; duplicates sum."""
    counts: Counter = Counter()
    for tok, n in pairs:
        counts[tok] += int(n)
    ordered = rank_order(counts)
    return RankTable(np.arange(1, len(ordered) + 1), [c for _, c in ordered],
                     len(ordered), tuple(t for t, _ in ordered))


class HoldoutSplit(NamedTuple):
    train: RankTable
    test: RankTable
    oov_count: int


def split_holdout(tokens: Sequence[str], test_fraction: float, seed: int) -> HoldoutSplit:
    """Occurrence-level thinning into train and test rank tables.

    Each token occurrence goes to the test side with probability
    ``test_fraction``. Both tables use the train ranking; test occurrences of
    words never seen in training are counted in ``oov_count`` only.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    if len(tokens) < 2:
        raise ValueError("need at least two tokens to split")
    to_test = np.random.default_rng(seed).random(len(tokens)) < test_fraction
    train_tokens = [t for t, m in zip(tokens, to_test) if not m]
    if not train_tokens:
        raise DegenerateSplit("every token went to the test side")
    train = build_rank_table(train_tokens)
    rank_of = {tok: r for r, tok in enumerate(train.labels, start=1)}
    test_counts = np.zeros(train.V, dtype=np.int64)
    oov = 0
    for t, m in zip(tokens, to_test):
        if m:
            r = rank_of.get(t)
            if r is None:
                oov += 1
            else:
                test_counts[r - 1] += 1
    test = RankTable(np.arange(1, train.V + 1), test_counts, train.V, train.labels)
    return HoldoutSplit(train, test, oov)


def thin_rank_table(table: RankTable, test_fraction: float, seed: int) -> HoldoutSplit:
    """Occurrence-level split of an existing rank table, keeping its ranks.

    Equivalent to :func:`split_holdout` when only counts are available:
    each rank's count is split binomially.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    test_counts = np.random.default_rng(seed).binomial(table.counts, test_fraction)
    train_counts = table.counts - test_counts
    if train_counts.sum() == 0:
        raise DegenerateSplit("every token went to the test side")
    return HoldoutSplit(RankTable(table.ranks, train_counts, table.V, table.labels),
                        RankTable(table.ranks, test_counts, table.V, table.labels), 0)


# --- files --------------------------------------------------------------------

def read_text_files(paths: Iterable[Path | str]) -> str:
    return "\n".join(Path(p).read_text(encoding="utf-8") for p in paths)


def write_rank_table_csv(table: RankTable, path: Path | str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "count"])
        for r, c in zip(table.ranks, table.counts):
            w.writerow([int(r), int(c)])


def write_token_map_csv(table: RankTable, path: Path | str) -> None:
    if table.labels is None:
        raise ValueError("rank table carries no token labels")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["token", "rank", "count"])
        for tok, r, c in zip(table.labels, table.ranks, table.counts):
            w.writerow([tok, int(r), int(c)])


def write_config_json(config: PreprocessConfig, path: Path | str) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_rank_table_csv(path: Path | str) -> RankTable:
    """Read ``rank,count`` or ``token,count`` rows.

    Token rows are ranked with :func:`rank_order`. Rank rows may skip ranks
    (missing ranks have count 0) but may not repeat them.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        header = [h.strip() for h in header] if header else None
        if header not in (["rank", "count"], ["token", "count"]):
            raise SchemaViolation(f"{path}: expected header rank,count or token,count, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaViolation(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                n = int(row[1])
            except ValueError:
                raise SchemaViolation(f"line {lineno}: count={row[1]!r} is not an integer") from None
            if n < 0:
                raise SchemaViolation(f"line {lineno}: negative count")
            rows.append((row[0].strip(), n, lineno))
    if header[0] == "token":
        return rank_table_from_token_counts((t, n) for t, n, _ in rows)
    parsed = {}
    for r, n, lineno in rows:
        try:
            rank = int(r)
        except ValueError:
            raise SchemaViolation(f"line {lineno}: rank={r!r} is not an integer") from None
        if rank < 1 or rank in parsed:
            raise SchemaViolation(f"line {lineno}: rank {rank} is invalid or repeated")
        parsed[rank] = n
    ranks = sorted(parsed)
    return RankTable(ranks, [parsed[r] for r in ranks])
