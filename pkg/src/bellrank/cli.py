"""Command-line entry points: ``chsh``, ``fit``, ``simulate``, ``corpus``.

Every command prints a JSON report (manifest + analysis) on stdout. When an
output directory is given (``--output-dir`` or ``$BELLRANK_OUTPUT_DIR``) the
report and any CSV sidecars are written there as well.

Exit codes: 0 success, 1 analysis infeasible, 2 input or usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import behavior as bc
from . import chsh, corpus, inference, rankfit, simulators
from .errors import (
    BellrankError,
    DegenerateSplit,
    EmptyBlock,
    InvalidBehavior,
    NoEligibleParticipants,
    OptimizationFailed,
    SchemaViolation,
    SignallingInput,
)
from .report import RunManifest, build_report, dumps

OUTPUT_DIR_ENV = "BELLRANK_OUTPUT_DIR"

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2

_INFEASIBLE = (SignallingInput, EmptyBlock, NoEligibleParticipants, OptimizationFailed,
               DegenerateSplit)


class UsageError(BellrankError):
    pass


def _output_dir(args) -> Path | None:
    d = args.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if not d:
        return None
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _conventions(label: str) -> tuple[chsh.SignConvention, ...]:
    if label == "all":
        return chsh.ALL_CONVENTIONS
    return (chsh.SignConvention.parse(label),)


def _sniff_header(path: Path) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            row = next(csv.reader(fh), None)
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaViolation(f"cannot read {path}: {exc}") from None
    return [h.strip() for h in row] if row else []


# --- chsh ---------------------------------------------------------------------

def cmd_chsh(args) -> tuple[RunManifest, dict, dict]:
    path = Path(args.input)
    header = _sniff_header(path)
    trials = None
    if header == list(bc.COUNT_HEADER):
        counts = bc.read_counts_csv(path, bit_outcomes=args.bit_outcomes)
        kind = "counts"
    elif header == ["participant_id", "x", "y", "a", "b"]:
        trials = inference.read_trials_csv(path, bit_outcomes=args.bit_outcomes)
        counts = inference.trials_to_counts(trials)
        kind = "trials"
    else:
        raise SchemaViolation(
            f"{path}: header must be x,y,a,b,count or participant_id,x,y,a,b, got {header}")
    if (args.t_test or args.permutations) and trials is None:
        raise UsageError("--t-test and --permutations need a per-trial CSV (participant_id,x,y,a,b)")

    convs = _conventions(args.convention)
    behavior = bc.normalize_counts(counts)
    corr = bc.correlation_matrix(behavior)
    report = chsh.chsh_report(corr)
    analysis = {
        "input": {"kind": kind, "outcome_encoding": "bit" if args.bit_outcomes else "pm1",
                  "n_trials": counts.total},
        "counts": counts.as_records(),
        "behavior": behavior.as_records(),
        "correlation_matrix": corr.tolist(),
        "nonsignalling_residual": bc.nonsignalling_residual(behavior),
        "chsh": {**report.to_dict(), "conventions_examined": len(chsh.ALL_CONVENTIONS),
                 "multiple_comparisons": "not corrected; all 8 conventions reported raw"},
        "bootstrap": {k: v.to_dict() for k, v in inference.bootstrap_ci_all(
            counts, args.resamples, args.seed, args.level, convs).items()},
    }
    if args.local_model:
        analysis["local_model"] = chsh.local_model_decompose(behavior, args.tolerance).to_dict()
    primary = convs[0] if len(convs) == 1 else chsh.STANDARD
    if trials is not None:
        pl = inference.participant_level_chsh(trials, primary)
        analysis["participant_level"] = {
            "convention": primary.label,
            "included": [{"participant_id": str(p.participant_id), "s": p.s,
                          "n_trials_per_block": p.n_trials_per_block} for p in pl.included],
            "excluded": [str(p) for p in pl.excluded],
        }
        if args.t_test:
            res = inference.naive_t_test([p.s for p in pl.included], args.null)
            analysis["naive_t_test_for_comparison"] = {
                "t": res.t, "p_two_sided": res.p_two_sided, "df": res.df,
                "null_value": args.null, "unit": "participant",
                "caveat": "assumes independent, normally distributed per-participant S"}
        if args.permutations:
            perm = inference.permutation_test_chsh(trials, primary, args.permutations, args.seed)
            analysis["permutation_test"] = {"convention": primary.label,
                                            "observed_s": perm.observed_s, "p": perm.p,
                                            "n_permutations": args.permutations}
    manifest = RunManifest(
        "chsh", [str(path)],
        {"bit_outcomes": args.bit_outcomes, "convention": args.convention,
         "resamples": args.resamples, "level": args.level, "local_model": args.local_model,
         "tolerance": args.tolerance, "t_test": args.t_test, "null": args.null,
         "permutations": args.permutations},
        {"seed": args.seed})
    return manifest, analysis, {}


# --- fit ----------------------------------------------------------------------

def _preprocess_config(args) -> corpus.PreprocessConfig:
    stop = None
    if args.stopwords:
        stop = frozenset(Path(args.stopwords).read_text(encoding="utf-8").split())
    return corpus.PreprocessConfig(case_fold=not args.no_case_fold,
                                   strip_punctuation=not args.keep_punctuation,
                                   stopword_list=stop, min_token_length=args.min_length)


def _parse_families(text: str) -> list[rankfit.Family]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    try:
        fams = list(dict.fromkeys(rankfit.Family(n.upper()) for n in names))
    except ValueError:
        raise UsageError(f"unknown family in {text!r}; choose from "
                         f"{', '.join(f.value for f in rankfit.Family)}") from None
    if len(fams) < 2:
        raise UsageError("--families needs at least two families for model selection")
    return fams


def cmd_fit(args) -> tuple[RunManifest, dict, dict]:
    families = _parse_families(args.families)
    inputs = [str(p) for p in args.input]
    analysis: dict = {}
    holdout = None
    if args.raw_text:
        cfg = _preprocess_config(args)
        tokens = corpus.tokenize(corpus.read_text_files(args.input), cfg)
        analysis["preprocess"] = cfg.to_dict()
        if args.holdout:
            holdout = corpus.split_holdout(tokens, args.holdout, args.seed)
            table = holdout.train
        else:
            table = corpus.build_rank_table(tokens)
    else:
        if len(args.input) != 1:
            raise UsageError("exactly one rank-table CSV is accepted without --raw-text")
        table = corpus.read_rank_table_csv(args.input[0])
        if args.holdout:
            holdout = corpus.thin_rank_table(table, args.holdout, args.seed)
            table = holdout.train
    if table.N == 0:
        raise SchemaViolation("rank table is empty")
    if args.support:
        if args.support < table.V:
            raise UsageError(f"--support {args.support} is smaller than the table's support {table.V}")
        table = table.with_support(args.support)
    V = table.V
    selection = rankfit.model_select(table, families, V)
    observed = table.ranks[table.counts > 0]
    analysis.update({
        "N": table.N,
        "V": V,
        "criterion": "AIC",
        "ranking": [{"rank": r + 1, **f.to_dict()} for r, f in enumerate(selection.ranked)],
        "excluded": selection.excluded,
    })
    be = next((f for f in selection.ranked if f.family is rankfit.Family.BE_RANK), None)
    if be is not None:
        analysis["be_regime"] = rankfit.zipf_regime_report(
            be.spec, (int(observed[0]), int(observed[-1]))).to_dict()
    if holdout is not None:
        analysis["holdout"] = {
            "test_fraction": args.holdout,
            "N_test": holdout.test.N,
            "oov_count": holdout.oov_count,
            "loglik": {f.family.value: rankfit.holdout_loglik(f, holdout.test)
                       for f in selection.ranked},
        }
    manifest = RunManifest(
        "fit", inputs,
        {"families": [f.value for f in families], "raw_text": args.raw_text,
         "support": args.support, "holdout": args.holdout,
         "optimizer": {"method": "Nelder-Mead multi-start", **vars(rankfit.FitConfig())},
         **({"preprocess": analysis["preprocess"]} if args.raw_text else {})},
        {"seed": args.seed})
    return manifest, analysis, {"fit_curves.csv": lambda p: _write_curves(p, table, selection, be)}


def _write_curves(path, table, selection, be) -> None:
    """Plot-ready curves: observed counts and N * pmf per fitted family."""
    ranks = np.arange(1, table.V + 1)
    cols = {f.family.value: table.N * rankfit.pmf_vector(f.spec) for f in selection.ranked}
    if be is not None:
        cols["be_occupancy_unnormalized"] = rankfit.be_weight(
            be.spec.params["A"], be.spec.params["B"], ranks)
    observed = table.dense_counts()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "observed", *cols])
        for j, r in enumerate(ranks):
            w.writerow([int(r), int(observed[j]), *(repr(float(v[j])) for v in cols.values())])


# --- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> tuple[RunManifest, dict, dict]:
    if args.pr_box:
        scenario = {"kind": "pr_box"}
        beh = simulators.pr_box_behavior()
    elif args.singlet is not None:
        angles = simulators.SingletAngles(*args.singlet)
        scenario = {"kind": "singlet", "angles": list(args.singlet)}
        beh = simulators.singlet_behavior(angles)
    elif args.strategy is not None:
        scenario = {"kind": "strategy", "index": args.strategy}
        beh = chsh.deterministic_strategy_behavior(args.strategy)
    else:
        try:
            weights = [float(w) for w in args.lhv.split(",")]
        except ValueError:
            raise UsageError("--lhv expects 16 comma-separated weights") from None
        scenario = {"kind": "lhv", "weights": weights}
        beh = simulators.lhv_behavior(weights)
    if args.visibility != 1.0:
        beh = simulators.mix_with_noise(beh, args.visibility)
    scenario["visibility"] = args.visibility
    counts = simulators.sample_trials(beh, args.n, args.seed)
    truth = chsh.chsh_report(bc.correlation_matrix(beh))
    empirical = chsh.chsh_report(bc.correlation_matrix(bc.normalize_counts(counts)))
    analysis = {
        "scenario": scenario,
        "n_per_block": args.n,
        "behavior": beh.as_records(),
        "true_chsh": truth.to_dict(),
        "empirical_chsh": empirical.to_dict(),
        "counts": counts.as_records(),
    }
    manifest = RunManifest("simulate", [], {**scenario, "n": args.n}, {"seed": args.seed})
    if args.counts_out:
        bc.write_counts_csv(counts, args.counts_out)
    return manifest, analysis, {"counts.csv": lambda p: bc.write_counts_csv(counts, p)}


# --- corpus -------------------------------------------------------------------

def cmd_corpus(args) -> tuple[RunManifest, dict, dict]:
    cfg = _preprocess_config(args)
    tokens = corpus.tokenize(corpus.read_text_files(args.input), cfg)
    table = corpus.build_rank_table(tokens)
    top = [{"rank": int(r), "token": t, "count": int(c)}
           for r, t, c in zip(table.ranks[:args.top], table.labels[:args.top], table.counts[:args.top])]
    analysis = {"preprocess": cfg.to_dict(), "N": table.N, "V": table.V, "top": top}
    sidecars = {
        "rank_table.csv": lambda p: corpus.write_rank_table_csv(table, p),
        "token_map.csv": lambda p: corpus.write_token_map_csv(table, p),
        "preprocess_config.json": lambda p: corpus.write_config_json(cfg, p),
    }
    manifest = RunManifest("corpus", [str(p) for p in args.input], cfg.to_dict(), {})
    return manifest, analysis, sidecars


# --- parser -------------------------------------------------------------------

def _add_preprocess_flags(p):
    p.add_argument("--no-case-fold", action="store_true", help="keep original letter case")
    p.add_argument("--keep-punctuation", action="store_true",
                   help="do not strip leading/trailing non-alphanumerics")
    p.add_argument("--stopwords", metavar="FILE", help="whitespace-separated stopword list")
    p.add_argument("--min-length", type=int, default=1, help="drop tokens shorter than this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellrank", description=__doc__.split("\n")[0])
    parser.add_argument("--output-dir", help=f"write report and sidecars here (default ${OUTPUT_DIR_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chsh", help="CHSH analysis of a counts or per-trial CSV")
    p.add_argument("input", help="x,y,a,b,count or participant_id,x,y,a,b CSV")
    p.add_argument("--bit-outcomes", action="store_true", help="outcomes are 0/1 bits, a=(-1)^bit")
    p.add_argument("--convention", default="all", help="'all' or a sign string such as +++-")
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--local-model", action="store_true", help="attempt a local decomposition")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--t-test", action="store_true",
                   help="add the naive one-sample t-test on participant-level S for comparison")
    p.add_argument("--null", type=float, default=2.0, help="t-test null value")
    p.add_argument("--permutations", type=int, default=0)
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("fit", help="rank-frequency model selection")
    p.add_argument("input", nargs="+", help="rank,count / token,count CSV, or text with --raw-text")
    p.add_argument("--raw-text", action="store_true", help="inputs are UTF-8 text files")
    p.add_argument("--families", default=",".join(f.value for f in rankfit.Family))
    p.add_argument("--support", type=int, help="support size V (default: max observed rank)")
    p.add_argument("--holdout", type=float, help="test fraction for out-of-sample log-likelihood")
    p.add_argument("--seed", type=int, default=0)
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="sample counts from a ground-truth behavior")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pr-box", action="store_true")
    g.add_argument("--singlet", type=float, nargs=4, metavar=("A0", "A1", "B0", "B1"))
    g.add_argument("--lhv", metavar="W0,...,W15", help="weights over the 16 deterministic strategies")
    g.add_argument("--strategy", type=int, metavar="K", help="deterministic strategy 0..15")
    p.add_argument("--visibility", type=float, default=1.0)
    p.add_argument("--n", type=int, required=True, help="trials per setting pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--counts-out", help="also write the counts CSV to this path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("corpus", help="build a rank table from text files")
    p.add_argument("input", nargs="+")
    p.add_argument("--top", type=int, default=20, help="tokens listed in the report")
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_corpus)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest, analysis, sidecars = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(EXIT_INPUT, exc)
    except _INFEASIBLE as exc:
        return _fail(EXIT_INFEASIBLE, exc)
    except (SchemaViolation, InvalidBehavior, BellrankError, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, exc if isinstance(exc, BellrankError) else SchemaViolation(str(exc)))
    report = build_report(manifest, analysis)
    text = dumps(report)
    out = _output_dir(args)
    if out is not None:
        (out / f"report-{manifest.subcommand}.json").write_text(text + "\n", encoding="utf-8")
        for name, write in sidecars.items():
            write(out / name)
    sys.stdout.write(text + "\n")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
