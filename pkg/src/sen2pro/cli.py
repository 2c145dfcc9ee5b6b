"""Command-line interface.

stdout carries machine-parseable JSON only (one object per line, or a single
object for theory reports); anything human-facing goes to stderr. Exit codes:
0 success, 1 validation/usage error, 2 I/O or transport error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (
    feature_importance,
    fluctuation_rate,
    group_features,
    q_vs_i_sweep,
)
from .core import (
    CombinedEmbedding,
    ParseError,
    ProtocolError,
    Sen2ProError,
    ServiceError,
    TransportError,
    ValidationError,
    load_combined_embeddings,
    load_eval_dataset,
    load_prob_embeddings,
    load_sample_sets,
    save_combined_embeddings,
    save_prob_embeddings,
)
from .embedding import DistanceConfig, feature_vector
from .estimator import estimate, theorem1_experiment
from .evaluation import eval_analogy, eval_rank, eval_scored_pairs, probe_accuracy, train_probe
from .pipeline import (
    PipelineConfig,
    embed_corpus,
    embeddings_by_text,
    load_pipeline_config,
    sampling_sweep,
)
from .theory import (
    Theorem2Config,
    sce_vs_banding_tradeoff,
    theorem2_check,
    unified_vs_individual,
)

__all__ = ["main", "run"]

ENDPOINT_ENV = "SEN2PRO_ENDPOINT"


class UsageError(Sen2ProError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit(2); we map usage -> 1
        raise UsageError(message)


def _emit(record: dict) -> None:
    sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _read_corpus(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated float list, got {text!r}") from exc


def _distance_config(args) -> DistanceConfig:
    return DistanceConfig(
        alpha_mode=args.alpha_mode,
        fixed_alpha=args.alpha if args.alpha is not None else 0.0,
    )


def _load_embedding_map(path: str) -> dict[str, CombinedEmbedding]:
    """Key embeddings by sentence text when recorded, sentence_id otherwise."""
    ces, texts = load_combined_embeddings(path)
    by_id = {ce.sentence_id: ce for ce in ces}
    out = dict(by_id)
    for sid, text in texts.items():
        out[text] = by_id[sid]
    return out


def _pipeline_config(args) -> PipelineConfig:
    cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
    overrides: dict = {}
    if getattr(args, "backend", None):
        overrides["backend"] = args.backend
    endpoint = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV)
    if endpoint:
        overrides["endpoint"] = endpoint
    if getattr(args, "seed", None) is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "cache", None):
        overrides["cache_dir"] = args.cache
    # check before replace(): applying overrides one at a time would trip
    # config validation midway (backend=remote before the endpoint lands)
    if overrides.get("backend", cfg.backend) == "remote" and not (
        overrides.get("endpoint") or cfg.endpoint
    ):
        raise ValidationError(
            f"remote backend needs --endpoint, {ENDPOINT_ENV}, or an endpoint in the config"
        )
    return replace(cfg, **overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_embed(args) -> None:
    cfg = _pipeline_config(args)
    sentences = _read_corpus(args.corpus)
    embedded = embed_corpus(sentences, cfg, jobs=args.jobs)
    ids = [str(i) for i in range(len(sentences))]
    texts = {sid: s for sid, s in zip(ids, sentences)}
    save_combined_embeddings([embedded[sid] for sid in ids], args.out, sentences=texts)
    dim = embedded[ids[0]].dim
    _emit({"task": "embed", "n": len(sentences), "dim": dim,
           "backend": cfg.backend, "out": args.out})


def _cmd_estimate(args) -> None:
    sample_sets = load_sample_sets(args.samples)
    embeddings = [estimate(ss) for ss in sample_sets]
    save_prob_embeddings(embeddings, args.out)
    _emit({"task": "estimate", "n": len(embeddings), "out": args.out})


def _load_sentence_pairs(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(f"line {lineno}: expected 2 or 3 tab-separated fields")
            pairs.append((parts[0], parts[1]))
    if not pairs:
        raise ParseError("no records")
    return pairs


def _cmd_distance(args) -> None:
    from .embedding import distance as pair_distance

    emap = _load_embedding_map(args.embeddings)
    cfg = _distance_config(args)
    pairs = _load_sentence_pairs(args.pairs)

    def lookup(sentence: str) -> CombinedEmbedding:
        if sentence not in emap:
            raise ValidationError(f"no embedding for sentence {sentence!r}")
        return emap[sentence]

    values = [pair_distance(lookup(a), lookup(b), cfg) for a, b in pairs]
    _emit({"task": "distance", "n": len(values), "config": cfg.to_dict(),
           "distances": values})


def _cmd_eval_sts(args) -> None:
    ds = load_eval_dataset(args.dataset, "scored_pairs")
    result = eval_scored_pairs(ds, _load_embedding_map(args.embeddings), _distance_config(args))
    config = _distance_config(args).to_dict()
    _emit({"task": "eval-sts", "metric": "spearman", "value": result.spearman,
           "n": result.n, "config": config})
    _emit({"task": "eval-sts", "metric": "pearson", "value": result.pearson,
           "n": result.n, "config": config})


def _cmd_eval_rank(args) -> None:
    ds = load_eval_dataset(args.dataset, "rank_pools")
    hits_ks = _int_list(args.hits)
    result = eval_rank(ds, _load_embedding_map(args.embeddings), _distance_config(args), hits_ks)
    config = {**_distance_config(args).to_dict(), "hits": hits_ks}
    _emit({"task": "eval-rank", "metric": "mrr", "value": result.mrr,
           "n": len(ds), "config": config})
    for k, v in result.hits_at.items():
        _emit({"task": "eval-rank", "metric": f"hits@{k}", "value": v,
               "n": len(ds), "config": config})


def _cmd_eval_analogy(args) -> None:
    ds = load_eval_dataset(args.dataset, "analogy_quads")
    score, _ = eval_analogy(ds, _load_embedding_map(args.embeddings))
    _emit({"task": "eval-analogy", "metric": "mean_abs_x", "value": score,
           "n": len(ds), "config": {}})


def _features_for(ce: CombinedEmbedding, mode: str) -> np.ndarray:
    return ce.mu if mode == "mu" else feature_vector(ce)


def _cmd_probe(args) -> None:
    train_ds = load_eval_dataset(args.train, "labeled_sentences")
    test_ds = load_eval_dataset(args.test, "labeled_sentences")
    emap = _load_embedding_map(args.features)
    classes = sorted({rec.label for rec in train_ds.records})
    class_index = {label: i for i, label in enumerate(classes)}

    def featurize(ds) -> tuple[list[np.ndarray], list[int]]:
        feats, labels = [], []
        for rec in ds.records:
            if rec.sentence not in emap:
                raise ValidationError(f"no embedding for sentence {rec.sentence!r}")
            if rec.label not in class_index:
                raise ValidationError(f"label {rec.label!r} absent from training set")
            feats.append(_features_for(emap[rec.sentence], args.mode))
            labels.append(class_index[rec.label])
        return feats, labels

    x_train, y_train = featurize(train_ds)
    x_test, y_test = featurize(test_ds)
    probe = train_probe(x_train, y_train, len(classes),
                        lr=args.lr, epochs=args.epochs, seed=args.seed)
    acc = probe_accuracy(probe, x_test, y_test)
    _emit({"task": "probe", "metric": "accuracy", "value": acc, "n": len(y_test),
           "config": {"mode": args.mode, "lr": args.lr, "epochs": args.epochs,
                      "seed": args.seed, "classes": len(classes)}})


def _cmd_analyze(args) -> None:
    if args.what == "q":
        pe_set = load_prob_embeddings(args.estimates)
        q = fluctuation_rate(pe_set)
        _emit({"task": "analyze", "metric": "fluctuation_Q", "value": q,
               "n": len(pe_set), "config": {}})
    elif args.what == "importance":
        pe_set = load_prob_embeddings(args.estimates)
        emap = _load_embedding_map(args.embeddings)
        ds = load_eval_dataset(args.dataset, "scored_pairs")
        cfg = _distance_config(args)
        for group in group_features(pe_set):
            value = feature_importance(group, ds, emap, cfg)
            _emit({"task": "analyze", "metric": "importance", "value": value,
                   "n": len(ds),
                   "config": {"group": group.group_id,
                              "n_features": len(group.feature_indices)}})
    else:  # qi-sweep
        base = _pipeline_config(args).encoder
        ds = load_eval_dataset(args.dataset, "scored_pairs")
        grid = _float_list(args.dropout_grid)
        configs = [base.with_dropout(p) for p in grid]
        for record in q_vs_i_sweep(configs, ds, seed=args.seed or 0, n=args.n):
            _emit({"task": "analyze", "metric": record.metric, "value": record.value,
                   "n": len(ds), "config": record.context})


def _cmd_theory(args) -> None:
    if args.what == "theorem1":
        report = theorem1_experiment(args.k, _int_list(args.n_grid), args.trials, args.seed or 0)
    elif args.what == "theorem2":
        report = theorem2_check(Theorem2Config(
            k=args.k, trials=args.trials, seed=args.seed or 0,
            epsilon_rule="explicit" if args.epsilon is not None else "auto_valid",
            epsilon=args.epsilon,
        ))
    elif args.what == "tradeoff":
        report = sce_vs_banding_tradeoff(
            _int_list(args.k_grid), args.n, args.trials, args.seed or 0)
    else:  # unified
        cfg = _pipeline_config(args)
        corpus = _read_corpus(args.corpus)
        ds = load_eval_dataset(args.dataset, "scored_pairs")
        report = unified_vs_individual(
            corpus, ds, cfg.encoder, args.n, args.seed or 0, cfg.distance)
    _emit(report.to_dict())


def _cmd_sweep(args) -> None:
    cfg = _pipeline_config(args)
    sentences = _read_corpus(args.corpus)
    ds = load_eval_dataset(args.dataset, "scored_pairs")
    for record in sampling_sweep(sentences, ds, _int_list(args.n_grid), cfg, jobs=args.jobs):
        _emit({"task": "sweep", "metric": record.metric, "value": record.value,
               "n": len(ds), "config": {"n_samples": record.context["n"]}})


# ---------------------------------------------------------------------------
# parser


def _add_distance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha-mode", choices=["per_pair", "fixed"], default="per_pair")
    p.add_argument("--alpha", type=float, default=None,
                   help="fixed alpha value (alpha-mode fixed)")


def build_parser() -> _Parser:
    parser = _Parser(prog="sen2pro", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="corpus -> combined embeddings JSONL")
    p.add_argument("--config", default=None)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=["toy", "remote"], default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cache", default=None)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("estimate", help="sample sets JSONL -> Gaussian estimates JSONL")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("distance", help="pairwise distances from an embeddings file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pairs", required=True)
    _add_distance_flags(p)
    p.set_defaults(func=_cmd_distance)

    p = sub.add_parser("eval-sts", help="scored-pairs correlation evaluation")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    _add_distance_flags(p)
    p.set_defaults(func=_cmd_eval_sts)

    p = sub.add_parser("eval-rank", help="ranking evaluation (MRR, Hits@k)")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--hits", default="1,3,10")
    _add_distance_flags(p)
    p.set_defaults(func=_cmd_eval_rank)

    p = sub.add_parser("eval-analogy", help="analogy distance-gap evaluation")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--dataset", required=True)
    p.set_defaults(func=_cmd_eval_analogy)

    p = sub.add_parser("probe", help="frozen-feature linear probe classification")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--mode", choices=["mu", "mu_sigma"], default="mu_sigma")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("analyze", help="uncertainty analyses")
    p.add_argument("--what", choices=["importance", "q", "qi-sweep"], required=True)
    p.add_argument("--estimates", default=None, help="ProbEmbedding JSONL (model mode)")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--dropout-grid", default="0.05,0.1,0.3")
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--seed", type=int, default=None)
    _add_distance_flags(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("theory", help="numeric theory experiments")
    p.add_argument("--what", choices=["theorem1", "theorem2", "tradeoff", "unified"],
                   required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-grid", default="25,100,400,1600,6400")
    p.add_argument("--k-grid", default="8,32,128")
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--dataset", default=None)
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("sweep", help="metric vs sampling number")
    p.add_argument("--config", default=None)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--n-grid", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_sweep)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return 1
    except (ValidationError, ParseError) as exc:
        _log(f"error: {exc}")
        return 1
    except (TransportError, ServiceError, ProtocolError) as exc:
        _log(f"error: {exc}")
        return 2
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return 2


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
