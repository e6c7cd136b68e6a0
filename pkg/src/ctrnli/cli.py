"""Command-line pipeline orchestrator.

Subcommands: ``validate``, ``shorten``, ``train``, ``predict``, ``evaluate``,
``report``.  All state lives under the configured output directory; identical
config + seed reproduce identical prediction and report files.  The
``--baseline lexical`` prediction path and the truncate/extractive strategies
never import the neural runtime.

Exit codes: 0 success, 1 validation failure, 2 runtime/dependency failure.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import metrics
from .corpus import ClinicalTrialReport, NLIInstance, load_corpus, load_instances
from .errors import (
    CacheCorruption,
    ConfigError,
    CtrNliError,
    DataError,
    DisjointIdSets,
    EmptyCorpus,
    EmptyInput,
    EmptyTrainingSet,
    LengthMismatch,
    MissingPredictions,
    MixedModelTags,
    RuntimeUnavailable,
    UnlabeledInstance,
    ValidationFailure,
)
from .nli import NLIInputPair, assemble_input, lexical_overlap_baseline, read_predictions, write_predictions
from .runconfig import SPLITS, RunConfig, RunManifest, build_strategy, load_run_config
from .shortening import ShorteningStrategy, StrategyKind, SummaryCache, shorten
from .summarizer import build_finetune_dataset
from .tfidf import TfidfModel, fit_tfidf
from .tokenization import SubwordTokenizer, resolve_tokenizer

log = logging.getLogger(__name__)

_VALIDATION_ERRORS = (
    ConfigError,
    ValidationFailure,
    DataError,
    UnlabeledInstance,
    LengthMismatch,
    EmptyInput,
    MixedModelTags,
    EmptyCorpus,
)
_RUNTIME_ERRORS = (
    RuntimeUnavailable,
    CacheCorruption,
    EmptyTrainingSet,
    MissingPredictions,
    DisjointIdSets,
)


# ---------------------------------------------------------------------------
# Shared plumbing


def _budget_tokenizer(config: RunConfig) -> SubwordTokenizer:
    return resolve_tokenizer(config.classifier.model_identifier)


def _load_split(
    config: RunConfig, split: str
) -> tuple[dict[str, ClinicalTrialReport], list[NLIInstance]]:
    if split not in config.instance_files:
        raise ConfigError(f"config declares no instance file for split {split!r}")
    corpus = load_corpus(config.corpus_dir)
    instances = load_instances(config.instance_files[split], corpus)
    return corpus, instances


def _strategy(config: RunConfig, override: str | None) -> ShorteningStrategy:
    if override is None:
        return config.strategy
    return build_strategy(
        override,
        word_limit=config.strategy.word_limit,
        classifier_identifier=config.classifier.model_identifier,
        summarizer=config.summarizer,
    )


def _cache_path(config: RunConfig, strategy: ShorteningStrategy, split: str) -> Path:
    digest = hashlib.sha1(strategy.fingerprint().encode("utf-8")).hexdigest()[:12]
    return config.cache_dir / "shortened" / f"{split}-{strategy.kind.value}-{digest}.jsonl"


def _train_premise_texts(
    config: RunConfig, corpus: dict[str, ClinicalTrialReport]
) -> list[str]:
    """Distinct (trial, section) texts referenced by the training split."""
    train_instances = load_instances(config.instance_files["train"], corpus)
    seen: dict[tuple[str, str], str] = {}
    for instance in train_instances:
        for trial_id in (instance.primary_trial, instance.secondary_trial):
            if trial_id is None:
                continue
            key = (trial_id, instance.section.canonical)
            if key not in seen:
                seen[key] = corpus[trial_id].section_text(instance.section)
    return [seen[key] for key in sorted(seen)]


def _fit_or_load_tfidf(config: RunConfig, corpus: dict[str, ClinicalTrialReport]) -> TfidfModel:
    path = config.output_dir / "tfidf.json"
    if path.exists():
        return TfidfModel.load(path)
    model = fit_tfidf(_train_premise_texts(config, corpus))
    path.parent.mkdir(parents=True, exist_ok=True)
    model.save(path)
    log.info("fitted tf-idf on %d training documents -> %s", len(model.idf), path)
    return model


def _summarizer_handle(config: RunConfig, corpus: dict[str, ClinicalTrialReport]):
    """Best fine-tuned checkpoint when present, zero-shot model otherwise."""
    from . import seq2seq

    best_marker = config.output_dir / "summarizer" / "best.json"
    if best_marker.exists():
        epoch = json.loads(best_marker.read_text(encoding="utf-8"))["epoch"]
        checkpoint = config.output_dir / "summarizer" / f"epoch-{epoch}"
        log.info("using fine-tuned summarizer checkpoint %s", checkpoint)
        return seq2seq.load_checkpoint(checkpoint, config.summarizer)
    if config.summarizer.model_identifier == seq2seq.TINY_IDENTIFIER:
        texts = _train_premise_texts(config, corpus)
        train_instances = load_instances(config.instance_files["train"], corpus)
        texts += [i.statement for i in train_instances]
        return seq2seq.load_summarizer(config.summarizer, vocab_texts=texts, seed=config.seed)
    return seq2seq.load_summarizer(config.summarizer, seed=config.seed)


def _assemble_pairs(
    instances: list[NLIInstance], cache: SummaryCache, tokenizer: SubwordTokenizer
) -> list[NLIInputPair]:
    pairs = []
    for instance in instances:
        shortened = cache.get(instance.instance_id)
        if shortened is None:
            raise MissingPredictions(
                f"no cached shortened premise for {instance.instance_id!r}; run `shorten` first"
            )
        pairs.append(assemble_input(shortened, instance, tokenizer))
    return pairs


def _model_tag(model_name: str, strategy: ShorteningStrategy) -> str:
    return f"{model_name}+{strategy.kind.value}"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    problems: list[str] = list(config.validate_paths())
    if not problems:
        diagnostics = []
        corpus = load_corpus(config.corpus_dir, strict=False, diagnostics=diagnostics)
        for split, path in sorted(config.instance_files.items()):
            load_instances(path, corpus, strict=False, diagnostics=diagnostics)
        problems.extend(str(d) for d in diagnostics)
    for problem in problems:
        print(f"INVALID: {problem}")
    if problems:
        return 1
    print(f"OK: config {config.config_hash[:12]} validates cleanly")
    return 0


def cmd_shorten(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    corpus, instances = _load_split(config, args.split)
    strategy = _strategy(config, args.strategy)
    tokenizer = _budget_tokenizer(config)

    tfidf_model = None
    summarizer = None
    if strategy.kind is StrategyKind.EXTRACTIVE_TFIDF:
        tfidf_model = _fit_or_load_tfidf(config, corpus)
    elif strategy.kind in (StrategyKind.ABSTRACTIVE_COMBINED, StrategyKind.ABSTRACTIVE_DISTINCT):
        summarizer = _summarizer_handle(config, corpus)

    cache_path = _cache_path(config, strategy, args.split)
    cache = SummaryCache(cache_path, strategy.fingerprint())
    for instance in instances:
        shorten(
            instance,
            corpus,
            strategy,
            tokenizer=tokenizer,
            tfidf_model=tfidf_model,
            summarizer=summarizer,
            cache=cache,
        )
    manifest = RunManifest.load_or_create(config.output_dir, config.config_hash)
    manifest.record(f"shortened:{args.split}:{strategy.kind.value}", cache_path)
    print(
        json.dumps(
            {
                "split": args.split,
                "strategy": strategy.kind.value,
                "cache": str(cache_path),
                "generated": cache.misses,
                "cached": cache.hits,
            }
        )
    )
    return 0


def cmd_train(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    if args.component == "summarizer":
        return _train_summarizer(config, force=args.force)
    return _train_classifier(config, args.strategy, force=args.force)


def _train_summarizer(config: RunConfig, *, force: bool) -> int:
    from . import seq2seq

    out_dir = config.output_dir / "summarizer"
    scores_path = out_dir / "scores.json"
    if scores_path.exists() and not force:
        print(f"up to date: {scores_path}")
        return 0
    corpus = load_corpus(config.corpus_dir)
    train_instances = load_instances(config.instance_files["train"], corpus)
    dev_instances = load_instances(config.instance_files["dev"], corpus)
    mode = "combined" if config.strategy.kind is StrategyKind.ABSTRACTIVE_COMBINED else "distinct"
    train_pairs = build_finetune_dataset(train_instances, corpus, mode=mode)
    dev_pairs = build_finetune_dataset(dev_instances, corpus, mode=mode)

    _, scores = seq2seq.finetune(
        config.summarizer_finetune,
        train_pairs,
        dev_pairs,
        config.summarizer,
        checkpoint_dir=out_dir,
    )
    best = max(scores, key=lambda s: (s.rouge1_f, -s.epoch))
    out_dir.mkdir(parents=True, exist_ok=True)
    scores_path.write_text(
        json.dumps([{"epoch": s.epoch, "rouge1_f": s.rouge1_f} for s in scores], indent=2) + "\n",
        encoding="utf-8",
    )
    (out_dir / "best.json").write_text(json.dumps({"epoch": best.epoch}) + "\n", encoding="utf-8")
    manifest = RunManifest.load_or_create(config.output_dir, config.config_hash)
    manifest.record("summarizer:scores", scores_path)
    print(json.dumps({"component": "summarizer", "best_epoch": best.epoch, "scores": str(scores_path)}))
    return 0


def _train_classifier(config: RunConfig, strategy_override: str | None, *, force: bool) -> int:
    from . import encoder

    out_dir = config.output_dir / "classifier"
    scores_path = out_dir / "dev_macro_f1.json"
    if scores_path.exists() and not force:
        print(f"up to date: {scores_path}")
        return 0
    strategy = _strategy(config, strategy_override)
    tokenizer = _budget_tokenizer(config)
    corpus = load_corpus(config.corpus_dir)
    pair_sets = {}
    for split in ("train", "dev"):
        instances = load_instances(config.instance_files[split], corpus)
        cache_path = _cache_path(config, strategy, split)
        if not cache_path.exists():
            raise MissingPredictions(
                f"no shortened-premise cache for split {split!r} "
                f"({cache_path}); run `shorten --split {split}` first"
            )
        cache = SummaryCache(cache_path, strategy.fingerprint())
        pair_sets[split] = _assemble_pairs(instances, cache, tokenizer)

    classifier, dev_f1 = encoder.finetune_classifier(
        config.classifier, pair_sets["train"], pair_sets["dev"]
    )
    best_epoch = max(range(len(dev_f1)), key=lambda i: (dev_f1[i], -i)) + 1
    classifier.save(out_dir / "best")
    out_dir.mkdir(parents=True, exist_ok=True)
    scores_path.write_text(json.dumps(dev_f1, indent=2) + "\n", encoding="utf-8")
    (out_dir / "best.json").write_text(
        json.dumps({"epoch": best_epoch}) + "\n", encoding="utf-8"
    )
    manifest = RunManifest.load_or_create(config.output_dir, config.config_hash)
    manifest.record("classifier:best", out_dir / "best")
    manifest.record("classifier:dev_scores", scores_path)
    print(json.dumps({"component": "classifier", "best_epoch": best_epoch, "scores": str(scores_path)}))
    return 0


def cmd_predict(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    corpus, instances = _load_split(config, args.split)
    strategy = _strategy(config, args.strategy)
    tokenizer = _budget_tokenizer(config)

    cache_path = _cache_path(config, strategy, args.split)
    if not cache_path.exists():
        raise MissingPredictions(
            f"no shortened-premise cache at {cache_path}; run `shorten --split {args.split}` first"
        )
    cache = SummaryCache(cache_path, strategy.fingerprint())
    pairs = _assemble_pairs(instances, cache, tokenizer)

    if args.baseline == "lexical":
        tag = _model_tag("lexical", strategy)
        records = lexical_overlap_baseline(pairs, model_tag=tag)
    else:
        from . import encoder

        best_dir = config.output_dir / "classifier" / "best"
        if not best_dir.exists():
            raise MissingPredictions(
                f"no trained classifier at {best_dir}; run `train --component classifier` "
                "or pass --baseline lexical"
            )
        classifier = encoder.load_classifier_checkpoint(best_dir, config.classifier)
        tag = _model_tag(config.classifier.model_identifier, strategy)
        records = encoder.predict(classifier, pairs, tag)

    out_path = config.output_dir / "predictions" / f"{args.split}-{tag}.jsonl"
    if out_path.exists() and not args.force:
        print(json.dumps({"split": args.split, "model_tag": tag, "predictions": str(out_path), "skipped": True}))
        return 0
    write_predictions(out_path, records)
    manifest = RunManifest.load_or_create(config.output_dir, config.config_hash)
    manifest.record(f"predictions:{args.split}:{tag}", out_path)
    print(json.dumps({"split": args.split, "model_tag": tag, "predictions": str(out_path)}))
    return 0


def _records_tag(records) -> str:
    tags = {r.model_tag for r in records}
    if len(tags) != 1:
        raise MixedModelTags(f"prediction file mixes model tags {sorted(tags)}")
    return tags.pop()


def cmd_evaluate(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    corpus, instances = _load_split(config, args.split)
    contrast_instances = instances
    if args.contrast_file:
        contrast_instances = load_instances(args.contrast_file, corpus)

    tokenizer = _budget_tokenizer(config)
    reports = []
    prediction_sets = []
    for path in args.predictions:
        if not Path(path).exists():
            raise MissingPredictions(f"prediction file not found: {path}")
        records = read_predictions(path)
        tag = _records_tag(records)
        prediction_sets.append((tag, records))

        strategy_name = tag.rsplit("+", 1)[1] if "+" in tag else config.strategy.kind.value
        strategy = _strategy(config, strategy_name)
        cache_path = _cache_path(config, strategy, args.split)
        if not cache_path.exists():
            raise MissingPredictions(
                f"no shortened-premise cache for strategy {strategy_name!r} "
                f"({cache_path}); run `shorten` first"
            )
        cache = SummaryCache(cache_path, strategy.fingerprint())
        shortened_by_id = {i.instance_id: cache.get(i.instance_id) for i in instances}
        missing = [iid for iid, sp in shortened_by_id.items() if sp is None]
        if missing:
            raise MissingPredictions(f"cache misses shortened premises for {missing[:5]}")

        length_source = "original" if strategy.kind is StrategyKind.TRUNCATE else "shortened"
        breakdowns = {
            group: metrics.breakdown(
                instances,
                corpus,
                shortened_by_id,
                records,
                group,
                tokenizer,
                length_source=length_source,
            )
            for group in ("section", "type")
        }
        pairs = metrics.build_contrast_pairs(contrast_instances, records)
        reports.append(
            metrics.compute_report(instances, records, contrast_pairs=pairs, breakdowns=breakdowns)
        )

    agreement = metrics.agreement_matrix(prediction_sets) if len(prediction_sets) >= 2 else None

    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    metrics.write_report_json(report_path, reports, agreement)
    metrics.write_results_csv(out_dir / "results.csv", reports)
    metrics.write_breakdown_csv(out_dir / "breakdown_section.csv", reports, "section")
    metrics.write_breakdown_csv(out_dir / "breakdown_type.csv", reports, "type")
    manifest = RunManifest.load_or_create(config.output_dir, config.config_hash)
    manifest.record("report", report_path)
    if agreement is not None:
        metrics.write_agreement_csv(out_dir / "agreement.csv", agreement)
        metrics.render_heatmap(agreement, out_dir / "agreement.png")
        manifest.record("agreement:heatmap", out_dir / "agreement.png")

    for report in reports:
        print(
            f"{report.model_tag}: macro_f1={report.macro_f1:.4f} "
            f"precision={report.precision:.4f} recall={report.recall:.4f} "
            f"faithfulness={metrics.fmt_metric(report.faithfulness)} "
            f"consistency={metrics.fmt_metric(report.consistency)}"
        )
    print(json.dumps({"report": str(report_path)}))
    return 0


def cmd_report(args) -> int:
    config = load_run_config(args.config, seed_override=args.seed)
    report_path = config.output_dir / "report.json"
    if not report_path.exists():
        raise MissingPredictions(f"no report at {report_path}; run `evaluate` first")
    doc = json.loads(report_path.read_text(encoding="utf-8"))
    reports = [metrics.MetricsReport.from_dict(r) for r in doc["reports"]]
    agreement = metrics.AgreementMatrix.from_dict(doc["agreement"]) if "agreement" in doc else None

    out_dir = config.output_dir
    metrics.write_results_csv(out_dir / "results.csv", reports)
    metrics.write_breakdown_csv(out_dir / "breakdown_section.csv", reports, "section")
    metrics.write_breakdown_csv(out_dir / "breakdown_type.csv", reports, "type")
    if agreement is not None:
        metrics.write_agreement_csv(out_dir / "agreement.csv", agreement)
        metrics.render_heatmap(agreement, out_dir / "agreement.png")

    header = " | ".join(metrics.RESULTS_COLUMNS)
    print(header)
    print("-" * len(header))
    for report in reports:
        print(
            f"{report.model_tag} | {metrics.fmt_metric(report.macro_f1)} | "
            f"{metrics.fmt_metric(report.precision)} | {metrics.fmt_metric(report.recall)} | "
            f"{metrics.fmt_metric(report.faithfulness)} | {metrics.fmt_metric(report.consistency)}"
        )
    return 0


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctrnli",
        description="Clinical-trial NLI pipeline: shorten premises, classify, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="run config TOML")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("validate", help="check config, corpus and instance files")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("shorten", help="build the shortened-premise cache for a split")
    add_common(p)
    p.add_argument("--split", choices=SPLITS, required=True)
    p.add_argument("--strategy", default=None, help="override the config strategy")
    p.set_defaults(func=cmd_shorten)

    p = sub.add_parser("train", help="fine-tune the summarizer or the classifier")
    add_common(p)
    p.add_argument("--component", choices=("summarizer", "classifier"), required=True)
    p.add_argument("--strategy", default=None, help="override the config strategy (classifier)")
    p.add_argument("--force", action="store_true", help="retrain even if outputs exist")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write predictions JSONL for a split")
    add_common(p)
    p.add_argument("--split", choices=SPLITS, required=True)
    p.add_argument("--strategy", default=None, help="override the config strategy")
    p.add_argument("--baseline", choices=("lexical",), default=None, help="model-free baseline")
    p.add_argument("--force", action="store_true", help="overwrite existing predictions")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score prediction files and emit the report")
    add_common(p)
    p.add_argument("--split", choices=SPLITS, required=True)
    p.add_argument("--predictions", nargs="+", required=True, help="prediction JSONL file(s)")
    p.add_argument("--contrast-file", default=None, help="instance file carrying contrast links")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render tables and plots from report.json")
    add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME_ERRORS + (CtrNliError, OSError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
