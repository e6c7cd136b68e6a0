"""Evaluation: Macro F1, contrast-set robustness, breakdowns and agreement.

Binary labels use the canonical numeric encoding (Entailment=1,
Contradiction=0), so the robustness metrics are exact ratios of integers.
Metrics over an empty eligible set are *undefined* (``None``), never 0.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    ClinicalTrialReport,
    InstanceType,
    Intervention,
    Label,
    NLIInstance,
    SectionId,
    resolve_premises,
)
from .errors import (
    DisjointIdSets,
    EmptyInput,
    LengthMismatch,
    MissingPredictions,
    MixedModelTags,
    UnlabeledInstance,
)
from .nli import PredictionRecord
from .shortening import ShortenedPremise
from .tokenization import SubwordTokenizer


def macro_f1(golds: list[Label], preds: list[Label]) -> tuple[float, float, float]:
    """Unweighted two-class mean of F1/precision/recall.

    Zero-denominator convention: a class with no predicted (or no gold)
    members scores 0 for the affected metric.
    """
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} golds vs {len(preds)} predictions")
    if not golds:
        raise EmptyInput("no labels to score")
    f1s, precisions, recalls = [], [], []
    for cls in (Label.ENTAILMENT, Label.CONTRADICTION):
        tp = sum(1 for g, p in zip(golds, preds) if g is cls and p is cls)
        fp = sum(1 for g, p in zip(golds, preds) if g is not cls and p is cls)
        fn = sum(1 for g, p in zip(golds, preds) if g is cls and p is not cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    return (sum(f1s) / 2, sum(precisions) / 2, sum(recalls) / 2)


@dataclass(frozen=True)
class ContrastPair:
    """An original statement and its perturbed rewrite, with one model's predictions."""

    original_id: str
    original_gold: Label
    original_pred: Label
    perturbed_id: str
    perturbed_gold: Label
    perturbed_pred: Label
    intervention: Intervention
    model_tag: str


def build_contrast_pairs(
    instances: list[NLIInstance], records: list[PredictionRecord]
) -> list[ContrastPair]:
    """Join contrast-linked instances with one model's predictions."""
    instances_by_id = {i.instance_id: i for i in instances}
    records_by_id = {r.instance_id: r for r in records}
    pairs = []
    for instance in instances:
        if instance.contrast is None:
            continue
        original = instances_by_id[instance.contrast.original_id]
        for inst in (instance, original):
            if inst.label is None:
                raise UnlabeledInstance(f"instance {inst.instance_id!r} has no gold label")
            if inst.instance_id not in records_by_id:
                raise MissingPredictions(f"no prediction for instance {inst.instance_id!r}")
        rec_x = records_by_id[instance.instance_id]
        rec_y = records_by_id[original.instance_id]
        if rec_x.model_tag != rec_y.model_tag:
            raise MixedModelTags(f"{rec_y.model_tag!r} vs {rec_x.model_tag!r}")
        pairs.append(
            ContrastPair(
                original_id=original.instance_id,
                original_gold=original.label,
                original_pred=rec_y.predicted,
                perturbed_id=instance.instance_id,
                perturbed_gold=instance.label,
                perturbed_pred=rec_x.predicted,
                intervention=instance.contrast.intervention,
                model_tag=rec_x.model_tag,
            )
        )
    return pairs


def _check_single_tag(pairs: list[ContrastPair]) -> None:
    tags = {p.model_tag for p in pairs}
    if len(tags) > 1:
        raise MixedModelTags(f"pairs mix model tags {sorted(tags)}")


def faithfulness(pairs: list[ContrastPair]) -> float | None:
    """Mean prediction flip over altering pairs whose original was correct.

    Undefined (None) when no pair qualifies.
    """
    _check_single_tag(pairs)
    eligible = [
        p
        for p in pairs
        if p.intervention is Intervention.ALTERING and p.original_pred is p.original_gold
    ]
    if not eligible:
        return None
    flips = sum(abs(p.original_pred.numeric - p.perturbed_pred.numeric) for p in eligible)
    return flips / len(eligible)


def consistency(pairs: list[ContrastPair]) -> float | None:
    """Mean prediction stability over preserving pairs, accuracy-agnostic.

    Undefined (None) when there are no preserving pairs.
    """
    _check_single_tag(pairs)
    eligible = [p for p in pairs if p.intervention is Intervention.PRESERVING]
    if not eligible:
        return None
    stable = sum(1 - abs(p.original_pred.numeric - p.perturbed_pred.numeric) for p in eligible)
    return stable / len(eligible)


def contrast_counts(pairs: list[ContrastPair]) -> dict[str, int]:
    altering = [p for p in pairs if p.intervention is Intervention.ALTERING]
    return {
        "contrast_pairs": len(pairs),
        "altering_pairs": len(altering),
        "altering_eligible": sum(1 for p in altering if p.original_pred is p.original_gold),
        "preserving_pairs": len(pairs) - len(altering),
    }


@dataclass(frozen=True)
class BreakdownRow:
    """Per-slice score and length statistics.

    ``avg_premise_tokens`` follows the reporting convention of the headline
    tables: original premise lengths under truncation, shortened lengths for
    the summarizing strategies.  Both measurements are always kept alongside
    to remove ambiguity.
    """

    slice_name: str
    macro_f1: float
    avg_premise_tokens: float
    avg_premise_tokens_entailment: float
    avg_premise_tokens_contradiction: float
    avg_statement_tokens: float
    avg_premise_tokens_original: float
    avg_premise_tokens_shortened: float

    def to_dict(self) -> dict:
        return {
            "slice": self.slice_name,
            "macro_f1": self.macro_f1,
            "avg_premise_tokens": self.avg_premise_tokens,
            "avg_premise_tokens_entailment": self.avg_premise_tokens_entailment,
            "avg_premise_tokens_contradiction": self.avg_premise_tokens_contradiction,
            "avg_statement_tokens": self.avg_statement_tokens,
            "avg_premise_tokens_original": self.avg_premise_tokens_original,
            "avg_premise_tokens_shortened": self.avg_premise_tokens_shortened,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BreakdownRow":
        return cls(
            slice_name=doc["slice"],
            macro_f1=doc["macro_f1"],
            avg_premise_tokens=doc["avg_premise_tokens"],
            avg_premise_tokens_entailment=doc["avg_premise_tokens_entailment"],
            avg_premise_tokens_contradiction=doc["avg_premise_tokens_contradiction"],
            avg_statement_tokens=doc["avg_statement_tokens"],
            avg_premise_tokens_original=doc["avg_premise_tokens_original"],
            avg_premise_tokens_shortened=doc["avg_premise_tokens_shortened"],
        )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def breakdown(
    instances: list[NLIInstance],
    corpus: dict[str, ClinicalTrialReport],
    shortened_by_id: dict[str, ShortenedPremise],
    records: list[PredictionRecord],
    group_by: str,
    tokenizer: SubwordTokenizer,
    *,
    length_source: str = "original",
) -> list[BreakdownRow]:
    """One row per observed section or instance type.

    ``group_by`` is ``"section"`` or ``"type"``; ``length_source`` picks which
    measurement fills the headline premise-length column.
    """
    if group_by not in ("section", "type"):
        raise ValueError(f"group_by must be 'section' or 'type', got {group_by!r}")
    if length_source not in ("original", "shortened"):
        raise ValueError(f"length_source must be 'original' or 'shortened', got {length_source!r}")
    records_by_id = {r.instance_id: r for r in records}
    missing = [i.instance_id for i in instances if i.instance_id not in records_by_id]
    if missing:
        raise MissingPredictions(f"no predictions for instances {missing[:5]}")

    slice_order = (
        [s.canonical for s in SectionId] if group_by == "section" else [t.value for t in InstanceType]
    )
    grouped: dict[str, list[NLIInstance]] = {}
    for instance in instances:
        key = (
            instance.section.canonical
            if group_by == "section"
            else instance.instance_type.value
        )
        grouped.setdefault(key, []).append(instance)

    rows = []
    for key in slice_order:
        members = grouped.get(key)
        if not members:
            continue
        golds = []
        for inst in members:
            if inst.label is None:
                raise UnlabeledInstance(f"instance {inst.instance_id!r} has no gold label")
            golds.append(inst.label)
        preds = [records_by_id[i.instance_id].predicted for i in members]
        f1, _, _ = macro_f1(golds, preds)

        original_lengths, shortened_lengths, statement_lengths = [], [], []
        for inst in members:
            primary, secondary = resolve_premises(inst, corpus)
            original_lengths.append(
                tokenizer.count(primary) + (tokenizer.count(secondary) if secondary else 0)
            )
            shortened = shortened_by_id.get(inst.instance_id)
            if shortened is None:
                raise MissingPredictions(f"no shortened premise for instance {inst.instance_id!r}")
            shortened_lengths.append(sum(shortened.token_counts.values()))
            statement_lengths.append(tokenizer.count(inst.statement))

        headline = original_lengths if length_source == "original" else shortened_lengths
        by_label = lambda label: [
            length for length, inst in zip(headline, members) if inst.label is label
        ]
        rows.append(
            BreakdownRow(
                slice_name=key,
                macro_f1=f1,
                avg_premise_tokens=_mean(headline),
                avg_premise_tokens_entailment=_mean(by_label(Label.ENTAILMENT)),
                avg_premise_tokens_contradiction=_mean(by_label(Label.CONTRADICTION)),
                avg_statement_tokens=_mean(statement_lengths),
                avg_premise_tokens_original=_mean(original_lengths),
                avg_premise_tokens_shortened=_mean(shortened_lengths),
            )
        )
    return rows


@dataclass(frozen=True)
class AgreementMatrix:
    """Pairwise fraction of shared instances with identical predicted labels."""

    model_tags: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]

    def to_dict(self) -> dict:
        return {"model_tags": list(self.model_tags), "matrix": [list(r) for r in self.matrix]}

    @classmethod
    def from_dict(cls, doc: dict) -> "AgreementMatrix":
        return cls(
            model_tags=tuple(doc["model_tags"]),
            matrix=tuple(tuple(row) for row in doc["matrix"]),
        )


def agreement_matrix(
    prediction_sets: list[tuple[str, list[PredictionRecord]]]
) -> AgreementMatrix:
    """Symmetric agreement over every pair of prediction sets."""
    tags = [tag for tag, _ in prediction_sets]
    maps = [{r.instance_id: r.predicted for r in records} for _, records in prediction_sets]
    n = len(maps)
    matrix = [[1.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            common = maps[i].keys() & maps[j].keys()
            if not common:
                raise DisjointIdSets(f"{tags[i]!r} and {tags[j]!r} share no instance ids")
            agree = sum(1 for iid in common if maps[i][iid] is maps[j][iid])
            matrix[i][j] = matrix[j][i] = agree / len(common)
    return AgreementMatrix(model_tags=tuple(tags), matrix=tuple(tuple(r) for r in matrix))


@dataclass(frozen=True)
class MetricsReport:
    """Headline metrics plus breakdowns for one model's predictions."""

    model_tag: str
    macro_f1: float
    precision: float
    recall: float
    faithfulness: float | None
    consistency: float | None
    breakdowns: dict[str, list[BreakdownRow]]
    counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "macro_f1": self.macro_f1,
            "precision": self.precision,
            "recall": self.recall,
            "faithfulness": self.faithfulness,
            "consistency": self.consistency,
            "breakdowns": {
                group: [row.to_dict() for row in rows] for group, rows in self.breakdowns.items()
            },
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(
            model_tag=doc["model_tag"],
            macro_f1=doc["macro_f1"],
            precision=doc["precision"],
            recall=doc["recall"],
            faithfulness=doc["faithfulness"],
            consistency=doc["consistency"],
            breakdowns={
                group: [BreakdownRow.from_dict(r) for r in rows]
                for group, rows in doc["breakdowns"].items()
            },
            counts=doc["counts"],
        )


def compute_report(
    instances: list[NLIInstance],
    records: list[PredictionRecord],
    *,
    contrast_pairs: list[ContrastPair] | None = None,
    breakdowns: dict[str, list[BreakdownRow]] | None = None,
) -> MetricsReport:
    """Assemble one model's full report from its aligned predictions."""
    records_by_id = {r.instance_id: r for r in records}
    golds, preds = [], []
    for instance in instances:
        if instance.label is None:
            raise UnlabeledInstance(f"instance {instance.instance_id!r} has no gold label")
        record = records_by_id.get(instance.instance_id)
        if record is None:
            raise MissingPredictions(f"no prediction for instance {instance.instance_id!r}")
        golds.append(instance.label)
        preds.append(record.predicted)
    f1, precision, recall = macro_f1(golds, preds)
    pairs = contrast_pairs or []
    counts = {"instances": len(instances), **contrast_counts(pairs)}
    tags = {r.model_tag for r in records}
    return MetricsReport(
        model_tag=tags.pop() if len(tags) == 1 else "+".join(sorted(tags)),
        macro_f1=f1,
        precision=precision,
        recall=recall,
        faithfulness=faithfulness(pairs) if pairs else None,
        consistency=consistency(pairs) if pairs else None,
        breakdowns=breakdowns or {},
        counts=counts,
    )


# ---------------------------------------------------------------------------
# Report emission

RESULTS_COLUMNS = ("Method", "Macro F1", "Precision", "Recall", "Faithfulness", "Consistency")
BREAKDOWN_COLUMNS = (
    "Method",
    "Slice",
    "Macro F1",
    "Avg Premise Len",
    "Avg Premise - Ent",
    "Avg Premise - Con",
    "Avg Statement Len",
)


def fmt_metric(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.4f}"


def write_results_csv(path: Path, reports: list[MetricsReport]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_COLUMNS)
        for report in reports:
            writer.writerow(
                [
                    report.model_tag,
                    fmt_metric(report.macro_f1),
                    fmt_metric(report.precision),
                    fmt_metric(report.recall),
                    fmt_metric(report.faithfulness),
                    fmt_metric(report.consistency),
                ]
            )


def write_breakdown_csv(path: Path, reports: list[MetricsReport], group: str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BREAKDOWN_COLUMNS)
        for report in reports:
            for row in report.breakdowns.get(group, []):
                writer.writerow(
                    [
                        report.model_tag,
                        row.slice_name,
                        fmt_metric(row.macro_f1),
                        f"{row.avg_premise_tokens:.1f}",
                        f"{row.avg_premise_tokens_entailment:.1f}",
                        f"{row.avg_premise_tokens_contradiction:.1f}",
                        f"{row.avg_statement_tokens:.1f}",
                    ]
                )


def write_agreement_csv(path: Path, matrix: AgreementMatrix) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["", *matrix.model_tags])
        for tag, row in zip(matrix.model_tags, matrix.matrix):
            writer.writerow([tag, *(f"{v:.4f}" for v in row)])


def render_heatmap(matrix: AgreementMatrix, path: Path) -> None:
    """Static agreement heatmap image."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = len(matrix.model_tags)
    fig, ax = plt.subplots(figsize=(2 + 0.9 * n, 1.5 + 0.9 * n))
    image = ax.imshow(matrix.matrix, vmin=0.0, vmax=1.0, cmap="Blues")
    ax.set_xticks(range(n), labels=matrix.model_tags, rotation=45, ha="right")
    ax.set_yticks(range(n), labels=matrix.model_tags)
    for i in range(n):
        for j in range(n):
            value = matrix.matrix[i][j]
            ax.text(
                j,
                i,
                f"{value:.2f}",
                ha="center",
                va="center",
                color="white" if value > 0.6 else "black",
                fontsize=8,
            )
    fig.colorbar(image, ax=ax, fraction=0.046)
    ax.set_title("Prediction agreement")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_report_json(path: Path, reports: list[MetricsReport], agreement: AgreementMatrix | None) -> None:
    doc = {"reports": [r.to_dict() for r in reports]}
    if agreement is not None:
        doc["agreement"] = agreement.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
