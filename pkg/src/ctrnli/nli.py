"""Classifier input assembly, prediction records and the lexical baseline.

The statement side of an input pair is never altered; only the premise side
is cut when the assembled sequence would overflow the classifier window.
Predictions are interchanged as JSONL records, one per instance.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .corpus import Label, NLIInstance
from .errors import StatementTooLong
from .shortening import ShortenedPremise, compute_budget
from .tokenization import SubwordTokenizer, word_tokens

log = logging.getLogger(__name__)

PRIMARY_MARKER = "Primary trial: "
SECONDARY_MARKER = " Secondary trial: "


@dataclass(frozen=True)
class NLIInputPair:
    """One assembled (premise, statement) pair ready for classification."""

    instance_id: str
    text_a: str
    text_b: str
    gold: Label | None = None


@dataclass(frozen=True)
class PredictionRecord:
    """Model output for one instance; score is the entailment probability."""

    instance_id: str
    predicted: Label
    score: float
    model_tag: str

    @classmethod
    def from_score(cls, instance_id: str, score: float, model_tag: str) -> "PredictionRecord":
        # Tie rule: score exactly 0.5 counts as Entailment.
        predicted = Label.ENTAILMENT if score >= 0.5 else Label.CONTRADICTION
        return cls(instance_id=instance_id, predicted=predicted, score=score, model_tag=model_tag)

    def to_record(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "predicted": self.predicted.value,
            "score": self.score,
            "model_tag": self.model_tag,
        }

    @classmethod
    def from_record(cls, record: dict) -> "PredictionRecord":
        return cls(
            instance_id=record["instance_id"],
            predicted=Label.parse(record["predicted"]),
            score=float(record["score"]),
            model_tag=record["model_tag"],
        )


def assemble_input(
    shortened: ShortenedPremise,
    instance: NLIInstance,
    tokenizer: SubwordTokenizer,
    *,
    model_max: int = 512,
    reserve: int = 10,
) -> NLIInputPair:
    """Join shortened premise part(s) into text_a, keeping the window intact.

    A lone premise part passes through unchanged; two parts are joined with
    explicit trial markers so the classifier can attribute evidence.  If the
    premise side overflows the statement's budget it is truncated (logged);
    the statement itself is never touched.
    """
    if shortened.instance_id != instance.instance_id:
        raise ValueError(
            f"shortened premise {shortened.instance_id!r} does not belong to "
            f"instance {instance.instance_id!r}"
        )
    if shortened.secondary_short is None:
        text_a = shortened.primary_short
    else:
        text_a = (
            PRIMARY_MARKER + shortened.primary_short + SECONDARY_MARKER + shortened.secondary_short
        )
    budget = compute_budget(instance.statement, tokenizer, model_max=model_max, reserve=reserve)
    if tokenizer.count(text_a) > budget.budget_x:
        log.warning(
            "instance %s: premise side overflows budget (%d > %d tokens), truncating",
            instance.instance_id,
            tokenizer.count(text_a),
            budget.budget_x,
        )
        text_a = tokenizer.truncate(text_a, budget.budget_x)
    return NLIInputPair(
        instance_id=instance.instance_id,
        text_a=text_a,
        text_b=instance.statement,
        gold=instance.label,
    )


def assembled_token_count(pair: NLIInputPair, tokenizer: SubwordTokenizer, reserve: int = 10) -> int:
    """Window occupancy of a pair, counting the special-token reserve."""
    return tokenizer.count(pair.text_a) + tokenizer.count(pair.text_b) + reserve


def lexical_overlap_baseline(
    pairs: list[NLIInputPair],
    threshold: float = 0.5,
    model_tag: str = "lexical",
) -> list[PredictionRecord]:
    """Deterministic model-free stand-in.

    Score = fraction of the statement's unigram vocabulary present in the
    premise side (0 when the statement has no tokens); predicted Entailment
    at or above ``threshold``.
    """
    records = []
    for pair in pairs:
        statement_vocab = set(word_tokens(pair.text_b))
        if not statement_vocab:
            score = 0.0
        else:
            premise_vocab = set(word_tokens(pair.text_a))
            score = len(statement_vocab & premise_vocab) / len(statement_vocab)
        predicted = Label.ENTAILMENT if score >= threshold else Label.CONTRADICTION
        records.append(
            PredictionRecord(
                instance_id=pair.instance_id, predicted=predicted, score=score, model_tag=model_tag
            )
        )
    return records


def write_predictions(path: Path | str, records: list[PredictionRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_record()) + "\n")


def read_predictions(path: Path | str) -> list[PredictionRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(PredictionRecord.from_record(json.loads(line)))
    return records
