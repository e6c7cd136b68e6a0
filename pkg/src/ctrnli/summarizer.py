"""Abstractive summarizer contracts: configs, training pairs and ROUGE-1.

The neural runtime itself lives in :mod:`ctrnli.seq2seq`; this module holds
everything that does not need torch, so the model-free pipeline can import it
freely.
"""

from collections import Counter
from dataclasses import dataclass, field

from .corpus import ClinicalTrialReport, NLIInstance, filter_entailment, resolve_premises
from .tokenization import word_tokens

PROMPT_PREFIX = "summarize: "

EPOCH_GRID = (2, 5, 7, 10)


@dataclass(frozen=True)
class SummarizerConfig:
    """Generation-side settings for a seq2seq summarizer."""

    model_identifier: str
    prompt_prefix: str = PROMPT_PREFIX
    max_source_tokens: int = 2048
    max_summary_tokens: int = 300
    beam_width: int = 4

    def __post_init__(self):
        if self.max_summary_tokens >= self.max_source_tokens:
            raise ValueError("max_summary_tokens must be below max_source_tokens")

    def fingerprint(self) -> str:
        return (
            f"{self.model_identifier}|src={self.max_source_tokens}"
            f"|sum={self.max_summary_tokens}|beams={self.beam_width}"
        )


@dataclass(frozen=True)
class FineTuneConfig:
    """Supervised fine-tuning hyperparameters."""

    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    batch_size: int = 4
    epochs: tuple[int, ...] = field(default=EPOCH_GRID)
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0 or self.batch_size <= 0:
            raise ValueError("hyperparameters must be positive")
        if not self.epochs or any(e <= 0 for e in self.epochs):
            raise ValueError("epoch grid must be non-empty and positive")
        object.__setattr__(self, "epochs", tuple(sorted(self.epochs)))


@dataclass(frozen=True)
class SummaryTrainPair:
    """Prompted premise and the entailed statement acting as its summary."""

    source: str
    target: str


@dataclass(frozen=True)
class CheckpointScore:
    epoch: int
    rouge1_f: float


def rouge1(candidate: str, reference: str) -> tuple[float, float, float]:
    """Unigram precision/recall/F1 with clipped counts.

    Tokens are lowercased letter/digit runs; empty sides score 0 by
    convention.
    """
    cand = Counter(word_tokens(candidate))
    ref = Counter(word_tokens(reference))
    overlap = sum(min(count, ref[token]) for token, count in cand.items())
    n_cand = sum(cand.values())
    n_ref = sum(ref.values())
    precision = overlap / n_cand if n_cand else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def build_finetune_dataset(
    instances: list[NLIInstance],
    corpus: dict[str, ClinicalTrialReport],
    *,
    mode: str = "distinct",
    prompt_prefix: str = PROMPT_PREFIX,
) -> list[SummaryTrainPair]:
    """Training pairs from the Entailment-labeled subset.

    Each premise becomes a prompted source with the entailed statement as
    target.  In ``distinct`` mode a Comparison instance contributes one pair
    per premise (same target for both); in ``combined`` mode the premises are
    concatenated into a single source.
    """
    if mode not in ("distinct", "combined"):
        raise ValueError(f"mode must be 'distinct' or 'combined', got {mode!r}")
    pairs: list[SummaryTrainPair] = []
    for instance in filter_entailment(instances):
        primary, secondary = resolve_premises(instance, corpus)
        if secondary is None:
            pairs.append(SummaryTrainPair(prompt_prefix + primary, instance.statement))
        elif mode == "combined":
            pairs.append(
                SummaryTrainPair(prompt_prefix + primary + "\n" + secondary, instance.statement)
            )
        else:
            pairs.append(SummaryTrainPair(prompt_prefix + primary, instance.statement))
            pairs.append(SummaryTrainPair(prompt_prefix + secondary, instance.statement))
    return pairs
