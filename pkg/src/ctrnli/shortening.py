"""Premise shortening strategies and the persistent summary cache.

Every instance's premise(s) are reduced by one of four strategies before
classification: prefix truncation under the classifier token budget,
TF-IDF extractive summarization, or abstractive summarization of the
premises either combined or one by one.  Outputs are plain text plus token
accounting, cached per (instance, strategy fingerprint) as JSONL.
"""

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .corpus import ClinicalTrialReport, InstanceType, NLIInstance, resolve_premises
from .errors import CacheCorruption, StatementTooLong
from .tfidf import TfidfModel, extractive_summarize
from .tokenization import SubwordTokenizer, WhitespaceTokenizer

log = logging.getLogger(__name__)

MODEL_MAX_TOKENS = 512
RESERVE_TOKENS = 10


class StrategyKind(enum.Enum):
    TRUNCATE = "truncate"
    EXTRACTIVE_TFIDF = "extractive-tfidf"
    ABSTRACTIVE_COMBINED = "abstractive-combined"
    ABSTRACTIVE_DISTINCT = "abstractive-distinct"

    @classmethod
    def parse(cls, raw: str) -> "StrategyKind":
        for member in cls:
            if raw.strip().lower() == member.value:
                return member
        raise ValueError(f"unknown strategy {raw!r}")


@dataclass(frozen=True)
class ShorteningStrategy:
    """A strategy plus every parameter that determines its output.

    ``fingerprint()`` must change whenever any output-relevant parameter
    changes; it keys the summary cache.
    """

    kind: StrategyKind
    model_max: int = MODEL_MAX_TOKENS
    reserve: int = RESERVE_TOKENS
    tokenizer_name: str = "whitespace"
    word_limit: int = 300
    model_fingerprint: str = ""

    def fingerprint(self) -> str:
        if self.kind is StrategyKind.TRUNCATE:
            return f"truncate(max={self.model_max},reserve={self.reserve},tok={self.tokenizer_name})"
        if self.kind is StrategyKind.EXTRACTIVE_TFIDF:
            return f"extractive-tfidf(words={self.word_limit},fit=train)"
        return f"{self.kind.value}(model={self.model_fingerprint})"


@dataclass(frozen=True)
class TokenBudget:
    """Premise-side token allowance for one statement."""

    statement_tokens: int
    budget_x: int
    model_max: int = MODEL_MAX_TOKENS
    reserve: int = RESERVE_TOKENS


@dataclass(frozen=True)
class ShortenedPremise:
    instance_id: str
    fingerprint: str
    primary_short: str
    secondary_short: str | None
    token_counts: dict[str, int]

    def to_record(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "fingerprint": self.fingerprint,
            "primary_short": self.primary_short,
            "secondary_short": self.secondary_short,
            "token_counts": self.token_counts,
        }

    @classmethod
    def from_record(cls, record: dict) -> "ShortenedPremise":
        return cls(
            instance_id=record["instance_id"],
            fingerprint=record["fingerprint"],
            primary_short=record["primary_short"],
            secondary_short=record["secondary_short"],
            token_counts=record["token_counts"],
        )


def compute_budget(
    statement: str,
    tokenizer: SubwordTokenizer,
    *,
    model_max: int = MODEL_MAX_TOKENS,
    reserve: int = RESERVE_TOKENS,
) -> TokenBudget:
    """Premise budget = model_max - statement tokens - reserve (must be > 0)."""
    statement_tokens = tokenizer.count(statement)
    budget_x = model_max - statement_tokens - reserve
    if budget_x <= 0:
        raise StatementTooLong(
            f"statement of {statement_tokens} tokens leaves no premise budget "
            f"(window {model_max}, reserve {reserve})"
        )
    return TokenBudget(
        statement_tokens=statement_tokens, budget_x=budget_x, model_max=model_max, reserve=reserve
    )


def truncate_premises(
    instance: NLIInstance,
    corpus: dict[str, ClinicalTrialReport],
    tokenizer: SubwordTokenizer,
    strategy: ShorteningStrategy | None = None,
) -> ShortenedPremise:
    """Keep a token prefix of each premise under the statement's budget.

    Single instances get the whole budget; Comparison instances get
    floor(budget / 2) per premise.
    """
    strategy = strategy or ShorteningStrategy(StrategyKind.TRUNCATE, tokenizer_name=tokenizer.name)
    budget = compute_budget(
        instance.statement, tokenizer, model_max=strategy.model_max, reserve=strategy.reserve
    )
    primary, secondary = resolve_premises(instance, corpus)
    if instance.instance_type is InstanceType.COMPARISON:
        per_part = budget.budget_x // 2
        primary_short = tokenizer.truncate(primary, per_part)
        secondary_short = tokenizer.truncate(secondary, per_part)
    else:
        primary_short = tokenizer.truncate(primary, budget.budget_x)
        secondary_short = None
    return _build(instance, strategy, primary_short, secondary_short, tokenizer)


def _build(
    instance: NLIInstance,
    strategy: ShorteningStrategy,
    primary_short: str,
    secondary_short: str | None,
    tokenizer: SubwordTokenizer,
) -> ShortenedPremise:
    counts = {"primary": tokenizer.count(primary_short)}
    if secondary_short is not None:
        counts["secondary"] = tokenizer.count(secondary_short)
    return ShortenedPremise(
        instance_id=instance.instance_id,
        fingerprint=strategy.fingerprint(),
        primary_short=primary_short,
        secondary_short=secondary_short,
        token_counts=counts,
    )


def shorten(
    instance: NLIInstance,
    corpus: dict[str, ClinicalTrialReport],
    strategy: ShorteningStrategy,
    *,
    tokenizer: SubwordTokenizer | None = None,
    tfidf_model: TfidfModel | None = None,
    summarizer=None,
    cache: "SummaryCache | None" = None,
) -> ShortenedPremise:
    """Dispatch to the strategy, consulting/filling ``cache`` when given.

    ``summarizer`` is any object with a ``summarize(text) -> str`` method; it
    is only required for the abstractive strategies, ``tfidf_model`` only for
    the extractive one.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    if cache is not None:
        cached = cache.get(instance.instance_id)
        if cached is not None:
            return cached

    if strategy.kind is StrategyKind.TRUNCATE:
        result = truncate_premises(instance, corpus, tokenizer, strategy)
    elif strategy.kind is StrategyKind.EXTRACTIVE_TFIDF:
        if tfidf_model is None:
            raise ValueError("extractive strategy requires a fitted TfidfModel")
        primary, secondary = resolve_premises(instance, corpus)
        primary_short = extractive_summarize(primary, tfidf_model, strategy.word_limit)
        secondary_short = (
            extractive_summarize(secondary, tfidf_model, strategy.word_limit)
            if secondary is not None
            else None
        )
        result = _build(instance, strategy, primary_short, secondary_short, tokenizer)
    else:
        if summarizer is None:
            raise ValueError("abstractive strategies require a summarizer handle")
        primary, secondary = resolve_premises(instance, corpus)
        if strategy.kind is StrategyKind.ABSTRACTIVE_COMBINED:
            joint = primary if secondary is None else primary + "\n" + secondary
            result = _build(instance, strategy, summarizer.summarize(joint), None, tokenizer)
        else:
            primary_short = summarizer.summarize(primary)
            secondary_short = summarizer.summarize(secondary) if secondary is not None else None
            result = _build(instance, strategy, primary_short, secondary_short, tokenizer)

    if cache is not None:
        cache.put(result)
    return result


class SummaryCache:
    """Append-only JSONL cache bound to one strategy fingerprint.

    Single-writer, many-reader: concurrent writers must be serialized by the
    orchestrator.  ``hits``/``misses`` counters expose idempotence to tests.
    """

    def __init__(self, path: Path | str, fingerprint: str):
        self.path = Path(path)
        self.fingerprint = fingerprint
        self.hits = 0
        self.misses = 0
        self._entries: dict[str, ShortenedPremise] = {}
        if self.path.exists():
            for line_no, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    record = ShortenedPremise.from_record(json.loads(line))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise CacheCorruption(f"{self.path}:{line_no}: unreadable record ({exc})")
                if record.fingerprint != fingerprint:
                    raise CacheCorruption(
                        f"{self.path}:{line_no}: fingerprint {record.fingerprint!r} does not "
                        f"match cache fingerprint {fingerprint!r}"
                    )
                self._entries[record.instance_id] = record

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, instance_id: str) -> ShortenedPremise | None:
        found = self._entries.get(instance_id)
        if found is None:
            self.misses += 1
        else:
            self.hits += 1
        return found

    def put(self, record: ShortenedPremise) -> None:
        if record.fingerprint != self.fingerprint:
            raise CacheCorruption(
                f"refusing to store fingerprint {record.fingerprint!r} in cache "
                f"{self.fingerprint!r}"
            )
        self._entries[record.instance_id] = record
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_record()) + "\n")
