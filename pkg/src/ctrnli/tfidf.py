"""TF-IDF sentence scoring for extractive premise summarization.

The vectorizer is fit on training-split texts only and then reused unchanged
on every split.  Sentences are scored by the mean tf-idf weight of their
in-vocabulary token occurrences; the summary greedily keeps the best-scoring
sentences (ties to the earlier one) under a total word budget and emits them
in document order.
"""

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus
from .tokenization import word_tokens

# Sentence boundaries: terminal punctuation followed by whitespace, plus
# newlines (section lines are list items, so the line break is authoritative).
_BOUNDARY_RE = re.compile(r"(?<=[.!?])\s+|\n+")


def split_sentences(text: str) -> list[str]:
    return [s for s in (p.strip() for p in _BOUNDARY_RE.split(text)) if s]


@dataclass(frozen=True)
class TfidfModel:
    """Vocabulary and smoothed inverse document frequencies, train-split only."""

    vocabulary: dict[str, int]
    idf: dict[str, float]
    fitted_on: str = field(default="train")

    def save(self, path: Path) -> None:
        path.write_text(
            json.dumps(
                {"fitted_on": self.fitted_on, "vocabulary": self.vocabulary, "idf": self.idf},
                sort_keys=True,
            ),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: Path) -> "TfidfModel":
        doc = json.loads(path.read_text(encoding="utf-8"))
        return cls(vocabulary=doc["vocabulary"], idf=doc["idf"], fitted_on=doc["fitted_on"])


def fit_tfidf(train_corpus_texts: list[str]) -> TfidfModel:
    """Fit document frequencies on the training texts.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the N training documents,
    with lowercased letter/digit runs as terms.
    """
    if not train_corpus_texts:
        raise EmptyCorpus("cannot fit tf-idf on an empty training corpus")
    n_docs = len(train_corpus_texts)
    df: Counter[str] = Counter()
    for text in train_corpus_texts:
        df.update(set(word_tokens(text)))
    vocabulary = {term: i for i, term in enumerate(sorted(df))}
    idf = {term: math.log((1 + n_docs) / (1 + df[term])) + 1.0 for term in vocabulary}
    return TfidfModel(vocabulary=vocabulary, idf=idf)


def sentence_score(sentence: str, model: TfidfModel) -> float:
    """Mean idf weight per in-vocabulary token occurrence (0 if none)."""
    weights = [model.idf[t] for t in word_tokens(sentence) if t in model.idf]
    if not weights:
        return 0.0
    return sum(weights) / len(weights)


def extractive_summarize(document: str, model: TfidfModel, word_limit: int = 300) -> str:
    """Verbatim-sentence summary under a total word budget.

    Sentences are ranked by :func:`sentence_score` descending (earlier
    position wins ties) and greedily kept while the running whitespace word
    count stays within ``word_limit``; the kept sentences are emitted in their
    original order, space-joined.
    """
    sentences = split_sentences(document)
    if not sentences:
        return ""
    ranked = sorted(range(len(sentences)), key=lambda i: (-sentence_score(sentences[i], model), i))
    selected: set[int] = set()
    total_words = 0
    for i in ranked:
        n_words = len(sentences[i].split())
        if total_words + n_words > word_limit:
            continue
        selected.add(i)
        total_words += n_words
    return " ".join(sentences[i] for i in sorted(selected))
