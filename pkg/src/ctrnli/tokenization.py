"""Tokenizer handles and vocabularies.

Three distinct tokenizations coexist in the pipeline and are deliberately kept
apart:

* ``word_tokens`` — lowercased runs of letters/digits; used for TF-IDF,
  ROUGE-1 and the lexical overlap baseline.
* :class:`WhitespaceTokenizer` / :class:`HFTokenizer` — the classifier-side
  subword tokenizer used for token budgets and truncation.
* :class:`WordVocab` — an id mapping for the built-from-scratch tiny neural
  models (one whitespace word per id).
"""

import json
import re
from pathlib import Path
from typing import Protocol, runtime_checkable

from .errors import RuntimeUnavailable

_WORD_RE = re.compile(r"[a-z0-9]+")


def word_tokens(text: str) -> list[str]:
    """Lowercased maximal runs of ASCII letters/digits."""
    return _WORD_RE.findall(text.lower())


@runtime_checkable
class SubwordTokenizer(Protocol):
    """Minimal surface the budget/truncation code needs from a tokenizer."""

    name: str

    def count(self, text: str) -> int:
        ...

    def truncate(self, text: str, max_tokens: int) -> str:
        ...


class WhitespaceTokenizer:
    """One token per whitespace-separated word.

    This is the canonical tokenizer for the model-free path: the tiny neural
    runtimes map one word to one id, so budgets computed here are token-exact
    for them as well.
    """

    name = "whitespace"

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def count(self, text: str) -> int:
        return len(text.split())

    def truncate(self, text: str, max_tokens: int) -> str:
        tokens = text.split()
        if len(tokens) <= max_tokens:
            return text
        return " ".join(tokens[:max_tokens])


class HFTokenizer:
    """Adapter over a Hugging Face tokenizer for pretrained checkpoints."""

    def __init__(self, inner, name: str):
        self._inner = inner
        self.name = f"hf:{name}"

    @classmethod
    def from_pretrained(cls, identifier: str) -> "HFTokenizer":
        try:
            from transformers import AutoTokenizer
        except ImportError as exc:
            raise RuntimeUnavailable(f"transformers is required for tokenizer '{identifier}'") from exc
        try:
            inner = AutoTokenizer.from_pretrained(identifier)
        except Exception as exc:
            raise RuntimeUnavailable(f"could not load tokenizer '{identifier}': {exc}") from exc
        return cls(inner, identifier)

    def _ids(self, text: str) -> list[int]:
        return self._inner.encode(text, add_special_tokens=False)

    def count(self, text: str) -> int:
        return len(self._ids(text))

    def truncate(self, text: str, max_tokens: int) -> str:
        ids = self._ids(text)
        if len(ids) <= max_tokens:
            return text
        return self._inner.decode(ids[:max_tokens], skip_special_tokens=True)


class WordVocab:
    """Deterministic word-level vocabulary for the tiny neural runtimes.

    Ids 0..4 are reserved for specials; the remaining ids are assigned to the
    sorted set of lowercased whitespace words seen in the fitting texts, so
    the same texts always produce the same mapping.
    """

    PAD = 0
    UNK = 1
    EOS = 2
    CLS = 3
    SEP = 4
    _SPECIALS = ("<pad>", "<unk>", "</s>", "<cls>", "<sep>")

    def __init__(self, words: list[str]):
        self._words = list(words)
        self._index = {w: i + len(self._SPECIALS) for i, w in enumerate(self._words)}

    @classmethod
    def build(cls, texts: list[str]) -> "WordVocab":
        seen = set()
        for text in texts:
            seen.update(text.lower().split())
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self._words) + len(self._SPECIALS)

    def encode(self, text: str) -> list[int]:
        return [self._index.get(w, self.UNK) for w in text.lower().split()]

    def decode(self, ids: list[int]) -> str:
        base = len(self._SPECIALS)
        return " ".join(self._words[i - base] for i in ids if i >= base)

    def save(self, path: Path) -> None:
        path.write_text(json.dumps({"words": self._words}), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "WordVocab":
        return cls(json.loads(path.read_text(encoding="utf-8"))["words"])


def resolve_tokenizer(identifier: str) -> SubwordTokenizer:
    """Map a model identifier to its budget tokenizer.

    Built-from-scratch models (``tiny-...``) and the lexical baseline use the
    whitespace tokenizer; anything else is treated as a Hugging Face id.
    """
    if identifier.startswith("tiny") or identifier in ("whitespace", "lexical"):
        return WhitespaceTokenizer()
    return HFTokenizer.from_pretrained(identifier)
