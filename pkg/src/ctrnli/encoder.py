"""Cross-encoder classifier runtime (torch + transformers).

Mirrors :mod:`ctrnli.seq2seq`: ``tiny-encoder`` builds a small randomly
initialised encoder with a word-level vocabulary for hermetic CPU tests,
while any other identifier loads a pretrained sequence-classification
checkpoint.  The premise and statement are encoded jointly as
``[CLS] text_a [SEP] text_b [SEP]`` with a binary head whose positive class
is Entailment.
"""

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import Label
from .errors import EmptyTrainingSet, RuntimeUnavailable, UnlabeledInstance
from .metrics import macro_f1
from .nli import NLIInputPair, PredictionRecord
from .tokenization import WordVocab

log = logging.getLogger(__name__)

TINY_IDENTIFIER = "tiny-encoder"
_TINY_ARCH = {
    "hidden_size": 64,
    "num_hidden_layers": 2,
    "num_attention_heads": 4,
    "intermediate_size": 128,
    "max_position_embeddings": 600,
}


@dataclass(frozen=True)
class ClassifierConfig:
    """Cross-encoder fine-tuning hyperparameters."""

    model_identifier: str
    max_sequence_tokens: int = 512
    epochs: int = 40
    learning_rate: float = 5e-5
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.learning_rate <= 0 or self.batch_size <= 0:
            raise ValueError("hyperparameters must be positive")
        if self.max_sequence_tokens != 512:
            raise ValueError("max_sequence_tokens is fixed at 512")


def _import_torch():
    try:
        import torch
        return torch
    except ImportError as exc:
        raise RuntimeUnavailable("torch is required for the classifier runtime") from exc


def _build_tiny_model(vocab: WordVocab, seed: int):
    torch = _import_torch()
    try:
        from transformers import BertConfig, BertForSequenceClassification
    except ImportError as exc:
        raise RuntimeUnavailable("transformers is required for the classifier runtime") from exc
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab), num_labels=2, pad_token_id=WordVocab.PAD, **_TINY_ARCH
    )
    return BertForSequenceClassification(config)


class CrossEncoderClassifier:
    """Handle over a binary sequence classifier with joint pair encoding."""

    def __init__(self, model, config: ClassifierConfig, vocab: WordVocab | None = None, hf_tokenizer=None):
        self.model = model
        self.config = config
        self.vocab = vocab
        self._hf_tokenizer = hf_tokenizer
        model.eval()

    def _encode_pair(self, pair: NLIInputPair) -> tuple[list[int], list[int]]:
        a = self.vocab.encode(pair.text_a)
        b = self.vocab.encode(pair.text_b)
        ids = [WordVocab.CLS] + a + [WordVocab.SEP] + b + [WordVocab.SEP]
        types = [0] * (len(a) + 2) + [1] * (len(b) + 1)
        limit = self.config.max_sequence_tokens
        return ids[:limit], types[:limit]

    def predict_scores(self, pairs: list[NLIInputPair], batch_size: int = 32) -> list[float]:
        """Entailment probability per pair, deterministic in input order."""
        torch = _import_torch()
        self.model.eval()
        scores: list[float] = []
        with torch.no_grad():
            for start in range(0, len(pairs), batch_size):
                batch = pairs[start : start + batch_size]
                if self.vocab is not None:
                    encoded = [self._encode_pair(p) for p in batch]
                    max_len = max(len(ids) for ids, _ in encoded)
                    input_ids = torch.full((len(batch), max_len), WordVocab.PAD, dtype=torch.long)
                    token_types = torch.zeros(len(batch), max_len, dtype=torch.long)
                    attention = torch.zeros(len(batch), max_len, dtype=torch.long)
                    for row, (ids, types) in enumerate(encoded):
                        input_ids[row, : len(ids)] = torch.tensor(ids)
                        token_types[row, : len(types)] = torch.tensor(types)
                        attention[row, : len(ids)] = 1
                    logits = self.model(
                        input_ids=input_ids, token_type_ids=token_types, attention_mask=attention
                    ).logits
                else:
                    inputs = self._hf_tokenizer(
                        [p.text_a for p in batch],
                        [p.text_b for p in batch],
                        truncation="only_first",
                        max_length=self.config.max_sequence_tokens,
                        padding=True,
                        return_tensors="pt",
                    )
                    logits = self.model(**inputs).logits
                probs = torch.softmax(logits, dim=-1)
                scores.extend(float(p) for p in probs[:, 1])
        return scores

    def save(self, directory: Path) -> None:
        torch = _import_torch()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if self.vocab is None:
            self.model.save_pretrained(directory)
            self._hf_tokenizer.save_pretrained(directory)
            meta = {"kind": "pretrained"}
        else:
            torch.save(self.model.state_dict(), directory / "state.pt")
            self.vocab.save(directory / "vocab.json")
            meta = {"kind": "tiny"}
        meta["model_identifier"] = self.config.model_identifier
        (directory / "meta.json").write_text(json.dumps(meta), encoding="utf-8")


def load_classifier_checkpoint(directory: Path, config: ClassifierConfig) -> CrossEncoderClassifier:
    torch = _import_torch()
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    if meta["kind"] == "tiny":
        vocab = WordVocab.load(directory / "vocab.json")
        model = _build_tiny_model(vocab, seed=0)
        model.load_state_dict(torch.load(directory / "state.pt", weights_only=True))
        return CrossEncoderClassifier(model, config, vocab=vocab)
    try:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
    except ImportError as exc:
        raise RuntimeUnavailable("transformers is required for the classifier runtime") from exc
    return CrossEncoderClassifier(
        AutoModelForSequenceClassification.from_pretrained(directory),
        config,
        hf_tokenizer=AutoTokenizer.from_pretrained(directory),
    )


def _require_gold(pairs: list[NLIInputPair]) -> list[Label]:
    missing = [p.instance_id for p in pairs if p.gold is None]
    if missing:
        raise UnlabeledInstance(f"unlabeled pairs: {missing[:5]}")
    return [p.gold for p in pairs]


def finetune_classifier(
    config: ClassifierConfig,
    train_pairs: list[NLIInputPair],
    dev_pairs: list[NLIInputPair],
) -> tuple[CrossEncoderClassifier, list[float]]:
    """Cross-entropy fine-tuning; returns the best checkpoint by dev Macro F1.

    Scores the development set after every epoch; ties between epochs go to
    the earliest one.
    """
    torch = _import_torch()
    if not train_pairs:
        raise EmptyTrainingSet("no training pairs")
    if not dev_pairs:
        raise EmptyTrainingSet("no development pairs")
    train_golds = _require_gold(train_pairs)
    dev_golds = _require_gold(dev_pairs)

    if config.model_identifier == TINY_IDENTIFIER:
        texts = [p.text_a for p in train_pairs] + [p.text_b for p in train_pairs]
        vocab = WordVocab.build(texts)
        classifier = CrossEncoderClassifier(_build_tiny_model(vocab, config.seed), config, vocab=vocab)
    else:
        try:
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:
            raise RuntimeUnavailable("transformers is required for the classifier runtime") from exc
        try:
            torch.manual_seed(config.seed)
            model = AutoModelForSequenceClassification.from_pretrained(
                config.model_identifier, num_labels=2, ignore_mismatched_sizes=True
            )
            tokenizer = AutoTokenizer.from_pretrained(config.model_identifier)
        except Exception as exc:
            raise RuntimeUnavailable(
                f"could not load classifier {config.model_identifier!r}: {exc}"
            ) from exc
        classifier = CrossEncoderClassifier(model, config, hf_tokenizer=tokenizer)

    model = classifier.model
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    rng = random.Random(config.seed)
    labels_tensor = torch.tensor([g.numeric for g in train_golds])

    def train_batches():
        order = list(range(len(train_pairs)))
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            yield order[start : start + config.batch_size]

    dev_f1_by_epoch: list[float] = []
    best_state = None
    best_f1 = -1.0
    for epoch in range(1, config.epochs + 1):
        model.train()
        for batch in train_batches():
            batch_pairs = [train_pairs[i] for i in batch]
            if classifier.vocab is not None:
                encoded = [classifier._encode_pair(p) for p in batch_pairs]
                max_len = max(len(ids) for ids, _ in encoded)
                input_ids = torch.full((len(batch), max_len), WordVocab.PAD, dtype=torch.long)
                token_types = torch.zeros(len(batch), max_len, dtype=torch.long)
                attention = torch.zeros(len(batch), max_len, dtype=torch.long)
                for row, (ids, types) in enumerate(encoded):
                    input_ids[row, : len(ids)] = torch.tensor(ids)
                    token_types[row, : len(types)] = torch.tensor(types)
                    attention[row, : len(ids)] = 1
                out = model(
                    input_ids=input_ids,
                    token_type_ids=token_types,
                    attention_mask=attention,
                    labels=labels_tensor[batch],
                )
            else:
                inputs = classifier._hf_tokenizer(
                    [p.text_a for p in batch_pairs],
                    [p.text_b for p in batch_pairs],
                    truncation="only_first",
                    max_length=config.max_sequence_tokens,
                    padding=True,
                    return_tensors="pt",
                )
                out = model(**inputs, labels=labels_tensor[batch])
            optimizer.zero_grad()
            out.loss.backward()
            optimizer.step()

        dev_preds = [
            Label.from_numeric(1 if s >= 0.5 else 0) for s in classifier.predict_scores(dev_pairs)
        ]
        f1, _, _ = macro_f1(dev_golds, dev_preds)
        dev_f1_by_epoch.append(f1)
        log.info("classifier epoch %d: dev macro_f1=%.4f", epoch, f1)
        if f1 > best_f1:
            best_f1 = f1
            best_state = {k: v.clone() for k, v in model.state_dict().items()}

    model.load_state_dict(best_state)
    model.eval()
    return classifier, dev_f1_by_epoch


def predict(
    classifier: CrossEncoderClassifier,
    pairs: list[NLIInputPair],
    model_tag: str,
) -> list[PredictionRecord]:
    """One record per pair, order preserved."""
    return [
        PredictionRecord.from_score(pair.instance_id, score, model_tag)
        for pair, score in zip(pairs, classifier.predict_scores(pairs))
    ]
