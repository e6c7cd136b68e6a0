"""Seq2seq summarizer runtime (torch + transformers).

Two backends hide behind one handle: the ``tiny-seq2seq`` identifier builds a
small randomly initialised encoder-decoder over a word-level vocabulary
(hermetic, CPU-friendly), while any other identifier is resolved as a
pretrained checkpoint.  Decoding is deterministic beam search so caches and
tests are stable.
"""

import copy
import json
import logging
import random
from pathlib import Path

from .errors import EmptyTrainingSet, RuntimeUnavailable
from .summarizer import CheckpointScore, FineTuneConfig, SummarizerConfig, rouge1
from .tokenization import WordVocab

log = logging.getLogger(__name__)

TINY_IDENTIFIER = "tiny-seq2seq"
_TINY_ARCH = {"d_model": 64, "d_kv": 16, "d_ff": 128, "num_layers": 2, "num_heads": 4}


def _import_torch():
    try:
        import torch
        return torch
    except ImportError as exc:
        raise RuntimeUnavailable("torch is required for the seq2seq runtime") from exc


def _build_tiny_model(vocab: WordVocab, seed: int):
    torch = _import_torch()
    try:
        from transformers import T5Config, T5ForConditionalGeneration
    except ImportError as exc:
        raise RuntimeUnavailable("transformers is required for the seq2seq runtime") from exc
    torch.manual_seed(seed)
    config = T5Config(
        vocab_size=len(vocab),
        pad_token_id=WordVocab.PAD,
        eos_token_id=WordVocab.EOS,
        decoder_start_token_id=WordVocab.PAD,
        **_TINY_ARCH,
    )
    return T5ForConditionalGeneration(config)


class Seq2SeqSummarizer:
    """Handle over a seq2seq model with text-in/text-out summarization."""

    def __init__(self, model, config: SummarizerConfig, vocab: WordVocab | None = None, hf_tokenizer=None):
        self.model = model
        self.config = config
        self.vocab = vocab
        self._hf_tokenizer = hf_tokenizer
        self.generation_calls = 0
        model.eval()

    # -- text codecs -------------------------------------------------------
    def encode(self, text: str) -> list[int]:
        if self.vocab is not None:
            return self.vocab.encode(text) + [WordVocab.EOS]
        return self._hf_tokenizer.encode(text)

    def decode(self, ids: list[int]) -> str:
        if self.vocab is not None:
            return self.vocab.decode(ids)
        return self._hf_tokenizer.decode(ids, skip_special_tokens=True)

    # -- generation --------------------------------------------------------
    def summarize(self, premise: str) -> str:
        """Prefix, encode (truncated to the source cap) and beam-decode."""
        return self.summarize_source(self.config.prompt_prefix + premise)

    def summarize_source(self, source: str) -> str:
        torch = _import_torch()
        ids = self.encode(source)[: self.config.max_source_tokens]
        self.generation_calls += 1
        with torch.no_grad():
            out = self.model.generate(
                input_ids=torch.tensor([ids]),
                attention_mask=torch.ones(1, len(ids), dtype=torch.long),
                max_new_tokens=self.config.max_summary_tokens,
                num_beams=self.config.beam_width,
                do_sample=False,
            )
        return self.decode(out[0].tolist())

    # -- persistence -------------------------------------------------------
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


def load_summarizer(
    config: SummarizerConfig, *, vocab_texts: list[str] | None = None, seed: int = 0
) -> Seq2SeqSummarizer:
    """Resolve ``config.model_identifier`` into a ready-to-generate handle.

    For the tiny backend ``vocab_texts`` fixes the word-level vocabulary (and
    therefore the architecture), so zero-shot generation is available before
    any fine-tuning.
    """
    if config.model_identifier == TINY_IDENTIFIER:
        if vocab_texts is None:
            raise ValueError("tiny-seq2seq needs vocab_texts to build its vocabulary")
        vocab = WordVocab.build(vocab_texts)
        return Seq2SeqSummarizer(_build_tiny_model(vocab, seed), config, vocab=vocab)
    try:
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
    except ImportError as exc:
        raise RuntimeUnavailable("transformers is required for the seq2seq runtime") from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(config.model_identifier)
        model = AutoModelForSeq2SeqLM.from_pretrained(config.model_identifier)
    except Exception as exc:
        raise RuntimeUnavailable(
            f"could not load seq2seq model {config.model_identifier!r}: {exc}"
        ) from exc
    return Seq2SeqSummarizer(model, config, hf_tokenizer=tokenizer)


def load_checkpoint(directory: Path, config: SummarizerConfig) -> Seq2SeqSummarizer:
    torch = _import_torch()
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    if meta["kind"] == "tiny":
        vocab = WordVocab.load(directory / "vocab.json")
        model = _build_tiny_model(vocab, seed=0)
        model.load_state_dict(torch.load(directory / "state.pt", weights_only=True))
        return Seq2SeqSummarizer(model, config, vocab=vocab)
    try:
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
    except ImportError as exc:
        raise RuntimeUnavailable("transformers is required for the seq2seq runtime") from exc
    return Seq2SeqSummarizer(
        AutoModelForSeq2SeqLM.from_pretrained(directory),
        config,
        hf_tokenizer=AutoTokenizer.from_pretrained(directory),
    )


def evaluate_rouge(summarizer: Seq2SeqSummarizer, dev_pairs) -> float:
    """Mean ROUGE-1 F1 of generated summaries against pair targets."""
    if not dev_pairs:
        raise EmptyTrainingSet("no development pairs to score")
    scores = [rouge1(summarizer.summarize_source(p.source), p.target)[2] for p in dev_pairs]
    return sum(scores) / len(scores)


def _batches(n: int, batch_size: int, rng: random.Random):
    order = list(range(n))
    rng.shuffle(order)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def finetune(
    config: FineTuneConfig,
    pairs,
    dev_pairs,
    summarizer_config: SummarizerConfig,
    *,
    checkpoint_dir: Path | None = None,
) -> tuple[Seq2SeqSummarizer, list[CheckpointScore]]:
    """Supervised fine-tuning over the epoch grid.

    Trains continuously up to the largest grid epoch, scoring dev ROUGE-1 and
    snapshotting at every grid point; the returned handle carries the weights
    of the best-scoring epoch (ties go to fewer epochs).  With
    ``checkpoint_dir`` set, each grid snapshot lands in ``epoch-<k>/``.
    """
    torch = _import_torch()
    if not pairs:
        raise EmptyTrainingSet("no training pairs")
    if not dev_pairs:
        raise EmptyTrainingSet("no development pairs")

    if summarizer_config.model_identifier == TINY_IDENTIFIER:
        texts = [p.source for p in pairs] + [p.target for p in pairs]
        summarizer = load_summarizer(summarizer_config, vocab_texts=texts, seed=config.seed)
    else:
        summarizer = load_summarizer(summarizer_config, seed=config.seed)
    model = summarizer.model

    encoded = [(summarizer.encode(p.source)[: summarizer_config.max_source_tokens],
                summarizer.encode(p.target)) for p in pairs]
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    rng = random.Random(config.seed)
    grid = set(config.epochs)
    scores: list[CheckpointScore] = []
    best_state = None
    best: CheckpointScore | None = None

    for epoch in range(1, max(grid) + 1):
        model.train()
        for batch in _batches(len(encoded), config.batch_size, rng):
            sources = [encoded[i][0] for i in batch]
            targets = [encoded[i][1] for i in batch]
            max_src = max(len(s) for s in sources)
            max_tgt = max(len(t) for t in targets)
            input_ids = torch.full((len(batch), max_src), WordVocab.PAD, dtype=torch.long)
            attention = torch.zeros(len(batch), max_src, dtype=torch.long)
            labels = torch.full((len(batch), max_tgt), -100, dtype=torch.long)
            for row, (src, tgt) in enumerate(zip(sources, targets)):
                input_ids[row, : len(src)] = torch.tensor(src)
                attention[row, : len(src)] = 1
                labels[row, : len(tgt)] = torch.tensor(tgt)
            loss = model(input_ids=input_ids, attention_mask=attention, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

        if epoch in grid:
            model.eval()
            score = CheckpointScore(epoch=epoch, rouge1_f=evaluate_rouge(summarizer, dev_pairs))
            scores.append(score)
            log.info("summarizer epoch %d: dev rouge1_f=%.4f", epoch, score.rouge1_f)
            if checkpoint_dir is not None:
                summarizer.save(Path(checkpoint_dir) / f"epoch-{epoch}")
            if best is None or score.rouge1_f > best.rouge1_f:
                best = score
                best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    return summarizer, scores
