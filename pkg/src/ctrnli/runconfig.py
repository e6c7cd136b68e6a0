"""Declarative run configuration and the per-run artifact manifest.

A run is described by one TOML file; its canonical-JSON hash is stamped into
every artifact so outputs are traceable to the exact configuration.  Relative
paths are resolved against the config file's directory.
"""

import datetime
import hashlib
import json
import os
import platform
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .encoder import ClassifierConfig
from .errors import ConfigError
from .shortening import ShorteningStrategy, StrategyKind
from .summarizer import EPOCH_GRID, FineTuneConfig, SummarizerConfig

SPLITS = ("train", "dev", "test")

CACHE_DIR_ENV = "CTRNLI_CACHE_DIR"


def config_hash(raw: dict) -> str:
    """SHA-256 of the canonical JSON form; invariant to key order."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunConfig:
    seed: int
    corpus_dir: Path
    instance_files: dict[str, Path]
    output_dir: Path
    strategy: ShorteningStrategy
    summarizer: SummarizerConfig
    summarizer_finetune: FineTuneConfig
    classifier: ClassifierConfig
    raw: dict = field(repr=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    @property
    def cache_dir(self) -> Path:
        override = os.environ.get(CACHE_DIR_ENV)
        return Path(override) if override else self.output_dir / "cache"

    def validate_paths(self) -> list[str]:
        """Human-readable problems with referenced paths (empty if none)."""
        problems = []
        if not self.corpus_dir.is_dir():
            problems.append(f"corpus directory not found: {self.corpus_dir}")
        for split, path in self.instance_files.items():
            if not path.is_file():
                problems.append(f"{split} instance file not found: {path}")
        return problems


def _get(section: dict, key: str, default=None, required: bool = False):
    if key in section:
        return section[key]
    if required:
        raise ConfigError(f"missing config key {key!r}")
    return default


def load_run_config(path: Path | str, *, seed_override: int | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else (base / candidate).resolve()

    seed = seed_override if seed_override is not None else int(_get(raw, "seed", 0))

    paths = _get(raw, "paths", required=True) or {}
    corpus_dir = resolve(_get(paths, "corpus_dir", required=True))
    output_dir = resolve(_get(paths, "output_dir", required=True))
    instances_raw = _get(paths, "instances", required=True) or {}
    instance_files = {}
    for split, p in instances_raw.items():
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r} (expected one of {SPLITS})")
        instance_files[split] = resolve(p)

    summarizer_section = _get(raw, "summarizer", {}) or {}
    try:
        summarizer = SummarizerConfig(
            model_identifier=_get(summarizer_section, "model", "tiny-seq2seq"),
            max_source_tokens=int(_get(summarizer_section, "max_source_tokens", 2048)),
            max_summary_tokens=int(_get(summarizer_section, "max_summary_tokens", 300)),
            beam_width=int(_get(summarizer_section, "beam_width", 4)),
        )
        finetune_section = _get(summarizer_section, "finetune", {}) or {}
        summarizer_finetune = FineTuneConfig(
            learning_rate=float(_get(finetune_section, "learning_rate", 2e-5)),
            weight_decay=float(_get(finetune_section, "weight_decay", 0.01)),
            batch_size=int(_get(finetune_section, "batch_size", 4)),
            epochs=tuple(_get(finetune_section, "epochs", list(EPOCH_GRID))),
            seed=seed,
        )

        classifier_section = _get(raw, "classifier", {}) or {}
        classifier = ClassifierConfig(
            model_identifier=_get(classifier_section, "model", "tiny-encoder"),
            epochs=int(_get(classifier_section, "epochs", 40)),
            learning_rate=float(_get(classifier_section, "learning_rate", 5e-5)),
            batch_size=int(_get(classifier_section, "batch_size", 16)),
            seed=seed,
        )

        strategy_section = _get(raw, "strategy", {}) or {}
        strategy = build_strategy(
            _get(strategy_section, "name", "truncate"),
            word_limit=int(_get(strategy_section, "word_limit", 300)),
            classifier_identifier=classifier.model_identifier,
            summarizer=summarizer,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid config value in {path}: {exc}") from exc

    return RunConfig(
        seed=seed,
        corpus_dir=corpus_dir,
        instance_files=instance_files,
        output_dir=output_dir,
        strategy=strategy,
        summarizer=summarizer,
        summarizer_finetune=summarizer_finetune,
        classifier=classifier,
        raw=raw,
    )


def build_strategy(
    name: str,
    *,
    word_limit: int = 300,
    classifier_identifier: str = "tiny-encoder",
    summarizer: SummarizerConfig | None = None,
) -> ShorteningStrategy:
    kind = StrategyKind.parse(name)
    tokenizer_name = (
        "whitespace" if classifier_identifier.startswith("tiny") else f"hf:{classifier_identifier}"
    )
    model_fingerprint = summarizer.fingerprint() if summarizer is not None else ""
    return ShorteningStrategy(
        kind=kind,
        tokenizer_name=tokenizer_name,
        word_limit=word_limit,
        model_fingerprint=model_fingerprint,
    )


class RunManifest:
    """Ledger of every artifact a run has produced, keyed by role."""

    def __init__(self, path: Path, data: dict):
        self.path = path
        self.data = data

    @classmethod
    def load_or_create(cls, output_dir: Path, cfg_hash: str) -> "RunManifest":
        path = Path(output_dir) / "manifest.json"
        if path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            if data.get("config_hash") != cfg_hash:
                data = cls._fresh(cfg_hash)
        else:
            data = cls._fresh(cfg_hash)
        return cls(path, data)

    @staticmethod
    def _fresh(cfg_hash: str) -> dict:
        return {
            "config_hash": cfg_hash,
            "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "updated_at": None,
            "artifacts": {},
            "versions": {
                "python": platform.python_version(),
                "ctrnli": _package_version(),
            },
        }

    def record(self, name: str, artifact_path: Path) -> None:
        self.data["artifacts"][name] = str(artifact_path)
        self.data["updated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _package_version() -> str:
    try:
        return metadata.version("ctrnli")
    except metadata.PackageNotFoundError:
        return "unknown"
