import json
from pathlib import Path

import pytest


def make_trial(trial_id, *, eligibility=(), intervention=(), results=(), adverse_events=()):
    return {
        "trial_id": trial_id,
        "eligibility": list(eligibility),
        "intervention": list(intervention),
        "results": list(results),
        "adverse_events": list(adverse_events),
    }


def write_trial(directory: Path, doc: dict, filename: str | None = None) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / (filename or f"{doc['trial_id']}.json")
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def make_instance(
    *,
    type="Single",
    section="results",
    primary="NCT001",
    secondary=None,
    statement="a statement",
    label="Entailment",
    contrast=None,
):
    return {
        "type": type,
        "section": section,
        "primary": primary,
        "secondary": secondary,
        "statement": statement,
        "label": label,
        "contrast": contrast,
    }


def write_instances(path: Path, instances: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(instances), encoding="utf-8")
    return path


@pytest.fixture
def corpus_dir(tmp_path):
    directory = tmp_path / "trials"
    write_trial(directory, make_trial("NCT001", results=["alpha beta.", "gamma delta."]))
    write_trial(
        directory,
        make_trial(
            "NCT002",
            results=["third trial results line."],
            eligibility=["adults over eighteen."],
        ),
    )
    return directory


@pytest.fixture
def loaded_corpus(corpus_dir):
    from ctrnli.corpus import load_corpus

    return load_corpus(corpus_dir)
