"""Clinical-trial corpus: domain types, loading, validation and indexing.

A corpus is a directory of one JSON document per trial; task instances live
in a separate JSON file per split and reference trials by id.  The canonical
layouts are::

    <trial_id>.json   {"trial_id": str, "eligibility": [str], "intervention": [str],
                       "results": [str], "adverse_events": [str]}

    instances.json    {instance_id: {"type": "Single"|"Comparison", "section": str,
                       "primary": trial_id, "secondary": trial_id|null,
                       "statement": str, "label": str|null,
                       "contrast": {"original_id": str, "intervention": str}|null}}

An ingestion adapter additionally accepts the externally released layout
(capitalised keys such as "Clinical Trial ID" / "Section_id"); everything is
normalised to the canonical form on load.
"""

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    ContrastLabelMismatch,
    DanglingContrastRef,
    DanglingTrialRef,
    DataError,
    DuplicateTrialId,
    MalformedDocument,
    MissingSection,
    TypeFieldMismatch,
    UnlabeledInstance,
    ValidationFailure,
)

log = logging.getLogger(__name__)


class SectionId(enum.Enum):
    ELIGIBILITY = "eligibility"
    INTERVENTION = "intervention"
    RESULTS = "results"
    ADVERSE_EVENTS = "adverse_events"

    @classmethod
    def parse(cls, raw: str) -> "SectionId":
        key = raw.strip().lower().replace(" ", "_").replace("-", "_")
        for member in cls:
            if key == member.value:
                return member
        raise ValueError(f"unknown section {raw!r}")

    @property
    def canonical(self) -> str:
        return self.value


class Label(enum.Enum):
    ENTAILMENT = "Entailment"
    CONTRADICTION = "Contradiction"

    @classmethod
    def parse(cls, raw: str) -> "Label":
        for member in cls:
            if raw.strip().lower() == member.value.lower():
                return member
        raise ValueError(f"unknown label {raw!r}")

    @property
    def numeric(self) -> int:
        return 1 if self is Label.ENTAILMENT else 0

    @classmethod
    def from_numeric(cls, value: int) -> "Label":
        if value == 1:
            return Label.ENTAILMENT
        if value == 0:
            return Label.CONTRADICTION
        raise ValueError(f"label encoding must be 0 or 1, got {value!r}")


class InstanceType(enum.Enum):
    SINGLE = "Single"
    COMPARISON = "Comparison"

    @classmethod
    def parse(cls, raw: str) -> "InstanceType":
        for member in cls:
            if raw.strip().lower() == member.value.lower():
                return member
        raise ValueError(f"unknown instance type {raw!r}")


class Intervention(enum.Enum):
    PRESERVING = "Preserving"
    ALTERING = "Altering"

    @classmethod
    def parse(cls, raw: str) -> "Intervention":
        for member in cls:
            if raw.strip().lower() == member.value.lower():
                return member
        raise ValueError(f"unknown intervention {raw!r}")


@dataclass(frozen=True)
class ContrastLink:
    """Pairs a perturbed statement with the unperturbed instance it rewrites."""

    original_id: str
    intervention: Intervention


@dataclass(frozen=True)
class ClinicalTrialReport:
    """One trial's four text sections, each an ordered tuple of lines."""

    trial_id: str
    sections: dict[SectionId, tuple[str, ...]]

    def __post_init__(self):
        if not self.trial_id:
            raise ValueError("trial_id must be non-empty")
        missing = [s for s in SectionId if s not in self.sections]
        if missing:
            raise ValueError(f"missing sections: {[s.canonical for s in missing]}")

    def section_text(self, section: SectionId) -> str:
        return "\n".join(self.sections[section])

    def to_canonical_dict(self) -> dict:
        doc = {"trial_id": self.trial_id}
        for section in SectionId:
            doc[section.canonical] = list(self.sections[section])
        return doc


@dataclass(frozen=True)
class NLIInstance:
    """One labeled (statement, premise-reference) task item."""

    instance_id: str
    instance_type: InstanceType
    section: SectionId
    primary_trial: str
    secondary_trial: str | None
    statement: str
    label: Label | None = None
    contrast: ContrastLink | None = None

    def __post_init__(self):
        has_secondary = self.secondary_trial is not None
        if (self.instance_type is InstanceType.COMPARISON) != has_secondary:
            raise TypeFieldMismatch(
                f"instance {self.instance_id!r}: type {self.instance_type.value} "
                f"but secondary_trial {'present' if has_secondary else 'absent'}"
            )

    def to_canonical_dict(self) -> dict:
        return {
            "type": self.instance_type.value,
            "section": self.section.canonical,
            "primary": self.primary_trial,
            "secondary": self.secondary_trial,
            "statement": self.statement,
            "label": self.label.value if self.label else None,
            "contrast": (
                {
                    "original_id": self.contrast.original_id,
                    "intervention": self.contrast.intervention.value,
                }
                if self.contrast
                else None
            ),
        }


# Key aliases accepted by the ingestion adapter for externally released data.
_TRIAL_ID_KEYS = ("trial_id", "Clinical Trial ID")
_INSTANCE_KEY_ALIASES = {
    "type": ("type", "Type"),
    "section": ("section", "Section_id", "Section"),
    "primary": ("primary", "Primary_id"),
    "secondary": ("secondary", "Secondary_id"),
    "statement": ("statement", "Statement"),
    "label": ("label", "Label"),
    "contrast": ("contrast", "Contrast"),
}


def _pick(obj: dict, aliases: tuple[str, ...]):
    for key in aliases:
        if key in obj:
            return obj[key]
    return None


def parse_trial_document(doc: dict, *, source: str = "<memory>") -> ClinicalTrialReport:
    """Parse one trial JSON object (canonical or released layout)."""
    if not isinstance(doc, dict):
        raise MalformedDocument("trial document is not a JSON object", source=source)
    trial_id = _pick(doc, _TRIAL_ID_KEYS)
    if not trial_id or not isinstance(trial_id, str):
        raise MalformedDocument("missing or non-string trial id", source=source)

    by_key = {}
    for key, value in doc.items():
        if key in _TRIAL_ID_KEYS:
            continue
        try:
            section = SectionId.parse(key)
        except ValueError:
            continue
        if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
            raise MalformedDocument(f"section {key!r} is not a list of strings", source=source)
        by_key[section] = tuple(value)

    missing = [s.canonical for s in SectionId if s not in by_key]
    if missing:
        raise MissingSection(f"trial {trial_id!r} lacks sections {missing}", source=source)
    return ClinicalTrialReport(trial_id=trial_id, sections=by_key)


def load_corpus(
    directory: Path | str,
    *,
    strict: bool = True,
    diagnostics: list[DataError] | None = None,
) -> dict[str, ClinicalTrialReport]:
    """Load every ``*.json`` trial document under ``directory``.

    All files are scanned even when some fail; per-file errors are appended to
    ``diagnostics`` when given, and raised as an aggregated
    :class:`ValidationFailure` afterwards unless ``strict`` is False.  The
    returned map always covers exactly the parse successes.
    """
    directory = Path(directory)
    errors: list[DataError] = []
    corpus: dict[str, ClinicalTrialReport] = {}
    if not directory.is_dir():
        errors.append(MalformedDocument("corpus directory does not exist", source=str(directory)))
    else:
        for path in sorted(directory.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                errors.append(MalformedDocument(f"unreadable JSON: {exc}", source=str(path)))
                continue
            try:
                trial = parse_trial_document(doc, source=str(path))
            except DataError as exc:
                errors.append(exc)
                continue
            if trial.trial_id in corpus:
                errors.append(
                    DuplicateTrialId(f"trial id {trial.trial_id!r} already loaded", source=str(path))
                )
                continue
            corpus[trial.trial_id] = trial

    if diagnostics is not None:
        diagnostics.extend(errors)
    if errors and strict:
        raise ValidationFailure(errors)
    return corpus


def _parse_instance(instance_id: str, obj: dict, *, source: str) -> NLIInstance:
    if not isinstance(obj, dict):
        raise MalformedDocument(f"instance {instance_id!r} is not an object", source=source)
    fields = {name: _pick(obj, aliases) for name, aliases in _INSTANCE_KEY_ALIASES.items()}
    try:
        instance_type = InstanceType.parse(fields["type"] or "")
        section = SectionId.parse(fields["section"] or "")
    except ValueError as exc:
        raise MalformedDocument(f"instance {instance_id!r}: {exc}", source=source)
    label = Label.parse(fields["label"]) if fields["label"] else None
    contrast = None
    if fields["contrast"]:
        raw = fields["contrast"]
        try:
            contrast = ContrastLink(
                original_id=raw["original_id"],
                intervention=Intervention.parse(raw["intervention"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedDocument(f"instance {instance_id!r}: bad contrast link ({exc})", source=source)
    secondary = fields["secondary"] or None
    try:
        return NLIInstance(
            instance_id=instance_id,
            instance_type=instance_type,
            section=section,
            primary_trial=fields["primary"] or "",
            secondary_trial=secondary,
            statement=fields["statement"] or "",
            label=label,
            contrast=contrast,
        )
    except TypeFieldMismatch as exc:
        raise TypeFieldMismatch(str(exc), source=source)


def load_instances(
    file_path: Path | str,
    corpus: dict[str, ClinicalTrialReport],
    *,
    strict: bool = True,
    diagnostics: list[DataError] | None = None,
) -> list[NLIInstance]:
    """Load one instance file and validate every reference against ``corpus``.

    Checks trial references, contrast-link targets (which must live in the
    same file) and label agreement on contrast pairs where both labels are
    known.  Error handling mirrors :func:`load_corpus`.
    """
    file_path = Path(file_path)
    errors: list[DataError] = []
    instances: list[NLIInstance] = []
    source = str(file_path)
    try:
        doc = json.loads(file_path.read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise MalformedDocument("instance file is not a JSON object", source=source)
    except (OSError, json.JSONDecodeError) as exc:
        doc = {}
        errors.append(MalformedDocument(f"unreadable JSON: {exc}", source=source))

    for instance_id, obj in doc.items():
        try:
            instances.append(_parse_instance(instance_id, obj, source=source))
        except DataError as exc:
            errors.append(exc)

    by_id = {inst.instance_id: inst for inst in instances}
    for inst in instances:
        for trial_id in (inst.primary_trial, inst.secondary_trial):
            if trial_id is not None and trial_id not in corpus:
                errors.append(
                    DanglingTrialRef(
                        f"instance {inst.instance_id!r} references unknown trial {trial_id!r}",
                        source=source,
                    )
                )
        if inst.contrast is not None:
            original = by_id.get(inst.contrast.original_id)
            if original is None:
                errors.append(
                    DanglingContrastRef(
                        f"instance {inst.instance_id!r} links to unknown original "
                        f"{inst.contrast.original_id!r}",
                        source=source,
                    )
                )
            elif inst.label is not None and original.label is not None:
                altering = inst.contrast.intervention is Intervention.ALTERING
                if altering and inst.label is original.label:
                    errors.append(
                        ContrastLabelMismatch(
                            f"altering pair {inst.instance_id!r}/{original.instance_id!r} "
                            "has equal labels",
                            source=source,
                        )
                    )
                if not altering and inst.label is not original.label:
                    errors.append(
                        ContrastLabelMismatch(
                            f"preserving pair {inst.instance_id!r}/{original.instance_id!r} "
                            "has differing labels",
                            source=source,
                        )
                    )

    if diagnostics is not None:
        diagnostics.extend(errors)
    if errors and strict:
        raise ValidationFailure(errors)
    return instances


def resolve_premises(
    instance: NLIInstance, corpus: dict[str, ClinicalTrialReport]
) -> tuple[str, str | None]:
    """Section lines of the referenced trial(s), joined with newlines."""
    primary = corpus[instance.primary_trial].section_text(instance.section)
    if not primary:
        log.warning(
            "instance %s: empty %s section in trial %s",
            instance.instance_id,
            instance.section.canonical,
            instance.primary_trial,
        )
    if instance.secondary_trial is None:
        return primary, None
    secondary = corpus[instance.secondary_trial].section_text(instance.section)
    if not secondary:
        log.warning(
            "instance %s: empty %s section in trial %s",
            instance.instance_id,
            instance.section.canonical,
            instance.secondary_trial,
        )
    return primary, secondary


def filter_entailment(instances: list[NLIInstance]) -> list[NLIInstance]:
    """Entailment-labeled subset, order preserved; every input must be labeled."""
    unlabeled = [i.instance_id for i in instances if i.label is None]
    if unlabeled:
        raise UnlabeledInstance(f"unlabeled instances: {unlabeled[:5]}")
    return [i for i in instances if i.label is Label.ENTAILMENT]


def serialize_instances(instances: list[NLIInstance]) -> dict:
    return {inst.instance_id: inst.to_canonical_dict() for inst in instances}
