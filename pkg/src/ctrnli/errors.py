"""Exception hierarchy shared across the pipeline."""


class CtrNliError(Exception):
    """Base class for all pipeline errors."""


class DataError(CtrNliError):
    """A problem with an input file or record; carries the offending source."""

    def __init__(self, message: str, *, source: str | None = None):
        self.source = source
        if source:
            message = f"{source}: {message}"
        super().__init__(message)


class MalformedDocument(DataError):
    pass


class MissingSection(DataError):
    pass


class DuplicateTrialId(DataError):
    pass


class DanglingTrialRef(DataError):
    pass


class DanglingContrastRef(DataError):
    pass


class TypeFieldMismatch(DataError):
    pass


class ContrastLabelMismatch(DataError):
    pass


class ConfigError(CtrNliError):
    pass


class ValidationFailure(CtrNliError):
    """Aggregate of per-file/per-record errors collected during a full scan."""

    def __init__(self, errors: list[DataError]):
        self.errors = list(errors)
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s):\n{lines}")


class UnlabeledInstance(CtrNliError):
    pass


class StatementTooLong(CtrNliError):
    pass


class EmptyCorpus(CtrNliError):
    pass


class CacheCorruption(CtrNliError):
    pass


class RuntimeUnavailable(CtrNliError):
    """The neural model runtime (torch/transformers) is missing or failed to load."""


class EmptyTrainingSet(CtrNliError):
    pass


class LengthMismatch(CtrNliError):
    pass


class EmptyInput(CtrNliError):
    pass


class MixedModelTags(CtrNliError):
    pass


class MissingPredictions(CtrNliError):
    pass


class DisjointIdSets(CtrNliError):
    pass
