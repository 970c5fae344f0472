"""Exception hierarchy shared across the pipeline."""
from __future__ import annotations


class LlmsurvError(Exception):
    """Base class for all errors raised by this package."""


class IngestionError(LlmsurvError):
    """Malformed patient record or cohort file."""


class SplitError(LlmsurvError):
    """Cohort cannot be split as requested."""


class DegenerateInputError(LlmsurvError):
    """Statistic undefined on the given input (too few pairs, no variance)."""


class NoComparablePairsError(LlmsurvError):
    """Concordance undefined: the sample holds no comparable pair."""


class ConvergenceError(LlmsurvError):
    """An iterative fit failed to converge; carries the objective trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class PromptAssetError(LlmsurvError):
    """Prompt template asset missing, corrupt, or failing its checksum."""


class ProviderError(LlmsurvError):
    """Transport-level failure while querying a completion provider."""


class StructurizationGateError(LlmsurvError):
    """Record does not satisfy the preconditions for structurization."""


class SynthesisError(LlmsurvError):
    """Synthetic cohort generation could not satisfy its configuration."""


class ConfigError(LlmsurvError):
    """Invalid run configuration; message lists every violation."""


class ArtifactError(LlmsurvError):
    """Serialized artifact missing, malformed, or of an unsupported version."""
