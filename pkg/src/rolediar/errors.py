"""Exception hierarchy shared by all toolkit modules."""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ToolkitError, ValueError):
    """An argument violates an operation's precondition."""


class OrderingError(ParameterError):
    """Input that must be time-ordered is not."""


class FormatError(ToolkitError):
    """A data file is malformed (bad field count, duplicate ids, ...)."""


class TrainingError(ToolkitError):
    """Training input is degenerate (empty corpus, single speaker, ...)."""


class ModelError(ToolkitError):
    """A model object is in an invalid state (e.g. non-PD covariance)."""


class DegenerateInputError(ToolkitError):
    """Numerically degenerate input (e.g. zero vector after projection)."""


class ProfileEstimationError(ToolkitError):
    """No usable segments to estimate a speaker profile from."""


class ScoringError(ToolkitError):
    """Evaluation cannot be carried out (e.g. empty reference)."""


class ConfigurationError(ToolkitError):
    """Inconsistent pipeline configuration or missing modality."""
