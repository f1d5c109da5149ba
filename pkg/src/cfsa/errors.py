"""Exception hierarchy; the CLI maps each family to an exit code."""


class CFSAError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 4


class ConfigError(CFSAError):
    exit_code = 2


class DataError(CFSAError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ValidationError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class PipelineError(CFSAError):
    exit_code = 4


class DegenerateTrainingError(PipelineError):
    pass


class DegenerateFoldError(PipelineError):
    pass


class InfeasibleRebalanceError(PipelineError):
    def __init__(self, message, roots=()):
        super().__init__(message)
        self.roots = tuple(roots)


class SynthesisError(PipelineError):
    pass


class SelectionError(PipelineError):
    pass


class ClassificationError(PipelineError):
    pass


class UndefinedMetricError(PipelineError):
    """A metric whose denominator is zero for the given predictions."""

    def __init__(self, metric, reason):
        super().__init__(f"{metric} undefined: {reason}")
        self.metric = metric
        self.reason = reason


class ShapeError(PipelineError, ValueError):
    pass
