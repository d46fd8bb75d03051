"""Exception hierarchy shared by every stage of the pipeline."""


class VoltcastError(Exception):
    """Base class for all library errors."""


class DataError(VoltcastError, ValueError):
    """Input data violates a precondition (bad rows, gaps, non-positive values...)."""


class ConvergenceError(VoltcastError, RuntimeError):
    """An optimizer stopped without meeting its tolerance.

    ``diagnostics`` carries the best point found so far.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class EstimationError(VoltcastError, RuntimeError):
    """A named stage of a multi-stage fit failed."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause
