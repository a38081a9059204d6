"""Exception types shared across the package."""


class MilestoningError(Exception):
    pass


class ConfigError(MilestoningError):
    """Invalid run configuration; carries the offending field path."""

    def __init__(self, field, message, line=None):
        self.field = field
        self.line = line
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"[{field}]{loc}: {message}")


class NumericalBlowupError(MilestoningError):
    def __init__(self, position, stream_id=None):
        self.position = tuple(position)
        self.stream_id = stream_id
        super().__init__(
            f"non-finite position {self.position} during integration"
            + (f" (stream {stream_id})" if stream_id is not None else "")
        )


class CensoredFragmentError(MilestoningError):
    """Fragment hit the step cap before crossing another milestone."""

    def __init__(self, steps, stream_id=None):
        self.steps = steps
        self.stream_id = stream_id
        super().__init__(
            f"fragment censored after {steps} steps"
            + (f" (stream {stream_id})" if stream_id is not None else "")
        )


class UnreachableProductError(MilestoningError):
    pass


class NoConvergenceError(MilestoningError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class InvalidComparisonError(MilestoningError):
    pass
