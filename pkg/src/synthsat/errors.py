"""Exception types shared across the pipeline."""


class SynthSatError(Exception):
    """Base class for all package errors."""


class InvalidConfig(SynthSatError):
    pass


class InfeasiblePlacement(SynthSatError):
    pass


class InvalidLevel(SynthSatError):
    pass


class InvalidParams(SynthSatError):
    pass


class UnknownTimeTag(SynthSatError):
    pass


class EmptyWindow(SynthSatError):
    pass


class DegeneratePose(SynthSatError):
    pass


class UnknownLayer(SynthSatError):
    pass


class InvalidThresholds(SynthSatError):
    pass


class ResolutionMismatch(SynthSatError):
    pass


class InvalidGsd(SynthSatError):
    pass


class ValidationError(SynthSatError):
    """One or more semantic violations; `violations` lists all of them."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(SynthSatError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", column {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


class ProtocolError(SynthSatError):
    pass


class BackendUnavailable(SynthSatError):
    pass


class FatalIoError(SynthSatError):
    pass
