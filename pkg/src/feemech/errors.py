"""Exception hierarchy shared by every module."""


class FeeMechError(Exception):
    """Base class for all package errors."""


class DomainError(FeeMechError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConstructionError(FeeMechError, ValueError):
    """A model object was built from inconsistent parameters."""


class UnsupportedMechanismError(FeeMechError, TypeError):
    """The requested operation is undefined for this mechanism or environment."""


class OptimizationError(FeeMechError, RuntimeError):
    """A scalar optimization failed; ``diagnostics`` holds what was observed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class InfeasibleBargainingError(FeeMechError, RuntimeError):
    """No candidate family yields a positive Nash product anywhere."""

    def __init__(self, message, per_family=None):
        super().__init__(message)
        self.per_family = dict(per_family or {})


class ConfigError(FeeMechError, ValueError):
    """Config file could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column
