"""Exception hierarchy; the command line maps each class to its own exit code."""


class CrackleError(Exception):
    """Base class for all package errors."""


class ParameterError(CrackleError, ValueError):
    """Parameters outside the domain of a model or operation."""


class SolverError(CrackleError, RuntimeError):
    """A root finder or numerical routine could not produce a valid answer."""


class StructureError(CrackleError, ValueError):
    """Malformed combinatorial input, e.g. a complex that is not downward closed."""


class UnsupportedConfiguration(ParameterError):
    """The operation is defined only for a narrower set of parameters."""


class ConfigError(CrackleError, ValueError):
    """Invalid experiment configuration file; carries line and field diagnostics."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        super().__init__(message)
        self.line = line
        self.field = field

    def record(self) -> dict:
        return {"line": self.line, "field": self.field, "message": str(self)}
