"""Exception hierarchy shared by the models, services and the CLI."""


class ScardoError(Exception):
    """Base class for every error raised by the package."""


class ValidationFailure(ScardoError, ValueError):
    """A component (space, tensor, ranking, population) failed validation."""


class PreconditionError(ScardoError, ValueError):
    """An operation was called outside its documented preconditions."""


class ConfigError(ScardoError, ValueError):
    """A run config could not be parsed or validated."""

    def __init__(self, message: str, *, path: str | None = None) -> None:
        super().__init__(message)
        self.path = path


class SimulationError(ScardoError, RuntimeError):
    """Internal failure while running a simulation or an integration."""


def unwrap_validation_error(exc) -> ScardoError:
    """Turn a pydantic ValidationError back into the package error it wraps.

    Model validators raise ``ValidationFailure``; pydantic re-raises it as a
    ``ValidationError`` and keeps the original in the error context.
    """

    first = exc.errors()[0]
    original = first.get("ctx", {}).get("error")
    if isinstance(original, ScardoError):
        return original
    location = ".".join(str(part) for part in first.get("loc", ()))
    message = first.get("msg", str(exc))
    return ValidationFailure(f"{location}: {message}" if location else message)
