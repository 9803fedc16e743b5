"""Exception hierarchy shared across the package."""


class AccentError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(AccentError, ValueError):
    """An argument broke a documented precondition."""


class EmptyEvent(ContractViolation):
    pass


class DegenerateVector(AccentError, ValueError):
    """Cosine similarity requested for a zero vector."""


class DegenerateInput(AccentError, ValueError):
    """A metric cannot be computed on the given data (zero variance, one class, ...)."""


class BackendError(AccentError, RuntimeError):
    """A generation or embedding backend failed.

    ``relation`` and ``dialogue_id`` are filled in as the error travels up
    through extraction and the pipeline so the failing call can be located.
    """

    def __init__(self, message, cause=None, relation=None, dialogue_id=None):
        super().__init__(message)
        self.cause = cause
        self.relation = relation
        self.dialogue_id = dialogue_id


class EmptyGeneration(BackendError):
    """The dynamic knowledge base returned no usable tail."""


class LoadError(AccentError):
    def __init__(self, reason, line=None, path=None):
        self.reason = reason
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {reason}" if where else reason)
