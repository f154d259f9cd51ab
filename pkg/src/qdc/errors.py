"""Exception hierarchy shared by every module."""


class QdcError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(QdcError, ValueError):
    """Invalid parameters, layouts or run configuration."""


class LayoutError(ConfigurationError):
    """Register layout does not fit the requested operation."""


class GateTargetError(QdcError, IndexError):
    """Gate target outside the state's qubit range."""


class PreconditionError(QdcError, ValueError):
    """An operation's input state violates its precondition."""


class SubspaceViolationError(PreconditionError):
    """State has support outside the single-excitation subspace."""

    def __init__(self, leaked_weight: float, message: str | None = None):
        self.leaked_weight = float(leaked_weight)
        if message is None:
            message = (
                "state leaves the single-excitation subspace: "
                f"leaked weight {self.leaked_weight:.3e}"
            )
        super().__init__(message)


class InfeasibleError(QdcError):
    """No parameter choice satisfies the error budget."""


class ResourceError(QdcError):
    """Not enough entanglement in a channel's EPR pool."""


class ReconstructionError(QdcError):
    """A secret cannot be rebuilt from the shares supplied."""


class DomainWarning(UserWarning):
    """Input outside the regime where a fitted model is trustworthy."""
