"""Exception hierarchy shared by all iofm modules."""


class IoFMError(Exception):
    """Base class for every error raised by this package."""


class InvalidReference(IoFMError):
    """An id does not resolve to a known domain, component, service or fault."""


class TopologyError(IoFMError):
    """The provider network cannot support the requested operation."""


class StateMachineViolation(IoFMError):
    def __init__(self, from_state, to_state):
        super().__init__(f"illegal transition {from_state} -> {to_state}")
        self.from_state = from_state
        self.to_state = to_state


class AccessDenied(IoFMError):
    """The acting role lacks the capability for the attempted action."""


class OrderingError(IoFMError):
    """A tick earlier than the last observed tick was supplied."""


class ConversionError(IoFMError):
    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


class RangeError(ConversionError):
    """A converted value falls outside the canonical domain of its field."""


class CapabilityError(IoFMError):
    """The use case is not supported by the network's topology class."""


class ScopeError(IoFMError):
    """A target lies outside the scope of the fault's suspected service."""


class PreconditionError(IoFMError):
    pass


class PatchValidationError(IoFMError):
    pass


class DomainError(IoFMError):
    """Empty input where a nonempty one is required (empty chain, empty window)."""


class IntegrityError(IoFMError):
    """A checksum or integrity tag does not match its content."""


class RoutingError(IoFMError):
    pass


class SchedulerMisuse(IoFMError):
    pass


class ScenarioError(IoFMError):
    """A scenario document is malformed or fails validation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)
