"""Exception hierarchy shared by the translator and the simulator."""


class J2KError(Exception):
    """Base class for all errors raised by j2k."""


class InputError(J2KError):
    """Problem with user-provided input (exit code 2 at the CLI)."""

    def __init__(self, message: str, cell: int | None = None):
        super().__init__(message)
        self.cell = cell


class MalformedDocument(InputError):
    pass


class UnsupportedFormat(InputError):
    pass


class InvalidMarker(InputError):
    pass


class InvalidEnvironmentSpec(InputError):
    pass


class DuplicateStepId(InputError):
    pass


class InvalidName(InputError):
    pass


class MissingField(InputError):
    pass


class InvalidBounds(InputError):
    pass


class InvalidFaultScript(InputError):
    pass


class CycleDetected(J2KError):
    """Internal invariant violation: the step graph has a cycle."""


class SimulationError(J2KError):
    pass


class UnboundClaim(SimulationError):
    pass


class DuplicateName(SimulationError):
    pass


class ServiceNotFound(SimulationError):
    pass


class UnknownIp(SimulationError):
    pass


class NoBackend(SimulationError):
    pass
