"""Exception types shared across the package."""


class EvflexError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(EvflexError, ValueError):
    """Malformed argument: wrong shape, bad ordering, inconsistent lengths."""


class InfeasibleDeviceError(EvflexError):
    """A device cannot absorb its remaining demand within the horizon."""


class InfeasibleFleetError(EvflexError):
    """One or more devices in a fleet cannot finish by the deadline."""

    def __init__(self, device_ids, message=None):
        self.device_ids = list(device_ids)
        ids = ", ".join(str(d) for d in self.device_ids)
        super().__init__(message or f"infeasible devices: {ids}")


class InfeasibleActionError(EvflexError):
    """Requested power lies outside the admissible interval."""


class TerminalStageError(EvflexError):
    """Operation is undefined at the final stage."""


class IncompleteDataError(EvflexError):
    """Price records do not cover every settlement period."""

    def __init__(self, missing_periods):
        self.missing_periods = sorted(missing_periods)
        periods = ", ".join(str(p) for p in self.missing_periods)
        super().__init__(f"no price records for periods: {periods}")


class ParseError(EvflexError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class InstanceTooLargeError(EvflexError):
    """A brute-force oracle guard tripped; the instance must stay small."""


class SolverStalledError(EvflexError):
    """The LP solver exceeded its iteration cap."""
