"""Exception types shared across the extraction pipeline."""


class Schem2NetError(Exception):
    """Base class for all package errors."""


class InvalidInput(Schem2NetError, ValueError):
    """An argument violates an operation's precondition."""


class ParseError(Schem2NetError, ValueError):
    """A document (annotation file, SPICE text) is malformed."""


class AnnotationConflict(Schem2NetError, ValueError):
    """Two annotated boxes share pixel area."""


class PinError(Schem2NetError):
    """Base class for terminal-assignment failures.

    ``reason`` is the string written to the exceptions report.
    """

    reason = "PinError"

    def __init__(self, component_id, detail=""):
        self.component_id = component_id
        self.detail = detail
        msg = f"{self.reason} on {component_id}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class UnmappedPin(PinError):
    reason = "UnmappedPin"


class PinCollision(PinError):
    reason = "PinCollision"


class MissingPin(PinError):
    reason = "MissingPin"


class RailShort(Schem2NetError):
    """A single net joins a ground symbol and a supply symbol."""

    reason = "RailShort"


class RenderGiveUp(Schem2NetError):
    """The synthetic renderer could not route a netlist within its retry budget."""
