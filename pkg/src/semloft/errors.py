"""Exception hierarchy.

Every error carries a ``kind`` drawn from a fixed taxonomy so the CLI can
emit machine-readable failures and pick an exit code.
"""

INPUT_KINDS = frozenset({"io", "format", "geometry", "config"})
RUNTIME_KINDS = frozenset({"capacity", "stall", "inconsistent-evidence"})


class SemloftError(Exception):
    kind = "format"

    def to_dict(self):
        return {"kind": self.kind, "message": str(self)}


class InputIOError(SemloftError):
    kind = "io"


class FormatError(SemloftError):
    kind = "format"


class ParseError(FormatError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class GeometryError(SemloftError):
    kind = "geometry"


class DegenerateInputError(GeometryError):
    pass


class ConfigError(SemloftError):
    kind = "config"


class CapacityError(SemloftError):
    kind = "capacity"


class StallError(SemloftError):
    kind = "stall"


class InconsistentEvidenceError(SemloftError):
    kind = "inconsistent-evidence"


class ZeroMassError(InconsistentEvidenceError):
    """Every truth assignment of some component violates a hard formula."""


def exit_code_for(kind):
    if kind in RUNTIME_KINDS:
        return 3
    return 2
