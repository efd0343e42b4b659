"""Exception hierarchy shared across the package.

Each class carries the CLI exit code it maps to, so the command line layer
can translate failures without inspecting messages.
"""


class LabError(Exception):
    exit_code = 4


class ConfigError(LabError):
    exit_code = 2


class DataError(LabError):
    exit_code = 3


class SnapshotParseError(DataError):
    """A snapshot record is malformed; the message names the entity."""


class IntegrityError(DataError):
    """A channel references a node that does not exist."""


class StructuralRouteError(DataError):
    """A route references a channel that is missing or disabled."""


class NoRouteError(LabError):
    """No feasible path exists between sender and recipient."""

    exit_code = 3


class InconsistentObservation(DataError):
    """An observation cannot have been produced by any route in the graph."""


class InvariantViolation(LabError):
    exit_code = 4
