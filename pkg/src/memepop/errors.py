"""Exception hierarchy shared by every stage.

Exit codes: 2 configuration, 3 data, 4 anything else.
"""


class MemepopError(Exception):
    exit_code = 4


class ConfigError(MemepopError):
    """Bad paths, malformed config files, mismatched registries."""

    exit_code = 2


class DataError(MemepopError):
    """Input data violates an operation's preconditions."""

    exit_code = 3
