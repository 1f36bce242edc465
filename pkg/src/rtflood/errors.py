"""Exception hierarchy shared by every backend and the CLI."""


class BenchError(Exception):
    """Base class for all rtflood failures."""

    exit_code = 4


class ConfigError(BenchError, ValueError):
    exit_code = 2


class PrivilegeError(BenchError, PermissionError):
    exit_code = 3


class AffinityError(BenchError, ValueError):
    exit_code = 2


class AdmissionError(BenchError):
    """The OS refused a SCHED_DEADLINE reservation."""

    exit_code = 4


class InterfaceError(BenchError, OSError):
    exit_code = 2


class SimulationError(BenchError):
    exit_code = 4


class AnalysisError(BenchError, ValueError):
    """Series or run sets that cannot be analysed as requested."""

    exit_code = 4
