"""Exception hierarchy; the CLI maps these to exit codes."""


class TailqError(Exception):
    """Base for all tailq-specific failures."""


class TraceError(TailqError):
    """Malformed or inconsistent trace data (exit code 1)."""


class DriverError(TailqError):
    """Workload driver failure: dead child, protocol violation, exhausted
    replay (exit code 1)."""


class ConfigError(TailqError):
    """Invalid configuration (exit code 2)."""
