class EcoError(Exception):
    """Base class for all ecosizer errors."""


class LibraryError(EcoError):
    """Malformed or invariant-violating cell library."""


class NetlistError(EcoError):
    """Malformed netlist or graph invariant violation."""


class TimingError(EcoError):
    """STA precondition failure (missing voltage, stale annotation, ...)."""


class GridError(EcoError):
    """Power-grid construction or solve failure."""


class ConfigError(EcoError):
    """Bad run configuration (maps to CLI exit code 2)."""


class InfeasibleError(EcoError):
    """Target timing unreachable with the available library (exit code 3)."""


class ModelError(EcoError):
    """Model file corrupt, truncated, or schema-incompatible."""
