"""Exception hierarchy shared by every module of the package."""


class MagnonBlockadeError(Exception):
    """Base class; carries a short machine-readable ``kind`` for the CLI."""

    kind = "error"


class InvalidDimensionError(MagnonBlockadeError, ValueError):
    kind = "invalid-dimension"


class SpaceMismatchError(MagnonBlockadeError, ValueError):
    kind = "space-mismatch"


class InvalidParameterError(MagnonBlockadeError, ValueError):
    kind = "invalid-parameter"


class NoUniqueSteadyStateError(MagnonBlockadeError, ArithmeticError):
    kind = "no-unique-steady-state"


class UnoccupiedModeError(MagnonBlockadeError, ArithmeticError):
    kind = "unoccupied-mode"


class DegenerateParametersError(MagnonBlockadeError, ArithmeticError):
    kind = "degenerate-parameters"


class DivergenceError(MagnonBlockadeError, ArithmeticError):
    kind = "divergence"


class RegimeViolationError(MagnonBlockadeError, ValueError):
    kind = "regime-violation"


class ConfigError(MagnonBlockadeError, ValueError):
    kind = "config"
