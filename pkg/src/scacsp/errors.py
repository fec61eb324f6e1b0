"""Exception hierarchy. The CLI maps these classes onto stable exit codes:
2 = configuration, 3 = data, 4 = numerical."""


class ScacspError(Exception):
    """Base class for all package errors."""


class ConfigError(ScacspError):
    """Invalid configuration or incompatible option combination."""


class DataError(ScacspError):
    """Malformed, inconsistent, or out-of-bounds input data."""


class NumericalError(ScacspError):
    """A numerical precondition was violated."""


class DefinitenessError(NumericalError):
    """A matrix required to be positive definite is not."""


class RankError(NumericalError):
    """A matrix required to be full rank is rank deficient."""


class DegenerateClassError(NumericalError):
    """Class-mean covariances coincide; filter scores are undefined."""


class SemiEmptyError(NumericalError):
    """Every selected subspace is semi-empty (no symmetric directions left)."""
