"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SSGRNError(Exception):
    exit_code = 1
    kind = "error"


class UsageError(SSGRNError):
    exit_code = 1
    kind = "usage"


class DataError(SSGRNError, ValueError):
    """Malformed, incomplete or too-small input data."""

    exit_code = 2
    kind = "data"


class InfeasibleError(DataError):
    """The dataset has too few observations for the requested model."""

    kind = "infeasible"


class NumericalError(SSGRNError, ArithmeticError):
    """Singular matrices, degenerate models, non-monotone EM."""

    exit_code = 3
    kind = "numerical"
