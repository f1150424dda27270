"""Exception hierarchy.

Every error raised by the package derives from :class:`RareTailError`, and
each one carries a short machine-readable ``code`` used by the CLI when it
reports failures as JSON.
"""


class RareTailError(Exception):
    code = "error"


class ParameterDomainError(RareTailError, ValueError):
    code = "parameter_domain"


class EmptyTruncationError(RareTailError, ValueError):
    code = "empty_truncation"


class EmptyDataError(RareTailError, ValueError):
    code = "empty_data"


class MgfDomainError(RareTailError, ValueError):
    """theta lies outside the domain where the log-MGF is finite."""

    code = "mgf_domain"


class NoMgfError(MgfDomainError):
    """The distribution is heavy-tailed; its MGF is infinite for theta > 0."""

    code = "no_mgf"


class NotRareError(RareTailError, ValueError):
    code = "not_rare"


class UnattainableLevelError(RareTailError, ValueError):
    code = "unattainable_level"


class WrongRegimeError(RareTailError, ValueError):
    code = "wrong_regime"


class MissingSpanError(RareTailError, ValueError):
    code = "missing_span"


class UnsupportedClassError(RareTailError, ValueError):
    code = "unsupported_class"


class InsufficientTailDataError(RareTailError, ValueError):
    code = "insufficient_tail_data"


class DegenerateDataError(RareTailError, ValueError):
    code = "degenerate_data"


class ConvergenceError(RareTailError, RuntimeError):
    """Optimizer failed; ``best`` holds the best point found."""

    code = "convergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InconclusiveError(RareTailError, ValueError):
    code = "inconclusive"


class BootstrapFailureError(RareTailError, RuntimeError):
    code = "bootstrap_failure"

    def __init__(self, message, n_failed=0, n_total=0):
        super().__init__(message)
        self.n_failed = n_failed
        self.n_total = n_total


class GridTooLargeError(RareTailError, MemoryError):
    code = "grid_too_large"


class ConfigError(RareTailError, ValueError):
    code = "config"
