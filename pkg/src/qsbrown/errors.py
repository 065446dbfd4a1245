"""Exception types shared across the package.

Every failure mode that callers are expected to catch has its own class here;
anything else is a plain ValueError/TypeError from the offending call site.
"""

from __future__ import annotations


class QsbrownError(Exception):
    """Base class for package-specific failures."""


class IndexUnavailable(QsbrownError):
    """A covariance or interaction entry was requested outside the stored window."""

    def __init__(self, what: str, k: int, l: int):
        self.what = what
        self.k = k
        self.l = l
        super().__init__(f"{what} entry ({k}, {l}) is outside the available window")


class DiagonalNotUnit(QsbrownError):
    """The triangular system for nu has a diagonal entry away from 1."""

    def __init__(self, k: int, value: float):
        self.k = k
        self.value = value
        super().__init__(f"row {k}: diagonal entry {value!r} differs from 1")


class NotPositiveDefinite(QsbrownError):
    """A leading minor of the covariance window failed the Cholesky pivot test."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"leading {k}x{k} minor is not positive definite")


class DivergentIntegral(QsbrownError):
    """An integral required to be finite failed to converge.

    ``which`` names the quantity (``partition_function``, ``second_moment``,
    ``fisher_information``); ``k`` is the spacing index when known.
    """

    def __init__(self, which: str, k: int | None = None, detail: str = ""):
        self.which = which
        self.k = k
        where = f" for spacing index {k}" if k is not None else ""
        extra = f" ({detail})" if detail else ""
        super().__init__(f"{which} diverges{where}{extra}")


class NonIntegrableSingularity(QsbrownError):
    """The integrand blows up non-integrably at a support endpoint."""

    def __init__(self, endpoint: float, detail: str = ""):
        self.endpoint = endpoint
        extra = f": {detail}" if detail else ""
        super().__init__(f"non-integrable singularity at endpoint {endpoint!r}{extra}")


class SupportViolation(QsbrownError):
    """A state was evaluated outside the potential's support."""


class StepStuck(QsbrownError):
    """A path exhausted the step-halving budget inside one grid step."""

    def __init__(self, path: int, t: float):
        self.path = path
        self.t = t
        super().__init__(
            f"path {path} rejected the maximum number of halved steps near t={t:g}"
        )


class FailureRateExceeded(QsbrownError):
    """Too large a fraction of paths was discarded during simulation."""

    def __init__(self, n_failed: int, n_total: int, limit: float):
        self.n_failed = n_failed
        self.n_total = n_total
        self.limit = limit
        super().__init__(
            f"{n_failed}/{n_total} paths failed; allowed fraction is {limit:g}"
        )


class ParameterOutOfRange(QsbrownError):
    """A catalog preset was asked for parameters outside its admissible range."""


class ExpressionError(QsbrownError):
    """A potential expression string could not be parsed or evaluated."""
