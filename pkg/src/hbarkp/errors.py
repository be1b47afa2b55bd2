"""Exception hierarchy.

Every error carries enough context (operation, order, grade) for the
batch front end to emit a machine-readable failure record.
"""


class HbarKPError(Exception):
    """Base class; ``context`` is merged into failure records."""

    def __init__(self, message="", **context):
        super().__init__(message)
        self.context = context

    def record(self):
        rec = {"error": type(self).__name__, "message": str(self)}
        rec.update({k: _jsonable(v) for k, v in self.context.items()})
        return rec


def _jsonable(v):
    if isinstance(v, (int, str, bool)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    return str(v)


# series-core
class MonomialOutOfWindow(HbarKPError):
    pass


class PolicyMismatch(HbarKPError):
    pass


class LogLogProduct(HbarKPError):
    pass


class NonNegativePowerInIntegrand(HbarKPError):
    pass


class LogInProjection(HbarKPError):
    pass


class TrustUnderflow(HbarKPError):
    pass


class SeriesInversionError(HbarKPError):
    pass


# symbol-calculus
class NonTerminatingConjugation(HbarKPError):
    pass


class NotDivisibleByHbar(HbarKPError):
    pass


# dkp / rh-recursion
class NotCanonical(HbarKPError):
    pass


class TimeIndexOutOfRange(HbarKPError):
    pass


class InductionHypothesisViolated(HbarKPError):
    pass


class AlphaNotConstant(HbarKPError):
    pass


class ResidualLogTerm(HbarKPError):
    pass


# wkb
class NegativeHbarResidue(HbarKPError):
    pass


class RegularityViolation(HbarKPError):
    pass


class NoConvergenceAtGrade(HbarKPError):
    pass


# tau
class MissingVGrade(HbarKPError):
    pass


class NotIntegrable(HbarKPError):
    pass


class AlphaUnsupported(HbarKPError):
    pass


# cli
class SpecParseError(HbarKPError):
    pass


class WindowTooLarge(HbarKPError):
    pass
