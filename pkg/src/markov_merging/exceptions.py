"""Exception hierarchy.

Everything raised on purpose by the package derives from
:class:`MergingError`, and the validation errors additionally derive from
:class:`ValueError` so that callers using the usual numpy idiom still catch
them.
"""


class MergingError(Exception):
    """Base class for package errors."""


class ValidationError(MergingError, ValueError):
    """Input failed a structural check."""


class NegativeEntry(ValidationError):
    def __init__(self, row, col, value):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"negative entry {value!r} at ({row}, {col})")


class RowSumViolation(ValidationError):
    def __init__(self, row, deviation):
        self.row, self.deviation = row, deviation
        super().__init__(f"row {row} sums to 1{deviation:+.3e}")


class MeasureSumViolation(ValidationError):
    def __init__(self, deviation):
        self.deviation = deviation
        super().__init__(f"weights sum to 1{deviation:+.3e}")


class IndexOrder(ValidationError):
    def __init__(self, n, m):
        self.n, self.m = n, m
        super().__init__(f"need n <= m, got n={n}, m={m}")


class Reducible(MergingError, ValueError):
    """The kernel graph is not strongly connected."""


class NotReversible(MergingError, ValueError):
    def __init__(self, violation):
        self.violation = violation
        super().__init__(f"detailed balance violated by {violation:.3e}")


class ZeroReference(MergingError, ValueError):
    """A reference measure that must be positive has a zero entry."""


class ZeroImageMass(ZeroReference):
    """``mu K`` has an entry below the positivity floor."""


class EpsTooLarge(ValidationError):
    pass


class UnsupportedPair(MergingError, ValueError):
    def __init__(self, p, q):
        self.p, self.q = p, q
        super().__init__(f"operator norm for (p, q) = ({p}, {q}) is not supported")


class ZeroFunction(ValidationError):
    pass


class NoAdmissibleWitness(MergingError, ValueError):
    """Every candidate function has zero entropy (effective support <= 1 point)."""


class RangeViolation(ValidationError):
    pass


class MissingSigma(MergingError, IndexError):
    pass


class NeverReached(MergingError):
    """A cumulative threshold is never met by the supplied constants."""


class ThresholdNotMet(MergingError, ValueError):
    pass


class HorizonTooShort(MergingError, ValueError):
    pass


class DepthTooLarge(MergingError, ValueError):
    pass


class NotMember(MergingError, ValueError):
    def __init__(self, condition, detail=""):
        self.condition = condition
        super().__init__(f"condition ({condition}) violated" + (f": {detail}" if detail else ""))


class NotSymmetricBD(ValidationError):
    pass


class PerturbationTooLarge(ValidationError):
    pass


class DeltaTooLarge(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class InfeasiblePerturbation(MergingError, ValueError):
    pass


class ConfigError(ValidationError):
    pass
