"""Exception types shared across the package."""


class BetaEdgeError(Exception):
    """Base class for all package errors."""


class SpecError(BetaEdgeError, ValueError):
    """Malformed ensemble specification or configuration."""


class NegativeCumulant(SpecError):
    """A free cumulant is negative, outside the positive-cumulant regime."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"kappa_{index} = {value} < 0")


class PoleEvaluation(BetaEdgeError, ZeroDivisionError):
    """The Voiculescu transform was evaluated at one of its poles."""


class EnumerationTooLarge(BetaEdgeError, ValueError):
    """An exhaustive enumeration was requested beyond its size bound."""


class NoSignChange(BetaEdgeError, ValueError):
    """V' has no root on the admissible interval."""


class NoConvergence(BetaEdgeError, RuntimeError):
    """A numerical routine failed to reach its tolerance."""


class PureGaussianSpec(BetaEdgeError, ValueError):
    """Single-saddle asymptotics requested for a Gaussian-only spec."""


class TermBudgetExceeded(BetaEdgeError, RuntimeError):
    """The symbolic Dunkl expansion grew past its term budget."""


class UnsupportedSignature(BetaEdgeError, ValueError):
    """Walk functional requested for a signature outside the supported set."""


class MismatchReport(BetaEdgeError, AssertionError):
    """A Dunkl ledger class disagrees with its walk-functional prediction."""

    def __init__(self, signature, ledger_value, walk_value):
        self.signature = signature
        self.ledger_value = ledger_value
        self.walk_value = walk_value
        super().__init__(
            f"class {signature}: ledger {ledger_value} != walks {walk_value}"
        )


class VarianceGuard(BetaEdgeError, ValueError):
    """Monte Carlo estimator requested in a regime with unreliable variance."""
