"""Exception hierarchy shared by all modules."""


class MacropeaksError(Exception):
    """Base class for every error raised by the package."""


class NotAFunction(MacropeaksError):
    """The correlation is a measure without pointwise values (e.g. white noise)."""


class DomainError(MacropeaksError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class NoDensity(MacropeaksError):
    """The spectral measure has no density."""


class QuadratureFailure(MacropeaksError):
    """Numerical integration did not reach the requested tolerance."""


class UnsatisfiedCondition(MacropeaksError):
    """An integrability condition needed for existence of the solution fails."""


class NonVanishingCorrelation(MacropeaksError):
    """A correlation table does not decay below the vanishing threshold."""


class FactorizationFailure(MacropeaksError):
    """Cholesky factorization failed even after diagonal jitter."""


class SizeCapExceeded(MacropeaksError):
    """A requested point set exceeds the configured size cap."""


class EmbeddingNotPSD(MacropeaksError):
    """Circulant embedding has too much negative spectral mass to clip."""


class MismatchedPoints(MacropeaksError):
    """Field samples that should share a point set do not."""


class InvalidRange(MacropeaksError, ValueError):
    """Parameters describe an empty or ill-ordered range."""


class InvalidVariance(MacropeaksError, ValueError):
    """A variance function returned a non-positive value."""


class PreconditionFail(MacropeaksError):
    """A stretch factor or similar input violates its defining properties."""


class InsufficientShells(MacropeaksError):
    """Too few non-empty shells to fit a dimension estimate."""


class RangeError(MacropeaksError, ValueError):
    """A bound was evaluated outside its range of validity."""


class ConfigError(MacropeaksError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
