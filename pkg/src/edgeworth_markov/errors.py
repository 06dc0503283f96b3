"""Exception hierarchy shared by all modules."""


class EdgeworthError(Exception):
    """Base class for all errors raised by this package."""


# -- chain validation ------------------------------------------------------

class NonStochastic(EdgeworthError):
    """A transition-matrix row sum deviates from 1 by more than 1e-9."""


class NegativeEntry(EdgeworthError):
    """The transition matrix contains a negative entry."""


class BadInitial(EdgeworthError):
    """The initial vector is not a probability distribution."""


class NotPrimitive(EdgeworthError):
    """No matrix power up to d**2 is strictly positive."""


class SingularSystem(EdgeworthError):
    """A linear solve failed; signals numerical breakdown, not bad input."""


class PsiViolated(EdgeworthError):
    """Two-sided density bounds fail: some p_ij = 0 where mu_j > 0."""


class DegenerateVariance(EdgeworthError):
    """Asymptotic variance is numerically zero; the expansion is undefined."""


# -- spectral machinery ----------------------------------------------------

class EigenvalueCollision(EdgeworthError):
    """Top two eigenvalue moduli within 1e-9; outside the perturbative regime."""


class ContourTooClose(EdgeworthError):
    """Contour radius reaches the subdominant spectrum; choose a smaller one."""


class ComplexResidue(EdgeworthError):
    """A quantity that must be real carries imaginary part above 1e-10."""


class BoundViolated(EdgeworthError):
    """A proven operator-norm bound was exceeded; implementation bug."""


# -- oracles ---------------------------------------------------------------

class NotLattice(EdgeworthError):
    """Observable values share no common span; exact DP unavailable."""


class BudgetExceeded(EdgeworthError):
    """Dynamic-programming table would exceed the cell budget."""


class GridMismatch(EdgeworthError):
    """Approximation and ground truth disagree on n or dimensions."""


# -- input handling --------------------------------------------------------

class ParseError(EdgeworthError):
    """Input document is malformed; message carries field diagnostics."""


class ValidationError(EdgeworthError):
    """Input document parsed but violates a schema invariant."""


class DegenerateKernel(EdgeworthError):
    """Sampled transition density is not bounded away from zero."""
