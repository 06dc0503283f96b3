"""Finite-state Markov chain instances and their stationary structure.

A chain is given by a row-stochastic matrix P, an observable f on the state
space, and an initial distribution mu.  This module validates such instances
and computes the objects every later stage consumes: the stationary
distribution pi, the rank-one projection Pi, the potential (fundamental
deviation) matrix E = sum_{n>=0} (P^n - Pi), the geometric-ergodicity
diagnostics, the two-sided density bounds, and the series form of the
asymptotic variance sigma^2.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadInitial,
    DegenerateVariance,
    NegativeEntry,
    NonStochastic,
    NotPrimitive,
    PsiViolated,
    SingularSystem,
)

# Accepts inputs written with <= 9 printed decimals; widened by a relative
# 1e-6 so a row printing as 0.999999999 passes despite its own float error.
ROW_SUM_TOL = 1e-9 * (1.0 + 1e-6)


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ChainSpec:
    """A validated problem instance: transition matrix, observable, start law.

    Attributes
    ----------
    d : int
        Number of states (>= 2).
    P : (d, d) ndarray
        Row-stochastic transition matrix.
    f : (d,) ndarray
        Observable values f(1..d); the additive functional sums f along
        the path visited after the start state.
    mu : (d,) ndarray
        Initial distribution.
    label : str
        Free-form description, carried into reports.
    """

    d: int
    P: np.ndarray
    f: np.ndarray
    mu: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))
        object.__setattr__(self, "f", _frozen(self.f))
        object.__setattr__(self, "mu", _frozen(self.mu))


@dataclass(frozen=True)
class StationaryStructure:
    """Stationary and potential-theoretic objects of a primitive chain.

    pi is the stationary distribution, Pi the rank-one matrix with all rows
    equal to pi, and E the potential matrix (I - P + Pi)^{-1} - Pi, i.e. the
    limit of the partial sums sum_{n=0}^{N} (P^n - Pi).  gamma_erg is the
    second-largest eigenvalue modulus and C_erg the smallest constant making
    ||P^n - Pi||_inf <= C * gamma_erg^n over n = 1..100; both feed
    diagnostics only.
    """

    pi: np.ndarray
    Pi: np.ndarray
    E: np.ndarray
    gamma_erg: float
    C_erg: float

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))
        object.__setattr__(self, "Pi", _frozen(self.Pi))
        object.__setattr__(self, "E", _frozen(self.E))


@dataclass(frozen=True)
class PsiBounds:
    """Two-sided density bounds alpha * mu_j <= p_ij <= beta * mu_j."""

    alpha: float
    beta: float


def validate(spec: ChainSpec) -> ChainSpec:
    """Check the ChainSpec invariants and return a normalized copy.

    Row sums and the initial distribution are renormalized when they are
    within 1e-9 of 1; larger deviations are rejected.

    Raises
    ------
    NonStochastic, NegativeEntry, BadInitial
    """
    P = np.asarray(spec.P, dtype=float)
    f = np.asarray(spec.f, dtype=float)
    mu = np.asarray(spec.mu, dtype=float)
    d = int(spec.d)
    if d < 2:
        raise BadInitial(f"state count must be >= 2, got {d}")
    if P.shape != (d, d):
        raise NonStochastic(f"P has shape {P.shape}, expected {(d, d)}")
    if f.shape != (d,):
        raise BadInitial(f"f has shape {f.shape}, expected ({d},)")
    if mu.shape != (d,):
        raise BadInitial(f"mu has shape {mu.shape}, expected ({d},)")
    if np.any(P < 0):
        i, j = np.argwhere(P < 0)[0]
        raise NegativeEntry(f"P[{i},{j}] = {P[i, j]:.3g} is negative")
    row_sums = P.sum(axis=1)
    bad = np.abs(row_sums - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonStochastic(f"row {i} sums to {row_sums[i]:.12g}")
    if np.any(mu < 0):
        raise BadInitial("mu has a negative entry")
    if abs(mu.sum() - 1.0) > ROW_SUM_TOL:
        raise BadInitial(f"mu sums to {mu.sum():.12g}")
    P = P / row_sums[:, None]
    mu = mu / mu.sum()
    return replace(spec, P=P, f=f, mu=mu)


def _is_primitive(P: np.ndarray) -> bool:
    # Wielandt: a primitive d-state matrix has a strictly positive power with
    # exponent <= (d-1)^2 + 1 <= d^2, and positivity is monotone in the
    # exponent for stochastic matrices, so checking doubled powers suffices.
    d = P.shape[0]
    B = (P > 0).astype(float)
    power = 1
    while True:
        if np.all(B > 0):
            return True
        if power >= d * d:
            return False
        B = np.minimum(B @ B, 1.0)
        power *= 2


def stationary(spec: ChainSpec) -> StationaryStructure:
    """Compute pi, Pi, E and the ergodicity diagnostics of a primitive chain.

    pi solves the linear system pi P = pi, sum(pi) = 1 directly (d is small,
    so a dense solve is exact to machine precision).  E is the closed form
    (I - P + Pi)^{-1} - Pi; the defining series is used only in tests.

    Raises
    ------
    NotPrimitive
        If no power of P up to d**2 is strictly positive.
    SingularSystem
        If a linear solve fails; cannot occur for primitive P.
    """
    P = spec.P
    d = spec.d
    if not _is_primitive(P):
        raise NotPrimitive("no power of P up to d^2 is strictly positive")
    A = P.T - np.eye(d)
    A[-1, :] = 1.0
    b = np.zeros(d)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numerical breakdown
        raise SingularSystem(str(exc)) from exc
    if np.any(pi <= 0):
        raise SingularSystem("stationary solve returned nonpositive entries")
    pi = pi / pi.sum()
    Pi = np.tile(pi, (d, 1))
    try:
        E = np.linalg.solve(np.eye(d) - P + Pi, np.eye(d)) - Pi
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularSystem(str(exc)) from exc

    eigvals = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    gamma = float(min(max(eigvals[1], 0.0), 1.0 - 1e-15)) if d > 1 else 0.0
    C = 1.0
    if gamma > 0:
        Pn = P.copy()
        for n in range(1, 101):
            if gamma**n < 1e-13:
                break  # ||P^n - Pi|| sits at float noise past this point
            gap = np.abs(Pn - Pi).sum(axis=1).max()  # induced sup-norm
            C = max(C, gap / gamma**n)
            Pn = Pn @ P
    return StationaryStructure(pi=pi, Pi=Pi, E=E, gamma_erg=gamma, C_erg=float(C))


def center_observable(spec: ChainSpec, pi: np.ndarray) -> ChainSpec:
    """Return a copy of the chain with f shifted to zero stationary mean."""
    shift = float(np.dot(pi, spec.f))
    return replace(spec, f=spec.f - shift)


def psi_bounds(spec: ChainSpec) -> PsiBounds:
    """Two-sided bounds alpha, beta with alpha mu_j <= p_ij <= beta mu_j.

    Only columns with mu_j > 0 participate.  Fails when some p_ij vanishes
    on such a column: the contraction estimate for the tilted operator
    iterates is then unavailable.
    """
    support = spec.mu > 0
    ratios = spec.P[:, support] / spec.mu[support]
    alpha = float(ratios.min())
    beta = float(ratios.max())
    if alpha <= 0:
        raise PsiViolated("some p_ij = 0 where mu_j > 0")
    return PsiBounds(alpha=alpha, beta=beta)


def sigma_sq_series(spec: ChainSpec, ss: StationaryStructure) -> float:
    """Asymptotic variance of S_n/sqrt(n) from the autocovariance series.

    sigma^2 = sum_i pi_i f(i)^2 + 2 sum_i pi_i f(i) ((E - I) f)(i), which
    resums E_pi[X_0^2] + 2 sum_{n>=1} E_pi[X_0 X_n] for a centered f.

    Raises
    ------
    DegenerateVariance
        If sigma^2 <= 1e-12: f is numerically a coboundary.
    """
    f = spec.f
    corr = (ss.E - np.eye(spec.d)) @ f
    var = float(np.dot(ss.pi, f * f) + 2.0 * np.dot(ss.pi, f * corr))
    if var <= 1e-12:
        raise DegenerateVariance(f"sigma^2 = {var:.3g} <= 1e-12")
    return var
