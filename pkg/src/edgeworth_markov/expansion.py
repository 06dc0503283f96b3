"""Assembly of the operator-valued Edgeworth correction terms.

The order-m correction is A_{m,z} = sum_{j=0}^m a_j(z) P1^(j), a combination
of the projector derivatives with scalar coefficients built from Hermite
polynomials and products of cumulants indexed by constrained integer
partitions.  Order 0 is the Gaussian CDF times the stationary projection.

Conventions fixed here (and verified by the Fourier-consistency tests):
probabilists' Hermite polynomials, and the j = nu coefficient carries the
1/(nu! sigma^nu) normalization of the general product formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import ndtr

from .spectral import SpectralSummary, _as_real


def normal_cdf(z):
    """Standard normal distribution function."""
    return ndtr(z)


def normal_pdf(z):
    """Standard normal density."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return out if out.shape else float(out)


def hermite(nu: int, z):
    """Probabilists' Hermite polynomial He_nu(z).

    He_0 = 1, He_1 = z, He_{n+1}(z) = z He_n(z) - n He_{n-1}(z); these give
    the sign-alternating derivatives of the Gaussian density.
    """
    if nu < 0:
        raise ValueError(f"Hermite order must be >= 0, got {nu}")
    z = np.asarray(z, dtype=float)
    prev = np.ones_like(z)
    if nu == 0:
        return prev if prev.shape else 1.0
    cur = z.copy()
    for n in range(1, nu):
        prev, cur = cur, z * cur - n * prev
    return cur if cur.shape else float(cur)


def hermite_all(nmax: int, z):
    """He_0..He_nmax stacked along the first axis."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty((nmax + 1,) + z.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = z
    for n in range(1, nmax):
        out[n + 1] = z * out[n] - n * out[n - 1]
    return out


@dataclass(frozen=True)
class PartitionSet:
    """Tuples (k_1..k_m) with sum i*k_i = m; the index set of the coefficient
    products.  m = 0 holds the single empty tuple (empty product = 1)."""

    m: int
    tuples: tuple


def partitions(m: int) -> PartitionSet:
    """Exhaustively enumerate the constraint set, lexicographically sorted."""
    if not 0 <= m <= 12:
        raise ValueError(f"partition order {m} outside 0..12")
    if m == 0:
        return PartitionSet(m=0, tuples=((),))
    found = []

    def rec(i, rem, acc):
        if i > m:
            if rem == 0:
                found.append(tuple(acc))
            return
        for k in range(rem // i + 1):
            rec(i + 1, rem - i * k, acc + [k])

    rec(1, m, [])
    found.sort()
    return PartitionSet(m=m, tuples=tuple(found))


def _tuple_weight(tup, cumulants, sigma):
    # product over parts of (1/k_m!) (gamma_{m+2} / ((m+2)! sigma^{m+2}))^{k_m}
    w = 1.0
    for m_, k in enumerate(tup, start=1):
        if k:
            base = cumulants[m_ + 2] / (math.factorial(m_ + 2) * sigma ** (m_ + 2))
            w *= base**k / math.factorial(k)
    return w


def freq_poly(nu: int, itheta: complex, cumulants, sigma: float) -> complex:
    """Frequency-domain coefficient polynomial of order nu.

    Sum over the partition set of nu of the cumulant products, each part m
    contributing (gamma_{m+2} (i theta)^{m+2} / ((m+2)! sigma^{m+2}))^{k_m}
    / k_m!.  Order 0 is identically 1.
    """
    total = 0.0 + 0.0j
    for tup in partitions(nu).tuples:
        w = 1.0 + 0.0j
        for m_, k in enumerate(tup, start=1):
            if k:
                base = (cumulants[m_ + 2] * itheta ** (m_ + 2)
                        / (math.factorial(m_ + 2) * sigma ** (m_ + 2)))
                w *= base**k / math.factorial(k)
        total += w
    return total


def coeff_a(j: int, nu: int, z, cumulants, sigma: float):
    """Scalar coefficient a_j(z) of P1^(j) inside the order-nu term.

    a_j(z) = -n(z) sum over partitions of nu-j of
             a_{j,nu-j} He_{nu-1+2 sum k_i}(z),
    with a_{j,nu-j} = (1/(j! sigma^j)) * cumulant product.  For j = nu the
    sum collapses to -n(z) He_{nu-1}(z) / (nu! sigma^nu).
    """
    if not 0 <= j <= nu:
        raise ValueError(f"need 0 <= j <= nu, got j={j}, nu={nu}")
    if nu < 1:
        raise ValueError("order-0 term has no scalar coefficients")
    z = np.asarray(z, dtype=float)
    pref = 1.0 / (math.factorial(j) * sigma**j)
    acc = np.zeros_like(z)
    for tup in partitions(nu - j).tuples:
        idx = nu - 1 + 2 * sum(tup)
        acc += pref * _tuple_weight(tup, cumulants, sigma) * hermite(idx, z)
    out = -normal_pdf(z) * acc
    return out if out.shape else float(out)


def operator_A(m: int, z: float, proj_derivs, cumulants, sigma: float):
    """The d x d matrix A_{m,z}: order-m Edgeworth correction at level z.

    A_{0,z} = N(z) Pi and A_{m,z} = sum_{j<=m} a_j(z) P1^(j) for m >= 1.
    Projector derivatives must be real up to residue 1e-10.
    """
    P1 = [_as_real(np.asarray(Pd), f"P1^({j})") for j, Pd in enumerate(proj_derivs[: m + 1])]
    if m == 0:
        return float(normal_cdf(z)) * P1[0]
    A = coeff_a(0, m, z, cumulants, sigma) * P1[0]
    for j in range(1, m + 1):
        A = A + coeff_a(j, m, z, cumulants, sigma) * P1[j]
    return A


@dataclass(frozen=True)
class EdgeworthApprox:
    """The evaluable family z -> sum_m n^{-m/2} A_{m,z} up to `order`.

    `coeff_values` exposes the scalar coefficient functions on a z grid so
    bulk evaluation (verification sweeps) can combine them with the
    projector matrices without re-deriving anything per z.
    """

    order: int
    n: int
    sigma: float
    cumulants: np.ndarray
    proj_derivs: tuple

    @property
    def d(self) -> int:
        return self.proj_derivs[0].shape[0]

    @property
    def terms(self):
        """List of functions z -> n^{-m/2} A_{m,z}, m = 0..order."""
        return [
            (lambda m: (lambda z: self.term(m, z)))(m)
            for m in range(self.order + 1)
        ]

    def coeff_values(self, m: int, zs) -> np.ndarray:
        """Coefficients c_{m,j}(z) with term_m(z) = n^{-m/2} sum_j c_{m,j} P1^(j).

        Shape (m+1, len(zs)); row j belongs to P1^(j).  For m = 0 the single
        row is the Gaussian CDF.
        """
        zs = np.atleast_1d(np.asarray(zs, dtype=float))
        if m == 0:
            return normal_cdf(zs)[None, :].copy()
        out = np.empty((m + 1, len(zs)))
        for j in range(m + 1):
            out[j] = coeff_a(j, m, zs, self.cumulants, self.sigma)
        return out

    def term(self, m: int, z: float) -> np.ndarray:
        """n^{-m/2} A_{m,z}."""
        if not 0 <= m <= self.order:
            raise ValueError(f"term order {m} outside 0..{self.order}")
        A = operator_A(m, z, self.proj_derivs, self.cumulants, self.sigma)
        return self.n ** (-m / 2.0) * A

    def evaluate(self, z: float, order: int | None = None) -> np.ndarray:
        """Partial sum of the terms through `order` (default: all)."""
        order = self.order if order is None else order
        total = self.term(0, z)
        for m in range(1, order + 1):
            total = total + self.term(m, z)
        return total


def build_approx(summ: SpectralSummary, n: int, order: int) -> EdgeworthApprox:
    """Package the spectral summary as an evaluable expansion for length n."""
    if order < 0 or order > summ.order_k - 2:
        raise ValueError(
            f"order {order} needs cumulants through {order + 2}, "
            f"summary has {summ.order_k}"
        )
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    return EdgeworthApprox(order=order, n=int(n), sigma=summ.sigma,
                           cumulants=summ.cumulants_gamma,
                           proj_derivs=tuple(summ.proj_derivs[: order + 1]))


def edgeworth_cdf(spec, ss, summ: SpectralSummary, n: int, order: int,
                  z: float) -> np.ndarray:
    """Approximation to (P[S_n < z sigma sqrt(n), end = j | start = i])_ij."""
    if summ.proj_derivs[0].shape != (spec.d, spec.d):
        raise ValueError("summary dimension does not match the chain")
    return build_approx(summ, n, order).evaluate(z)


def scalar_expansion(summ: SpectralSummary, n: int, z):
    """Classical scalar first-order expansion
    N(z) + n^{-1/2} n(z) (gamma_3 / (6 sigma^3)) (1 - z^2)."""
    g3, s = summ.cumulants_gamma[3], summ.sigma
    return normal_cdf(z) + normal_pdf(z) * g3 / (6.0 * s**3) * (1.0 - np.asarray(z) ** 2) / np.sqrt(n)


# -- Fourier-domain cross-check ---------------------------------------------
#
# The Fourier-Stieltjes transform of z -> A_{m,z} must reproduce the
# frequency-domain form exp(-theta^2/2) sum_j ((i theta)^j / (j! sigma^j))
# freq_poly_{m-j}(i theta) P1^(j).  The forward transform below is computed by
# brute-force quadrature of the numerically differentiated z-domain
# coefficients, so it shares no algebra with the frequency-domain side and
# pins down every Hermite/normalization convention at once.

def _fs_transform_scalar(fun, theta: float, zmax: float, dz: float) -> complex:
    zs = np.arange(-zmax, zmax + dz / 2.0, dz)
    h = 1e-3
    dens = (-fun(zs + 2 * h) + 8 * fun(zs + h)
            - 8 * fun(zs - h) + fun(zs - 2 * h)) / (12.0 * h)
    vals = np.exp(1j * theta * zs) * dens
    return complex(simpson(vals.real, x=zs) + 1j * simpson(vals.imag, x=zs))


def operator_A_transform_numeric(m: int, theta: float, summ: SpectralSummary,
                                 zmax: float = 14.0, dz: float = 0.005) -> np.ndarray:
    """integral of exp(i theta z) dA_{m,z} by numerical differentiation
    and quadrature of the scalar coefficient functions."""
    P1 = summ.proj_derivs
    if m == 0:
        w = _fs_transform_scalar(lambda zz: ndtr(zz), theta, zmax, dz)
        return w * P1[0].astype(complex)
    out = np.zeros_like(P1[0], dtype=complex)
    for j in range(m + 1):
        w = _fs_transform_scalar(
            lambda zz: coeff_a(j, m, zz, summ.cumulants_gamma, summ.sigma),
            theta, zmax, dz)
        out += w * P1[j]
    return out


def operator_A_transform_theory(m: int, theta: float,
                                summ: SpectralSummary) -> np.ndarray:
    """Frequency-domain form of the order-m term."""
    it = 1j * theta
    out = np.zeros_like(summ.proj_derivs[0], dtype=complex)
    for j in range(m + 1):
        w = (it**j / (math.factorial(j) * summ.sigma**j)
             * freq_poly(m - j, it, summ.cumulants_gamma, summ.sigma))
        out += w * summ.proj_derivs[j]
    return np.exp(-theta**2 / 2.0) * out
