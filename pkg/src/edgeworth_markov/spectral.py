"""Spectral analysis of the tilted (characteristic) transition matrix.

The characteristic matrix M(theta) multiplies each transition into state j
by exp(i theta f(j)).  Its principal eigenvalue lambda(theta) plays the role
of a characteristic function: the Taylor coefficients of log lambda at 0 are
the cumulants gamma_m driving the expansion, and the derivatives of the
associated spectral projector supply the operator-valued coefficients.

Projector derivatives are obtained by trapezoidal contour integration of
resolvent products on a circle around 1; the trapezoid rule on a circle is
spectrally accurate for analytic integrands, so 256 nodes reach close to
machine precision for the chains treated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chains import ChainSpec, StationaryStructure, PsiBounds
from .errors import (
    BoundViolated,
    ComplexResidue,
    ContourTooClose,
    DegenerateVariance,
    EigenvalueCollision,
)

DEFAULT_NODES = 256
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class CharMatrix:
    """The tilted transition matrix M_ij = exp(i theta f(j)) p_ij."""

    theta: float
    M: np.ndarray


@dataclass(frozen=True)
class SpectralSummary:
    """Everything the expansion needs, computed once per chain.

    moment_mats[m] is the matrix with entries p_ij f(j)^m, proj_derivs[m]
    the m-th derivative (coefficient of (i theta)^m / m!) of the principal
    spectral projector at theta = 0, moments_mu[m] the m-th Taylor
    coefficient of lambda itself, and cumulants_gamma[m] the one of
    log lambda.  Arrays are indexed by order, entry 0 included.
    """

    order_k: int
    moment_mats: list
    proj_derivs: list
    moments_mu: np.ndarray
    cumulants_gamma: np.ndarray
    sigma: float


def _as_real(M: np.ndarray, what: str, tol: float = IMAG_TOL) -> np.ndarray:
    resid = float(np.max(np.abs(M.imag))) if np.iscomplexobj(M) else 0.0
    if resid > tol:
        raise ComplexResidue(f"{what}: imaginary residue {resid:.3g} > {tol:g}")
    return np.ascontiguousarray(M.real) if np.iscomplexobj(M) else M


def sup_norm(A: np.ndarray) -> float:
    """Operator norm induced by the sup norm: max absolute row sum."""
    return float(np.abs(A).sum(axis=1).max())


def char_matrix(spec: ChainSpec, theta: float) -> CharMatrix:
    """Tilted matrix M_ij = exp(i theta f(j)) p_ij."""
    M = spec.P * np.exp(1j * theta * spec.f)[None, :]
    return CharMatrix(theta=float(theta), M=M)


def principal_eig(cm: CharMatrix):
    """Principal eigenvalue and normalized left/right eigenvectors.

    The eigenvalue of largest modulus is selected (ties toward largest real
    part, continuing lambda(0) = 1).  Vectors are scaled so the left one
    sums to 1 and left . right = 1; at theta = 0 this reproduces (pi, ones).

    Raises
    ------
    EigenvalueCollision
        If the top two eigenvalue moduli are within 1e-9 of each other,
        i.e. theta is outside the perturbative regime.
    """
    w, vl, vr = scipy.linalg.eig(cm.M, left=True, right=True)
    moduli = np.abs(w)
    order = np.lexsort((-w.real, -moduli))
    top, second = order[0], order[1]
    if moduli[top] - moduli[second] < 1e-9:
        raise EigenvalueCollision(
            f"top eigenvalue moduli {moduli[top]:.12g} and {moduli[second]:.12g} "
            f"at theta = {cm.theta:g}"
        )
    lam = w[top]
    left = vl[:, top].conj()
    left = left / left.sum()
    right = vr[:, top]
    right = right / (left @ right)
    return lam, right, left


@dataclass(frozen=True)
class RadiusScan:
    """Spectral radius r(theta) over a frequency grid, with lattice flags."""

    thetas: np.ndarray
    radii: np.ndarray
    below_one_off_zero: bool  # r(theta) < 1 at every sampled theta != 0
    tail_max: float           # max r over the largest |theta| decade


def spectral_radius_scan(spec: ChainSpec, grid) -> RadiusScan:
    """Largest eigenvalue modulus of the tilted matrix per grid point."""
    thetas = np.asarray(grid, dtype=float)
    radii = np.array(
        [np.abs(np.linalg.eigvals(char_matrix(spec, t).M)).max() for t in thetas]
    )
    off = np.abs(thetas) > 0
    below = bool(np.all(radii[off] < 1.0 - 1e-12)) if off.any() else True
    amax = np.abs(thetas).max() if len(thetas) else 0.0
    tail = np.abs(thetas) >= amax / 10.0 if amax > 0 else off
    tail_max = float(radii[tail].max()) if tail.any() else float("nan")
    return RadiusScan(thetas=thetas, radii=radii,
                      below_one_off_zero=below, tail_max=tail_max)


@dataclass(frozen=True)
class CramerResult:
    """Tail estimate of |mu_f^(theta)|; heuristic for discrete observables.

    For a finitely supported mu_f the true limsup equals 1 (trigonometric
    polynomials are almost periodic), so `satisfied` is honest only as a
    desk-scale gate for discretized continuous observables.
    """

    limsup_estimate: float
    satisfied: bool


def cramer_check(spec: ChainSpec, tail_grid) -> CramerResult:
    """Estimate limsup |mu_f^(theta)| over a far-out frequency grid."""
    thetas = np.asarray(tail_grid, dtype=float)
    vals = np.abs(np.exp(1j * np.outer(thetas, spec.f)) @ spec.mu)
    est = float(vals.max())
    return CramerResult(limsup_estimate=est, satisfied=bool(est < 1.0 - 1e-6))


def moment_matrices(spec: ChainSpec, k: int) -> list:
    """Matrices P^(m) with entries p_ij f(j)^m for m = 0..k."""
    return [spec.P * (spec.f[None, :] ** m) for m in range(k + 1)]


def _contour_nodes(delta: float, n_nodes: int):
    t = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    ring = np.exp(1j * t)
    # (1/2 pi i) * closed integral == (delta/N) * sum of e^{it} F(1 + delta e^{it})
    return 1.0 + delta * ring, delta * ring / n_nodes


def _check_delta(delta, gamma_erg):
    gap = 1.0 - gamma_erg
    if delta is None:
        delta = gap / 3.0
    if not 0.0 < delta < gap:
        raise ContourTooClose(
            f"contour radius {delta:g} reaches the subdominant spectrum "
            f"(spectral gap {gap:g})"
        )
    return delta


def isolating_radius(M: np.ndarray) -> float:
    """Contour radius around 1 separating the principal eigenvalue of M from
    the rest of its spectrum: the midpoint of |lambda - 1| and the nearest
    other eigenvalue's distance to 1.

    Away from theta = 0 the principal eigenvalue drifts from 1, so the
    fixed small-radius default would leave it outside the contour.
    """
    w = np.linalg.eigvals(M)
    order = np.lexsort((-w.real, -np.abs(w)))
    inner = abs(w[order[0]] - 1.0)
    outer = float(np.abs(w[order[1:]] - 1.0).min())
    if inner >= outer:
        raise ContourTooClose(
            f"principal eigenvalue (|lam - 1| = {inner:.3g}) not separated "
            f"from the rest of the spectrum (nearest at {outer:.3g})"
        )
    return 0.5 * (inner + outer)


def proj_derivatives(spec: ChainSpec, ss: StationaryStructure, k: int,
                     delta: float | None = None,
                     n_nodes: int = DEFAULT_NODES) -> list:
    """Derivatives of the principal spectral projector at theta = 0.

    Returns the real matrices [Pi, P1^(1), ..., P1^(k)], where P1^(m) is the
    coefficient of (i theta)^m / m! in the projector's Maclaurin series.
    Each is the contour integral over the circle |zeta - 1| = delta of the
    sum over compositions (v_1, ..., v_l) of m with v_i >= 1 of

        R(zeta) P^(v_1)/v_1! R(zeta) ... P^(v_l)/v_l! R(zeta),

    times m!, with R the resolvent of P.  The compositions are accumulated
    by the recursion S_m = R * sum_v (P^(v)/v!) S_{m-v}, S_0 = R.

    Two float-precision measures: the observable is rescaled to unit size
    (results scale back by s^m), and conjugate contour nodes are folded so
    the accumulation is exactly real for real P.
    """
    if k < 2:
        raise ValueError(f"projector derivatives need k >= 2, got {k}")
    if n_nodes % 2:
        raise ValueError("node count must be even (conjugate node folding)")
    delta = _check_delta(delta, ss.gamma_erg)
    d = spec.d
    eye = np.eye(d)
    fscale = max(1.0, float(np.abs(spec.f).max()))
    unit = ChainSpec(d=d, P=spec.P, f=spec.f / fscale, mu=spec.mu)
    scaled = [None] + [M / math.factorial(m)
                       for m, M in enumerate(moment_matrices(unit, k)) if m >= 1]
    zetas, weights = _contour_nodes(delta, n_nodes)
    acc = [np.zeros((d, d)) for _ in range(k + 1)]
    for idx in range(n_nodes // 2 + 1):
        zeta, w = zetas[idx], weights[idx]
        fold = 1.0 if idx in (0, n_nodes // 2) else 2.0  # conjugate partner
        R = np.linalg.solve(zeta * eye - spec.P, eye.astype(complex))
        S = [R]
        for m in range(1, k + 1):
            mid = scaled[1] @ S[m - 1]
            for v in range(2, m + 1):
                mid += scaled[v] @ S[m - v]
            S.append(R @ mid)
        for m in range(k + 1):
            acc[m] += fold * (w * S[m]).real
    return [math.factorial(m) * fscale**m * acc[m] for m in range(k + 1)]


def contour_projector(M: np.ndarray, gamma_erg: float | None = None,
                      delta: float | None = None,
                      n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Spectral projector of the tilted matrix onto its principal eigenvalue.

    Direct contour integration of the resolvent of M(theta) over the circle
    |zeta - 1| = delta; valid while lambda(theta) stays inside the circle
    and the rest of the spectrum stays outside.  With neither gamma_erg nor
    delta given, the radius adapts to M's own spectrum.
    """
    if gamma_erg is not None:
        delta = _check_delta(delta, gamma_erg)
    elif delta is None:
        delta = isolating_radius(M)
    d = M.shape[0]
    eye = np.eye(d)
    zetas, weights = _contour_nodes(delta, n_nodes)
    out = np.zeros((d, d), dtype=complex)
    for zeta, w in zip(zetas, weights):
        out += w * np.linalg.solve(zeta * eye - M, eye.astype(complex))
    return out


def cumulants_from_moments(mu: np.ndarray) -> np.ndarray:
    """Taylor coefficients of log of a series from those of the series.

    Standard logarithm recursion: gamma_m = mu_m
    - sum_{j=1}^{m-1} C(m-1, j-1) gamma_j mu_{m-j}, with mu_0 = 1.
    """
    k = len(mu) - 1
    gamma = np.zeros(k + 1)
    for m in range(1, k + 1):
        g = mu[m]
        for j in range(1, m):
            g -= math.comb(m - 1, j - 1) * gamma[j] * mu[m - j]
        gamma[m] = g
    return gamma


def moments_and_cumulants(spec: ChainSpec, ss: StationaryStructure,
                          proj_derivs: list, k: int):
    """Taylor coefficients of lambda(theta) and log lambda(theta) at 0.

    mu_m comes from the eigenvalue recursion
        mu_m = sum_{v=1}^{m} C(m,v) pi P^(v) P1^(m-v) 1
             - sum_{v=2}^{m-2} C(m,v) mu_v lhat_{m-v},
    with lhat_j = pi P1^(j) 1 (the v = m-1 term drops because lhat_1 = 0).
    Cumulants follow by the logarithm recursion.
    """
    if len(proj_derivs) < k + 1:
        raise ValueError("projector derivatives not available to order k")
    Pm = moment_matrices(spec, k)
    one = np.ones(spec.d)
    lam_hat = np.array([float(ss.pi @ Pd @ one) for Pd in proj_derivs[: k + 1]])
    mu = np.zeros(k + 1)
    mu[0] = 1.0
    for m in range(1, k + 1):
        s = 0.0
        for v in range(1, m + 1):
            s += math.comb(m, v) * float(ss.pi @ Pm[v] @ proj_derivs[m - v] @ one)
        for v in range(2, m - 1):
            s -= math.comb(m, v) * mu[v] * lam_hat[m - v]
        mu[m] = s
    return mu, cumulants_from_moments(mu)


def spectral_summary(spec: ChainSpec, ss: StationaryStructure, k: int = 4,
                     delta: float | None = None,
                     n_nodes: int = DEFAULT_NODES) -> SpectralSummary:
    """Compute projector derivatives, moments and cumulants through order k."""
    if k < 3:
        raise ValueError(f"expansion machinery needs k >= 3, got {k}")
    P1 = proj_derivatives(spec, ss, k, delta=delta, n_nodes=n_nodes)
    mu, gamma = moments_and_cumulants(spec, ss, P1, k)
    if gamma[2] <= 1e-12:
        raise DegenerateVariance(f"gamma_2 = {gamma[2]:.3g} <= 1e-12")
    return SpectralSummary(order_k=k, moment_mats=moment_matrices(spec, k),
                           proj_derivs=P1, moments_mu=mu,
                           cumulants_gamma=gamma, sigma=float(np.sqrt(gamma[2])))


# Central difference stencils for the m-th derivative, lowest order,
# node offsets -w..w in units of h.
_FD_STENCILS = {
    1: ([-1, 0, 1], [-0.5, 0.0, 0.5]),
    2: ([-1, 0, 1], [1.0, -2.0, 1.0]),
    3: ([-2, -1, 0, 1, 2], [-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: ([-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0]),
    5: ([-3, -2, -1, 0, 1, 2, 3], [-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5]),
    6: ([-3, -2, -1, 0, 1, 2, 3], [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]),
}


def cumulant_crosscheck_fd(spec: ChainSpec, k: int, h: float = 1e-2,
                           richardson: bool = True) -> np.ndarray:
    """Cumulants from finite differences of log lambda(theta) at 0.

    A test oracle, independent of the contour machinery: evaluates the
    principal eigenvalue on a symmetric stencil and differentiates
    numerically.  With `richardson` the h and h/2 stencils are combined,
    which buys two extra orders of accuracy at no change in stencil shape.
    """
    if not 1e-3 <= h <= 1e-1:
        raise ValueError(f"step h = {h:g} outside [1e-3, 1e-1]")
    if not 1 <= k <= 6:
        raise ValueError(f"order k = {k} outside 1..6")

    cache = {}

    def g(theta):
        if theta not in cache:
            lam, _, _ = principal_eig(char_matrix(spec, theta))
            cache[theta] = np.log(lam)
        return cache[theta]

    def deriv(m, step):
        offs, coef = _FD_STENCILS[m]
        return sum(c * g(o * step) for o, c in zip(offs, coef)) / step**m

    gam = np.zeros(k + 1)
    for m in range(1, k + 1):
        dm = deriv(m, h)
        if richardson:
            dm2 = deriv(m, h / 2.0)
            dm = (4.0 * dm2 - dm) / 3.0  # cancel the O(h^2) stencil error
        gam[m] = (dm / 1j**m).real
    return gam


@dataclass(frozen=True)
class IterateBoundReport:
    """Outcome of the tilted-iterate contraction check."""

    theta: float
    n: int
    trials: int
    bound: float
    max_ratio: float


def iterate_bound_check(spec: ChainSpec, ss: StationaryStructure,
                        pb: PsiBounds, theta: float, n: int, trials: int,
                        seed: int = 0) -> IterateBoundReport:
    """Verify the contraction estimate for iterates of the tilted matrix.

    For every vector g with sup norm <= 1,
        ||M(theta)^n g||_sup <= (sqrt(1 - alpha^4/(2 beta)
                                      (1 - |mu_f^(theta)|^2)))^(n-1).
    Violation beyond 1e-9 relative indicates an implementation bug, since
    the estimate is a theorem under the two-sided density bounds.
    """
    M = char_matrix(spec, theta).M
    muf = complex(np.exp(1j * theta * spec.f) @ spec.mu)
    q = 1.0 - pb.alpha**4 / (2.0 * pb.beta) * (1.0 - abs(muf) ** 2)
    bound = float(np.sqrt(q) ** (n - 1))
    rng = np.random.default_rng(seed)
    max_ratio = 0.0
    for _ in range(trials):
        r = rng.uniform(0.0, 1.0, size=spec.d)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=spec.d)
        v = r * np.exp(1j * phase)
        for _ in range(n):
            v = M @ v
        max_ratio = max(max_ratio, float(np.abs(v).max()) / bound)
    if max_ratio > 1.0 + 1e-9:
        raise BoundViolated(
            f"iterate norm exceeded the contraction bound by factor {max_ratio:.12g} "
            f"at theta = {theta:g}, n = {n}"
        )
    return IterateBoundReport(theta=float(theta), n=n, trials=trials,
                              bound=bound, max_ratio=max_ratio)


def spectral_split_residual(spec: ChainSpec, ss: StationaryStructure,
                            theta: float, n_max: int,
                            delta: float | None = None,
                            n_nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Sup norms of M(theta)^n - lambda^n P1(theta) - (P^n - Pi), n = 1..n_max.

    The remainder of the three-part spectral split; it should decay like
    kappa^n |theta| with kappa = 1/3 + 2/3 gamma_erg.
    """
    cm = char_matrix(spec, theta)
    lam, _, _ = principal_eig(cm)
    P1 = contour_projector(cm.M, delta=delta, n_nodes=n_nodes)
    out = np.empty(n_max)
    Mn = np.eye(spec.d, dtype=complex)
    Pn = np.eye(spec.d)
    lam_n = 1.0 + 0.0j
    for n in range(1, n_max + 1):
        Mn = Mn @ cm.M
        Pn = Pn @ spec.P
        lam_n *= lam
        out[n - 1] = sup_norm(Mn - lam_n * P1 - (Pn - ss.Pi))
    return out


def projector_series_residual(spec: ChainSpec, ss: StationaryStructure,
                              proj_derivs: list, theta: float, k: int,
                              delta: float | None = None,
                              n_nodes: int = DEFAULT_NODES) -> float:
    """Sup norm of P1(theta) minus its degree-k Maclaurin polynomial."""
    cm = char_matrix(spec, theta)
    P1_direct = contour_projector(cm.M, delta=delta, n_nodes=n_nodes)
    series = sum((1j * theta) ** m / math.factorial(m) * proj_derivs[m]
                 for m in range(k + 1))
    return sup_norm(P1_direct - series)


def perturbative_threshold(spec: ChainSpec, theta_max: float = 4.0,
                           floor: float = 1e-12, max_halvings: int = 40) -> float:
    """Largest dyadic theta with a usable top-eigenvalue separation.

    Scans theta_max, theta_max/2, ... and returns the first frequency whose
    top-two eigenvalue modulus gap is at least ten times the quadrature
    error floor.  A numerical stand-in for the proof-level threshold, which
    is far smaller than necessary in practice.
    """
    theta = theta_max
    for _ in range(max_halvings):
        moduli = np.sort(np.abs(np.linalg.eigvals(char_matrix(spec, theta).M)))
        if moduli[-1] - moduli[-2] >= 10.0 * floor:
            return theta
        theta /= 2.0
    return theta
