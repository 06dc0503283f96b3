"""Ground truth for the expansion: exact and empirical joint laws of
(S_n, end state), and sup-error measurement of the approximations.

For lattice-valued observables the joint law is computed exactly by a
forward dynamic-programming recursion on the integer lattice.  For
non-lattice observables (the regime the CDF-level expansion actually covers)
a deterministic Monte-Carlo sampler provides the reference CDF together
with its Kolmogorov-Smirnov half-width.

All CDFs follow the strict-inequality convention P[S_n < x]: queries use
left searchsorted, so mass sitting exactly at x is excluded.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _simulate
from .chains import ChainSpec
from .errors import BudgetExceeded, GridMismatch, NotLattice
from .expansion import EdgeworthApprox

DP_CELL_BUDGET = int(1e8)
KS_HALF_WIDTH_95 = 1.36   # / sqrt(samples): 95% Kolmogorov-Smirnov band
DKW_HALF_WIDTH_99 = 1.63  # / sqrt(samples): 99% Dvoretzky-Kiefer-Wolfowitz


def default_z_grid() -> np.ndarray:
    """481 points on [-6, 6], step 0.025."""
    return np.linspace(-6.0, 6.0, 481)


def worker_count() -> int:
    """Thread cap for embarrassingly parallel sweeps (EDGEWORTH_THREADS)."""
    env = os.environ.get("EDGEWORTH_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def detect_span(f, tol: float = 1e-9, max_denom: int = 10**6):
    """Common span h with every f(j) an integer multiple of h.

    Euclidean reduction on the absolute values followed by a least-squares
    refit of h on the recovered integers.  Raises NotLattice when no such
    span exists within tolerance (or the multiples exceed max_denom).
    """
    f = np.asarray(f, dtype=float)
    scale = max(1.0, float(np.abs(f).max()))
    nz = np.abs(f[np.abs(f) > tol * scale])
    if len(nz) == 0:
        return 1.0, np.zeros(len(f), dtype=np.int64)
    g = 0.0
    for v in nz:
        a, b = max(g, v), min(g, v)
        while b > tol * scale:
            a, b = b, a % b
        g = a
    if g < tol * scale or np.abs(f).max() / g > max_denom:
        raise NotLattice("no common span within tolerance")
    c = np.round(f / g)
    g = float(np.dot(c, f) / np.dot(c, c))  # refit against float noise
    if np.abs(f - c * g).max() > tol * scale:
        raise NotLattice("observable values are not integer multiples of a span")
    return g, c.astype(np.int64)


@dataclass(frozen=True)
class LatticeLaw:
    """Exact joint law of (S_n, end state) for a lattice observable.

    mass[i, r, j] is P[S_n = (offset + r) h, end = j | start = i]; the row
    index r spans the reachable integer range after n steps.
    """

    n: int
    h: float
    offset: int
    mass: np.ndarray

    @property
    def d(self) -> int:
        return self.mass.shape[0]

    @property
    def samples(self):
        return None

    def support(self) -> np.ndarray:
        """The lattice values (offset + r) h carried by the rows."""
        return (self.offset + np.arange(self.mass.shape[1])) * self.h

    def cdf_grid(self, start: int, xs, cols) -> np.ndarray:
        """P[S_n < x, end in cols | start], vectorized over the sorted xs."""
        weights = self.mass[start][:, cols].sum(axis=1)
        cum = np.concatenate(([0.0], np.cumsum(weights)))
        idx = np.searchsorted(self.support(), np.asarray(xs, dtype=float),
                              side="left")
        return cum[idx]

    def atom_positions(self, start: int) -> np.ndarray:
        sup = self.support()
        present = self.mass[start].sum(axis=1) > 0
        return sup[present]


def dp_exact(spec: ChainSpec, n: int) -> LatticeLaw:
    """Exact joint law by forward recursion over the step count.

    S_n sums the observable over the states visited after the start, so a
    path contributes f at each of steps 1..n and nothing at step 0.

    Raises
    ------
    NotLattice
        If the observable has no common span.
    BudgetExceeded
        If the final table (starts x lattice range x states) would exceed
        1e8 cells.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    h, c = detect_span(spec.f)
    d = spec.d
    cmin, cmax = int(c.min()), int(c.max())
    span = cmax - cmin
    rows = n * span + 1
    if n * d * rows > DP_CELL_BUDGET:  # recursion touches ~n x d x range cells
        raise BudgetExceeded(
            f"DP recursion needs {n * d * rows:.3g} cells, budget {DP_CELL_BUDGET:.0g}"
        )
    shifts = c - cmin  # destination offset of a step into state j
    mass = np.zeros((d, rows, d))
    for start in range(d):
        cur = np.zeros((1, d))
        cur[0, start] = 1.0
        for t in range(n):
            nxt = np.zeros((t * span + span + 1, d))
            trans = cur @ spec.P
            for j in range(d):
                s = int(shifts[j])
                nxt[s:s + trans.shape[0], j] += trans[:, j]
            cur = nxt
        mass[start] = cur
    return LatticeLaw(n=n, h=float(h), offset=n * cmin, mass=mass)


def dp_moments(law: LatticeLaw, p: int, weights=None):
    """Exact raw power sums E[S_n^k | start], k = 1..p, per starting state.

    With `weights` also returns the weight-mixed power sums (pass the
    stationary distribution to get the stationary-start moments).
    """
    if not 1 <= p <= 6:
        raise ValueError(f"power {p} outside 1..6")
    vals = law.support()
    per_state = law.mass.sum(axis=2)  # (d, rows)
    powers = np.stack([vals**k for k in range(1, p + 1)])
    per_start = per_state @ powers.T  # (d, p)
    if weights is None:
        return per_start
    mixed = np.asarray(weights, dtype=float) @ per_start
    return per_start, mixed


@dataclass(frozen=True)
class EmpiricalLaw:
    """Monte-Carlo joint law of (S_n, end state), grouped per start.

    For each start the samples are stored sorted by (end state, S) as a
    float32 array plus the d+1 group boundaries; sums are accumulated in
    float64 and only stored in float32, which perturbs CDF queries by
    orders of magnitude less than the Monte-Carlo half-width.
    """

    n: int
    samples: int
    seed: int
    sums: tuple      # per start: float32 array of S, sorted within state groups
    bounds: tuple    # per start: int64 array of d+1 group boundaries

    @property
    def d(self) -> int:
        return len(self.sums)

    def cdf_grid(self, start: int, xs, cols) -> np.ndarray:
        """Empirical P[S_n < x, end in cols | start] over the query points."""
        xs = np.asarray(xs, dtype=np.float32)
        S = self.sums[start]
        b = self.bounds[start]
        counts = np.zeros(len(xs))
        for j in cols:
            seg = S[b[j]:b[j + 1]]
            counts += np.searchsorted(seg, xs, side="left")
        return counts / self.samples

    def all_sums(self, start: int) -> np.ndarray:
        """All S samples for a start (unordered across state groups)."""
        return self.sums[start]


def _group_sort(S: np.ndarray, states: np.ndarray, d: int):
    order = np.lexsort((S, states))
    s_sorted = S[order].astype(np.float32)
    bounds = np.searchsorted(states[order], np.arange(d + 1))
    return s_sorted, bounds.astype(np.int64)


def mc_sample_multi(spec: ChainSpec, ns, samples: int, seed: int) -> dict:
    """Empirical laws for several chain lengths from one set of paths.

    The counter-based streams make the n = a snapshot of a longer run
    bit-identical to a dedicated run with n = a, so the returned laws are
    each exact `samples`-path empirical laws, coupled across the ladder
    (common random numbers).
    """
    ns = sorted(set(int(n) for n in ns))
    if ns[0] < 1:
        raise ValueError("chain lengths must be >= 1")
    if samples < 1e4:
        raise ValueError(f"need >= 1e4 paths for stable tails, got {samples}")
    thresh, alias = _simulate.build_alias(spec.P)
    snaps = np.asarray(ns, dtype=np.int64)
    per_start = [None] * spec.d

    def run(start):
        S_out, st_out = _simulate.simulate_paths(start, seed, samples, snaps,
                                                 thresh, alias, spec.f)
        return [_group_sort(S_out[i], st_out[i], spec.d) for i in range(len(ns))]

    nthreads = worker_count()
    if nthreads > 1 and _simulate._HAVE_NUMBA and spec.d > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            for start, res in enumerate(pool.map(run, range(spec.d))):
                per_start[start] = res
    else:
        for start in range(spec.d):
            per_start[start] = run(start)

    out = {}
    for i, n in enumerate(ns):
        out[n] = EmpiricalLaw(
            n=n, samples=int(samples), seed=int(seed),
            sums=tuple(per_start[s][i][0] for s in range(spec.d)),
            bounds=tuple(per_start[s][i][1] for s in range(spec.d)),
        )
    return out


def mc_sample(spec: ChainSpec, n: int, samples: int, seed: int) -> EmpiricalLaw:
    """Empirical law of (S_n, end state) from `samples` paths per start."""
    return mc_sample_multi(spec, [n], samples, seed)[n]


@dataclass(frozen=True)
class SupErrorRow:
    """Sup errors of the partial sums of one expansion against one truth.

    sup_by_order[m] is the error of the order-m partial sum, maximized over
    starts, target sets (singletons and the full space) and the z grid;
    per_start_by_order keeps the per-start maxima and per_set_by_order the
    full (order, start, target set) breakdown.
    """

    n: int
    orders: tuple
    sup_by_order: np.ndarray
    per_start_by_order: np.ndarray  # (orders, d)
    per_set_by_order: np.ndarray    # (orders, d, d + 1); last target = full set
    scaled_by_order: np.ndarray     # sqrt(n) * sup
    mc_half_width: float            # 0 for exact truths
    z_points: int


def _target_sets(d: int):
    sets = [[j] for j in range(d)]
    sets.append(list(range(d)))
    return sets


def sup_error(approx: EdgeworthApprox, truth, z_grid=None,
              quantile_points: int = 20000) -> SupErrorRow:
    """Maximal CDF gap between expansion partial sums and the ground truth.

    The z grid is augmented per start with the truth's own support: sample
    quantiles for an empirical law, atom positions for a lattice law
    (both capped), so the supremum cannot fall between grid points.
    """
    if truth.n != approx.n:
        raise GridMismatch(f"truth has n = {truth.n}, approximation n = {approx.n}")
    d = approx.d
    if truth.d != d:
        raise GridMismatch(f"truth has d = {truth.d}, approximation d = {d}")
    base = default_z_grid() if z_grid is None else np.asarray(z_grid, dtype=float)
    scale = approx.sigma * math.sqrt(approx.n)
    sets = _target_sets(d)
    # T[j, s, i]: column sums of P1^(j) over target set s, per start row i
    jmax = approx.order
    T = np.stack([
        np.stack([Pd[:, cols].sum(axis=1) for cols in sets])
        for Pd in approx.proj_derivs
    ])
    n_orders = approx.order + 1
    per_set = np.zeros((n_orders, d, len(sets)))
    z_total = 0
    for start in range(d):
        if isinstance(truth, EmpiricalLaw):
            samples = truth.all_sums(start)
            take = min(quantile_points, len(samples))
            qs = np.quantile(samples, np.linspace(0.0, 1.0, take)) / scale
        else:
            qs = truth.atom_positions(start) / scale
            if len(qs) > 100000:
                qs = qs[:: len(qs) // 100000 + 1]
        zs = np.unique(np.concatenate([base, qs]))
        z_total = max(z_total, len(zs))
        truth_cdf = np.stack([truth.cdf_grid(start, zs * scale, cols)
                              for cols in sets])
        partial = np.zeros((len(sets), len(zs)))
        for m in range(n_orders):
            coefs = approx.coeff_values(m, zs) * approx.n ** (-m / 2.0)
            partial += np.einsum("jz,js->sz", coefs, T[: m + 1, :, start])
            per_set[m, start] = np.abs(truth_cdf - partial).max(axis=1)
    half = KS_HALF_WIDTH_95 / math.sqrt(truth.samples) if isinstance(truth, EmpiricalLaw) else 0.0
    per_start = per_set.max(axis=2)
    sup = per_start.max(axis=1)
    return SupErrorRow(
        n=approx.n,
        orders=tuple(range(n_orders)),
        sup_by_order=sup,
        per_start_by_order=per_start,
        per_set_by_order=per_set,
        scaled_by_order=math.sqrt(approx.n) * sup,
        mc_half_width=half,
        z_points=z_total,
    )


@dataclass
class VerificationReport:
    """Per-n sup errors with order-comparison and rate flags."""

    n_values: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def add(self, row: SupErrorRow):
        self.n_values.append(row.n)
        self.rows.append(row)

    def order_improves(self, lo: int = 0, hi: int = 1,
                       margin_factor: float = 2.0) -> bool:
        """Order-hi beats order-lo for every n and start, beyond the noise."""
        for row in self.rows:
            margin = margin_factor * row.mc_half_width
            gap = row.per_start_by_order[lo] - row.per_start_by_order[hi]
            if not np.all(gap > margin):
                return False
        return True

    def scaled_error_decreases(self, order: int = 1) -> bool:
        """sqrt(n) x (order-m sup error) strictly decreasing along the ladder."""
        vals = [row.scaled_by_order[order] for row in self.rows]
        return all(b < a for a, b in zip(vals, vals[1:]))
