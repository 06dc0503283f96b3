"""Deterministic path-simulation kernels.

Every path owns a counter-based random stream: the t-th variate is a
splitmix64-style hash of (stream key + t * golden), and the stream key is a
hash of (seed, start state, path index).  Results are therefore
bit-identical for fixed inputs no matter how work is scheduled or batched.

State transitions use per-row alias tables with 32-bit acceptance
thresholds; one 64-bit hash per step supplies both the slot choice (high
bits) and the acceptance uniform (low bits).

The hot loop is compiled with numba when importable; a vectorized numpy
fallback computes exactly the same bits, only slower.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_PATH_SALT = 0x632BE59BD9B4E019

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    _HAVE_NUMBA = False


def _mix64_int(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def stream_key(seed: int, start: int) -> int:
    """Base key of the (seed, start) family of path streams."""
    k = _mix64_int((seed & _MASK) + _GOLD)
    return _mix64_int(k ^ _mix64_int(start + _GOLD))


def build_alias(P: np.ndarray):
    """Vose alias tables per row, acceptance thresholds scaled to 2**32.

    Returns (thresh, alias) with thresh uint64 in [0, 2**32] and alias
    int64; a variate lands in slot k and is accepted when its low 32 bits
    fall below thresh[row, k], else it is redirected to alias[row, k].
    """
    d = P.shape[0]
    thresh = np.zeros((d, d), dtype=np.uint64)
    alias = np.zeros((d, d), dtype=np.int64)
    for i in range(d):
        pv = (P[i] * d).astype(float).copy()
        pr = np.ones(d)
        al = np.arange(d, dtype=np.int64)
        small = [j for j in range(d) if pv[j] < 1.0]
        large = [j for j in range(d) if pv[j] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            pr[s] = pv[s]
            al[s] = l
            pv[l] -= 1.0 - pv[s]
            (small if pv[l] < 1.0 else large).append(l)
        # leftovers carry probability 1 up to rounding
        thresh[i] = np.minimum(np.round(pr * 2.0**32), 2.0**32).astype(np.uint64)
        alias[i] = al
    return thresh, alias


def _simulate_numpy(start, key0, npaths, snaps, thresh, alias, fvals,
                    S_out, st_out):
    d = thresh.shape[0]
    flat_thresh = thresh.ravel()
    flat_alias = alias.ravel()
    p = np.arange(npaths, dtype=np.uint64)
    keys = p + np.uint64(_PATH_SALT)
    for shift, mult in ((30, 0xBF58476D1CE4E5B9), (27, 0x94D049BB133111EB)):
        keys = (keys ^ (keys >> np.uint64(shift))) * np.uint64(mult)
    keys ^= keys >> np.uint64(31)
    keys ^= np.uint64(key0)
    for shift, mult in ((30, 0xBF58476D1CE4E5B9), (27, 0x94D049BB133111EB)):
        keys = (keys ^ (keys >> np.uint64(shift))) * np.uint64(mult)
    keys ^= keys >> np.uint64(31)

    state = np.full(npaths, start, dtype=np.int64)
    S = np.zeros(npaths)
    isnap = 0
    nmax = int(snaps[-1])
    low_mask = np.uint64(0xFFFFFFFF)
    for t in range(1, nmax + 1):
        z = keys + np.uint64((t * _GOLD) & _MASK)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
        k = (((z >> np.uint64(32)) * np.uint64(d)) >> np.uint64(32)).astype(np.int64)
        cell = state * d + k
        accept = (z & low_mask) < flat_thresh[cell]
        state = np.where(accept, k, flat_alias[cell])
        S += fvals[state]
        if t == snaps[isnap]:
            S_out[isnap] = S
            st_out[isnap] = state
            isnap += 1


if _HAVE_NUMBA:
    _U64 = numba.uint64
    _I64 = numba.int64

    @numba.njit(cache=True, nogil=True)
    def _simulate_numba(start, key0, npaths, snaps, thresh, alias, fvals,
                        S_out, st_out):  # pragma: no cover - compiled
        d = _U64(thresh.shape[0])
        nsnap = len(snaps)
        for p in range(npaths):
            key = _U64(p) + _U64(0x632BE59BD9B4E019)
            key = (key ^ (key >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
            key = (key ^ (key >> _U64(27))) * _U64(0x94D049BB133111EB)
            key ^= key >> _U64(31)
            key ^= _U64(key0)
            key = (key ^ (key >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
            key = (key ^ (key >> _U64(27))) * _U64(0x94D049BB133111EB)
            key ^= key >> _U64(31)
            s = _I64(start)
            S = 0.0
            t0 = _I64(0)
            for isnap in range(nsnap):
                t1 = snaps[isnap]
                for t in range(t0 + 1, t1 + 1):
                    z = key + _U64(t) * _U64(0x9E3779B97F4A7C15)
                    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
                    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
                    z ^= z >> _U64(31)
                    k = _I64(((z >> _U64(32)) * d) >> _U64(32))
                    if (z & _U64(0xFFFFFFFF)) < thresh[s, k]:
                        s = k
                    else:
                        s = alias[s, k]
                    S += fvals[s]
                S_out[isnap, p] = S
                st_out[isnap, p] = s
                t0 = t1


def simulate_paths(start: int, seed: int, npaths: int, snaps, thresh, alias,
                   fvals):
    """Simulate npaths paths from `start`, recording (S_t, state_t) at the
    requested snapshot times.

    Returns (S_out, st_out) of shapes (len(snaps), npaths); snaps must be
    strictly increasing.  The same (seed, start, path, t) always yields the
    same variate, so a run to n = 1024 contains bit-identical n = 64 and
    n = 256 snapshots.
    """
    snaps = np.asarray(snaps, dtype=np.int64)
    if len(snaps) == 0 or np.any(np.diff(snaps) <= 0) or snaps[0] < 1:
        raise ValueError("snapshot times must be strictly increasing and >= 1")
    key0 = stream_key(seed, start)
    S_out = np.empty((len(snaps), npaths))
    st_out = np.empty((len(snaps), npaths), dtype=np.int64)
    fvals = np.ascontiguousarray(fvals, dtype=float)
    if _HAVE_NUMBA:
        _simulate_numba(start, np.uint64(key0), npaths, snaps, thresh, alias,
                        fvals, S_out, st_out)
    else:
        _simulate_numpy(start, key0, npaths, snaps, thresh, alias, fvals,
                        S_out, st_out)
    return S_out, st_out
