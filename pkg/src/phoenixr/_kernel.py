"""Compiled inner loops for the discrete SIR-with-revisits recurrence.

Both entry points perform the same floating-point operations in the same
order, so a batched run reproduces per-shock runs bit for bit.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _seen_prob(w, gamma):
    # P(at least one visit during an infection of 1/gamma windows)
    if gamma > 0.0:
        return 1.0 - math.exp(-w / gamma)
    return 1.0


@njit(cache=True)
def run_shock(S0, beta, gamma, omega, factor, offset, S, I, R, p, a):
    """Fill state and output arrays (length n) for one shock.

    ``factor`` is the periodic multiplier on the global window grid; local
    step ``tau`` reads ``factor[offset + tau]``. Returns the number of steps
    in which a flow had to be clamped.
    """
    n = S.shape[0]
    s = S0
    i = 1.0
    r = 0.0
    w = omega * factor[offset]
    S[0] = s
    I[0] = i
    R[0] = r
    p[0] = w * i
    a[0] = _seen_prob(w, gamma)
    clamps = 0
    for tau in range(1, n):
        new = beta * s * i
        rec = gamma * i
        clamped = False
        if new > s:
            new = s
            clamped = True
        if rec > i:
            rec = i
            clamped = True
        if clamped:
            clamps += 1
        s = s - new
        i = i + new - rec
        r = r + rec
        w = omega * factor[offset + tau]
        S[tau] = s
        I[tau] = i
        R[tau] = r
        p[tau] = w * i
        a[tau] = _seen_prob(w, gamma) * new
    return clamps


@njit(cache=True)
def batch_popularity(params, onsets, factor, out):
    """Superposed popularity for a batch of parameter sets.

    ``params`` has shape (B, K, 4) holding (S0, beta, gamma, omega) for K
    shocks; ``out`` (B, n) is overwritten. Returns clamp counts per row.
    """
    nb = params.shape[0]
    nk = params.shape[1]
    n = out.shape[1]
    clamps = np.zeros(nb, dtype=np.int64)
    for b in range(nb):
        for t in range(n):
            out[b, t] = 0.0
        for k in range(nk):
            onset = onsets[k]
            if onset >= n:
                continue
            S0 = params[b, k, 0]
            beta = params[b, k, 1]
            gamma = params[b, k, 2]
            omega = params[b, k, 3]
            s = S0
            i = 1.0
            w = omega * factor[onset]
            out[b, onset] += w * i
            for tau in range(1, n - onset):
                new = beta * s * i
                rec = gamma * i
                clamped = False
                if new > s:
                    new = s
                    clamped = True
                if rec > i:
                    rec = i
                    clamped = True
                if clamped:
                    clamps[b] += 1
                s = s - new
                i = i + new - rec
                w = omega * factor[onset + tau]
                out[b, onset + tau] += w * i
    return clamps
