"""Compiled inner loops for the Monte Carlo trials.

Both kernels consume a block of standard-normal draws of shape (slots, n),
advance the detector state in place and return how many slots they used.
They stop early once every requested stopping time has been observed.
Rule rows are ordered MAX, HALL, ALL; each rule has its own threshold so
several table rows can share one observation path.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def advance_distributed(noise, k0, change_time, means, sigma, scale, offset, cs,
                        stat, crossed, excursion, masks, active, taus, labels):
    n_slots = noise.shape[0]
    n = noise.shape[1]
    n_regions = masks.shape[0]
    for b in range(n_slots):
        k = k0 + b
        post = k >= change_time
        for s in range(n):
            x = sigma * noise[b, s]
            if post:
                x += means[s]
            v = stat[s] + scale * (x - offset)
            if v < 0.0:
                v = 0.0
            stat[s] = v
        done = True
        for r in range(3):
            if not active[r] or taus[r] != 0:
                continue
            c = cs[r]
            d = np.int64(0)
            for s in range(n):
                v = stat[s]
                if v >= c:
                    crossed[r, s] = True
                    excursion[r, s] = True
                elif v == 0.0:
                    excursion[r, s] = False
                if r == 0:
                    on = crossed[r, s]
                elif r == 1:
                    on = excursion[r, s]
                else:
                    on = v >= c
                if on:
                    d |= np.int64(1) << s
            for i in range(n_regions):
                if (masks[i] & d) == masks[i]:
                    taus[r] = k
                    labels[r] = i + 1
                    break
            if taus[r] == 0:
                done = False
        if done:
            return b + 1
    return n_slots


@njit(cache=True)
def advance_centralized(noise, k0, change_time, means, sigma, scale, offset, c,
                        members, w, out):
    """Matrix CUSUM: w[i, j] tracks hypothesis i+1 against j (j = 0 is no change)."""
    n_slots = noise.shape[0]
    n = noise.shape[1]
    n_regions = members.shape[0]
    z = np.empty(n)
    sums = np.zeros(n_regions + 1)
    for b in range(n_slots):
        k = k0 + b
        post = k >= change_time
        for s in range(n):
            x = sigma * noise[b, s]
            if post:
                x += means[s]
            z[s] = scale * (x - offset)
        for i in range(n_regions):
            acc = 0.0
            for s in range(n):
                if members[i, s]:
                    acc += z[s]
            sums[i + 1] = acc
        hit = 0
        for i in range(n_regions):
            lowest = np.inf
            si = sums[i + 1]
            for j in range(n_regions + 1):
                if j == i + 1:
                    continue
                v = w[i, j] + si - sums[j]
                if v < 0.0:
                    v = 0.0
                w[i, j] = v
                if v < lowest:
                    lowest = v
            if hit == 0 and lowest >= c:
                hit = i + 1
        if hit:
            out[0] = k
            out[1] = hit
            return b + 1
    return n_slots

