"""Pure-Python event loop; reference twin of ``_kernels.pyx``.

Both implementations consume the exponential draws in exactly the same
order, so for a given seed they return identical histograms.
"""

import bisect
import math

_EDGE_TOL = 1e-9


def next_position(k, j, n_bins, period_bins, dead_bins):
    """First (pulse, bin) at which the detector is armed again after a click in (k, j)."""
    if dead_bins <= 1.0:
        j += 1
        if j >= n_bins:
            return k + 1, 0
        return k, j
    off = j + dead_bins
    dk = int(math.floor(off / period_bins + _EDGE_TOL))
    b = int(math.ceil(off - dk * period_bins - _EDGE_TOL))
    if b < 0:
        b = 0
    if b >= n_bins:
        dk += 1
        b = 0
    return k + dk, b


def run_events(cum_hazard, n_pulses, period_bins, dead_bins, draws, counts, state):
    """Advance the detector through as many clicks as ``draws`` allows.

    Parameters
    ----------
    cum_hazard : sequence of float, length n_bins + 1
        Cumulative per-pulse hazard; ``cum_hazard[0] == 0``.
    n_pulses : int
        Total number of laser pulses in the acquisition.
    period_bins, dead_bins : float
        Pulse period and detector dead time, both in bin widths.
    draws : sequence of float
        Standard exponential variates; one is consumed per click attempt.
    counts : int64 array, length n_bins
        Histogram, updated in place.
    state : int64 array ``[pulse, bin]``
        Position at which the detector is next armed; updated in place.

    Returns
    -------
    (int, bool)
        Number of draws consumed and whether the acquisition finished.
    """
    c = list(cum_hazard)
    n_bins = len(c) - 1
    total = c[n_bins]
    k, b = int(state[0]), int(state[1])
    used = 0
    done = False
    if total <= 0.0:
        state[0], state[1] = n_pulses, 0
        return 0, True
    n_draws = len(draws)
    while True:
        if k >= n_pulses:
            done = True
            break
        if used >= n_draws:
            break
        e = float(draws[used])
        used += 1
        rem = total - c[b]
        if e >= rem:
            e -= rem
            k += 1
            skip = math.floor(e / total)
            k += int(skip)
            e -= skip * total
            while e >= total:
                e -= total
                k += 1
            b = 0
            if k >= n_pulses:
                done = True
                break
        target = c[b] + e
        j = bisect.bisect_right(c, target, b) - 1
        if j >= n_bins:
            j = n_bins - 1
        if j < b:
            j = b
        counts[j] += 1
        k, b = next_position(k, j, n_bins, period_bins, dead_bins)
    state[0], state[1] = k, b
    return used, done
