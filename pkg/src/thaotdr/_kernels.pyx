# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for the Monte-Carlo trace simulator.

Mirrors ``_kernels_py.run_events`` statement for statement.
"""

from libc.math cimport floor, ceil

cdef double _EDGE_TOL = 1e-9


cdef inline Py_ssize_t _search(const double[::1] c, Py_ssize_t lo, Py_ssize_t hi,
                               double target) noexcept nogil:
    # largest j in [lo, hi) with c[j] <= target; c[lo] <= target holds on entry
    cdef Py_ssize_t mid
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if c[mid] <= target:
            lo = mid
        else:
            hi = mid
    return lo


def run_events(const double[::1] cum_hazard, long long n_pulses, double period_bins,
               double dead_bins, const double[::1] draws, long long[::1] counts,
               long long[::1] state):
    cdef Py_ssize_t n_bins = cum_hazard.shape[0] - 1
    cdef double total = cum_hazard[n_bins]
    cdef long long k = state[0]
    cdef Py_ssize_t b = <Py_ssize_t>state[1]
    cdef Py_ssize_t used = 0, n_draws = draws.shape[0], j
    cdef double e, rem, skip, target, off
    cdef long long dk
    cdef bint done = False
    if total <= 0.0:
        state[0] = n_pulses
        state[1] = 0
        return 0, True
    with nogil:
        while True:
            if k >= n_pulses:
                done = True
                break
            if used >= n_draws:
                break
            e = draws[used]
            used += 1
            rem = total - cum_hazard[b]
            if e >= rem:
                e -= rem
                k += 1
                skip = floor(e / total)
                k += <long long>skip
                e -= skip * total
                while e >= total:
                    e -= total
                    k += 1
                b = 0
                if k >= n_pulses:
                    done = True
                    break
            target = cum_hazard[b] + e
            j = _search(cum_hazard, b, n_bins + 1, target)
            if j >= n_bins:
                j = n_bins - 1
            if j < b:
                j = b
            counts[j] += 1
            if dead_bins <= 1.0:
                b = j + 1
                if b >= n_bins:
                    k += 1
                    b = 0
            else:
                off = j + dead_bins
                dk = <long long>floor(off / period_bins + _EDGE_TOL)
                b = <Py_ssize_t>ceil(off - dk * period_bins - _EDGE_TOL)
                if b < 0:
                    b = 0
                if b >= n_bins:
                    dk += 1
                    b = 0
                k += dk
    state[0] = k
    state[1] = b
    return used, done
