# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled simulation core: Philox4x64-10 stream plus fused walk /
local-time kernels.  Bit-compatible with the pure-numpy backend in
``_kernel_py`` (same raw stream, same consumption order, same packing).
"""

from libc.stdint cimport INT64_MIN, int32_t, int64_t, uint64_t
from libcpp.vector cimport vector

import numpy as np

cdef extern from *:
    ctypedef unsigned long long u128 "__uint128_t"

cdef uint64_t M0 = <uint64_t>0xD2E7470EE14C6C93
cdef uint64_t M1 = <uint64_t>0xCA5A826395121157
cdef uint64_t W0 = <uint64_t>0x9E3779B97F4A7C15
cdef uint64_t W1 = <uint64_t>0xBB67AE8584CAA73B

cdef double U53 = 1.0 / 9007199254740992.0

cdef int64_t PACK_OFFSET = <int64_t>1 << 20
cdef int PACK_BITS = 21

cdef int64_t EMPTY_KEY = INT64_MIN


cdef struct FlatMap:
    # open-addressing site->count table; packed keys are non-negative,
    # so INT64_MIN marks empty slots.  Sized for <= 50% load (a walk of
    # n steps touches at most n+1 sites).
    vector[int64_t] keys
    vector[int32_t] vals
    uint64_t mask


cdef inline void flat_init(FlatMap* m, int64_t expected) nogil:
    cdef uint64_t cap = 64
    while cap < <uint64_t>(2 * expected + 16):
        cap <<= 1
    m.keys.assign(cap, EMPTY_KEY)
    m.vals.assign(cap, 0)
    m.mask = cap - 1


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline int32_t flat_increment(FlatMap* m, int64_t key) nogil:
    cdef uint64_t h = mix64(<uint64_t>key) & m.mask
    while True:
        if m.keys[h] == EMPTY_KEY:
            m.keys[h] = key
            m.vals[h] = 1
            return 1
        if m.keys[h] == key:
            m.vals[h] += 1
            return m.vals[h]
        h = (h + 1) & m.mask


cdef struct Philox:
    uint64_t c0, c1, c2, c3
    uint64_t k0, k1
    uint64_t buf[4]
    int pos


cdef inline void philox_block(Philox* s) nogil:
    cdef uint64_t x0 = s.c0, x1 = s.c1, x2 = s.c2, x3 = s.c3
    cdef uint64_t k0 = s.k0, k1 = s.k1
    cdef uint64_t hi0, lo0, hi1, lo1
    cdef u128 p
    cdef int r
    for r in range(10):
        p = (<u128>M0) * (<u128>x0)
        hi0 = <uint64_t>(p >> 64)
        lo0 = <uint64_t>p
        p = (<u128>M1) * (<u128>x2)
        hi1 = <uint64_t>(p >> 64)
        lo1 = <uint64_t>p
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
        if r < 9:
            k0 = k0 + W0
            k1 = k1 + W1
    s.buf[0] = x0
    s.buf[1] = x1
    s.buf[2] = x2
    s.buf[3] = x3


cdef inline void philox_init(Philox* s, uint64_t k0, uint64_t k1) nogil:
    s.c0 = 0
    s.c1 = 0
    s.c2 = 0
    s.c3 = 0
    s.k0 = k0
    s.k1 = k1
    s.pos = 4


cdef inline uint64_t philox_next(Philox* s) nogil:
    if s.pos < 4:
        s.pos += 1
        return s.buf[s.pos - 1]
    s.c0 += 1
    if s.c0 == 0:
        s.c1 += 1
        if s.c1 == 0:
            s.c2 += 1
            if s.c2 == 0:
                s.c3 += 1
    philox_block(s)
    s.pos = 1
    return s.buf[0]


cdef inline int sample_one(Philox* s, int mode, int k,
                           const double* cum, const uint64_t* thresh,
                           const int64_t* alias) nogil:
    cdef double u
    cdef uint64_t r1, r2
    cdef int i
    if mode == 0:
        u = <double>(philox_next(s) >> 11) * U53
        i = 0
        while i < k - 1 and u >= cum[i]:
            i += 1
        return i
    r1 = philox_next(s)
    r2 = philox_next(s)
    i = <int>(r1 % <uint64_t>k)
    if r2 < thresh[i]:
        return i
    return <int>alias[i]


def philox_raw(uint64_t k0, uint64_t k1, Py_ssize_t n):
    """First ``n`` raw uint64 outputs for the given 128-bit key."""
    out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] mv = out
    cdef Philox st
    cdef Py_ssize_t i
    philox_init(&st, k0, k1)
    for i in range(n):
        mv[i] = philox_next(&st)
    return out


def simulate_local_times(int64_t[:, ::1] deltas, int mode, double[::1] cum,
                         uint64_t[::1] thresh, int64_t[::1] alias,
                         uint64_t k0, uint64_t k1, int64_t[::1] checkpoints):
    """Simulate one replica; snapshot the local-time histogram at each
    checkpoint.  Returns [(n, range, l_max, js, qs), ...].

    Caller guarantees d <= 3, checkpoints sorted strictly increasing and
    >= 1, and n_max * max_radius < 2**20 (packed-key bound).
    """
    cdef int k = deltas.shape[0]
    cdef int d = deltas.shape[1]
    cdef Py_ssize_t n_ck = checkpoints.shape[0]
    cdef int64_t n_max = checkpoints[n_ck - 1]

    cdef const double* cum_p = NULL
    cdef const uint64_t* thr_p = NULL
    cdef const int64_t* ali_p = NULL
    if cum.shape[0] > 0:
        cum_p = &cum[0]
    if thresh.shape[0] > 0:
        thr_p = &thresh[0]
    if alias.shape[0] > 0:
        ali_p = &alias[0]

    cdef Philox st
    philox_init(&st, k0, k1)

    cdef FlatMap counts
    cdef vector[int32_t] line  # dense site counts for d = 1
    cdef int64_t line_off = 0
    cdef vector[int64_t] hist
    hist.resize(2, 0)

    cdef vector[int64_t] ck_range, ck_lmax, ck_n
    cdef vector[vector[int64_t]] ck_hist

    cdef int64_t pos0 = 0, pos1 = 0, pos2 = 0
    cdef int64_t key, n = 0, nsites = 1, lmax = 1
    cdef int64_t radius = 0, r_abs
    cdef int32_t c
    cdef Py_ssize_t ick = 0, i_atom
    cdef int idx
    cdef vector[int64_t] snap

    for i_atom in range(k):
        r_abs = deltas[i_atom, 0]
        if r_abs < 0:
            r_abs = -r_abs
        if r_abs > radius:
            radius = r_abs

    with nogil:
        if d == 1:
            # positions stay within n_max * radius of the origin, so a
            # dense, cache-friendly count line beats any hash table
            line_off = n_max * radius
            line.assign(2 * line_off + 1, 0)
            line[line_off] = 1
        else:
            flat_init(&counts, n_max + 2)
            key = PACK_OFFSET + (PACK_OFFSET << PACK_BITS)
            if d > 2:
                key += PACK_OFFSET << (2 * PACK_BITS)
            flat_increment(&counts, key)
        hist[1] = 1  # S_0 = origin counts as one visit

        while ick < n_ck:
            while n < checkpoints[ick]:
                idx = sample_one(&st, mode, k, cum_p, thr_p, ali_p)
                pos0 += deltas[idx, 0]
                if d == 1:
                    line[pos0 + line_off] += 1
                    c = line[pos0 + line_off]
                else:
                    key = pos0 + PACK_OFFSET
                    pos1 += deltas[idx, 1]
                    key += (pos1 + PACK_OFFSET) << PACK_BITS
                    if d > 2:
                        pos2 += deltas[idx, 2]
                        key += (pos2 + PACK_OFFSET) << (2 * PACK_BITS)
                    c = flat_increment(&counts, key)
                if c == 1:
                    nsites += 1
                    hist[1] += 1
                else:
                    hist[c - 1] -= 1
                    if <size_t>c >= hist.size():
                        hist.resize(c + 1, 0)
                    hist[c] += 1
                    if c > lmax:
                        lmax = c
                n += 1
            # snapshot
            ck_n.push_back(n)
            ck_range.push_back(nsites)
            ck_lmax.push_back(lmax)
            snap.assign(hist.begin(), hist.end())
            ck_hist.push_back(snap)
            ick += 1

    out = []
    cdef Py_ssize_t i, j
    for i in range(n_ck):
        js = []
        qs = []
        for j in range(1, <Py_ssize_t>ck_hist[i].size()):
            if ck_hist[i][j] > 0:
                js.append(j)
                qs.append(ck_hist[i][j])
        out.append((int(ck_n[i]), int(ck_range[i]), int(ck_lmax[i]),
                    np.asarray(js, dtype=np.int64), np.asarray(qs, dtype=np.int64)))
    return out


def first_return_time(int64_t[:, ::1] deltas, int mode, double[::1] cum,
                      uint64_t[::1] thresh, int64_t[::1] alias,
                      uint64_t k0, uint64_t k1, int64_t horizon):
    """Index of the first return to the origin, or 0 if none by ``horizon``."""
    cdef int k = deltas.shape[0]
    cdef int d = deltas.shape[1]
    cdef const double* cum_p = NULL
    cdef const uint64_t* thr_p = NULL
    cdef const int64_t* ali_p = NULL
    if cum.shape[0] > 0:
        cum_p = &cum[0]
    if thresh.shape[0] > 0:
        thr_p = &thresh[0]
    if alias.shape[0] > 0:
        ali_p = &alias[0]

    cdef Philox st
    philox_init(&st, k0, k1)
    cdef int64_t pos0 = 0, pos1 = 0, pos2 = 0
    cdef int64_t n = 0, hit = 0
    cdef int idx
    with nogil:
        while n < horizon:
            idx = sample_one(&st, mode, k, cum_p, thr_p, ali_p)
            pos0 += deltas[idx, 0]
            if d > 1:
                pos1 += deltas[idx, 1]
            if d > 2:
                pos2 += deltas[idx, 2]
            n += 1
            if pos0 == 0 and pos1 == 0 and pos2 == 0:
                hit = n
                break
    return int(hit)
