# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop; consumes the random stream exactly like _pycore.py.

PCG64 is stepped inline from its public state (written back afterwards); any
other bit generator goes through its C interface.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p
from libc.stdint cimport int64_t, uint64_t
from numpy.random cimport bitgen_t

cnp.import_array()

cdef extern from *:
    """
    typedef struct { __uint128_t state, inc; } pp_pcg;
    static inline uint64_t pp_next(pp_pcg* r) {
        const __uint128_t mult = (((__uint128_t)2549297995355413924ULL) << 64) | 4865540595714422341ULL;
        r->state = r->state * mult + r->inc;
        uint64_t v = (uint64_t)(r->state >> 64) ^ (uint64_t)r->state;
        unsigned rot = (unsigned)(r->state >> 122);
        return (v >> rot) | (v << ((-rot) & 63));
    }
    static inline void pp_set(pp_pcg* r, uint64_t sh, uint64_t sl, uint64_t ih, uint64_t il) {
        r->state = (((__uint128_t)sh) << 64) | sl;
        r->inc = (((__uint128_t)ih) << 64) | il;
    }
    static inline uint64_t pp_state_hi(pp_pcg* r) { return (uint64_t)(r->state >> 64); }
    static inline uint64_t pp_state_lo(pp_pcg* r) { return (uint64_t)r->state; }
    """
    ctypedef struct pp_pcg:
        pass
    uint64_t pp_next(pp_pcg* r) nogil
    void pp_set(pp_pcg* r, uint64_t sh, uint64_t sl, uint64_t ih, uint64_t il) nogil
    uint64_t pp_state_hi(pp_pcg* r) nogil
    uint64_t pp_state_lo(pp_pcg* r) nogil

BACKEND = "cython"

cdef double TWO_M53 = 1.0 / 9007199254740992.0
M64 = (1 << 64) - 1


cdef struct Stream:
    pp_pcg pcg
    bitgen_t* bg
    bint inline


cdef int _open(object bit_generator, Stream* s) except -1:
    if type(bit_generator) is np.random.PCG64:
        st = bit_generator.state["state"]
        pp_set(&s.pcg, st["state"] >> 64, st["state"] & M64, st["inc"] >> 64, st["inc"] & M64)
        s.inline = True
    else:
        s.bg = <bitgen_t*> PyCapsule_GetPointer(bit_generator.capsule, "BitGenerator")
        s.inline = False
    return 0


cdef int _close(object bit_generator, Stream* s) except -1:
    if s.inline:
        state = bit_generator.state
        state["state"]["state"] = (int(pp_state_hi(&s.pcg)) << 64) | int(pp_state_lo(&s.pcg))
        bit_generator.state = state
    return 0


cdef inline uint64_t _next(Stream* s) noexcept nogil:
    if s.inline:
        return pp_next(&s.pcg)
    return s.bg.next_uint64(s.bg.state)


cdef inline double _uniform(uint64_t raw) noexcept nogil:
    return (raw >> 11) * TWO_M53


cdef inline Py_ssize_t _category(uint64_t raw, const double* prob, const int64_t* alias,
                                 Py_ssize_t m) noexcept nogil:
    cdef double y = _uniform(raw) * m
    cdef Py_ssize_t j = <Py_ssize_t> y
    if y - j < prob[j]:
        return j
    return alias[j]


cdef inline Py_ssize_t _move(int64_t* x, Py_ssize_t n, Py_ssize_t i, bint right) noexcept nogil:
    """Move particle i; returns the displaced block length (0 if a right jump is blocked).

    Branch-light: after a right jump x[i+1] < x[i] still, so the push cascade below is
    a no-op; the first cascade step is done with conditional moves.
    """
    cdef Py_ssize_t im = i - 1 if i > 0 else 0
    cdef int64_t d = ((i == 0) | (x[im] > x[i] + 1)) if right else -1
    cdef Py_ssize_t j = i, ia
    cdef int64_t a, c
    x[i] += d
    a = j + 1 < n
    ia = j + 1 if a else j
    c = a & (x[ia] == x[j])
    x[ia] -= c
    j += c
    while j + 1 < n and x[j + 1] == x[j]:
        x[j + 1] -= 1
        j += 1
    return (j - i + 1) * (d != 0)


cdef inline Py_ssize_t _apply(int64_t* x, Py_ssize_t n, Py_ssize_t c) noexcept nogil:
    if c < n:
        return _move(x, n, c, True)
    return _move(x, n, c - n, False)


def advance(int64_t[::1] x, const double[::1] prob, const int64_t[::1] alias,
            Py_ssize_t n_events, object bitgen):
    cdef Stream s
    cdef Py_ssize_t n = x.shape[0], m = prob.shape[0], k, moved = 0
    with bitgen.lock:
        _open(bitgen, &s)
        with nogil:
            for k in range(n_events):
                moved += _apply(&x[0], n, _category(_next(&s), &prob[0], &alias[0], m)) != 0
        _close(bitgen, &s)
    return moved


cdef Py_ssize_t _uniform_loop(Stream* s, int64_t* x, Py_ssize_t n, Py_ssize_t lo,
                              double p_right, Py_ssize_t n_events) noexcept nogil:
    cdef Py_ssize_t k, i, moved = 0
    cdef Py_ssize_t active = n - lo
    cdef double y
    for k in range(n_events):
        y = _uniform(_next(s)) * active
        i = <Py_ssize_t> y
        moved += _move(x, n, lo + i, y - i < p_right) != 0
    return moved


def advance_uniform(int64_t[::1] x, Py_ssize_t lo, double p_right, Py_ssize_t n_events,
                    object bitgen):
    """Unit speeds on the active particles lo..n-1 (particle lo-1, if any, is frozen and
    acts as a wall): particle uniform, right move with probability p_right, one draw per event."""
    cdef Stream s
    cdef Py_ssize_t n = x.shape[0], moved
    with bitgen.lock:
        _open(bitgen, &s)
        with nogil:
            moved = _uniform_loop(&s, &x[0], n, lo, p_right, n_events)
        _close(bitgen, &s)
    return moved


def advance_epochs(int64_t[::1] x, const int64_t[::1] los, const int64_t[::1] counts,
                   double p_right, object bitgen):
    """advance_uniform over consecutive epochs; epoch k has active set los[k].. and counts[k] events."""
    cdef Stream s
    cdef Py_ssize_t n = x.shape[0], k, moved = 0
    with bitgen.lock:
        _open(bitgen, &s)
        with nogil:
            for k in range(los.shape[0]):
                moved += _uniform_loop(&s, &x[0], n, los[k], p_right, counts[k])
        _close(bitgen, &s)
    return moved


def run_logged(int64_t[::1] x, const double[::1] prob, const int64_t[::1] alias,
               double t0, double t_end, double total_rate, object bitgen):
    cdef Stream s
    cdef Py_ssize_t n = x.shape[0], m = prob.shape[0], c, b, cnt = 0
    cdef double t = t0
    cdef Py_ssize_t cap = 1024
    times = np.empty(cap, dtype=np.float64)
    parts = np.empty(cap, dtype=np.int64)
    dirs = np.empty(cap, dtype=np.int8)
    blocks = np.empty(cap, dtype=np.int64)
    cdef double[::1] tv = times
    cdef int64_t[::1] pv = parts, bv = blocks
    cdef signed char[::1] dv = dirs
    with bitgen.lock:
        _open(bitgen, &s)
        while True:
            t += -log1p(-_uniform(_next(&s))) / total_rate
            if t > t_end:
                break
            c = _category(_next(&s), &prob[0], &alias[0], m)
            b = _apply(&x[0], n, c)
            if b:
                if cnt == cap:
                    cap *= 2
                    times = np.resize(times, cap)
                    parts = np.resize(parts, cap)
                    dirs = np.resize(dirs, cap)
                    blocks = np.resize(blocks, cap)
                    tv, pv, dv, bv = times, parts, dirs, blocks
                tv[cnt] = t
                pv[cnt] = c if c < n else c - n
                dv[cnt] = 1 if c < n else -1
                bv[cnt] = b
                cnt += 1
        _close(bitgen, &s)
    return times[:cnt].copy(), parts[:cnt].copy(), dirs[:cnt].copy(), blocks[:cnt].copy()
