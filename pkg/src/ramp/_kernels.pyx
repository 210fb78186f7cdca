# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: maze collision stepping, grid binning, buffer replacement.

Semantics must stay identical to ``ramp._kernels_py``; the test suite runs
both backends against the same cases.
"""

import numpy as np


cdef inline double _clamp(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline bint _hits(double sx, double sy, double px, double py,
                       double x1, double y1, double x2, double y2) nogil:
    # walls are axis-aligned with x1 <= x2, y1 <= y2 (normalised on load)
    cdef double t, c
    if x1 == x2:
        c = x1
        if sx == px:
            if sx != c:
                return False
            return max(min(sy, py), y1) <= min(max(sy, py), y2)
        if (sx < c and px < c) or (sx > c and px > c):
            return False
        t = (c - sx) / (px - sx)
        c = sy + t * (py - sy)
        return y1 <= c <= y2
    else:
        c = y1
        if sy == py:
            if sy != c:
                return False
            return max(min(sx, px), x1) <= min(max(sx, px), x2)
        if (sy < c and py < c) or (sy > c and py > c):
            return False
        t = (c - sy) / (py - sy)
        c = sx + t * (px - sx)
        return x1 <= c <= x2


cdef inline void _step(double sx, double sy, double ax, double ay, double dt,
                       const double[:, ::1] walls, const double[::1] bounds,
                       double* outx, double* outy) nogil:
    cdef double px = _clamp(sx + ax * dt, bounds[0], bounds[2])
    cdef double py = _clamp(sy + ay * dt, bounds[1], bounds[3])
    cdef double dx = px - sx
    cdef double dy = py - sy
    cdef Py_ssize_t w, it
    cdef bint hit_v, hit_h
    for it in range(3):
        if dx == 0.0 and dy == 0.0:
            break
        hit_v = False
        hit_h = False
        for w in range(walls.shape[0]):
            if _hits(sx, sy, sx + dx, sy + dy, walls[w, 0], walls[w, 1], walls[w, 2], walls[w, 3]):
                if walls[w, 0] == walls[w, 2]:
                    hit_v = True
                else:
                    hit_h = True
        if not hit_v and not hit_h:
            break
        # cancel the normal component; motion that is already purely
        # tangential and still touches the wall is cancelled entirely
        if hit_v:
            if dx == 0.0:
                dy = 0.0
            dx = 0.0
        if hit_h:
            if dy == 0.0:
                dx = 0.0
            dy = 0.0
    outx[0] = sx + dx
    outy[0] = sy + dy


def step_one(double sx, double sy, double ax, double ay, double dt,
             const double[:, ::1] walls, const double[::1] bounds):
    cdef double nx, ny
    _step(sx, sy, ax, ay, dt, walls, bounds, &nx, &ny)
    return nx, ny


def step_batch(const double[:, ::1] s, const double[:, ::1] a, double dt,
               const double[:, ::1] walls, const double[::1] bounds):
    cdef Py_ssize_t n = s.shape[0], i
    out = np.empty((n, 2), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            _step(s[i, 0], s[i, 1], a[i, 0], a[i, 1], dt, walls, bounds, &o[i, 0], &o[i, 1])
    return out


def segment_hits_any(const double[:, ::1] s, const double[:, ::1] p, const double[:, ::1] walls):
    """Per row, whether the closed segment s->p touches any wall."""
    cdef Py_ssize_t n = s.shape[0], i, w
    out = np.zeros(n, dtype=np.bool_)
    cdef unsigned char[::1] o = out.view(np.uint8)
    with nogil:
        for i in range(n):
            for w in range(walls.shape[0]):
                if _hits(s[i, 0], s[i, 1], p[i, 0], p[i, 1], walls[w, 0], walls[w, 1], walls[w, 2], walls[w, 3]):
                    o[i] = 1
                    break
    return out


def cell_index(const double[:, ::1] pts, const double[::1] lo, const double[::1] hi, long res):
    """Flat row-major cell index on a ``res**d`` grid; out-of-range points clamp to edge cells."""
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1], i, k
    cdef long idx, c
    cdef double v
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for i in range(n):
            idx = 0
            for k in range(d):
                v = (pts[i, k] - lo[k]) / (hi[k] - lo[k]) * res
                if not (v > 0.0):
                    c = 0
                elif v >= res:
                    c = res - 1
                else:
                    c = <long>v
                idx = idx * res + c
            o[i] = idx
    return out


def last_writer(const double[::1] u, const long long[::1] slots, double beta, long m):
    """Replay a sequence of Bernoulli(beta) accept/overwrite events.

    Row ``i`` is accepted when ``u[i] < beta`` and then overwrites slot
    ``slots[i]``.  Returns, per slot, the index of the last accepted row that
    wrote it, or -1.
    """
    cdef Py_ssize_t n = u.shape[0], i
    out = np.full(m, -1, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for i in range(n):
            if u[i] < beta:
                o[slots[i]] = i
    return out
