"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

The arithmetic is written operation-for-operation like the Cython source so
that both backends return bit-identical results.
"""

from __future__ import annotations

import numpy as np


def _hits(sx, sy, px, py, x1, y1, x2, y2) -> bool:
    if x1 == x2:
        c = x1
        if sx == px:
            if sx != c:
                return False
            return max(min(sy, py), y1) <= min(max(sy, py), y2)
        if (sx < c and px < c) or (sx > c and px > c):
            return False
        t = (c - sx) / (px - sx)
        yc = sy + t * (py - sy)
        return y1 <= yc <= y2
    c = y1
    if sy == py:
        if sy != c:
            return False
        return max(min(sx, px), x1) <= min(max(sx, px), x2)
    if (sy < c and py < c) or (sy > c and py > c):
        return False
    t = (c - sy) / (py - sy)
    xc = sx + t * (px - sx)
    return x1 <= xc <= x2


def step_one(sx, sy, ax, ay, dt, walls, bounds):
    sx, sy = float(sx), float(sy)
    px = min(max(sx + float(ax) * dt, bounds[0]), bounds[2])
    py = min(max(sy + float(ay) * dt, bounds[1]), bounds[3])
    dx = px - sx
    dy = py - sy
    wl = [tuple(float(v) for v in w) for w in walls]
    for _ in range(3):
        if dx == 0.0 and dy == 0.0:
            break
        hit_v = hit_h = False
        for x1, y1, x2, y2 in wl:
            if _hits(sx, sy, sx + dx, sy + dy, x1, y1, x2, y2):
                if x1 == x2:
                    hit_v = True
                else:
                    hit_h = True
        if not hit_v and not hit_h:
            break
        if hit_v:
            if dx == 0.0:
                dy = 0.0
            dx = 0.0
        if hit_h:
            if dy == 0.0:
                dx = 0.0
            dy = 0.0
    return sx + dx, sy + dy


def _hits_rows(sx, sy, px, py, wall):
    x1, y1, x2, y2 = (float(v) for v in wall)
    if x1 == x2:
        c, u0, u1, v0, v1, lo, hi = x1, sx, px, sy, py, y1, y2
    else:
        c, u0, u1, v0, v1, lo, hi = y1, sy, py, sx, px, x1, x2
    same = u0 == u1
    apart = ((u0 < c) & (u1 < c)) | ((u0 > c) & (u1 > c))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (c - u0) / (u1 - u0)
        vc = v0 + t * (v1 - v0)
    crossing = ~same & ~apart & (lo <= vc) & (vc <= hi)
    along = same & (u0 == c) & (np.maximum(np.minimum(v0, v1), lo) <= np.minimum(np.maximum(v0, v1), hi))
    return crossing | along


def step_batch(s, a, dt, walls, bounds):
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    sx, sy = s[:, 0], s[:, 1]
    px = np.minimum(np.maximum(sx + a[:, 0] * dt, bounds[0]), bounds[2])
    py = np.minimum(np.maximum(sy + a[:, 1] * dt, bounds[1]), bounds[3])
    dx = px - sx
    dy = py - sy
    walls = np.asarray(walls, dtype=np.float64).reshape(-1, 4)
    vertical = walls[:, 0] == walls[:, 2]
    for _ in range(3):
        moving = (dx != 0.0) | (dy != 0.0)
        if not moving.any():
            break
        hv = np.zeros(len(sx), dtype=bool)
        hh = np.zeros(len(sx), dtype=bool)
        for w, is_v in zip(walls, vertical):
            h = _hits_rows(sx, sy, sx + dx, sy + dy, w)
            if is_v:
                hv |= h
            else:
                hh |= h
        hv &= moving
        hh &= moving
        dy = np.where(hv & (dx == 0.0), 0.0, dy)
        dx = np.where(hv, 0.0, dx)
        dx = np.where(hh & (dy == 0.0), 0.0, dx)
        dy = np.where(hh, 0.0, dy)
    return np.stack([sx + dx, sy + dy], axis=1)


def segment_hits_any(s, p, walls):
    s = np.asarray(s, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros(len(s), dtype=bool)
    for w in np.asarray(walls, dtype=np.float64).reshape(-1, 4):
        out |= _hits_rows(s[:, 0], s[:, 1], p[:, 0], p[:, 1], w)
    return out


def cell_index(pts, lo, hi, res):
    pts = np.asarray(pts, dtype=np.float64)
    idx = np.zeros(len(pts), dtype=np.int64)
    for k in range(pts.shape[1]):
        v = (pts[:, k] - lo[k]) / (hi[k] - lo[k]) * res
        c = np.where(v > 0.0, np.minimum(v, res - 1), 0.0).astype(np.int64)
        c = np.where(v >= res, res - 1, c)
        idx = idx * res + c
    return idx


def last_writer(u, slots, beta, m):
    u = np.asarray(u, dtype=np.float64)
    slots = np.asarray(slots, dtype=np.int64)
    out = np.full(m, -1, dtype=np.int64)
    acc = np.flatnonzero(u < beta)
    np.maximum.at(out, slots[acc], acc)
    return out
