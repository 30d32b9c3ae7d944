# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels. Same contracts and arithmetic order as
``_pykernels``; results must match bit for bit."""
import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, fabs, INFINITY

cnp.import_array()

cdef double NEAR_PARALLEL = 1e-8


cdef int _scan_row(double[:] xs, double[:] ys, int n, double yc, int width,
                   int[:] toggles) noexcept nogil:
    """Accumulate toggle counts for one scanline; returns crossings found."""
    cdef int k, s, found = 0
    cdef double x0, y0, x1, y1, xa, ya, xb, yb, x, t
    for k in range(n):
        x0 = xs[k]
        y0 = ys[k]
        x1 = xs[(k + 1) % n]
        y1 = ys[(k + 1) % n]
        if y1 < y0 or (y1 == y0 and x1 < x0):
            xa = x1; ya = y1; xb = x0; yb = y0
        else:
            xa = x0; ya = y0; xb = x1; yb = y1
        if ya == yb:
            continue
        if not (ya <= yc and yc < yb):
            continue
        x = xa + (yc - ya) * (xb - xa) / (yb - ya)
        t = ceil(x - 0.5)
        if t < 0:
            s = 0
        elif t > width:
            s = width
        else:
            s = <int>t
        toggles[s] += 1
        found += 1
    return found


def fill_polygon(xs_in, ys_in, int height, int width):
    cdef double[:] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef double[:] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef int n = xs.shape[0]
    out_arr = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, :] out = out_arr
    toggles_arr = np.zeros(width + 1, dtype=np.int32)
    cdef int[:] toggles = toggles_arr
    cdef int j, i, parity
    with nogil:
        for j in range(height):
            if _scan_row(xs, ys, n, j + 0.5, width, toggles) == 0:
                continue
            parity = 0
            for i in range(width):
                parity = parity ^ (toggles[i] & 1)
                out[j, i] = parity
            for i in range(width + 1):
                toggles[i] = 0
    return out_arr


def zbuffer_polygon(xs_in, ys_in, normal, double offset, double fx, double fy,
                    double cx, double cy, int pid, double[:, :] depth, int[:, :] labels):
    cdef double[:] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef double[:] ys = np.ascontiguousarray(ys_in, dtype=np.float64)
    cdef int n = xs.shape[0]
    cdef int height = depth.shape[0]
    cdef int width = depth.shape[1]
    cdef double nx = normal[0], ny = normal[1], nz = normal[2]
    toggles_arr = np.zeros(width + 1, dtype=np.int32)
    cdef int[:] toggles = toggles_arr
    cdef int j, i, parity, written = 0, cur
    cdef double rx, ry, ndr, z, cd
    with nogil:
        for j in range(height):
            if _scan_row(xs, ys, n, j + 0.5, width, toggles) == 0:
                continue
            ry = ((j + 0.5) - cy) / fy
            parity = 0
            for i in range(width):
                parity = parity ^ (toggles[i] & 1)
                if not parity:
                    continue
                rx = ((i + 0.5) - cx) / fx
                ndr = (nx * rx + ny * ry) + nz
                if fabs(ndr) < NEAR_PARALLEL:
                    continue
                z = offset / ndr
                if not z > 0:
                    continue
                cur = labels[j, i]
                cd = depth[j, i]
                if cur < 0 or z < cd or (z == cd and pid < cur):
                    depth[j, i] = z
                    labels[j, i] = pid
                    written += 1
            for i in range(width + 1):
                toggles[i] = 0
    return written


def min_fill_pass(double[:, :] depth, int radius):
    cdef int height = depth.shape[0]
    cdef int width = depth.shape[1]
    out_arr = np.array(depth, dtype=np.float64, copy=True)
    cdef double[:, :] out = out_arr
    cdef int j, i, a, b, filled = 0
    cdef double best, v
    with nogil:
        for j in range(height):
            for i in range(width):
                if depth[j, i] > 0:
                    continue
                best = INFINITY
                for a in range(j - radius, j + radius + 1):
                    if a < 0 or a >= height:
                        continue
                    for b in range(i - radius, i + radius + 1):
                        if b < 0 or b >= width:
                            continue
                        v = depth[a, b]
                        if v > 0 and v < best:
                            best = v
                if best < INFINITY:
                    out[j, i] = best
                    filled += 1
    return out_arr, filled
