# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels (hot loops behind binpick.kernels).

Semantics must match _kernels_py exactly, including float expression order,
so both backends produce bit-identical integer results.
"""

from libc.math cimport floor, ceil, fabs

import numpy as np

BACKEND_NAME = "cython"

cdef int[8] RING_DR = [0, -1, -1, -1, 0, 1, 1, 1]
cdef int[8] RING_DC = [-1, -1, 0, 1, 1, 1, 0, -1]


def paint_disk(int[:, ::1] inst, int[:, ::1] sem, int item_id, int category,
               double cr, double cc, double r):
    cdef Py_ssize_t h = inst.shape[0], w = inst.shape[1]
    cdef Py_ssize_t r0 = <Py_ssize_t>floor(cr - r)
    cdef Py_ssize_t r1 = <Py_ssize_t>ceil(cr + r)
    cdef Py_ssize_t c0 = <Py_ssize_t>floor(cc - r)
    cdef Py_ssize_t c1 = <Py_ssize_t>ceil(cc + r)
    cdef Py_ssize_t i, j
    cdef double dr, dc
    if r0 < 0: r0 = 0
    if c0 < 0: c0 = 0
    if r1 > h - 1: r1 = h - 1
    if c1 > w - 1: c1 = w - 1
    for i in range(r0, r1 + 1):
        dr = <double>i - cr
        for j in range(c0, c1 + 1):
            dc = <double>j - cc
            if dr * dr + dc * dc <= r * r and inst[i, j] == 0:
                inst[i, j] = item_id
                sem[i, j] = category


def paint_convex_polygon(int[:, ::1] inst, int[:, ::1] sem, int item_id,
                         int category, double[::1] vrows, double[::1] vcols):
    cdef Py_ssize_t h = inst.shape[0], w = inst.shape[1]
    cdef Py_ssize_t n = vrows.shape[0]
    cdef double rmin = vrows[0], rmax = vrows[0], cmin = vcols[0], cmax = vcols[0]
    cdef Py_ssize_t k, i, j
    cdef double x1, y1, x2, y2, cross
    cdef bint inside
    for k in range(1, n):
        if vrows[k] < rmin: rmin = vrows[k]
        if vrows[k] > rmax: rmax = vrows[k]
        if vcols[k] < cmin: cmin = vcols[k]
        if vcols[k] > cmax: cmax = vcols[k]
    cdef Py_ssize_t r0 = <Py_ssize_t>floor(rmin)
    cdef Py_ssize_t r1 = <Py_ssize_t>ceil(rmax)
    cdef Py_ssize_t c0 = <Py_ssize_t>floor(cmin)
    cdef Py_ssize_t c1 = <Py_ssize_t>ceil(cmax)
    if r0 < 0: r0 = 0
    if c0 < 0: c0 = 0
    if r1 > h - 1: r1 = h - 1
    if c1 > w - 1: c1 = w - 1
    for i in range(r0, r1 + 1):
        for j in range(c0, c1 + 1):
            if inst[i, j] != 0:
                continue
            inside = True
            for k in range(n):
                x1 = vcols[k]; y1 = vrows[k]
                x2 = vcols[(k + 1) % n]; y2 = vrows[(k + 1) % n]
                cross = (x2 - x1) * (<double>i - y1) - (y2 - y1) * (<double>j - x1)
                if not cross >= 0.0:
                    inside = False
                    break
            if inside:
                inst[i, j] = item_id
                sem[i, j] = category


def flood_size(int[:, ::1] mask, int target, int sr, int sc):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    seen_arr = np.zeros((h, w), dtype=np.uint8)
    stack_arr = np.empty((h * w, 2), dtype=np.int32)
    cdef unsigned char[:, ::1] seen = seen_arr
    cdef int[:, ::1] stack = stack_arr
    cdef Py_ssize_t sp = 0
    cdef int count = 0, r, c, nr, nc, k
    stack[0, 0] = sr
    stack[0, 1] = sc
    sp = 1
    seen[sr, sc] = 1
    while sp > 0:
        sp -= 1
        r = stack[sp, 0]
        c = stack[sp, 1]
        count += 1
        for k in range(8):
            nr = r + RING_DR[k]
            nc = c + RING_DC[k]
            if 0 <= nr < h and 0 <= nc < w and seen[nr, nc] == 0 and mask[nr, nc] == target:
                seen[nr, nc] = 1
                stack[sp, 0] = nr
                stack[sp, 1] = nc
                sp += 1
    return count


def trace_boundary(int[:, ::1] mask, int target, int sr, int sc, int npixels,
                   int rmin, int cmin, int rmax, int cmax):
    """Moore-neighbor trace; stops at the first repeated (pixel, backtrack) state."""
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef int cap = 8 * npixels + 16
    out_arr = np.empty((cap + 1, 2), dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    # visited[(r, c, ring index of backtrack)] over the instance bbox, which
    # the walk cannot leave.
    cdef int pr0 = rmin, pc0 = cmin
    seen_arr = np.zeros((rmax - rmin + 1, cmax - cmin + 1, 8), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] seen = seen_arr
    cdef int cr = sr, cc = sc, br = sr, bc = sc - 1
    cdef int n = 1, it, k, j, pj, nr, nc, nbr, nbc, bidx, found
    out[0, 0] = sr
    out[0, 1] = sc
    seen[sr - pr0, sc - pc0, 0] = 1  # initial backtrack is W => ring index 0
    for it in range(cap):
        bidx = -1
        for k in range(8):
            if cr + RING_DR[k] == br and cc + RING_DC[k] == bc:
                bidx = k
                break
        found = 0
        for k in range(1, 9):
            j = (bidx + k) % 8
            nr = cr + RING_DR[j]
            nc = cc + RING_DC[j]
            if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] == target:
                pj = (j + 7) % 8
                nbr = cr + RING_DR[pj]
                nbc = cc + RING_DC[pj]
                found = 1
                break
        if found == 0:
            break
        # ring index of the new backtrack around the new current pixel
        bidx = -1
        for k in range(8):
            if nr + RING_DR[k] == nbr and nc + RING_DC[k] == nbc:
                bidx = k
                break
        if seen[nr - pr0, nc - pc0, bidx] != 0:
            break
        seen[nr - pr0, nc - pc0, bidx] = 1
        out[n, 0] = nr
        out[n, 1] = nc
        n += 1
        cr = nr; cc = nc; br = nbr; bc = nbc
    return out_arr[:n].copy()


def disk_hits_label(int[:, ::1] inst, double cr, double cc, double r):
    # pixels count as unit squares, matching the python backend
    cdef Py_ssize_t h = inst.shape[0], w = inst.shape[1]
    cdef Py_ssize_t r0 = <Py_ssize_t>floor(cr - r - 0.5)
    cdef Py_ssize_t r1 = <Py_ssize_t>ceil(cr + r + 0.5)
    cdef Py_ssize_t c0 = <Py_ssize_t>floor(cc - r - 0.5)
    cdef Py_ssize_t c1 = <Py_ssize_t>ceil(cc + r + 0.5)
    cdef Py_ssize_t i, j
    cdef double dr, dc
    if r0 < 0: r0 = 0
    if c0 < 0: c0 = 0
    if r1 > h - 1: r1 = h - 1
    if c1 > w - 1: c1 = w - 1
    for i in range(r0, r1 + 1):
        dr = fabs(<double>i - cr) - 0.5
        if dr < 0.0:
            dr = 0.0
        for j in range(c0, c1 + 1):
            dc = fabs(<double>j - cc) - 0.5
            if dc < 0.0:
                dc = 0.0
            if dr * dr + dc * dc <= r * r and inst[i, j] != 0:
                return True
    return False


def annulus_label_count(int[:, ::1] inst, double cr, double cc,
                        double r_in, double r_out):
    cdef Py_ssize_t h = inst.shape[0], w = inst.shape[1]
    cdef Py_ssize_t r0 = <Py_ssize_t>floor(cr - r_out)
    cdef Py_ssize_t r1 = <Py_ssize_t>ceil(cr + r_out)
    cdef Py_ssize_t c0 = <Py_ssize_t>floor(cc - r_out)
    cdef Py_ssize_t c1 = <Py_ssize_t>ceil(cc + r_out)
    cdef Py_ssize_t i, j
    cdef double dr, dc, d2
    cdef int count = 0
    if r0 < 0: r0 = 0
    if c0 < 0: c0 = 0
    if r1 > h - 1: r1 = h - 1
    if c1 > w - 1: c1 = w - 1
    for i in range(r0, r1 + 1):
        dr = <double>i - cr
        for j in range(c0, c1 + 1):
            dc = <double>j - cc
            d2 = dr * dr + dc * dc
            if d2 >= r_in * r_in and d2 <= r_out * r_out and inst[i, j] != 0:
                count += 1
    return count
