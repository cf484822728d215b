"""Pure Python/numpy raster kernels.

Fallback backend used when the compiled extension is unavailable (or when
BINPICK_PURE=1). Every function here must produce results identical to its
_speedups counterpart: the float expressions are written in the same order
so the integer outputs match bit for bit.

Pixel convention: integer pixel coordinates are pixel centers, (row, col).
"""

import math

import numpy as np

BACKEND_NAME = "python"

# Clockwise (screen orientation, row down) Moore neighbor ring.
_RING = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_RING_INDEX = {off: i for i, off in enumerate(_RING)}


def paint_disk(inst, sem, item_id, category, cr, cc, r):
    """Label pixels whose center lies inside the disk; earlier labels win."""
    h, w = inst.shape
    r0 = max(int(math.floor(cr - r)), 0)
    r1 = min(int(math.ceil(cr + r)), h - 1)
    c0 = max(int(math.floor(cc - r)), 0)
    c1 = min(int(math.ceil(cc + r)), w - 1)
    if r0 > r1 or c0 > c1:
        return
    rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None]
    cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :]
    hit = (rows - cr) * (rows - cr) + (cols - cc) * (cols - cc) <= r * r
    window = inst[r0 : r1 + 1, c0 : c1 + 1]
    sel = hit & (window == 0)
    window[sel] = item_id
    sem[r0 : r1 + 1, c0 : c1 + 1][sel] = category


def paint_convex_polygon(inst, sem, item_id, category, vrows, vcols):
    """Label pixels inside a convex polygon (CCW with x=col, y=row)."""
    h, w = inst.shape
    n = len(vrows)
    r0 = max(int(math.floor(vrows.min())), 0)
    r1 = min(int(math.ceil(vrows.max())), h - 1)
    c0 = max(int(math.floor(vcols.min())), 0)
    c1 = min(int(math.ceil(vcols.max())), w - 1)
    if r0 > r1 or c0 > c1:
        return
    rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None]
    cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :]
    inside = np.ones((r1 - r0 + 1, c1 - c0 + 1), dtype=bool)
    for k in range(n):
        x1, y1 = vcols[k], vrows[k]
        x2, y2 = vcols[(k + 1) % n], vrows[(k + 1) % n]
        cross = (x2 - x1) * (rows - y1) - (y2 - y1) * (cols - x1)
        inside &= cross >= 0.0
    window = inst[r0 : r1 + 1, c0 : c1 + 1]
    sel = inside & (window == 0)
    window[sel] = item_id
    sem[r0 : r1 + 1, c0 : c1 + 1][sel] = category


def flood_size(mask, target, sr, sc):
    """Size of the 8-connected component of `target` pixels containing (sr, sc)."""
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=bool)
    stack = [(sr, sc)]
    seen[sr, sc] = True
    count = 0
    while stack:
        r, c = stack.pop()
        count += 1
        for dr, dc in _RING:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] and mask[nr, nc] == target:
                seen[nr, nc] = True
                stack.append((nr, nc))
    return count


def trace_boundary(mask, target, sr, sc, npixels, rmin, cmin, rmax, cmax):
    """Moore-neighbor boundary trace from (sr, sc); returns (N, 2) int32 array.

    (sr, sc) must be the lexicographically smallest labeled pixel, so its
    west neighbor is guaranteed unlabeled. The bbox args size the compiled
    backend's visited-state table; they are unused here.
    """
    h, w = mask.shape

    def labeled(r, c):
        return 0 <= r < h and 0 <= c < w and mask[r, c] == target

    start = (sr, sc)
    back = (sr, sc - 1)
    points = [start]
    seen_states = {(start, back)}
    cur = start
    cap = 8 * npixels + 16
    for _ in range(cap):
        bidx = _RING_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        nxt = None
        for k in range(1, 9):
            j = (bidx + k) % 8
            nr, nc = cur[0] + _RING[j][0], cur[1] + _RING[j][1]
            if labeled(nr, nc):
                pj = (j + 7) % 8
                nxt = (nr, nc)
                nback = (cur[0] + _RING[pj][0], cur[1] + _RING[pj][1])
                break
        if nxt is None:
            break  # isolated pixel; caller rejects < 3 px instances anyway
        if (nxt, nback) in seen_states:
            break
        seen_states.add((nxt, nback))
        points.append(nxt)
        cur, back = nxt, nback
    return np.array(points, dtype=np.int32)


def disk_hits_label(inst, cr, cc, r):
    """True if any labeled pixel, taken as a unit square, comes within r of
    (cr, cc). Square extent keeps the check conservative against sub-pixel
    geometry that the label map cannot represent."""
    h, w = inst.shape
    r0 = max(int(math.floor(cr - r - 0.5)), 0)
    r1 = min(int(math.ceil(cr + r + 0.5)), h - 1)
    c0 = max(int(math.floor(cc - r - 0.5)), 0)
    c1 = min(int(math.ceil(cc + r + 0.5)), w - 1)
    if r0 > r1 or c0 > c1:
        return False
    rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None]
    cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :]
    dr = np.maximum(np.abs(rows - cr) - 0.5, 0.0)
    dc = np.maximum(np.abs(cols - cc) - 0.5, 0.0)
    hit = dr * dr + dc * dc <= r * r
    return bool((hit & (inst[r0 : r1 + 1, c0 : c1 + 1] != 0)).any())


def annulus_label_count(inst, cr, cc, r_in, r_out):
    """Count labeled pixel centers with r_in <= distance <= r_out from (cr, cc)."""
    h, w = inst.shape
    r0 = max(int(math.floor(cr - r_out)), 0)
    r1 = min(int(math.ceil(cr + r_out)), h - 1)
    c0 = max(int(math.floor(cc - r_out)), 0)
    c1 = min(int(math.ceil(cc + r_out)), w - 1)
    if r0 > r1 or c0 > c1:
        return 0
    rows = np.arange(r0, r1 + 1, dtype=np.float64)[:, None]
    cols = np.arange(c0, c1 + 1, dtype=np.float64)[None, :]
    d2 = (rows - cr) * (rows - cr) + (cols - cc) * (cols - cc)
    band = (d2 >= r_in * r_in) & (d2 <= r_out * r_out)
    return int((band & (inst[r0 : r1 + 1, c0 : c1 + 1] != 0)).sum())
