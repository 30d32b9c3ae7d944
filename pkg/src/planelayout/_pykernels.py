"""Pure numpy implementations of the hot raster kernels.

These are the fallback for ``_ckernels`` and must produce bit-identical
results; the arithmetic is written in the same order as the Cython code.
"""
import numpy as np

NEAR_PARALLEL = 1e-8


def _crossings(xs, ys, height):
    """(rows, x) of every edge/scanline crossing under the half-open y rule."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    x0, y0 = xs, ys
    x1, y1 = np.roll(xs, -1), np.roll(ys, -1)
    # canonical endpoint order (by y, then x) so shared edges cross identically
    swap = (y1 < y0) | ((y1 == y0) & (x1 < x0))
    xa = np.where(swap, x1, x0)
    ya = np.where(swap, y1, y0)
    xb = np.where(swap, x0, x1)
    yb = np.where(swap, y0, y1)
    rows_all, x_all = [], []
    for k in range(len(xs)):
        if ya[k] == yb[k]:
            continue
        j0 = max(int(np.ceil(ya[k] - 0.5)), 0)
        j1 = min(int(np.ceil(yb[k] - 0.5)), height)
        if j1 <= j0:
            continue
        rows = np.arange(j0, j1)
        yc = rows + 0.5
        x = xa[k] + (yc - ya[k]) * (xb[k] - xa[k]) / (yb[k] - ya[k])
        rows_all.append(rows)
        x_all.append(x)
    if not rows_all:
        return np.empty(0, dtype=np.int64), np.empty(0)
    return np.concatenate(rows_all), np.concatenate(x_all)


def fill_polygon(xs, ys, height, width):
    """Pixel-center scanline fill (even-odd, top-left rule) -> uint8 mask."""
    rows, x = _crossings(xs, ys, height)
    toggles = np.zeros((height, width + 1), dtype=np.int32)
    if len(rows):
        s = np.clip(np.ceil(x - 0.5), 0, width).astype(np.int64)
        np.add.at(toggles, (rows, s), 1)
    inside = (np.cumsum(toggles, axis=1)[:, :width] & 1).astype(np.uint8)
    return inside


def zbuffer_polygon(xs, ys, normal, offset, fx, fy, cx, cy, pid, depth, labels):
    """Rasterize a planar polygon into ``depth``/``labels`` in place.

    Nearest z wins; equal z goes to the smaller id. ``labels == -1`` marks an
    empty pixel. Returns the number of pixels written.
    """
    height, width = depth.shape
    mask = fill_polygon(xs, ys, height, width).astype(bool)
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        return 0
    rx = ((cols + 0.5) - cx) / fx
    ry = ((rows + 0.5) - cy) / fy
    ndr = (normal[0] * rx + normal[1] * ry) + normal[2]
    ok = np.abs(ndr) >= NEAR_PARALLEL
    z = np.zeros_like(ndr)
    z[ok] = offset / ndr[ok]
    ok &= z > 0
    cur_l = labels[rows, cols]
    cur_d = depth[rows, cols]
    win = ok & ((cur_l < 0) | (z < cur_d) | ((z == cur_d) & (pid < cur_l)))
    depth[rows[win], cols[win]] = z[win]
    labels[rows[win], cols[win]] = pid
    return int(win.sum())


def min_fill_pass(depth, radius):
    """One dilation pass: each invalid (<= 0) pixel takes the minimum valid
    depth within a (2r+1)^2 window. Returns (new_depth, n_filled)."""
    height, width = depth.shape
    work = np.where(depth > 0, depth, np.inf)
    padded = np.pad(work, radius, constant_values=np.inf)
    best = np.full_like(work, np.inf)
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            np.minimum(best, padded[dy:dy + height, dx:dx + width], out=best)
    holes = ~(depth > 0)
    fill = holes & np.isfinite(best)
    out = depth.copy()
    out[fill] = best[fill]
    return out, int(fill.sum())
