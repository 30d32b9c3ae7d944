"""Layout evaluation: greedy polygon matching, IoU, pixel error, edge error
(symmetric Chamfer) and layout-depth RMSE."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .raster import rasterize_pixels, valid_depth


@dataclass
class Correspondences:
    pairs: list  # (gt id, pred id, iou)
    unmatched_gt: list
    unmatched_pred: list

    def as_dict(self):
        return {g: p for g, p, _ in self.pairs}


def _masks(polys, K):
    return {pid: rasterize_pixels(px, K) for pid, px in polys.items()}


def match_polygons(gt, pred, K):
    """Greedy one-to-one matching.

    ``gt`` and ``pred`` map polygon id to (n, 2) pixel coordinates. Ground
    truth polygons are visited by descending rasterized area (ties: smaller
    id) and take the remaining prediction of highest IoU; IoU must be
    positive and ties go to the smaller predicted id.
    """
    gm, pm = _masks(gt, K), _masks(pred, K)
    g_area = {g: int(m.sum()) for g, m in gm.items()}
    remaining = sorted(pm)
    pairs = []
    for g in sorted(gm, key=lambda g: (-g_area[g], g)):
        best, best_iou = None, 0.0
        for p in remaining:
            inter = np.count_nonzero(gm[g] & pm[p])
            if inter == 0:
                continue
            v = inter / np.count_nonzero(gm[g] | pm[p])
            if v > best_iou:
                best, best_iou = p, v
        if best is not None:
            pairs.append((g, best, float(best_iou)))
            remaining.remove(best)
    matched_g = {g for g, _, _ in pairs}
    return Correspondences(pairs, sorted(set(gm) - matched_g), remaining)


def iou_metric(corr, M, N):
    """(2 / (M + N)) * sum of matched IoUs."""
    if M + N == 0:
        raise ValueError("iou_metric needs at least one polygon")
    return 2.0 / (M + N) * math.fsum(v for _, _, v in corr.pairs)


def pixel_error(corr, gt_labels, pred_labels):
    """Fraction of labeled pixels whose gt and predicted polygons are not a
    matched pair. Pixels that are background in both maps are ignored; a
    pixel that is background in exactly one map is an error."""
    if gt_labels.shape != pred_labels.shape:
        raise ValueError("label maps differ in size")
    lut = corr.as_dict()
    expected = np.full(gt_labels.shape, -2, dtype=np.int64)
    for g, p in lut.items():
        expected[gt_labels == g] = p
    labeled = (gt_labels >= 0) | (pred_labels >= 0)
    n = int(labeled.sum())
    if n == 0:
        return 0.0
    wrong = labeled & (expected != pred_labels)
    return float(wrong.sum() / n)


def sample_boundary(pixels, step=1.0):
    """Points every ``step`` pixels along a closed polygon boundary."""
    pts = np.asarray(pixels, dtype=float)
    out = []
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        n = max(int(math.ceil(np.hypot(*(b - a)) / step)), 1)
        t = np.arange(n)[:, None] / n
        out.append(a + t * (b - a))
    return np.concatenate(out) if out else np.zeros((0, 2))


def _boundary(polys, step):
    pts = [sample_boundary(p, step) for p in polys]
    return np.concatenate(pts) if pts else np.zeros((0, 2))


def edge_error(gt, pred, K, step=1.0):
    """Symmetric Chamfer distance between sampled polygon boundaries.

    Returns ``(value, flag)``; when either side has no boundary the value is
    the image diagonal and ``flag`` is True.
    """
    a = _boundary(list(gt.values()) if isinstance(gt, dict) else gt, step)
    b = _boundary(list(pred.values()) if isinstance(pred, dict) else pred, step)
    if len(a) == 0 or len(b) == 0:
        return float(np.hypot(K.width, K.height)), True
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float((da.mean() + db.mean()) / 2.0), False


def lower_median(x):
    x = np.sort(np.asarray(x, dtype=float).ravel())
    return float(x[(len(x) - 1) // 2])


def rmse_depth(pred, gt, exclude=None):
    """Layout-depth RMSE over valid, non-excluded pixels, and the variant
    after scaling the prediction by median(gt) / median(pred)."""
    if pred.shape != gt.shape:
        raise ValueError("depth maps differ in size")
    sel = valid_depth(pred) & valid_depth(gt)
    if exclude is not None:
        sel &= ~np.asarray(exclude, dtype=bool)
    if not sel.any():
        raise ValueError("no pixels left to evaluate depth on")
    p, g = pred[sel], gt[sel]
    rmse = float(np.sqrt(np.mean((p - g) ** 2)))
    s = lower_median(g) / lower_median(p)
    uts = float(np.sqrt(np.mean((s * p - g) ** 2)))
    return rmse, uts


@dataclass
class MetricsReport:
    iou: float
    pe: float
    ee: float
    rmse: float
    rmse_uts: float | None = None
    ee_empty: bool = False
    pairs: list = field(default_factory=list)
    unmatched_gt: list = field(default_factory=list)
    unmatched_pred: list = field(default_factory=list)

    def to_dict(self):
        d = dict(self.__dict__)
        d["pairs"] = [{"gt": g, "pred": p, "iou": v} for g, p, v in self.pairs]
        return d


def evaluate(pred, gt, K, uts=False, exclude=None):
    """All metrics for a predicted Layout against a ground-truth Layout."""
    gp, pp = gt.projected(K), pred.projected(K)
    corr = match_polygons(gp, pp, K)
    gd, gl = gt.render(K)
    pd, pl = pred.render(K)
    ee, flag = edge_error(gp, pp, K)
    rmse, r_uts = rmse_depth(pd, gd, exclude)
    return MetricsReport(
        iou=iou_metric(corr, len(gp), len(pp)),
        pe=pixel_error(corr, gl, pl),
        ee=ee,
        rmse=rmse,
        rmse_uts=r_uts if uts else None,
        ee_empty=flag,
        pairs=corr.pairs,
        unmatched_gt=corr.unmatched_gt,
        unmatched_pred=corr.unmatched_pred,
    )
