"""Training losses (differentiable) and evaluation metrics.

All gradients are forward differences over the valid region.  The EPI loss
is the image-gradient L1 loss applied to every epipolar plane image of both
orientations and averaged over slices.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ContractError, ShapeError


def _t(x):
    if isinstance(x, ad.Tensor):
        return x
    return ad.Tensor(np.asarray(getattr(x, "views", x)))


def _check_same(a, b, what):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def l1_loss(a, b):
    """Mean absolute difference."""
    a, b = _t(a), _t(b)
    _check_same(a, b, "l1_loss")
    return ad.mean(ad.absolute(ad.sub(a, b)))


def _grad_l1_axis(a, b, axis):
    return ad.mean(ad.absolute(ad.sub(ad.forward_diff(a, axis), ad.forward_diff(b, axis))))


def gradient_l1(a, b):
    """mean|Dx a - Dx b| + mean|Dy a - Dy b| over the last two axes."""
    a, b = _t(a), _t(b)
    _check_same(a, b, "gradient_l1")
    if a.ndim < 2 or min(a.shape[-2:]) < 2:
        raise ShapeError(f"gradient_l1 needs images of at least 2x2, got {a.shape}")
    return ad.add(_grad_l1_axis(a, b, a.ndim - 1), _grad_l1_axis(a, b, a.ndim - 2))


def epi_gradient_loss(pred, gt):
    """Mean over all EPI slices of the slice-wise gradient L1 loss.

    Horizontal slices (fixed v, y) span (u, x); vertical slices (fixed u, x)
    span (v, y).  All slices of one orientation share a size, so the mean
    over slices reduces to per-orientation means weighted by slice count.
    """
    p, g = _t(pred), _t(gt)
    _check_same(p, g, "epi_gradient_loss")
    if p.ndim != 4:
        raise ShapeError(f"epi_gradient_loss expects [U][V][H][W], got {p.shape}")
    U, V, H, W = p.shape
    if min(U, V, H, W) < 2:
        raise ShapeError(f"epi_gradient_loss needs every axis >= 2, got {p.shape}")
    horiz = ad.add(_grad_l1_axis(p, g, 0), _grad_l1_axis(p, g, 3))
    vert = ad.add(_grad_l1_axis(p, g, 1), _grad_l1_axis(p, g, 2))
    n_h, n_v = V * H, U * W
    return ad.add(ad.scale(horiz, n_h / (n_h + n_v)), ad.scale(vert, n_v / (n_h + n_v)))


def psnr(a, b, peak=1.0):
    """PSNR in dB; identical inputs give ``math.inf``."""
    a = np.asarray(getattr(a, "views", a), dtype=np.float64)
    b = np.asarray(getattr(b, "views", b), dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def mean_view_psnr(lf, gt):
    U, V = gt.angular_dims
    return float(np.mean([psnr(lf.views[u, v], gt.views[u, v]) for u in range(U) for v in range(V)]))


def format_psnr(value):
    return "" if value is None or math.isinf(value) else f"{value:.6f}"


def json_psnr(value):
    return None if value is None or math.isinf(value) else value


@dataclass
class PsnrTable:
    """Diagonal-view PSNR table: one row per view (i, i), one column per variant."""
    columns: list
    rows: list = field(default_factory=list)  # [(view_index, [psnr per column])]

    def column(self, name):
        j = self.columns.index(name)
        return [r[1][j] for r in self.rows]

    def column_mean(self, name):
        # infinite entries (exact reconstructions) are skipped
        vals = [v for v in self.column(name) if not math.isinf(v)]
        return float(np.mean(vals)) if vals else math.inf

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["view_index"] + list(self.columns))
            for idx, values in self.rows:
                writer.writerow([idx] + [format_psnr(v) for v in values])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [(int(r[0]), [math.inf if s == "" else float(s) for s in r[1:]]) for r in reader]
        return cls(header[1:], rows)


def diagonal_psnr_report(variants, lf_gt):
    """``variants`` maps name -> LightField (insertion order gives column order)."""
    U, V = lf_gt.angular_dims
    if U != V:
        raise ContractError(f"diagonal report needs a square angular grid, got {U}x{V}")
    for name, lf in variants.items():
        if lf.shape != lf_gt.shape:
            raise ShapeError(f"variant {name!r} has shape {lf.shape}, ground truth {lf_gt.shape}")
    table = PsnrTable(list(variants))
    for i in range(U):
        table.rows.append((i, [psnr(lf.views[i, i], lf_gt.views[i, i]) for lf in variants.values()]))
    return table
