"""Evaluation artifacts: diagonal PSNR table, a line plot of it, and 16-bit
view exports laid out by filename.

Files written into ``out_dir``::

    diagonal_psnr.csv            view_index,<variant...>
    diagonal_psnr.png            PSNR of views (i, i) per variant
    central_{variant}.png        central view per stage (gt, bicubic, ahqrg, ttsr, lfrefine)
    topleft_{variant}.png        view (0, 0) per stage (gt, bicubic, ttsr, lfrefine)
"""

import math
import os

import numpy as np

from .lightfield import save_image16
from .losses import diagonal_psnr_report

VARIANTS = ("bicubic", "ttsr", "lfrefine")
CSV_NAME = "diagonal_psnr.csv"
PLOT_NAME = "diagonal_psnr.png"


def pipeline_variants(result):
    """Name -> LightField for the three evaluated stages, in report column order."""
    return {"bicubic": result.bicubic, "ttsr": result.ttsr, "lfrefine": result.refined}


def plot_diagonal_psnr(table, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5), dpi=100)
    try:
        for name in table.columns:
            idx = [r[0] for r in table.rows]
            # exact reconstructions have no finite PSNR; leave gaps
            vals = [np.nan if math.isinf(v) else v for v in table.column(name)]
            ax.plot(idx, vals, marker="o", label=name)
        ax.set_xlabel("diagonal view index i, view (i, i)")
        ax.set_ylabel("PSNR (dB)")
        ax.set_xticks([r[0] for r in table.rows])
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        # drop the software stamp so output bytes depend only on the data
        fig.savefig(path, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    return path


def emit_figure_data(out_dir, lf_gt, variants, reference=None, plot=True):
    """Write the report CSV, the plot and view exports; returns ``(table, paths)``.

    ``variants`` maps name -> LightField.  ``reference`` is the optional
    reference-generator output (only a central view exists for it).
    """
    os.makedirs(out_dir, exist_ok=True)
    table = diagonal_psnr_report(variants, lf_gt)
    paths = {"csv": os.path.join(out_dir, CSV_NAME)}
    table.to_csv(paths["csv"])
    if plot:
        paths["plot"] = plot_diagonal_psnr(table, os.path.join(out_dir, PLOT_NAME))

    central = {"gt": lf_gt.central_view}
    topleft = {"gt": lf_gt.views[0, 0]}
    for name, lf in variants.items():
        central[name] = lf.central_view
        topleft[name] = lf.views[0, 0]
    if reference is not None:
        central["ahqrg"] = np.asarray(reference)
    order = ("gt", "bicubic", "ahqrg", "ttsr", "lfrefine")
    central = {k: central[k] for k in sorted(central, key=lambda k: (order.index(k) if k in order else 99, k))}
    for name, img in central.items():
        paths[f"central_{name}"] = _export(out_dir, f"central_{name}.png", img)
    for name, img in topleft.items():
        paths[f"topleft_{name}"] = _export(out_dir, f"topleft_{name}.png", img)
    return table, paths


def _export(out_dir, name, img):
    path = os.path.join(out_dir, name)
    save_image16(np.clip(img, 0.0, 1.0), path)
    return path
