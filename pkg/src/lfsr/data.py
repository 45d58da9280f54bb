"""Synthetic textures and paired HR/LR training datasets.

Dataset layout::

    out/
      dataset.json           preparation settings
      sample_0/hr/           LF container, 7x7 x patch x patch
      sample_0/lr/           LF container, 7x7 x patch/factor x patch/factor
      sample_0/info.json     gamma, disparity, texture kind, crop offset
      ...
"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError, LoadError
from .lightfield import (
    LightField,
    is_lf_container,
    load_lf,
    save_lf,
    select_topleft_views,
    synth_lf,
)
from .resample import (
    bicubic_resize,
    degrade,
    draw_patch_offset,
    gamma_correct,
    sample_gamma,
)

TEXTURES = ("checker", "gradient", "noise")


def checker_texture(size, rng):
    cell = int(rng.integers(6, 13))
    lo, hi = rng.uniform(0.05, 0.35), rng.uniform(0.65, 0.95)
    oy, ox = rng.integers(0, 2 * cell, size=2)
    y, x = np.mgrid[0:size, 0:size]
    board = ((y + oy) // cell + (x + ox) // cell) % 2
    return np.where(board == 1, hi, lo)


def gradient_texture(size, rng):
    """Oriented linear ramp folded into a triangle wave (period 12 to 24 px)."""
    theta = rng.uniform(0, 2 * np.pi)
    period = rng.uniform(12, 24)
    a, b = rng.uniform(0.05, 0.35), rng.uniform(0.65, 0.95)
    y, x = np.mgrid[0:size, 0:size]
    t = (np.cos(theta) * x + np.sin(theta) * y) / period + rng.uniform(0, 1)
    return a + (b - a) * np.abs(2 * (t - np.floor(t)) - 1)


def noise_texture(size, rng):
    """White noise on a grid three times coarser, bicubically enlarged."""
    coarse_n = max(size // 3, 4)
    coarse = rng.uniform(0.1, 0.9, size=(coarse_n, coarse_n))
    return bicubic_resize(coarse, size, size)


def make_texture(kind, size, rng):
    if kind == "checker":
        return checker_texture(size, rng)
    if kind == "gradient":
        return gradient_texture(size, rng)
    if kind == "noise":
        return noise_texture(size, rng)
    raise ValueError(f"unknown texture kind {kind!r}")


@dataclass
class PrepareConfig:
    count: int = 8
    seed: int = 0
    synthetic: str = "mixed"  # checker | gradient | noise | mixed (cycles the three)
    patch: int = 128
    factor: int = 4
    source_size: int = 0  # synthetic texture size; 0 -> patch + 32
    views: int = 7
    gamma_min: float = 0.4
    gamma_max: float = 1.0
    disparity_min: float = 0.5
    disparity_max: float = 2.0

    def texture_kind(self, i):
        return TEXTURES[i % 3] if self.synthetic == "mixed" else self.synthetic


def prepare_sample(source_lf, rng, config, info=None):
    """Top-left views -> gamma -> random crop -> bicubic degrade.  Returns (hr, lr, info)."""
    info = dict(info or {})
    lf = select_topleft_views(source_lf, config.views)
    H, W = lf.spatial_dims
    if min(H, W) < config.patch:
        raise DimensionError(f"source is {H}x{W}, smaller than the {config.patch} patch")
    gamma = sample_gamma(rng, config.gamma_min, config.gamma_max)
    y0, x0 = draw_patch_offset(H, W, config.patch, rng)
    views = lf.views[:, :, y0:y0 + config.patch, x0:x0 + config.patch]
    hr = LightField(gamma_correct(views, gamma))
    lr = degrade(hr, config.factor)
    info.update(gamma=gamma, offset=[y0, x0])
    return hr, lr, info


def synthetic_source(kind, rng, config):
    size = config.source_size or config.patch + 32
    texture = make_texture(kind, size, rng)
    d = float(rng.uniform(config.disparity_min, config.disparity_max))
    n = config.views + 1
    return synth_lf(texture, d, n, n), {"texture": kind, "disparity": d}


def _list_sources(source):
    if is_lf_container(source):
        return [source]
    subdirs = sorted(os.path.join(source, d) for d in os.listdir(source))
    found = [d for d in subdirs if os.path.isdir(d) and is_lf_container(d)]
    if not found:
        raise LoadError(f"no light field containers under {source}")
    return found


def prepare_dataset(out_dir, config, source=None):
    """Write ``config.count`` HR/LR pairs to ``out_dir``; fully determined by ``config.seed``."""
    os.makedirs(out_dir, exist_ok=True)
    sources = _list_sources(source) if source else None
    seeds = np.random.SeedSequence(config.seed).spawn(config.count)
    for i in range(config.count):
        rng = np.random.default_rng(seeds[i])
        if sources is None:
            src, info = synthetic_source(config.texture_kind(i), rng, config)
        else:
            path = sources[i % len(sources)]
            src, info = load_lf(path), {"source": os.path.basename(os.path.normpath(path))}
        hr, lr, info = prepare_sample(src, rng, config, info)
        sample = os.path.join(out_dir, f"sample_{i}")
        save_lf(hr, os.path.join(sample, "hr"))
        save_lf(lr, os.path.join(sample, "lr"))
        _write_json(os.path.join(sample, "info.json"), info)
    meta = asdict(config)
    if source:
        meta["source"] = os.path.abspath(source)
    _write_json(os.path.join(out_dir, "dataset.json"), meta)
    return out_dir


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path):
    """List of ``(hr, lr)`` LightField pairs in sample order."""
    if not os.path.isdir(path):
        raise LoadError(f"dataset directory {path} does not exist")
    names = [d for d in os.listdir(path) if d.startswith("sample_") and d[7:].isdigit()]
    if not names:
        raise LoadError(f"no sample_* directories in {path}")
    pairs = []
    for name in sorted(names, key=lambda d: int(d[7:])):
        base = os.path.join(path, name)
        pairs.append((load_lf(os.path.join(base, "hr")), load_lf(os.path.join(base, "lr"))))
    return pairs
