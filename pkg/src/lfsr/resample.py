"""Bicubic resampling, gamma augmentation and patch extraction.

All resampling goes through one separable Catmull-Rom kernel (a = -0.5) with
center-aligned coordinates and clamp-to-edge borders.  Each axis pass is
evaluated as ``base + sum_m w_m * (x_m - base)`` where ``base`` is the tap at
offset 0; in exact arithmetic this is the plain kernel sum (the weights sum
to one), and in floating point it keeps constant regions and integer
shifts bit-exact.
"""

import numpy as np

from .errors import DimensionError, ParameterError
from .lightfield import LightField

CUBIC_A = -0.5
TAP_OFFSETS = (-1, 0, 1, 2)


def cubic_kernel(t, a=CUBIC_A):
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2, t3 = t * t, t * t * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def axis_taps(coords, n):
    """Source indices and weights, shape (len(coords), 4), for sampling an
    axis of length ``n`` at real-valued ``coords``."""
    coords = np.asarray(coords, dtype=np.float64)
    base = np.floor(coords)
    frac = coords - base
    offsets = np.array(TAP_OFFSETS, dtype=np.float64)
    weights = cubic_kernel(frac[:, None] - offsets[None, :])
    idx = np.clip(base.astype(np.int64)[:, None] + np.array(TAP_OFFSETS)[None, :], 0, n - 1)
    return idx, weights


def _resample_axis(img, idx, weights, axis):
    x = np.moveaxis(img, axis, 0)
    base = x[idx[:, 1]]
    out = base.copy()
    shape = (-1,) + (1,) * (x.ndim - 1)
    for m in range(4):
        out += weights[:, m].reshape(shape) * (x[idx[:, m]] - base)
    return np.moveaxis(out, 0, axis)


def resize_coords(n_in, n_out):
    i = np.arange(n_out, dtype=np.float64)
    return (i + 0.5) * (n_in / n_out) - 0.5


def bicubic_resize(image, out_h, out_w, clamp=True):
    """Resize a 2D image (or a stack whose last two axes are H, W).

    ``clamp=False`` returns the raw kernel sum, which may overshoot [0, 1].
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim < 2:
        raise DimensionError(f"expected at least 2 dims, got shape {image.shape}")
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"target size must be positive, got ({out_h}, {out_w})")
    h, w = image.shape[-2:]
    if h < 1 or w < 1:
        raise DimensionError(f"empty input image of shape {image.shape}")
    iy, wy = axis_taps(resize_coords(h, out_h), h)
    ix, wx = axis_taps(resize_coords(w, out_w), w)
    out = _resample_axis(image, iy, wy, image.ndim - 2)
    out = _resample_axis(out, ix, wx, image.ndim - 1)
    if clamp:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def shift_image(image, dy, dx, clamp=True):
    """Translate content by (dy, dx) pixels: ``out(y, x) = in(y - dy, x - dx)``."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[-2:]
    iy, wy = axis_taps(np.arange(h) - float(dy), h)
    ix, wx = axis_taps(np.arange(w) - float(dx), w)
    out = _resample_axis(image, iy, wy, image.ndim - 2)
    out = _resample_axis(out, ix, wx, image.ndim - 1)
    if clamp:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def gamma_correct(image, gamma):
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return np.power(np.asarray(image, dtype=np.float64), float(gamma))


def sample_gamma(rng, low=0.4, high=1.0):
    return float(rng.uniform(low, high))


def draw_patch_offset(h, w, size, rng):
    if size < 1 or size > min(h, w):
        raise DimensionError(f"patch size {size} does not fit spatial dims {(h, w)}")
    y0 = int(rng.integers(0, h - size + 1))
    x0 = int(rng.integers(0, w - size + 1))
    return y0, x0


def random_patch(lf, size, rng):
    """Crop the same randomly placed ``size`` x ``size`` window out of every view."""
    y0, x0 = draw_patch_offset(*lf.spatial_dims, size, rng)
    return LightField(lf.views[:, :, y0:y0 + size, x0:x0 + size])


def degrade(lf_hr, factor=4):
    h, w = lf_hr.spatial_dims
    if factor < 1 or h % factor or w % factor:
        raise DimensionError(f"spatial dims {(h, w)} not divisible by factor {factor}")
    return LightField(bicubic_resize(lf_hr.views, h // factor, w // factor))


def upsample_lf(lf_lr, factor=4):
    """Per-view bicubic upsampling, the baseline every stage is compared with."""
    h, w = lf_lr.spatial_dims
    return LightField(bicubic_resize(lf_lr.views, h * factor, w * factor))
