"""Light field data model, EPI slicing, synthetic generation and container I/O.

Axis conventions: ``views[u][v][y][x]``.  Angular ``u`` pairs with spatial
``x`` and ``v`` pairs with ``y``: a horizontal EPI fixes ``(v, y)`` and spans
``(u, x)``, a vertical EPI fixes ``(u, x)`` and spans ``(v, y)``.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (
    DataValidationError,
    DimensionError,
    InconsistentDimensionsError,
    LFIndexError,
    MalformedMetadataError,
    MissingViewError,
)

QMAX = 65535
META_FILE = "meta.json"
LUMA_BT601 = (0.299, 0.587, 0.114)


def _validate_unit_range(arr, what):
    if not np.all(np.isfinite(arr)):
        raise DataValidationError(f"{what} contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise DataValidationError(f"{what} has values outside [0, 1]")


@dataclass(frozen=True, eq=False)
class LightField:
    """U x V grid of luminance views, all H x W, samples in [0, 1].

    The view array is copied to float64 and made read-only on construction.
    """

    views: np.ndarray

    def __post_init__(self):
        views = np.array(self.views, dtype=np.float64)
        if views.ndim != 4:
            raise DimensionError(f"light field must be 4D [U][V][H][W], got shape {views.shape}")
        if min(views.shape) < 1:
            raise DimensionError(f"light field has an empty axis: {views.shape}")
        _validate_unit_range(views, "light field")
        views.setflags(write=False)
        object.__setattr__(self, "views", views)

    @property
    def angular_dims(self):
        return self.views.shape[:2]

    @property
    def spatial_dims(self):
        return self.views.shape[2:]

    @property
    def shape(self):
        return self.views.shape

    @property
    def central_index(self):
        return central_index(*self.angular_dims)

    def view(self, u, v):
        return self.views[u, v]

    @property
    def central_view(self):
        return self.views[self.central_index]

    def __eq__(self, other):
        return isinstance(other, LightField) and np.array_equal(self.views, other.views)

    __hash__ = None


def central_index(U, V):
    return U // 2, V // 2


@dataclass(frozen=True)
class EPISlice:
    data: np.ndarray
    orientation: str
    fixed_angular: int
    fixed_spatial: int


def rgb_to_luminance(image):
    """BT.601 luma of an [H][W][3] image in [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[-1] != 3:
        raise DimensionError(f"expected [H][W][3] image, got shape {image.shape}")
    _validate_unit_range(image, "RGB image")
    r, _, b = LUMA_BT601
    # same weights, arranged so grey pixels (R == G == B) map to themselves exactly
    R, G, B = image[..., 0], image[..., 1], image[..., 2]
    y = G + r * (R - G) + b * (B - G)
    return np.clip(y, 0.0, 1.0)


def select_topleft_views(lf, n=7):
    U, V = lf.angular_dims
    if U < n + 1 or V < n + 1:
        raise DimensionError(f"need at least {n + 1}x{n + 1} views, got {U}x{V}")
    return LightField(lf.views[:n, :n])


def extract_epi(lf, orientation, fixed_angular, fixed_spatial):
    """Horizontal: fixed ``(v, y)``, data[u][x].  Vertical: fixed ``(u, x)``, data[v][y]."""
    U, V = lf.angular_dims
    H, W = lf.spatial_dims
    if orientation in ("h", "horizontal"):
        if not (0 <= fixed_angular < V and 0 <= fixed_spatial < H):
            raise LFIndexError(f"horizontal EPI index (v={fixed_angular}, y={fixed_spatial}) "
                               f"out of range for V={V}, H={H}")
        data = lf.views[:, fixed_angular, fixed_spatial, :]
        orientation = "horizontal"
    elif orientation in ("v", "vertical"):
        if not (0 <= fixed_angular < U and 0 <= fixed_spatial < W):
            raise LFIndexError(f"vertical EPI index (u={fixed_angular}, x={fixed_spatial}) "
                               f"out of range for U={U}, W={W}")
        data = lf.views[fixed_angular, :, :, fixed_spatial]
        orientation = "vertical"
    else:
        raise ValueError(f"unknown EPI orientation {orientation!r}")
    return EPISlice(np.array(data), orientation, int(fixed_angular), int(fixed_spatial))


def synth_lf(texture, disparity, U=7, V=7):
    """Lambertian fronto-parallel plane: view (u, v) is ``texture`` shifted by
    ``d*(u - uc)`` along x and ``d*(v - vc)`` along y (bicubic, clamped borders)."""
    from .resample import shift_image

    texture = np.asarray(texture, dtype=np.float64)
    if texture.ndim != 2 or min(texture.shape) < 8:
        raise DimensionError(f"texture must be 2D with both dims >= 8, got {texture.shape}")
    H, W = texture.shape
    if abs(disparity) * max(U, V) / 2 >= min(H, W) / 4:
        raise DimensionError(f"disparity {disparity} too large for {U}x{V} views of {H}x{W}")
    _validate_unit_range(texture, "texture")
    uc, vc = central_index(U, V)
    views = np.empty((U, V, H, W))
    for u in range(U):
        for v in range(V):
            if u == uc and v == vc:
                views[u, v] = texture
            else:
                views[u, v] = shift_image(texture, disparity * (v - vc), disparity * (u - uc))
    return LightField(views)


def quantize16(x):
    return np.round(np.asarray(x, dtype=np.float64) * QMAX).astype(np.uint16)


def dequantize16(q):
    return np.asarray(q, dtype=np.float64) / QMAX


def save_image16(image, path):
    Image.fromarray(quantize16(image)).save(path, format="PNG")


def load_image16(path):
    with Image.open(path) as im:
        arr = np.array(im)
    if arr.dtype != np.uint16:
        raise InconsistentDimensionsError(f"{path}: expected 16-bit grayscale PNG, got {arr.dtype}")
    return dequantize16(arr)


def view_filename(u, v):
    return f"view_{u}_{v}.png"


def save_lf(lf, path):
    os.makedirs(path, exist_ok=True)
    U, V = lf.angular_dims
    H, W = lf.spatial_dims
    meta = {"angular_u": U, "angular_v": V, "height": H, "width": W,
            "bit_depth": 16, "colorspace": "luminance"}
    with open(os.path.join(path, META_FILE), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for u in range(U):
        for v in range(V):
            save_image16(lf.views[u, v], os.path.join(path, view_filename(u, v)))


def _read_meta(path):
    meta_path = os.path.join(path, META_FILE)
    if not os.path.isfile(meta_path):
        raise MalformedMetadataError(f"no {META_FILE} in {path}")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedMetadataError(f"{meta_path}: {exc}") from exc
    if not isinstance(meta, dict):
        raise MalformedMetadataError(f"{meta_path}: expected a JSON object")
    for key in ("angular_u", "angular_v", "height", "width"):
        if not isinstance(meta.get(key), int) or meta[key] < 1:
            raise MalformedMetadataError(f"{meta_path}: '{key}' must be a positive integer")
    if meta.get("colorspace", "luminance") not in ("luminance", "rgb"):
        raise MalformedMetadataError(f"{meta_path}: unsupported colorspace {meta['colorspace']!r}")
    if meta.get("bit_depth", 16) not in (8, 16):
        raise MalformedMetadataError(f"{meta_path}: unsupported bit_depth {meta['bit_depth']!r}")
    return meta


def _read_view(fname, meta):
    with Image.open(fname) as im:
        arr = np.array(im)
    scale = float((1 << meta.get("bit_depth", 16)) - 1)
    if meta.get("colorspace", "luminance") == "rgb":
        if arr.ndim != 3 or arr.shape[-1] < 3:
            raise InconsistentDimensionsError(f"{fname}: expected an RGB image")
        return rgb_to_luminance(arr[..., :3] / scale)
    if arr.ndim != 2:
        raise InconsistentDimensionsError(f"{fname}: expected a single-channel image")
    return arr.astype(np.float64) / scale


def load_lf(path):
    """Read a light field container.  RGB containers are converted to luminance."""
    meta = _read_meta(path)
    U, V, H, W = meta["angular_u"], meta["angular_v"], meta["height"], meta["width"]
    views = np.empty((U, V, H, W))
    for u in range(U):
        for v in range(V):
            fname = os.path.join(path, view_filename(u, v))
            if not os.path.isfile(fname):
                raise MissingViewError(u, v, fname)
            img = _read_view(fname, meta)
            if img.shape != (H, W):
                raise InconsistentDimensionsError(
                    f"inconsistent dimensions: {fname} is {img.shape[0]}x{img.shape[1]}, "
                    f"metadata says {H}x{W}")
            views[u, v] = img
    return LightField(views)


def is_lf_container(path):
    return os.path.isfile(os.path.join(path, META_FILE))
