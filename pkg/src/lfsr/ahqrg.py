"""All-in-focus high-quality reference generator.

Maps a U x V low-resolution light field to one 4x upsampled central view:
the bicubically upsampled central view plus a learned residual.  The
residual path is a 3x3 lift, ``stages`` interleaved spatial/angular
convolutions, three 3D convolutions over (flattened view, y, x), a pick of
the central view's depth slice and a two-stage x2 pixel-shuffle head.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, ShapeError
from .layers import (
    ParamBuilder,
    act,
    add_interleave_params,
    as_views,
    check_param_shapes,
    conv,
    interleaved_stages,
)
from .resample import bicubic_resize

SCALE = 4


@dataclass(frozen=True)
class AhqrgConfig:
    angular: tuple = (7, 7)
    channels: int = 16
    stages: int = 4
    scale: int = SCALE
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "angular", tuple(int(a) for a in self.angular))
        U, V = self.angular
        if U != V or U % 2 == 0:
            raise ConfigurationError(f"angular dims must be equal and odd, got {self.angular}")
        if self.scale != SCALE:
            raise ConfigurationError(f"scale is fixed at {SCALE}, got {self.scale}")
        if self.channels < 4 or self.stages < 1:
            raise ConfigurationError("need channels >= 4 and stages >= 1")

    def to_dict(self):
        d = asdict(self)
        d["angular"] = list(self.angular)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def param_shapes(config):
    C = config.channels
    shapes = {"lift.w": (C, 1, 3, 3), "lift.b": (C,)}
    for s in range(config.stages):
        for kind in ("spatial", "angular"):
            shapes[f"stage{s}.{kind}.w"] = (C, C, 3, 3)
            shapes[f"stage{s}.{kind}.b"] = (C,)
    for i in range(3):
        shapes[f"conv3d{i}.w"] = (C, C, 3, 3, 3)
        shapes[f"conv3d{i}.b"] = (C,)
    for i in range(2):
        shapes[f"up{i}.w"] = (4 * C, C, 3, 3)
        shapes[f"up{i}.b"] = (4 * C,)
    shapes["out.w"] = (1, C, 3, 3)
    shapes["out.b"] = (1,)
    return shapes


def init_ahqrg(config, seed=0, zero_head=True):
    C = config.channels
    b = ParamBuilder(seed, config.dtype)
    b.conv("lift", C, 1)
    add_interleave_params(b, C, config.stages)
    for i in range(3):
        b.conv(f"conv3d{i}", C, C, nd=3)
    for i in range(2):
        b.conv(f"up{i}", 4 * C, C)
    b.conv("out", 1, C, zero=zero_head)
    return b.params


def ahqrg_residual(lf_lr, params, config):
    x = as_views(lf_lr, config.dtype)
    if x.dtype != np.dtype(config.dtype):
        x = ad.Tensor(x.data.astype(config.dtype))
    U, V, h, w = x.shape
    if (U, V) != config.angular:
        raise ShapeError(f"light field has {U}x{V} views, network expects {config.angular}")
    check_param_shapes(params, param_shapes(config), "ahqrg")
    C = config.channels
    f = ad.reshape(x, (U * V, 1, h, w))
    f = act(conv(f, params, "lift"))
    f = interleaved_stages(f, params, config.stages, (U, V), (h, w))
    # flattened view index becomes the depth axis of the 3D stack
    f = ad.reshape(ad.transpose(f, (1, 0, 2, 3)), (1, C, U * V, h, w))
    for i in range(3):
        f = ad.add(f, act(conv(f, params, f"conv3d{i}", nd=3)))
    centre = (U // 2) * V + V // 2
    f = ad.getitem(f, (slice(None), slice(None), centre))  # [1][C][h][w]
    for i in range(2):
        f = act(ad.pixel_shuffle(conv(f, params, f"up{i}"), 2))
    r = conv(f, params, "out")
    return ad.reshape(r, (SCALE * h, SCALE * w))


def ahqrg_forward(lf_lr, params, config):
    """Reference view [4h][4w] as a float64 Tensor (differentiable w.r.t. params).

    The residual is computed in ``config.dtype`` and added to the float64
    bicubic baseline, so a zero residual reproduces the baseline bit for bit.
    """
    views = getattr(lf_lr, "views", lf_lr)
    views = views.data if isinstance(views, ad.Tensor) else np.asarray(views)
    U, V, h, w = views.shape
    base = bicubic_resize(views[U // 2, V // 2], SCALE * h, SCALE * w)
    return ad.clamp(ad.offset(base, ahqrg_residual(lf_lr, params, config)))
