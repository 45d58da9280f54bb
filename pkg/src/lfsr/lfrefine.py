"""Joint refinement of a super-resolved light field.

A residual network over all views at once: 3x3 lift, the interleaved
spatial/angular stages of the reference generator (the angular convolutions
are what let views correct each other), and a 3x3 projection back to one
channel per view.  No upsampling.
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


@dataclass(frozen=True)
class LfrefineConfig:
    angular: tuple = (7, 7)
    channels: int = 16
    stages: int = 4
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "angular", tuple(int(a) for a in self.angular))
        if min(self.angular) < 1:
            raise ConfigurationError(f"bad angular dims {self.angular}")
        if self.channels < 1 or self.stages < 1:
            raise ConfigurationError("need channels >= 1 and stages >= 1")

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
    shapes["out.w"] = (1, C, 3, 3)
    shapes["out.b"] = (1,)
    return shapes


def init_lfrefine(config, seed=0, zero_head=True):
    b = ParamBuilder(seed, config.dtype)
    b.conv("lift", config.channels, 1)
    add_interleave_params(b, config.channels, config.stages)
    b.conv("out", 1, config.channels, zero=zero_head)
    return b.params


def lfrefine_forward(lf_in, params, config):
    """Refined light field as a float64 Tensor [U][V][H][W], clamped to [0, 1]."""
    base = np.asarray(getattr(lf_in, "views", lf_in), dtype=np.float64)
    x = as_views(base, config.dtype)
    U, V, H, W = x.shape
    if (U, V) != config.angular:
        raise ShapeError(f"light field has {U}x{V} views, network expects {config.angular}")
    check_param_shapes(params, param_shapes(config), "lfrefine")
    f = ad.reshape(x, (U * V, 1, H, W))
    f = act(conv(f, params, "lift"))
    f = interleaved_stages(f, params, config.stages, (U, V), (H, W))
    r = ad.reshape(conv(f, params, "out"), (U, V, H, W))
    return ad.clamp(ad.offset(base, r))
