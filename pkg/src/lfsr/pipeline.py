"""End-to-end inference: reference generation, per-view texture transfer,
joint refinement."""

import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .ahqrg import AhqrgConfig, ahqrg_forward
from .ahqrg import param_shapes as ahqrg_shapes
from .checkpoint import load_checkpoint
from .errors import ConfigurationError
from .layers import check_param_shapes, params_from_arrays
from .lfrefine import LfrefineConfig, lfrefine_forward
from .lfrefine import param_shapes as lfrefine_shapes
from .lightfield import LightField
from .resample import upsample_lf
from .ttsr import TtsrConfig, encode_reference, ttsr_forward
from .ttsr import param_shapes as ttsr_shapes

_KINDS = {
    "ahqrg": (AhqrgConfig, ahqrg_shapes),
    "ttsr": (TtsrConfig, ttsr_shapes),
    "lfrefine": (LfrefineConfig, lfrefine_shapes),
}


@dataclass
class Model:
    kind: str
    config: object
    params: dict


def load_model(path, kind):
    if path is None or not os.path.isfile(path):
        raise ConfigurationError(f"missing {kind} checkpoint: {path}")
    arrays, meta = load_checkpoint(path)
    if meta.get("module") != kind:
        raise ConfigurationError(f"{path} holds a {meta.get('module')!r} model, expected {kind!r}")
    config_cls, shapes = _KINDS[kind]
    config = config_cls.from_dict(meta["config"])
    params = params_from_arrays(arrays, config.dtype, requires_grad=False)
    check_param_shapes(params, shapes(config), kind)
    return Model(kind, config, params)


def model_from_params(kind, config, params):
    return Model(kind, config, params)


@dataclass
class PipelineResult:
    refined: LightField
    reference: np.ndarray  # reference generator output, [4h][4w]
    ttsr: LightField
    bicubic: LightField


def ttsr_stage(lf_lr, ahqrg_model, ttsr_model):
    """Reference image and the per-view TTSR light field (no gradients kept)."""
    with ad.no_grad():
        return _ttsr_stage(lf_lr, ahqrg_model, ttsr_model)


def _ttsr_stage(lf_lr, ahqrg_model, ttsr_model):
    U, V, h, w = lf_lr.shape
    ref = ahqrg_forward(lf_lr, ahqrg_model.params, ahqrg_model.config).data
    reference = encode_reference(ref, (h, w), ttsr_model.params, ttsr_model.config)
    views = np.empty((U, V, 4 * h, 4 * w))
    for u in range(U):
        for v in range(V):
            out, _ = ttsr_forward(lf_lr.views[u, v], ref, ttsr_model.params, ttsr_model.config,
                                  reference=reference)
            views[u, v] = out.data
    return ref, LightField(views)


def infer_pipeline(lf_lr, ahqrg_model, ttsr_model, lfrefine_model):
    """Super-resolve a light field x4; returns refined output and intermediates."""
    for m, kind in ((ahqrg_model, "ahqrg"), (ttsr_model, "ttsr"), (lfrefine_model, "lfrefine")):
        if m is None or m.kind != kind:
            raise ConfigurationError(f"{kind} model missing or of the wrong kind")
    if lf_lr.angular_dims != ahqrg_model.config.angular:
        raise ConfigurationError(f"light field has {lf_lr.angular_dims} views, "
                                 f"reference generator expects {ahqrg_model.config.angular}")
    if lf_lr.angular_dims != lfrefine_model.config.angular:
        raise ConfigurationError(f"light field has {lf_lr.angular_dims} views, "
                                 f"refinement expects {lfrefine_model.config.angular}")
    ref, lf_ttsr = ttsr_stage(lf_lr, ahqrg_model, ttsr_model)
    with ad.no_grad():
        refined = lfrefine_forward(lf_ttsr, lfrefine_model.params, lfrefine_model.config).data
    return PipelineResult(LightField(refined), ref, lf_ttsr, upsample_lf(lf_lr))


def load_models(ahqrg_path, ttsr_path, lfrefine_path):
    return (load_model(ahqrg_path, "ahqrg"), load_model(ttsr_path, "ttsr"),
            load_model(lfrefine_path, "lfrefine"))
