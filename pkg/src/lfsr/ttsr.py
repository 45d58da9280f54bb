"""Reference-based super-resolution of single views by texture transfer.

Query, key and value images are all 4x resolution: the query is the
bicubically upsampled low-resolution view, the key is the reference after a
bicubic down/up round trip (so it carries the same blur as the query), and
the value is the sharp reference itself.  A shared three-layer extractor
embeds all three; 3x3 feature patches of the query are matched against the
key by cosine similarity, and the value patches at the winning positions are
folded back into a texture map that is fused with backbone features of the
query, weighted by the match confidence.
"""

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, ContractError, ShapeError
from .layers import ParamBuilder, act, check_param_shapes, conv
from .resample import bicubic_resize

SCALE = 4
ATTENTION_CHUNK = 2048


@dataclass(frozen=True)
class TtsrConfig:
    channels: int = 16
    scale: int = SCALE
    dtype: str = "float32"

    def __post_init__(self):
        if self.scale != SCALE:
            raise ConfigurationError(f"scale is fixed at {SCALE}, got {self.scale}")
        if self.channels < 1:
            raise ConfigurationError("channels must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class AttentionMaps:
    hard: np.ndarray  # [H][W] flat index into key positions
    soft: np.ndarray  # [H][W] cosine relevance at that index


def build_qkv(lr_view, ref_hr):
    lr_view = np.asarray(lr_view, dtype=np.float64)
    ref_hr = np.asarray(ref_hr, dtype=np.float64)
    h, w = lr_view.shape
    if ref_hr.shape != (SCALE * h, SCALE * w):
        raise ShapeError(f"reference {ref_hr.shape} is not {SCALE}x the view {lr_view.shape}")
    q = bicubic_resize(lr_view, SCALE * h, SCALE * w)
    k = bicubic_resize(bicubic_resize(ref_hr, h, w), SCALE * h, SCALE * w)
    return q, k, ref_hr


def _unit_rows(a):
    norm = np.sqrt(np.sum(a * a, axis=1, keepdims=True))
    return np.where(norm > 0, a / np.where(norm > 0, norm, 1), 0)


def attention_from_patches(q_patches, k_patches, shape):
    """Hard/soft maps from unfolded [N][D] query and key patch matrices."""
    qn = _unit_rows(np.asarray(q_patches))
    kn_t = np.ascontiguousarray(_unit_rows(np.asarray(k_patches)).T)
    n = qn.shape[0]
    hard = np.empty(n, dtype=np.int64)
    soft = np.empty(n, dtype=qn.dtype)
    for start in range(0, n, ATTENTION_CHUNK):
        rel = qn[start:start + ATTENTION_CHUNK] @ kn_t
        idx = np.argmax(rel, axis=1)  # first maximum -> lowest index on ties
        hard[start:start + len(idx)] = idx
        soft[start:start + len(idx)] = rel[np.arange(len(idx)), idx]
    return AttentionMaps(hard.reshape(shape), soft.reshape(shape))


def _data(x):
    return x.data if isinstance(x, ad.Tensor) else np.asarray(x)


def relevance_attention(q_feat, k_feat):
    """Patch-level cosine attention between [C][H][W] feature maps."""
    q, k = _data(q_feat), _data(k_feat)
    if q.shape != k.shape or q.ndim != 3:
        raise ShapeError(f"query/key features must be equal [C][H][W], got {q.shape} and {k.shape}")
    qu = ad.unfold_patches(ad.Tensor(q)).data
    ku = ad.unfold_patches(ad.Tensor(k)).data
    return attention_from_patches(qu, ku, q.shape[1:])


def transfer_texture(v_feat, maps):
    """Gather the value patch at each hard index and fold back with overlap averaging."""
    v = v_feat if isinstance(v_feat, ad.Tensor) else ad.Tensor(v_feat)
    C, H, W = v.shape
    return _fold_transfer(ad.unfold_patches(v), maps.hard, C, H, W)


def _fold_transfer(v_patches, hard, C, H, W):
    hard = np.asarray(hard).reshape(-1)
    if hard.size != H * W or hard.min() < 0 or hard.max() >= H * W:
        raise ContractError(f"attention indices invalid for a {H}x{W} value map")
    return ad.fold_average(ad.gather_rows(v_patches, hard), C, H, W)


def param_shapes(config):
    C = config.channels
    shapes = {}
    for name, c_out, c_in in _layers(C):
        shapes[f"{name}.w"] = (c_out, c_in, 3, 3)
        shapes[f"{name}.b"] = (c_out,)
    return shapes


def _layers(C):
    return [("ext0", C, 1), ("ext1", C, C), ("ext2", C, C),
            ("bb0", C, 1), ("bb1", C, C),
            ("fuse", C, 2 * C),
            ("head0", C, C), ("out", 1, C)]


def init_ttsr(config, seed=0, zero_head=True):
    b = ParamBuilder(seed, config.dtype)
    for name, c_out, c_in in _layers(config.channels):
        b.conv(name, c_out, c_in, zero=zero_head and name == "out")
    return b.params


def extract_features(img, params):
    """Shared texture extractor: three activated 3x3 convs, [1][1][H][W] -> [1][C][H][W]."""
    f = img
    for i in range(3):
        f = act(conv(f, params, f"ext{i}"))
    return f


@dataclass
class ReferenceFeatures:
    """Key/value patch tensors for one reference, reusable across the views of a light field."""
    k_patches: ad.Tensor
    v_patches: ad.Tensor
    lr_shape: tuple


def encode_reference(ref_hr, lr_shape, params, config):
    h, w = lr_shape
    ref_hr = np.asarray(ref_hr, dtype=np.float64)
    if ref_hr.shape != (SCALE * h, SCALE * w):
        raise ShapeError(f"reference {ref_hr.shape} is not {SCALE}x the view {lr_shape}")
    k = bicubic_resize(bicubic_resize(ref_hr, h, w), SCALE * h, SCALE * w)
    H, W = ref_hr.shape
    C = config.channels
    kf = extract_features(ad.Tensor(k.astype(config.dtype)[None, None]), params)
    vf = extract_features(ad.Tensor(ref_hr.astype(config.dtype)[None, None]), params)
    ku = ad.unfold_patches(ad.reshape(kf, (C, H, W)))
    vu = ad.unfold_patches(ad.reshape(vf, (C, H, W)))
    return ReferenceFeatures(ku, vu, (h, w))


def ttsr_forward(lr_view, ref_hr, params, config, reference=None):
    """Super-resolve one view.  Returns ``(output Tensor [4h][4w], AttentionMaps)``.

    ``reference`` may carry precomputed key/value features from
    :func:`encode_reference`; it must have been built from the same params.
    """
    lr_view = np.asarray(lr_view, dtype=np.float64)
    h, w = lr_view.shape
    H, W = SCALE * h, SCALE * w
    C = config.channels
    check_param_shapes(params, param_shapes(config), "ttsr")
    if reference is None:
        reference = encode_reference(ref_hr, (h, w), params, config)
    elif reference.lr_shape != (h, w):
        raise ShapeError(f"reference encoded for {reference.lr_shape}, view is {(h, w)}")
    q = bicubic_resize(lr_view, H, W)
    qt = ad.Tensor(q.astype(config.dtype)[None, None])

    qf = extract_features(qt, params)
    qu = ad.unfold_patches(ad.reshape(qf, (C, H, W)))
    maps = ad.branch(lambda: attention_from_patches(qu.data, reference.k_patches.data, (H, W)))
    soft = ad.gathered_cosine(qu, reference.k_patches, maps.hard.reshape(-1))
    soft = ad.expand(ad.reshape(soft, (1, 1, H, W)), (1, C, H, W))
    texture = _fold_transfer(reference.v_patches, maps.hard, C, H, W)
    texture = ad.reshape(texture, (1, C, H, W))

    feats = act(conv(act(conv(qt, params, "bb0")), params, "bb1"))
    fused = ad.add(feats, ad.mul(conv(ad.concat([feats, texture], axis=1), params, "fuse"), soft))
    res = conv(act(conv(fused, params, "head0")), params, "out")
    out = ad.clamp(ad.offset(q, ad.reshape(res, (H, W))))
    return out, maps
