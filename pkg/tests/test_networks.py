import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfsr import autodiff as ad
from lfsr.ahqrg import AhqrgConfig, ahqrg_forward, init_ahqrg
from lfsr.errors import ConfigurationError, ContractError, ShapeError
from lfsr.layers import interleave_reshape
from lfsr.lfrefine import LfrefineConfig, init_lfrefine, lfrefine_forward
from lfsr.lightfield import LightField
from lfsr.losses import psnr
from lfsr.resample import bicubic_resize
from lfsr.ttsr import (
    AttentionMaps,
    TtsrConfig,
    build_qkv,
    init_ttsr,
    relevance_attention,
    transfer_texture,
    ttsr_forward,
)

from oracles import cosine_attention, fold_transfer
from toys import random_lf


class TestInterleave:
    def test_round_trip(self):
        x = ad.Tensor(np.random.default_rng(0).normal(size=(9, 2, 4, 5)))
        y = interleave_reshape(interleave_reshape(x, "to_angular", (3, 3), (4, 5)), "to_spatial", (3, 3), (4, 5))
        np.testing.assert_array_equal(y.data, x.data)

    def test_index_formula(self):
        U, V, C, h, w = 2, 3, 2, 3, 4
        x = np.arange(U * V * C * h * w, dtype=float).reshape(U * V, C, h, w)
        y = interleave_reshape(ad.Tensor(x), "to_angular", (U, V), (h, w)).data
        for u in range(U):
            for v in range(V):
                for c in range(C):
                    for yy in range(h):
                        for xx in range(w):
                            assert y[yy * w + xx, c, u, v] == x[u * V + v, c, yy, xx]

    def test_paper_shape(self):
        x = ad.Tensor(np.zeros((49, 4, 32, 32), dtype=np.float32))
        assert interleave_reshape(x, "to_angular", (7, 7), (32, 32)).shape == (1024, 4, 7, 7)

    def test_not_factorable(self):
        with pytest.raises(ShapeError):
            interleave_reshape(ad.Tensor(np.zeros((8, 1, 2, 2))), "to_angular", (3, 3), (2, 2))

    def test_stages_preserve_elements(self):
        # arange tracer through several permutation round trips
        x = ad.Tensor(np.arange(9 * 2 * 4 * 4, dtype=float).reshape(9, 2, 4, 4))
        y = x
        for _ in range(4):
            y = interleave_reshape(y, "to_angular", (3, 3), (4, 4))
            y = interleave_reshape(y, "to_spatial", (3, 3), (4, 4))
        np.testing.assert_array_equal(np.sort(y.data.ravel()), np.arange(x.data.size))


class TestAhqrg:
    def test_config_invariants(self):
        for bad in (dict(angular=(6, 6)), dict(angular=(7, 5)), dict(scale=2), dict(channels=3), dict(stages=0)):
            with pytest.raises(ConfigurationError):
                AhqrgConfig(**bad)

    def test_paper_shape_and_zero_head_baseline(self):
        config = AhqrgConfig(channels=4, stages=1)
        lf = random_lf((7, 7, 32, 32))
        out = ahqrg_forward(lf, init_ahqrg(config), config)
        assert out.shape == (128, 128)
        base = bicubic_resize(lf.central_view, 128, 128)
        np.testing.assert_array_equal(out.data, base)
        gt = np.random.default_rng(1).uniform(size=(128, 128))
        assert psnr(out.data, gt) == psnr(base, gt)

    @settings(max_examples=5, deadline=None)
    @given(st.integers(4, 9), st.integers(4, 9))
    def test_output_is_four_times_input(self, h, w):
        config = AhqrgConfig(angular=(3, 3), channels=4, stages=1)
        out = ahqrg_forward(random_lf((3, 3, h, w)), init_ahqrg(config, zero_head=False), config)
        assert out.shape == (4 * h, 4 * w)
        assert out.data.min() >= 0 and out.data.max() <= 1

    def test_angular_mismatch(self):
        config = AhqrgConfig(angular=(3, 3), channels=4, stages=1)
        with pytest.raises(ShapeError):
            ahqrg_forward(random_lf((5, 5, 4, 4)), init_ahqrg(config), config)


def _distinct_feat(C, H, W, seed):
    return np.random.default_rng(seed).normal(size=(C, H, W))


class TestAttention:
    def test_build_qkv(self):
        rng = np.random.default_rng(0)
        ref = rng.uniform(size=(32, 32))
        q, k, v = build_qkv(bicubic_resize(ref, 8, 8), ref)
        np.testing.assert_array_equal(q, k)
        np.testing.assert_array_equal(v, ref)
        _, k, _ = build_qkv(rng.uniform(size=(8, 8)), np.full((32, 32), 0.4))
        assert np.all(k == 0.4)
        with pytest.raises(ShapeError):
            build_qkv(np.zeros((8, 8)), np.zeros((32, 30)))

    def test_self_match(self):
        f = _distinct_feat(2, 6, 7, 1)
        maps = relevance_attention(ad.Tensor(f), ad.Tensor(f))
        np.testing.assert_array_equal(maps.hard.reshape(-1), np.arange(42))
        np.testing.assert_allclose(maps.soft, 1.0, atol=1e-12)

    def test_zero_query(self):
        maps = relevance_attention(ad.Tensor(np.zeros((2, 4, 4))), ad.Tensor(_distinct_feat(2, 4, 4, 2)))
        assert np.all(maps.hard == 0) and np.all(maps.soft == 0)

    @pytest.mark.parametrize("seed", range(3))
    def test_brute_force_oracle(self, seed):
        q, k = _distinct_feat(1, 8, 8, seed), _distinct_feat(1, 8, 8, seed + 10)
        maps = relevance_attention(ad.Tensor(q), ad.Tensor(k))
        hard, soft = cosine_attention(q, k)
        np.testing.assert_array_equal(maps.hard, hard)
        np.testing.assert_allclose(maps.soft, soft, rtol=0, atol=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1e-3, 1e3))
    def test_hard_map_is_scale_invariant(self, seed, s):
        q, k = _distinct_feat(2, 5, 5, seed), _distinct_feat(2, 5, 5, seed + 1)
        a = relevance_attention(ad.Tensor(q), ad.Tensor(k))
        b = relevance_attention(ad.Tensor(q), ad.Tensor(k * s))
        np.testing.assert_array_equal(a.hard, b.hard)
        assert np.all(np.abs(a.soft) <= 1.0)

    def test_transfer_identity(self):
        v = _distinct_feat(3, 5, 6, 4)
        maps = AttentionMaps(np.arange(30).reshape(5, 6), np.ones((5, 6)))
        np.testing.assert_allclose(transfer_texture(ad.Tensor(v), maps).data, v, rtol=0, atol=0)

    def test_transfer_fold_oracle(self):
        rng = np.random.default_rng(5)
        v = rng.normal(size=(2, 6, 5))
        hard = rng.integers(0, 30, size=(6, 5))
        out = transfer_texture(ad.Tensor(v), AttentionMaps(hard, np.ones((6, 5))))
        assert out.shape == (2, 6, 5)
        np.testing.assert_allclose(out.data, fold_transfer(v, hard), rtol=0, atol=1e-12)

    def test_transfer_bad_index(self):
        maps = AttentionMaps(np.full((3, 3), 9), np.ones((3, 3)))
        with pytest.raises(ContractError):
            transfer_texture(ad.Tensor(np.zeros((1, 3, 3))), maps)


class TestTtsr:
    def test_zero_head_is_bicubic(self):
        config = TtsrConfig(channels=4)
        rng = np.random.default_rng(0)
        lr, ref = rng.uniform(size=(32, 32)), rng.uniform(size=(128, 128))
        out, maps = ttsr_forward(lr, ref, init_ttsr(config), config)
        assert out.shape == (128, 128) and maps.hard.shape == (128, 128)
        np.testing.assert_array_equal(out.data, bicubic_resize(lr, 128, 128))

    def test_soft_map_matches_relevance(self):
        config = TtsrConfig(channels=4)
        rng = np.random.default_rng(1)
        out, maps = ttsr_forward(rng.uniform(size=(6, 6)), rng.uniform(size=(24, 24)),
                                 init_ttsr(config, zero_head=False), config)
        assert np.all(np.abs(maps.soft) <= 1.0)
        assert out.data.min() >= 0 and out.data.max() <= 1


class TestLfrefine:
    def test_identity_at_init_and_shape(self):
        config = LfrefineConfig(channels=4, stages=1)
        lf = random_lf((7, 7, 128, 128))
        out = lfrefine_forward(lf, init_lfrefine(config), config)
        assert out.shape == (7, 7, 128, 128)
        np.testing.assert_array_equal(out.data, lf.views)

    def test_output_is_a_valid_light_field(self):
        config = LfrefineConfig(angular=(3, 3), channels=4, stages=2)
        params = init_lfrefine(config, zero_head=False)
        params["out.w"].data = params["out.w"].data * 50  # force saturation
        out = lfrefine_forward(random_lf((3, 3, 6, 6)), params, config)
        LightField(out.data)

    def test_angular_mismatch(self):
        config = LfrefineConfig(angular=(3, 3), channels=4, stages=1)
        with pytest.raises(ShapeError):
            lfrefine_forward(random_lf((5, 5, 4, 4)), init_lfrefine(config), config)
