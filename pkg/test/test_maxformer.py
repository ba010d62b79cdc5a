import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from colearn.maxformer import (CrossModalBooster, MaxFormerBlock, attention_weights, mfm_fuse, mfm_max,
                               multi_head_transfer, single_head_transfer)
from colearn.tensor import Tensor, mul, sum_all
from test.base import Base

small = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def looped_transfer(query, key, block):
    ''' Multi-head transfer one head, one query frame and one key frame at a time. '''
    t_query, t_key = query.shape[1], key.shape[1]
    outputs = []
    for head in block.heads:
        out = np.zeros((block.d_head, t_query))
        for t in range(t_query):
            q = query[:, t] @ head.w_q.data
            logits = np.array([q @ (key[:, s] @ head.w_k.data) for s in range(t_key)]) / block.temperature
            w = np.exp(logits - logits.max())
            w /= w.sum()
            for s in range(t_key):
                out[:, t] += w[s] * (key[:, s] @ head.w_v.data)
        outputs.append(out)
    return block.w_out.data.T @ np.vstack(outputs)


class AttentionTest(Base):
    def setUp(self):
        super(AttentionTest, self).setUp()
        self.block = MaxFormerBlock(8, 2, self.rng)
        self.head = self.block.heads[0]

    def test_single_key_frame(self):
        query = self.rng.normal(size=(8, 5))
        key = self.rng.normal(size=(8, 1))
        out = single_head_transfer(query, key, key, self.head, self.block.temperature).data
        expected = self.head.w_v.data.T @ key
        self.assertAllClose(out, np.repeat(expected, 5, axis=1), atol=1e-12)

    def test_zero_query_projection_is_uniform(self):
        self.head.w_q.data[...] = 0
        w = attention_weights(self.rng.normal(size=(8, 4)), self.rng.normal(size=(8, 7)),
                              self.head, self.block.temperature).data
        self.assertAllClose(w, np.full((4, 7), 1 / 7.), atol=1e-15)

    def test_head_oracle(self):
        query = self.rng.normal(size=(8, 3))
        key = self.rng.normal(size=(8, 6))
        h = self.head
        weights = softmax((query.T @ h.w_q.data) @ (key.T @ h.w_k.data).T / np.sqrt(8))
        expected = (weights @ (key.T @ h.w_v.data)).T
        out = single_head_transfer(query, key, key, h, self.block.temperature).data
        self.assertAllClose(out, expected, atol=1e-12)

    def test_rows_sum_to_one(self):
        maps = self.block.attention_maps(self.rng.normal(size=(8, 9)), self.rng.normal(size=(8, 4)))
        assert len(maps) == 2
        for w in maps:
            assert w.shape == (4, 9)
            self.assertAllClose(w.sum(axis=1), np.ones(4))

    def test_one_head_reduces_to_projected_single_head(self):
        block = MaxFormerBlock(4, 1, self.rng)
        query = self.rng.normal(size=(4, 3))
        key = self.rng.normal(size=(4, 5))
        single = single_head_transfer(query, key, key, block.heads[0], block.temperature).data
        multi = multi_head_transfer(query, key, key, block).data
        self.assertAllClose(multi, block.w_out.data.T @ single, atol=1e-12)

    def test_four_heads_match_loop(self):
        block = MaxFormerBlock(16, 4, self.rng)
        query = self.rng.normal(size=(16, 7))
        key = self.rng.normal(size=(16, 11))
        self.assertAllClose(multi_head_transfer(query, key, key, block).data, looped_transfer(query, key, block),
                            atol=1e-12)

    def test_randomized_shapes_match_loop(self):
        for i in range(20):
            t_source, t_target = (1, 3, 200)[i % 3], (1, 50)[i % 2]
            heads = (1, 2, 4)[self.rng.integers(3)]
            d = heads * int(self.rng.integers(2, 5))
            block = MaxFormerBlock(d, heads, self.rng, scale_by_model_dim=bool(i % 4))
            query = self.rng.normal(size=(d, t_target))
            key = self.rng.normal(size=(d, t_source))
            out = multi_head_transfer(query, key, key, block).data
            assert out.shape == (d, t_target)
            self.assertAllClose(out, looped_transfer(query, key, block), atol=1e-12)

    def test_identical_heads_repeat_channels(self):
        block = MaxFormerBlock(8, 4, self.rng)
        for head in block.heads[1:]:
            for name in ('w_q', 'w_k', 'w_v'):
                getattr(head, name).data[...] = getattr(block.heads[0], name).data
        block.w_out.data[...] = np.eye(8)
        query = self.rng.normal(size=(8, 3))
        key = self.rng.normal(size=(8, 5))
        out = multi_head_transfer(query, key, key, block).data
        first = out[:block.d_head]
        for k in range(1, 4):
            assert np.array_equal(out[k * block.d_head:(k + 1) * block.d_head], first)

    def test_head_temperature(self):
        assert MaxFormerBlock(8, 2, self.rng).temperature == np.sqrt(8)
        assert MaxFormerBlock(8, 2, self.rng, scale_by_model_dim=False).temperature == 2.0

    def test_heads_must_divide_width(self):
        with self.assertRaises(ValueError):
            MaxFormerBlock(6, 4, self.rng)

    def test_key_value_mismatch(self):
        with self.assertRaises(ValueError):
            single_head_transfer(np.ones((8, 2)), np.ones((8, 3)), np.ones((8, 4)), self.head, 1.0)


class MaxFeatureMapTest(Base):
    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (3, 4), elements=small), arrays(np.float64, (3, 4), elements=small))
    def test_dominates_both(self, a, b):
        y = mfm_max(a, b).data
        assert (y >= a).all() and (y >= b).all()
        assert ((y == a) | (y == b)).all()

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (2, 3), elements=small))
    def test_tie_routes_gradient_to_target(self, a):
        target = Tensor(a.copy(), requires_grad=True)
        transferred = Tensor(a.copy(), requires_grad=True)
        g_target, g_transferred = self.tape_gradients(lambda: sum_all(mfm_max(target, transferred)),
                                                      [target, transferred])
        assert (g_target == 1).all()
        assert not g_transferred.any()

    @settings(max_examples=1000, deadline=None)
    @given(arrays(np.float64, (4, 5), elements=small), arrays(np.float64, (4, 3), elements=small))
    def test_block_fused_map_dominates_branches(self, source, target):
        block = MaxFormerBlock(4, 2, np.random.default_rng(11))
        fused, target_branch, transferred = (t.data for t in block.fused_max(source, target))
        assert fused.shape == (4, 3)
        assert (fused >= target_branch).all() and (fused >= transferred).all()
        assert ((fused == target_branch) | (fused == transferred)).all()

    def test_fuse_shape_mismatch(self):
        block = MaxFormerBlock(4, 2, self.rng)
        with self.assertRaises(ValueError):
            mfm_fuse(np.ones((4, 3)), np.ones((4, 2)), block)


class BoosterTest(Base):
    def test_length_follows_target(self):
        booster = CrossModalBooster(5, 3, 8, 2, 2, self.rng)
        for t_source, t_target in ((12, 3), (3, 12), (1, 4), (4, 1)):
            out = booster(self.rng.normal(size=(5, t_source)), self.rng.normal(size=(3, t_target)))
            assert out.shape == (8, t_target)

    def test_audio_to_visual_shape(self):
        booster = CrossModalBooster(128, 128, 128, 4, 1, self.rng)
        out = booster(self.rng.normal(size=(128, 200)), self.rng.normal(size=(128, 50)))
        assert out.shape == (128, 50)
        assert np.isfinite(out.data).all()

    def test_source_order_does_not_matter(self):
        booster = CrossModalBooster(4, 4, 8, 2, 2, self.rng)
        source = self.rng.normal(size=(4, 9))
        target = self.rng.normal(size=(4, 5))
        permuted = source[:, self.rng.permutation(9)]
        self.assertAllClose(booster(permuted, target).data, booster(source, target).data, atol=1e-12)

    def test_empty_sequence_rejected(self):
        booster = CrossModalBooster(4, 4, 8, 2, 1, self.rng)
        with self.assertRaises(ValueError):
            booster(np.ones((4, 0)), np.ones((4, 3)))

    def test_attention_maps_per_block(self):
        booster = CrossModalBooster(4, 3, 8, 4, 3, self.rng)
        maps = booster.attention_maps(self.rng.normal(size=(4, 6)), self.rng.normal(size=(3, 2)))
        assert [len(m) for m in maps] == [4, 4, 4]
        assert maps[2][3].shape == (2, 6)

    def test_gradient(self):
        booster = CrossModalBooster(3, 2, 4, 2, 1, self.rng)
        source = self.rng.normal(size=(3, 5))
        target = self.rng.normal(size=(2, 3))
        w = self.rng.normal(size=(4, 3))
        self.assertGradientsMatch(lambda: sum_all(mul(booster(source, target), w)), booster.parameters())


if __name__ == '__main__':
    unittest.main()
