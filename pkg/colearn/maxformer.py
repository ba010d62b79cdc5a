'''Cross-modal boosters built from MaxFormer blocks.

A booster re-expresses a *source* modality on the time axis of a *target*
modality. Inside every block the target stream queries the source stream
through multi-head cross attention, and the attended ("transferred")
features compete elementwise with the target features in a max-feature-map
stage::

    F' = G(max(F_theta1(F_target), F_transferred))

The output always has as many frames as the target stream, whatever the
length of the source stream. There is no positional encoding; temporal
context comes from the encoders' convolutions.
'''

import numpy as np

from .layers import Affine, Conv1d, FeedForward, LayerNorm, Module, uniform_init
from .tensor import (ParamTensor, as_tensor, concat_rows, matmul, maximum, scale, softmax_rows,
                     transpose)


class AttentionHead(Module):
    '''Query, key and value projections of one head, each d-by-d_h.'''

    def __init__(self, d, d_head, rng):
        self.w_q = ParamTensor(uniform_init(rng, (d, d_head), d))
        self.w_k = ParamTensor(uniform_init(rng, (d, d_head), d))
        self.w_v = ParamTensor(uniform_init(rng, (d, d_head), d))


def attention_weights(query, key, head, temperature):
    '''Row-stochastic T_q-by-T_k attention of one head.

    ``softmax((Q^T W_Q)(K^T W_K)^T / temperature)`` over the key axis.
    '''
    q = matmul(transpose(query), head.w_q)
    k = matmul(transpose(key), head.w_k)
    return softmax_rows(scale(matmul(q, transpose(k)), 1.0 / temperature))


def single_head_transfer(query, key, value, head, temperature):
    '''Attend from ``query`` (d, T_q) over ``key``/``value`` (d, T_k).

    Returns
    -------
    transferred : :class:`Tensor`
        Shape (d_h, T_q): the values, aligned to the query frames.
    '''
    query, key, value = as_tensor(query), as_tensor(key), as_tensor(value)
    if key.shape != value.shape:
        raise ValueError('key {} and value {} must match'.format(key.shape, value.shape))
    if query.shape[0] != key.shape[0]:
        raise ValueError('query {} and key {} have different widths'.format(query.shape, key.shape))
    weights = attention_weights(query, key, head, temperature)
    return transpose(matmul(weights, matmul(transpose(value), head.w_v)))


def multi_head_transfer(query, key, value, block):
    '''Concatenate every head's output and project it back to d channels.'''
    outputs = [single_head_transfer(query, key, value, head, block.temperature)
               for head in block.heads]
    return matmul(transpose(block.w_out), concat_rows(outputs))


def mfm_max(target, transferred):
    '''Max-feature-map competition; ties route the gradient to ``target``.'''
    return maximum(target, transferred)


def mfm_fuse(target, transferred, block):
    '''``G_theta2(max(F_theta1(target), transferred))`` for one block.

    Raises
    ------
    ValueError
        If the two maps do not have the same shape.
    '''
    target, transferred = as_tensor(target), as_tensor(transferred)
    if target.shape != transferred.shape:
        raise ValueError('mfm_fuse: target {} vs transferred {}'.format(target.shape, transferred.shape))
    return block.post(mfm_max(block.theta1(target), transferred))


class PostFusion(Module):
    '''G_theta2: 1x1 convolution, layer norm, feed-forward network.'''

    def __init__(self, d, rng):
        self.conv = Conv1d(d, d, 1, rng)
        self.norm = LayerNorm(d)
        self.ffn = FeedForward(d, rng)

    def forward(self, x):
        return self.ffn(self.norm(self.conv(x)))


class InputStream(Module):
    '''Feed-forward network followed by layer norm, applied to one stream.'''

    def __init__(self, d, rng):
        self.ffn = FeedForward(d, rng)
        self.norm = LayerNorm(d)

    def forward(self, x):
        return self.norm(self.ffn(x))


class MaxFormerBlock(Module):
    '''Cross-modal attention followed by max-feature-map fusion.

    Parameters
    ----------
    d : int
        Model width; must be divisible by ``heads``.
    heads : int
        Number of attention heads m; each head has width d / m.
    rng : numpy.random.Generator
    scale_by_model_dim : bool
        Divide attention logits by sqrt(d) when True, by sqrt(d / m) otherwise.
    '''

    def __init__(self, d, heads, rng, scale_by_model_dim=True):
        if heads < 1 or d % heads:
            raise ValueError('d={} must be divisible by heads={}'.format(d, heads))
        self.d = d
        self.n_heads = heads
        self.d_head = d // heads
        self.temperature = float(np.sqrt(d if scale_by_model_dim else self.d_head))
        self.target_in = InputStream(d, rng)
        self.source_in = InputStream(d, rng)
        self.heads = [AttentionHead(d, self.d_head, rng) for _ in range(heads)]
        self.w_out = ParamTensor(uniform_init(rng, (heads * self.d_head, d), heads * self.d_head))
        self.theta1 = Affine(d, d, rng)
        self.post = PostFusion(d, rng)

    def streams(self, source, target):
        '''Return the (query, key/value) streams after FFN + LN.'''
        return self.source_in(source), self.target_in(target)

    def fused_max(self, source, target):
        '''The max stage before G_theta2, with both competing maps.

        Returns
        -------
        fused, target_branch, transferred : :class:`Tensor`
        '''
        kv, query = self.streams(source, target)
        transferred = multi_head_transfer(query, kv, kv, self)
        target_branch = self.theta1(query)
        return mfm_max(target_branch, transferred), target_branch, transferred

    def attention_maps(self, source, target):
        '''Per-head T_target-by-T_source attention weights as arrays.'''
        kv, query = self.streams(source, target)
        return [attention_weights(query, kv, head, self.temperature).numpy() for head in self.heads]

    def forward(self, source, target):
        kv, query = self.streams(source, target)
        transferred = multi_head_transfer(query, kv, kv, self)
        return mfm_fuse(query, transferred, self)


class CrossModalBooster(Module):
    '''Input affines and a stack of MaxFormer blocks.

    Block k's fused output is block k+1's target stream; the projected
    source stream feeds every block.
    '''

    def __init__(self, source_channels, target_channels, d, heads, blocks, rng, scale_by_model_dim=True):
        self.d = d
        self.source_affine = Affine(source_channels, d, rng)
        self.target_affine = Affine(target_channels, d, rng)
        self.blocks = [MaxFormerBlock(d, heads, rng, scale_by_model_dim) for _ in range(blocks)]

    def _project(self, source, target):
        source, target = as_tensor(source), as_tensor(target)
        if source.data.ndim != 2 or target.data.ndim != 2 or not source.shape[1] or not target.shape[1]:
            raise ValueError('booster needs nonempty (C, T) sequences, got {} and {}'.format(
                source.shape, target.shape))
        return self.source_affine(source), self.target_affine(target)

    def forward(self, source, target):
        '''Return the enhanced target sequence, shape (d, T_target).'''
        source, target = self._project(source, target)
        for block in self.blocks:
            target = block(source, target)
        return target

    def attention_maps(self, source, target):
        '''Attention weights of every head of every block.'''
        source, target = self._project(source, target)
        maps = []
        for block in self.blocks:
            maps.append(block.attention_maps(source, target))
            target = block(source, target)
        return maps
