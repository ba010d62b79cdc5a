'''Attentive statistics pooling decoders and the AAMSoftmax co-learning loss.'''

import numpy as np

from .layers import Affine, Conv1d, Module, uniform_init
from .tensor import (ParamTensor, Tensor, add, arc_margin, as_tensor, concat_rows, cross_entropy,
                     floor_sqrt, l2_normalize_rows, matmul, mul, repeat_rows, softmax_rows,
                     sub, sum_rows, tanh, transpose)

EMBEDDING_DIM = 192
VARIANCE_FLOOR = 1e-9


class ASPDecoder(Module):
    '''Attentive statistics pooling followed by an embedding affine layer.

    The scorer sees only the local frame (no utterance-level context).
    With ``per_channel`` every channel gets its own softmax over frames;
    otherwise one set of frame weights is shared by all channels.
    '''

    def __init__(self, channels, rng, embedding_dim=EMBEDDING_DIM, hidden=32, per_channel=True):
        self.channels = channels
        self.per_channel = per_channel
        self.score_in = Conv1d(channels, hidden, 1, rng)
        self.score_out = Conv1d(hidden, channels if per_channel else 1, 1, rng)
        self.embed = Affine(2 * channels, embedding_dim, rng)

    def attention(self, features):
        '''Frame weights of shape (C, T); every row sums to one.'''
        features = as_tensor(features)
        if features.data.ndim != 2 or features.shape[1] < 1:
            raise ValueError('ASP pooling needs at least one frame, got shape {}'.format(features.shape))
        alpha = softmax_rows(self.score_out(tanh(self.score_in(features))))
        if not self.per_channel:
            alpha = repeat_rows(alpha, self.channels)
        return alpha

    def statistics(self, features):
        '''Attention-weighted mean and standard deviation, each (C, 1).'''
        features = as_tensor(features)
        alpha = self.attention(features)
        mean = sum_rows(mul(alpha, features))
        second = sum_rows(mul(alpha, mul(features, features)))
        std = floor_sqrt(sub(second, mul(mean, mean)), VARIANCE_FLOOR)
        return mean, std

    def forward(self, features):
        '''Pool a (C, T) feature map into an (E, 1) speaker embedding.'''
        mean, std = self.statistics(features)
        return self.embed(concat_rows([mean, std]))


def asp_pool(features, decoder):
    return decoder(features)


class AAMSoftmaxHead(Module):
    '''Additive angular margin softmax classifier over training speakers.

    Parameters
    ----------
    embedding_dim : int
    n_classes : int
    rng : numpy.random.Generator
    scale : float
        Logit scale s > 0.
    margin : float
        Additive angle m in radians, 0 <= m < pi/2.
    '''

    def __init__(self, embedding_dim, n_classes, rng, scale=30.0, margin=0.2):
        if scale <= 0:
            raise ValueError('AAMSoftmax scale must be positive, was {}'.format(scale))
        if not 0 <= margin < np.pi / 2:
            raise ValueError('AAMSoftmax margin must lie in [0, pi/2), was {}'.format(margin))
        self.scale = float(scale)
        self.margin = float(margin)
        self.weight = ParamTensor(uniform_init(rng, (n_classes, embedding_dim), embedding_dim))

    @property
    def n_classes(self):
        return self.weight.shape[0]

    def cosines(self, embedding):
        '''Cosine between the embedding and every class weight, (n, 1).'''
        if not isinstance(embedding, Tensor):
            embedding = np.asarray(embedding, dtype=np.float64).reshape(-1, 1)
        embedding = as_tensor(embedding)
        unit = transpose(l2_normalize_rows(transpose(embedding)))
        return matmul(l2_normalize_rows(self.weight), unit)

    def forward(self, embedding, label):
        if not 0 <= label < self.n_classes:
            raise ValueError('label {} out of range for {} classes'.format(label, self.n_classes))
        logits = arc_margin(self.cosines(embedding), label, self.scale, self.margin)
        return cross_entropy(logits, label)


def aam_loss(embedding, label, head):
    return head(embedding, label)


def co_learning_loss(l_a, l_v, l_at, l_vt):
    '''Equal-weight sum of the four branch losses.'''
    return add(add(as_tensor(l_a), as_tensor(l_v)), add(as_tensor(l_at), as_tensor(l_vt)))
