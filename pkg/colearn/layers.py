'''Differentiable building blocks shared by the encoders, boosters and decoders.

All layers operate on feature sequences laid out channels-by-frames and
keep the frame count unchanged.
'''

import numpy as np

from .tensor import (ParamTensor, add, add_column, as_tensor, conv1d, layer_norm, matmul, relu)


def uniform_init(rng, shape, fan_in):
    '''Draw weights or biases uniformly from +/- sqrt(1 / fan_in).'''
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module(object):
    '''Base class for anything that owns :class:`ParamTensor` objects.

    Parameters are discovered by walking instance attributes in definition
    order; lists and dicts of modules are walked too, which yields stable
    dotted names such as ``'blocks.0.conv.weight'``.
    '''

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=''):
        '''Yield ``(name, ParamTensor)`` pairs in a deterministic order.'''
        for key, value in vars(self).items():
            if key.startswith('_'):
                continue
            for name, param in _walk(value, prefix + key):
                yield name, param

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def parameter_count(self):
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self):
        '''Copy every parameter's values into a ``{name: ndarray}`` dict.'''
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        '''Copy values from ``state`` into the matching parameters.

        Raises
        ------
        KeyError
            If ``strict`` and a parameter is missing from ``state``.
        ValueError
            If a stored shape disagrees with the parameter's shape.
        '''
        for name, p in self.named_parameters():
            if name not in state:
                if strict:
                    raise KeyError('missing tensor {}'.format(name))
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ValueError('shape mismatch for {}: stored {} vs model {}'.format(
                    name, value.shape, p.shape))
            p.data[...] = value


def _walk(value, name):
    if isinstance(value, ParamTensor):
        if value.name is None:
            value.name = name
        yield name, value
    elif isinstance(value, Module):
        for sub, param in value.named_parameters(name + '.'):
            yield sub, param
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            for sub, param in _walk(item, '{}.{}'.format(name, i)):
                yield sub, param
    elif isinstance(value, dict):
        for key, item in value.items():
            for sub, param in _walk(item, '{}.{}'.format(name, key)):
                yield sub, param


class Affine(Module):
    '''Per-frame affine map ``W x + b`` applied to every column.

    Attributes
    ----------
    weight : :class:`ParamTensor`
        Shape (out_dim, in_dim).
    bias : :class:`ParamTensor`
        Shape (out_dim,).
    '''

    def __init__(self, in_dim, out_dim, rng):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = ParamTensor(uniform_init(rng, (out_dim, in_dim), in_dim))
        self.bias = ParamTensor(uniform_init(rng, (out_dim,), in_dim))

    def forward(self, x):
        x = as_tensor(x)
        if x.shape[0] != self.in_dim:
            raise ValueError('Affine expects {} input rows, got shape {}'.format(self.in_dim, x.shape))
        return add_column(matmul(self.weight, x), self.bias)


class Conv1d(Module):
    '''1-D convolution with "same" zero padding; odd kernels only.'''

    def __init__(self, in_channels, out_channels, kernel, rng, dilation=1):
        if kernel % 2 == 0:
            raise ValueError('Conv1d needs an odd kernel, got {}'.format(kernel))
        self.kernel = kernel
        self.dilation = dilation
        self.weight = ParamTensor(uniform_init(rng, (out_channels, in_channels, kernel),
                                               in_channels * kernel))
        self.bias = ParamTensor(uniform_init(rng, (out_channels,), in_channels * kernel))

    @property
    def padding(self):
        return self.dilation * (self.kernel - 1) // 2

    def forward(self, x):
        return conv1d(x, self.weight, self.bias, self.dilation)


class LayerNorm(Module):
    '''Channel-axis layer normalization with learnable gain and bias.'''

    def __init__(self, channels):
        self.gain = ParamTensor(np.ones(channels))
        self.bias = ParamTensor(np.zeros(channels))

    def forward(self, x):
        return layer_norm(x, self.gain, self.bias)


class FeedForward(Module):
    '''Affine, ReLU, Affine; input and output widths are equal.

    The residual connection, when wanted, is the caller's business.
    '''

    def __init__(self, dim, rng, hidden=None):
        self.hidden = hidden or 2 * dim
        self.fc1 = Affine(dim, self.hidden, rng)
        self.fc2 = Affine(self.hidden, dim, rng)

    def forward(self, x):
        return self.fc2(relu(self.fc1(x)))


class TCNBlock(Module):
    '''Residual dilated temporal block: ``x + Conv(ReLU(Conv(x)))``.'''

    def __init__(self, channels, rng, kernel=5, dilation=1):
        self.conv1 = Conv1d(channels, channels, kernel, rng, dilation)
        self.conv2 = Conv1d(channels, channels, kernel, rng, dilation)

    @property
    def reach(self):
        '''Frames of context on each side seen by one output frame.'''
        return self.conv1.padding + self.conv2.padding

    def forward(self, x):
        x = as_tensor(x)
        return add(x, self.conv2(relu(self.conv1(x))))
