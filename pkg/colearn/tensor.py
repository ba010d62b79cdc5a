'''Dense float64 arrays with tape-based reverse-mode differentiation.

Every primitive below computes its forward value with ``numpy`` and, when a
:class:`Tape` is active and at least one input requires a gradient, records
a backward rule on that tape. :meth:`Tape.backward` replays the rules in
reverse recorded order.

>>> w = ParamTensor(np.ones((2, 3)), name='w')
>>> with Tape() as tape:
...     loss = sum_all(matmul(w, Tensor(np.ones((3, 1)))))
...     tape.backward(loss)
>>> w.grad
array([[1., 1., 1.],
       [1., 1., 1.]])

Outside of a tape the primitives run forward only, which is what evaluation
uses.
'''

import threading

import numpy as np

LAYER_NORM_EPS = 1e-5

_local = threading.local()


def _tape_stack():
    stack = getattr(_local, 'stack', None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape():
    '''Return the innermost active tape of this thread, or None.'''
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor(object):
    '''A dense float64 array, possibly a node of a recorded computation.

    Attributes
    ----------
    data : numpy.ndarray
        The values, always ``float64``.
    grad : numpy.ndarray or None
        Accumulated gradient; allocated on first accumulation.
    requires_grad : bool
        True if gradients should flow into this tensor.
    name : str or None
        Optional label used in error messages and reports.
    '''

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._tape = None

    def __repr__(self):
        return '<Tensor{} shape={}>'.format(' ' + self.name if self.name else '', self.shape)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def values(self):
        '''Flat row-major view of the data.'''
        return self.data.reshape(-1)

    def item(self):
        '''Return the single value of a one-element tensor as a float.'''
        if self.size != 1:
            raise ValueError('item() needs a one-element tensor, shape was {}'.format(self.shape))
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data.copy()

    def _accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad


class ParamTensor(Tensor):
    '''A learnable tensor with a persistent gradient buffer.

    ``grad`` always has the shape of ``data`` and is all-zero after
    :meth:`zero_grad`.
    '''

    def __init__(self, data, requires_grad=True, name=None):
        super(ParamTensor, self).__init__(np.array(data, dtype=np.float64), requires_grad, name)
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return '<ParamTensor{} shape={}>'.format(' ' + self.name if self.name else '', self.shape)

    def zero_grad(self):
        self.grad[...] = 0.0


class _Record(object):
    __slots__ = ('output', 'inputs', 'rule')

    def __init__(self, output, inputs, rule):
        self.output = output
        self.inputs = inputs
        self.rule = rule


class Tape(object):
    '''An ordered record of primitive operations and their backward rules.

    Use as a context manager; primitives executed inside the ``with`` block
    are recorded on this tape. The tape is emptied by :meth:`backward`.
    '''

    def __init__(self):
        self._records = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def __len__(self):
        return len(self._records)

    def record(self, output, inputs, rule):
        '''Record ``output = op(*inputs)`` with ``rule(grad_out) -> grads``.'''
        output._tape = self
        self._records.append(_Record(output, inputs, rule))

    def backward(self, loss):
        '''Populate gradients of every reachable tensor requiring them.

        Parameters
        ----------
        loss : :class:`Tensor`
            A one-element tensor recorded on this tape.

        Raises
        ------
        ValueError
            If ``loss`` is not a scalar.
        '''
        if loss.size != 1:
            raise ValueError('backward needs a scalar loss, shape was {}'.format(loss.shape))
        if loss.requires_grad:
            loss._accumulate(np.ones_like(loss.data))
        for record in reversed(self._records):
            grad = record.output.grad
            if grad is None:
                continue
            for tensor, g in zip(record.inputs, record.rule(grad)):
                if g is not None and tensor.requires_grad:
                    tensor._accumulate(g)
        for record in self._records:
            if not isinstance(record.output, ParamTensor):
                record.output.grad = None
            record.output._tape = None
        self._records = []


def backward(loss):
    '''Run the backward pass of the tape ``loss`` was recorded on.'''
    if loss.size != 1:
        raise ValueError('backward needs a scalar loss, shape was {}'.format(loss.shape))
    if loss._tape is None:
        raise ValueError('loss was not recorded on an active tape')
    loss._tape.backward(loss)


def as_tensor(x):
    '''Wrap arrays and numbers as constant tensors; tensors pass through.'''
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, inputs, rule):
    out = Tensor(data, requires_grad=any(t.requires_grad for t in inputs))
    tape = active_tape()
    if out.requires_grad and tape is not None:
        tape.record(out, inputs, rule)
    return out


def _check_2d(name, *tensors):
    for t in tensors:
        if t.data.ndim != 2:
            raise ValueError('{} expects matrices, got shape {}'.format(name, t.shape))


def _check_same(name, a, b):
    if a.shape != b.shape:
        raise ValueError('{}: shape mismatch {} vs {}'.format(name, a.shape, b.shape))


##
#
#   Linear algebra and elementwise arithmetic
#
##

def matmul(a, b):
    '''Matrix product of an m-by-k and a k-by-n tensor.'''
    a, b = as_tensor(a), as_tensor(b)
    _check_2d('matmul', a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError('matmul: inner dimensions disagree, {} @ {}'.format(a.shape, b.shape))
    A, B = a.data, b.data

    def rule(g):
        return g @ B.T, A.T @ g
    return _result(A @ B, (a, b), rule)


def transpose(a):
    a = as_tensor(a)
    _check_2d('transpose', a)
    return _result(a.data.T.copy(), (a,), lambda g: (g.T,))


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same('add', a, b)
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same('sub', a, b)
    return _result(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b):
    '''Elementwise product.'''
    a, b = as_tensor(a), as_tensor(b)
    _check_same('mul', a, b)
    A, B = a.data, b.data
    return _result(A * B, (a, b), lambda g: (g * B, g * A))


def scale(a, factor):
    '''Multiply by a constant.'''
    a = as_tensor(a)
    factor = float(factor)
    return _result(a.data * factor, (a,), lambda g: (g * factor,))


def add_column(x, bias):
    '''Add a length-m bias vector to every column of an m-by-n tensor.'''
    x, bias = as_tensor(x), as_tensor(bias)
    _check_2d('add_column', x)
    if bias.shape != (x.shape[0],):
        raise ValueError('add_column: bias shape {} does not fit {}'.format(bias.shape, x.shape))
    return _result(x.data + bias.data[:, None], (x, bias), lambda g: (g, g.sum(axis=1)))


def sum_all(a):
    '''Sum of every element, as a 0-d tensor.'''
    a = as_tensor(a)
    shape = a.shape
    return _result(np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def sum_rows(a):
    '''Sum each row of an m-by-n tensor into an m-by-1 column.'''
    a = as_tensor(a)
    _check_2d('sum_rows', a)
    n = a.shape[1]
    return _result(a.data.sum(axis=1, keepdims=True), (a,), lambda g: (np.repeat(g, n, axis=1),))


def concat_rows(tensors):
    '''Stack tensors with equal column counts along the row axis.'''
    tensors = [as_tensor(t) for t in tensors]
    _check_2d('concat_rows', *tensors)
    cols = {t.shape[1] for t in tensors}
    if len(cols) != 1:
        raise ValueError('concat_rows: column counts differ: {}'.format([t.shape for t in tensors]))
    bounds = np.cumsum([0] + [t.shape[0] for t in tensors])

    def rule(g):
        return tuple(g[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]))
    return _result(np.vstack([t.data for t in tensors]), tuple(tensors), rule)


def repeat_rows(a, count):
    '''Tile a 1-by-n tensor into a count-by-n tensor.'''
    a = as_tensor(a)
    _check_2d('repeat_rows', a)
    if a.shape[0] != 1:
        raise ValueError('repeat_rows expects a single row, got shape {}'.format(a.shape))
    return _result(np.repeat(a.data, count, axis=0), (a,), lambda g: (g.sum(axis=0, keepdims=True),))


##
#
#   Nonlinearities
#
##

def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    # np.maximum keeps NaN, np.where(mask, ...) would zero it
    return _result(np.maximum(a.data, 0.0), (a,), lambda g: (g * mask,))


def tanh(a):
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def maximum(a, b):
    '''Elementwise maximum; on exact ties the gradient goes to ``a``.'''
    a, b = as_tensor(a), as_tensor(b)
    _check_same('maximum', a, b)
    first = a.data >= b.data
    return _result(np.maximum(a.data, b.data), (a, b),
                   lambda g: (np.where(first, g, 0.0), np.where(first, 0.0, g)))


def floor_sqrt(a, floor):
    '''Elementwise ``sqrt(max(a, floor))``; zero gradient where clamped.'''
    a = as_tensor(a)
    above = a.data > floor
    y = np.sqrt(np.maximum(a.data, floor))
    return _result(y, (a,), lambda g: (np.where(above, g * 0.5 / y, 0.0),))


def _softmax_rows_backward(y, g):
    return y * (g - (g * y).sum(axis=1, keepdims=True))


def softmax_rows(a):
    '''Softmax of every row, stabilized by subtracting the row maximum.'''
    a = as_tensor(a)
    _check_2d('softmax_rows', a)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    return _result(y, (a,), lambda g: (_softmax_rows_backward(y, g),))


def _layer_norm_backward(xhat, inv_std, gain, g):
    dxhat = g * gain[:, None]
    dx = inv_std * (dxhat - dxhat.mean(axis=0, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=0, keepdims=True))
    return dx, (g * xhat).sum(axis=1), g.sum(axis=1)


def layer_norm(x, gain, bias, eps=LAYER_NORM_EPS):
    '''Normalize over the channel axis (axis 0) of a C-by-T tensor or a C-vector.

    Each column is shifted to zero mean and scaled to unit (biased) variance
    before the per-channel ``gain`` and ``bias`` are applied.

    Raises
    ------
    ValueError
        If there are fewer than two channels.
    '''
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    channels = x.shape[0] if x.data.ndim else 0
    if channels < 2:
        raise ValueError('layer_norm needs at least 2 channels, shape was {}'.format(x.shape))
    if gain.shape != (channels,) or bias.shape != (channels,):
        raise ValueError('layer_norm: gain {} / bias {} do not fit {}'.format(gain.shape, bias.shape, x.shape))
    shape = x.shape
    X = x.data.reshape(channels, -1)
    mean = X.mean(axis=0, keepdims=True)
    var = ((X - mean) ** 2).mean(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (X - mean) * inv_std
    y = xhat * gain.data[:, None] + bias.data[:, None]
    G = gain.data

    def rule(g):
        dx, dgain, dbias = _layer_norm_backward(xhat, inv_std, G, g.reshape(channels, -1))
        return dx.reshape(shape), dgain, dbias
    return _result(y.reshape(shape), (x, gain, bias), rule)


##
#
#   Convolution
#
##

def _conv1d_backward(xpad, weight, dilation, frames, padding, g):
    out_ch, in_ch, kernel = weight.shape
    dxpad = np.zeros_like(xpad)
    dw = np.empty_like(weight)
    for j in range(kernel):
        window = xpad[:, j * dilation:j * dilation + frames]
        dw[:, :, j] = g @ window.T
        dxpad[:, j * dilation:j * dilation + frames] += weight[:, :, j].T @ g
    return dxpad[:, padding:padding + frames], dw, g.sum(axis=1)


def conv1d(x, weight, bias, dilation=1):
    '''Same-length 1-D convolution of a C_in-by-T tensor.

    Parameters
    ----------
    x : :class:`Tensor`
        Input of shape (C_in, T).
    weight : :class:`Tensor`
        Kernel of shape (C_out, C_in, K) with K odd.
    bias : :class:`Tensor`
        Bias of shape (C_out,).
    dilation : int
        Spacing between kernel taps. Zero padding of ``dilation * (K - 1) / 2``
        frames on both sides keeps the output at T frames.

    Returns
    -------
    y : :class:`Tensor`
        Output of shape (C_out, T).
    '''
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    _check_2d('conv1d', x)
    if weight.data.ndim != 3:
        raise ValueError('conv1d weight must be (out, in, kernel), was {}'.format(weight.shape))
    out_ch, in_ch, kernel = weight.shape
    if kernel % 2 == 0:
        raise ValueError('conv1d needs an odd kernel for same padding, got {}'.format(kernel))
    if x.shape[0] != in_ch:
        raise ValueError('conv1d: input has {} channels, kernel expects {}'.format(x.shape[0], in_ch))
    if bias.shape != (out_ch,):
        raise ValueError('conv1d: bias shape {} does not fit {} outputs'.format(bias.shape, out_ch))
    if dilation < 1:
        raise ValueError('conv1d dilation must be >= 1, was {}'.format(dilation))
    frames = x.shape[1]
    padding = dilation * (kernel - 1) // 2
    xpad = np.pad(x.data, ((0, 0), (padding, padding)))
    W = weight.data
    y = np.repeat(bias.data[:, None], frames, axis=1)
    for j in range(kernel):
        y = y + W[:, :, j] @ xpad[:, j * dilation:j * dilation + frames]
    return _result(y, (x, weight, bias),
                   lambda g: _conv1d_backward(xpad, W, dilation, frames, padding, g))


##
#
#   Losses
#
##

def l2_normalize_rows(a):
    '''Scale every row of a matrix to unit Euclidean length.

    Raises
    ------
    ValueError
        If any row has zero norm.
    '''
    a = as_tensor(a)
    _check_2d('l2_normalize_rows', a)
    norms = np.sqrt((a.data ** 2).sum(axis=1, keepdims=True))
    if np.any(norms == 0):
        raise ValueError('cannot normalize a zero-norm vector ({})'.format(a.name or 'unnamed'))
    y = a.data / norms

    def rule(g):
        return ((g - y * (g * y).sum(axis=1, keepdims=True)) / norms,)
    return _result(y, (a,), rule)


def arc_margin(cosine, label, scale_factor, margin):
    '''Scaled cosine logits with an additive angular margin on ``label``.

    Non-target logits are ``s * cos(theta_j)``; the target logit is
    ``s * (cos(theta) cos(m) - sin(theta) sin(m))`` with
    ``sin(theta) = sqrt(max(1 - cos^2(theta), 0))``.
    '''
    cosine = as_tensor(cosine)
    c = cosine.data.reshape(-1)
    if not 0 <= label < c.size:
        raise ValueError('label {} out of range for {} classes'.format(label, c.size))
    cos_m, sin_m = np.cos(margin), np.sin(margin)
    sin_t = np.sqrt(max(1.0 - c[label] ** 2, 0.0))
    logits = scale_factor * c
    logits[label] = scale_factor * (c[label] * cos_m - sin_t * sin_m)
    target_slope = scale_factor * (cos_m + (c[label] / sin_t * sin_m if sin_t > 0 else 0.0))
    shape = cosine.shape

    def rule(g):
        flat = g.reshape(-1)
        d = flat * scale_factor
        d[label] = flat[label] * target_slope
        return (d.reshape(shape),)
    return _result(logits.reshape(shape), (cosine,), rule)


def cross_entropy(logits, label):
    '''Softmax cross-entropy of a logit vector against a class index.'''
    logits = as_tensor(logits)
    z = logits.data.reshape(-1)
    if not 0 <= label < z.size:
        raise ValueError('label {} out of range for {} classes'.format(label, z.size))
    shifted = z - z.max()
    log_norm = np.log(np.exp(shifted).sum())
    p = np.exp(shifted - log_norm)
    shape = logits.shape

    def rule(g):
        d = p.copy()
        d[label] -= 1.0
        return ((float(g) * d).reshape(shape),)
    return _result(np.array(log_norm - shifted[label]), (logits,), rule)
