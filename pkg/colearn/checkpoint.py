'''Binary checkpoint files: a header, a config snapshot and named tensors.

Layout, all little-endian::

    magic 'CLCK' | version u16 | epoch u32 | tensor count u32 | kind length u16 | config length u32
    kind (utf-8) | config text (utf-8)
    per tensor: name length u16 | name (utf-8) | ndim u8 | dims u32 * ndim | float64 data, row-major

Optimizer moments are stored as ordinary tensors under the ``optim.``
prefix. Writing then reading a checkpoint reproduces every value bit for bit.
'''

import collections
import struct

import numpy as np

from .config import Config

MAGIC = b'CLCK'
VERSION = 1
OPTIMIZER_PREFIX = 'optim.'


class Checkpoint(object):
    '''Model tensors, optimizer moments, an epoch counter and a config snapshot.

    Attributes
    ----------
    kind : str
        ``co-learn``, ``baseline-audio`` or ``baseline-visual``.
    epoch : int
        Number of completed epochs.
    config_text : str
        The serialized :class:`colearn.config.Config` of the run.
    tensors : OrderedDict
        Tensor name to ``float64`` array.
    '''

    BINARY_FORMAT = '<4sHIIHI'

    def __init__(self, kind, epoch=0, config_text='', tensors=None):
        self.kind = kind
        self.epoch = int(epoch)
        self.config_text = config_text
        self.tensors = collections.OrderedDict(tensors or ())

    def __repr__(self):
        return '<Checkpoint {} epoch={} tensors={}>'.format(self.kind, self.epoch, len(self.tensors))

    @classmethod
    def capture(cls, model, config, epoch, optimizer=None):
        '''Snapshot ``model`` (and ``optimizer``'s moments) after ``epoch`` epochs.'''
        tensors = collections.OrderedDict(
            (name, p.data.copy()) for name, p in model.named_parameters())
        if optimizer is not None:
            for name, value in optimizer.state_tensors().items():
                tensors[OPTIMIZER_PREFIX + name] = value
        return cls(model.kind, epoch, config.dumps(), tensors)

    @property
    def config(self):
        return Config.loads(self.config_text)

    def model_state(self):
        '''Tensors that belong to the model, optimizer state excluded.'''
        return collections.OrderedDict(
            (k, v) for k, v in self.tensors.items() if not k.startswith(OPTIMIZER_PREFIX))

    def optimizer_state(self):
        n = len(OPTIMIZER_PREFIX)
        return collections.OrderedDict(
            (k[n:], v) for k, v in self.tensors.items() if k.startswith(OPTIMIZER_PREFIX))

    def write(self, handle):
        '''Write binary checkpoint data to a file handle.'''
        kind = self.kind.encode('utf-8')
        config = self.config_text.encode('utf-8')
        handle.write(struct.pack(self.BINARY_FORMAT, MAGIC, VERSION, self.epoch,
                                 len(self.tensors), len(kind), len(config)))
        handle.write(kind)
        handle.write(config)
        for name, value in self.tensors.items():
            raw = name.encode('utf-8')
            value = np.asarray(value, dtype=np.float64)
            handle.write(struct.pack('<H', len(raw)))
            handle.write(raw)
            handle.write(struct.pack('<B', value.ndim))
            handle.write(struct.pack('<' + 'I' * value.ndim, *value.shape))
            handle.write(np.ascontiguousarray(value, dtype='<f8').tobytes())

    @classmethod
    def read(cls, handle):
        '''Read a checkpoint from a binary file handle.

        Raises
        ------
        ValueError
            On a wrong magic value, an unsupported version or truncated data.
        '''
        size = struct.calcsize(cls.BINARY_FORMAT)
        magic, version, epoch, count, kind_len, config_len = struct.unpack(
            cls.BINARY_FORMAT, _read_exact(handle, size))
        if magic != MAGIC:
            raise ValueError('not a checkpoint: magic {!r}'.format(magic))
        if version != VERSION:
            raise ValueError('unsupported checkpoint version {}'.format(version))
        kind = _read_exact(handle, kind_len).decode('utf-8')
        config_text = _read_exact(handle, config_len).decode('utf-8')
        tensors = collections.OrderedDict()
        for _ in range(count):
            name_len, = struct.unpack('<H', _read_exact(handle, 2))
            name = _read_exact(handle, name_len).decode('utf-8')
            ndim, = struct.unpack('<B', _read_exact(handle, 1))
            dims = struct.unpack('<' + 'I' * ndim, _read_exact(handle, 4 * ndim))
            count_values = int(np.prod(dims, dtype=np.int64))
            data = _read_exact(handle, 8 * count_values)
            tensors[name] = np.frombuffer(data, dtype='<f8').astype(np.float64).reshape(dims)
        return cls(kind, epoch, config_text, tensors)

    def save(self, path):
        with open(path, 'wb') as handle:
            self.write(handle)

    @classmethod
    def load(cls, path):
        with open(path, 'rb') as handle:
            return cls.read(handle)


def _read_exact(handle, size):
    data = handle.read(size)
    if len(data) != size:
        raise ValueError('truncated checkpoint: wanted {} bytes, got {}'.format(size, len(data)))
    return data

