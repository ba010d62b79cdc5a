import os
import unittest

import numpy as np

from colearn.config import Config
from colearn.tensor import Tape

SLOW = os.environ.get('COLEARN_SLOW') == '1'


class Base(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(20240611)

    def finite_difference(self, objective, array, step=1e-5):
        ''' Central differences of the float ``objective()`` with respect to
        every entry of ``array``, which is perturbed in place and restored.
        '''
        grad = np.empty_like(array)
        flat = array.reshape(-1)
        out = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            plus = float(objective())
            flat[i] = saved - step
            minus = float(objective())
            flat[i] = saved
            out[i] = (plus - minus) / (2 * step)
        return grad

    def tape_gradients(self, objective, tensors):
        ''' Gradients of the scalar tensor ``objective()`` for each of ``tensors``. '''
        for t in tensors:
            t.grad = np.zeros_like(t.data)
        with Tape() as tape:
            tape.backward(objective())
        return [t.grad.copy() for t in tensors]

    def assertGradientsMatch(self, objective, tensors, tolerance=1e-4):
        ''' Compare tape gradients with finite differences, max-normalized per tensor. '''
        analytic = self.tape_gradients(objective, tensors)
        for tensor, g in zip(tensors, analytic):
            n = self.finite_difference(lambda: objective().item(), tensor.data)
            scale = max(np.abs(g).max(), np.abs(n).max(), 1e-10)
            error = np.abs(g - n).max() / scale
            assert error < tolerance, '{}: relative error {:.3e}'.format(tensor.name or tensor.shape, error)

    def assertAllClose(self, actual, desired, atol=1e-9):
        np.testing.assert_allclose(np.asarray(actual), np.asarray(desired), rtol=0, atol=atol)


def reduced_desk_config(seed=0, epochs=10):
    ''' The default corpus with a narrower model and a shorter schedule, sized
    so that the slow end-to-end comparisons over three seeds stay under half
    an hour on a desktop CPU.
    '''
    config = Config()
    config.corpus.train_utterances = 10
    config.model.audio_channels = config.model.visual_channels = 32
    config.model.d = 64
    config.model.blocks = 1
    config.model.embedding_dim = 64
    config.train.epochs = epochs
    config.train.lr = 0.003
    config.train.milestones = (max(epochs - 4, 1), max(epochs - 2, 2))
    config.train.seed = seed
    return config
