'''Named random substreams derived from a single root seed.

Every random draw in the package (corpus generation, parameter init,
batch shuffling, augmentation) comes from a generator returned by
:func:`substream`, so fixing the root seed fixes the whole run.
'''

import zlib

import numpy as np


def _entropy(root_seed, name):
    if root_seed < 0:
        raise ValueError('Root seed must be nonnegative, was {}.'.format(root_seed))
    return [int(root_seed), zlib.crc32(name.encode('utf-8'))]


def substream(root_seed, name):
    '''Return a generator for the named substream of a root seed.

    Parameters
    ----------
    root_seed : int
        Root seed of the run.
    name : str
        Substream name, e.g. ``'corpus/utt/spk003-utt007'`` or ``'init/audio_encoder'``.

    Returns
    -------
    rng : numpy.random.Generator
    '''
    return np.random.default_rng(np.random.SeedSequence(_entropy(root_seed, name)))
