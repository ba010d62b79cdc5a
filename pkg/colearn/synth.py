'''Seeded synthetic audio-visual speaker corpora.

Every speaker owns three unit-norm identity vectors: one heard only in the
audio stream, one seen only in the visual stream, and one shared by both.
An utterance draws a smooth 16-dimensional latent trajectory z(t) (a sum of
three low-frequency sinusoids per dimension) and samples it at 100 Hz for
audio and 25 Hz for visual::

    audio frame  = A [audio_identity;  shared_identity * z(t)] + sigma_a * noise
    visual frame = B [visual_identity; shared_identity * z(t)] + sigma_v * noise

A and B are Gaussian mixing maps fixed for the whole corpus, with entries of
variance 1 / fan_in so a unit source vector maps to a frame of about unit
norm. Each noise entry has unit variance; a fraction ``session`` of it is
drawn once per utterance and held for every frame (channel and session
effects), the rest is fresh per frame. The per-utterance part does not
average out over frames.

A corpus directory contains::

    index.txt          statistics header, then one line per utterance
    audio/<id>.mat     80 x T_a matrix
    visual/<id>.mat    32 x T_v matrix
    trials.txt         "enroll_id test_id label" per line
    corpus.cfg         the configuration the corpus was generated from
'''

import collections
import io
import logging
import os
import struct
import warnings

import numpy as np

from .config import Config
from .errors import ConfigError
from .seeding import substream

logger = logging.getLogger(__name__)

AUDIO_RATE = 100
VISUAL_RATE = 25
RATE_RATIO = AUDIO_RATE // VISUAL_RATE
SINUSOIDS = 3
SESSION_NOISE = 0.1
FREQUENCY_RANGE = (0.5, 3.0)

TrialPair = collections.namedtuple('TrialPair', 'enroll test label')


def _unit_rows(rng, count, dim):
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class SyntheticSpeaker(object):
    '''A speaker's audio-only, visual-only and shared identity vectors.'''

    def __init__(self, id, audio_identity, visual_identity, shared_identity):
        self.id = int(id)
        self.audio_identity = np.asarray(audio_identity, dtype=np.float64)
        self.visual_identity = np.asarray(visual_identity, dtype=np.float64)
        self.shared_identity = np.asarray(shared_identity, dtype=np.float64)

    def __repr__(self):
        return '<SyntheticSpeaker {}>'.format(self.id)


class SyntheticUtterance(object):
    '''Synchronized audio (80, T_a) and visual (32, T_v) frames of one clip.

    Attributes
    ----------
    id : str
    speaker : int
    audio : numpy.ndarray
    visual : numpy.ndarray
    audio_noise, visual_noise : float
    '''

    def __init__(self, id, speaker, audio, visual, audio_noise, visual_noise):
        self.id = id
        self.speaker = int(speaker)
        self.audio = np.asarray(audio, dtype=np.float64)
        self.visual = np.asarray(visual, dtype=np.float64)
        self.audio_noise = float(audio_noise)
        self.visual_noise = float(visual_noise)
        if self.audio.shape[1] != RATE_RATIO * self.visual.shape[1]:
            raise ValueError('{}: {} audio frames for {} visual frames'.format(
                id, self.audio.shape[1], self.visual.shape[1]))

    def __repr__(self):
        return '<SyntheticUtterance {} speaker={} T_v={}>'.format(self.id, self.speaker, self.visual.shape[1])

    @property
    def visual_frames(self):
        return self.visual.shape[1]


class MixingMaps(object):
    '''The fixed audio map A (80 x 96) and visual map B (32 x 48) of a corpus.'''

    def __init__(self, audio, visual):
        self.audio = np.asarray(audio, dtype=np.float64)
        self.visual = np.asarray(visual, dtype=np.float64)

    @classmethod
    def generate(cls, seed, audio_dim=80, visual_dim=32, shared_dim=16):
        rng = substream(seed, 'corpus/mixing')
        audio_in, visual_in = audio_dim + shared_dim, visual_dim + shared_dim
        return cls(rng.standard_normal((audio_dim, audio_in)) / np.sqrt(audio_in),
                   rng.standard_normal((visual_dim, visual_in)) / np.sqrt(visual_in))


def gen_population(n_speakers, seed, audio_dim=80, visual_dim=32, shared_dim=16):
    '''Draw ``n_speakers`` speakers with unit-norm identity vectors.

    Raises
    ------
    ValueError
        If fewer than two speakers are requested.
    '''
    if n_speakers < 2:
        raise ValueError('a population needs at least 2 speakers, got {}'.format(n_speakers))
    rng = substream(seed, 'corpus/population')
    audio = _unit_rows(rng, n_speakers, audio_dim)
    visual = _unit_rows(rng, n_speakers, visual_dim)
    shared = _unit_rows(rng, n_speakers, shared_dim)
    return [SyntheticSpeaker(i, audio[i], visual[i], shared[i]) for i in range(n_speakers)]


def latent_trajectory(rng, dim, times):
    '''Sum of three random sinusoids per dimension, shape (dim, len(times)).'''
    freqs = rng.uniform(FREQUENCY_RANGE[0], FREQUENCY_RANGE[1], size=(dim, SINUSOIDS))
    phases = rng.uniform(0.0, 2 * np.pi, size=(dim, SINUSOIDS))
    angles = 2 * np.pi * freqs[:, :, None] * np.asarray(times)[None, None, :] + phases[:, :, None]
    return np.sin(angles).sum(axis=1) / np.sqrt(SINUSOIDS)


def gen_utterance(spk, T_v, sigma_a, sigma_v, seed, maps=None, utt_id=None, session=SESSION_NOISE):
    '''Generate one utterance of ``spk`` with ``T_v`` visual frames.

    Parameters
    ----------
    spk : :class:`SyntheticSpeaker`
    T_v : int
        Visual frame count; the audio stream gets ``4 * T_v`` frames.
    sigma_a, sigma_v : float
        Standard deviation of the additive frame noise.
    seed : int
        Root seed; the utterance draws from the ``corpus/utt/<id>`` substream.
    maps : :class:`MixingMaps`, optional
        Defaults to the maps derived from ``seed``.
    utt_id : str, optional
        Utterance id, defaults to ``spk<speaker>-utt000``.
    session : float
        Share of the noise variance, in [0, 1], held fixed over the utterance.

    Raises
    ------
    ValueError
        If ``T_v`` is smaller than 2 or ``session`` lies outside [0, 1].
    '''
    if T_v < 2:
        raise ValueError('an utterance needs at least 2 visual frames, got {}'.format(T_v))
    if not 0.0 <= session <= 1.0:
        raise ValueError('session noise share must lie in [0, 1], got {}'.format(session))
    if utt_id is None:
        utt_id = utterance_id(spk.id, 0)
    if maps is None:
        maps = MixingMaps.generate(seed, spk.audio_identity.size, spk.visual_identity.size,
                                   spk.shared_identity.size)
    rng = substream(seed, 'corpus/utt/{}'.format(utt_id))
    T_a = RATE_RATIO * T_v
    shared_dim = spk.shared_identity.size
    # Both streams read the same trajectory; only the sampling grid differs.
    trajectory = latent_trajectory(rng, shared_dim, np.arange(T_a) / float(AUDIO_RATE))
    z_audio = trajectory
    z_visual = trajectory[:, ::RATE_RATIO]
    shared_a = spk.shared_identity[:, None] * z_audio
    shared_v = spk.shared_identity[:, None] * z_visual
    audio_src = np.vstack([np.repeat(spk.audio_identity[:, None], T_a, axis=1), shared_a])
    visual_src = np.vstack([np.repeat(spk.visual_identity[:, None], T_v, axis=1), shared_v])
    audio = maps.audio.dot(audio_src) + sigma_a * _noise(rng, maps.audio.shape[0], T_a, session)
    visual = maps.visual.dot(visual_src) + sigma_v * _noise(rng, maps.visual.shape[0], T_v, session)
    return SyntheticUtterance(utt_id, spk.id, audio, visual, sigma_a, sigma_v)


def _noise(rng, rows, frames, session):
    held = rng.standard_normal((rows, 1))
    fresh = rng.standard_normal((rows, frames))
    return np.sqrt(session) * held + np.sqrt(1.0 - session) * fresh


def utterance_id(speaker, index):
    return 'spk{:03d}-utt{:03d}'.format(speaker, index)


def build_trials(utterances, n_target, n_nontarget, seed):
    '''Sample same-speaker and different-speaker pairs of distinct utterances.

    Parameters
    ----------
    utterances : sequence
        Items with ``id`` and ``speaker`` attributes.
    n_target, n_nontarget : int
        Exact number of same-speaker and different-speaker trials.
    seed : int

    Returns
    -------
    trials : list of :class:`TrialPair`
        Shuffled; no pair repeats and no utterance is paired with itself.

    Raises
    ------
    ValueError
        If the utterances cannot realize the requested counts.
    '''
    if n_target < 0 or n_nontarget < 0:
        raise ValueError('trial counts must be nonnegative')
    utterances = list(utterances)
    same, different = [], []
    for i, first in enumerate(utterances):
        for second in utterances[i + 1:]:
            (same if first.speaker == second.speaker else different).append((first.id, second.id))
    if n_target > len(same) or n_nontarget > len(different):
        raise ValueError('cannot draw {} target / {} non-target trials from {} / {} available pairs'.format(
            n_target, n_nontarget, len(same), len(different)))
    total = n_target + n_nontarget
    if total and not 0.05 <= n_target / float(total) <= 0.95:
        warnings.warn('skewed trial list: {} target vs {} non-target'.format(n_target, n_nontarget))
    rng = substream(seed, 'corpus/trials')
    trials = [TrialPair(same[i][0], same[i][1], True)
              for i in sorted(rng.choice(len(same), n_target, replace=False))]
    trials.extend(TrialPair(different[i][0], different[i][1], False)
                  for i in sorted(rng.choice(len(different), n_nontarget, replace=False)))
    return [trials[i] for i in rng.permutation(len(trials))]


def write_matrix(handle, matrix):
    '''Two little-endian uint32 dims, then row-major little-endian float64.'''
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError('expected a matrix, got shape {}'.format(matrix.shape))
    handle.write(struct.pack('<II', *matrix.shape))
    handle.write(np.ascontiguousarray(matrix, dtype='<f8').tobytes())


def read_matrix(handle):
    raw = handle.read(8)
    if len(raw) != 8:
        raise ValueError('truncated matrix header')
    rows, cols = struct.unpack('<II', raw)
    data = handle.read(8 * rows * cols)
    if len(data) != 8 * rows * cols:
        raise ValueError('truncated matrix: expected {}x{} values'.format(rows, cols))
    return np.frombuffer(data, dtype='<f8').astype(np.float64).reshape(rows, cols)


def write_trials(handle, trials):
    for trial in trials:
        handle.write('{} {} {}\n'.format(trial.enroll, trial.test, 1 if trial.label else 0))


def read_trials(handle):
    trials = []
    for number, line in enumerate(handle, 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 3 or fields[2] not in ('0', '1'):
            raise ValueError('trial line {} is malformed: {!r}'.format(number, line.rstrip()))
        trials.append(TrialPair(fields[0], fields[1], fields[2] == '1'))
    return trials


class Corpus(object):
    '''Train and test utterances of a synthetic corpus, plus its trial list.

    Attributes
    ----------
    config : :class:`colearn.config.Config`
        Only the ``[corpus]`` section and the seed matter.
    utterances : OrderedDict
        Utterance id to :class:`SyntheticUtterance`.
    splits : dict
        Utterance id to ``'train'`` or ``'test'``.
    trials : list of :class:`TrialPair`
    '''

    def __init__(self, config, utterances, splits, trials):
        self.config = config
        self.utterances = collections.OrderedDict((u.id, u) for u in utterances)
        self.splits = dict(splits)
        self.trials = list(trials)

    @property
    def seed(self):
        return self.config.train.seed

    @classmethod
    def generate(cls, config):
        '''Generate the corpus ``config`` describes, fully determined by its seed.'''
        cc = config.corpus
        cc.validate()
        seed = config.train.seed
        speakers = gen_population(cc.n_train_speakers + cc.n_test_speakers, seed,
                                  cc.audio_dim, cc.visual_dim, cc.shared_dim)
        maps = MixingMaps.generate(seed, cc.audio_dim, cc.visual_dim, cc.shared_dim)
        utterances, splits = [], {}
        for spk in speakers:
            train = spk.id < cc.n_train_speakers
            count = cc.train_utterances if train else cc.test_utterances
            for index in range(count):
                utt = gen_utterance(spk, cc.visual_frames, cc.audio_noise, cc.visual_noise, seed,
                                    maps, utterance_id(spk.id, index), cc.session_noise)
                utterances.append(utt)
                splits[utt.id] = 'train' if train else 'test'
        test = [u for u in utterances if splits[u.id] == 'test']
        trials = build_trials(test, cc.n_target, cc.n_nontarget, seed)
        corpus = cls(config, utterances, splits, trials)
        logger.info('generated corpus: %s', ', '.join(
            '{} {} speakers / {} utterances'.format(s, n, u) for s, n, u in corpus.statistics()))
        return corpus

    def split(self, name):
        '''Utterances of one split, in index order.'''
        return [u for u in self.utterances.values() if self.splits[u.id] == name]

    def speaker_labels(self):
        '''Map train speaker ids to contiguous class indices.'''
        speakers = sorted(set(u.speaker for u in self.split('train')))
        return {spk: i for i, spk in enumerate(speakers)}

    def labeled(self, name='train'):
        '''``(utterance, class index)`` pairs of the train split.'''
        labels = self.speaker_labels()
        return [(u, labels[u.speaker]) for u in self.split(name)]

    def statistics(self):
        '''Rows of ``(split, speakers, utterances)``.'''
        rows = []
        for name in ('train', 'test'):
            utts = self.split(name)
            rows.append((name, len(set(u.speaker for u in utts)), len(utts)))
        return rows

    def format_statistics(self):
        lines = ['{:<6s} {:>9s} {:>11s}'.format('split', 'speakers', 'utterances')]
        lines.extend('{:<6s} {:>9d} {:>11d}'.format(*row) for row in self.statistics())
        return '\n'.join(lines)

    def get(self, utt_id):
        '''Return utterance ``utt_id``; raise KeyError naming it if absent.'''
        try:
            return self.utterances[utt_id]
        except KeyError:
            raise KeyError('utterance {!r} is not in the corpus'.format(utt_id))

    def write(self, directory):
        '''Write the corpus layout under ``directory``; return written paths.'''
        paths = []
        for sub in ('audio', 'visual'):
            os.makedirs(os.path.join(directory, sub), exist_ok=True)
        index = os.path.join(directory, 'index.txt')
        with io.open(index, 'w', encoding='utf-8', newline='\n') as handle:
            for row in self.statistics():
                handle.write('# {} {} {}\n'.format(*row))
            for utt in self.utterances.values():
                audio_path = 'audio/{}.mat'.format(utt.id)
                visual_path = 'visual/{}.mat'.format(utt.id)
                for rel, matrix in ((audio_path, utt.audio), (visual_path, utt.visual)):
                    path = os.path.join(directory, rel)
                    with open(path, 'wb') as out:
                        write_matrix(out, matrix)
                    paths.append(path)
                handle.write('{} {} {} {} {} {!r} {!r}\n'.format(
                    utt.id, utt.speaker, self.splits[utt.id], audio_path, visual_path,
                    utt.audio_noise, utt.visual_noise))
        trials = os.path.join(directory, 'trials.txt')
        with io.open(trials, 'w', encoding='utf-8', newline='\n') as handle:
            write_trials(handle, self.trials)
        cfg = os.path.join(directory, 'corpus.cfg')
        with io.open(cfg, 'w', encoding='utf-8', newline='\n') as handle:
            self.config.write(handle)
        return [index, trials, cfg] + paths

    @classmethod
    def read(cls, directory):
        '''Load a corpus directory written by :meth:`write`.

        Raises
        ------
        ConfigError
            If the directory is not a corpus.
        '''
        index = os.path.join(directory, 'index.txt')
        if not os.path.isfile(index):
            raise ConfigError('no corpus index at {}'.format(index))
        config = Config.read(os.path.join(directory, 'corpus.cfg'))
        utterances, splits = [], {}
        with io.open(index, 'r', encoding='utf-8') as handle:
            for line in handle:
                if line.startswith('#') or not line.strip():
                    continue
                utt_id, speaker, split, audio_path, visual_path, sigma_a, sigma_v = line.split()
                with open(os.path.join(directory, audio_path), 'rb') as src:
                    audio = read_matrix(src)
                with open(os.path.join(directory, visual_path), 'rb') as src:
                    visual = read_matrix(src)
                utterances.append(SyntheticUtterance(utt_id, int(speaker), audio, visual,
                                                     float(sigma_a), float(sigma_v)))
                splits[utt_id] = split
        with io.open(os.path.join(directory, 'trials.txt'), 'r', encoding='utf-8') as handle:
            trials = read_trials(handle)
        return cls(config, utterances, splits, trials)
