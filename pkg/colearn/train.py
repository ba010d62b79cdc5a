'''Training loop, Adam optimizer, step scheduler and warm starting.

Gradients are accumulated one utterance at a time: every utterance's loss
is recorded on its own tape, scaled by 1 / batch size and back-propagated
before the next utterance is processed, so a batch's gradient is the mean of
its utterances' gradients. Parameters that do not require gradients (frozen
pretrained weights) are skipped by the optimizer.
'''

import collections
import logging
import warnings

import numpy as np

from .checkpoint import Checkpoint
from .errors import ConfigError, NumericalError
from .model import CoLearnModel, Losses, baseline_to_colearn_names, build_model
from .seeding import substream
from .synth import SyntheticUtterance
from .tensor import Tape, scale

logger = logging.getLogger(__name__)

MODES = ('baseline-audio', 'baseline-visual', 'co-learn-scratch', 'co-learn-warm')

EpochLog = collections.namedtuple('EpochLog', 'epoch lr audio visual audio_transferred visual_transferred co')


def format_epoch(entry):
    '''``epoch lr L_a L_v L_at L_vt L_co`` on one line.'''
    return '{:d} {:.6g} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}'.format(*entry)


class Adam(object):
    '''Adam with L2 weight decay, coupled to the gradient or decoupled.

    Parameters
    ----------
    named_parameters : iterable of (str, :class:`colearn.tensor.ParamTensor`)
        Parameters whose ``requires_grad`` is False are left alone.
    lr : float
    betas : (float, float)
    eps : float
    weight_decay : float
    decoupled : bool
        If True, shrink parameters by ``1 - lr * weight_decay`` directly
        instead of adding ``weight_decay * p`` to the gradient.
    '''

    def __init__(self, named_parameters, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0,
                 decoupled=False):
        self.params = collections.OrderedDict(
            (name, p) for name, p in named_parameters if p.requires_grad)
        self.lr = float(lr)
        self.betas = betas
        self.eps = eps
        self.weight_decay = float(weight_decay)
        self.decoupled = decoupled
        self.steps = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self):
        '''Apply one update from the parameters' current gradients.'''
        self.steps += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.steps
        c2 = 1.0 - b2 ** self.steps
        for name, p in self.params.items():
            g = p.grad
            if self.weight_decay and not self.decoupled:
                g = g + self.weight_decay * p.data
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.weight_decay and self.decoupled:
                p.data *= 1.0 - self.lr * self.weight_decay
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_tensors(self):
        '''Moments and step counter as named arrays.'''
        state = collections.OrderedDict([('steps', np.array([float(self.steps)]))])
        for name in self.params:
            state['m.' + name] = self.m[name].copy()
            state['v.' + name] = self.v[name].copy()
        return state

    def load_state(self, state):
        '''Restore what :meth:`state_tensors` produced.

        Raises
        ------
        KeyError
            If a moment of a trainable parameter is missing.
        '''
        self.steps = int(np.asarray(state['steps']).ravel()[0])
        for name in self.params:
            self.m[name][...] = state['m.' + name]
            self.v[name][...] = state['v.' + name]


class MultiStepLR(object):
    '''Multiply the base rate by ``gamma`` once per milestone passed.

    With milestones (10, 15) epochs 1-10 run at the base rate, 11-15 at
    ``gamma`` times it and later epochs at ``gamma ** 2`` times it.
    '''

    def __init__(self, lr, milestones, gamma):
        self.base_lr = float(lr)
        self.milestones = tuple(milestones)
        self.gamma = float(gamma)

    def lr(self, epoch):
        passed = sum(1 for m in self.milestones if epoch > m)
        return self.base_lr * self.gamma ** passed


def make_optimizer(model, config):
    tc = config.train
    return Adam(model.named_parameters(), tc.lr, weight_decay=tc.weight_decay,
                decoupled=tc.decoupled_weight_decay)


def _value(loss):
    return loss.item() if hasattr(loss, 'item') else float(loss)


def train_step(batch, model, optimizer):
    '''Forward, backward and one optimizer update on a batch.

    Parameters
    ----------
    batch : sequence of (:class:`colearn.synth.SyntheticUtterance`, int)
        Utterances with their training class index.
    model : :class:`colearn.model.CoLearnModel` or :class:`colearn.model.BaselineModel`
    optimizer : :class:`Adam`

    Returns
    -------
    losses : :class:`colearn.model.Losses`
        Batch means of L_a, L_v, L_a', L_v' and L_co as floats.

    Raises
    ------
    ValueError
        If the batch is empty.
    NumericalError
        If any loss is NaN or infinite; no update is applied.
    '''
    if not len(batch):
        raise ValueError('cannot train on an empty batch')
    model.zero_grad()
    weight = 1.0 / len(batch)
    totals = np.zeros(len(Losses._fields))
    for utt, label in batch:
        with Tape() as tape:
            losses = model.losses(utt.audio, utt.visual, label)
            values = np.array([_value(x) for x in losses])
            if not np.all(np.isfinite(values)):
                raise NumericalError('non-finite loss on utterance {}: {}'.format(utt.id, values))
            tape.backward(scale(losses.co, weight))
        totals += values
    optimizer.step()
    return Losses(*(totals * weight))


def evaluate_loss(model, labeled):
    '''Forward-only mean of the loss tuple over ``(utterance, label)`` pairs.'''
    if not len(labeled):
        raise ValueError('cannot evaluate an empty set of utterances')
    totals = np.zeros(len(Losses._fields))
    for utt, label in labeled:
        totals += [_value(x) for x in model.losses(utt.audio, utt.visual, label)]
    return Losses(*(totals / len(labeled)))


def augment(labeled, rng, sigma):
    '''Add N(0, sigma^2) noise to each utterance's frames with probability 1/2.'''
    out = []
    for utt, label in labeled:
        if rng.random() < 0.5:
            utt = SyntheticUtterance(utt.id, utt.speaker,
                                     utt.audio + sigma * rng.standard_normal(utt.audio.shape),
                                     utt.visual + sigma * rng.standard_normal(utt.visual.shape),
                                     utt.audio_noise, utt.visual_noise)
        out.append((utt, label))
    return out


def check_corpus(config, corpus):
    '''Reject corpora whose feature dimensions the configured model cannot read.'''
    stored = corpus.config.corpus
    for name in ('audio_dim', 'visual_dim'):
        if getattr(stored, name) != getattr(config.corpus, name):
            raise ConfigError('corpus has {}={} but the config expects {}'.format(
                name, getattr(stored, name), getattr(config.corpus, name)))
    if len(corpus.speaker_labels()) < 2:
        raise ConfigError('training needs at least two speakers in the train split')


def fit(model, config, corpus, log=None, optimizer=None):
    '''Run ``config.train.epochs`` epochs over the train split.

    Returns
    -------
    optimizer : :class:`Adam`
    history : list of :class:`EpochLog`
    '''
    tc = config.train
    labeled = corpus.labeled()
    optimizer = optimizer or make_optimizer(model, config)
    scheduler = MultiStepLR(tc.lr, tc.milestones, tc.gamma)
    history = []
    for epoch in range(1, tc.epochs + 1):
        optimizer.lr = scheduler.lr(epoch)
        order = substream(tc.seed, 'batching/{}'.format(epoch)).permutation(len(labeled))
        items = [labeled[i] for i in order]
        if tc.feature_noise > 0:
            items = augment(items, substream(tc.seed, 'augment/{}'.format(epoch)), tc.feature_noise)
        sums = np.zeros(len(Losses._fields))
        for start in range(0, len(items), tc.batch_size):
            batch = items[start:start + tc.batch_size]
            sums += np.array(train_step(batch, model, optimizer)) * len(batch)
        entry = EpochLog(epoch, optimizer.lr, *(sums / len(items)))
        history.append(entry)
        logger.info('epoch %d lr %g L_co %.6f', epoch, optimizer.lr, entry.co)
        if log is not None:
            log.write(format_epoch(entry) + '\n')
    return optimizer, history


def run_training(config, corpus, log=None, kind='co-learn', model=None):
    '''Train a model on ``corpus`` and return its final :class:`Checkpoint`.

    Parameters
    ----------
    config : :class:`colearn.config.Config`
    corpus : :class:`colearn.synth.Corpus`
    log : text file handle, optional
        Receives one :func:`format_epoch` line per epoch.
    kind : str
        Model kind when ``model`` is not given.
    model : optional
        A prebuilt (for instance warm-started) model.

    Raises
    ------
    ConfigError
        If the config is invalid or does not fit the corpus.
    NumericalError
        If a loss diverges.
    '''
    config.validate()
    check_corpus(config, corpus)
    if model is None:
        model = build_model(kind, config, len(corpus.speaker_labels()))
    optimizer, history = fit(model, config, corpus, log)
    if history:
        first, last = history[0].co, history[-1].co
        logger.info('L_co went from %.6f to %.6f over %d epochs', first, last, len(history))
    return Checkpoint.capture(model, config, config.train.epochs, optimizer)


def train_baseline(modality, config, corpus, log=None):
    '''Train a single-modality encoder/decoder/head without any booster.'''
    if modality not in ('audio', 'visual'):
        raise ValueError('modality must be audio or visual, was {!r}'.format(modality))
    return run_training(config, corpus, log, kind='baseline-' + modality)


def restore(checkpoint, n_classes=None):
    '''Rebuild the model a checkpoint was captured from.'''
    config = checkpoint.config
    state = checkpoint.model_state()
    if n_classes is None:
        head = next(v for k, v in state.items() if k.endswith('head.weight'))
        n_classes = head.shape[0]
    model = build_model(checkpoint.kind, config, n_classes)
    model.load_state_dict(state)
    return model


def warm_start(checkpoint_audio, checkpoint_visual, config, n_classes):
    '''Build a co-learning model whose unimodal branches start from baselines.

    Encoders always come from the checkpoints; decoders and loss heads too
    when ``config.train.warm_start_decoders`` is set. Boosters and the
    transferred-branch decoders are freshly initialized. With
    ``config.train.freeze_pretrained`` the loaded tensors stop requiring
    gradients.

    Raises
    ------
    ConfigError
        If a checkpoint is not a baseline of the expected modality.
    KeyError
        If a mapped tensor does not exist in the co-learning model.
    ValueError
        If a tensor's shape does not match the configured model.
    '''
    tc = config.train
    model = CoLearnModel(config, n_classes)
    params = dict(model.named_parameters())
    loaded = []
    for modality, ckpt in (('audio', checkpoint_audio), ('visual', checkpoint_visual)):
        if ckpt.kind != 'baseline-' + modality:
            raise ConfigError('warm start needs a baseline-{} checkpoint, got {}'.format(modality, ckpt.kind))
        if ckpt.config.model != config.model:
            warnings.warn('baseline-{} checkpoint was trained with different [model] settings'.format(modality))
        renamed = {}
        for name, value in ckpt.model_state().items():
            for old, new in baseline_to_colearn_names(modality).items():
                if name.startswith(old):
                    if old != 'encoder.' and not tc.warm_start_decoders:
                        break
                    renamed[new + name[len(old):]] = value
                    break
        missing = sorted(set(renamed) - set(params))
        if missing:
            raise KeyError('warm start: {} has no tensor {}'.format(model.kind, missing[0]))
        model.load_state_dict(renamed, strict=False)
        loaded.extend(renamed)
    if tc.freeze_pretrained:
        for name in loaded:
            params[name].requires_grad = False
    logger.info('warm start loaded %d tensors%s', len(loaded), ' (frozen)' if tc.freeze_pretrained else '')
    return model


def train_mode(mode, config, corpus, log=None, checkpoints=None):
    '''Dispatch one of :data:`MODES` and return the resulting checkpoint.

    Parameters
    ----------
    checkpoints : (Checkpoint, Checkpoint), optional
        Audio and visual baselines, required by ``co-learn-warm``.
    '''
    if mode not in MODES:
        raise ConfigError('unknown mode {!r}; expected one of {}'.format(mode, ', '.join(MODES)))
    if mode.startswith('baseline-'):
        return train_baseline(mode.split('-', 1)[1], config, corpus, log)
    if mode == 'co-learn-scratch':
        config.train.mode = 'from_scratch'
        return run_training(config, corpus, log)
    config.train.mode = 'warm_start'
    if not checkpoints or None in checkpoints:
        raise ConfigError('co-learn-warm needs baseline checkpoints: pass --audio-checkpoint and '
                          '--visual-checkpoint (train them with --mode baseline-audio / baseline-visual)')
    config.validate()
    check_corpus(config, corpus)
    model = warm_start(checkpoints[0], checkpoints[1], config, len(corpus.speaker_labels()))
    return run_training(config, corpus, log, model=model)

