'''Run configuration: sectioned ``key = value`` files.

A configuration file looks like::

    [corpus]
    n_train_speakers = 16
    visual_frames = 50

    [model]
    d = 128
    heads = 4

    [train]
    epochs = 40
    milestones = 10, 15

Every section maps onto a dataclass with typed defaults. Keys that are not
fields of the section raise :class:`ConfigError`; sections other than the
four known ones (for instance ``[run]`` and ``[artifacts]`` of a run
manifest) are ignored so that a manifest can be fed back as a config.
'''

import configparser
import dataclasses
import io
import typing

from .errors import ConfigError

MODES = ('from_scratch', 'warm_start')


@dataclasses.dataclass
class CorpusConfig:
    '''Synthetic corpus shape and noise levels.'''
    n_train_speakers: int = 16
    train_utterances: int = 30
    n_test_speakers: int = 8
    test_utterances: int = 10
    visual_frames: int = 50
    audio_noise: float = 0.5
    visual_noise: float = 1.0
    session_noise: float = 0.1
    n_target: int = 100
    n_nontarget: int = 400
    audio_dim: int = 80
    visual_dim: int = 32
    shared_dim: int = 16

    def validate(self):
        if self.n_train_speakers < 2 or self.n_test_speakers < 2:
            raise ConfigError('corpus needs at least two train and two test speakers')
        if self.train_utterances < 1 or self.test_utterances < 1:
            raise ConfigError('corpus needs at least one utterance per speaker')
        if self.visual_frames < 2:
            raise ConfigError('visual_frames must be >= 2, was {}'.format(self.visual_frames))
        if self.audio_noise < 0 or self.visual_noise < 0:
            raise ConfigError('noise levels must be nonnegative')
        if not 0.0 <= self.session_noise <= 1.0:
            raise ConfigError('session_noise must lie in [0, 1], was {}'.format(self.session_noise))


@dataclasses.dataclass
class ModelConfig:
    '''Widths and depths of the encoders, boosters and decoders.'''
    audio_channels: int = 64
    visual_channels: int = 64
    d: int = 128
    heads: int = 4
    blocks: int = 3
    embedding_dim: int = 192
    asp_hidden: int = 32
    per_channel_attention: bool = True
    scale_by_model_dim: bool = True

    def validate(self):
        if self.heads < 1 or self.d % self.heads:
            raise ConfigError('d={} is not divisible by heads={}'.format(self.d, self.heads))
        if self.blocks < 1:
            raise ConfigError('a booster needs at least one MaxFormer block')
        for name in ('audio_channels', 'visual_channels', 'd', 'embedding_dim', 'asp_hidden'):
            if getattr(self, name) < 2:
                raise ConfigError('{} must be >= 2, was {}'.format(name, getattr(self, name)))


@dataclasses.dataclass
class TrainConfig:
    '''Optimizer, scheduler, loss and run-mode settings.'''
    epochs: int = 40
    batch_size: int = 16
    lr: float = 0.001
    milestones: typing.Tuple[int, ...] = (10, 15)
    gamma: float = 0.1
    weight_decay: float = 1e-7
    decoupled_weight_decay: bool = False
    aam_scale: float = 30.0
    aam_margin: float = 0.2
    mode: str = 'from_scratch'
    audio_checkpoint: str = ''
    visual_checkpoint: str = ''
    warm_start_decoders: bool = True
    freeze_pretrained: bool = False
    feature_noise: float = 0.0
    seed: int = 0
    corpus: str = ''

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError('mode must be one of {}, was {!r}'.format(MODES, self.mode))
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError('epochs must be >= 0 and batch_size >= 1')
        if self.lr < 0 or self.weight_decay < 0:
            raise ConfigError('lr and weight_decay must be nonnegative')
        if list(self.milestones) != sorted(self.milestones):
            raise ConfigError('milestones must be increasing, were {}'.format(self.milestones))
        if self.aam_scale <= 0:
            raise ConfigError('aam_scale must be positive')
        if not 0 <= self.aam_margin < 1.5707963267948966:
            raise ConfigError('aam_margin must lie in [0, pi/2), was {}'.format(self.aam_margin))
        if self.seed < 0:
            raise ConfigError('seed must be nonnegative')


@dataclasses.dataclass
class EvalConfig:
    '''Score fusion weights and detection-cost parameters.'''
    audio_driven_weights: typing.Tuple[float, ...] = (0.5, 0.25, 0.25)
    visual_driven_weights: typing.Tuple[float, ...] = (0.5, 0.25, 0.25)
    baseline_weights: typing.Tuple[float, ...] = (0.5, 0.5)
    p_target: float = 0.01
    c_fa: float = 1.0
    c_miss: float = 1.0

    def validate(self):
        if len(self.audio_driven_weights) != 3 or len(self.visual_driven_weights) != 3:
            raise ConfigError('driven fusion takes exactly three weights')
        if len(self.baseline_weights) != 2:
            raise ConfigError('baseline fusion takes exactly two weights')
        if not 0 < self.p_target < 1:
            raise ConfigError('p_target must lie in (0, 1)')


SECTIONS = (
    ('corpus', CorpusConfig),
    ('model', ModelConfig),
    ('train', TrainConfig),
    ('eval', EvalConfig),
)


def _parse_value(field, text):
    '''Convert the raw string ``text`` to the type declared by ``field``.'''
    text = text.strip()
    try:
        if field.type is bool:
            lowered = text.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(text)
        if field.type is int:
            return int(text)
        if field.type is float:
            return float(text)
        if field.type is str:
            return text
        # Tuples: comma separated, element type from the default.
        items = [s for s in (p.strip() for p in text.split(',')) if s]
        default = field.default
        element = type(default[0]) if default else float
        return tuple(element(s) for s in items)
    except ValueError:
        raise ConfigError('cannot parse {}={!r} as {}'.format(field.name, text, field.type))


def _format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Config(object):
    '''All sections of a run configuration.

    Attributes
    ----------
    corpus : :class:`CorpusConfig`
    model : :class:`ModelConfig`
    train : :class:`TrainConfig`
    eval : :class:`EvalConfig`
    '''

    def __init__(self, corpus=None, model=None, train=None, eval=None):
        self.corpus = corpus or CorpusConfig()
        self.model = model or ModelConfig()
        self.train = train or TrainConfig()
        self.eval = eval or EvalConfig()

    def __eq__(self, other):
        return isinstance(other, Config) and self.dumps() == other.dumps()

    def __repr__(self):
        return '<Config seed={} mode={}>'.format(self.train.seed, self.train.mode)

    def validate(self):
        '''Check every section; raise :class:`ConfigError` on the first problem.'''
        for name, _ in SECTIONS:
            getattr(self, name).validate()
        return self

    def set(self, key, value):
        '''Override one value given as ``section.key`` and a raw string.'''
        if '.' not in key:
            raise ConfigError('override key must look like section.key, was {!r}'.format(key))
        section, name = key.split('.', 1)
        if section not in dict(SECTIONS):
            raise ConfigError('unknown config section {!r}'.format(section))
        target = getattr(self, section)
        fields = {f.name: f for f in dataclasses.fields(target)}
        if name not in fields:
            raise ConfigError('unknown key {!r} in section [{}]'.format(name, section))
        setattr(target, name, _parse_value(fields[name], str(value)))

    def dumps(self):
        '''Serialize to the sectioned ``key = value`` text format.'''
        lines = []
        for name, _ in SECTIONS:
            lines.append('[{}]'.format(name))
            for field in dataclasses.fields(getattr(self, name)):
                lines.append('{} = {}'.format(field.name, _format_value(getattr(getattr(self, name), field.name))))
            lines.append('')
        return '\n'.join(lines)

    def write(self, handle):
        handle.write(self.dumps())

    @classmethod
    def loads(cls, text):
        '''Parse configuration text; missing keys keep their defaults.'''
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise ConfigError('malformed config: {}'.format(err))
        config = cls()
        for section, _ in SECTIONS:
            if not parser.has_section(section):
                continue
            for key, value in parser.items(section):
                config.set('{}.{}'.format(section, key), value)
        return config

    @classmethod
    def read(cls, path):
        '''Load a configuration file (UTF-8).'''
        try:
            with io.open(path, 'r', encoding='utf-8') as handle:
                return cls.loads(handle.read())
        except OSError as err:
            raise ConfigError('cannot read config {}: {}'.format(path, err))


def micro_config(seed=0):
    '''The tiny model used for finite-difference gradient checks.

    d=8, two heads, one MaxFormer block, five visual frames (twenty audio
    frames) and three speakers.
    '''
    config = Config()
    config.corpus = CorpusConfig(n_train_speakers=3, train_utterances=1, n_test_speakers=2,
                                 test_utterances=2, visual_frames=5, audio_noise=0.5,
                                 visual_noise=1.0, n_target=1, n_nontarget=1)
    config.model = ModelConfig(audio_channels=6, visual_channels=6, d=8, heads=2, blocks=1,
                               embedding_dim=6, asp_hidden=4)
    config.train.seed = seed
    return config
