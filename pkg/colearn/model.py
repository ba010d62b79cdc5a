'''Co-learning and single-modality model assemblies.

The co-learning model is pseudo-siamese: an audio side and a visual side
with the same layout but independent parameters. Each side has an encoder,
a booster that re-expresses the *other* modality on its own time axis, two
ASP decoders and two AAMSoftmax heads::

    F_a  = audio_encoder(audio)             F_v  = visual_encoder(visual)
    F_a' = audio_booster(F_v -> F_a)        F_v' = visual_booster(F_a -> F_v)

    e_a, e_v, e_a', e_v' = the four decoders    L_co = L_a + L_v + L_a' + L_v'
'''

import collections

from .decoders import AAMSoftmaxHead, ASPDecoder, co_learning_loss
from .encoders import AudioEncoder, VisualEncoder
from .layers import Module
from .maxformer import CrossModalBooster
from .seeding import substream

BRANCHES = ('audio', 'visual', 'audio_transferred', 'visual_transferred')
MODALITIES = ('audio', 'visual')
KINDS = ('co-learn', 'baseline-audio', 'baseline-visual')

Losses = collections.namedtuple('Losses', 'audio visual audio_transferred visual_transferred co')


def _encoder(modality, config, rng):
    mc, cc = config.model, config.corpus
    if modality == 'audio':
        return AudioEncoder(mc.audio_channels, rng, in_channels=cc.audio_dim)
    return VisualEncoder(mc.visual_channels, rng, in_channels=cc.visual_dim)


def _channels(modality, config):
    return config.model.audio_channels if modality == 'audio' else config.model.visual_channels


def _decoder(channels, config, rng):
    mc = config.model
    return ASPDecoder(channels, rng, mc.embedding_dim, mc.asp_hidden, mc.per_channel_attention)


def _head(config, n_classes, rng):
    tc = config.train
    return AAMSoftmaxHead(config.model.embedding_dim, n_classes, rng, tc.aam_scale, tc.aam_margin)


class CoLearnModel(Module):
    '''Both encoders, both boosters, four decoders and four loss heads.

    Parameters
    ----------
    config : :class:`colearn.config.Config`
    n_classes : int
        Number of training speakers.

    Every submodule draws its initial weights from the ``init/<name>``
    substream of ``config.train.seed``, so adding or resizing one submodule
    leaves the others' initialization untouched.
    '''

    kind = 'co-learn'
    branches = BRANCHES

    def __init__(self, config, n_classes):
        seed = config.train.seed
        mc = config.model

        def rng(name):
            return substream(seed, 'init/' + name)

        self.audio_encoder = _encoder('audio', config, rng('audio_encoder'))
        self.visual_encoder = _encoder('visual', config, rng('visual_encoder'))
        self.audio_booster = CrossModalBooster(mc.visual_channels, mc.audio_channels, mc.d, mc.heads, mc.blocks,
                                               rng('audio_booster'), mc.scale_by_model_dim)
        self.visual_booster = CrossModalBooster(mc.audio_channels, mc.visual_channels, mc.d, mc.heads, mc.blocks,
                                                rng('visual_booster'), mc.scale_by_model_dim)
        self.audio_decoder = _decoder(mc.audio_channels, config, rng('audio_decoder'))
        self.visual_decoder = _decoder(mc.visual_channels, config, rng('visual_decoder'))
        self.audio_transferred_decoder = _decoder(mc.d, config, rng('audio_transferred_decoder'))
        self.visual_transferred_decoder = _decoder(mc.d, config, rng('visual_transferred_decoder'))
        self.audio_head = _head(config, n_classes, rng('audio_head'))
        self.visual_head = _head(config, n_classes, rng('visual_head'))
        self.audio_transferred_head = _head(config, n_classes, rng('audio_transferred_head'))
        self.visual_transferred_head = _head(config, n_classes, rng('visual_transferred_head'))

    def features(self, audio, visual):
        '''Return ``{branch: feature map}`` for the four branches.'''
        f_a = self.audio_encoder(audio)
        f_v = self.visual_encoder(visual)
        return collections.OrderedDict([
            ('audio', f_a),
            ('visual', f_v),
            ('audio_transferred', self.audio_booster(f_v, f_a)),
            ('visual_transferred', self.visual_booster(f_a, f_v)),
        ])

    def embed(self, audio, visual):
        '''Return ``{branch: (E, 1) embedding}`` for the four branches.'''
        return collections.OrderedDict(
            (name, self.branch_decoder(name)(f)) for name, f in self.features(audio, visual).items())

    def branch_decoder(self, branch):
        return getattr(self, branch + '_decoder')

    def branch_head(self, branch):
        return getattr(self, branch + '_head')

    def losses(self, audio, visual, label):
        '''The four branch losses and their sum, as a :class:`Losses` of tensors.'''
        embeddings = self.embed(audio, visual)
        parts = [self.branch_head(b)(embeddings[b], label) for b in BRANCHES]
        return Losses(*(parts + [co_learning_loss(*parts)]))

    def branch_parameters(self, branch):
        '''Parameters that produce ``branch``'s embedding, heads excluded.'''
        modules = {
            'audio': [self.audio_encoder, self.audio_decoder],
            'visual': [self.visual_encoder, self.visual_decoder],
            'audio_transferred': [self.audio_booster, self.audio_transferred_decoder],
            'visual_transferred': [self.visual_booster, self.visual_transferred_decoder],
        }[branch]
        return [p for m in modules for p in m.parameters()]


class BaselineModel(Module):
    '''One encoder, one ASP decoder and one AAMSoftmax head.

    The other modality's frames are accepted and ignored, so a baseline can be
    trained and evaluated by the same code paths as the co-learning model.
    '''

    def __init__(self, modality, config, n_classes):
        if modality not in MODALITIES:
            raise ValueError('modality must be audio or visual, was {!r}'.format(modality))
        seed = config.train.seed
        self.modality = modality
        self.kind = 'baseline-' + modality
        self.branches = (modality,)
        self.encoder = _encoder(modality, config, substream(seed, 'init/{}_encoder'.format(modality)))
        self.decoder = _decoder(_channels(modality, config), config,
                                substream(seed, 'init/{}_decoder'.format(modality)))
        self.head = _head(config, n_classes, substream(seed, 'init/{}_head'.format(modality)))

    def _frames(self, audio, visual):
        return audio if self.modality == 'audio' else visual

    def embed(self, audio, visual):
        f = self.encoder(self._frames(audio, visual))
        return collections.OrderedDict([(self.modality, self.decoder(f))])

    def branch_decoder(self, branch):
        return self.decoder

    def branch_head(self, branch):
        return self.head

    def losses(self, audio, visual, label):
        '''A :class:`Losses` whose only nonzero part is this modality's.'''
        loss = self.head(self.embed(audio, visual)[self.modality], label)
        parts = {b: 0.0 for b in BRANCHES}
        parts[self.modality] = loss
        return Losses(parts['audio'], parts['visual'], parts['audio_transferred'],
                      parts['visual_transferred'], loss)

    def branch_parameters(self, branch):
        if branch != self.modality:
            return []
        return self.encoder.parameters() + self.decoder.parameters()


def build_model(kind, config, n_classes):
    '''Instantiate a model of ``kind``: ``co-learn``, ``baseline-audio`` or ``baseline-visual``.'''
    if kind == 'co-learn':
        return CoLearnModel(config, n_classes)
    if kind in ('baseline-audio', 'baseline-visual'):
        return BaselineModel(kind.split('-', 1)[1], config, n_classes)
    raise ValueError('unknown model kind {!r}; expected one of {}'.format(kind, KINDS))


def count_parameters(model):
    '''Per-branch parameter counts, loss heads excluded.'''
    return collections.OrderedDict(
        (b, int(sum(p.size for p in model.branch_parameters(b)))) for b in model.branches)


def baseline_to_colearn_names(modality):
    '''Prefix map from baseline tensor names to co-learning model names.'''
    return collections.OrderedDict([
        ('encoder.', '{}_encoder.'.format(modality)),
        ('decoder.', '{}_decoder.'.format(modality)),
        ('head.', '{}_head.'.format(modality)),
    ])
