import unittest

import numpy as np

from colearn.config import micro_config
from colearn.model import (BRANCHES, BaselineModel, CoLearnModel, baseline_to_colearn_names, build_model,
                           count_parameters)
from colearn.synth import Corpus
from colearn.tensor import Tape, add
from test.base import Base


class ModelBase(Base):
    def setUp(self):
        super(ModelBase, self).setUp()
        self.config = micro_config(seed=1)
        self.corpus = Corpus.generate(self.config)
        self.utt, self.label = self.corpus.labeled()[0]


class CoLearnModelTest(ModelBase):
    def test_embeddings(self):
        model = CoLearnModel(self.config, 3)
        embeddings = model.embed(self.utt.audio, self.utt.visual)
        assert list(embeddings) == list(BRANCHES)
        for e in embeddings.values():
            assert e.shape == (6, 1)

    def test_transferred_features_follow_target_length(self):
        features = CoLearnModel(self.config, 3).features(self.utt.audio, self.utt.visual)
        assert features['audio_transferred'].shape == (8, 20)
        assert features['visual_transferred'].shape == (8, 5)

    def test_losses(self):
        losses = CoLearnModel(self.config, 3).losses(self.utt.audio, self.utt.visual, self.label)
        parts = [losses.audio.item(), losses.visual.item(), losses.audio_transferred.item(),
                 losses.visual_transferred.item()]
        assert all(p > 0 for p in parts)
        self.assertAlmostEqual(losses.co.item(), sum(parts), places=12)

    def test_deterministic_init(self):
        a = CoLearnModel(self.config, 3).state_dict()
        b = CoLearnModel(micro_config(seed=1), 3).state_dict()
        c = CoLearnModel(micro_config(seed=2), 3).state_dict()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        assert not np.array_equal(a['audio_encoder.blocks.0.conv.weight'], c['audio_encoder.blocks.0.conv.weight'])

    def test_boosters_are_independent(self):
        model = CoLearnModel(self.config, 3)
        audio = {id(p) for p in model.audio_booster.parameters()}
        visual = {id(p) for p in model.visual_booster.parameters()}
        assert not audio & visual

    def test_audio_loss_stays_in_audio_branch(self):
        model = CoLearnModel(self.config, 3)
        with Tape() as tape:
            tape.backward(model.losses(self.utt.audio, self.utt.visual, self.label).audio)
        assert any(p.grad.any() for p in model.audio_encoder.parameters())
        for module in (model.visual_encoder, model.audio_booster, model.visual_booster,
                       model.visual_decoder, model.audio_transferred_head):
            assert not any(p.grad.any() for p in module.parameters())

    def test_unimodal_losses_leave_boosters_untouched(self):
        model = CoLearnModel(self.config, 3)
        losses = model.losses(self.utt.audio, self.utt.visual, self.label)
        with Tape() as tape:
            tape.backward(add(losses.audio, losses.visual))
        assert any(p.grad.any() for p in model.visual_encoder.parameters())
        for module in (model.audio_booster, model.visual_booster, model.audio_transferred_decoder,
                       model.visual_transferred_decoder, model.audio_transferred_head,
                       model.visual_transferred_head):
            for name, p in module.named_parameters():
                assert not p.grad.any(), name

    def test_transferred_loss_reaches_both_encoders(self):
        model = CoLearnModel(self.config, 3)
        with Tape() as tape:
            tape.backward(model.losses(self.utt.audio, self.utt.visual, self.label).audio_transferred)
        for module in (model.audio_encoder, model.visual_encoder, model.audio_booster):
            assert any(p.grad.any() for p in module.parameters())
        assert not any(p.grad.any() for p in model.visual_booster.parameters())

    def test_parameter_counts(self):
        model = CoLearnModel(self.config, 3)
        counts = count_parameters(model)
        assert list(counts) == list(BRANCHES)
        heads = sum(model.branch_head(b).parameter_count() for b in BRANCHES)
        assert sum(counts.values()) + heads == model.parameter_count()
        assert counts['audio_transferred'] == (model.audio_booster.parameter_count()
                                               + model.audio_transferred_decoder.parameter_count())


class BaselineModelTest(ModelBase):
    def test_ignores_other_modality(self):
        model = BaselineModel('audio', self.config, 3)
        first = model.embed(self.utt.audio, self.utt.visual)['audio'].data
        second = model.embed(self.utt.audio, None)['audio'].data
        assert np.array_equal(first, second)

    def test_losses(self):
        losses = BaselineModel('visual', self.config, 3).losses(self.utt.audio, self.utt.visual, self.label)
        assert losses.audio == 0.0 and losses.audio_transferred == 0.0 and losses.visual_transferred == 0.0
        assert losses.co is losses.visual

    def test_counts_exclude_boosters(self):
        baseline = count_parameters(BaselineModel('audio', self.config, 3))
        colearn = count_parameters(CoLearnModel(self.config, 3))
        assert list(baseline) == ['audio']
        assert baseline['audio'] == colearn['audio']

    def test_shares_initialization_with_colearn(self):
        baseline = BaselineModel('visual', self.config, 3).state_dict()
        colearn = CoLearnModel(self.config, 3).state_dict()
        prefixes = baseline_to_colearn_names('visual')
        for name, value in baseline.items():
            old = next(p for p in prefixes if name.startswith(p))
            assert np.array_equal(colearn[prefixes[old] + name[len(old):]], value), name

    def test_bad_modality(self):
        with self.assertRaises(ValueError):
            BaselineModel('smell', self.config, 3)


class BuildModelTest(ModelBase):
    def test_kinds(self):
        assert build_model('co-learn', self.config, 3).kind == 'co-learn'
        assert build_model('baseline-audio', self.config, 3).kind == 'baseline-audio'
        assert build_model('baseline-visual', self.config, 3).branches == ('visual',)

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            build_model('trimodal', self.config, 3)


if __name__ == '__main__':
    unittest.main()
