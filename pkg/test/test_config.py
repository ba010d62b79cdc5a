import io
import os
import unittest

import numpy as np

from colearn.config import Config, micro_config
from colearn.errors import ConfigError
from colearn.seeding import substream
from test.base import Base

CONFIGS = os.path.join(os.path.dirname(__file__), '..', 'configs')


class ConfigTest(Base):
    def test_defaults(self):
        config = Config().validate()
        assert config.corpus.visual_frames == 50
        assert config.model.d == 128 and config.model.heads == 4
        assert config.train.milestones == (10, 15)
        assert config.eval.audio_driven_weights == (0.5, 0.25, 0.25)

    def test_text_round_trip(self):
        config = micro_config(seed=9)
        config.train.lr = 0.0003
        config.eval.p_target = 0.05
        assert Config.loads(config.dumps()) == config

    def test_partial_file(self):
        config = Config.loads('[model]\nd = 16\nheads = 2\n')
        assert config.model.d == 16
        assert config.model.blocks == 3

    def test_types(self):
        config = Config()
        config.set('train.milestones', '3, 7, 9')
        config.set('model.per_channel_attention', 'no')
        config.set('eval.baseline_weights', '0.7, 0.3')
        assert config.train.milestones == (3, 7, 9)
        assert config.model.per_channel_attention is False
        assert config.eval.baseline_weights == (0.7, 0.3)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            Config.loads('[model]\nwidth = 3\n')

    def test_unparsable_value(self):
        with self.assertRaises(ConfigError):
            Config().set('model.d', 'wide')

    def test_bad_override_key(self):
        for key in ('d', 'network.d'):
            with self.assertRaises(ConfigError):
                Config().set(key, '3')

    def test_foreign_sections_ignored(self):
        config = Config.loads('[run]\ncommand = train\n\n[train]\nseed = 4\n\n[artifacts]\nx = 1\n')
        assert config.train.seed == 4

    def test_validation(self):
        for key, value in (('model.heads', '3'), ('train.mode', 'sideways'), ('train.milestones', '9, 2'),
                           ('eval.p_target', '1.5'), ('corpus.n_test_speakers', '1'),
                           ('train.aam_margin', '2.0'), ('corpus.session_noise', '1.5')):
            config = Config()
            config.set(key, value)
            with self.assertRaises(ConfigError):
                config.validate()

    def test_shipped_configs(self):
        for name in ('desk.cfg', 'micro.cfg'):
            Config.read(os.path.join(CONFIGS, name)).validate()
        micro = Config.read(os.path.join(CONFIGS, 'micro.cfg'))
        assert micro.model == micro_config().model
        assert micro.corpus == micro_config().corpus

    def test_write(self):
        handle = io.StringIO()
        Config().write(handle)
        assert handle.getvalue().startswith('[corpus]\n')


class SeedingTest(Base):
    def test_named_streams(self):
        a = substream(3, 'init/audio_encoder').random(4)
        b = substream(3, 'init/audio_encoder').random(4)
        c = substream(3, 'init/visual_encoder').random(4)
        d = substream(4, 'init/audio_encoder').random(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_negative_seed(self):
        with self.assertRaises(ValueError):
            substream(-1, 'corpus/population')


if __name__ == '__main__':
    unittest.main()
