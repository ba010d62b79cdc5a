import unittest

import numpy as np

from colearn.encoders import AUDIO_FEATURES, VISUAL_FEATURES, AudioEncoder, VisualEncoder
from test.base import Base


class AudioEncoderTest(Base):
    def test_shape(self):
        encoder = AudioEncoder(16, self.rng)
        x = self.rng.normal(size=(AUDIO_FEATURES, 40))
        assert encoder(x).shape == (16, 40)

    def test_single_frame(self):
        encoder = AudioEncoder(8, self.rng, in_channels=5)
        assert encoder(np.ones((5, 1))).shape == (8, 1)

    def test_non_negative(self):
        encoder = AudioEncoder(8, self.rng, in_channels=5)
        assert (encoder(self.rng.normal(size=(5, 12))).data >= 0).all()

    def test_nan_frame_reaches_output(self):
        encoder = AudioEncoder(8, self.rng, in_channels=5)
        x = self.rng.normal(size=(5, 12))
        x[0, 0] = np.nan
        out = encoder(x).data
        assert np.isnan(out[:, 0]).all()
        assert np.isfinite(out[:, -1]).all()

    def test_wrong_channels(self):
        encoder = AudioEncoder(8, self.rng)
        with self.assertRaises(ValueError):
            encoder(np.ones((VISUAL_FEATURES, 10)))

    def test_no_frames(self):
        encoder = AudioEncoder(8, self.rng, in_channels=5)
        with self.assertRaises(ValueError):
            encoder(np.ones((5, 0)))

    def test_deterministic(self):
        x = self.rng.normal(size=(5, 9))
        a = AudioEncoder(8, np.random.default_rng(3), in_channels=5)(x).data
        b = AudioEncoder(8, np.random.default_rng(3), in_channels=5)(x).data
        assert np.array_equal(a, b)


class VisualEncoderTest(Base):
    def test_shape(self):
        encoder = VisualEncoder(12, self.rng)
        assert encoder(self.rng.normal(size=(VISUAL_FEATURES, 10))).shape == (12, 10)

    def test_single_frame(self):
        encoder = VisualEncoder(6, self.rng, in_channels=4)
        assert encoder(np.ones((4, 1))).shape == (6, 1)

    def test_wrong_channels(self):
        with self.assertRaises(ValueError):
            VisualEncoder(6, self.rng)(np.ones((AUDIO_FEATURES, 3)))

    def test_receptive_field(self):
        encoder = VisualEncoder(6, self.rng, in_channels=4, kernel=3, dilations=(1, 2))
        assert encoder.reach == 6
        frames = 20
        x = self.rng.normal(size=(4, frames))
        base = encoder(x).data
        bumped = x.copy()
        bumped[:, 10] += 1.0
        changed = np.abs(encoder(bumped).data - base).max(axis=0) > 0
        # only frames within reach of the bumped one may move
        assert not changed[:10 - encoder.reach].any()
        assert not changed[10 + encoder.reach + 1:].any()
        assert changed[10]


if __name__ == '__main__':
    unittest.main()
