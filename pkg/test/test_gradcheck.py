import io
import unittest
from unittest import mock

import numpy as np

from colearn.gradcheck import (GradcheckReport, TensorError, check_gradients, module_of, numeric_gradient,
                               relative_error, run_gradcheck)
from colearn.layers import Module
from colearn.maxformer import CrossModalBooster
from colearn.decoders import ASPDecoder
from colearn.tensor import ParamTensor, mul, relu, sum_all
from test.base import Base


class Pipeline(Module):
    '''A booster feeding an ASP decoder, small enough to check quickly.'''

    def __init__(self, rng):
        self.booster = CrossModalBooster(3, 2, 4, 2, 1, rng)
        self.decoder = ASPDecoder(4, rng, embedding_dim=3, hidden=4)


class RelativeErrorTest(Base):
    def test_examples(self):
        assert relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0
        self.assertAlmostEqual(relative_error([1.0, 2.0], [1.0, 1.0]), 0.5)
        assert relative_error([0.0], [0.0]) == 0.0

    def test_floor_bounds_roundoff_on_zero_gradients(self):
        self.assertAlmostEqual(relative_error([1e-13], [3e-13]), 2 / 3.)
        assert relative_error([1e-13], [3e-13], floor=1e-6) < 1e-6
        assert relative_error([0.0, 2.0], [0.5, 2.0], floor=1.0) == 0.25

    def test_module_of(self):
        assert module_of('audio_booster.blocks.0.w_out') == 'audio_booster'


class NumericGradientTest(Base):
    def test_quadratic(self):
        p = ParamTensor([1.0, -2.0, 3.0])
        n = numeric_gradient(lambda: sum_all(mul(p, p)), p)
        self.assertAllClose(n, [2.0, -4.0, 6.0], atol=1e-8)
        assert p.data.tolist() == [1.0, -2.0, 3.0]

    def test_kink_inside_window(self):
        p = ParamTensor([3e-6, 1.0])
        objective = lambda: sum_all(relu(p))
        wide = numeric_gradient(objective, p)
        assert abs(wide[0] - 1.0) > 0.1
        narrowed = numeric_gradient(objective, p, reference=np.array([1.0, 1.0]))
        self.assertAllClose(narrowed, [1.0, 1.0], atol=1e-8)

    def test_exactly_on_kink(self):
        p = ParamTensor([0.0, 1.0])
        objective = lambda: sum_all(relu(p))
        self.assertAllClose(numeric_gradient(objective, p), [0.5, 1.0], atol=1e-8)
        self.assertAllClose(numeric_gradient(objective, p, reference=np.array([0.0, 1.0])), [0.0, 1.0], atol=1e-8)
        self.assertAllClose(numeric_gradient(objective, p, reference=np.array([1.0, 1.0])), [1.0, 1.0], atol=1e-8)
        assert p.data.tolist() == [0.0, 1.0]

    def test_wrong_reference_is_not_matched(self):
        p = ParamTensor([0.5, -1.5])
        n = numeric_gradient(lambda: sum_all(mul(p, p)), p, reference=np.array([3.0, 3.0]))
        self.assertAllClose(n, [1.0, -3.0], atol=1e-7)


class CheckGradientsTest(Base):
    def setUp(self):
        super(CheckGradientsTest, self).setUp()
        self.model = Pipeline(np.random.default_rng(5))
        source = self.rng.normal(size=(3, 6))
        target = self.rng.normal(size=(2, 3))
        weights = self.rng.normal(size=(3, 1))
        self.objective = lambda: sum_all(mul(self.model.decoder(self.model.booster(source, target)), weights))

    def test_passes(self):
        report = GradcheckReport(check_gradients(self.model, self.objective))
        assert report.passed, report.failures
        assert list(report.modules) == ['booster', 'decoder']
        errors = dict((e.name, e.error) for e in report.errors)
        assert errors['decoder.score_out.bias'] < 1e-4

    def test_deterministic(self):
        first = check_gradients(self.model, self.objective)
        second = check_gradients(self.model, self.objective)
        assert first == second

    def test_broken_softmax_rule_is_caught(self):
        with mock.patch('colearn.tensor._softmax_rows_backward', lambda y, g: np.zeros_like(g)):
            report = GradcheckReport(check_gradients(self.model, self.objective))
        assert not report.passed
        names = [entry.name for entry in report.failures]
        assert 'booster.blocks.0.heads.0.w_q' in names
        assert 'decoder.score_in.weight' in names
        handle = io.StringIO()
        report.write(handle)
        lines = handle.getvalue().splitlines()
        assert lines[-1] == 'result FAIL'
        assert any(line.startswith('failed booster.blocks.0.heads.0.w_q') for line in lines)


class ReportTest(Base):
    def test_write(self):
        report = GradcheckReport([TensorError('a.w', 4, 1e-7), TensorError('a.b', 2, 3e-6),
                                  TensorError('b.w', 6, 2e-3)], tolerance=1e-4)
        handle = io.StringIO()
        report.write(handle)
        assert handle.getvalue().splitlines() == [
            'a 3.000e-06 PASS',
            'b 2.000e-03 FAIL',
            'failed b.w (6 values) 2.000e-03',
            'result FAIL',
        ]


class MicroModelTest(Base):
    def test_micro_model_passes(self):
        report = run_gradcheck()
        assert report.passed, report.failures
        assert set(report.modules) >= {'audio_encoder', 'visual_encoder', 'audio_booster', 'visual_booster',
                                       'audio_transferred_decoder', 'visual_transferred_head'}


if __name__ == '__main__':
    unittest.main()
