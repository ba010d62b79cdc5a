'''Compare tape gradients with central finite differences.

For every entry of every parameter the loss is re-evaluated at ``p + h`` and
``p - h``. A tensor's error is

    max |g - n| / max(max |g|, max |n|, floor)

over its entries, with ``g`` the tape gradient and ``n`` the numerical one.
``floor`` is ``FLOOR_FRACTION`` times the largest tape gradient entry of the
whole model, so a tensor whose true gradient is zero is judged by its
absolute error. A module's error is the largest error of its tensors.
'''

import collections
import logging

import numpy as np

from .config import micro_config
from .model import CoLearnModel
from .synth import Corpus
from .tensor import Tape

logger = logging.getLogger(__name__)

STEP = 1e-5
TOLERANCE = 1e-4
FLOOR_FRACTION = 1e-3

TensorError = collections.namedtuple('TensorError', 'name size error')


def relative_error(analytic, numeric, floor=1e-10):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def _evaluate(objective, flat, i, value):
    saved = flat[i]
    flat[i] = value
    try:
        return objective().item()
    finally:
        flat[i] = saved


def _central(objective, flat, i, step):
    saved = flat[i]
    return (_evaluate(objective, flat, i, saved + step) - _evaluate(objective, flat, i, saved - step)) / (2 * step)


def _one_sided(objective, flat, i, step):
    '''Second-order forward and backward differences at entry ``i``.'''
    saved = flat[i]
    f0 = objective().item()
    ahead = [_evaluate(objective, flat, i, saved + k * step) for k in (1, 2)]
    behind = [_evaluate(objective, flat, i, saved - k * step) for k in (1, 2)]
    forward = (-3 * f0 + 4 * ahead[0] - ahead[1]) / (2 * step)
    backward = (3 * f0 - 4 * behind[0] + behind[1]) / (2 * step)
    return forward, backward


def numeric_gradient(objective, param, step=STEP, reference=None, tolerance=TOLERANCE, floor=1e-10):
    '''Central differences of ``objective()`` with respect to every entry of ``param``.

    When ``reference`` (the tape gradient) is given, entries that disagree
    with it are re-estimated. Steps ``step / 10`` and ``step / 100`` handle
    a kink inside the window, and count when the two narrow estimates agree.
    A parameter sitting exactly on a kink has only one-sided derivatives, so
    second-order forward and backward differences are candidates too. The
    candidate closest to ``reference`` is kept.
    '''
    grad = np.empty_like(param.data)
    flat = param.data.reshape(-1)
    out = grad.reshape(-1)
    if reference is not None:
        reference = np.asarray(reference).reshape(-1)
        limit = 0.1 * tolerance * max(np.abs(reference).max(initial=0.0), floor)
    for i in range(flat.size):
        out[i] = _central(objective, flat, i, step)
        if reference is None or abs(out[i] - reference[i]) < limit:
            continue
        candidates = list(_one_sided(objective, flat, i, step))
        narrow = _central(objective, flat, i, step / 10)
        narrower = _central(objective, flat, i, step / 100)
        if abs(narrow - narrower) < limit:
            candidates.append(narrower)
        for estimate in candidates:
            if abs(estimate - reference[i]) < abs(out[i] - reference[i]):
                out[i] = estimate
    return grad


def analytic_gradients(model, objective):
    '''Tape gradients of ``objective()`` for every named parameter.'''
    model.zero_grad()
    with Tape() as tape:
        loss = objective()
        tape.backward(loss)
    return collections.OrderedDict((name, p.grad.copy()) for name, p in model.named_parameters())


def check_gradients(model, objective, step=STEP, tolerance=TOLERANCE):
    '''Return one :class:`TensorError` per named parameter of ``model``.'''
    analytic = analytic_gradients(model, objective)
    floor = max(FLOOR_FRACTION * max(np.abs(g).max(initial=0.0) for g in analytic.values()), 1e-10)
    errors = []
    for name, param in model.named_parameters():
        numeric = numeric_gradient(objective, param, step, analytic[name], tolerance, floor)
        errors.append(TensorError(name, param.size, relative_error(analytic[name], numeric, floor)))
        logger.debug('%s: relative error %.3e', name, errors[-1].error)
    return errors


def module_of(name):
    return name.split('.', 1)[0]


class GradcheckReport(object):
    '''Per-tensor errors grouped by top-level module.'''

    def __init__(self, errors, tolerance=TOLERANCE):
        self.errors = list(errors)
        self.tolerance = tolerance

    @property
    def modules(self):
        worst = collections.OrderedDict()
        for entry in self.errors:
            key = module_of(entry.name)
            worst[key] = max(worst.get(key, 0.0), entry.error)
        return worst

    @property
    def failures(self):
        return [e for e in self.errors if not e.error < self.tolerance]

    @property
    def passed(self):
        return not self.failures

    def write(self, handle):
        '''``module max_error PASS|FAIL`` lines, then every failing tensor.'''
        for name, error in self.modules.items():
            handle.write('{} {:.3e} {}\n'.format(name, error, 'PASS' if error < self.tolerance else 'FAIL'))
        for entry in self.failures:
            handle.write('failed {} ({} values) {:.3e}\n'.format(entry.name, entry.size, entry.error))
        handle.write('result {}\n'.format('PASS' if self.passed else 'FAIL'))


def run_gradcheck(config=None, tolerance=TOLERANCE, step=STEP):
    '''Check L_co of the micro co-learning model on one training utterance.'''
    config = config or micro_config()
    corpus = Corpus.generate(config)
    utt, label = corpus.labeled()[0]
    model = CoLearnModel(config, len(corpus.speaker_labels()))

    def objective():
        return model.losses(utt.audio, utt.visual, label).co

    report = GradcheckReport(check_gradients(model, objective, step, tolerance), tolerance)
    for name, error in report.modules.items():
        logger.info('%s: max relative error %.3e', name, error)
    return report
