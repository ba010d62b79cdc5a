'''Embed test utterances, score trial lists and write evaluation reports.

Evaluation runs forward only; every utterance is embedded at most once per
model and its branch embeddings are cached for all trials that use it.
'''

import collections
import io
import logging
import os

import numpy as np

from .errors import ConfigError
from .model import count_parameters
from .scoring import ScoreReport, cosine_score, error_overlap

logger = logging.getLogger(__name__)

SCORES_FILE = 'scores.txt'
REPORT_FILE = 'report.txt'
OVERLAP_FILE = 'overlap.txt'


class EmbeddingCache(object):
    '''Branch embeddings of corpus utterances, computed on first use.

    Parameters
    ----------
    model : :class:`colearn.model.CoLearnModel` or :class:`colearn.model.BaselineModel`
    corpus : :class:`colearn.synth.Corpus`
    '''

    def __init__(self, model, corpus):
        self.model = model
        self.corpus = corpus
        self._cache = {}

    def __len__(self):
        return len(self._cache)

    def __contains__(self, utt_id):
        return utt_id in self._cache

    def get(self, utt_id):
        '''Return ``{branch: 1-D embedding}`` for one utterance.

        Raises
        ------
        KeyError
            If the corpus has no utterance ``utt_id``.
        '''
        if utt_id not in self._cache:
            utt = self.corpus.get(utt_id)
            embeddings = self.model.embed(utt.audio, utt.visual)
            self._cache[utt_id] = collections.OrderedDict(
                (b, e.numpy().ravel()) for b, e in embeddings.items())
        return self._cache[utt_id]


def check_trials(trials, corpus):
    '''Reject trial lists that name unknown utterances or hold one class only.'''
    for trial in trials:
        for utt_id in (trial.enroll, trial.test):
            if utt_id not in corpus.utterances:
                raise KeyError('trial references missing utterance {!r}'.format(utt_id))
    labels = set(bool(t.label) for t in trials)
    if labels != {True, False}:
        raise ConfigError('trial list needs both target and non-target trials to define an EER')


def branch_scores(model, corpus, trials):
    '''Cosine score of every trial for every branch ``model`` has.'''
    cache = EmbeddingCache(model, corpus)
    scores = collections.OrderedDict((b, np.empty(len(trials))) for b in model.branches)
    for i, trial in enumerate(trials):
        enroll, test = cache.get(trial.enroll), cache.get(trial.test)
        for b in model.branches:
            scores[b][i] = cosine_score(enroll[b], test[b])
    logger.debug('embedded %d utterances for %d trials', len(cache), len(trials))
    return scores


def evaluate_models(models, corpus, trials=None, eval_config=None):
    '''Score ``trials`` with one co-learning model or with unimodal baselines.

    Parameters
    ----------
    models : sequence
        Either one model, or an audio baseline and a visual baseline whose
        scores are then also fused into the ``avfusion`` system.
    corpus : :class:`colearn.synth.Corpus`
    trials : list of :class:`colearn.synth.TrialPair`, optional
        Defaults to the corpus trial list.
    eval_config : :class:`colearn.config.EvalConfig`, optional

    Returns
    -------
    report : :class:`colearn.scoring.ScoreReport`
    params : OrderedDict
        ``params.<branch>`` keys and parameter counts.
    '''
    trials = corpus.trials if trials is None else list(trials)
    check_trials(trials, corpus)
    scores = collections.OrderedDict()
    params = collections.OrderedDict()
    for model in models:
        for branch, values in branch_scores(model, corpus, trials).items():
            if branch in scores:
                raise ConfigError('two checkpoints both provide the {} branch'.format(branch))
            scores[branch] = values
        for branch, count in count_parameters(model).items():
            params['params.' + branch] = count
    report = ScoreReport(trials, scores, eval_config)
    for name, summary in report.summaries.items():
        logger.info('%s: EER %.4f minDCF %.4f', name, summary.eer, summary.min_dcf)
    return report, params


def write_evaluation(report, params, directory):
    '''Write the score file, the report and the error-overlap counts; return the paths.'''
    paths = []
    scores_path = os.path.join(directory, SCORES_FILE)
    with io.open(scores_path, 'w', encoding='utf-8', newline='\n') as handle:
        report.write_scores(handle)
    paths.append(scores_path)
    report_path = os.path.join(directory, REPORT_FILE)
    with io.open(report_path, 'w', encoding='utf-8', newline='\n') as handle:
        report.write(handle, params.items())
    paths.append(report_path)
    overlap = error_overlap(report)
    if overlap:
        overlap_path = os.path.join(directory, OVERLAP_FILE)
        with io.open(overlap_path, 'w', encoding='utf-8', newline='\n') as handle:
            for key, value in overlap.items():
                handle.write('{}={}\n'.format(key, value))
        paths.append(overlap_path)
    return paths


def read_report(handle):
    '''Parse ``key=value`` report lines into an ordered dict of strings.'''
    values = collections.OrderedDict()
    for line in handle:
        line = line.strip()
        if line:
            key, _, value = line.partition('=')
            values[key] = value
    return values
