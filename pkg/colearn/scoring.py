'''Trial scoring, score fusion and verification metrics (EER, minDCF).

Thresholds are swept at the midpoints between consecutive distinct scores,
plus -inf and +inf. A trial is accepted when its score is >= the threshold,
so at threshold t::

    FAR(t) = fraction of non-target trials with score >= t
    FRR(t) = fraction of target trials with score < t

The EER is read off the polyline through these operating points by linear
interpolation where FAR - FRR changes sign.
'''

import collections

import numpy as np

EER_CONVENTION = 'linear-interpolation'
THRESHOLD_CONVENTION = 'midpoints'

BRANCHES = ('audio', 'visual', 'audio_transferred', 'visual_transferred')
SYSTEMS = BRANCHES + ('audio_driven', 'visual_driven', 'avfusion')
SCORE_COLUMNS = collections.OrderedDict([
    ('audio', 'score_a'),
    ('visual', 'score_v'),
    ('audio_transferred', 'score_at'),
    ('visual_transferred', 'score_vt'),
])

Summary = collections.namedtuple('Summary', 'eer min_dcf threshold')


def cosine_score(e1, e2):
    '''Cosine similarity of two embeddings, in [-1, 1].

    Raises
    ------
    ValueError
        If either embedding has zero norm.
    '''
    e1 = np.asarray(e1, dtype=np.float64).ravel()
    e2 = np.asarray(e2, dtype=np.float64).ravel()
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if n1 == 0 or n2 == 0:
        raise ValueError('cannot score a zero-norm embedding')
    return float(np.clip(np.dot(e1, e2) / (n1 * n2), -1.0, 1.0))


def fuse_audio_driven(s_a, s_v, s_vt, weights=(0.5, 0.25, 0.25)):
    '''Audio as primary modality, visual and visual-transferred as auxiliaries.'''
    return weights[0] * s_a + weights[1] * s_v + weights[2] * s_vt


def fuse_visual_driven(s_v, s_a, s_at, weights=(0.5, 0.25, 0.25)):
    '''Visual as primary modality, audio and audio-transferred as auxiliaries.'''
    return weights[0] * s_v + weights[1] * s_a + weights[2] * s_at


def fuse_baseline(s_a, s_v, weights=(0.5, 0.5)):
    '''Score fusion of independently trained audio-only and visual-only systems.'''
    return weights[0] * s_a + weights[1] * s_v


def _as_trials(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise ValueError('{} scores but {} labels'.format(scores.size, labels.size))
    if labels.all() or not labels.any():
        raise ValueError('metrics need both target and non-target trials')
    if not np.all(np.isfinite(scores)):
        raise ValueError('scores must be finite')
    return scores, labels


def operating_points(scores, labels):
    '''Thresholds and the (FAR, FRR) pair at each of them.

    Returns
    -------
    thresholds, far, frr : numpy.ndarray
        Thresholds ascend from -inf to +inf; FAR descends from 1 to 0 and
        FRR ascends from 0 to 1.
    '''
    scores, labels = _as_trials(scores, labels)
    distinct = np.unique(scores)
    thresholds = np.concatenate(([-np.inf], (distinct[:-1] + distinct[1:]) / 2.0, [np.inf]))
    targets = np.sort(scores[labels])
    nontargets = np.sort(scores[~labels])
    frr = np.searchsorted(targets, thresholds, side='left') / float(targets.size)
    far = (nontargets.size - np.searchsorted(nontargets, thresholds, side='left')) / float(nontargets.size)
    return thresholds, far, frr


def compute_eer(scores, labels):
    '''Equal error rate and the threshold where it occurs.

    Returns
    -------
    eer : float
        In [0, 1].
    threshold : float
        Interpolated between the two bracketing thresholds when both are
        finite, otherwise the finite one.
    '''
    thresholds, far, frr = operating_points(scores, labels)
    diff = far - frr
    hi = int(np.argmax(diff <= 0))
    lo = hi - 1
    alpha = diff[lo] / (diff[lo] - diff[hi])
    eer = far[lo] + alpha * (far[hi] - far[lo])
    t_lo, t_hi = thresholds[lo], thresholds[hi]
    if np.isfinite(t_lo) and np.isfinite(t_hi):
        threshold = t_lo + alpha * (t_hi - t_lo)
    else:
        threshold = t_hi if np.isfinite(t_hi) else t_lo
    return float(eer), float(threshold)


def compute_min_dcf(scores, labels, p_target=0.01, c_fa=1.0, c_miss=1.0):
    '''Minimum normalized detection cost over all thresholds.'''
    _, far, frr = operating_points(scores, labels)
    cost = c_miss * p_target * frr + c_fa * (1.0 - p_target) * far
    return float(cost.min() / min(c_miss * p_target, c_fa * (1.0 - p_target)))


class ScoreReport(object):
    '''Per-trial scores of every available system and their summaries.

    Attributes
    ----------
    trials : list of :class:`colearn.synth.TrialPair`
    labels : numpy.ndarray of bool
    scores : OrderedDict
        System name to per-trial score array, in :data:`SYSTEMS` order.
    summaries : OrderedDict
        System name to :class:`Summary`.
    '''

    def __init__(self, trials, branch_scores, eval_config=None):
        weights = _fusion_weights(eval_config)
        self.trials = list(trials)
        self.labels = np.array([t.label for t in self.trials], dtype=bool)
        found = {k: np.asarray(v, dtype=np.float64) for k, v in branch_scores.items()}
        for name, values in found.items():
            if name not in BRANCHES:
                raise KeyError('unknown branch {!r}'.format(name))
            if values.shape != self.labels.shape:
                raise ValueError('{} has {} scores for {} trials'.format(name, values.size, self.labels.size))
        if all(b in found for b in BRANCHES):
            found['audio_driven'] = fuse_audio_driven(
                found['audio'], found['visual'], found['visual_transferred'], weights['audio_driven'])
            found['visual_driven'] = fuse_visual_driven(
                found['visual'], found['audio'], found['audio_transferred'], weights['visual_driven'])
        elif 'audio' in found and 'visual' in found:
            found['avfusion'] = fuse_baseline(found['audio'], found['visual'], weights['avfusion'])
        self.scores = collections.OrderedDict((s, found[s]) for s in SYSTEMS if s in found)
        p_target, c_fa, c_miss = weights['dcf']
        self.dcf_parameters = weights['dcf']
        self.summaries = collections.OrderedDict()
        for name, values in self.scores.items():
            eer, threshold = compute_eer(values, self.labels)
            self.summaries[name] = Summary(eer, compute_min_dcf(values, self.labels, p_target, c_fa, c_miss),
                                           threshold)

    @property
    def branches(self):
        return [b for b in BRANCHES if b in self.scores]

    def write_scores(self, handle):
        '''One line per trial: ids, 1/0 label, branch scores with 6 decimals.'''
        columns = self.branches
        for i, trial in enumerate(self.trials):
            fields = [trial.enroll, trial.test, '1' if trial.label else '0']
            fields.extend('{:.6f}'.format(self.scores[b][i]) for b in columns)
            handle.write(' '.join(fields) + '\n')

    def write(self, handle, extra=None):
        '''Write ``key=value`` summary lines.

        Parameters
        ----------
        handle : text file handle
        extra : iterable of (str, value), optional
            Additional lines, e.g. parameter counts.
        '''
        p_target, c_fa, c_miss = self.dcf_parameters
        lines = [
            ('convention.eer', EER_CONVENTION),
            ('convention.thresholds', THRESHOLD_CONVENTION),
            ('dcf.p_target', repr(p_target)),
            ('dcf.c_fa', repr(c_fa)),
            ('dcf.c_miss', repr(c_miss)),
            ('trials.target', int(self.labels.sum())),
            ('trials.nontarget', int((~self.labels).sum())),
        ]
        for name, summary in self.summaries.items():
            lines.append(('{}.eer'.format(name), '{:.6f}'.format(summary.eer)))
            lines.append(('{}.min_dcf'.format(name), '{:.6f}'.format(summary.min_dcf)))
            lines.append(('{}.threshold'.format(name), '{:.6f}'.format(summary.threshold)))
        lines.extend(extra or ())
        for key, value in lines:
            handle.write('{}={}\n'.format(key, value))


def _fusion_weights(eval_config):
    if eval_config is None:
        return {'audio_driven': (0.5, 0.25, 0.25), 'visual_driven': (0.5, 0.25, 0.25),
                'avfusion': (0.5, 0.5), 'dcf': (0.01, 1.0, 1.0)}
    return {'audio_driven': eval_config.audio_driven_weights,
            'visual_driven': eval_config.visual_driven_weights,
            'avfusion': eval_config.baseline_weights,
            'dcf': (eval_config.p_target, eval_config.c_fa, eval_config.c_miss)}


def error_overlap(report):
    '''Count trials that one system gets right where others fail.

    Every system decides at its own EER threshold. The returned counts are

    - ``both_wrong``: wrong in both audio and visual;
    - ``<x>_transferred.rescued``: wrong in audio and visual but right in
      the transferred branch x;
    - ``<fusion>.rescued``: wrong in the fusion's primary modality but right
      after fusion.

    Only counts whose systems are present in ``report`` are returned.
    '''
    correct = {}
    for name, values in report.scores.items():
        correct[name] = (values >= report.summaries[name].threshold) == report.labels
    counts = collections.OrderedDict()
    if 'audio' not in correct or 'visual' not in correct:
        return counts
    both_wrong = ~correct['audio'] & ~correct['visual']
    counts['both_wrong'] = int(both_wrong.sum())
    for name in ('audio_transferred', 'visual_transferred'):
        if name in correct:
            counts['{}.rescued'.format(name)] = int((both_wrong & correct[name]).sum())
    for name, primary in (('audio_driven', 'audio'), ('visual_driven', 'visual'), ('avfusion', 'audio')):
        if name in correct:
            counts['{}.rescued'.format(name)] = int((~correct[primary] & correct[name]).sum())
    return counts
