#!/usr/bin/env python

'''Score a trial list with trained checkpoints and report EER and minDCF.'''

import io
import logging
import sys

from . import common
from ..checkpoint import Checkpoint
from ..errors import ConfigError
from ..evaluate import evaluate_models, write_evaluation
from ..manifest import RunManifest
from ..synth import Corpus, read_trials
from ..train import restore

parser = common.make_parser('Score a trial list with trained checkpoints and report EER and minDCF.')
parser.add_argument('checkpoint', nargs='+', metavar='FILE',
                    help='a co-learning checkpoint, or an audio and a visual baseline checkpoint')
parser.add_argument('--corpus', metavar='DIR', help='corpus directory holding the test utterances')
parser.add_argument('--trials', metavar='FILE', help='trial list (default: the corpus trials.txt)')


def evaluate(args, argv=()):
    if len(args.checkpoint) > 2:
        raise ConfigError('evaluate takes one co-learning or two baseline checkpoints')
    config = common.load_config(args)
    checkpoints = [Checkpoint.load(path) for path in args.checkpoint]
    if len(checkpoints) == 2 and sorted(c.kind for c in checkpoints) != ['baseline-audio', 'baseline-visual']:
        raise ConfigError('two checkpoints must be one audio and one visual baseline')
    corpus_dir = args.corpus or config.train.corpus
    if not corpus_dir:
        raise ConfigError('no corpus given: pass --corpus DIR or set train.corpus')
    common.prepare_out(args.out, args.force)
    manifest = RunManifest('eval', config, args.out, args.config, argv)
    manifest.write()
    corpus = Corpus.read(corpus_dir)
    trials = None
    if args.trials:
        with io.open(args.trials, 'r', encoding='utf-8') as handle:
            trials = read_trials(handle)
    models = [restore(c) for c in checkpoints]
    report, params = evaluate_models(models, corpus, trials, config.eval)
    for path in write_evaluation(report, params, args.out):
        manifest.add(path)
    manifest.write()
    for name, summary in report.summaries.items():
        print('{:<20s} EER {:7.4f}%  minDCF {:.4f}'.format(name, 100 * summary.eer, summary.min_dcf))
    logging.info('%s: %d trials scored', args.out, len(report.trials))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    common.setup_logging(args)
    common.run(lambda: evaluate(args, argv))


if __name__ == '__main__':
    main()
