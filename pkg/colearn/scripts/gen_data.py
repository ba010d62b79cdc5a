#!/usr/bin/env python

'''Generate a synthetic audio-visual speaker corpus.'''

import logging
import sys

from . import common
from ..manifest import RunManifest
from ..synth import Corpus

parser = common.make_parser('Generate a synthetic audio-visual speaker corpus.')
parser.add_argument('--trials', type=int, nargs=2, metavar=('N_TARGET', 'N_NONTARGET'),
                    help='number of target and non-target trials')


def generate(args, argv=()):
    config = common.load_config(args)
    if args.trials:
        config.corpus.n_target, config.corpus.n_nontarget = args.trials
    common.prepare_out(args.out, args.force)
    manifest = RunManifest('gen-data', config, args.out, args.config, argv)
    manifest.write()
    corpus = Corpus.generate(config)
    for path in corpus.write(args.out):
        manifest.add(path)
    manifest.write()
    print(corpus.format_statistics())
    print('{} trials: {} target, {} non-target'.format(
        len(corpus.trials), config.corpus.n_target, config.corpus.n_nontarget))
    logging.info('%s: corpus written', args.out)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    common.setup_logging(args)
    common.run(lambda: generate(args, argv))


if __name__ == '__main__':
    main()
