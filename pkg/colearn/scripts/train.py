#!/usr/bin/env python

'''Train a baseline or co-learning model on a synthetic corpus.'''

import io
import logging
import os
import sys

from . import common
from ..checkpoint import Checkpoint
from ..errors import ConfigError
from ..manifest import RunManifest
from ..synth import Corpus
from ..train import MODES, train_mode

CHECKPOINT_FILE = 'checkpoint.ckpt'
LOG_FILE = 'train.log'

parser = common.make_parser('Train a baseline or co-learning model on a synthetic corpus.')
parser.add_argument('--corpus', metavar='DIR', help='corpus directory written by gen-data')
parser.add_argument('--mode', choices=MODES, help='what to train (default from train.mode)')
parser.add_argument('--epochs', type=int, metavar='N', help='number of training epochs')
parser.add_argument('--audio-checkpoint', metavar='FILE', help='audio baseline for co-learn-warm')
parser.add_argument('--visual-checkpoint', metavar='FILE', help='visual baseline for co-learn-warm')


def resolve_mode(args, config):
    if args.mode:
        return args.mode
    return 'co-learn-warm' if config.train.mode == 'warm_start' else 'co-learn-scratch'


def train(args, argv=()):
    config = common.load_config(args)
    if args.epochs is not None:
        config.train.epochs = args.epochs
    if args.corpus:
        config.train.corpus = args.corpus
    if args.audio_checkpoint:
        config.train.audio_checkpoint = args.audio_checkpoint
    if args.visual_checkpoint:
        config.train.visual_checkpoint = args.visual_checkpoint
    config.validate()
    if not config.train.corpus:
        raise ConfigError('no corpus given: pass --corpus DIR or set train.corpus')
    mode = resolve_mode(args, config)
    checkpoints = None
    if mode == 'co-learn-warm':
        paths = (config.train.audio_checkpoint, config.train.visual_checkpoint)
        checkpoints = tuple(Checkpoint.load(p) if p else None for p in paths)
    common.prepare_out(args.out, args.force)
    manifest = RunManifest('train', config, args.out, args.config, argv)
    manifest.write()
    corpus = Corpus.read(config.train.corpus)
    log_path = os.path.join(args.out, LOG_FILE)
    with io.open(log_path, 'w', encoding='utf-8', newline='\n') as log:
        checkpoint = train_mode(mode, config, corpus, log, checkpoints)
    ckpt_path = os.path.join(args.out, CHECKPOINT_FILE)
    checkpoint.save(ckpt_path)
    manifest.add(log_path)
    manifest.add(ckpt_path)
    manifest.write()
    logging.info('%s: %s checkpoint after %d epochs', ckpt_path, checkpoint.kind, checkpoint.epoch)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    common.setup_logging(args)
    common.run(lambda: train(args, argv))


if __name__ == '__main__':
    main()
