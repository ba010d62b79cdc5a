'''Flags, configuration loading and exit codes shared by the colearn scripts.'''

import argparse
import logging
import os
import sys

from ..config import Config
from ..errors import ConfigError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def make_parser(description, out_required=True):
    '''An argument parser carrying ``--config --seed --out --set -v --force``.'''
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument('-c', '--config', metavar='PATH', help='read run settings from this config file')
    parser.add_argument('--seed', type=int, metavar='N', help='root seed of every random substream')
    parser.add_argument('-o', '--out', metavar='DIR', required=out_required, help='write outputs into DIR')
    parser.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                        help='override one config value (repeatable)')
    parser.add_argument('--force', action='store_true', help='write into a non-empty output directory')
    parser.add_argument('-v', '--verbose', action='store_true', help='increase output verbosity')
    return parser


def setup_logging(args):
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s')


def load_config(args, default=None):
    '''Read ``--config`` (or start from ``default``), then apply ``--seed`` and ``--set``.'''
    config = Config.read(args.config) if args.config else (default or Config())
    if args.seed is not None:
        config.train.seed = args.seed
    for item in args.set:
        key, sep, value = item.partition('=')
        if not sep:
            raise ConfigError('--set expects SECTION.KEY=VALUE, got {!r}'.format(item))
        config.set(key.strip(), value)
    return config.validate()


def prepare_out(directory, force):
    '''Create ``directory``; refuse a non-empty one unless ``force``.'''
    if os.path.isdir(directory) and os.listdir(directory) and not force:
        raise ConfigError('output directory {} is not empty; pass --force to reuse it'.format(directory))
    os.makedirs(directory, exist_ok=True)


def run(command):
    '''Call ``command()`` and exit with the code its outcome maps to.'''
    try:
        command()
    except NumericalError as err:
        logging.error('numerical failure: %s', err)
        sys.exit(EXIT_NUMERICAL)
    except (ValueError, KeyError, OSError) as err:
        logging.error('%s', err.args[0] if isinstance(err, KeyError) and err.args else err)
        sys.exit(EXIT_CONFIG)
    sys.exit(EXIT_OK)
