#!/usr/bin/env python

'''The ``colearn`` command: dispatch to gen-data, train, eval or gradcheck.'''

import argparse
import sys

from . import evaluate, gen_data, gradcheck, train

COMMANDS = {
    'gen-data': gen_data,
    'train': train,
    'eval': evaluate,
    'gradcheck': gradcheck,
}

parser = argparse.ArgumentParser(description='Cross-modal audio-visual speaker co-learning.')
parser.add_argument('command', choices=sorted(COMMANDS), help='what to run')
parser.add_argument('args', nargs=argparse.REMAINDER, help='arguments for the command')


def main(argv=None):
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    COMMANDS[args.command].main(args.args)


if __name__ == '__main__':
    main()
