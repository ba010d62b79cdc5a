#!/usr/bin/env python

'''Check tape gradients of the micro co-learning model against finite differences.'''

import io
import os
import sys

from . import common
from ..config import micro_config
from ..errors import NumericalError
from ..gradcheck import STEP, TOLERANCE, run_gradcheck
from ..manifest import RunManifest

REPORT_FILE = 'gradcheck.txt'

parser = common.make_parser('Check tape gradients against central finite differences.', out_required=False)
parser.add_argument('--tolerance', type=float, default=TOLERANCE, metavar='X',
                    help='largest accepted relative error (default %(default)g)')
parser.add_argument('--step', type=float, default=STEP, metavar='H',
                    help='finite-difference step (default %(default)g)')


def gradcheck(args, argv=()):
    config = common.load_config(args, default=micro_config())
    manifest = None
    if args.out:
        common.prepare_out(args.out, args.force)
        manifest = RunManifest('gradcheck', config, args.out, args.config, argv)
        manifest.write()
    report = run_gradcheck(config, args.tolerance, args.step)
    report.write(sys.stdout)
    if manifest is not None:
        path = os.path.join(args.out, REPORT_FILE)
        with io.open(path, 'w', encoding='utf-8', newline='\n') as handle:
            report.write(handle)
        manifest.add(path)
        manifest.write()
    if not report.passed:
        raise NumericalError('gradient check failed for {}'.format(
            ', '.join(e.name for e in report.failures)))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    common.setup_logging(args)
    common.run(lambda: gradcheck(args, argv))


if __name__ == '__main__':
    main()
