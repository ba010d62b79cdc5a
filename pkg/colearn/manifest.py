'''Run manifests: what a command was asked to do and what it wrote.

A manifest is written to ``<out>/manifest.cfg`` before any long computation
and rewritten with artifact hashes when the command finishes::

    [run]
    command = train
    config_path = configs/desk.cfg
    seed = 0
    out = runs/a

    [corpus]
    ...            (the resolved configuration)

    [artifacts]
    checkpoint.ckpt = 5f0c...

Since configuration loading ignores the ``[run]`` and ``[artifacts]``
sections, a manifest can be passed back as ``--config`` to repeat a run.
'''

import collections
import configparser
import hashlib
import io
import os

from .config import Config

MANIFEST_FILE = 'manifest.cfg'


def sha256_file(path):
    '''Hex sha256 digest of a file's bytes.'''
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


class RunManifest(object):
    '''Command, resolved configuration, seed, output directory and artifact hashes.'''

    def __init__(self, command, config, out, config_path='', argv=()):
        self.command = command
        self.config = config
        self.out = out
        self.config_path = config_path or ''
        self.argv = list(argv)
        self.artifacts = collections.OrderedDict()

    @property
    def seed(self):
        return self.config.train.seed

    @property
    def path(self):
        return os.path.join(self.out, MANIFEST_FILE)

    def add(self, path):
        '''Record the sha256 of a written file, keyed by its path relative to ``out``.'''
        self.artifacts[os.path.relpath(path, self.out).replace(os.sep, '/')] = sha256_file(path)

    def dumps(self):
        lines = ['[run]',
                 'command = {}'.format(self.command),
                 'config_path = {}'.format(self.config_path),
                 'seed = {}'.format(self.seed),
                 'out = {}'.format(self.out),
                 'argv = {}'.format(' '.join(self.argv)),
                 '',
                 self.config.dumps(),
                 '[artifacts]']
        lines.extend('{} = {}'.format(k, v) for k, v in sorted(self.artifacts.items()))
        return '\n'.join(lines) + '\n'

    def write(self):
        os.makedirs(self.out, exist_ok=True)
        with io.open(self.path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(self.dumps())
        return self.path

    @classmethod
    def read(cls, path):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        with io.open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
        parser.read_string(text)
        run = parser['run']
        manifest = cls(run['command'], Config.loads(text), run['out'], run.get('config_path', ''),
                       run.get('argv', '').split())
        if parser.has_section('artifacts'):
            manifest.artifacts.update(parser.items('artifacts'))
        return manifest

    def verify(self):
        '''Return the artifacts whose current hash differs from the recorded one.'''
        changed = []
        for rel, digest in self.artifacts.items():
            path = os.path.join(self.out, rel)
            if not os.path.isfile(path) or sha256_file(path) != digest:
                changed.append(rel)
        return changed
