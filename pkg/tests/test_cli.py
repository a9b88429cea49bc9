import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

from diffsbt import __version__
from diffsbt.cli import run
from tests.fixtures import commit_files, init_git_repo

FIXES = 20


def build_history(folder):
    """
    A clone with one module per helper, a fix for each and some noise commits
    """
    repo = init_git_repo(folder)
    commit_files(repo, 'Add value helpers', {
        f'pkg/mod{i:02d}.py': f'def value_{i}():\n    total = {i}\n    return total\n'
        for i in range(FIXES)})
    commit_files(repo, 'Add readme', {'README.md': 'Value helpers\n'})
    for i in range(FIXES):
        commit_files(repo, f'Fix off by one error in value {i} helper', {
            f'pkg/mod{i:02d}.py': f'def value_{i}():\n    total = {i} + 1\n    return total\n'})
        if i == 10:
            commit_files(repo, 'Update docs to describe the helpers',
                         {'README.md': 'Value helpers, one per module\n'})
            commit_files(repo, 'fix flaky test for the helper values',
                         {'tests/test_values.py': 'assert True\n'})


def count_lines(path):
    with open(path, encoding='utf-8') as handle:
        return sum(1 for line in handle if line.strip())


class TestCliMethods(unittest.TestCase):
    """
    Tests for the diffsbt command line
    """

    def run_cli(self, *argv):
        """
        Exit code and captured stderr of one invocation
        """
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            code = run(list(argv))
        return code, stderr.getvalue()

    def test_full_pipeline(self):
        """
        Test ingest, filter, encode, split, index, explain and eval end to end
        """
        with tempfile.TemporaryDirectory() as folder:
            def path(name):
                return os.path.join(folder, name)

            clone = path('values')
            build_history(clone)
            splits = path('splits')

            code, stderr = self.run_cli('ingest', '--input', clone, '--output',
                                        path('commits.jsonl'), '--repo', 'demo/values')
            self.assertEqual(code, 0, stderr)
            self.assertIn(f'diffsbt {__version__} config=', stderr)
            self.assertEqual(count_lines(path('commits.jsonl')), FIXES + 3)

            code, stderr = self.run_cli('filter', '--input', path('commits.jsonl'),
                                        '--output', path('accepted.jsonl'),
                                        '--decisions', path('decisions.jsonl'))
            self.assertEqual(code, 0, stderr)
            self.assertEqual(count_lines(path('accepted.jsonl')), FIXES)
            with open(path('decisions.jsonl'), encoding='utf-8') as handle:
                reasons = {json.loads(line)['reason'] for line in handle}
            self.assertEqual(reasons, {None, 'NotBugfix', 'OnlyTestFiles'})

            code, stderr = self.run_cli('encode', '--input', path('accepted.jsonl'),
                                        '--output', path('pretrain.jsonl'))
            self.assertEqual(code, 0, stderr)

            code, stderr = self.run_cli('split', '--input', path('pretrain.jsonl'),
                                        '--output', splits, '--seed', '1')
            self.assertEqual(code, 0, stderr)
            self.assertEqual(sorted(os.listdir(splits)), sorted(
                f'{stage}_{part}.jsonl' for stage in ('pretrain', 'finetune')
                for part in ('train', 'val', 'test')))
            self.assertEqual(count_lines(os.path.join(splits, 'pretrain_train.jsonl')), 15)
            self.assertEqual(count_lines(os.path.join(splits, 'finetune_test.jsonl')), 1)

            code, stderr = self.run_cli('index', '--input',
                                        os.path.join(splits, 'finetune_train.jsonl'),
                                        '--output', path('index.jsonl'))
            self.assertEqual(code, 0, stderr)

            code, stderr = self.run_cli('explain', '--input',
                                        os.path.join(splits, 'finetune_test.jsonl'),
                                        '--index', path('index.jsonl'),
                                        '--output', path('explained.jsonl'))
            self.assertEqual(code, 0, stderr)
            with open(path('explained.jsonl'), encoding='utf-8') as handle:
                row = json.loads(handle.readline())
            self.assertTrue(row['candidate'].startswith('Fix off by one error in value'))
            self.assertEqual(set(row['provenance']),
                             {'index', 'example_id', 'cosine', 'bleu', 'bag_of_words'})

            code, stderr = self.run_cli('eval', '--input', path('explained.jsonl'),
                                        '--output', path('report.json'))
            self.assertEqual(code, 0, stderr)
            with open(path('report.json'), encoding='utf-8') as handle:
                report = json.load(handle)
            self.assertEqual(report['aggregates']['count'], 1)
            self.assertEqual(report['header']['provider'], 'hashing:256')

    def run_pipeline(self, clone, config, out):
        """
        Every step from ingest to eval into `out`, under one config file
        """
        os.makedirs(out)

        def path(name):
            return os.path.join(out, name)

        steps = [
            ('ingest', '--input', clone, '--output', path('commits.jsonl'),
             '--repo', 'demo/values'),
            ('filter', '--input', path('commits.jsonl'), '--output', path('accepted.jsonl'),
             '--decisions', path('decisions.jsonl')),
            ('encode', '--input', path('accepted.jsonl'), '--output', path('pretrain.jsonl')),
            ('split', '--input', path('pretrain.jsonl'), '--output', path('splits')),
            ('index', '--input', os.path.join(path('splits'), 'finetune_train.jsonl'),
             '--output', path('index.jsonl')),
            ('explain', '--input', os.path.join(path('splits'), 'finetune_test.jsonl'),
             '--index', path('index.jsonl'), '--output', path('explained.jsonl')),
            ('eval', '--input', path('explained.jsonl'), '--output', path('report.json')),
        ]
        for step in steps:
            code, stderr = self.run_cli(*step, '--config', config)
            self.assertEqual(code, 0, stderr)

    def test_repeated_runs_are_byte_identical(self):
        """
        Test that two runs with one config write the same bytes to every file
        """
        with tempfile.TemporaryDirectory() as folder:
            clone = os.path.join(folder, 'values')
            build_history(clone)
            config = os.path.join(folder, 'run.cfg')
            with open(config, 'w', encoding='utf-8') as handle:
                handle.write('seed = 4\nk = 3\ncontext_radius = 2\n')

            first, second = os.path.join(folder, 'first'), os.path.join(folder, 'second')
            self.run_pipeline(clone, config, first)
            self.run_pipeline(clone, config, second)

            names = sorted(os.path.relpath(os.path.join(root, name), first)
                           for root, _, files in os.walk(first) for name in files)
            self.assertIn(os.path.join('splits', 'finetune_test.jsonl'), names)
            for name in names:
                with self.subTest(name=name):
                    with open(os.path.join(first, name), 'rb') as left, \
                            open(os.path.join(second, name), 'rb') as right:
                        self.assertEqual(left.read(), right.read())

    def test_usage_errors(self):
        """
        Test that bad command lines exit with status 1
        """
        with tempfile.TemporaryDirectory() as folder:
            empty = os.path.join(folder, 'empty.jsonl')
            with open(empty, 'w', encoding='utf-8'):
                pass
            for argv in ([], ['shuffle'], ['encode', '--stage', 'train'],
                         ['split', '--input', empty],
                         ['explain', '--input', empty, '--index', empty, '--k', '0']):
                with self.subTest(argv=argv):
                    self.assertEqual(self.run_cli(*argv)[0], 1)

    def test_data_errors(self):
        """
        Test that unreadable or malformed input exits with status 2
        """
        with tempfile.TemporaryDirectory() as folder:
            broken = os.path.join(folder, 'broken.jsonl')
            with open(broken, 'w', encoding='utf-8') as handle:
                handle.write('{"repo": "o/r", "message": "m", "files": []}\n')
            code, stderr = self.run_cli('encode', '--input', broken)
            self.assertEqual(code, 2)
            self.assertIn('Line 1', stderr)
            self.assertEqual(self.run_cli('encode', '--input',
                                          os.path.join(folder, 'missing.jsonl'))[0], 2)
            self.assertEqual(self.run_cli('ingest', '--input', folder,
                                          '--output', os.path.join(folder, 'out.jsonl'))[0], 2)

    def test_service_errors(self):
        """
        Test that a missing API token exits with status 3
        """
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(self.run_cli('fetch-repos', '--output', '-')[0], 3)

    def test_version(self):
        """
        Test that --version exits cleanly
        """
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            self.assertEqual(self.run_cli('--version')[0], 0)
        self.assertIn(__version__, stdout.getvalue())


if __name__ == '__main__':
    unittest.main()
