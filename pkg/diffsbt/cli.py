"""
Command-line pipeline: ingest, filter, encode, split, index, explain, eval, fetch-repos
"""


import argparse
import contextlib
import json
import logging
import os
import sys
from json.decoder import JSONDecodeError
from typing import IO, Any, Dict, Iterator, List, Optional, Sequence, Tuple

from tqdm import tqdm

from . import __version__
from .config import RunConfig, load_config
from .corpus import (STAGES, build_examples, filter_records, finetune_view,
                     parse_examples, split_cross_project, split_random,
                     split_summary, tally_decisions, write_examples)
from .errors import DiffSbtError, EmptySide, FormatError, ServiceError
from .ingest import enumerate_commits, fetch_repositories, parse_records
from .metrics import CommandProvider, HashingProvider, evaluate_corpus
from .retrieval_explainer import explain, index_examples, load_index, store_index

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SERVICE = 0, 1, 2, 3


class UsageError(Exception):
    """
    Bad command line
    """


class ArgumentParser(argparse.ArgumentParser):
    """
    argparse parser that raises UsageError instead of exiting with status 2
    """

    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')


@contextlib.contextmanager
def open_input(path: Optional[str]) -> Iterator[IO[str]]:
    """
    Read from a file, or stdin for None or "-"
    """
    if path in (None, '-'):
        yield sys.stdin
        return
    with open(path, encoding='utf-8') as handle:
        yield handle


@contextlib.contextmanager
def open_output(path: Optional[str]) -> Iterator[IO[str]]:
    """
    Write to a file, or stdout for None or "-"
    """
    if path in (None, '-'):
        yield sys.stdout
        sys.stdout.flush()
        return
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        yield handle


def _write_rows(rows: Sequence[Dict[str, Any]], handle: IO[str]) -> None:
    for row in rows:
        handle.write(json.dumps(row, ensure_ascii=False) + '\n')


def _progress(items, desc: str, unit: str):
    return tqdm(items, desc=desc, unit=unit, disable=None, leave=False)


def cmd_ingest(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Records from a git clone or an NDJSON dump, written as NDJSON
    """
    del cfg
    with open_output(args.output) as out:
        if args.input not in (None, '-') and os.path.isdir(args.input):
            records = enumerate_commits(args.input, repo=args.repo)
            for record in _progress(records, 'ingest', 'commit'):
                out.write(json.dumps(record.as_dict(), ensure_ascii=False) + '\n')
            return EXIT_OK
        with open_input(args.input) as handle:
            for record in parse_records(handle):
                out.write(json.dumps(record.as_dict(), ensure_ascii=False) + '\n')
    return EXIT_OK


def cmd_filter(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Keep the records passing every noise filter
    """
    with open_input(args.input) as handle:
        records = list(parse_records(handle))
    accepted, decisions = filter_records(_progress(records, 'filter', 'commit'),
                                         cfg.filters, cfg.context_radius)
    logger.info('Filter outcomes:\n%s', tally_decisions(decisions).to_string())
    with open_output(args.output) as out:
        _write_rows([r.as_dict() for r in accepted], out)
    if args.decisions:
        with open_output(args.decisions) as out:
            _write_rows([{'id': record_id, 'accepted': d.accepted, 'reason': d.reason}
                         for record_id, d in decisions], out)
    return EXIT_OK


def cmd_encode(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Stage-tagged dataset rows from records
    """
    with open_input(args.input) as handle:
        records = list(parse_records(handle))
    examples, skipped = build_examples(_progress(records, 'encode', 'commit'),
                                       args.stage, cfg.context_radius)
    if skipped:
        logger.warning('Could not encode %s of %s records', skipped, len(records))
    with open_output(args.output) as out:
        write_examples(examples, args.stage, out)
    return EXIT_OK


def cmd_split(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Partition pretrain examples and write both stages' files to a directory
    """
    if not args.output or args.output == '-':
        raise UsageError('split needs --output DIRECTORY')
    with open_input(args.input) as handle:
        examples = parse_examples(handle, 'pretrain')
    splitter = split_cross_project if args.split == 'cross-project' else split_random
    splits = splitter(examples, cfg.split, cfg.seed)
    logger.info('Split sizes:\n%s', split_summary(splits).to_string())

    os.makedirs(args.output, exist_ok=True)
    for name, items in _stage_files(splits):
        stage = name.split('_', 1)[0]
        with open_output(os.path.join(args.output, f'{name}.jsonl')) as out:
            write_examples(items, stage, out)
    return EXIT_OK


def _stage_files(splits: Dict[str, list]) -> List[Tuple[str, list]]:
    finetune = {}
    for name, items in splits.items():
        kept = []
        for example in items:
            try:
                kept.append(finetune_view(example))
            except EmptySide as err:
                logger.warning('Leaving %s out of fine-tuning: %s', example.id, err)
        finetune[name] = kept
    return [
        ('pretrain_train', splits['train']),
        ('pretrain_val', splits['pretrain_val']),
        ('pretrain_test', splits['pretrain_test']),
        ('finetune_train', finetune['train']),
        ('finetune_val', finetune['finetune_val']),
        ('finetune_test', finetune['finetune_test']),
    ]


def cmd_index(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Build and store a retrieval index from training examples
    """
    if not args.output or args.output == '-':
        raise UsageError('index needs --output FILE')
    with open_input(args.input) as handle:
        examples = parse_examples(handle, args.stage)
    store_index(index_examples(examples, cfg.query_field), args.output)
    return EXIT_OK


def cmd_explain(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    One retrieved explanation per query example
    """
    if not args.index:
        raise UsageError('explain needs --index FILE')
    index = load_index(args.index)
    with open_input(args.input) as handle:
        queries = parse_examples(handle, args.stage)
    with open_output(args.output) as out:
        for example in _progress(queries, 'explain', 'query'):
            text = example.diff if index.field == 'diff' else example.input_sequence
            if text is None:
                raise FormatError(f'Query {example.id} has no diff field')
            message, provenance = explain(index, text, cfg.k)
            out.write(json.dumps({'id': example.id, 'candidate': message,
                                  'reference': example.target_message,
                                  'provenance': provenance.as_dict()},
                                 ensure_ascii=False) + '\n')
    return EXIT_OK


def _read_scored_rows(handle: IO[str]) -> List[Tuple[str, str, str]]:
    rows = []
    for line_number, line in enumerate(handle, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except JSONDecodeError as err:
            raise FormatError(f'Invalid JSON: {err.msg}', line_number) from err
        if not isinstance(doc, dict) or not all(
                isinstance(doc.get(k), str) for k in ('id', 'candidate', 'reference')):
            raise FormatError('Row needs string id, candidate and reference',
                              line_number)
        rows.append((doc['id'], doc['candidate'], doc['reference']))
    return rows


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Score explanation rows and write the MetricReport document
    """
    with open_input(args.input) as handle:
        rows = _read_scored_rows(handle)
    provider = CommandProvider(cfg.provider_cmd) if cfg.provider_cmd \
        else HashingProvider()
    report = evaluate_corpus(rows, provider=provider)
    logger.info('%r', report)
    with open_output(args.output) as out:
        out.write(json.dumps(report.as_dict(), indent=2) + '\n')
    return EXIT_OK


def cmd_fetch_repos(args: argparse.Namespace, cfg: RunConfig) -> int:
    """
    Repositories above the star threshold, as NDJSON
    """
    del cfg
    repositories = fetch_repositories(min_stars=args.min_stars)
    with open_output(args.output) as out:
        _write_rows([r.as_dict() for r in repositories], out)
    return EXIT_OK


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--input', help='input file or directory (default: stdin)')
    parser.add_argument('--output', help='output file or directory (default: stdout)')
    parser.add_argument('--config', help='key = value config file')
    parser.add_argument('--seed', type=int, help='random seed (default: 0)')
    parser.add_argument('--verbose', action='store_true', help='debug logging')


def build_parser() -> ArgumentParser:
    """
    The diffsbt argument parser with one subparser per pipeline step
    """
    parser = ArgumentParser(prog='diffsbt',
                            description='Structure-aware bug-fix corpus tooling')
    parser.add_argument('--version', action='version',
                        version=f'diffsbt {__version__}')
    subparsers = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    subparsers.required = True

    ingest = subparsers.add_parser('ingest', help='read commits from a clone or dump')
    _common(ingest)
    ingest.add_argument('--repo', help='repository name stored in the records')
    ingest.set_defaults(handler=cmd_ingest)

    filter_ = subparsers.add_parser('filter', help='apply the bug-fix and noise filters')
    _common(filter_)
    filter_.add_argument('--context-radius', type=int)
    filter_.add_argument('--decisions', help='write per-record decisions here')
    filter_.set_defaults(handler=cmd_filter)

    encode = subparsers.add_parser('encode', help='encode records as diffSBT examples')
    _common(encode)
    encode.add_argument('--stage', choices=STAGES, default='pretrain')
    encode.add_argument('--context-radius', type=int)
    encode.set_defaults(handler=cmd_encode)

    split = subparsers.add_parser('split', help='partition pretrain examples')
    _common(split)
    split.add_argument('--split', choices=('random', 'cross-project'), default='random')
    split.set_defaults(handler=cmd_split)

    index = subparsers.add_parser('index', help='build the retrieval index')
    _common(index)
    index.add_argument('--stage', choices=STAGES, default='finetune')
    index.add_argument('--query-field', choices=('diff', 'diffsbt'))
    index.set_defaults(handler=cmd_index)

    explain_ = subparsers.add_parser('explain', help='retrieve explanations')
    _common(explain_)
    explain_.add_argument('--index', help='index file written by the index command')
    explain_.add_argument('--stage', choices=STAGES, default='finetune')
    explain_.add_argument('--k', type=int)
    explain_.set_defaults(handler=cmd_explain)

    evaluate = subparsers.add_parser('eval', help='score explanations')
    _common(evaluate)
    evaluate.add_argument('--provider-cmd', help='external embedding command')
    evaluate.set_defaults(handler=cmd_eval)

    fetch = subparsers.add_parser('fetch-repos', help='search GitHub for repositories')
    _common(fetch)
    fetch.add_argument('--min-stars', type=int, default=300)
    fetch.set_defaults(handler=cmd_fetch_repos)
    return parser


def _configure(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    try:
        return cfg.with_overrides(
            seed=args.seed,
            context_radius=getattr(args, 'context_radius', None),
            k=getattr(args, 'k', None),
            query_field=getattr(args, 'query_field', None),
            provider_cmd=getattr(args, 'provider_cmd', None))
    except ValueError as err:
        if isinstance(err, DiffSbtError):
            raise
        raise UsageError(str(err)) from err


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand and return its exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help and --version
        return int(err.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s',
                        stream=sys.stderr, force=True)
    try:
        cfg = _configure(args)
        print(f'diffsbt {__version__} config={cfg.config_hash()} seed={cfg.seed}',
              file=sys.stderr)
        return args.handler(args, cfg)
    except UsageError as err:
        print(f'diffsbt: {err}', file=sys.stderr)
        return EXIT_USAGE
    except ServiceError as err:
        print(f'diffsbt: {err}', file=sys.stderr)
        return EXIT_SERVICE
    except (DiffSbtError, SyntaxError, ValueError, OSError) as err:
        print(f'diffsbt: {err}', file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    """
    Console entry point
    """
    sys.exit(run())
