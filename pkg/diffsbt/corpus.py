"""
Bug-fix identification, noise filters, dataset splits and stage-tagged emission
"""


import dataclasses
import json
import logging
import math
import os
import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from json.decoder import JSONDecodeError
from typing import (IO, Any, Dict, Iterable, List, Optional, Pattern, Sequence,
                    Tuple)

import pandas as pd

from .config import PARTITIONS, FilterConfig, SplitConfig
from .diffing import CommitRecord, buggy_diff, compute_diff, render_unified_diff
from .errors import (AmbiguousChange, DiffSbtError, EmptyInput, EmptySide,
                     FormatError, InfeasibleSplit, IoError, NoChange)
from .sbt_encoder import SEPARATOR, DEFAULT_RADIUS, DiffSbtSequence, encode_sides

logger = logging.getLogger(__name__)

STAGES = ('pretrain', 'finetune')
BUGFIX_KEYWORDS = ('fix', 'solve')
DEFAULT_TEMPLATE_PATH = os.path.join(os.path.dirname(__file__), 'data',
                                     'templates.txt')

REASONS = (
    'MachineGenerated', 'NotBugfix', 'NoPythonFile', 'OnlyTestFiles',
    'MsgTooShort', 'MsgTooLong', 'DiffTooLong', 'NoChange', 'MultiHunk',
    'MultiFile', 'ParseFailure', 'EmptyBuggySide',
)


@dataclass(frozen=True)
class DatasetExample():
    """
    One (input sequence, target message) training pair of a given stage
    """
    id: str  # pylint: disable=invalid-name
    repo: str
    sha: str
    input_sequence: str
    target_message: str
    stage: str
    diff: Optional[str] = None

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f'Unknown stage {self.stage!r}; expected one of {STAGES}')
        separators = self.input_sequence.split(' ').count(SEPARATOR)
        expected = 1 if self.stage == 'pretrain' else 0
        if separators != expected:
            # pylint: disable=line-too-long
            raise ValueError(
                f'A {self.stage} input must contain {expected} separator tokens, found {separators}')
        if not self.target_message.strip():
            raise ValueError(f'Example {self.id} has an empty target message')

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns the JSONL row representation of the example
        """
        out_d = {'id': self.id, 'repo': self.repo, 'sha': self.sha,
                 'input': self.input_sequence, 'target': self.target_message}
        if self.diff is not None:
            out_d['diff'] = self.diff
        return out_d

    @classmethod
    def from_dict(cls, row: Dict[str, Any], stage: str) -> 'DatasetExample':
        """
        Build an example from a JSONL row, raising ValueError on bad shape
        """
        if not isinstance(row, dict):
            raise ValueError('Row must be a JSON object')
        for key in ('id', 'repo', 'sha', 'input', 'target'):
            if not isinstance(row.get(key), str):
                raise ValueError(f"Row needs a string field '{key}'")
        diff = row.get('diff')
        if diff is not None and not isinstance(diff, str):
            raise ValueError("Field 'diff' must be a string")
        return cls(row['id'], row['repo'], row['sha'], row['input'],
                   row['target'], stage, diff)


@dataclass(frozen=True)
class FilterDecision():
    """
    Outcome of the noise filters for one commit
    """
    accepted: bool
    reason: Optional[str] = None

    def __post_init__(self):
        if self.accepted != (self.reason is None):
            raise ValueError('A decision has a reason exactly when it rejects')
        if self.reason is not None and self.reason not in REASONS:
            raise ValueError(f'Unknown rejection reason {self.reason!r}')

    @classmethod
    def accept(cls) -> 'FilterDecision':
        """
        The accepting decision
        """
        return cls(True)

    @classmethod
    def reject(cls, reason: str) -> 'FilterDecision':
        """
        A rejecting decision for `reason`
        """
        return cls(False, reason)

    def __repr__(self):
        return 'Accepted' if self.accepted else f'Rejected ({self.reason})'


def is_bugfix(message: str) -> bool:
    """
    Case-insensitive substring match on the bug-fix keywords
    """
    lowered = message.lower()
    return any(keyword in lowered for keyword in BUGFIX_KEYWORDS)


def load_templates(path: Optional[str] = None) -> List[Pattern]:
    """
    Compile a machine-template list: one regular expression per line, `#`
    comments and blank lines ignored, matched case-insensitively
    """
    path = path or DEFAULT_TEMPLATE_PATH
    try:
        with open(path, encoding='utf-8') as handle:
            lines = handle.read().splitlines()
    except OSError as err:
        raise IoError(f'Cannot read template list {path}: {err.strerror}') from err
    patterns = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        try:
            patterns.append(re.compile(line.strip(), re.IGNORECASE))
        except re.error as err:
            raise FormatError(f'Invalid template pattern: {err}', line_number) from err
    return patterns


_DEFAULT_PATTERNS: List[Pattern] = []


def default_templates() -> List[Pattern]:
    """
    The shipped template list, compiled once
    """
    if not _DEFAULT_PATTERNS:
        _DEFAULT_PATTERNS.extend(load_templates())
    return _DEFAULT_PATTERNS


def strip_generated(message: str, patterns: Optional[Sequence[Pattern]] = None) -> str:
    """
    Remove machine-generated lines; "" means nothing human-written is left
    """
    patterns = default_templates() if patterns is None else patterns
    kept = [line for line in message.splitlines()
            if not any(p.search(line.strip()) for p in patterns)]
    return '\n'.join(kept).strip()


def word_tokens(text: str) -> int:
    """
    Number of whitespace-delimited tokens
    """
    return len(text.split())


def is_test_path(path: str) -> bool:
    """
    Test scripts live under a test/tests directory or are named test_*.py / *_test.py
    """
    *directories, basename = path.replace('\\', '/').split('/')
    if any(d in ('test', 'tests') for d in directories):
        return True
    return basename.endswith('.py') and \
        (basename.startswith('test_') or basename.endswith('_test.py'))


def render_commit_diff(record: CommitRecord) -> str:
    """
    Concatenated zero-context unified diffs of every changed file
    """
    return ''.join(render_unified_diff(compute_diff(f.old_source, f.new_source), f.path)
                   for f in record.files)


def passes_filters(record: CommitRecord,
                   cfg: Optional[FilterConfig] = None,
                   patterns: Optional[Sequence[Pattern]] = None,
                   radius: int = DEFAULT_RADIUS) -> FilterDecision:
    """
    Apply the noise filters in order; the first failing rule is the reason
    """
    # pylint: disable=too-many-return-statements
    cfg = cfg or FilterConfig()
    message = strip_generated(record.message, patterns)
    # Keywords count only in the human-written part of the message
    if not message:
        return FilterDecision.reject('MachineGenerated')
    if not is_bugfix(message):
        return FilterDecision.reject('NotBugfix')

    python_files = [f for f in record.files if f.path.endswith('.py')]
    if not python_files:
        return FilterDecision.reject('NoPythonFile')
    if all(is_test_path(f.path) for f in python_files):
        return FilterDecision.reject('OnlyTestFiles')

    length = word_tokens(message)
    if length < cfg.min_message_tokens:
        return FilterDecision.reject('MsgTooShort')
    if length > cfg.max_message_tokens:
        return FilterDecision.reject('MsgTooLong')

    diffs = [compute_diff(f.old_source, f.new_source) for f in record.files]
    rendered = ''.join(render_unified_diff(d, f.path)
                       for d, f in zip(diffs, record.files))
    if word_tokens(rendered) > cfg.max_diff_tokens:
        return FilterDecision.reject('DiffTooLong')
    hunks = sum(d.hunk_count for d in diffs)
    if hunks == 0:
        return FilterDecision.reject('NoChange')
    if hunks > cfg.max_hunks:
        return FilterDecision.reject('MultiHunk')

    try:
        buggy, _ = encode_sides(record, radius)
    except NoChange:
        return FilterDecision.reject('NoChange')
    except AmbiguousChange:
        return FilterDecision.reject('MultiFile')
    except (SyntaxError, DiffSbtError):
        return FilterDecision.reject('ParseFailure')
    if not buggy:
        return FilterDecision.reject('EmptyBuggySide')
    return FilterDecision.accept()


def filter_records(records: Iterable[CommitRecord],
                   cfg: Optional[FilterConfig] = None,
                   radius: int = DEFAULT_RADIUS) -> Tuple[List[CommitRecord], List[Tuple[str, FilterDecision]]]:
    """
    Accepted records (message template-stripped, input order kept) and the
    decision for every record
    """
    cfg = cfg or FilterConfig()
    patterns = load_templates(cfg.template_path) if cfg.template_path \
        else default_templates()
    accepted: List[CommitRecord] = []
    decisions: List[Tuple[str, FilterDecision]] = []
    for record in records:
        decision = passes_filters(record, cfg, patterns, radius)
        decisions.append((record.id, decision))
        if decision.accepted:
            accepted.append(dataclasses.replace(
                record, message=strip_generated(record.message, patterns)))
    logger.info('Accepted %s of %s commits', f'{len(accepted):,}',
                f'{len(decisions):,}')
    return accepted, decisions


def tally_decisions(decisions: Iterable[Tuple[str, FilterDecision]]) -> pd.Series:
    """
    Count of records per outcome ("Accepted" or the rejection reason)
    """
    counts = Counter(d.reason or 'Accepted' for _, d in decisions)
    order = ['Accepted', *REASONS]
    return pd.Series({key: counts.get(key, 0) for key in order}, name='commits')


def build_example(record: CommitRecord,
                  stage: str,
                  radius: int = DEFAULT_RADIUS) -> DatasetExample:
    """
    Encode one record for a stage
    """
    if stage not in STAGES:
        raise ValueError(f'Unknown stage {stage!r}; expected one of {STAGES}')
    buggy, fixed = encode_sides(record, radius)
    diff = render_commit_diff(record)
    if stage == 'pretrain':
        sequence = DiffSbtSequence.from_sides(buggy, fixed)
    else:
        if not buggy:
            raise EmptySide(f'Commit {record.id} has no buggy code to encode')
        sequence = DiffSbtSequence.from_sides(buggy)
        diff = buggy_diff(diff)
    return DatasetExample(record.id, record.repo, record.sha, str(sequence),
                          record.message.strip(), stage, diff)


def build_examples(records: Iterable[CommitRecord],
                   stage: str,
                   radius: int = DEFAULT_RADIUS) -> Tuple[List[DatasetExample], int]:
    """
    Encode records in order; records that cannot be encoded are skipped and counted
    """
    out_l: List[DatasetExample] = []
    skipped = 0
    for record in records:
        try:
            out_l.append(build_example(record, stage, radius))
        except (SyntaxError, ValueError) as err:
            logger.warning('Skipping %s: %s', record.id, err)
            skipped += 1
    return out_l, skipped


def finetune_view(example: DatasetExample) -> DatasetExample:
    """
    The fine-tuning form of a pre-training example: the buggy side only
    """
    if example.stage != 'pretrain':
        raise ValueError(f'Example {example.id} is not a pretrain example')
    sequence = DiffSbtSequence.from_string(example.input_sequence)
    if not sequence.buggy_tokens:
        raise EmptySide(f'Example {example.id} has no buggy code to encode')
    prefix = DiffSbtSequence.from_sides(sequence.buggy_tokens)
    diff = buggy_diff(example.diff) if example.diff is not None else None
    return dataclasses.replace(example, input_sequence=str(prefix),
                               stage='finetune', diff=diff)


def exclude_repositories(examples: Iterable[DatasetExample],
                         repos: Iterable[str]) -> List[DatasetExample]:
    """
    Drop examples coming from any of `repos`
    """
    excluded = set(repos)
    return [e for e in examples if e.repo not in excluded]


def partition_sizes(count: int, fractions: SplitConfig) -> Dict[str, int]:
    """
    Largest-remainder rounding of count × fraction; ties go to the earlier partition
    """
    quotas = [(name, count * value) for name, value in fractions.fractions()]
    # Absorb floating-point error so exact quotas are not floored one short
    sizes = {name: math.floor(quota + 1e-9) for name, quota in quotas}
    left = count - sum(sizes.values())
    ranked = sorted(range(len(quotas)),
                    key=lambda i: (-(quotas[i][1] - sizes[quotas[i][0]]), i))
    for position in ranked[:max(0, left)]:
        sizes[quotas[position][0]] += 1
    return sizes


def split_random(examples: Sequence[DatasetExample],
                 fractions: Optional[SplitConfig] = None,
                 seed: int = 0) -> Dict[str, List[DatasetExample]]:
    """
    Seeded shuffle cut into partitions; each partition keeps input order
    """
    if not examples:
        raise EmptyInput('Cannot split an empty example list')
    fractions = fractions or SplitConfig()
    order = list(range(len(examples)))
    random.Random(seed).shuffle(order)
    out_d: Dict[str, List[DatasetExample]] = {}
    position = 0
    for name, size in partition_sizes(len(examples), fractions).items():
        chosen = sorted(order[position:position + size])
        out_d[name] = [examples[i] for i in chosen]
        position += size
    return out_d


def split_cross_project(examples: Sequence[DatasetExample],
                        fractions: Optional[SplitConfig] = None,
                        seed: int = 0) -> Dict[str, List[DatasetExample]]:
    """
    Assign whole repositories to partitions so no repository spans two

    Repositories are shuffled under `seed`, then placed largest first into the
    partition furthest below its target.
    """
    if not examples:
        raise EmptyInput('Cannot split an empty example list')
    fractions = fractions or SplitConfig()
    by_repo: Dict[str, List[int]] = defaultdict(list)
    for position, example in enumerate(examples):
        by_repo[example.repo].append(position)

    repos = sorted(by_repo)
    random.Random(seed).shuffle(repos)
    repos.sort(key=lambda r: -len(by_repo[r]))  # stable: shuffle breaks ties

    targets = partition_sizes(len(examples), fractions)
    filled = {name: 0 for name in PARTITIONS}
    assigned: Dict[str, List[int]] = {name: [] for name in PARTITIONS}
    slack = fractions.slack * len(examples)
    for repo in repos:
        size = len(by_repo[repo])
        name = max(PARTITIONS, key=lambda p: (targets[p] - filled[p],
                                              -PARTITIONS.index(p)))
        deficit = targets[name] - filled[name]
        if size > deficit + slack:
            # pylint: disable=line-too-long
            raise InfeasibleSplit(
                f'Repository {repo} has {size} examples; the roomiest partition ({name}) has room for {deficit} plus slack {slack:g}')
        filled[name] += size
        assigned[name].extend(by_repo[repo])
    return {name: [examples[i] for i in sorted(assigned[name])]
            for name in PARTITIONS}


def split_summary(splits: Dict[str, List[DatasetExample]]) -> pd.DataFrame:
    """
    Examples and distinct repositories per partition
    """
    rows = [{'partition': name, 'examples': len(items),
             'repositories': len({e.repo for e in items})}
            for name, items in splits.items()]
    return pd.DataFrame(rows).set_index('partition')


def write_examples(examples: Iterable[DatasetExample], stage: str, handle: IO[str]) -> int:
    """
    Write JSONL rows to an open text handle; returns the row count
    """
    count = 0
    for example in examples:
        if example.stage != stage:
            raise ValueError(
                f'Example {example.id} is {example.stage}, not {stage}')
        handle.write(json.dumps(example.as_dict(), ensure_ascii=False) + '\n')
        count += 1
    return count


def emit_dataset(examples: Sequence[DatasetExample], stage: str, out_path: str) -> None:
    """
    Write a stage-tagged JSONL dataset file, in input order
    """
    if stage not in STAGES:
        raise ValueError(f'Unknown stage {stage!r}; expected one of {STAGES}')
    try:
        with open(out_path, 'w', encoding='utf-8', newline='\n') as handle:
            count = write_examples(examples, stage, handle)
    except OSError as err:
        raise IoError(f'Cannot write dataset {out_path}: {err.strerror}') from err
    logger.info('Wrote %s %s examples to %s', f'{count:,}', stage, out_path)


def parse_examples(lines: Iterable[str], stage: str) -> List[DatasetExample]:
    """
    Examples of JSONL lines; blank lines are ignored
    """
    out_l = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except JSONDecodeError as err:
            raise FormatError(f'Invalid JSON: {err.msg}', line_number) from err
        try:
            out_l.append(DatasetExample.from_dict(row, stage))
        except ValueError as err:
            raise FormatError(str(err), line_number) from err
    return out_l


def read_dataset(path: str, stage: str) -> List[DatasetExample]:
    """
    Read a dataset file written by emit_dataset
    """
    try:
        with open(path, encoding='utf-8') as handle:
            return parse_examples(handle, stage)
    except OSError as err:
        raise IoError(f'Cannot read dataset {path}: {err.strerror}') from err
