"""
Line-level differences between buggy and fixed file versions
"""


import io
import logging
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from unidiff import PatchSet
from unidiff.errors import UnidiffParseError

from .errors import FormatError

logger = logging.getLogger(__name__)

HUNK_HEADER = re.compile(r'^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@')


@dataclass(frozen=True)
class LineSet():
    """
    Sorted set of 1-based line numbers on one side of a diff
    """
    lines: Tuple[int, ...] = ()

    def __post_init__(self):
        normalized = tuple(sorted(set(self.lines)))
        if normalized and normalized[0] < 1:
            raise ValueError(f'Line numbers start at 1, got {normalized[0]}')
        object.__setattr__(self, 'lines', normalized)

    @classmethod
    def of(cls, lines: Iterable[int]) -> 'LineSet':
        """
        Build a LineSet from any iterable of line numbers
        """
        return cls(tuple(lines))

    def __contains__(self, line: object) -> bool:
        if not isinstance(line, int):
            return False
        index = bisect_left(self.lines, line)
        return index < len(self.lines) and self.lines[index] == line

    def __iter__(self) -> Iterator[int]:
        return iter(self.lines)

    def __len__(self) -> int:
        return len(self.lines)

    def count_between(self, start: int, end: int) -> int:
        """
        Number of members in the closed range [start, end]
        """
        return bisect_right(self.lines, end) - bisect_left(self.lines, start)

    def covers(self, start: int, end: int) -> bool:
        """
        True when every line of [start, end] is a member
        """
        return self.count_between(start, end) == end - start + 1

    def intersects(self, start: int, end: int) -> bool:
        """
        True when some line of [start, end] is a member
        """
        return self.count_between(start, end) > 0

    def union(self, other: Iterable[int]) -> 'LineSet':
        """
        Members of either set
        """
        return LineSet(self.lines + tuple(other))

    def __repr__(self):
        return f'LineSet({list(self.lines)})'


@dataclass(frozen=True)
class Hunk():
    """
    One contiguous change region. A zero count names the line before the change.
    """
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    removed_text: Tuple[str, ...] = ()
    added_text: Tuple[str, ...] = ()

    @property
    def header(self) -> str:
        """
        Unified-diff hunk header
        """
        return f'@@ -{self.old_start},{self.old_count} +{self.new_start},{self.new_count} @@'


@dataclass(frozen=True)
class DiffResult():
    """
    Changed lines of both file versions and the number of hunks
    """
    removed: LineSet = LineSet()
    added: LineSet = LineSet()
    hunk_count: int = 0
    hunks: Tuple[Hunk, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.hunk_count < 0:
            raise ValueError('hunk_count must be non-negative')
        if (self.hunk_count == 0) != (not self.removed and not self.added):
            raise ValueError(
                'A diff has hunks exactly when it has changed lines')

    @property
    def is_empty(self) -> bool:
        """
        True when the two versions have identical lines
        """
        return self.hunk_count == 0


@dataclass(frozen=True)
class FileChange():
    """
    Full contents of one file before and after a commit
    """
    path: str
    old_source: str
    new_source: str

    def as_dict(self) -> Dict[str, str]:
        """
        Returns a dictionary representation of the change
        """
        return {'path': self.path,
                'old_source': self.old_source,
                'new_source': self.new_source}


@dataclass(frozen=True)
class CommitRecord():
    """
    One commit: message plus old/new contents of every changed file
    """
    repo: str
    sha: str
    message: str
    files: Tuple[FileChange, ...] = ()

    def __post_init__(self):
        if not self.sha:
            raise ValueError('Commit sha must be non-empty')

    @property
    def id(self) -> str:  # pylint: disable=invalid-name
        """
        Stable key used by datasets: "repo@sha"
        """
        return f'{self.repo}@{self.sha}'

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns the NDJSON row representation of the record
        """
        return {
            'repo': self.repo,
            'sha': self.sha,
            'message': self.message,
            'files': [f.as_dict() for f in self.files],
        }

    @classmethod
    def from_dict(cls, row: Dict[str, Any]) -> 'CommitRecord':
        """
        Build a record from an NDJSON row, raising ValueError on bad shape
        """
        if not isinstance(row, dict):
            raise ValueError('Row must be a JSON object')
        for key in ('repo', 'sha', 'message', 'files'):
            if key not in row:
                raise ValueError(f"Row is missing required field '{key}'")
        for key in ('repo', 'sha', 'message'):
            if not isinstance(row[key], str):
                raise ValueError(f"Field '{key}' must be a string")
        if not isinstance(row['files'], list):
            raise ValueError("Field 'files' must be a list")
        files = []
        for position, entry in enumerate(row['files']):
            if not isinstance(entry, dict) or \
                    not all(isinstance(entry.get(k), str)
                            for k in ('path', 'old_source', 'new_source')):
                # pylint: disable=line-too-long
                raise ValueError(
                    f'files[{position}] needs string path, old_source and new_source')
            files.append(FileChange(entry['path'], entry['old_source'],
                                    entry['new_source']))
        return cls(row['repo'], row['sha'], row['message'], tuple(files))

    def __repr__(self):
        return f'Commit {self.id} ({len(self.files)} files)'


def split_lines(text: str) -> List[str]:
    """
    Split on newlines; a final newline does not add an empty line
    """
    if not text:
        return []
    lines = text.split('\n')
    if lines[-1] == '':
        lines.pop()
    return lines


def _edit_script(old: Sequence[str], new: Sequence[str]) -> List[Tuple[str, int, int]]:
    """
    Minimal edit script as ('=', i, j), ('-', i, j) and ('+', i, j) steps,
    where i and j are the 0-based positions reached in old and new.
    Among the longest common subsequences, the one matching the earliest
    old lines wins.
    """
    prefix = 0
    while prefix < len(old) and prefix < len(new) and old[prefix] == new[prefix]:
        prefix += 1

    middle_old = old[prefix:]
    middle_new = new[prefix:]
    rows, cols = len(middle_old), len(middle_new)

    # lcs[i][j] = LCS length of middle_old[i:] and middle_new[j:]
    lcs = [[0] * (cols + 1) for _ in range(rows + 1)]
    for i in range(rows - 1, -1, -1):
        row, below = lcs[i], lcs[i + 1]
        item = middle_old[i]
        for j in range(cols - 1, -1, -1):
            if item == middle_new[j]:
                row[j] = below[j + 1] + 1
            else:
                row[j] = below[j] if below[j] >= row[j + 1] else row[j + 1]

    script = [('=', k, k) for k in range(prefix)]
    i = j = 0
    while i < rows:
        # First new line this old line can match without shortening the LCS
        item, target = middle_old[i], lcs[i][j]
        match = next((k for k in range(j, cols)
                      if middle_new[k] == item and lcs[i + 1][k + 1] + 1 == target),
                     None)
        if match is None:
            script.append(('-', prefix + i, prefix + j))
            i += 1
            continue
        script.extend(('+', prefix + i, prefix + k) for k in range(j, match))
        script.append(('=', prefix + i, prefix + match))
        i, j = i + 1, match + 1
    script.extend(('+', prefix + rows, prefix + k) for k in range(j, cols))
    return script


def compute_diff(old_source: str, new_source: str) -> DiffResult:
    """
    Minimal line diff (longest common subsequence) between two file versions
    """
    old, new = split_lines(old_source), split_lines(new_source)
    hunks: List[Hunk] = []
    current: Optional[Dict[str, Any]] = None
    for step, i, j in _edit_script(old, new):
        if step == '=':
            if current is not None:
                hunks.append(_close_hunk(current))
                current = None
            continue
        if current is None:
            current = {'old_at': i, 'new_at': j, 'removed': [], 'added': []}
        if step == '-':
            current['removed'].append((i + 1, old[i]))
        else:
            current['added'].append((j + 1, new[j]))
    if current is not None:
        hunks.append(_close_hunk(current))

    removed = LineSet.of(n for h in hunks for n in
                         range(h.old_start, h.old_start + h.old_count))
    added = LineSet.of(n for h in hunks for n in
                       range(h.new_start, h.new_start + h.new_count))
    return DiffResult(removed, added, len(hunks), tuple(hunks))


def _close_hunk(current: Dict[str, Any]) -> Hunk:
    removed, added = current['removed'], current['added']
    old_start = removed[0][0] if removed else current['old_at']
    new_start = added[0][0] if added else current['new_at']
    return Hunk(old_start, len(removed), new_start, len(added),
                tuple(text for _, text in removed),
                tuple(text for _, text in added))


def edit_size(diff: DiffResult) -> int:
    """
    Number of removed plus added lines
    """
    return len(diff.removed) + len(diff.added)


def render_unified_diff(diff: DiffResult, path: str = 'file') -> str:
    """
    Render a computed diff as zero-context unified-diff text
    """
    if diff.is_empty:
        return ''
    out_l = [f'--- a/{path}', f'+++ b/{path}']
    for hunk in diff.hunks:
        out_l.append(hunk.header)
        out_l.extend('-' + text for text in hunk.removed_text)
        out_l.extend('+' + text for text in hunk.added_text)
    return '\n'.join(out_l) + '\n'


def buggy_diff(diff_text: str) -> str:
    """
    Drop the added lines of a unified diff, keeping headers and removed lines
    """
    out_l = []
    old_left = new_left = 0
    for line in split_lines(diff_text):
        if old_left or new_left:
            # Hunk body, bounded by the header counts
            if line.startswith('+'):
                new_left -= 1
                continue
            if line.startswith('-'):
                old_left -= 1
            elif not line.startswith('\\'):
                old_left, new_left = old_left - 1, new_left - 1
        else:
            header = HUNK_HEADER.match(line)
            if header:
                old_left = int(header.group(2) or 1)
                new_left = int(header.group(4) or 1)
        out_l.append(line)
    return '\n'.join(out_l) + '\n' if out_l else ''


def apply_diff(old_source: str, diff: DiffResult) -> str:
    """
    Apply the zero-context hunks of a computed diff to the old version
    """
    old = split_lines(old_source)
    out_l: List[str] = []
    position = 0
    for hunk in diff.hunks:
        if len(hunk.removed_text) != hunk.old_count or \
                len(hunk.added_text) != hunk.new_count:
            raise ValueError('apply_diff needs the zero-context hunks of compute_diff')
        change_at = hunk.old_start - 1 if hunk.old_count else hunk.old_start
        out_l.extend(old[position:change_at])
        out_l.extend(hunk.added_text)
        position = change_at + hunk.old_count
    out_l.extend(old[position:])
    return '\n'.join(out_l) + '\n' if out_l else ''


def parse_unified_diff(text: str) -> DiffResult:
    """
    Reconstruct changed lines and hunk count from single-file unified-diff text
    """
    for number, line in enumerate(split_lines(text), start=1):
        if line.startswith('@@') and not HUNK_HEADER.match(line):
            raise FormatError(f'Malformed hunk header: {line!r}', number)
    try:
        patch = PatchSet(io.StringIO(text))
    except UnidiffParseError as err:
        raise FormatError(f'Invalid unified diff: {err}') from err
    if len(patch) > 1:
        raise FormatError(f'Expected a diff of one file, found {len(patch)}')
    if not patch:
        return DiffResult()

    removed: List[int] = []
    added: List[int] = []
    hunks: List[Hunk] = []
    for hunk in patch[0]:
        minus = [line for line in hunk if line.is_removed]
        plus = [line for line in hunk if line.is_added]
        context = sum(1 for line in hunk if line.is_context)
        if len(minus) + context != hunk.source_length or \
                len(plus) + context != hunk.target_length:
            # pylint: disable=line-too-long
            raise FormatError(
                f'Hunk {hunk.source_start},{hunk.source_length} does not match its header counts')
        removed.extend(line.source_line_no for line in minus)
        added.extend(line.target_line_no for line in plus)
        hunks.append(Hunk(hunk.source_start, hunk.source_length,
                          hunk.target_start, hunk.target_length,
                          tuple(line.value.rstrip('\n') for line in minus),
                          tuple(line.value.rstrip('\n') for line in plus)))
    try:
        return DiffResult(LineSet.of(removed), LineSet.of(added), len(hunks),
                          tuple(hunks))
    except ValueError as err:
        raise FormatError(f'Inconsistent diff: {err}') from err
