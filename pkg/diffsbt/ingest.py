"""
CommitRecord streams from local git clones and NDJSON dumps
"""


import json
import logging
import os
from json.decoder import JSONDecodeError
from typing import Iterable, Iterator, List, Optional

import git
from pydriller import Repository

from .diffing import CommitRecord, FileChange, split_lines
from .errors import FormatError, IoError, RepoError
from .network import RepoDescriptor, fetch_repositories

__all__ = ['RepoDescriptor', 'enumerate_commits', 'fetch_repositories',
           'load_dump', 'parse_records', 'record_from_commit']

logger = logging.getLogger(__name__)


def _check_repository(repo_path: str) -> None:
    try:
        git.Repo(repo_path)
    except (git.InvalidGitRepositoryError, git.NoSuchPathError) as err:
        raise RepoError(f'Not a git repository: {repo_path}') from err


def record_from_commit(commit, repo: str) -> Optional[CommitRecord]:
    """
    Convert a pydriller commit; None when no file content actually changed
    """
    files: List[FileChange] = []
    for modified in commit.modified_files:
        path = modified.new_path or modified.old_path
        old_source = modified.source_code_before or ''
        new_source = modified.source_code or ''
        if split_lines(old_source) == split_lines(new_source):
            # Renames, mode changes and binary files
            continue
        files.append(FileChange(path, old_source, new_source))
    if not files:
        return None
    files.sort(key=lambda f: f.path)
    return CommitRecord(repo, commit.hash, commit.msg, tuple(files))


def enumerate_commits(repo_path: str, repo: Optional[str] = None) -> Iterator[CommitRecord]:
    """
    One record per single-parent commit, oldest first

    `repo` names the repository in the records; it defaults to the
    directory name of the clone.
    """
    _check_repository(repo_path)
    name = repo or os.path.basename(os.path.abspath(repo_path))
    emitted = skipped = 0
    commits = Repository(repo_path, only_no_merge=True).traverse_commits()
    while True:
        try:
            commit = next(commits, None)
        except (git.GitError, OSError, ValueError) as err:
            # A failed walk cannot be resumed
            logger.error('Commit walk of %s stopped after %s commits: %s',
                         name, f'{emitted + skipped:,}', err)
            raise RepoError(f'Cannot read the history of {repo_path}: {err}') from err
        if commit is None:
            break
        try:
            if len(commit.parents) != 1:
                continue
            record = record_from_commit(commit, name)
        except Exception as err:  # pylint: disable=broad-except
            logger.warning('Skipping commit %s: %s', commit.hash, err)
            skipped += 1
            continue
        if record is None:
            continue
        emitted += 1
        yield record
    logger.info('Ingested %s commits from %s (%s skipped)',
                f'{emitted:,}', name, skipped)


def parse_records(lines: Iterable[str]) -> Iterator[CommitRecord]:
    """
    Records of NDJSON lines, in order; blank lines are ignored
    """
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except JSONDecodeError as err:
            raise FormatError(f'Invalid JSON: {err.msg}', line_number) from err
        try:
            yield CommitRecord.from_dict(row)
        except ValueError as err:
            raise FormatError(str(err), line_number) from err


def load_dump(path: str) -> Iterator[CommitRecord]:
    """
    Records of an NDJSON dump file
    """
    try:
        handle = open(path, encoding='utf-8')  # pylint: disable=consider-using-with
    except OSError as err:
        raise IoError(f'Cannot read dump {path}: {err.strerror}') from err
    with handle:
        yield from parse_records(handle)
