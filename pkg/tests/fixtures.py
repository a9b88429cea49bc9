"""
Shared sources and record builders for the test suite
"""


import os
import random
from typing import Dict, List, Optional

import git

from diffsbt.diffing import CommitRecord, FileChange
from diffsbt.syntax import TreeNode

# A scraper whose sanitize call is indented into the loop by mistake
LYRICS_BUGGY = '''def scrape_lyrics(soup):
    names = []
    for tag in soup.find_all('a'):
        name_str = tag.get_text()
        names.append(name_str)
        sanitize(name_str)
    return names
'''

LYRICS_FIXED = '''def scrape_lyrics(soup):
    names = []
    for tag in soup.find_all('a'):
        name_str = tag.get_text()
        names.append(name_str)
    sanitize(name_str)
    return names
'''


def make_record(old_source: str,
                new_source: str,
                message: str = 'fix sanitize call placed inside the loop',
                path: str = 'lyrics/scrape.py',
                repo: str = 'demo/lyrics',
                sha: str = 'a1b2c3d') -> CommitRecord:
    """
    Single-file commit record
    """
    return CommitRecord(repo, sha, message, (FileChange(path, old_source, new_source),))


def random_tree(rng: random.Random, max_nodes: int = 50) -> TreeNode:
    """
    Random well-formed tree of at most `max_nodes` nodes, labels drawn from a
    small alphabet that includes characters needing escapes
    """
    budget = [rng.randint(1, max_nodes)]
    kinds = ['A', 'B', 'Call', 'Name', 'Expr']
    labels: List[Optional[str]] = [None, 'x', 'y z', 'tab\there', 'back\\slash', '',
                                   'a:b', "'s'", 'new\nline']

    def grow(start: int, end: int) -> TreeNode:
        budget[0] -= 1
        children = []
        cursor = start
        while budget[0] > 0 and cursor <= end and rng.random() < 0.6:
            child_start = rng.randint(cursor, end)
            child_end = rng.randint(child_start, end)
            children.append(grow(child_start, child_end))
            cursor = child_start
        return TreeNode(rng.choice(kinds), rng.choice(labels), start, end,
                        tuple(children))

    return grow(1, rng.randint(1, 30))


def random_program(rng: random.Random, length: int) -> List[str]:
    """
    Lines of a random straight-line program with a few blocks
    """
    lines: List[str] = []
    while len(lines) < length:
        choice = rng.random()
        name = rng.choice('abcdef')
        if choice < 0.5:
            lines.append(f'{name} = {rng.randint(0, 9)}')
        elif choice < 0.7:
            lines.append(f'print({name})')
        elif choice < 0.85:
            lines.append(f'if {name} > {rng.randint(0, 9)}:')
            lines.append(f'    {name} = {name} + 1')
        else:
            lines.append(f'for {name} in range({rng.randint(1, 5)}):')
            lines.append(f'    total = total + {name}')
    return lines[:length] if not lines[length - 1].endswith(':') \
        else lines[:length - 1] + ['pass']


def init_git_repo(folder: str) -> git.Repo:
    """
    Empty repository with a committer identity configured
    """
    repo = git.Repo.init(folder)
    with repo.config_writer() as writer:
        writer.set_value('user', 'name', 'Test Author')
        writer.set_value('user', 'email', 'author@example.com')
    return repo


def commit_files(repo: git.Repo, message: str, files: Dict[str, Optional[str]]) -> str:
    """
    Write (or with None, delete) files and commit them all; returns the sha
    """
    for path, content in files.items():
        full_path = os.path.join(repo.working_tree_dir, path)
        if content is None:
            os.remove(full_path)
            continue
        os.makedirs(os.path.dirname(full_path), exist_ok=True)
        with open(full_path, 'w', encoding='utf-8') as handle:
            handle.write(content)
    repo.git.add(A=True)
    repo.git.commit(m=message, allow_empty=True)
    return repo.head.commit.hexsha
