"""
Structure-based traversal (SBT) and diffSBT sequences for bug-fix commits
"""


import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .diffing import CommitRecord, DiffResult, FileChange, LineSet, compute_diff, split_lines
from .errors import AmbiguousChange, EmptySide, FormatError, NoChange
from .syntax import TreeNode, parse_source

logger = logging.getLogger(__name__)

SEPARATOR = '</s>'
OPEN, CLOSE = '(', ')'
DEFAULT_RADIUS = 3

# Kinds kept whole as soon as they touch a selected line
EXPRESSION_KINDS: FrozenSet[str] = frozenset({
    'Expr', 'Call', 'Attribute', 'Subscript', 'BinOp', 'BoolOp', 'Compare',
})

_NAMED_ESCAPES = {'\t': '\\t', '\n': '\\n', '\r': '\\r'}
_NAMED_UNESCAPES = {'t': '\t', 'n': '\n', 'r': '\r'}


def escape_label(label: str) -> str:
    """
    Make a label whitespace-free so tokens survive space-joining
    """
    out_l = []
    for char in label:
        if char == '\\':
            out_l.append('\\\\')
        elif char == ' ':
            out_l.append('\\s')
        elif char in _NAMED_ESCAPES:
            out_l.append(_NAMED_ESCAPES[char])
        elif char.isspace():
            out_l.append(f'\\u{ord(char):04x}')
        else:
            out_l.append(char)
    return ''.join(out_l)


def unescape_label(text: str) -> str:
    """
    Inverse of escape_label
    """
    out_l = []
    position = 0
    while position < len(text):
        char = text[position]
        if char != '\\':
            out_l.append(char)
            position += 1
            continue
        code = text[position + 1:position + 2]
        if code == '\\':
            out_l.append('\\')
            position += 2
        elif code == 's':
            out_l.append(' ')
            position += 2
        elif code in _NAMED_UNESCAPES:
            out_l.append(_NAMED_UNESCAPES[code])
            position += 2
        elif code == 'u' and len(text) >= position + 6:
            out_l.append(chr(int(text[position + 2:position + 6], 16)))
            position += 6
        else:
            raise FormatError(f'Bad escape in token label: {text!r}')
    return ''.join(out_l)


def node_token(node: TreeNode) -> str:
    """
    Token of a node: its kind, or kind:label when it carries a label
    """
    if node.label is None:
        return node.kind
    return f'{node.kind}:{escape_label(node.label)}'


def _sbt_into(node: TreeNode, out_l: List[str]) -> None:
    token = node_token(node)
    out_l.append(OPEN)
    out_l.append(token)
    for child in node.children:
        _sbt_into(child, out_l)
    out_l.append(CLOSE)
    out_l.append(token)


def sbt(node: TreeNode) -> List[str]:
    """
    Structure-based traversal: ( token children... ) token, four tokens per node
    """
    out_l: List[str] = []
    _sbt_into(node, out_l)
    return out_l


def sbt_forest(nodes: Iterable[TreeNode]) -> List[str]:
    """
    Concatenated SBT of several nodes, in the given order
    """
    out_l: List[str] = []
    for node in nodes:
        _sbt_into(node, out_l)
    return out_l


def _split_token(token: str) -> Tuple[str, Optional[str]]:
    kind, colon, label = token.partition(':')
    return kind, unescape_label(label) if colon else None


def parse_sbt(tokens: Sequence[str]) -> List[tuple]:
    """
    Rebuild the forest encoded by an SBT token sequence as node shapes
    (kind, label, (children...)), the same form TreeNode.shape() returns
    """
    forest: List[tuple] = []
    stack: List[Tuple[str, List[tuple]]] = []
    position = 0
    while position < len(tokens):
        bracket = tokens[position]
        if position + 1 >= len(tokens):
            raise FormatError(f'Dangling {bracket!r} at token {position}')
        token = tokens[position + 1]
        if bracket == OPEN:
            stack.append((token, []))
        elif bracket == CLOSE:
            if not stack or stack[-1][0] != token:
                raise FormatError(
                    f'Unexpected close of {token!r} at token {position}')
            opened, children = stack.pop()
            kind, label = _split_token(opened)
            shape = (kind, label, tuple(children))
            (stack[-1][1] if stack else forest).append(shape)
        else:
            raise FormatError(
                f'Expected a bracket at token {position}, got {bracket!r}')
        position += 2
    if stack:
        raise FormatError(f'Unclosed node {stack[-1][0]!r}')
    return forest


def expand_context(changed: Iterable[int],
                   radius: int,
                   file_length: int) -> LineSet:
    """
    Changed lines plus `radius` lines above and below, clamped to the file
    """
    if radius < 0:
        raise ValueError(f'Context radius must be non-negative, got {radius}')
    if file_length < 0:
        raise ValueError(f'File length must be non-negative, got {file_length}')
    expanded = set()
    for line in changed:
        low = max(1, line - radius)
        high = min(file_length, line + radius)
        expanded.update(range(low, high + 1))
    return LineSet.of(expanded)


def _intersect_all(nodes: Iterable[TreeNode],
                   lines: LineSet,
                   expression_kinds: FrozenSet[str]) -> List[TreeNode]:
    out_l: List[TreeNode] = []
    for node in nodes:
        start, end = node.start_line, node.end_line
        touches = lines.intersects(start, end)
        if lines.covers(start, end) or (touches and node.kind in expression_kinds):
            out_l.append(node)
        elif start in lines:
            # Keep the node, prune the children outside the lines
            pruned = _intersect_all(node.children, lines, expression_kinds)
            out_l.append(TreeNode(node.kind, node.label, start, end,
                                  tuple(pruned)))
        elif touches:
            # Starts before the lines: only the overlapping children survive
            out_l.extend(_intersect_all(node.children, lines, expression_kinds))
    # Spliced descendants can start after a later sibling; the sort is stable
    out_l.sort(key=lambda n: n.start_line)
    return out_l


def intersections(root: TreeNode,
                  lines: LineSet,
                  expression_kinds: FrozenSet[str] = EXPRESSION_KINDS) -> List[TreeNode]:
    """
    Nodes of `root` that intersect `lines`, in source order
    """
    return _intersect_all((root,), lines, expression_kinds)


def _balanced(tokens: Sequence[str]) -> bool:
    depth = 0
    for token in tokens[::2]:
        depth += 1 if token == OPEN else -1
        if depth < 0:
            return False
    return depth == 0


@dataclass(frozen=True)
class DiffSbtSequence():
    """
    Token sequence of the buggy side, optionally followed by the separator
    and the fixed side
    """
    tokens: Tuple[str, ...]
    separator_index: Optional[int] = None

    def __post_init__(self):
        separators = [i for i, t in enumerate(self.tokens) if t == SEPARATOR]
        if len(separators) > 1:
            raise ValueError('The separator token appears more than once')
        expected = separators[0] if separators else None
        if expected != self.separator_index:
            raise ValueError(
                f'separator_index {self.separator_index} does not match the tokens')
        for side in (self.buggy_tokens, self.fixed_tokens):
            if not _balanced(side):
                raise ValueError('Parentheses are unbalanced')

    @property
    def buggy_tokens(self) -> Tuple[str, ...]:
        """
        Tokens before the separator (all tokens when there is none)
        """
        if self.separator_index is None:
            return self.tokens
        return self.tokens[:self.separator_index]

    @property
    def fixed_tokens(self) -> Tuple[str, ...]:
        """
        Tokens after the separator
        """
        if self.separator_index is None:
            return ()
        return self.tokens[self.separator_index + 1:]

    @classmethod
    def from_sides(cls,
                   buggy: Sequence[str],
                   fixed: Optional[Sequence[str]] = None) -> 'DiffSbtSequence':
        """
        Join a buggy side and an optional fixed side around the separator
        """
        if fixed is None:
            return cls(tuple(buggy))
        return cls(tuple(buggy) + (SEPARATOR,) + tuple(fixed), len(buggy))

    @classmethod
    def from_string(cls, text: str) -> 'DiffSbtSequence':
        """
        Parse the single-space-joined form
        """
        tokens = tuple(text.split(' ')) if text else ()
        index = tokens.index(SEPARATOR) if SEPARATOR in tokens else None
        try:
            return cls(tokens, index)
        except ValueError as err:
            raise FormatError(str(err)) from err

    def __str__(self):
        return ' '.join(self.tokens)

    def __len__(self):
        return len(self.tokens)


def changed_file(record: CommitRecord) -> Tuple[FileChange, DiffResult]:
    """
    The one file of the commit whose contents changed, with its diff
    """
    changed = []
    for file_change in record.files:
        diff = compute_diff(file_change.old_source, file_change.new_source)
        if not diff.is_empty:
            changed.append((file_change, diff))
    if not changed:
        raise NoChange(f'Commit {record.id} changes no lines')
    if len(changed) > 1:
        paths = ', '.join(f.path for f, _ in changed)
        raise AmbiguousChange(f'Commit {record.id} changes several files: {paths}')
    return changed[0]


def _side_tokens(source: str,
                 changed: LineSet,
                 radius: int,
                 expression_kinds: FrozenSet[str]) -> List[str]:
    root = parse_source(source)
    lines = expand_context(changed, radius, len(split_lines(source)))
    return sbt_forest(intersections(root, lines, expression_kinds))


def encode_sides(record: CommitRecord,
                 radius: int = DEFAULT_RADIUS,
                 expression_kinds: FrozenSet[str] = EXPRESSION_KINDS) -> Tuple[List[str], List[str]]:
    """
    Buggy-side and fixed-side SBT tokens of a single-file commit
    """
    file_change, diff = changed_file(record)
    buggy = _side_tokens(file_change.old_source, diff.removed, radius,
                         expression_kinds)
    fixed = _side_tokens(file_change.new_source, diff.added, radius,
                         expression_kinds)
    return buggy, fixed


def diffsbt_full(record: CommitRecord,
                 radius: int = DEFAULT_RADIUS,
                 expression_kinds: FrozenSet[str] = EXPRESSION_KINDS) -> DiffSbtSequence:
    """
    Buggy-side SBT, the separator, then fixed-side SBT (pre-training input)
    """
    buggy, fixed = encode_sides(record, radius, expression_kinds)
    return DiffSbtSequence.from_sides(buggy, fixed)


def diffsbt_buggy(record: CommitRecord,
                  radius: int = DEFAULT_RADIUS,
                  expression_kinds: FrozenSet[str] = EXPRESSION_KINDS) -> DiffSbtSequence:
    """
    Buggy-side SBT only (fine-tuning input)
    """
    buggy, _ = encode_sides(record, radius, expression_kinds)
    if not buggy:
        raise EmptySide(f'Commit {record.id} has no buggy code to encode')
    return DiffSbtSequence.from_sides(buggy)


def diffsbt_for_lines(source: str,
                      lines: Iterable[int],
                      radius: int = DEFAULT_RADIUS,
                      expression_kinds: FrozenSet[str] = EXPRESSION_KINDS) -> DiffSbtSequence:
    """
    Encode buggy code around the given lines, as done when asking for an
    explanation of code that has no fix yet
    """
    length = len(split_lines(source))
    outside = [line for line in lines if line < 1 or line > length]
    if outside:
        raise ValueError(f'Lines {outside} are outside the {length}-line source')
    buggy = _side_tokens(source, LineSet.of(lines), radius, expression_kinds)
    if not buggy:
        raise EmptySide('The given lines select no code')
    return DiffSbtSequence.from_sides(buggy)
