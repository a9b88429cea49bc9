"""
Line-annotated syntax trees for a Python subset, and the portable tree document
"""


import ast
import json
import logging
from dataclasses import dataclass
from json.decoder import JSONDecodeError
from typing import Any, Dict, Iterator, List, Optional, Tuple

from .errors import FormatError

logger = logging.getLogger(__name__)

# Statements and expressions the subset parser accepts
STATEMENT_KINDS = frozenset({
    'FunctionDef', 'ClassDef', 'Return', 'Delete', 'Assign', 'AugAssign',
    'For', 'While', 'If', 'With', 'Raise', 'Try', 'Assert', 'Import',
    'ImportFrom', 'Global', 'Nonlocal', 'Expr', 'Pass', 'Break', 'Continue',
})
EXPRESSION_NODE_KINDS = frozenset({
    'BoolOp', 'BinOp', 'UnaryOp', 'Lambda', 'IfExp', 'Dict', 'Set', 'Call',
    'JoinedStr', 'Constant', 'Attribute', 'Subscript', 'Starred', 'Name',
    'List', 'Tuple', 'Slice', 'Compare',
})
AUXILIARY_KINDS = frozenset({
    'Module', 'arguments', 'arg', 'keyword', 'alias', 'withitem',
    'ExceptHandler',
})
KIND_VOCABULARY = STATEMENT_KINDS | EXPRESSION_NODE_KINDS | AUXILIARY_KINDS

# Kinds whose node carries a label (identifier, literal or operator)
LABELED_KINDS = frozenset({
    'FunctionDef', 'ClassDef', 'Name', 'Constant', 'Attribute', 'arg',
    'keyword', 'alias', 'ImportFrom', 'Global', 'Nonlocal', 'ExceptHandler',
    'BinOp', 'BoolOp', 'UnaryOp', 'AugAssign', 'Compare',
})

# Folded into the label of their parent, never emitted as nodes
_FOLDED = (ast.expr_context, ast.operator, ast.boolop, ast.unaryop, ast.cmpop)
_INDEX = getattr(ast, 'Index', None)


@dataclass(frozen=True)
class TreeNode():
    """
    Syntax tree node annotated with the physical lines it spans
    """
    kind: str
    label: Optional[str]
    start_line: int
    end_line: int
    children: Tuple['TreeNode', ...] = ()

    def __post_init__(self):
        if not self.kind or any(c.isspace() or c in ':()' for c in self.kind):
            raise ValueError(f'Invalid node kind: {self.kind!r}')
        if self.start_line < 1 or self.start_line > self.end_line:
            raise ValueError(
                f'Invalid span [{self.start_line}, {self.end_line}] for {self.kind}')
        previous_start = self.start_line
        for child in self.children:
            if child.start_line < self.start_line or child.end_line > self.end_line:
                # pylint: disable=line-too-long
                raise ValueError(
                    f'Child {child.kind}[{child.start_line}..{child.end_line}] escapes {self.kind}[{self.start_line}..{self.end_line}]')
            if child.start_line < previous_start:
                raise ValueError(
                    f'Children of {self.kind} at line {self.start_line} are not ordered')
            previous_start = child.start_line

    @property
    def token(self) -> str:
        """
        Node token as it appears in a structure-based traversal
        """
        return self.kind if self.label is None else f'{self.kind}:{self.label}'

    def iter_nodes(self) -> Iterator['TreeNode']:
        """
        Pre-order walk over this node and all descendants
        """
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def node_count(self) -> int:
        """
        Number of nodes in the subtree
        """
        return sum(1 for _ in self.iter_nodes())

    def shape(self) -> tuple:
        """
        The tree without line spans: (kind, label, (child shapes...))
        """
        return (self.kind, self.label, tuple(c.shape() for c in self.children))

    def as_dict(self) -> Dict[str, Any]:
        """
        Returns the portable tree document representation of the node
        """
        out_d: Dict[str, Any] = {'kind': self.kind}
        if self.label is not None:
            out_d['label'] = self.label
        out_d['span'] = [self.start_line, self.end_line]
        out_d['children'] = [c.as_dict() for c in self.children]
        return out_d

    def __repr__(self):
        return f'{self.token}[{self.start_line}..{self.end_line}]'


class SubsetConverter():
    """
    Maps a Python `ast` tree onto TreeNode, rejecting anything outside the subset
    """

    def convert_module(self, module: ast.Module) -> TreeNode:
        """
        Convert a parsed module; the module always starts at line 1
        """
        children = [c for c, _ in self.convert_children(module, (1, 1))]
        end_line = max([1] + [c.end_line for c in children])
        return TreeNode('Module', None, 1, end_line, tuple(children))

    def convert_children(self,
                         node: ast.AST,
                         fallback: Tuple[int, int]) -> List[Tuple[TreeNode, Tuple[int, int]]]:
        """
        Convert the child nodes of `node` with their sort keys, ordered by position
        """
        keyed = []
        for child in ast.iter_child_nodes(node):
            if isinstance(child, _FOLDED):
                continue
            if _INDEX is not None and isinstance(child, _INDEX):
                child = child.value  # type: ignore[attr-defined]
            keyed.append(self.convert(child, fallback))
        # Stable: ties keep field order
        keyed.sort(key=lambda pair: pair[1])
        return keyed

    def convert(self,
                node: ast.AST,
                fallback: Tuple[int, int]) -> Tuple[TreeNode, Tuple[int, int]]:
        """
        Convert one node, returning it with its (line, column) sort key
        """
        kind = type(node).__name__
        line = getattr(node, 'lineno', None) or fallback[0]
        if kind not in KIND_VOCABULARY:
            raise SyntaxError(f'{kind} is outside the supported subset',
                              ('<source>', line, 0, None))
        if getattr(node, 'decorator_list', None):
            raise SyntaxError('Decorators are outside the supported subset',
                              ('<source>', line, 0, None))

        start = getattr(node, 'lineno', None)
        end = getattr(node, 'end_lineno', None)
        own_span = (start, end if end is not None else start) \
            if start is not None else fallback

        # f-strings are kept whole; inner positions are unreliable before 3.12
        keyed = [] if kind == 'JoinedStr' \
            else self.convert_children(node, own_span)
        children = [c for c, _ in keyed]

        if start is None:
            if children:
                start = min(c.start_line for c in children)
                end = max(c.end_line for c in children)
            else:
                start, end = fallback[0], fallback[0]
        if end is None:
            end = start

        try:
            tree_node = TreeNode(kind, self.label_for(node), start, end,
                                 tuple(children))
        except ValueError as err:
            raise SyntaxError(str(err), ('<source>', start, 0, None)) from err

        column = getattr(node, 'col_offset', None)
        if column is None:
            # No position of its own (arguments, keyword on 3.8): sort as its first child
            return tree_node, keyed[0][1] if keyed else (start, 0)
        return tree_node, (start, column)

    @staticmethod
    def label_for(node: ast.AST) -> Optional[str]:
        """
        Lexeme carried by the node, if its kind carries one
        """
        # pylint: disable=too-many-return-statements
        if isinstance(node, (ast.FunctionDef, ast.ClassDef)):
            return node.name
        if isinstance(node, ast.Name):
            return node.id
        if isinstance(node, ast.Constant):
            return repr(node.value)
        if isinstance(node, ast.Attribute):
            return node.attr
        if isinstance(node, ast.arg):
            return node.arg
        if isinstance(node, ast.keyword):
            return node.arg if node.arg is not None else '**'
        if isinstance(node, ast.alias):
            return node.name if node.asname is None \
                else f'{node.name}:{node.asname}'
        if isinstance(node, ast.ImportFrom):
            return '.' * (node.level or 0) + (node.module or '')
        if isinstance(node, (ast.Global, ast.Nonlocal)):
            return ','.join(node.names)
        if isinstance(node, ast.ExceptHandler):
            return node.name
        if isinstance(node, (ast.BinOp, ast.UnaryOp, ast.AugAssign, ast.BoolOp)):
            return type(node.op).__name__
        if isinstance(node, ast.Compare):
            return ','.join(type(op).__name__ for op in node.ops)
        return None


def parse_source(text: str) -> TreeNode:
    """
    Parse source text into a Module-rooted, line-annotated tree

    Raises SyntaxError (with `lineno`) for ill-formed text and for constructs
    outside the supported subset.
    """
    try:
        module = ast.parse(text)
    except ValueError as err:
        # e.g. null bytes in the source
        raise SyntaxError(str(err), ('<source>', 1, 0, None)) from err
    except RecursionError as err:
        raise SyntaxError('Source nests too deeply',
                          ('<source>', 1, 0, None)) from err
    return SubsetConverter().convert_module(module)


def serialize_tree(node: TreeNode) -> str:
    """
    Canonical portable tree document for `node`
    """
    return json.dumps(node.as_dict(), ensure_ascii=False,
                      separators=(',', ':'))


_DOCUMENT_FIELDS = frozenset({'kind', 'label', 'span', 'children'})


def _node_from_document(doc: Any, where: str) -> TreeNode:
    if not isinstance(doc, dict):
        raise FormatError(f'{where}: expected an object, got {type(doc).__name__}')
    unknown = set(doc) - _DOCUMENT_FIELDS
    if unknown:
        raise FormatError(f'{where}: unknown fields {sorted(unknown)}')
    kind = doc.get('kind')
    if not isinstance(kind, str):
        raise FormatError(f'{where}: "kind" must be a string')
    label = doc.get('label')
    if label is not None and not isinstance(label, str):
        raise FormatError(f'{where}: "label" must be a string')
    span = doc.get('span')
    if not isinstance(span, list) or len(span) != 2 or \
            not all(isinstance(v, int) and not isinstance(v, bool) for v in span):
        raise FormatError(f'{where}: "span" must be [start, end]')
    raw_children = doc.get('children', [])
    if not isinstance(raw_children, list):
        raise FormatError(f'{where}: "children" must be a list')
    children = tuple(_node_from_document(child, f'{where}.children[{i}]')
                     for i, child in enumerate(raw_children))
    try:
        return TreeNode(kind, label, span[0], span[1], children)
    except ValueError as err:
        raise FormatError(f'{where}: {err}') from err


def parse_tree_document(text: str) -> TreeNode:
    """
    Read a tree produced by another frontend from its JSON document
    """
    try:
        doc = json.loads(text)
    except JSONDecodeError as err:
        raise FormatError(f'Invalid tree document JSON: {err.msg}',
                          err.lineno) from err
    return _node_from_document(doc, 'root')
