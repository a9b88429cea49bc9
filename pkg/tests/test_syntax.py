import ast
import json
import unittest

from diffsbt.errors import FormatError
from diffsbt.syntax import (KIND_VOCABULARY, TreeNode, parse_source,
                            parse_tree_document, serialize_tree)
from tests.fixtures import LYRICS_BUGGY, LYRICS_FIXED


class TestParseSourceMethods(unittest.TestCase):
    """
    Tests for the subset parser
    """

    def test_parse_single_assignment(self):
        """
        Test that "x = 1" becomes Module{Assign{Name:x, Constant:1}} on line 1
        """
        tree = parse_source('x = 1')
        self.assertEqual(
            tree.shape(),
            ('Module', None, (('Assign', None, (('Name', 'x', ()),
                                                ('Constant', '1', ()))),))
        )
        self.assertEqual((tree.start_line, tree.end_line), (1, 1))
        self.assertEqual(tree.children[0].token, 'Assign')

    def test_loop_body_holds_the_sanitize_call(self):
        """
        Test that the call inside the loop is a child of the For node, matching the ast module
        """
        function = parse_source(LYRICS_BUGGY).children[0]
        self.assertEqual([c.kind for c in function.children],
                         ['arguments', 'Assign', 'For', 'Return'])
        loop = function.children[2]
        self.assertEqual((loop.start_line, loop.end_line), (3, 6))
        last = loop.children[-1]
        self.assertEqual(last.kind, 'Expr')
        self.assertEqual(last.children[0].children[0].token, 'Name:sanitize')

        reference = ast.parse(LYRICS_BUGGY).body[0].body[1]
        self.assertIsInstance(reference, ast.For)
        self.assertEqual(reference.body[-1].value.func.id, 'sanitize')

    def test_fixed_version_moves_call_out_of_loop(self):
        """
        Test that after the fix the call is a sibling of the loop
        """
        function = parse_source(LYRICS_FIXED).children[0]
        self.assertEqual([c.kind for c in function.children],
                         ['arguments', 'Assign', 'For', 'Expr', 'Return'])
        self.assertEqual(function.children[2].end_line, 5)

    def test_malformed_header(self):
        """
        Test that a broken function header raises SyntaxError at line 1
        """
        with self.assertRaises(SyntaxError) as ctx:
            parse_source('def f(:')
        self.assertEqual(ctx.exception.lineno, 1)

    def test_unsupported_constructs_are_rejected(self):
        """
        Test that constructs outside the subset raise SyntaxError
        """
        snippets = [
            '@wraps\ndef f():\n    pass\n',
            'y = [i for i in x]\n',
            'async def f():\n    pass\n',
            'x: int = 1\n',
            'def g():\n    yield 1\n',
            'if (n := 1):\n    pass\n',
        ]
        for snippet in snippets:
            with self.subTest(snippet=snippet):
                with self.assertRaises(SyntaxError):
                    parse_source(snippet)

    def test_unsupported_construct_reports_its_line(self):
        """
        Test that the SyntaxError names the line of the rejected construct
        """
        with self.assertRaises(SyntaxError) as ctx:
            parse_source('a = 1\nb = 2\nc = {k for k in a}\n')
        self.assertEqual(ctx.exception.lineno, 3)

    def test_operator_labels(self):
        """
        Test that operators are carried as labels of their node
        """
        compare = parse_source('y = a + b < c').children[0].children[1]
        self.assertEqual(
            compare.shape(),
            ('Compare', 'Lt', (('BinOp', 'Add', (('Name', 'a', ()), ('Name', 'b', ()))),
                               ('Name', 'c', ())))
        )
        boolean = parse_source('z = not a and b').children[0].children[1]
        self.assertEqual(
            boolean.shape(),
            ('BoolOp', 'And', (('UnaryOp', 'Not', (('Name', 'a', ()),)),
                               ('Name', 'b', ())))
        )
        chained = parse_source('ok = a < b == c').children[0].children[1]
        self.assertEqual(chained.label, 'Lt,Eq')
        augmented = parse_source('n += 1').children[0]
        self.assertEqual(augmented.token, 'AugAssign:Add')

    def test_constant_and_import_labels(self):
        """
        Test that literals use their repr and aliases their bound names
        """
        value = parse_source('s = "hi there"').children[0].children[1]
        self.assertEqual(value.token, "Constant:'hi there'")
        imports = parse_source('import numpy as np\nfrom os import path\n')
        self.assertEqual(imports.children[0].children[0].token, 'alias:numpy:np')
        self.assertEqual(imports.children[1].token, 'ImportFrom:os')
        self.assertEqual(imports.children[1].children[0].token, 'alias:path')

    def test_multiline_expression_span(self):
        """
        Test that a call spread over three lines spans all of them
        """
        statement = parse_source('foo(\n    1,\n    2)\n').children[0]
        self.assertEqual(statement.kind, 'Expr')
        self.assertEqual((statement.start_line, statement.end_line), (1, 3))
        self.assertEqual((statement.children[0].start_line,
                          statement.children[0].end_line), (1, 3))

    def test_comments_and_blank_lines_make_no_nodes(self):
        """
        Test that comments only shift line numbers
        """
        tree = parse_source('# setup\n\nx = 1  # one\n')
        self.assertEqual(len(tree.children), 1)
        self.assertEqual(tree.children[0].start_line, 3)
        self.assertEqual(tree.end_line, 3)

    def test_dict_children_follow_source_order(self):
        """
        Test that keys and values interleave as written
        """
        literal = parse_source('d = {"a": 1, "b": 2}').children[0].children[1]
        self.assertEqual([c.label for c in literal.children],
                         ["'a'", '1', "'b'", '2'])

    def test_every_kind_is_in_the_vocabulary(self):
        """
        Test that parsed kinds are drawn from the documented vocabulary
        """
        source = LYRICS_BUGGY + 'class Box():\n    def put(self, item=None):\n' \
            '        try:\n            self.items[0] = item\n' \
            '        except KeyError as err:\n            raise ValueError() from err\n'
        for node in parse_source(source).iter_nodes():
            self.assertIn(node.kind, KIND_VOCABULARY)

    def test_fstring_is_a_leaf(self):
        """
        Test that an f-string is one JoinedStr node with no formatted parts
        """
        value = parse_source('msg = f"{name}: {count:>3}"\n').children[0].children[1]
        self.assertEqual((value.kind, value.children), ('JoinedStr', ()))
        self.assertNotIn('FormattedValue', KIND_VOCABULARY)

    def test_parse_is_deterministic(self):
        """
        Test that identical text gives byte-identical serialized trees
        """
        self.assertEqual(serialize_tree(parse_source(LYRICS_BUGGY)),
                         serialize_tree(parse_source(LYRICS_BUGGY)))


class TestTreeNodeMethods(unittest.TestCase):
    """
    Tests for TreeNode invariants and helpers
    """

    def test_rejects_inverted_span(self):
        """
        Test that start_line must not exceed end_line
        """
        with self.assertRaises(ValueError):
            TreeNode('If', None, 3, 2)

    def test_rejects_escaping_child(self):
        """
        Test that a child must lie inside its parent
        """
        with self.assertRaises(ValueError):
            TreeNode('If', None, 2, 3, (TreeNode('Pass', None, 4, 4),))

    def test_rejects_unordered_children(self):
        """
        Test that children must be ordered by start line
        """
        with self.assertRaises(ValueError):
            TreeNode('Module', None, 1, 5, (TreeNode('Pass', None, 4, 4),
                                            TreeNode('Pass', None, 2, 2)))

    def test_rejects_bad_kind(self):
        """
        Test that kinds with whitespace, colons or brackets are refused
        """
        for kind in ('', 'a b', 'A:B', 'A(', ')'):
            with self.subTest(kind=kind):
                with self.assertRaises(ValueError):
                    TreeNode(kind, None, 1, 1)

    def test_helpers(self):
        """
        Test token, repr, node_count and pre-order iteration
        """
        tree = parse_source('x = 1')
        self.assertEqual(tree.node_count(), 4)
        self.assertEqual([n.token for n in tree.iter_nodes()],
                         ['Module', 'Assign', 'Name:x', 'Constant:1'])
        self.assertEqual(repr(tree.children[0]), 'Assign[1..1]')


class TestTreeDocumentMethods(unittest.TestCase):
    """
    Tests for the portable tree document
    """

    def test_read_minimal_document(self):
        """
        Test that a Module holding a Pass is read
        """
        doc = '{"kind": "Module", "span": [1, 1], "children": [{"kind": "Pass", "span": [1, 1]}]}'
        self.assertEqual(parse_tree_document(doc),
                         TreeNode('Module', None, 1, 1, (TreeNode('Pass', None, 1, 1),)))

    def test_containment_violation(self):
        """
        Test that a child outside its parent is a FormatError
        """
        doc = {'kind': 'Module', 'span': [1, 2],
               'children': [{'kind': 'Pass', 'span': [3, 3]}]}
        with self.assertRaises(FormatError):
            parse_tree_document(json.dumps(doc))

    def test_unordered_children(self):
        """
        Test that out-of-order children are a FormatError
        """
        doc = {'kind': 'Module', 'span': [1, 5],
               'children': [{'kind': 'Pass', 'span': [4, 4]},
                            {'kind': 'Pass', 'span': [2, 2]}]}
        with self.assertRaises(FormatError):
            parse_tree_document(json.dumps(doc))

    def test_unknown_field(self):
        """
        Test that unknown fields are rejected
        """
        with self.assertRaises(FormatError):
            parse_tree_document('{"kind": "Pass", "span": [1, 1], "type": "stmt"}')

    def test_bad_values(self):
        """
        Test that wrongly typed fields and invalid JSON are FormatErrors
        """
        for doc in ('{"kind": "Pass", "span": [1]}',
                    '{"kind": "Pass", "span": [true, 1]}',
                    '{"kind": 3, "span": [1, 1]}',
                    '{"kind": "Name", "label": 5, "span": [1, 1]}',
                    '{"kind": "Pass", "span": [1, 1], "children": {}}',
                    '[1, 2]',
                    '{"kind": "Pass",'):
            with self.subTest(doc=doc):
                with self.assertRaises(FormatError):
                    parse_tree_document(doc)

    def test_round_trip(self):
        """
        Test that serialized parser output reads back to an equal tree
        """
        for source in ('x = 1', LYRICS_BUGGY, LYRICS_FIXED):
            with self.subTest(source=source):
                tree = parse_source(source)
                self.assertEqual(parse_tree_document(serialize_tree(tree)), tree)

    def test_label_presence_survives(self):
        """
        Test that an empty label stays distinct from a missing one
        """
        tree = TreeNode('Module', None, 1, 1, (TreeNode('Constant', '', 1, 1),))
        back = parse_tree_document(serialize_tree(tree))
        self.assertEqual(back.children[0].label, '')
        self.assertIsNone(back.label)


if __name__ == '__main__':
    unittest.main()
