"""Binary parse trees over token positions, bracketed-string serialization,
action-sequence replay, and heuristic tree builders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TreeError(Exception):
    pass


@dataclass(frozen=True)
class ParseTree:
    """Binary tree whose leaves are token positions 0..n-1, left to right."""

    leaf: int | None = None
    left: "ParseTree | None" = None
    right: "ParseTree | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def leaves(self) -> list:
        if self.is_leaf:
            return [self.leaf]
        return self.left.leaves() + self.right.leaves()

    def n_leaves(self) -> int:
        return 1 if self.is_leaf else self.left.n_leaves() + self.right.n_leaves()

    def span(self) -> tuple:
        lv = self.leaves()
        return (lv[0], lv[-1])

    def internal_spans(self) -> set:
        """(first, last) leaf-position pairs of every internal node."""
        spans = set()

        def walk(t):
            if t.is_leaf:
                return (t.leaf, t.leaf)
            a = walk(t.left)
            b = walk(t.right)
            spans.add((a[0], b[1]))
            return (a[0], b[1])

        walk(self)
        return spans

    def is_projective(self) -> bool:
        """Leaves must read 0..n-1 in order, so every node spans a
        contiguous range."""
        return self.leaves() == list(range(self.n_leaves()))

    def to_string(self, tokens=None) -> str:
        def render(t):
            if t.is_leaf:
                return str(t.leaf) if tokens is None else tokens[t.leaf]
            return f"({render(t.left)} {render(t.right)})"

        return render(self)


def leaf(i: int) -> ParseTree:
    return ParseTree(leaf=i)


def branch(left: ParseTree, right: ParseTree) -> ParseTree:
    return ParseTree(left=left, right=right)


def replay_actions(n: int, actions) -> ParseTree:
    """Rebuild the tree produced by a sequence of adjacent-merge indices."""
    if n < 1:
        raise TreeError("need at least one leaf")
    items = [leaf(i) for i in range(n)]
    for a in actions:
        if not 0 <= a < len(items) - 1:
            raise TreeError(f"merge index {a} out of range for {len(items)} items")
        items[a] = branch(items[a], items[a + 1])
        del items[a + 1]
    if len(items) != 1:
        raise TreeError(f"incomplete action history: {len(items)} items remain")
    return items[0]


def tree_to_actions(tree: ParseTree) -> list:
    """Bottom-up merge indices whose replay reproduces `tree`."""
    actions = []
    items = list(range(tree.n_leaves()))  # current leftmost-leaf ids

    def post(t):
        if t.is_leaf:
            return
        post(t.left)
        post(t.right)
        i = items.index(t.left.span()[0])
        assert items[i + 1] == t.right.span()[0]
        actions.append(i)
        del items[i + 1]

    post(tree)
    return actions


def parse_tree_string(s: str) -> ParseTree:
    """Parse a bracketed string like "((a b) c)" back into a ParseTree;
    leaf positions are assigned left to right."""
    pos = 0
    counter = [0]

    def skip_ws(i):
        while i < len(s) and s[i] == " ":
            i += 1
        return i

    def parse(i):
        i = skip_ws(i)
        if i >= len(s):
            raise TreeError("unexpected end of tree string")
        if s[i] == "(":
            left_t, i = parse(i + 1)
            right_t, i = parse(i)
            i = skip_ws(i)
            if i >= len(s) or s[i] != ")":
                raise TreeError("expected ')'")
            return branch(left_t, right_t), i + 1
        j = i
        while j < len(s) and s[j] not in " ()":
            j += 1
        if j == i:
            raise TreeError(f"empty token at position {i}")
        counter[0] += 1
        return leaf(counter[0] - 1), j

    tree, pos = parse(pos)
    if skip_ws(pos) != len(s):
        raise TreeError("trailing characters after tree")
    return tree


def build_balanced_tree(n: int) -> ParseTree:
    """Pair adjacent nodes level by level; an odd trailing node is promoted."""
    if n < 1:
        raise TreeError("need at least one leaf")
    level = [leaf(i) for i in range(n)]
    while len(level) > 1:
        nxt = [branch(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def build_random_tree(n: int, rng: np.random.Generator) -> ParseTree:
    """Repeatedly merge a uniformly random adjacent pair."""
    if n < 1:
        raise TreeError("need at least one leaf")
    items = [leaf(i) for i in range(n)]
    while len(items) > 1:
        i = int(rng.integers(0, len(items) - 1))
        items[i] = branch(items[i], items[i + 1])
        del items[i + 1]
    return items[0]


def build_left_chain(n: int) -> ParseTree:
    t = leaf(0)
    for i in range(1, n):
        t = branch(t, leaf(i))
    return t


def gold_tree_listops(tokens) -> ParseTree:
    """Gold composition order for a ListOps token sequence: per operator
    scope, a left-branching chain over (operator, args..., close-bracket),
    with nested scopes composed first."""
    n = len(tokens)

    def parse(i):
        if i >= n or not tokens[i].startswith("["):
            raise TreeError(f"expected operator token at position {i}")
        node = leaf(i)
        i += 1
        while i < n and tokens[i] != "]":
            if tokens[i].startswith("["):
                sub, i = parse(i)
            else:
                sub, i = leaf(i), i + 1
            node = branch(node, sub)
        if i >= n:
            raise TreeError("missing closing bracket")
        node = branch(node, leaf(i))
        return node, i + 1

    if n == 1:
        return leaf(0)
    tree, end = parse(0)
    if end != n:
        raise TreeError("trailing tokens after top-level expression")
    return tree
