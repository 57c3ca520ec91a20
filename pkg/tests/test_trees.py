import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamtree.trees import (TreeError, build_balanced_tree,
                            build_left_chain, build_random_tree,
                            gold_tree_listops, parse_tree_string,
                            replay_actions, tree_to_actions)


def test_replay_left_chain():
    t = replay_actions(3, [0, 0])
    assert t.to_string() == "((0 1) 2)"


def test_replay_right_chain():
    t = replay_actions(3, [1, 0])
    assert t.to_string() == "(0 (1 2))"


def test_replay_single_leaf():
    assert replay_actions(1, []).to_string() == "0"


def test_replay_rejects_bad_index():
    with pytest.raises(TreeError):
        replay_actions(3, [2, 0])
    with pytest.raises(TreeError):
        replay_actions(3, [0])  # incomplete


def test_tree_action_round_trip():
    rng = np.random.default_rng(0)
    for n in range(1, 9):
        for _ in range(5):
            t = build_random_tree(n, rng)
            assert replay_actions(n, tree_to_actions(t)).to_string() == t.to_string()


@given(st.integers(min_value=1, max_value=10), st.integers(min_value=0, max_value=2**31 - 1))
def test_random_tree_projective(n, seed):
    t = build_random_tree(n, np.random.default_rng(seed))
    assert t.is_projective()
    assert t.n_leaves() == n


def test_balanced_tree_shape():
    assert build_balanced_tree(4).to_string() == "((0 1) (2 3))"
    assert build_balanced_tree(5).to_string() == "(((0 1) (2 3)) 4)"
    assert build_balanced_tree(1).to_string() == "0"


def test_left_chain_shape():
    assert build_left_chain(4).to_string() == "(((0 1) 2) 3)"


def test_parse_string_round_trip():
    rng = np.random.default_rng(1)
    for n in range(1, 8):
        t = build_random_tree(n, rng)
        s = t.to_string()
        assert parse_tree_string(s).to_string() == s


def test_parse_string_with_tokens():
    t = parse_tree_string("((a b) c)")
    assert t.to_string(["x", "y", "z"]) == "((x y) z)"


def test_parse_string_rejects_garbage():
    with pytest.raises(TreeError):
        parse_tree_string("((0 1)")
    with pytest.raises(TreeError):
        parse_tree_string("(0 1) 2")


def test_internal_spans():
    t = parse_tree_string("((0 1) 2)")
    assert t.internal_spans() == {(0, 1), (0, 2)}


def test_gold_tree_flat_expression():
    tokens = "[MAX 2 3 ]".split()
    t = gold_tree_listops(tokens)
    assert t.to_string(tokens) == "((([MAX 2) 3) ])"


def test_gold_tree_nested_scopes_first():
    tokens = "[SM 1 [MIN 4 5 ] 2 ]".split()
    t = gold_tree_listops(tokens)
    assert t.to_string(tokens) == "(((([SM 1) ((([MIN 4) 5) ])) 2) ])"
    assert t.is_projective()


def test_gold_tree_rejects_unclosed():
    with pytest.raises(TreeError):
        gold_tree_listops("[MAX 2 3".split())
