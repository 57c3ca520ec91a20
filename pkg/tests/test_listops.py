import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import stack_machine_eval

from beamtree.listops import (VOCAB, GenConfig, ListOpsError,
                              build_splits, detokenize, eval_listops,
                              generate, measure_depth, measure_max_args,
                              read_tsv, tokenize, write_tsv)


def test_eval_basic_ops():
    assert eval_listops("[MAX 2 9 4 ]") == 9
    assert eval_listops("[MIN 2 9 4 ]") == 2
    assert eval_listops("[SM 5 7 ]") == 2
    assert eval_listops("[MED 1 5 9 ]") == 5


def test_eval_nested():
    assert eval_listops("[SM [MAX 1 2 ] [MIN 8 3 ] ]") == 5
    assert eval_listops("[MAX [MAX [MAX 7 ] ] ]") == 7


def test_med_even_arity_sides():
    assert eval_listops("[MED 1 2 3 4 ]", med_even="lower") == 2
    assert eval_listops("[MED 1 2 3 4 ]", med_even="upper") == 3


def test_eval_rejects_malformed():
    with pytest.raises(ListOpsError):
        eval_listops("[MAX 1 2")
    with pytest.raises(ListOpsError):
        eval_listops("[MAX ]")
    with pytest.raises(ListOpsError):
        eval_listops("[FOO 1 ]")
    with pytest.raises(ListOpsError):
        eval_listops("[MAX 12 ]")


def test_interpreters_agree_on_generated_corpus():
    cfg = GenConfig(max_length=60, max_depth=5, min_args=2, max_args=5,
                    count=300, seed=42)
    for ex in generate(cfg):
        assert ex.label == stack_machine_eval(ex.source)
        assert 0 <= ex.label <= 9


_digits = st.lists(st.integers(min_value=0, max_value=9), min_size=1, max_size=8)


@given(_digits)
def test_metamorphic_max_min_med_sm(args):
    body = " ".join(map(str, args))
    assert eval_listops(f"[MAX {body} ]") == max(args)
    assert eval_listops(f"[MIN {body} ]") == min(args)
    assert eval_listops(f"[SM {body} ]") == sum(args) % 10
    assert eval_listops(f"[MED {body} ]") == sorted(args)[(len(args) - 1) // 2]


@given(_digits, st.randoms(use_true_random=False))
def test_metamorphic_permutation_invariance(args, rnd):
    shuffled = list(args)
    rnd.shuffle(shuffled)
    for op in ("MAX", "MIN", "MED", "SM"):
        a = eval_listops(f"[{op} {' '.join(map(str, args))} ]")
        b = eval_listops(f"[{op} {' '.join(map(str, shuffled))} ]")
        assert a == b


@given(st.integers(min_value=0, max_value=9))
def test_metamorphic_singleton_identity(d):
    for op in ("MAX", "MIN", "MED"):
        assert eval_listops(f"[{op} {d} ]") == d


def test_vocab_size_and_round_trip():
    assert len(VOCAB) == 15
    src = "[SM 1 [MIN 4 5 ] 2 ]"
    assert detokenize(tokenize(src)) == src


def test_tokenize_rejects_unknown():
    with pytest.raises(ListOpsError):
        tokenize("[MAX 10 ]")


def test_measurements():
    src = "[SM 1 [MIN 4 5 ] 2 ]"
    assert measure_depth(src) == 2
    assert measure_max_args(src) == 3  # SM has args 1, [MIN..], 2


def test_generate_deterministic_and_bounded():
    cfg = GenConfig(max_length=40, max_depth=4, min_args=2, max_args=3,
                    count=50, seed=7)
    a = generate(cfg)
    b = generate(cfg)
    assert [x.source for x in a] == [x.source for x in b]
    assert len({x.source for x in a}) == 50
    for ex in a:
        assert ex.length <= 40
        assert ex.depth <= 4
        assert 1 <= ex.max_args <= 3


def test_generate_respects_exclude():
    cfg = GenConfig(max_length=40, count=20, seed=7)
    first = generate(cfg)
    second = generate(cfg, exclude={x.source for x in first})
    assert not ({x.source for x in first} & {x.source for x in second})


def test_tsv_round_trip(tmp_path):
    cfg = GenConfig(max_length=30, count=10, seed=3)
    examples = generate(cfg)
    path = tmp_path / "x.tsv"
    write_tsv(path, examples)
    back = read_tsv(path)
    assert [(e.source, e.label) for e in back] == \
        [(e.source, e.label) for e in examples]


def test_build_splits_length_gen_certified(tmp_path):
    train_cfg = GenConfig(max_length=30, max_depth=3, min_args=2, max_args=3)
    splits = build_splits("length_gen", tmp_path, seed=5, train_count=40,
                          dev_count=10, test_count=10, train_cfg=train_cfg)
    data = {name: read_tsv(path) for name, path in splits.items()}
    sources = {name: {e.source for e in exs} for name, exs in data.items()}
    assert not (sources["train"] & sources["test"])
    assert not (sources["train"] & sources["dev"])
    assert not (sources["dev"] & sources["test"])
    assert max(e.length for e in data["train"]) <= 30
    assert min(e.length for e in data["test"]) > 30
    for exs in data.values():
        for e in exs:
            assert e.label == stack_machine_eval(e.source)
    assert (tmp_path / "train.meta").exists()


def test_build_splits_arg_gen(tmp_path):
    train_cfg = GenConfig(max_length=30, max_depth=3, min_args=2, max_args=3)
    splits = build_splits("arg_gen", tmp_path, seed=6, train_count=20,
                          dev_count=5, test_count=5, train_cfg=train_cfg)
    test = read_tsv(splits["test"])
    assert all(e.max_args >= 6 for e in test)
    train = read_tsv(splits["train"])
    assert all(e.max_args <= 3 for e in train)


def test_build_splits_rejects_overlapping_bounds(tmp_path):
    train_cfg = GenConfig(max_length=30)
    from dataclasses import replace
    bad_test = replace(train_cfg, min_length=10)
    with pytest.raises(ListOpsError):
        build_splits("length_gen", tmp_path, train_cfg=train_cfg,
                     test_cfg=bad_test, train_count=1, dev_count=1,
                     test_count=1)


def test_gen_config_validation():
    with pytest.raises(ListOpsError):
        GenConfig(min_args=0).validate()
    with pytest.raises(ListOpsError):
        GenConfig(nest_prob=1.5).validate()
    with pytest.raises(ListOpsError):
        GenConfig(max_length=2).validate()
