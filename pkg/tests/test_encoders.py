import math

import numpy as np
import pytest

from oracles import (enumerate_merge_derivations, enumerate_sr_derivations,
                     np_grc)

from beamtree import tensor as T
from beamtree.cells import GrcParams, ScorerParams, TreeLstmParams
from beamtree.encoders import (BsrpParams, EncoderConfig, EncoderError,
                               encode_bsrp, encode_bt_cell,
                               encode_easy_first_gumbel, encode_fixed_tree,
                               encode_mc_gumbel, encode_recurrent)
from beamtree.tensor import Tape, Tensor
from beamtree.trees import build_balanced_tree, build_left_chain, leaf, branch

D_H = 4


def _params(seed=0, d_h=D_H):
    rng = np.random.default_rng(seed)
    grc = GrcParams.init(d_h, rng, np.float64)
    scorer = ScorerParams.init(d_h, rng, np.float64)
    return grc, scorer


def _leaves(n, seed=1, d_h=D_H):
    rng = np.random.default_rng(seed)
    return Tensor(rng.standard_normal((n, d_h)))


@pytest.mark.parametrize("n", [3, 4, 5])
def test_bt_cell_matches_exhaustive_enumeration(n):
    grc, scorer = _params(seed=n)
    leaves = _leaves(n, seed=n + 10)
    k = math.factorial(n - 1)
    cfg = EncoderConfig(kind="bt", beam_size=k, topk="plain", training=False)
    encoding, beams = encode_bt_cell(leaves, grc, scorer, cfg)

    oracle = {a: (s, e) for a, s, e in
              enumerate_merge_derivations([leaves.data[i].copy() for i in range(n)],
                            grc, scorer)}
    assert len(beams) == len(oracle) == k
    for b in beams.beams:
        s, enc = oracle[b.actions]
        assert abs(b.score.item() - s) <= 1e-9
        assert np.max(np.abs(b.nodes.data[0] - enc)) <= 1e-9

    scores = np.array([b.score.item() for b in beams.beams])
    w = np.exp(scores - scores.max())
    w /= w.sum()
    expect = sum(wi * b.nodes.data[0] for wi, b in zip(w, beams.beams))
    assert np.max(np.abs(encoding.data - expect)) <= 1e-9


def test_bt_cell_small_beam_is_subset_of_enumeration():
    n, k = 5, 3
    grc, scorer = _params(seed=2)
    leaves = _leaves(n, seed=3)
    cfg = EncoderConfig(kind="bt", beam_size=k, topk="plain", training=False)
    _, beams = encode_bt_cell(leaves, grc, scorer, cfg)
    oracle = {a: s for a, s, _ in
              enumerate_merge_derivations([leaves.data[i].copy() for i in range(n)],
                            grc, scorer)}
    assert len(beams) == k
    for b in beams.beams:
        assert b.actions in oracle
        assert abs(b.score.item() - oracle[b.actions]) <= 1e-9


def test_bt_cell_best_score_monotone_in_beam_size():
    grc, scorer = _params(seed=4)
    leaves = _leaves(7, seed=5)
    best = []
    for k in (1, 2, 4, 8):
        cfg = EncoderConfig(kind="bt", beam_size=k, topk="plain",
                            training=False)
        _, beams = encode_bt_cell(leaves, grc, scorer, cfg)
        best.append(max(b.score.item() for b in beams.beams))
    for lo, hi in zip(best, best[1:]):
        assert hi >= lo - 1e-12


def test_bt_cell_k1_equals_greedy_easy_first():
    grc, scorer = _params(seed=6)
    leaves = _leaves(6, seed=7)
    cfg = EncoderConfig(kind="bt", beam_size=1, topk="plain", training=False)
    bt_enc, beams = encode_bt_cell(leaves, grc, scorer, cfg)
    ef_enc, tree = encode_easy_first_gumbel(leaves, grc, scorer, cfg)
    assert np.max(np.abs(bt_enc.data - ef_enc.data)) <= 1e-9
    from beamtree.trees import replay_actions
    assert replay_actions(6, beams.beams[0].actions).to_string() == \
        tree.to_string()


def test_bt_cell_two_tokens_no_score_increment():
    grc, scorer = _params(seed=8)
    leaves = _leaves(2, seed=9)
    cfg = EncoderConfig(kind="bt", beam_size=3, topk="plain", training=False)
    enc, beams = encode_bt_cell(leaves, grc, scorer, cfg)
    assert len(beams) == 1
    assert beams.beams[0].score.item() == 0.0
    assert beams.beams[0].actions == (0,)
    expect = np_grc(leaves.data[0], leaves.data[1], grc)
    assert np.max(np.abs(enc.data - expect)) <= 1e-9


def test_bt_cell_single_token_identity():
    grc, scorer = _params(seed=10)
    leaves = _leaves(1, seed=11)
    cfg = EncoderConfig(kind="bt", beam_size=2, topk="plain", training=False)
    enc, beams = encode_bt_cell(leaves, grc, scorer, cfg)
    assert np.array_equal(enc.data, leaves.data[0])
    assert beams.beams[0].actions == ()


def test_bt_cell_lstm_cell_runs_and_backprops():
    rng = np.random.default_rng(12)
    lstm = TreeLstmParams.init(D_H, rng, np.float64)
    scorer = ScorerParams.init(D_H, rng, np.float64)
    leaves = Tensor(rng.standard_normal((5, D_H)), requires_grad=True)
    cfg = EncoderConfig(kind="bt", cell="lstm", beam_size=2, topk="onesoft",
                        training=True, stochastic_topk=False)
    with Tape() as tape:
        enc, _ = encode_bt_cell(leaves, lstm, scorer, cfg,
                                rng=np.random.default_rng(0))
        tape.backward(T.tsum(enc))
    assert np.isfinite(enc.data).all()
    assert np.any(leaves.grad != 0.0)
    assert np.any(lstm.W.grad != 0.0)


def test_bt_cell_onesoft_eval_equals_plain_eval():
    grc, scorer = _params(seed=13)
    leaves = _leaves(6, seed=14)
    a = encode_bt_cell(leaves, grc, scorer,
                       EncoderConfig(beam_size=2, topk="plain",
                                     training=False))[0]
    b = encode_bt_cell(leaves, grc, scorer,
                       EncoderConfig(beam_size=2, topk="onesoft",
                                     training=False))[0]
    assert np.array_equal(a.data, b.data)


# ---------------------------------------------------------------------------
# recurrent and fixed-tree encoders

def test_recurrent_equals_left_chain_fixed_tree():
    grc, _ = _params(seed=15)
    leaves = _leaves(6, seed=16)
    rec = encode_recurrent(leaves, grc)
    chain = encode_fixed_tree(leaves, build_left_chain(6), grc)
    assert np.max(np.abs(rec.data - chain.data)) <= 1e-12


def test_recurrent_lstm_equals_left_chain():
    rng = np.random.default_rng(17)
    lstm = TreeLstmParams.init(D_H, rng, np.float64)
    leaves = Tensor(rng.standard_normal((5, D_H)))
    rec = encode_recurrent(leaves, lstm)
    chain = encode_fixed_tree(leaves, build_left_chain(5), lstm)
    assert np.max(np.abs(rec.data - chain.data)) <= 1e-12


def test_recurrent_initial_state_folded_first():
    grc, _ = _params(seed=18)
    leaves = _leaves(3, seed=19)
    h0 = Tensor(np.random.default_rng(20).standard_normal(D_H))
    out = encode_recurrent(leaves, grc, h0=h0)
    # R(R(R(h0, x0), x1), x2) computed against the reference cell
    state = h0.data
    for i in range(3):
        state = np_grc(state, leaves.data[i], grc)
    assert np.max(np.abs(out.data - state)) <= 1e-9


def test_fixed_tree_matches_reference_on_balanced():
    grc, _ = _params(seed=21)
    leaves = _leaves(4, seed=22)
    out = encode_fixed_tree(leaves, build_balanced_tree(4), grc)
    l = np_grc(leaves.data[0], leaves.data[1], grc)
    r = np_grc(leaves.data[2], leaves.data[3], grc)
    assert np.max(np.abs(out.data - np_grc(l, r, grc))) <= 1e-9


def test_fixed_tree_rejects_leaf_mismatch_and_nonprojective():
    grc, _ = _params(seed=23)
    leaves = _leaves(3, seed=24)
    with pytest.raises(EncoderError):
        encode_fixed_tree(leaves, build_balanced_tree(4), grc)
    crossed = branch(branch(leaf(1), leaf(0)), leaf(2))
    with pytest.raises(EncoderError):
        encode_fixed_tree(leaves, crossed, grc)


# ---------------------------------------------------------------------------
# easy-first with straight-through selection

def test_easy_first_training_forward_is_hard():
    # the straight-through forward must equal evaluating the returned tree
    grc, scorer = _params(seed=25)
    leaves = _leaves(6, seed=26)
    cfg = EncoderConfig(kind="gumbel", beam_size=1, training=True,
                        temperature=2.0)
    enc, tree = encode_easy_first_gumbel(leaves, grc, scorer, cfg,
                                         rng=np.random.default_rng(3))
    fixed = encode_fixed_tree(leaves, tree, grc)
    assert np.max(np.abs(enc.data - fixed.data)) <= 1e-9


def test_easy_first_training_scorer_gets_gradient():
    grc, scorer = _params(seed=27)
    rng = np.random.default_rng(28)
    leaves = Tensor(rng.standard_normal((5, D_H)), requires_grad=True)
    cfg = EncoderConfig(kind="gumbel", beam_size=1, training=True)
    with Tape() as tape:
        enc, _ = encode_easy_first_gumbel(leaves, grc, scorer, cfg,
                                          rng=np.random.default_rng(1))
        tape.backward(T.tsum(enc))
    assert np.any(scorer.W_v.grad != 0.0)


def test_easy_first_eval_scorer_no_gradient():
    grc, scorer = _params(seed=29)
    leaves = _leaves(5, seed=30)
    cfg = EncoderConfig(kind="gumbel", beam_size=1, training=False)
    with Tape() as tape:
        enc, _ = encode_easy_first_gumbel(leaves, grc, scorer, cfg)
        tape.backward(T.tsum(enc))
    assert np.all(scorer.W_v.grad == 0.0)


def test_easy_first_eval_deterministic():
    grc, scorer = _params(seed=31)
    leaves = _leaves(7, seed=32)
    cfg = EncoderConfig(kind="gumbel", beam_size=1, training=False)
    a, ta = encode_easy_first_gumbel(leaves, grc, scorer, cfg)
    b, tb = encode_easy_first_gumbel(leaves, grc, scorer, cfg)
    assert np.array_equal(a.data, b.data)
    assert ta.to_string() == tb.to_string()


def test_mc_mean_of_single_pass_matches():
    grc, scorer = _params(seed=33)
    leaves = _leaves(5, seed=34)
    cfg = EncoderConfig(kind="mc", beam_size=1, training=True)
    enc = encode_mc_gumbel(leaves, grc, scorer, cfg, k=1,
                           rng=np.random.default_rng(9))
    single, _ = encode_easy_first_gumbel(leaves, grc, scorer, cfg,
                                         rng=np.random.default_rng(9))
    assert np.max(np.abs(enc.data - single.data)) <= 1e-12


def test_mc_variance_shrinks_with_sample_count():
    grc, scorer = _params(seed=35)
    leaves = _leaves(7, seed=36)
    cfg = EncoderConfig(kind="mc", beam_size=1, training=True)

    def sample_var(k, reps=60):
        vals = []
        for r in range(reps):
            enc = encode_mc_gumbel(leaves, grc, scorer, cfg, k=k,
                                   rng=np.random.default_rng([k, r]))
            vals.append(enc.data[0])
        return np.var(vals)

    v1, v8 = sample_var(1), sample_var(8)
    assert v8 < v1 * 0.5


# ---------------------------------------------------------------------------
# beam shift-reduce

@pytest.mark.parametrize("n", [3, 4])
def test_bsrp_matches_exhaustive_enumeration(n):
    grc, _ = _params(seed=40 + n)
    rng = np.random.default_rng(41)
    decision = BsrpParams.init(D_H, rng, np.float64)
    leaves = _leaves(n, seed=42 + n)
    oracle = enumerate_sr_derivations([leaves.data[i].copy() for i in range(n)],
                           grc, decision)
    # Catalan(n-1) complete derivations
    assert len(oracle) == {3: 2, 4: 5}[n]
    cfg = EncoderConfig(kind="bsrp", beam_size=32, training=False)
    encoding, beams = encode_bsrp(leaves, grc, decision, cfg)
    by_actions = {a: (s, e) for a, s, e in oracle}
    assert len(beams) == len(oracle)
    for b in beams.beams:
        s, enc = by_actions[tuple(b.actions)]
        assert abs(b.score.item() - s) <= 1e-9
        assert np.max(np.abs(b.nodes.data[0] - enc)) <= 1e-9


def test_bsrp_single_token():
    grc, _ = _params(seed=50)
    decision = BsrpParams.init(D_H, np.random.default_rng(51), np.float64)
    leaves = _leaves(1, seed=52)
    enc, beams = encode_bsrp(leaves, grc, decision,
                             EncoderConfig(kind="bsrp", beam_size=2,
                                           training=False))
    assert np.array_equal(enc.data, leaves.data[0])
    assert beams.beams[0].actions == ("s",)


def test_bsrp_backprops_to_decision_layer():
    grc, _ = _params(seed=53)
    decision = BsrpParams.init(D_H, np.random.default_rng(54), np.float64)
    leaves = _leaves(4, seed=55)
    cfg = EncoderConfig(kind="bsrp", beam_size=2, training=True,
                        stochastic_topk=False)
    with Tape() as tape:
        enc, _ = encode_bsrp(leaves, grc, decision, cfg)
        tape.backward(T.tsum(enc))
    assert np.any(decision.W.grad != 0.0)


def test_encoder_config_validation():
    with pytest.raises(EncoderError):
        EncoderConfig(beam_size=0).validate()
    with pytest.raises(EncoderError):
        EncoderConfig(beam_size=1, topk="onesoft").validate()
    with pytest.raises(EncoderError):
        EncoderConfig(temperature=0.0).validate()
