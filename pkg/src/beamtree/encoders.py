"""Sequence-to-vector encoders: recurrent fold, easy-first composition with
straight-through Gumbel selection, beam-tree recursion, beam shift-reduce,
Monte-Carlo averaging, and fixed-tree evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .cells import GrcParams, ScorerParams, TreeLstmParams, grc_compose, score, \
    tree_lstm_compose
from .tensor import Tensor
from .topk import BeamSet, BeamState, gumbel_noise, merge_beams, plain_topk, truncate
from .trees import ParseTree, replay_actions


class EncoderError(Exception):
    pass


@dataclass
class EncoderConfig:
    kind: str = "bt"  # recurrent | gumbel | bt | bsrp | mc | gold | balanced | random
    cell: str = "grc"  # grc | lstm
    beam_size: int = 5
    topk: str = "plain"  # plain | onesoft
    temperature: float = 1.0
    stochastic_topk: bool = True
    training: bool = False

    def validate(self):
        if self.beam_size < 1:
            raise EncoderError("beam size must be >= 1")
        if self.topk == "onesoft" and self.beam_size < 2:
            raise EncoderError("onesoft needs beam size >= 2")
        if self.temperature <= 0:
            raise EncoderError("temperature must be positive")


def _zeros_like_tensor(t: Tensor) -> Tensor:
    return Tensor(np.zeros_like(t.data))


def _compose_rows(left, right, mem_left, mem_right, cell):
    """Compose row-aligned children; returns (parents, parent_memory)."""
    if isinstance(cell, GrcParams):
        return grc_compose(left, right, cell), None
    h, c = tree_lstm_compose((left, mem_left), (right, mem_right), cell)
    return h, c


def _is_lstm(cell) -> bool:
    return isinstance(cell, TreeLstmParams)


def _splice_rows(mat: Tensor, i: int, row: Tensor) -> Tensor:
    """Replace rows i, i+1 of `mat` with the single row `row`."""
    n = mat.data.shape[0]
    parts = []
    if i > 0:
        parts.append(T.slice_rows(mat, 0, i))
    parts.append(row)
    if i + 2 < n:
        parts.append(T.slice_rows(mat, i + 2, n))
    return parts[0] if len(parts) == 1 else T.concat(parts, axis=0)


def _row(mat: Tensor, i: int) -> Tensor:
    return T.reshape(T.slice_rows(mat, i, i + 1), (mat.data.shape[1],))


def _candidates(nodes: Tensor, memory: Tensor | None, cell):
    n = nodes.data.shape[0]
    left = T.slice_rows(nodes, 0, n - 1)
    right = T.slice_rows(nodes, 1, n)
    mem_l = mem_r = None
    if memory is not None:
        mem_l = T.slice_rows(memory, 0, n - 1)
        mem_r = T.slice_rows(memory, 1, n)
    return _compose_rows(left, right, mem_l, mem_r, cell)


# ---------------------------------------------------------------------------
# recurrent / fixed-tree encoders

def encode_recurrent(leaves: Tensor, cell, h0: Tensor | None = None) -> Tensor:
    """Left-to-right fold of the cell, optionally from a learned initial
    state h0 (folded as R(h0, first_leaf))."""
    n = leaves.data.shape[0]
    if n < 1:
        raise EncoderError("empty input")
    lstm = _is_lstm(cell)
    idx = 0
    if h0 is not None:
        state = h0
        mem = _zeros_like_tensor(h0) if lstm else None
    else:
        state = _row(leaves, 0)
        mem = _zeros_like_tensor(state) if lstm else None
        idx = 1
    for i in range(idx, n):
        nxt = _row(leaves, i)
        nxt_mem = _zeros_like_tensor(nxt) if lstm else None
        if lstm:
            state, mem = tree_lstm_compose((state, mem), (nxt, nxt_mem), cell)
        else:
            state = grc_compose(state, nxt, cell)
    return state


def encode_fixed_tree(leaves: Tensor, tree: ParseTree, cell) -> Tensor:
    """Bottom-up evaluation of the cell along the given tree."""
    n = leaves.data.shape[0]
    if tree.n_leaves() != n:
        raise EncoderError(f"tree has {tree.n_leaves()} leaves for {n} tokens")
    if not tree.is_projective():
        raise EncoderError("non-projective tree")
    lstm = _is_lstm(cell)

    def walk(t):
        if t.is_leaf:
            h = _row(leaves, t.leaf)
            return (h, _zeros_like_tensor(h)) if lstm else (h, None)
        lh, lc = walk(t.left)
        rh, rc = walk(t.right)
        if lstm:
            return tree_lstm_compose((lh, lc), (rh, rc), cell)
        return grc_compose(lh, rh, cell), None

    return walk(tree)[0]


# ---------------------------------------------------------------------------
# easy-first composition with STE Gumbel selection

def encode_easy_first_gumbel(leaves: Tensor, cell, scorer: ScorerParams,
                             cfg: EncoderConfig,
                             rng: np.random.Generator | None = None):
    """Greedy easy-first composition. In training mode the per-iteration
    selection is a straight-through estimator: the forward pass commits to
    the Gumbel-perturbed argmax, the backward pass follows the softmax over
    perturbed scores at the configured temperature. Returns (vector, tree)."""
    cfg.validate()
    n = leaves.data.shape[0]
    if n < 1:
        raise EncoderError("empty input")
    lstm = _is_lstm(cell)
    nodes = leaves
    memory = Tensor(np.zeros_like(leaves.data)) if lstm else None
    actions = []
    while nodes.data.shape[0] > 2:
        parents, pmem = _candidates(nodes, memory, cell)
        raw = score(parents, scorer)
        if cfg.training:
            noise = gumbel_noise(raw.data.size, rng).astype(raw.data.dtype)
            perturbed = T.add(raw, Tensor(noise))
            hard = int(np.argmax(perturbed.data))
            soft = T.softmax(T.mulc(perturbed, 1.0 / cfg.temperature))
            onehot = np.zeros(raw.data.size, dtype=raw.data.dtype)
            onehot[hard] = 1.0
            ste = T.add(Tensor(onehot), T.sub(soft, T.detach(soft)))
            parent = T.matmul(ste, parents)
            parent_mem = T.matmul(ste, pmem) if lstm else None
        else:
            hard = int(np.argmax(raw.data))
            parent = _row(parents, hard)
            parent_mem = _row(pmem, hard) if lstm else None
        nodes = _splice_rows(nodes, hard, T.reshape(parent, (1, -1)))
        if lstm:
            memory = _splice_rows(memory, hard, T.reshape(parent_mem, (1, -1)))
        actions.append(hard)
    if nodes.data.shape[0] == 2:
        left, right = _row(nodes, 0), _row(nodes, 1)
        if lstm:
            out, _ = tree_lstm_compose((left, _row(memory, 0)),
                                       (right, _row(memory, 1)), cell)
        else:
            out = grc_compose(left, right, cell)
        actions.append(0)
    else:
        out = _row(nodes, 0)
    return out, replay_actions(n, actions)


def encode_mc_gumbel(leaves: Tensor, cell, scorer: ScorerParams,
                     cfg: EncoderConfig, k: int,
                     rng: np.random.Generator | None = None) -> Tensor:
    """Unweighted mean of k independent easy-first-Gumbel passes with shared
    parameters and independent noise."""
    if k < 1:
        raise EncoderError("k must be >= 1")
    total = None
    for _ in range(k):
        enc, _tree = encode_easy_first_gumbel(leaves, cell, scorer, cfg, rng)
        total = enc if total is None else T.add(total, enc)
    return T.mulc(total, 1.0 / k)


# ---------------------------------------------------------------------------
# beam tree cell

def encode_bt_cell(leaves: Tensor, cell, scorer: ScorerParams,
                   cfg: EncoderConfig,
                   rng: np.random.Generator | None = None):
    """Beam-search extension of easy-first composition.

    Per iteration each beam builds all adjacent parent candidates, scores
    are log-softmaxed into per-branch log-probability increments, each beam
    branches over its top-k candidates, and the pooled beams are truncated
    back to k with the configured operator (plain or OneSoft top-k; plain
    deterministic at eval). Returns (encoding, final BeamSet)."""
    cfg.validate()
    n = leaves.data.shape[0]
    if n < 1:
        raise EncoderError("empty input")
    k = cfg.beam_size
    lstm = _is_lstm(cell)
    zero = Tensor(np.zeros(1, dtype=leaves.data.dtype))
    beams = [BeamState(
        nodes=leaves, score=zero, actions=(),
        memory=Tensor(np.zeros_like(leaves.data)) if lstm else None)]
    branch_mode = "gumbel" if (cfg.training and cfg.stochastic_topk) else "deterministic"

    while beams[0].length > 2:
        pool = []
        for beam in beams:
            parents, pmem = _candidates(beam.nodes, beam.memory, cell)
            logp = T.log_softmax(score(parents, scorer))
            for i in plain_topk(logp.data, k, mode=branch_mode, rng=rng):
                nodes = _splice_rows(beam.nodes, i, T.slice_rows(parents, i, i + 1))
                memory = None
                if lstm:
                    memory = _splice_rows(beam.memory, i,
                                          T.slice_rows(pmem, i, i + 1))
                pool.append(BeamState(
                    nodes=nodes,
                    score=T.add(beam.score, T.reshape(T.pick(logp, i), (1,))),
                    actions=beam.actions + (i,),
                    memory=memory))
        beams = truncate(BeamSet(pool), k, cfg.topk, cfg.training, rng,
                         cfg.stochastic_topk).beams

    final = []
    for beam in beams:
        if beam.length == 2:
            left, right = _row(beam.nodes, 0), _row(beam.nodes, 1)
            if lstm:
                enc, mem = tree_lstm_compose(
                    (left, _row(beam.memory, 0)),
                    (right, _row(beam.memory, 1)), cell)
                mem = T.reshape(mem, (1, -1))
            else:
                enc, mem = grc_compose(left, right, cell), None
            final.append(BeamState(nodes=T.reshape(enc, (1, -1)),
                                   score=beam.score,
                                   actions=beam.actions + (0,),
                                   memory=mem))
        else:
            final.append(beam)
    encoding = merge_beams([_row(b.nodes, 0) for b in final],
                           [b.score for b in final])
    return encoding, BeamSet(final)


# ---------------------------------------------------------------------------
# beam shift-reduce parser

@dataclass
class BsrpParams:
    W: Tensor  # (3*d_h, 1)
    b: Tensor  # (1,)

    @classmethod
    def init(cls, d_h: int, rng: np.random.Generator, dtype=np.float32):
        return cls(
            W=Tensor(T.glorot_uniform((3 * d_h, 1), rng, dtype), requires_grad=True),
            b=Tensor(np.zeros(1, dtype=dtype), requires_grad=True),
        )

    def named(self, prefix: str = "bsrp") -> dict:
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


@dataclass
class _SRState:
    stack: list  # list of (h, c-or-None) pairs
    qpos: int
    score: Tensor
    actions: tuple


def _sr_decision_logit(state: _SRState, leaves, memory, n, d_h, decision,
                       dtype) -> Tensor:
    def slot(pair):
        return pair[0] if pair is not None else Tensor(np.zeros(d_h, dtype=dtype))

    s2 = slot(state.stack[-2] if len(state.stack) >= 2 else None)
    s1 = slot(state.stack[-1] if len(state.stack) >= 1 else None)
    qf = _row(leaves, state.qpos) if state.qpos < n \
        else Tensor(np.zeros(d_h, dtype=dtype))
    x = T.concat([s2, s1, qf], axis=0)
    return T.add(T.reshape(T.matmul(x, decision.W), (1,)), decision.b)


def encode_bsrp(leaves: Tensor, cell, decision: BsrpParams, cfg: EncoderConfig,
                rng: np.random.Generator | None = None):
    """Beam search over shift-reduce derivations. The decision logit comes
    from a linear layer over [stack[-2]; stack[-1]; queue-front]; reduce
    scores log(sigmoid(logit)), shift scores log(1 - sigmoid(logit)).
    Invalid actions are masked out. Returns (encoding, final BeamSet)."""
    cfg.validate()
    n = leaves.data.shape[0]
    if n < 1:
        raise EncoderError("empty input")
    k = cfg.beam_size
    d_h = leaves.data.shape[1]
    dtype = leaves.data.dtype
    lstm = _is_lstm(cell)
    zero_mem = Tensor(np.zeros(d_h, dtype=dtype))
    beams = [_SRState(stack=[], qpos=0,
                      score=Tensor(np.zeros(1, dtype=dtype)), actions=())]
    branch_mode = "gumbel" if (cfg.training and cfg.stochastic_topk) else "deterministic"

    for _step in range(2 * n - 1):
        pool = []
        for st in beams:
            can_shift = st.qpos < n
            can_reduce = len(st.stack) >= 2
            logit = _sr_decision_logit(st, leaves, None, n, d_h, decision, dtype)
            if can_shift:
                h = _row(leaves, st.qpos)
                item = (h, zero_mem if lstm else None)
                pool.append(_SRState(
                    stack=st.stack + [item], qpos=st.qpos + 1,
                    score=T.add(st.score, T.logsigmoid(T.neg(logit))),
                    actions=st.actions + ("s",)))
            if can_reduce:
                (lh, lc), (rh, rc) = st.stack[-2], st.stack[-1]
                if lstm:
                    ph, pc = tree_lstm_compose((lh, lc), (rh, rc), cell)
                else:
                    ph, pc = grc_compose(lh, rh, cell), None
                pool.append(_SRState(
                    stack=st.stack[:-2] + [(ph, pc)], qpos=st.qpos,
                    score=T.add(st.score, T.logsigmoid(logit)),
                    actions=st.actions + ("r",)))
        if not pool:
            raise EncoderError("no valid shift-reduce action")
        idx = plain_topk([s.score.item() for s in pool], k,
                         mode=branch_mode, rng=rng)
        beams = [pool[i] for i in idx]

    final = [BeamState(nodes=T.reshape(st.stack[0][0], (1, -1)),
                       score=st.score, actions=st.actions,
                       memory=None) for st in beams]
    encoding = merge_beams([_row(b.nodes, 0) for b in final],
                           [b.score for b in final])
    return encoding, BeamSet(final)
