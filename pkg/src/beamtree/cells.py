"""Composition cells and scoring: gated recursive cell (GRC), binary
tree-LSTM, the linear merge scorer, and the leaf transform.

All compose functions accept either single d_h vectors or (rows, d_h)
matrices so a whole batch of candidate parents can go through one matmul.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


def _cat(parts, last_axis: bool):
    axis = parts[0].data.ndim - 1 if last_axis else 0
    return T.concat(parts, axis=axis)


def _chunk(x: Tensor, i: int, d: int) -> Tensor:
    if x.data.ndim == 1:
        return T.slice_rows(x, i * d, (i + 1) * d)
    return T.slice_cols(x, i * d, (i + 1) * d)


@dataclass
class GrcParams:
    W1: Tensor  # (2*d_h, 4*d_h)
    b1: Tensor  # (4*d_h,)
    W2: Tensor  # (4*d_h, 4*d_h)
    b2: Tensor  # (4*d_h,)
    gamma: Tensor  # (d_h,)
    beta: Tensor  # (d_h,)
    d_h: int

    @classmethod
    def init(cls, d_h: int, rng: np.random.Generator, dtype=np.float32):
        return cls(
            W1=Tensor(T.glorot_uniform((2 * d_h, 4 * d_h), rng, dtype), requires_grad=True),
            b1=Tensor(np.zeros(4 * d_h, dtype=dtype), requires_grad=True),
            W2=Tensor(T.glorot_uniform((4 * d_h, 4 * d_h), rng, dtype), requires_grad=True),
            b2=Tensor(np.zeros(4 * d_h, dtype=dtype), requires_grad=True),
            gamma=Tensor(np.ones(d_h, dtype=dtype), requires_grad=True),
            beta=Tensor(np.zeros(d_h, dtype=dtype), requires_grad=True),
            d_h=d_h,
        )

    def named(self, prefix: str = "grc") -> dict:
        return {f"{prefix}.{k}": getattr(self, k)
                for k in ("W1", "b1", "W2", "b2", "gamma", "beta")}


def _affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    y = T.matmul(x, W)
    if y.data.ndim == 2:
        return T.add_rowvec(y, b)
    return T.add(y, b)


def grc_compose(left: Tensor, right: Tensor, p: GrcParams) -> Tensor:
    """Gated composition: gates from a two-layer GELU MLP over [left; right],
    output = LN(sigmoid(z)*left + sigmoid(h)*right + sigmoid(c)*u)."""
    d = p.d_h
    hidden = T.gelu(_affine(_cat([left, right], last_axis=True), p.W1, p.b1))
    gates = _affine(hidden, p.W2, p.b2)
    z, h, c, u = (_chunk(gates, i, d) for i in range(4))
    mix = T.add(
        T.add(T.mul(T.sigmoid(z), left), T.mul(T.sigmoid(h), right)),
        T.mul(T.sigmoid(c), u),
    )
    return T.layer_norm(mix, p.gamma, p.beta)


@dataclass
class TreeLstmParams:
    W: Tensor  # (2*d_h, 5*d_h): gates i, f_left, f_right, o, candidate g
    b: Tensor  # (5*d_h,)
    d_h: int

    @classmethod
    def init(cls, d_h: int, rng: np.random.Generator, dtype=np.float32):
        return cls(
            W=Tensor(T.glorot_uniform((2 * d_h, 5 * d_h), rng, dtype), requires_grad=True),
            b=Tensor(np.zeros(5 * d_h, dtype=dtype), requires_grad=True),
            d_h=d_h,
        )

    def named(self, prefix: str = "tree_lstm") -> dict:
        return {f"{prefix}.W": self.W, f"{prefix}.b": self.b}


def tree_lstm_compose(left, right, p: TreeLstmParams):
    """Binary tree-LSTM with childwise forget gates.

    `left`/`right` are (h, c) pairs; returns the parent (h, c).
    """
    h_l, c_l = left
    h_r, c_r = right
    d = p.d_h
    gates = _affine(_cat([h_l, h_r], last_axis=True), p.W, p.b)
    i, f_l, f_r, o, g = (_chunk(gates, j, d) for j in range(5))
    c_new = T.add(
        T.add(T.mul(T.sigmoid(f_l), c_l), T.mul(T.sigmoid(f_r), c_r)),
        T.mul(T.sigmoid(i), T.tanh(g)),
    )
    h_new = T.mul(T.sigmoid(o), T.tanh(c_new))
    return h_new, c_new


@dataclass
class ScorerParams:
    W_v: Tensor  # (d_h, 1)

    @classmethod
    def init(cls, d_h: int, rng: np.random.Generator, dtype=np.float32):
        return cls(W_v=Tensor(T.glorot_uniform((d_h, 1), rng, dtype), requires_grad=True))

    def named(self, prefix: str = "scorer") -> dict:
        return {f"{prefix}.W_v": self.W_v}


def score(v: Tensor, p: ScorerParams) -> Tensor:
    """Linear merge plausibility score. Vector input -> shape (1,);
    (rows, d_h) input -> shape (rows,)."""
    s = T.matmul(v, p.W_v)
    if s.data.ndim == 2:
        s = T.reshape(s, (s.data.shape[0],))
    return s


@dataclass
class LeafParams:
    embedding: Tensor  # (vocab, d_e)
    projection: Tensor  # (d_e, d_h)
    gamma: Tensor
    beta: Tensor

    @classmethod
    def init(cls, vocab: int, d_e: int, d_h: int, rng: np.random.Generator,
             dtype=np.float32):
        return cls(
            embedding=Tensor(T.glorot_uniform((vocab, d_e), rng, dtype), requires_grad=True),
            projection=Tensor(T.glorot_uniform((d_e, d_h), rng, dtype), requires_grad=True),
            gamma=Tensor(np.ones(d_h, dtype=dtype), requires_grad=True),
            beta=Tensor(np.zeros(d_h, dtype=dtype), requires_grad=True),
        )

    def named(self, prefix: str = "leaf") -> dict:
        return {f"{prefix}.{k}": getattr(self, k)
                for k in ("embedding", "projection", "gamma", "beta")}


def leaf_transform_seq(token_ids, p: LeafParams, dropout_rate: float = 0.0,
                       training: bool = False, rng: np.random.Generator | None = None):
    """Embed a token sequence and project to d_h: LN(embed(ids) @ projection).

    Dropout applies to the embeddings only in training mode. Returns (n, d_h).
    """
    emb = T.rows_gather(p.embedding, token_ids)
    if training and dropout_rate > 0.0:
        emb = T.dropout(emb, dropout_rate, rng)
    return T.layer_norm(T.matmul(emb, p.projection), p.gamma, p.beta)


def leaf_transform(token_id: int, p: LeafParams, dropout_rate: float = 0.0,
                   training: bool = False, rng: np.random.Generator | None = None):
    mat = leaf_transform_seq([token_id], p, dropout_rate, training, rng)
    return T.reshape(mat, (mat.data.shape[1],))
