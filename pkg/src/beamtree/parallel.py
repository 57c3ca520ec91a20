"""Multiprocess gradient computation for the training loop.

Examples within a batch are independent; workers compute per-shard gradient
sums and the parent reduces them in a fixed shard order, so results are
deterministic for a given config (worker count included)."""

from __future__ import annotations

import multiprocessing as mp
from dataclasses import asdict

import numpy as np

_WORKER_MODEL = None


def _init_worker(cfg_dict):
    global _WORKER_MODEL
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(1)
    except Exception:
        pass
    from .harness import Model, make_config
    _WORKER_MODEL = Model(make_config(cfg_dict))


def _shard_grads(args):
    param_arrays, shard, epoch = args
    from .harness import example_rng, example_loss
    from .tensor import Tape
    model = _WORKER_MODEL
    params = model.params()
    for p, arr in zip(params, param_arrays):
        p.data[...] = arr
    total = [np.zeros_like(p.data) for p in params]
    loss_sum = 0.0
    for index, ex in shard:
        model.zero_grad()
        with Tape() as tape:
            loss = example_loss(model, ex, True,
                                example_rng(model.cfg.seed, epoch, index))
            tape.backward(loss)
        loss_sum += loss.item()
        for acc, p in zip(total, params):
            acc += p.grad
    return total, loss_sum


def start_pool(cfg):
    cfg_dict = {k: str(v) for k, v in asdict(cfg).items()}
    ctx = mp.get_context("fork")
    return ctx.Pool(cfg.workers, initializer=_init_worker, initargs=(cfg_dict,))


def batch_grads_parallel(pool, model, batch, epoch: int):
    workers = pool._processes
    param_arrays = [p.data for p in model.params()]
    shard_size = max(1, (len(batch) + workers - 1) // workers)
    shards = [batch[i:i + shard_size] for i in range(0, len(batch), shard_size)]
    results = pool.map(_shard_grads, [(param_arrays, s, epoch) for s in shards])
    total = [np.zeros_like(p.data) for p in model.params()]
    loss_sum = 0.0
    for grads, shard_loss in results:
        loss_sum += shard_loss
        for acc, g in zip(total, grads):
            acc += g
    scale = 1.0 / len(batch)
    for acc in total:
        acc *= scale
    return total, loss_sum * scale
