"""Command-line interface: gen-data, train, eval, parse, gradcheck."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import gradcheck as gc
from . import listops
from .cells import GrcParams, LeafParams, ScorerParams, TreeLstmParams, \
    leaf_transform, leaf_transform_seq
from .encoders import encode_bt_cell
from .harness import Model, RunConfig, evaluate_checkpoint, load_config, \
    load_model, make_config, train
from .listops import GenConfig, build_splits
from .parse_analysis import collapse_duplicates, extract_parses
from .tensor import Tensor
from . import tensor as T


def _parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        if not item.startswith("--") or "=" not in item:
            raise SystemExit(f"override must look like --key=value, got {item!r}")
        k, v = item[2:].split("=", 1)
        out[k] = v
    return out


def cmd_gen_data(args):
    train_cfg = GenConfig(max_length=args.train_max_len,
                          max_depth=args.train_max_depth,
                          min_args=args.min_args, max_args=args.train_max_args,
                          nest_prob=args.nest_prob)
    splits = build_splits(args.kind, args.out, seed=args.seed,
                          train_count=args.train_count,
                          dev_count=args.dev_count,
                          test_count=args.test_count, train_cfg=train_cfg)
    for name, path in splits.items():
        print(f"{name}: {path}")


def cmd_train(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = _parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if overrides:
        from dataclasses import asdict
        merged = {k: str(v) for k, v in asdict(cfg).items()}
        merged.update(overrides)
        cfg = make_config(merged)
    ckpt, metrics = train(cfg, args.out)
    print(f"checkpoint: {ckpt}")
    if metrics:
        print(f"best dev accuracy: {max(m['dev_accuracy'] for m in metrics):.4f}")


def cmd_eval(args):
    cfg = load_config(args.config)
    acc = evaluate_checkpoint(cfg, args.checkpoint, args.split)
    print(f"accuracy: {acc:.4f}")


def cmd_parse(args):
    cfg = load_config(args.config)
    model = load_model(cfg, args.checkpoint)
    tokens = args.input.split()
    ids = listops.tokenize(" ".join(tokens))
    leaves = leaf_transform_seq(ids, model.leaf)
    ecfg = cfg.encoder_config(training=False)
    _enc, beams = encode_bt_cell(leaves, model.cell, model.scorer, ecfg)
    for parse in collapse_duplicates(extract_parses(beams, tokens)):
        print(f"{parse.probability:.4f}\t{parse.tree}")


def cmd_gradcheck(args):
    """Double-precision finite-difference checks over every cell and an
    end-to-end beam-tree forward."""
    rng = np.random.default_rng(args.seed)
    d_h, d_e, vocab = 6, 5, len(listops.VOCAB)
    tol = 1e-4
    failures = []

    def report(name, errors):
        worst = max(errors.values())
        ok = worst <= tol
        status = "ok" if ok else "FAIL"
        print(f"{name}: max rel err {worst:.3e} [{status}]")
        if not ok:
            failures.append(name)

    from .cells import grc_compose, score, tree_lstm_compose
    grc = GrcParams.init(d_h, rng, np.float64)
    left = Tensor(rng.standard_normal(d_h))
    right = Tensor(rng.standard_normal(d_h))
    scorer = ScorerParams.init(d_h, rng, np.float64)
    report("grc+scorer", gc.check_grads(
        lambda: score(grc_compose(left, right, grc), scorer),
        {**grc.named(), **scorer.named()}))

    lstm = TreeLstmParams.init(d_h, rng, np.float64)
    h_l, c_l = Tensor(rng.standard_normal(d_h)), Tensor(rng.standard_normal(d_h))
    h_r, c_r = Tensor(rng.standard_normal(d_h)), Tensor(rng.standard_normal(d_h))

    def lstm_loss():
        h, c = tree_lstm_compose((h_l, c_l), (h_r, c_r), lstm)
        return T.tsum(T.mul(h, c))

    report("tree_lstm", gc.check_grads(lstm_loss, lstm.named()))

    leaf = LeafParams.init(vocab, d_e, d_h, rng, np.float64)
    # plain sum of a layer-normed vector is constant; probe with random weights
    w = Tensor(rng.standard_normal(d_h))
    report("leaf_transform", gc.check_grads(
        lambda: T.tsum(T.mul(leaf_transform(3, leaf), w)), leaf.named()))

    cfg = make_config({"encoder": "bt", "beam_size": "3", "topk": "onesoft",
                       "d_e": str(d_e), "d_h": str(d_h), "precision": "double",
                       "stochastic_topk": "false", "dropout": "0.0",
                       "seed": str(args.seed)})
    model = Model(cfg)
    ex = listops.Example(source="[MAX 2 [MIN 8 3 ] 1 ]", label=3,
                        length=8, depth=2, max_args=3)
    from .harness import example_loss
    report("end_to_end_bt_onesoft", gc.check_grads(
        lambda: example_loss(model, ex, True, None), model.named()))

    if failures:
        print(f"gradcheck failed: {', '.join(failures)}")
        sys.exit(1)
    print("gradcheck passed")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamtree")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate ListOps splits")
    g.add_argument("--kind", choices=listops.SPLIT_KINDS, default="length_gen")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--train-count", type=int, default=20000)
    g.add_argument("--dev-count", type=int, default=2000)
    g.add_argument("--test-count", type=int, default=2000)
    g.add_argument("--train-max-len", type=int, default=50)
    g.add_argument("--train-max-depth", type=int, default=4)
    g.add_argument("--train-max-args", type=int, default=3)
    g.add_argument("--min-args", type=int, default=2)
    g.add_argument("--nest-prob", type=float, default=0.4)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--split", required=True, help="path to a TSV split file")
    e.set_defaults(func=cmd_eval)

    pa = sub.add_parser("parse", help="print collapsed beam parses for a sequence")
    pa.add_argument("--config", required=True)
    pa.add_argument("--checkpoint", required=True)
    pa.add_argument("--input", required=True)
    pa.set_defaults(func=cmd_parse)

    gcp = sub.add_parser("gradcheck", help="run double-precision gradient checks")
    gcp.add_argument("--seed", type=int, default=0)
    gcp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if args.command == "train":
        # leftover --key=value pairs are config overrides
        args.overrides = extra
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    args.func(args)


if __name__ == "__main__":
    main()
