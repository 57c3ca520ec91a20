"""ListOps: expression generator, oracle interpreter, tokenizer, and
generalization-split builders (length / depth / argument-count)."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

OPERATORS = ("MAX", "MIN", "MED", "SM")
VOCAB = ["[MAX", "[MIN", "[MED", "[SM", "]"] + [str(d) for d in range(10)]
TOKEN_TO_ID = {t: i for i, t in enumerate(VOCAB)}
CLOSE = "]"


class ListOpsError(Exception):
    pass


@dataclass
class GenConfig:
    max_length: int = 100
    max_depth: int = 6
    min_args: int = 2
    max_args: int = 5
    operators: tuple = OPERATORS
    nest_prob: float = 0.4
    count: int = 1000
    seed: int = 0
    min_length: int = 1
    # MED on even arity: "lower" middle element or "upper"
    med_even: str = "lower"
    # when set, every emitted sample must contain an operator with exactly
    # this many arguments (used by the argument-generalization split)
    require_exact_args: int | None = None

    def validate(self):
        if not (1 <= self.min_args <= self.max_args):
            raise ListOpsError("need 1 <= min_args <= max_args")
        if self.max_depth < 1:
            raise ListOpsError("max_depth must be >= 1")
        if not 0.0 <= self.nest_prob <= 1.0:
            raise ListOpsError("nest_prob must be in [0, 1]")
        if self.max_length < self.min_args + 2:
            raise ListOpsError("max_length too small for a minimal expression")
        if self.min_length > self.max_length:
            raise ListOpsError("min_length exceeds max_length")


@dataclass
class Example:
    source: str
    label: int
    length: int
    depth: int
    max_args: int


def tokenize(source: str) -> list:
    ids = []
    for tok in source.split():
        if tok not in TOKEN_TO_ID:
            raise ListOpsError(f"unknown token {tok!r}")
        ids.append(TOKEN_TO_ID[tok])
    return ids


def detokenize(ids) -> str:
    return " ".join(VOCAB[i] for i in ids)


def eval_listops(source: str, med_even: str = "lower") -> int:
    """Recursive oracle: MAX/MIN extrema, MED median (even arity takes the
    configured middle element), SM sum modulo 10."""
    tokens = source.split()

    def parse(i):
        tok = tokens[i]
        if tok.startswith("["):
            op = tok[1:]
            if op not in OPERATORS:
                raise ListOpsError(f"unknown operator {tok!r}")
            i += 1
            args = []
            while i < len(tokens) and tokens[i] != CLOSE:
                val, i = parse(i)
                args.append(val)
            if i >= len(tokens):
                raise ListOpsError("missing closing bracket")
            if not args:
                raise ListOpsError("empty argument list")
            return _apply(op, args, med_even), i + 1
        if tok.isdigit() and len(tok) == 1:
            return int(tok), i + 1
        raise ListOpsError(f"unexpected token {tok!r}")

    value, end = parse(0)
    if end != len(tokens):
        raise ListOpsError("trailing tokens")
    return value


def _apply(op: str, args, med_even: str) -> int:
    if op == "MAX":
        return max(args)
    if op == "MIN":
        return min(args)
    if op == "SM":
        return sum(args) % 10
    s = sorted(args)
    mid = (len(s) - 1) // 2 if med_even == "lower" else len(s) // 2
    return s[mid]


def measure_depth(source: str) -> int:
    """Maximum number of nested operators."""
    depth = best = 0
    for tok in source.split():
        if tok.startswith("["):
            depth += 1
            best = max(best, depth)
        elif tok == CLOSE:
            depth -= 1
    if depth != 0:
        raise ListOpsError("unbalanced brackets")
    return best


def measure_max_args(source: str) -> int:
    return max(_arg_counts(source))


def _arg_counts(source: str) -> list:
    counts = []
    stack = []
    for tok in source.split():
        if tok.startswith("["):
            stack.append(0)
        elif tok == CLOSE:
            counts.append(stack.pop())
            if stack:
                stack[-1] += 1
        else:
            stack[-1] += 1
    return counts


def _gen_operator(rng: np.random.Generator, cfg: GenConfig, depth: int) -> list:
    op = cfg.operators[int(rng.integers(0, len(cfg.operators)))]
    arity = int(rng.integers(cfg.min_args, cfg.max_args + 1))
    tokens = [f"[{op}"]
    p_nest = cfg.nest_prob * max(0.0, 1.0 - depth / cfg.max_depth)
    for _ in range(arity):
        if rng.random() < p_nest:
            tokens.extend(_gen_operator(rng, cfg, depth + 1))
        else:
            tokens.append(str(int(rng.integers(0, 10))))
    tokens.append(CLOSE)
    return tokens


def _make_example(rng: np.random.Generator, cfg: GenConfig,
                  max_attempts: int = 100_000) -> Example:
    for _ in range(max_attempts):
        tokens = _gen_operator(rng, cfg, depth=1)
        if not (cfg.min_length <= len(tokens) <= cfg.max_length):
            continue
        source = " ".join(tokens)
        if cfg.require_exact_args is not None:
            if cfg.require_exact_args not in _arg_counts(source):
                continue
        return Example(
            source=source,
            label=eval_listops(source, cfg.med_even),
            length=len(tokens),
            depth=measure_depth(source),
            max_args=measure_max_args(source),
        )
    raise ListOpsError("could not satisfy generation bounds; config may be "
                       "unsatisfiable or too tight")


def generate(cfg: GenConfig, exclude: set | None = None) -> list:
    """Draw `cfg.count` examples within the configured bounds; deterministic
    under `cfg.seed`. Sources in `exclude` (and duplicates) are resampled."""
    cfg.validate()
    seen = set() if exclude is None else set(exclude)
    out = []
    stream = 0
    while len(out) < cfg.count:
        rng = np.random.default_rng([cfg.seed, stream])
        stream += 1
        ex = _make_example(rng, cfg)
        if ex.source in seen:
            continue
        seen.add(ex.source)
        out.append(ex)
    return out


def write_tsv(path, examples):
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(f"{ex.source}\t{ex.label}\n")


def read_tsv(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            source, label = line.split("\t")
            out.append(Example(
                source=source,
                label=int(label),
                length=len(source.split()),
                depth=measure_depth(source),
                max_args=measure_max_args(source),
            ))
    return out


def _write_meta(path, cfg: GenConfig, examples):
    lengths = [ex.length for ex in examples]
    depths = [ex.depth for ex in examples]
    args = [ex.max_args for ex in examples]
    with open(path, "w", encoding="utf-8") as f:
        for k, v in (
            ("count", len(examples)),
            ("seed", cfg.seed),
            ("max_length", cfg.max_length),
            ("min_length", cfg.min_length),
            ("max_depth", cfg.max_depth),
            ("min_args", cfg.min_args),
            ("max_args", cfg.max_args),
            ("nest_prob", cfg.nest_prob),
            ("med_even", cfg.med_even),
            ("require_exact_args", cfg.require_exact_args),
            ("realized_length_min", min(lengths)),
            ("realized_length_max", max(lengths)),
            ("realized_depth_max", max(depths)),
            ("realized_args_max", max(args)),
        ):
            f.write(f"{k}={v}\n")


SPLIT_KINDS = ("length_gen", "depth_gen", "arg_gen", "lra_style")


def build_splits(kind: str, out_dir, *, seed: int = 0,
                 train_count: int = 20000, dev_count: int = 2000,
                 test_count: int = 2000, train_cfg: GenConfig | None = None,
                 test_cfg: GenConfig | None = None) -> dict:
    """Emit train/dev/test TSVs plus metadata for one generalization split.

    The default recipes are desk-scale; pass explicit configs to override.
    Train/dev/test never share a source string.
    """
    if kind not in SPLIT_KINDS:
        raise ListOpsError(f"unknown split kind {kind!r}")
    if train_cfg is None:
        train_cfg = GenConfig(max_length=50, max_depth=4, min_args=2,
                              max_args=3, nest_prob=0.4)
    if test_cfg is None:
        if kind == "length_gen":
            test_cfg = replace(train_cfg,
                               min_length=int(1.6 * train_cfg.max_length),
                               max_length=int(2.4 * train_cfg.max_length),
                               max_depth=train_cfg.max_depth + 2,
                               nest_prob=0.6)
        elif kind == "depth_gen":
            test_cfg = replace(train_cfg,
                               max_depth=train_cfg.max_depth + 2,
                               max_length=train_cfg.max_length * 2,
                               nest_prob=0.6)
        elif kind == "arg_gen":
            target = train_cfg.max_args * 2
            test_cfg = replace(train_cfg, max_args=target,
                               max_length=train_cfg.max_length * 3,
                               require_exact_args=target)
        else:  # lra_style: longer and more arguments at once
            test_cfg = replace(train_cfg, max_args=train_cfg.max_args * 2,
                               min_length=2 * train_cfg.max_length,
                               max_length=4 * train_cfg.max_length,
                               max_depth=train_cfg.max_depth + 2,
                               nest_prob=0.6)
    if kind == "length_gen" and test_cfg.min_length <= train_cfg.max_length:
        raise ListOpsError("length_gen test bound must exceed the train bound")
    if kind == "arg_gen" and (test_cfg.require_exact_args or 0) <= train_cfg.max_args:
        raise ListOpsError("arg_gen target arity must exceed the train bound")
    if kind == "depth_gen" and test_cfg.max_depth <= train_cfg.max_depth:
        raise ListOpsError("depth_gen test depth must exceed the train bound")

    os.makedirs(out_dir, exist_ok=True)
    seen: set = set()
    splits = {}
    recipes = (
        ("train", replace(train_cfg, count=train_count, seed=seed)),
        ("dev", replace(train_cfg, count=dev_count, seed=seed + 1)),
        ("test", replace(test_cfg, count=test_count, seed=seed + 2)),
    )
    for name, cfg in recipes:
        examples = generate(cfg, exclude=seen)
        seen.update(ex.source for ex in examples)
        tsv = os.path.join(out_dir, f"{name}.tsv")
        write_tsv(tsv, examples)
        _write_meta(os.path.join(out_dir, f"{name}.meta"), cfg, examples)
        splits[name] = tsv
    return splits
