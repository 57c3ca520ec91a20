"""Latent-tree sequence encoders with beam search and relaxed top-k,
trained end-to-end on ListOps generalization splits."""

from .cells import GrcParams, LeafParams, ScorerParams, TreeLstmParams, \
    grc_compose, leaf_transform, leaf_transform_seq, score, tree_lstm_compose
from .encoders import BsrpParams, EncoderConfig, encode_bsrp, encode_bt_cell, \
    encode_easy_first_gumbel, encode_fixed_tree, encode_mc_gumbel, \
    encode_recurrent
from .harness import Model, RunConfig, classify, evaluate_checkpoint, train
from .listops import GenConfig, build_splits, eval_listops, generate, tokenize
from .parse_analysis import collapse_duplicates, extract_parses, tree_agreement
from .tensor import AdamState, Tape, Tensor, adam_step
from .topk import BeamSet, BeamState, merge_beams, onesoft_topk, plain_topk
from .trees import ParseTree, build_balanced_tree, build_random_tree, \
    gold_tree_listops, parse_tree_string, replay_actions

__version__ = "0.1.0"
