"""Transformer semantic parsing with dependency-tree-aware encoders."""

from .deptree import Sentence, distance_matrix, parse_conll, serialize_conll, symmetrize
from .estimator import DependencyAwareParser
from .metrics import canonicalize, corpus_exact, corpus_tree, exact_match, parse_logic, tree_match
from .model import ModelConfig, Seq2SeqParser, Vocab, build_model, load_checkpoint, save_checkpoint
from .sawr import SyntaxAwareEncoder, load_sawr_file
from .training import TrainConfig, evaluate, tel, train

__version__ = "0.1.0"

__all__ = [
    "DependencyAwareParser", "SyntaxAwareEncoder", "Seq2SeqParser", "ModelConfig", "TrainConfig", "Vocab",
    "Sentence", "build_model", "train", "evaluate", "tel", "load_checkpoint", "save_checkpoint",
    "load_sawr_file", "parse_conll", "serialize_conll", "distance_matrix", "symmetrize", "parse_logic",
    "canonicalize", "exact_match", "tree_match", "corpus_exact", "corpus_tree",
]
