"""Trellis recursions, word lattices and a miniature HMM decoder."""

from .hmm import DecoderConfig, Grammar, WordHmm, build_trellis, decode, load_grammar, save_grammar
from .lattice import EPSILON, Arc, Lattice, LatticeError, arc_posteriors, best_path_arcs, read_lattice, write_lattice
from .trellis import BestPath, DecodeError, Trellis, forward_log_probs, load_trellis, save_trellis, viterbi

__all__ = [
    "EPSILON",
    "Arc",
    "BestPath",
    "DecodeError",
    "DecoderConfig",
    "Grammar",
    "Lattice",
    "LatticeError",
    "Trellis",
    "WordHmm",
    "arc_posteriors",
    "best_path_arcs",
    "build_trellis",
    "decode",
    "forward_log_probs",
    "load_grammar",
    "load_trellis",
    "read_lattice",
    "save_grammar",
    "save_trellis",
    "viterbi",
    "write_lattice",
]
