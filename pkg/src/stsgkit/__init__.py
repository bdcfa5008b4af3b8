"""Stochastic tree-substitution grammars.

Projection of grammars from tree-banks, chart parsing of sentences and
word-graphs, most-probable-derivation disambiguation, grammar
specialization, evaluation, and reductions from 3SAT.
"""

from .acnf import AcnfGrammar, reverse_parse, to_acnf
from .chart import (Chart, WordGraph, build_chart, cky_sentence,
                    cky_wordgraph, scfg_viterbi, tree_to_chart)
from .disambig import (enumerate_derivations, input_probability, mpd, mpid,
                       parse_probability, recognize_derivation_tree)
from .evaluation import EvalReport, parseval
from .grammar import (CutMarkedTreebank, Stsg, project_dop, project_sdop,
                      read_stsg, validate_stsg, write_stsg)
from .specialize import (LearnerConfig, integrated_parse, sequential_cover,
                         specialized_grammar)
from .trees import (ProjectionParams, Tree, Treebank, load_treebank,
                    parse_bracketed)

__version__ = "0.1.0"

__all__ = [
    "AcnfGrammar", "Chart", "CutMarkedTreebank", "EvalReport",
    "LearnerConfig", "ProjectionParams", "Stsg", "Tree", "Treebank",
    "WordGraph", "build_chart", "cky_sentence", "cky_wordgraph",
    "enumerate_derivations", "input_probability", "integrated_parse",
    "load_treebank", "mpd", "mpid", "parse_bracketed", "parse_probability",
    "parseval", "project_dop", "project_sdop", "read_stsg",
    "recognize_derivation_tree", "reverse_parse", "scfg_viterbi",
    "sequential_cover", "specialized_grammar", "to_acnf", "tree_to_chart",
    "validate_stsg", "write_stsg",
]
