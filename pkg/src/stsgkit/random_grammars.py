"""Random grammars, word-graphs and tree-banks for testing and verification.

Every generator takes a ``random.Random`` so that runs are reproducible.
"""

from __future__ import annotations

import math
import random
from typing import Optional, Sequence

from .chart import WordGraph
from .grammar import GrammarError, Stsg, check_unary_cycles
from .trees import Tree, Treebank

NONTERMINALS = ("S", "A", "B")
TERMINALS = ("a", "b", "c")


def _random_node(rng: random.Random, label: str, depth: int, nts, terms,
                 max_children: int) -> Tree:
    kids = []
    for _ in range(rng.randint(1, max_children)):
        roll = rng.random()
        if roll < 0.4:
            kids.append(rng.choice(terms))
        elif roll < 0.75 or depth <= 1:
            kids.append(Tree(rng.choice(nts)))
        else:
            kids.append(_random_node(rng, rng.choice(nts), depth - 1, nts,
                                     terms, max_children))
    return Tree(label, kids)


def _normalized(rng: random.Random, trees: list) -> list:
    weights = [rng.uniform(0.1, 1.0) for _ in trees]
    totals: dict = {}
    for t, w in zip(trees, weights):
        totals[t.label] = totals.get(t.label, 0.0) + w
    return [(t, math.log(w / totals[t.label])) for t, w in zip(trees, weights)]


def random_stsg(rng: random.Random, max_trees: int = 8, max_depth: int = 3,
                max_children: int = 3, num_nonterminals: int = 3,
                depth1: bool = False) -> Stsg:
    """A random STSG over ``S, A, B`` and ``a, b, c`` without unary cycles.

    Every nonterminal roots at least one tree, and its first tree is a
    short terminal-only rule, so every nonterminal derives some string.
    With ``depth1`` all trees are single rules.
    """
    nts = NONTERMINALS[:num_nonterminals]
    for _ in range(1000):
        count = rng.randint(len(nts), max(len(nts), max_trees))
        trees = [Tree(r, [rng.choice(TERMINALS)
                          for _ in range(rng.randint(1, 2))]) for r in nts]
        # extra trees: one for the start symbol, the rest leaning towards it
        roots = [rng.choice(nts + nts[:1]) for _ in range(count - len(nts))]
        if roots:
            roots[0] = nts[0]
        for r in roots:
            depth = 1 if depth1 else rng.randint(1, max_depth)
            trees.append(_random_node(rng, r, depth, nts, TERMINALS,
                                      max_children))
        trees = list(dict.fromkeys(trees))
        g = Stsg("S", _normalized(rng, trees))
        try:
            check_unary_cycles(g)
        except GrammarError:
            continue
        return g
    raise RuntimeError("could not draw a grammar without unary cycles")


def random_depth1_stsg(rng: random.Random, max_trees: int = 8, **kw) -> Stsg:
    return random_stsg(rng, max_trees=max_trees, depth1=True, **kw)


def random_wordgraph(rng: random.Random, max_states: int = 6,
                     words=TERMINALS, density: float = 0.5,
                     backbone: Optional[Sequence[str]] = None) -> WordGraph:
    """A random acyclic word-graph whose states have normalized outgoing
    probabilities.  A linear backbone keeps the final state reachable; pass
    ``backbone`` to fix its words (and hence the number of states)."""
    n = len(backbone) + 1 if backbone else rng.randint(2, max_states)
    edges = {}
    for i in range(n - 1):
        w = backbone[i] if backbone else rng.choice(words)
        edges[(i, i + 1, w)] = None
        for j in range(i + 1, n):
            for w in words:
                if rng.random() < density / len(words) / (j - i):
                    edges[(i, j, w)] = None
    out: dict = {}
    for (i, j, w) in edges:
        out.setdefault(i, []).append((i, j, w))
    trans = []
    for i, es in out.items():
        ws = [rng.uniform(0.1, 1.0) for _ in es]
        tot = sum(ws)
        trans += [(a, b, w, x / tot) for (a, b, w), x in zip(es, ws)]
    return WordGraph(n, trans)


# A small PCFG over part-of-speech symbols; used for synthetic tree-banks.
TOY_PCFG = {
    "S": [(("NP", "VP"), 0.8), (("VP",), 0.1), (("S", "CONJ", "S"), 0.1)],
    "NP": [(("DET", "N"), 0.5), (("DET", "ADJ", "N"), 0.2), (("PRON",), 0.2),
           (("NP", "PP"), 0.1)],
    "VP": [(("V", "NP"), 0.5), (("V",), 0.2), (("VP", "PP"), 0.2),
           (("V", "NP", "NP"), 0.1)],
    "PP": [(("P", "NP"), 1.0)],
}
TOY_LEXICON = {
    "DET": ("the", "a"), "N": ("flight", "ticket", "city", "train"),
    "ADJ": ("cheap", "early"), "PRON": ("i", "you"),
    "V": ("want", "book", "see"), "P": ("to", "from", "on"),
    "CONJ": ("and",),
}


def random_pcfg_tree(rng: random.Random, symbol: str = "S", depth: int = 0,
                     max_depth: int = 6) -> Tree:
    if symbol in TOY_LEXICON:
        return Tree(symbol, [rng.choice(TOY_LEXICON[symbol])])
    rules = TOY_PCFG[symbol]
    if depth >= max_depth:
        # shortest expansion, so recursion ends
        rules = [min(rules, key=lambda r: len(r[0]) + sum(
            s in TOY_PCFG for s in r[0]))]
    rhs = rng.choices([r for r, _ in rules], [p for _, p in rules])[0]
    if depth >= max_depth:
        rhs = tuple("PRON" if s == "NP" else "V" if s == "VP" else s
                    for s in rhs)
    return Tree(symbol, [random_pcfg_tree(rng, s, depth + 1, max_depth)
                         for s in rhs])


def random_treebank(rng: random.Random, size: int = 200,
                    max_depth: int = 6, max_words: Optional[int] = 12
                    ) -> Treebank:
    """Trees sampled from :data:`TOY_PCFG`, redrawn while longer than
    ``max_words``."""
    trees = []
    while len(trees) < size:
        t = random_pcfg_tree(rng, max_depth=max_depth)
        if max_words is None or len(t.frontier()) <= max_words:
            trees.append(t)
    return Treebank(trees, "S")
