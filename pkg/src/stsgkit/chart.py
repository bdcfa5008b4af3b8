"""Phase one: CKY recognition over sentences and word-graphs.

A chart records which compiled rules are complete over which pairs of
states.  Active items ``A -> B . C`` are implicit: one exists over
``[i, k]`` exactly when some complete item of category ``B`` does.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from . import _kernels
from .acnf import BINARY, MERGE, PRIME, TERMINAL, UNARY, WRAP, AcnfGrammar
from .grammar import Scfg
from .trees import UNKNOWN, Tree

log = logging.getLogger(__name__)


class UnknownWordError(ValueError):
    pass


class NotInGrammarError(ValueError):
    pass


class Transition(NamedTuple):
    src: int
    dst: int
    word: str
    prob: float


class WordGraph:
    """Acyclic word-graph over states ``0..num_states-1``; 0 is the start
    and the last state is final.  Every transition goes forward."""

    def __init__(self, num_states: int, transitions: Sequence):
        if num_states < 2:
            raise ValueError("a word-graph needs at least two states")
        seen = set()
        trans = []
        for t in transitions:
            t = Transition(int(t[0]), int(t[1]), str(t[2]), float(t[3]))
            if not 0 <= t.src < t.dst < num_states:
                raise ValueError(f"transition {t} is not a forward edge")
            if not 0.0 < t.prob <= 1.0:
                raise ValueError(f"transition {t} has probability outside (0,1]")
            if (t.src, t.dst, t.word) in seen:
                raise ValueError(f"duplicate transition {t}")
            seen.add((t.src, t.dst, t.word))
            trans.append(t)
        self.num_states = num_states
        self.transitions = tuple(sorted(trans))
        self.out: list = [[] for _ in range(num_states)]
        for t in self.transitions:
            self.out[t.src].append(t)

    @property
    def final(self) -> int:
        return self.num_states - 1

    @classmethod
    def linear(cls, words: Sequence[str]) -> "WordGraph":
        return cls(len(words) + 1,
                   [(i, i + 1, w, 1.0) for i, w in enumerate(words)])

    def is_linear(self) -> bool:
        return all(len(o) == 1 and o[0].dst == o[0].src + 1
                   for o in self.out[:-1]) and not self.out[-1]

    def paths(self):
        """Yield every start-to-final path as a tuple of transitions."""
        def walk(state):
            if state == self.final:
                yield ()
                return
            for t in self.out[state]:
                for rest in walk(t.dst):
                    yield (t,) + rest

        yield from walk(0)

    def unnormalized_states(self, tol: float = 1e-9) -> list:
        return [s for s in range(self.final)
                if self.out[s] and abs(sum(t.prob for t in self.out[s]) - 1) > tol]

    def __repr__(self):
        return f"WordGraph({self.num_states}, {list(self.transitions)})"


def read_wordgraphs(path) -> list:
    """Read one or more word-graphs; each starts with ``WG <states>``."""
    graphs = []
    current = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "WG":
                if current:
                    graphs.append(WordGraph(*current))
                current = (int(parts[1]), [])
            elif parts[0] == "TRANS" and current is not None and len(parts) == 5:
                current[1].append((int(parts[1]), int(parts[2]), parts[3],
                                   float(parts[4])))
            else:
                raise ValueError(f"{path}:{lineno}: bad word-graph line")
    if current:
        graphs.append(WordGraph(*current))
    for g in graphs:
        bad = g.unnormalized_states()
        if bad:
            log.warning("word-graph states %s have outgoing probabilities "
                        "that do not sum to one", bad)
    return graphs


def write_wordgraph(wg: WordGraph, f) -> None:
    f.write(f"WG {wg.num_states}\n")
    for t in wg.transitions:
        f.write(f"TRANS {t.src} {t.dst} {t.word} {t.prob!r}\n")


class Item(NamedTuple):
    rule: int
    dot: int


class Chart:
    """Recognition tables plus the transitions behind terminal items."""

    def __init__(self, grammar: AcnfGrammar, num_states: int,
                 final: np.ndarray, cat: np.ndarray, lexical: dict,
                 wordgraph: Optional[WordGraph] = None):
        self.grammar = grammar
        self.num_states = num_states
        self.final = final
        self.cat = cat
        self.lexical = lexical  # (i, j, rule) -> Transition
        self.wordgraph = wordgraph

    @property
    def n(self) -> int:
        return self.num_states - 1

    @property
    def recognized(self) -> bool:
        g = self.grammar
        c = g.cat_index.get(g.start)
        return c is not None and bool(self.cat[0, self.n, c])

    def final_rules(self, i: int, j: int) -> list:
        return np.flatnonzero(self.final[i, j]).tolist()

    def final_items(self, cat: str, i: int, j: int) -> list:
        """Rule ids of complete items with category ``cat`` over ``[i, j]``."""
        rules = self.final_rules(i, j)
        c = self.grammar.cat_index.get(cat)
        return [r for r in rules if self.grammar.rule_cat[r] == c]

    def items(self, i: int, j: int) -> set:
        g = self.grammar
        out = {Item(r, len(g.rules[r].rhs)) for r in self.final_rules(i, j)}
        cats = self.cat[i, j]
        for r in g.rules:
            if r.kind == BINARY and cats[g.cat_index[r.rhs[0]]]:
                out.add(Item(r.id, 1))
        return out

    def added_by(self, rule: int, i: int, j: int) -> list:
        """How a complete item was built.

        Binary: ``(k, left rules over [i,k], right rules over [k,j])`` per
        split.  Unary: the complete child rules over ``[i, j]``.  Terminal:
        the transition.
        """
        r = self.grammar.rules[rule]
        if not self.final[i, j, rule]:
            return []
        if r.kind == TERMINAL:
            return [self.lexical[(i, j, rule)]]
        if r.kind == UNARY:
            return self.final_items(r.rhs[0], i, j)
        out = []
        b, c = self.grammar.cat_index[r.rhs[0]], self.grammar.cat_index[r.rhs[1]]
        for k in range(i + 1, j):
            if self.cat[i, k, b] and self.cat[k, j, c]:
                out.append((k, self.final_items(r.rhs[0], i, k),
                            self.final_items(r.rhs[1], k, j)))
        return out

    def spans(self) -> list:
        """Spans holding complete items, narrowest first."""
        idx = np.argwhere(self.final.any(axis=2))
        return sorted(((int(i), int(j)) for i, j in idx),
                      key=lambda s: (s[1] - s[0], s[0]))


def _lexical_key(g: AcnfGrammar, word: str, strict: bool) -> Optional[str]:
    if word in g.lexicon:
        return word
    if g.has_unknown and word not in g.terminals:
        return UNKNOWN
    if strict and word not in g.terminals:
        raise UnknownWordError(f"unknown word {word!r}")
    return None


def _empty(g: AcnfGrammar, num_states: int):
    shape = (num_states, num_states)
    final = np.zeros(shape + (len(g.rules),), dtype=np.bool_)
    cat = np.zeros(shape + (len(g.categories),), dtype=np.bool_)
    return final, cat


def build_chart(g: AcnfGrammar, wg: WordGraph, strict: bool = False,
                allowed: Optional[np.ndarray] = None, impl=None) -> Chart:
    final, cat = _empty(g, wg.num_states)
    if allowed is None:
        allowed = np.ones_like(cat)
    lexical = {}
    for t in wg.transitions:
        key = _lexical_key(g, t.word, strict)
        for r in g.lexicon.get(key, ()) if key is not None else ():
            c = g.rule_cat[r]
            if allowed[t.src, t.dst, c]:
                final[t.src, t.dst, r] = True
                cat[t.src, t.dst, c] = True
                lexical[(t.src, t.dst, r)] = t
    _kernels.cky_fill(final, cat, allowed, g.binary, g.unary, impl=impl)
    return Chart(g, wg.num_states, final, cat, lexical, wg)


def cky_sentence(g: AcnfGrammar, words: Sequence[str], impl=None) -> Chart:
    if not words:
        raise ValueError("empty sentence")
    return build_chart(g, WordGraph.linear(list(words)), strict=True, impl=impl)


def cky_wordgraph(g: AcnfGrammar, wg: WordGraph, impl=None) -> Chart:
    return build_chart(g, wg, strict=False, impl=impl)


# ----------------------------------------------------------------------
# single-parse charts

def _cfg_rules(g: AcnfGrammar) -> frozenset:
    rules = getattr(g, "_cfg_rules", None)
    if rules is None:
        rules = g.stsg.underlying_cfg().rules
        g._cfg_rules = rules
    return rules


def tree_to_chart(g: AcnfGrammar, parse: Tree) -> Chart:
    """Chart holding only the compiled items of one parse.

    Unary chains may be cut between elementary trees anywhere, so every
    way of segmenting a chain is entered.
    """
    if parse.label != g.start:
        raise NotInGrammarError(f"root {parse.label!r} is not the start symbol")
    rules = _cfg_rules(g)
    for prod in parse.productions():
        if prod not in rules:
            raise NotInGrammarError(f"rule {prod[0]} -> {' '.join(prod[1])} "
                                    "is not in the grammar")
    words = parse.words()
    wg = WordGraph.linear(list(words))
    final, cat = _empty(g, wg.num_states)
    lexical = {}

    def add(lhs, rhs, i, j, word=None):
        rid = g.rule_index.get((lhs, rhs))
        if rid is None:
            return
        final[i, j, rid] = True
        cat[i, j, g.rule_cat[rid]] = True
        if word is not None:
            lexical[(i, j, rid)] = wg.transitions[i]

    def visit(node: Tree, i: int) -> int:
        chain = [node]
        while (len(node.children) == 1 and isinstance(node.children[0], Tree)
               and node.children[0].children):
            node = node.children[0]
            chain.append(node)
        labels = [x.label for x in chain]
        kids = node.children
        starts, syms = [], []
        end = i
        for c in kids:
            starts.append(end)
            if isinstance(c, str):
                if len(kids) > 1:
                    add(WRAP + c, (c,), end, end + 1, c)
                syms.append(WRAP + c)
                end += 1
            else:
                syms.append(c.label)
                end = visit(c, end)
        for a in range(len(chain)):
            for b in range(a, len(chain)):
                lhs = MERGE.join(labels[a:b + 1])
                if b < len(chain) - 1:
                    add(lhs, (labels[b + 1],), i, end)
                elif len(kids) == 1:
                    add(lhs, (kids[0],), i, i + 1, kids[0])
                elif len(kids) == 2:
                    add(lhs, tuple(syms), i, end)
                else:
                    cat0 = labels[a]
                    add(lhs, (syms[0], f"{cat0}{PRIME}2"), i, end)
                    m = len(kids)
                    for k in range(1, m - 1):
                        rhs2 = syms[k + 1] if k == m - 2 else f"{cat0}{PRIME}{k + 2}"
                        add(f"{cat0}{PRIME}{k + 1}", (syms[k], rhs2), starts[k], end)
        return end

    visit(parse, 0)
    return Chart(g, wg.num_states, final, cat, lexical, wg)


# ----------------------------------------------------------------------
# Viterbi for SCFGs

@dataclass
class ViterbiResult:
    parse: Tree
    logprob: float
    rules: tuple
    sentence: tuple


def scfg_viterbi(scfg: Scfg, inp: Union[Sequence[str], WordGraph]
                 ) -> Optional[ViterbiResult]:
    """Most probable parse of a sentence or word-graph under an SCFG.

    Rules of any length are handled by scoring rule suffixes, so no
    normal form is needed.  Exact ties go to the lexicographically
    smallest preorder sequence of rule ids.  Returns ``None`` when the
    input is not recognized.
    """
    wg = inp if isinstance(inp, WordGraph) else WordGraph.linear(list(inp))
    nts = scfg.nonterminals
    trans = {(t.src, t.dst, t.word): t for t in wg.transitions}
    if scfg.cfg.unary_cycle():
        raise ValueError("grammar has a unary cycle")
    unary = [r for r in scfg.rules if len(r.rhs) == 1 and r.rhs[0] in nts]
    others = [r for r in scfg.rules if not (len(r.rhs) == 1 and r.rhs[0] in nts)]
    unary = _unary_sorted(unary)
    rules = {r.id: r for r in scfg.rules}

    best: dict = {}   # (X, i, j) -> (score, rule id)
    suf: dict = {}    # (rule id, d, i, j) -> (score, split) for rhs[d:]
    seqs: dict = {}

    def sym_score(s, i, j):
        if s in nts:
            v = best.get((s, i, j))
            return None if v is None else v[0]
        t = trans.get((i, j, s))
        return None if t is None else math.log(t.prob)

    def sym_seq(s, i, j):
        return nt_seq(s, i, j) if s in nts else ()

    def nt_seq(x, i, j):
        key = ("n", x, i, j)
        if key not in seqs:
            r = rules[best[(x, i, j)][1]]
            seqs[key] = (r.id,) + suf_seq(r, 0, i, j)
        return seqs[key]

    def suf_seq(r, d, i, j):
        if d == len(r.rhs) - 1:
            return sym_seq(r.rhs[d], i, j)
        key = ("s", r.id, d, i, j)
        if key not in seqs:
            k = suf[(r.id, d, i, j)][1]
            seqs[key] = split_seq(r, d, i, k, j)
        return seqs[key]

    def split_seq(r, d, i, k, j):
        return sym_seq(r.rhs[d], i, k) + suf_seq(r, d + 1, k, j)

    def suffix(r, d, i, j):
        if d == len(r.rhs) - 1:
            return sym_score(r.rhs[d], i, j)
        key = (r.id, d, i, j)
        if key in suf:
            return suf[key][0]
        bestv, bestk = None, None
        for k in range(i + 1, j):
            a = sym_score(r.rhs[d], i, k)
            if a is None:
                continue
            b = suffix(r, d + 1, k, j)
            if b is None:
                continue
            v = a + b
            if bestv is None or v > bestv or (
                    v == bestv and split_seq(r, d, i, k, j)
                    < split_seq(r, d, i, bestk, j)):
                bestv, bestk = v, k
        suf[key] = (bestv, bestk)
        return bestv

    def offer(r, i, j, v):
        key = (r.lhs, i, j)
        cur = best.get(key)
        if cur is not None and v < cur[0]:
            return
        if cur is not None and v == cur[0]:
            if (r.id,) + suf_seq(r, 0, i, j) >= nt_seq(r.lhs, i, j):
                return
        best[key] = (v, r.id)
        seqs.pop(("n", r.lhs, i, j), None)

    m = wg.num_states
    for width in range(1, m):
        for i in range(m - width):
            j = i + width
            for r in others:
                if len(r.rhs) > width:
                    continue
                v = suffix(r, 0, i, j)
                if v is not None:
                    offer(r, i, j, v + r.logprob)
            for r in unary:
                v = sym_score(r.rhs[0], i, j)
                if v is not None:
                    offer(r, i, j, v + r.logprob)

    top = best.get((scfg.start, 0, wg.final))
    if top is None:
        return None

    def build_nt(x, i, j):
        r = rules[best[(x, i, j)][1]]
        return Tree(x, build_suffix(r, 0, i, j))

    def build_sym(s, i, j):
        return build_nt(s, i, j) if s in nts else s

    def build_suffix(r, d, i, j):
        if d == len(r.rhs) - 1:
            return [build_sym(r.rhs[d], i, j)]
        k = suf[(r.id, d, i, j)][1]
        return [build_sym(r.rhs[d], i, k)] + build_suffix(r, d + 1, k, j)

    parse = build_nt(scfg.start, 0, wg.final)
    return ViterbiResult(parse, top[0], nt_seq(scfg.start, 0, wg.final),
                         parse.words())


def _unary_sorted(unary: list) -> list:
    """Order unary rules so that every rule producing a category precedes
    the rules consuming it."""
    by_lhs: dict = {}
    for r in unary:
        by_lhs.setdefault(r.lhs, []).append(r)
    order: list = []
    done: set = set()

    def visit(x):
        if x in done:
            return
        done.add(x)
        for r in by_lhs.get(x, ()):
            visit(r.rhs[0])
        order.append(x)

    for x in sorted(by_lhs):
        visit(x)
    rank = {x: i for i, x in enumerate(order)}
    return sorted(unary, key=lambda r: (rank[r.lhs], r.id))
