"""Phase two: scoring STSG derivations over a recognition chart.

For every complete item and every compiled address ``c`` of its rule,
``DerivationForest`` stores the best (or summed) log-probability of the
partial derivations rooted at ``c`` over the item's span.  A child
position that is a substitution site is filled by the best root of the
right category over the child span, computed once per category and span;
an internal child position has exactly one viable address, found by direct
lookup.  Work per item is therefore linear in the number of addresses.

The naive variant instead tests every (parent address, child address)
pair for viability.  It is kept as a reference and for instrumentation.

Exact score ties are resolved towards the lexicographically smaller
sequence of elementary-tree ids (preorder); see ``DerivationForest``.

This module also holds the exponential oracles used to test the above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from .acnf import BINARY, TERMINAL, AcnfGrammar, reverse_decorated
from .chart import Chart, NotInGrammarError, WordGraph, tree_to_chart
from .grammar import Stsg
from .trees import UNKNOWN, Tree, parse_bracketed

NEG_INF = -math.inf


def _logadd(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@dataclass
class DecoratedTree:
    """A parse whose non-leaf nodes (by position) carry addresses."""
    parse: Tree
    decoration: dict

    def ids(self, stsg: Stsg) -> tuple:
        """Elementary-tree ids of the derivation, in preorder."""
        return tuple(stsg.locate(self.decoration[p])[0]
                     for p in self.parse.positions()
                     if stsg.is_root(self.decoration[p]))


@dataclass
class DerivationResult:
    parse: Tree
    derivation: tuple
    logprob: float
    sentence: tuple
    decorated: DecoratedTree = field(repr=False)

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)


def recognize_derivation_tree(stsg: Stsg, dt: DecoratedTree) -> bool:
    """Whether the decoration describes a derivation of ``stsg``."""
    tree, dec = dt.parse, dt.decoration
    if tree.label != stsg.start:
        return False
    try:
        if not stsg.is_root(dec[()]):
            return False
        for pos in tree.positions():
            node = tree[pos]
            c = dec[pos]
            enode = stsg.node(c)
            if enode.label != node.label or not enode.children:
                return False
            if len(enode.children) != len(node.children):
                return False
            for j, (child, echild) in enumerate(zip(node.children,
                                                    enode.children)):
                if isinstance(child, str):
                    if echild != child:
                        return False
                    continue
                if not child.children:
                    return False  # open site left in the parse
                c2 = dec[pos + (j,)]
                if isinstance(echild, str):
                    return False
                if echild.children:
                    # parenthood: c2 is the j-th child of c in the same tree
                    tid, epos = stsg.locate(c)
                    tid2, epos2 = stsg.locate(c2)
                    if tid2 != tid or epos2 != epos + (j,):
                        return False
                else:
                    # substitution: c2 is a root of the site's category
                    if not stsg.is_root(c2) or stsg.node(c2).label != echild.label:
                        return False
    except KeyError:
        return False
    return True


class DerivationForest:
    """Phase-two scores over a chart.

    ``mode`` is ``"max"`` (best derivation) or ``"sum"`` (total
    probability).  ``naive`` selects the pairwise viability reference.
    ``checks`` counts viability tests and root lookups.
    """

    def __init__(self, g: AcnfGrammar, chart: Chart, mode: str = "max",
                 naive: bool = False):
        if mode not in ("max", "sum"):
            raise ValueError(f"unknown mode {mode!r}")
        self.g = g
        self.chart = chart
        self.mode = mode
        self.naive = naive
        self.checks = 0
        self.pp: dict = {}      # span -> {address: score}
        self.back: dict = {}    # span -> {address: backpointer}
        self.roots: dict = {}   # span -> {category index: (score, address)}
        self.by_cat: dict = {}  # span -> {category index: [addresses]}
        self._seq: dict = {}
        self._compute()

    # ------------------------------------------------------------------
    def _compute(self):
        g, ch = self.g, self.chart
        rules, occ = g.rules, g.occurrences
        for span in ch.spans():
            i, j = span
            table, back, roots = {}, {}, {}
            self.pp[span], self.back[span], self.roots[span] = table, back, roots
            present = ch.final[i, j]
            for r in ch.final_rules(i, j):
                kind = rules[r].kind
                if kind == TERMINAL:
                    lt = math.log(ch.lexical[(i, j, r)].prob)
                    for c in occ[r]:
                        table[c] = lt + g.logpf[c]
                        back[c] = ()
                elif kind == BINARY:
                    self._binary(r, i, j, table, back)
            for c in table:
                if g.is_root[c]:
                    self._offer_root(roots, g.rule_cat[g.rule_of[c]], c,
                                     table[c], span)
            for r, a, b in g.unary:
                if present[r]:
                    self._unary(int(r), int(b), span, table, back, roots)
            cats: dict = {}
            for c in table:
                cats.setdefault(g.rule_cat[g.rule_of[c]], []).append(c)
            self.by_cat[span] = cats

    def _offer_root(self, roots, cat, c, v, span):
        self.checks += 1
        cur = roots.get(cat)
        if self.mode == "sum":
            roots[cat] = (v if cur is None else _logadd(cur[0], v), None)
        elif (cur is None or v > cur[0]
              or (v == cur[0] and self.seq(c, span) < self.seq(cur[1], span))):
            roots[cat] = (v, c)

    def _child(self, c, pos, site, cat, span):
        """Score and address filling child position ``pos`` of ``c``."""
        if self.naive:
            return self._naive_child(c, pos + 1, cat, span)
        self.checks += 1
        if site:
            entry = self.roots.get(span, {}).get(cat)
            return (None, None) if entry is None else entry
        c2 = self.g.child[c][pos]
        v = self.pp.get(span, {}).get(c2)
        return (None, None) if v is None else (v, c2)

    def _naive_child(self, c, j, cat, span):
        g = self.g
        best, arg = None, None
        table = self.pp.get(span, {})
        for c2 in self.by_cat.get(span, {}).get(cat, ()):
            self.checks += 1
            if not g.viable(c, c2, j):
                continue
            v = table[c2]
            if self.mode == "sum":
                best = v if best is None else _logadd(best, v)
            elif (best is None or v > best
                  or (v == best and self.seq(c2, span) < self.seq(arg, span))):
                best, arg = v, c2
        return best, arg

    def _binary(self, r, i, j, table, back):
        g, ch = self.g, self.chart
        rule = g.rules[r]
        bcat, ccat = g.cat_index[rule.rhs[0]], g.cat_index[rule.rhs[1]]
        splits = [k for k in range(i + 1, j)
                  if ch.cat[i, k, bcat] and ch.cat[k, j, ccat]]
        total = self.mode == "sum"
        for c in g.occurrences[r]:
            sites = g.site[c]
            best, arg = None, None
            for k in splits:
                lv, a1 = self._child(c, 0, sites[0], bcat, (i, k))
                if lv is None:
                    continue
                rv, a2 = self._child(c, 1, sites[1], ccat, (k, j))
                if rv is None:
                    continue
                v = lv + rv
                if total:
                    best = v if best is None else _logadd(best, v)
                elif best is None or v > best:
                    best, arg = v, (k, a1, a2)
                elif v == best:
                    if self._pair_seq(k, a1, a2, i, j) < self._pair_seq(*arg, i, j):
                        arg = (k, a1, a2)
            if best is not None:
                table[c] = best + g.logpf[c] if g.is_root[c] else best
                back[c] = arg

    def _unary(self, r, bcat, span, table, back, roots):
        g = self.g
        for c in g.occurrences[r]:
            if self.naive:
                # by_cat for this span is not final yet; build it lazily
                self.by_cat[span] = self._cats_now(table)
                v, a1 = self._naive_child(c, 1, bcat, span)
            else:
                self.checks += 1
                v, a1 = roots.get(bcat, (None, None))
            if v is None:
                continue
            table[c] = v + g.logpf[c] if g.is_root[c] else v
            back[c] = (a1,)
            if g.is_root[c]:
                self._offer_root(roots, g.rule_cat[r], c, table[c], span)

    def _cats_now(self, table):
        cats: dict = {}
        for c in table:
            cats.setdefault(self.g.rule_cat[self.g.rule_of[c]], []).append(c)
        return cats

    # ------------------------------------------------------------------
    def _pair_seq(self, k, a1, a2, i, j):
        return self.seq(a1, (i, k)) + self.seq(a2, (k, j))

    def seq(self, c, span) -> tuple:
        """Elementary-tree ids (preorder) of the stored derivation at c."""
        key = (c, span)
        s = self._seq.get(key)
        if s is None:
            b = self.back[span][c]
            i, j = span
            if len(b) == 3:
                k, a1, a2 = b
                s = self.seq(a1, (i, k)) + self.seq(a2, (k, j))
            elif len(b) == 1:
                s = self.seq(b[0], span)
            else:
                s = ()
            if self.g.is_root[c]:
                s = (self.g.tree_of[c],) + s
            self._seq[key] = s
        return s

    # ------------------------------------------------------------------
    def top(self) -> Optional[tuple]:
        """(score, address) of the best (or summed) start-rooted result."""
        cat = self.g.cat_index.get(self.g.start)
        span = (0, self.chart.n)
        if cat is None or span not in self.roots:
            return None
        return self.roots[span].get(cat)

    def best_derivation(self) -> Optional[DerivationResult]:
        if self.mode != "max":
            raise ValueError("derivations are only kept in max mode")
        top = self.top()
        if top is None:
            return None
        score, c = top
        g = self.g
        dec: dict = {}

        def build(c, i, j, pos):
            dec[pos] = c
            rule = g.rules[g.rule_of[c]]
            b = self.back[(i, j)][c]
            if rule.kind == TERMINAL:
                return Tree(rule.lhs, [self.chart.lexical[(i, j, rule.id)].word])
            if len(b) == 1:
                return Tree(rule.lhs, [build(b[0], i, j, pos + (0,))])
            k, a1, a2 = b
            return Tree(rule.lhs, [build(a1, i, k, pos + (0,)),
                                   build(a2, k, j, pos + (1,))])

        n = self.chart.n
        cnf = build(c, 0, n, ())
        tree, odec = reverse_decorated(g, cnf, dec)
        return DerivationResult(tree, self.seq(c, (0, n)), score,
                                tree.words(), DecoratedTree(tree, odec))


def mpd(g: AcnfGrammar, chart: Chart, naive: bool = False
        ) -> Optional[DerivationResult]:
    """Most probable derivation over the chart, or ``None``."""
    return DerivationForest(g, chart, "max", naive).best_derivation()


def mpid(g: AcnfGrammar, chart: Chart) -> Optional[DerivationResult]:
    """Most probable derivation jointly with a word-graph path.

    Transition probabilities enter at terminal items, so this is the same
    computation as :func:`mpd` on a word-graph chart.
    """
    return mpd(g, chart)


def input_probability(g: AcnfGrammar, chart: Chart) -> float:
    """Log of the total probability of all derivations over the chart."""
    top = DerivationForest(g, chart, "sum").top()
    return NEG_INF if top is None else top[0]


def parse_probability(g: AcnfGrammar, parse: Tree) -> float:
    """Log of the total probability of the derivations yielding ``parse``."""
    try:
        chart = tree_to_chart(g, parse)
    except NotInGrammarError:
        return NEG_INF
    return input_probability(g, chart)


def count_checks(g: AcnfGrammar, chart: Chart, naive: bool = False) -> int:
    """Viability checks spent by the phase-two maximization."""
    return DerivationForest(g, chart, "max", naive).checks


# ----------------------------------------------------------------------
# oracles

class OracleLimitError(RuntimeError):
    """Input too long or too many derivations for exhaustive enumeration."""


@dataclass
class OracleDerivation:
    tree: DecoratedTree
    prob: object  # float, or Fraction when exact weights are given
    ids: tuple
    sentence: tuple
    path: tuple


class _Partial:
    __slots__ = ("tid", "parts", "end", "length")

    def __init__(self, tid, parts, end, length):
        self.tid = tid
        self.parts = parts  # Transition or _Partial, in frontier order
        self.end = end
        self.length = length


def enumerate_derivations(stsg: Stsg, inp: Union[Sequence[str], WordGraph],
                          max_length: int = 7, cap: int = 100_000,
                          weights: Optional[Mapping[int, object]] = None,
                          build: bool = True) -> list:
    """Every derivation of the input, by exhaustive leftmost substitution.

    ``weights`` maps tree ids to exact probabilities (e.g. ``Fraction``);
    transition probabilities are then converted exactly as well.
    ``build=False`` skips composing decorated trees.
    """
    wg = inp if isinstance(inp, WordGraph) else WordGraph.linear(list(inp))
    if wg.num_states - 1 > max_length:
        raise OracleLimitError(f"input has {wg.num_states - 1} steps, "
                               f"limit is {max_length}")
    frontiers = []
    for e in stsg.elems:
        frontiers.append([("t", x) if isinstance(x, str) else ("s", x.label)
                          for x in e.tree.leaves()])
    unk = stsg.has_unknown
    out_edges = [[(t, UNKNOWN if unk and t.word not in stsg.terminals
                   else t.word) for t in wg.out[s]]
                 for s in range(wg.num_states)]
    memo: dict = {}

    def derive(label, s, budget) -> list:
        key = (label, s, budget)
        res = memo.get(key)
        if res is not None:
            return res
        res = []
        memo[key] = res
        for tid in stsg.by_root.get(label, ()):
            fr = frontiers[tid]
            if len(fr) > budget:
                continue
            for end, parts, length in match(fr, 0, s, budget):
                res.append(_Partial(tid, parts, end, length))
                if len(res) > cap:
                    raise OracleLimitError(f"more than {cap} derivations")
        return res

    def match(fr, idx, s, budget):
        if idx == len(fr):
            yield s, (), 0
            return
        kind, sym = fr[idx]
        rest = len(fr) - idx - 1
        if kind == "t":
            if budget - 1 < rest:
                return
            for t, w in out_edges[s]:
                if w == sym:
                    for end, parts, n in match(fr, idx + 1, t.dst, budget - 1):
                        yield end, (t,) + parts, n + 1
        else:
            for sub in derive(sym, s, budget - rest):
                for end, parts, n in match(fr, idx + 1, sub.end,
                                           budget - sub.length):
                    yield end, (sub,) + parts, n + sub.length

    top = [p for p in derive(stsg.start, 0, wg.num_states - 1)
           if p.end == wg.final]
    if len(top) > cap:
        raise OracleLimitError(f"more than {cap} derivations")
    exact = weights is not None
    probs = weights if exact else {e.id: e.prob for e in stsg.elems}
    return [_finish(stsg, p, probs, exact, build) for p in top]


def _finish(stsg, partial, probs, exact, build):
    ids, path = [], []
    prob = Fraction(1) if exact else 1.0

    def walk(p):
        nonlocal prob
        ids.append(p.tid)
        prob = prob * probs[p.tid]
        for x in p.parts:
            if isinstance(x, _Partial):
                walk(x)
            else:
                path.append(x)
                prob = prob * (Fraction(x.prob) if exact else x.prob)

    walk(partial)
    tree = None
    if build:
        dec: dict = {}

        def compose(p, pos):
            e = stsg.elems[p.tid]
            addr = dict(e.addresses)
            it = iter(p.parts)

            def fill(node, epos, opos):
                dec[opos] = addr[epos]
                kids = []
                for i, c in enumerate(node.children):
                    if isinstance(c, str):
                        kids.append(next(it).word)
                    elif c.children:
                        kids.append(fill(c, epos + (i,), opos + (i,)))
                    else:
                        kids.append(compose(next(it), opos + (i,)))
                return Tree(node.label, kids)

            return fill(e.tree, (), pos)

        tree = DecoratedTree(compose(partial, ()), dec)
    return OracleDerivation(tree, prob, tuple(ids),
                            tuple(t.word for t in path), tuple(path))


def string_language(frontiers_by_root: Mapping[str, Sequence[tuple]],
                    start: str, max_len: int, is_site) -> set:
    """Strings of length <= ``max_len`` derivable from ``start``.

    ``frontiers_by_root`` maps a category to the frontiers of its trees;
    ``is_site(symbol)`` tells sites from terminals.  Every site derives at
    least one word.
    """
    memo: dict = {}

    def lang(cat, budget):
        key = (cat, budget)
        if key in memo:
            return memo[key]
        out = set()
        for fr in frontiers_by_root.get(cat, ()):
            if len(fr) > budget:
                continue
            partial = {()}
            for idx, sym in enumerate(fr):
                rest = len(fr) - idx - 1
                nxt = set()
                for pre in partial:
                    room = budget - len(pre) - rest
                    if is_site(sym):
                        for s in lang(sym, room):
                            nxt.add(pre + s)
                    elif room >= 1:
                        nxt.add(pre + (sym,))
                partial = nxt
            out |= partial
        memo[key] = out
        return out

    return lang(start, max_len)


def stsg_language(stsg: Stsg, max_len: int) -> set:
    by_root: dict = {}
    for e in stsg.elems:
        by_root.setdefault(e.tree.label, []).append(e.tree.frontier())
    return string_language(by_root, stsg.start, max_len,
                           lambda s: s in stsg.nonterminals)


def brute_mpp_mps(stsg: Stsg, wg: WordGraph, max_length: int = 7,
                  cap: int = 100_000, weights=None):
    """(best parse, its prob, best sentence, its prob) by enumeration.

    Ties go to the smaller bracketed string and the smaller word tuple.
    Returns ``None`` when nothing is derivable.
    """
    derivs = enumerate_derivations(stsg, wg, max_length, cap, weights)
    if not derivs:
        return None
    by_parse: dict = {}
    by_sent: dict = {}
    for d in derivs:
        key = str(d.tree.parse)
        by_parse[key] = by_parse.get(key, 0) + d.prob
        by_sent[d.sentence] = by_sent.get(d.sentence, 0) + d.prob
    parse = min(by_parse, key=lambda k: (-by_parse[k], k))
    sent = min(by_sent, key=lambda k: (-by_sent[k], k))
    return parse_bracketed(parse), by_parse[parse], sent, by_sent[sent]
