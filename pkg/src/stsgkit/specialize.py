"""Grammar specialization by learning where to cut tree-bank trees.

The learner repeatedly looks at the frontiers of the current, partially
reduced trees.  A sequence of nonterminals that shows up as the frontier
of a node is a candidate.  Candidates are scored; a node is cut (marked)
when its frontier scores strictly higher than every frontier found above
or below it, and marked subtrees are then reduced to their roots.  After
the last iteration the tree roots are marked and what is left of every
tree joins the grammar.

The first iteration is special: it cuts every preterminal, so later
frontiers consist of part-of-speech symbols rather than words.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .acnf import AcnfGrammar
from .chart import WordGraph, build_chart
from .disambig import DerivationForest, DerivationResult, mpd
from .grammar import CutMarkedTreebank, Stsg
from .trees import Tree, Treebank

WILD = "*"
EDGE = "#"


@dataclass(frozen=True)
class LearnerConfig:
    delta: float = 0.95
    phi: int = 5
    max_ssf_len: int = 8
    coverage_upper_bound: Optional[float] = None
    use_backoff: bool = False
    use_eqclass: bool = False

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.phi < 1:
            raise ValueError("phi must be at least 1")
        if self.max_ssf_len < 1:
            raise ValueError("max_ssf_len must be at least 1")


@dataclass
class SsfStats:
    freq_total: int = 0
    freq_c: int = 0
    # sum over constituent occurrences of (frontier length - 1)
    reduction: int = 0
    ambiguity_set: Counter = field(default_factory=Counter)
    # (left context, right context) -> [occurrences, constituent occurrences]
    contexts: dict = field(default_factory=dict)
    length: int = 0

    @property
    def cp(self) -> float:
        return self.freq_c / self.freq_total if self.freq_total else 0.0

    @property
    def asd(self) -> dict:
        return {t: n / self.freq_c for t, n in self.ambiguity_set.items()}


@dataclass(frozen=True)
class LearnedSsf:
    iteration: int
    key: tuple
    freq_c: int
    freq_total: int
    cp: float
    measure: float


def grf_measure(key, stats: SsfStats, cfg: LearnerConfig) -> float:
    """Reduction factor times constituent frequency, gated by CP and Φ."""
    if stats.cp <= cfg.delta or stats.freq_c < cfg.phi:
        return 0.0
    return float(stats.reduction)


def _generalizations(ctx: tuple):
    for mask in itertools.product((False, True), repeat=4):
        yield tuple(WILD if m else s for m, s in zip(mask, ctx))


def _more_general(a: tuple, b: tuple) -> bool:
    """a generalizes b (strictly)."""
    return a != b and all(x == WILD or x == y for x, y in zip(a, b))


def backoff_measure(key, stats: SsfStats, cfg: LearnerConfig) -> float:
    """Sum of context-restricted measures over the most general viable
    contexts.

    A context is two symbols left and two right of an occurrence, each
    possibly a wildcard.  It is viable when the constituent frequency in
    that context reaches Φ and the constituent ratio exceeds δ.
    """
    rf = max(stats.length - 1, 0)
    agg: dict = {}
    for (lc, rc), (total, const) in stats.contexts.items():
        for gen in _generalizations(lc + rc):
            cell = agg.setdefault(gen, [0, 0])
            cell[0] += total
            cell[1] += const
    viable = [g for g, (total, const) in agg.items()
              if const >= cfg.phi and total and const / total > cfg.delta]
    best = [g for g in viable
            if not any(_more_general(h, g) for h in viable)]
    if stats.length == 0:
        # equivalence classes mix lengths; fall back to the mean reduction
        rf = stats.reduction / stats.freq_c if stats.freq_c else 0
    return float(sum(rf * agg[g][1] for g in best))


def osr_key(subtree: Tree) -> tuple:
    """Equivalence-class key: the innermost bracketing of the frontier with
    repeated symbols inside each bracket collapsed."""
    def brackets(node):
        if isinstance(node, str) or not node.children:
            return [(node if isinstance(node, str) else node.label,)]
        kids = node.children
        if all(isinstance(c, str) or not c.children for c in kids):
            return [tuple(c if isinstance(c, str) else c.label for c in kids)]
        out = []
        for c in kids:
            out.extend(brackets(c))
        return out

    collapsed = tuple(tuple(k for k, _ in itertools.groupby(b))
                      for b in brackets(subtree))
    return ("osr",) + collapsed


# ----------------------------------------------------------------------
# the learner

class _View:
    """A tree reduced at its marked nodes."""

    def __init__(self, tree: Tree):
        self.tree = tree
        self.marks: set = set()
        self.internal = len(tree.positions())

    def subtree(self, pos: tuple) -> Tree:
        node = self.tree[pos]
        kids = []
        for i, c in enumerate(node.children):
            cp = pos + (i,)
            if isinstance(c, str):
                kids.append(c)
            elif cp in self.marks:
                kids.append(Tree(c.label))
            else:
                kids.append(self.subtree(cp))
        return Tree(node.label, kids)

    def nodes(self):
        """(position, frontier start, frontier, is-topmost) for every
        internal node of the current view, depth-first."""
        if () in self.marks:
            return []
        out = []

        def walk(pos, start, topmost):
            node = self.tree[pos]
            frontier = []
            entry = [pos, start, None, topmost]
            out.append(entry)
            single = len(node.children) == 1
            for i, c in enumerate(node.children):
                cp = pos + (i,)
                if isinstance(c, str):
                    frontier.append(c)
                elif cp in self.marks:
                    frontier.append(Tree(c.label))
                else:
                    frontier.extend(walk(cp, start + len(frontier), not single))
            entry[2] = tuple(frontier)
            return frontier

        walk((), 0, True)
        return [tuple(e) for e in out]

    def nodes_all(self):
        """Like ``nodes`` but looks through marks: every internal node of the
        original tree, with its frontier cut at marked descendants."""
        out = []

        def walk(pos, start, topmost):
            node = self.tree[pos]
            frontier = []
            for i, c in enumerate(node.children):
                cp = pos + (i,)
                if isinstance(c, str):
                    frontier.append(c)
                elif cp in self.marks:
                    frontier.append(Tree(c.label))
                    walk(cp, start + len(frontier) - 1, True)
                else:
                    frontier.extend(walk(cp, start + len(frontier),
                                         len(node.children) > 1))
            out.append((pos, start, tuple(frontier), topmost))
            return frontier

        walk((), 0, True)
        return out

    def reduced(self) -> int:
        """Internal nodes no longer internal in the current view."""
        return self.internal - len(self.nodes())


def _ssf(frontier: tuple, max_len: int) -> Optional[tuple]:
    if len(frontier) > max_len or any(isinstance(x, str) for x in frontier):
        return None
    return tuple(x.label for x in frontier)


@dataclass
class Specialization:
    marked: CutMarkedTreebank
    tsg: Stsg
    learned: list
    iterations: int


def ssf_pass(views: Sequence[_View], cfg: LearnerConfig):
    """Statistics of the frontier sequences of the current views.

    Returns ``(stats, candidates)``; ``candidates[k]`` lists
    ``(position, start, flat key, concept key)`` for tree ``k``.
    """
    stats: dict = {}
    candidates = []
    for view in views:
        cands = []
        for pos, start, frontier, topmost in view.nodes():
            if not topmost:
                continue
            flat = _ssf(frontier, cfg.max_ssf_len)
            if flat is None:
                continue
            sub = view.subtree(pos)
            concept = osr_key(sub) if cfg.use_eqclass else flat
            st = stats.setdefault(concept, SsfStats())
            st.length = len(flat) if not cfg.use_eqclass else 0
            st.freq_c += 1
            st.reduction += len(flat) - 1
            st.ambiguity_set[sub] += 1
            cands.append((pos, start, flat, concept))
        candidates.append(cands)

    flats: dict = {}
    for cands in candidates:
        for _, _, flat, concept in cands:
            flats.setdefault(flat, set()).add(concept)
    for k, view in enumerate(views):
        nodes = view.nodes()
        if not nodes:
            continue
        top = tuple(x if isinstance(x, str) else x.label for x in nodes[0][2])
        const = {(start, len(flat)): concept
                 for _, start, flat, concept in candidates[k]}
        for n in range(1, min(cfg.max_ssf_len, len(top)) + 1):
            for s in range(len(top) - n + 1):
                seq = top[s:s + n]
                concepts = flats.get(seq)
                if not concepts:
                    continue
                lc = tuple(top[max(0, s - 2):s])
                lc = (EDGE,) * (2 - len(lc)) + lc
                rc = tuple(top[s + n:s + n + 2])
                rc = rc + (EDGE,) * (2 - len(rc))
                here = const.get((s, n))
                for concept in concepts:
                    st = stats[concept]
                    st.freq_total += 1
                    cell = st.contexts.setdefault((lc, rc), [0, 0])
                    cell[0] += 1
                    if here == concept:
                        cell[1] += 1
    return stats, candidates


def sequential_cover(tb: Treebank, cfg: LearnerConfig = LearnerConfig()
                     ) -> Specialization:
    views = [_View(t) for t in tb]
    total = sum(v.internal for v in views)
    measure = backoff_measure if cfg.use_backoff else grf_measure
    learned_trees: Counter = Counter()
    lexical: list = []
    log: list = []

    def covered() -> bool:
        if cfg.coverage_upper_bound is None:
            return False
        done = sum(v.reduced() for v in views)
        return done >= cfg.coverage_upper_bound * total

    iteration = 0
    while not covered():
        if iteration == 0:
            for v in views:
                for pos in v.tree.positions():
                    node = v.tree[pos]
                    if node.is_preterminal and pos != ():
                        v.marks.add(pos)
                        lexical.append(node)
            iteration = 1
            continue
        stats, candidates = ssf_pass(views, cfg)
        scores = {key: measure(key, st, cfg) for key, st in stats.items()}
        rivals: dict = {key: set() for key in stats}
        for cands in candidates:
            for a, b in itertools.combinations(cands, 2):
                pa, pb = a[0], b[0]
                if pb[:len(pa)] == pa or pa[:len(pb)] == pb:
                    if a[3] != b[3]:
                        rivals[a[3]].add(b[3])
                        rivals[b[3]].add(a[3])
        winners = {key for key, m in scores.items()
                   if m > 0 and all(m > scores[r] for r in rivals[key])}
        if not winners:
            break
        for key in sorted(winners, key=str):
            st = stats[key]
            log.append(LearnedSsf(iteration, key, st.freq_c, st.freq_total,
                                  st.cp, scores[key]))
        for view, cands in zip(views, candidates):
            marked: list = []
            for pos, _, _, concept in cands:  # depth-first order
                if concept in winners and not any(
                        pos[:len(m)] == m for m in marked):
                    marked.append(pos)
            for pos in marked:
                learned_trees[view.subtree(pos)] += 1
            view.marks.update(marked)
        iteration += 1

    residue = []
    for v in views:
        if () not in v.marks:
            residue.append(v.subtree(()))
    marks = [frozenset(v.marks | {()}) for v in views]
    mtb = CutMarkedTreebank(tb, marks)
    elems = list(dict.fromkeys(lexical + list(learned_trees) + residue))
    return Specialization(mtb, Stsg(tb.start, [(t, 0.0) for t in elems]),
                          log, iteration)


def complete_ambiguity_sets(mtb: CutMarkedTreebank) -> list:
    """Subtrees at unmarked nodes whose frontier is also realized at marked
    nodes elsewhere."""
    realized: dict = {}
    for k, t in enumerate(mtb.treebank):
        marks = mtb.marks[k]
        view = _View(t)
        view.marks = set(marks) - {()}
        for pos, _, frontier, topmost in view.nodes_all():
            if not topmost or any(isinstance(x, str) for x in frontier):
                continue
            key = tuple(x.label for x in frontier)
            entry = realized.setdefault(key, ([], []))
            (entry[0] if pos in marks else entry[1]).append(
                (k, pos, view))
    extra: list = []
    for key, (marked, unmarked) in realized.items():
        if marked and unmarked:
            for k, pos, view in unmarked:
                extra.append(view.subtree(pos))
    return list(dict.fromkeys(extra))


def specialized_grammar(spec: Specialization, completion: bool = True) -> Stsg:
    """The learned TSG, optionally extended by ambiguity-set completion."""
    elems = [e.tree for e in spec.tsg.elems]
    if completion:
        elems.extend(complete_ambiguity_sets(spec.marked))
    elems = list(dict.fromkeys(elems))
    return Stsg(spec.tsg.start, [(t, 0.0) for t in elems])


# ----------------------------------------------------------------------
# integrated parsing

@dataclass
class IntegratedParse:
    complete: np.ndarray
    dispatch: str  # "sdop", "dop" or "noparse"
    result: Optional[DerivationResult]
    chart: object
    fallback: bool = False


def integrated_parse(spec_tsg: AcnfGrammar, full: AcnfGrammar,
                     inp: Union[Sequence[str], WordGraph],
                     sdop: Optional[AcnfGrammar] = None) -> IntegratedParse:
    """Parse with the specialized TSG first, then fill the gaps with the
    full grammar.

    Spans covered by a specialized-TSG derivation are *complete*.  Over
    complete spans the full grammar may only build items of the
    categories the specialized parse found there.  If the whole input is
    complete and an SDOP grammar is given, it disambiguates; otherwise the
    full grammar does.  Should the restriction ever block every parse, the
    unrestricted full chart is used and ``fallback`` is set.
    """
    wg = inp if isinstance(inp, WordGraph) else WordGraph.linear(list(inp))
    chart_a = build_chart(spec_tsg, wg)
    forest = DerivationForest(spec_tsg, chart_a, "sum")
    n = wg.num_states
    complete = np.zeros((n, n), dtype=np.bool_)
    allowed = np.ones((n, n, len(full.categories)), dtype=np.bool_)
    internal = np.array([c in full.fresh or c in full.wrappers
                         for c in full.categories], dtype=np.bool_)
    for (i, j), table in forest.pp.items():
        labels = set()
        for c in table:
            if spec_tsg.is_root[c]:
                complete[i, j] = True
            node_labels = spec_tsg.rules[spec_tsg.rule_of[c]].lhs
            if node_labels not in spec_tsg.fresh and node_labels not in spec_tsg.wrappers:
                labels.update(node_labels.split("|"))
        if complete[i, j]:
            mask = internal.copy()
            for lab in labels:
                idx = full.cat_index.get(lab)
                if idx is not None:
                    mask[idx] = True
            allowed[i, j] = mask

    start_cat = spec_tsg.cat_index.get(spec_tsg.start)
    whole = forest.roots.get((0, n - 1), {}).get(start_cat) is not None
    if whole and sdop is not None:
        res = mpd(sdop, build_chart(sdop, wg))
        if res is not None:
            return IntegratedParse(complete, "sdop", res, chart_a)
    chart_b = build_chart(full, wg, allowed=allowed)
    res = mpd(full, chart_b)
    fallback = False
    if res is None:
        chart_full = build_chart(full, wg)
        if chart_full.recognized:
            fallback = True
            chart_b = chart_full
            res = mpd(full, chart_full)
    return IntegratedParse(complete, "dop" if res is not None else "noparse",
                           res, chart_b, fallback)
