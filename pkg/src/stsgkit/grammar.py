"""Stochastic grammars: SCFGs, STSGs and their projection from tree-banks."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .trees import (UNKNOWN, Cfg, ProjectionParams, Tree, Treebank,
                    TreebankError, _fragments, parse_bracketed,
                    preterminal_labels, unary_cycle, write_bracketed)

MARK_SUFFIX = "@"


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class ScfgRule:
    id: int
    lhs: str
    rhs: tuple
    logprob: float

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)


@dataclass
class Scfg:
    start: str
    rules: tuple
    nonterminals: frozenset
    terminals: frozenset

    @property
    def cfg(self) -> Cfg:
        return Cfg(self.start, self.nonterminals, self.terminals,
                   frozenset((r.lhs, r.rhs) for r in self.rules))


@dataclass(frozen=True)
class ElementaryTree:
    id: int
    tree: Tree
    logprob: float
    # (position, address) for every internal node, in preorder
    addresses: tuple = field(default=(), compare=False)

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)

    @property
    def root_address(self) -> int:
        return self.addresses[0][1]

    def address_of(self, pos) -> int:
        for p, a in self.addresses:
            if p == pos:
                return a
        raise KeyError(pos)


class Stsg:
    """A stochastic tree-substitution grammar.

    Elementary trees keep their list index as id.  Every internal node of
    every elementary tree gets a distinct integer address.
    """

    def __init__(self, start: str, trees: Iterable[tuple]):
        """``trees`` yields ``(Tree, logprob)`` pairs."""
        elems = []
        self._addr: list = []  # address -> (tree id, position)
        for tid, (tree, logprob) in enumerate(trees):
            if not tree.children:
                raise GrammarError(f"elementary tree {tid} has no rule")
            addrs = []
            for pos in tree.positions():
                addrs.append((pos, len(self._addr)))
                self._addr.append((tid, pos))
            elems.append(ElementaryTree(tid, tree, float(logprob),
                                        tuple(addrs)))
        if not elems:
            raise GrammarError("grammar has no elementary trees")
        self.start = start
        self.elems = tuple(elems)
        nts, terms = set(), set()
        for e in elems:
            nts |= e.tree.nonterminal_labels()
            terms |= set(e.tree.words())
        clash = nts & terms
        if clash:
            raise GrammarError("symbols of mixed kind: "
                               + ", ".join(sorted(clash)))
        self.nonterminals = frozenset(nts)
        self.terminals = frozenset(terms)
        self.by_root: dict = {}
        for e in elems:
            self.by_root.setdefault(e.tree.label, []).append(e.id)

    def __len__(self):
        return len(self.elems)

    @property
    def num_addresses(self) -> int:
        return len(self._addr)

    @property
    def has_unknown(self) -> bool:
        return UNKNOWN in self.terminals

    def locate(self, address: int) -> tuple:
        """``(tree id, position)`` of an address."""
        if not 0 <= address < len(self._addr):
            raise KeyError(address)
        return self._addr[address]

    def node(self, address: int) -> Tree:
        tid, pos = self.locate(address)
        return self.elems[tid].tree[pos]

    def is_root(self, address: int) -> bool:
        return self.locate(address)[1] == ()

    def underlying_cfg(self) -> Cfg:
        rules = set()
        for e in self.elems:
            rules.update(e.tree.productions())
        return Cfg(self.start, self.nonterminals, self.terminals,
                   frozenset(rules))

    def is_depth1(self) -> bool:
        return all(e.tree.depth() == 1 for e in self.elems)

    def duplicated(self, factor: int) -> "Stsg":
        """Copy every elementary tree ``factor`` times at 1/factor of its
        probability.  The string distribution is unchanged."""
        shift = math.log(factor)
        return Stsg(self.start, [(e.tree, e.logprob - shift)
                                 for e in self.elems for _ in range(factor)])


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # prob-sum | epsilon | unary-cycle | unreachable
    message: str


def validate_stsg(stsg: Stsg, tol: float = 1e-9) -> list:
    diags = []
    sums: dict = {}
    for e in stsg.elems:
        sums[e.tree.label] = sums.get(e.tree.label, 0.0) + e.prob
    for label in sorted(sums):
        if abs(sums[label] - 1.0) > tol:
            diags.append(Diagnostic(
                "prob-sum", f"root {label}: probabilities sum to {sums[label]!r}"))
    for e in stsg.elems:
        if any(w == "" for w in e.tree.words()):
            diags.append(Diagnostic("epsilon", f"tree {e.id} has an empty leaf"))
    cfg = stsg.underlying_cfg()
    cycle = cfg.unary_cycle()
    if cycle:
        diags.append(Diagnostic("unary-cycle", " -> ".join(cycle)))
    graph: dict = {}
    for lhs, rhs in cfg.rules:
        graph.setdefault(lhs, set()).update(
            s for s in rhs if s in stsg.nonterminals)
    seen = {stsg.start}
    todo = [stsg.start]
    while todo:
        for s in graph.get(todo.pop(), ()):
            if s not in seen:
                seen.add(s)
                todo.append(s)
    for s in sorted(stsg.nonterminals - seen):
        diags.append(Diagnostic("unreachable", f"nonterminal {s}"))
    return diags


def check_unary_cycles(stsg: Stsg) -> None:
    cycle = stsg.underlying_cfg().unary_cycle()
    if cycle:
        raise GrammarError("unary cycle: " + " -> ".join(cycle))


# ----------------------------------------------------------------------
# projection

def _normalize(start: str, counts: Counter) -> Stsg:
    totals: dict = {}
    for t, c in counts.items():
        totals[t.label] = totals.get(t.label, 0) + c
    return Stsg(start, [(t, math.log(c) - math.log(totals[t.label]))
                        for t, c in counts.items()])


def project_dop(tb: Treebank, params: ProjectionParams = ProjectionParams(),
                add_one_unknowns: bool = False) -> Stsg:
    """Relative-frequency STSG over all subtrees admitted by ``params``."""
    limit = params.max_depth if params.max_depth is not None else math.inf
    counts: Counter = Counter()
    for t in tb:
        for pos in t.positions():
            for frag, depth in _fragments(t[pos], max(limit, 1),
                                          lambda c: True):
                if params.admits(frag, depth):
                    counts[frag] += 1
    return _finish(tb, counts, add_one_unknowns)


def _finish(tb: Treebank, counts: Counter, add_one_unknowns: bool) -> Stsg:
    cycle = unary_cycle(counts)
    if cycle:
        raise TreebankError("unary cycle: " + " -> ".join(cycle))
    if add_one_unknowns:
        for t in counts:
            counts[t] += 1
        for pos in sorted(preterminal_labels(tb)):
            counts[Tree(pos, (UNKNOWN,))] += 1
    return _normalize(tb.start, counts)


@dataclass
class CutMarkedTreebank:
    """A tree-bank whose trees carry sets of marked (cut) node positions."""
    treebank: Treebank
    marks: list

    def __post_init__(self):
        if len(self.marks) != len(self.treebank):
            raise TreebankError("one mark set per tree required")
        self.marks = [frozenset(m) for m in self.marks]
        for k, (t, m) in enumerate(zip(self.treebank, self.marks)):
            if () not in m:
                raise TreebankError(f"tree {k}: root is not marked")
            internal = set(t.positions())
            bad = [p for p in m if p not in internal]
            if bad:
                raise TreebankError(f"tree {k}: marked leaf or missing node {bad[0]}")

    def cut(self, k: int) -> list:
        """The elementary units of tree ``k``: one per marked node."""
        t, m = self.treebank[k], self.marks[k]
        return [_cut_at(t[pos], pos, m) for pos in sorted(m)]


def _cut_at(node: Tree, pos: tuple, marks) -> Tree:
    kids = []
    for i, c in enumerate(node.children):
        if isinstance(c, str):
            kids.append(c)
        elif pos + (i,) in marks:
            kids.append(Tree(c.label))
        else:
            kids.append(_cut_at(c, pos + (i,), marks))
    return Tree(node.label, kids)


def _marked_fragments(node: Tree, pos: tuple, marks, depth_limit) -> list:
    """Fragments rooted at marked ``node`` cutting only at marked nodes.

    Depth is measured in marked nodes along a path (terminals count as one
    more step).  Returns (fragment, marked depth) pairs.
    """
    def expand(n: Tree, p: tuple, budget):
        # options for the children of an unmarked-or-root node n, with
        # depth measured relative to the fragment root
        options = []
        for i, c in enumerate(n.children):
            cp = p + (i,)
            if isinstance(c, str):
                options.append([(c, 1)])
            elif cp in marks:
                opts = [(Tree(c.label), 1)]
                if budget > 1:
                    opts.extend((f, d + 1) for f, d in expand_marked(c, cp, budget - 1))
                options.append(opts)
            else:
                options.append([(Tree(c.label, [x for x, _ in combo]),
                                 max(d for _, d in combo))
                                for combo in itertools.product(*expand(c, cp, budget))])
        return options

    def expand_marked(n, p, budget):
        return [(Tree(n.label, [x for x, _ in combo]), max(d for _, d in combo))
                for combo in itertools.product(*expand(n, p, budget))]

    return expand_marked(node, pos, depth_limit)


def project_sdop(mtb: CutMarkedTreebank,
                 params: ProjectionParams = ProjectionParams(),
                 add_one_unknowns: bool = False) -> Stsg:
    """Relative-frequency STSG over subtrees rooted at and cut only at
    marked nodes."""
    limit = params.max_depth if params.max_depth is not None else math.inf
    limit = max(limit, 1)
    counts: Counter = Counter()
    for k, t in enumerate(mtb.treebank):
        marks = mtb.marks[k]
        before = sum(counts.values())
        for pos in (p for p in t.positions() if p in marks):
            for frag, depth in _marked_fragments(t[pos], pos, marks, limit):
                if params.admits(frag, depth):
                    counts[frag] += 1
        if sum(counts.values()) == before:
            raise TreebankError(f"tree {k}: no extractable subtree")
    return _finish(mtb.treebank, counts, add_one_unknowns)


def scfg_of(stsg: Stsg) -> Scfg:
    rules = []
    for e in stsg.elems:
        if e.tree.depth() != 1:
            raise GrammarError(f"elementary tree {e.id} is deeper than one")
        rhs = tuple(c if isinstance(c, str) else c.label
                    for c in e.tree.children)
        rules.append(ScfgRule(e.id, e.tree.label, rhs, e.logprob))
    return Scfg(stsg.start, tuple(rules), stsg.nonterminals, stsg.terminals)


# ----------------------------------------------------------------------
# files

def write_stsg(stsg: Stsg, path, placeholder: bool = False) -> None:
    """Write the grammar file; ``placeholder`` writes 1.0 for every tree."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"STSG {stsg.start}\n")
        for e in stsg.elems:
            p = "1.0" if placeholder else repr(math.exp(e.logprob))
            f.write(f"{p}\t{write_bracketed(e.tree)}\n")


def read_stsg(path) -> Stsg:
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not body or not body[0].startswith("STSG "):
        raise GrammarError(f"{path}: missing 'STSG <start>' header")
    start = body[0].split(None, 1)[1].strip()
    trees = []
    for ln in body[1:]:
        prob, _, text = ln.partition("\t")
        p = float(prob)
        if not 0.0 < p <= 1.0:
            raise GrammarError(f"{path}: probability {prob} outside (0,1]")
        trees.append((parse_bracketed(text), math.log(p)))
    return Stsg(start, trees)


def parse_marked(text: str) -> tuple:
    """Read a tree whose marked nodes carry the label suffix ``@``."""
    raw = parse_bracketed(text)
    marks = set()

    def strip(node, pos):
        if isinstance(node, str):
            return node
        label = node.label
        if label.endswith(MARK_SUFFIX) and len(label) > 1:
            label = label[:-1]
            marks.add(pos)
        return Tree(label, [strip(c, pos + (i,))
                            for i, c in enumerate(node.children)])

    return strip(raw, ()), frozenset(marks)


def write_marked(tree: Tree, marks) -> str:
    def show(node, pos):
        if isinstance(node, str):
            return node
        label = node.label + (MARK_SUFFIX if pos in marks else "")
        if not node.children:
            return f"({label})"
        return "(" + label + " " + " ".join(
            show(c, pos + (i,)) for i, c in enumerate(node.children)) + ")"

    return show(tree, ())


def read_marked_treebank(path) -> CutMarkedTreebank:
    trees, marks = [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            t, m = parse_marked(s)
            trees.append(t)
            marks.append(m)
    return CutMarkedTreebank(Treebank(trees), marks)


def write_marked_treebank(mtb: CutMarkedTreebank, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t, m in zip(mtb.treebank, mtb.marks):
            f.write(write_marked(t, m) + "\n")
