"""Compile an STSG to an approximate Chomsky normal form.

Each elementary tree is reshaped on its own, so the rules of the compiled
grammar are shared between trees while node addresses stay distinct.  Three
steps are applied per tree:

* internal unary chains are merged into one node labelled ``X|Y``;
* terminals that have siblings are wrapped in a fresh preterminal ``X_a``;
* nodes with ``m > 2`` children are right-linearized with ``m - 2`` fresh
  nodes labelled ``A′k``, where ``k`` is the index of the first child the
  fresh node covers.

A unary node whose child is a substitution site cannot be absorbed inside
its elementary tree, so it survives as a unary rule.

The category of a compiled label is the text before the first ``|``; it is
what substitution sites and parent rules refer to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grammar import GrammarError, Stsg, check_unary_cycles
from .trees import Tree, find_cycle

MERGE = "|"
PRIME = "′"
WRAP = "X_"

TERMINAL, BINARY, UNARY = "terminal", "binary", "unary"


class AcnfError(ValueError):
    pass


def category(label: str) -> str:
    return label.split(MERGE, 1)[0]


@dataclass(frozen=True)
class CnfRule:
    id: int
    lhs: str
    rhs: tuple  # categories, or one terminal word for TERMINAL rules
    kind: str


class _Node:
    __slots__ = ("label", "orig", "kids", "address")

    def __init__(self, label, orig, kids):
        self.label = label
        self.orig = orig  # tuple of original addresses, () if inserted
        self.kids = kids  # _Node | ("site", label) | ("term", word)
        self.address = -1


class AcnfGrammar:
    """The compiled grammar: CNF rules plus per-address bookkeeping.

    Lists indexed by compiled address ``c``: ``rule_of``, ``tree_of``,
    ``is_root``, ``child`` (addresses of internal children, -1 where
    none), ``site`` (whether each child position is a substitution site),
    ``logpf``, ``logpt`` and ``orig`` (original addresses merged into c).
    """

    def __init__(self, stsg: Stsg):
        self.stsg = stsg
        self.start = stsg.start
        self.terminals = stsg.terminals
        self.has_unknown = stsg.has_unknown
        for s in stsg.nonterminals:
            if MERGE in s or PRIME in s:
                raise AcnfError(f"nonterminal {s!r} uses a reserved character")
        for w in stsg.terminals:
            if WRAP + w in stsg.nonterminals:
                raise AcnfError(f"nonterminal {WRAP + w!r} collides with a "
                                "terminal wrapper")
        try:
            check_unary_cycles(stsg)
        except GrammarError as e:
            raise AcnfError(str(e)) from None

        self.fresh: set = set()
        self.wrappers: dict = {}
        self.rules: list = []
        self.rule_index: dict = {}
        self.occurrences: list = []
        self.rule_of: list = []
        self.tree_of: list = []
        self.is_root: list = []
        self.child: list = []
        self.site: list = []
        self.logpf: list = []
        self.logpt: list = []
        self.orig: list = []
        self.cnf_trees: list = []

        for e in stsg.elems:
            root = self._shape(e.tree, (), dict(e.addresses))
            self._register(root, e.id, e.logprob, True)
            self.cnf_trees.append(_to_tree(root))

        cats = sorted({category(r.lhs) for r in self.rules}
                      | {s for r in self.rules if r.kind != TERMINAL
                         for s in r.rhs})
        self.categories = cats
        self.cat_index = {c: i for i, c in enumerate(cats)}
        self.rule_cat = np.array([self.cat_index[category(r.lhs)]
                                  for r in self.rules], dtype=np.int64)
        self.lexicon: dict = {}
        for r in self.rules:
            if r.kind == TERMINAL:
                self.lexicon.setdefault(r.rhs[0], []).append(r.id)
        self.binary = np.array(
            [(r.id, self.cat_index[category(r.lhs)], self.cat_index[r.rhs[0]],
              self.cat_index[r.rhs[1]])
             for r in self.rules if r.kind == BINARY],
            dtype=np.int64).reshape(-1, 4)
        self.unary = np.array(self._unary_order(), dtype=np.int64).reshape(-1, 3)
        self.roots_of_rule = [[c for c in occ if self.is_root[c]]
                              for occ in self.occurrences]

    # construction -----------------------------------------------------
    def _shape(self, node: Tree, pos: tuple, addr: dict) -> _Node:
        labels, orig = [node.label], [addr[pos]]
        while (len(node.children) == 1 and isinstance(node.children[0], Tree)
               and node.children[0].children):
            node = node.children[0]
            pos = pos + (0,)
            labels.append(node.label)
            orig.append(addr[pos])
        label = MERGE.join(labels)
        orig = tuple(orig)
        kids_src = node.children
        if len(kids_src) == 1:
            c = kids_src[0]
            kid = ("term", c) if isinstance(c, str) else ("site", c.label)
            return _Node(label, orig, [kid])
        kids = []
        for i, c in enumerate(kids_src):
            if isinstance(c, str):
                w = WRAP + c
                self.wrappers[w] = c
                kids.append(_Node(w, (), [("term", c)]))
            elif not c.children:
                kids.append(("site", c.label))
            else:
                kids.append(self._shape(c, pos + (i,), addr))
        m = len(kids)
        if m > 2:
            cat = category(label)
            tail = kids[-1]
            for k in range(m - 2, 0, -1):
                fresh = f"{cat}{PRIME}{k + 1}"
                self.fresh.add(fresh)
                tail = _Node(fresh, (), [kids[k], tail])
            kids = [kids[0], tail]
        return _Node(label, orig, kids)

    def _rule_for(self, node: _Node) -> int:
        if len(node.kids) == 1 and isinstance(node.kids[0], tuple) \
                and node.kids[0][0] == "term":
            rhs, kind = (node.kids[0][1],), TERMINAL
        else:
            rhs = tuple(k[1] if isinstance(k, tuple) else category(k.label)
                        for k in node.kids)
            kind = BINARY if len(rhs) == 2 else UNARY
        key = (node.label, rhs)
        rid = self.rule_index.get(key)
        if rid is None:
            rid = len(self.rules)
            self.rule_index[key] = rid
            self.rules.append(CnfRule(rid, node.label, rhs, kind))
            self.occurrences.append([])
        return rid

    def _register(self, node: _Node, tid: int, logpt: float, root: bool):
        c = len(self.rule_of)
        node.address = c
        rid = self._rule_for(node)
        self.occurrences[rid].append(c)
        self.rule_of.append(rid)
        self.tree_of.append(tid)
        self.is_root.append(root)
        self.logpf.append(logpt if root else 0.0)
        self.logpt.append(logpt)
        self.orig.append(node.orig)
        self.child.append(None)
        self.site.append(None)
        kids, sites = [], []
        for k in node.kids:
            if isinstance(k, tuple):
                kids.append(-1)
                sites.append(k[0] == "site")
            else:
                kids.append(self._register(k, tid, logpt, False))
                sites.append(False)
        self.child[c] = tuple(kids)
        self.site[c] = tuple(sites)
        return c

    def _unary_order(self) -> list:
        """Unary rules ordered so a rule comes after every unary rule that
        produces its child category."""
        unary = [r for r in self.rules if r.kind == UNARY]
        graph: dict = {}
        for r in unary:
            graph.setdefault(category(r.lhs), set()).add(r.rhs[0])
        if find_cycle(graph):
            raise AcnfError("unary cycle among compiled rules")
        order: list = []
        done: set = set()

        def visit(cat):
            if cat in done:
                return
            done.add(cat)
            for r in unary:
                if category(r.lhs) == cat:
                    visit(r.rhs[0])
            order.append(cat)

        for cat in sorted(graph):
            visit(cat)
        rank = {c: i for i, c in enumerate(order)}
        unary.sort(key=lambda r: (rank[category(r.lhs)], r.id))
        return [(r.id, self.cat_index[category(r.lhs)],
                 self.cat_index[r.rhs[0]]) for r in unary]

    # predicates ---------------------------------------------------------
    @property
    def num_addresses(self) -> int:
        return len(self.rule_of)

    def parent(self, c: int, c2: int, j: int) -> bool:
        """c2 is the j-th child (1-based) of c inside one elementary tree."""
        kids = self.child[c]
        return j <= len(kids) and kids[j - 1] == c2 and c2 >= 0

    def subsite(self, c: int, j: int) -> bool:
        sites = self.site[c]
        return j <= len(sites) and sites[j - 1]

    def viable(self, c: int, c2: int, j: int) -> bool:
        return self.parent(c, c2, j) or (self.subsite(c, j) and self.is_root[c2])

    def edge_logprob(self, c: int, c2: int, j: int) -> float:
        """Log of the probability of combining c with child address c2 at
        position j.  The elementary-tree probability is charged on the
        last child of a root node."""
        if not self.viable(c, c2, j):
            return -math.inf
        if self.is_root[c] and j == len(self.child[c]):
            return self.logpt[c]
        return 0.0

    def rule_count(self, kind: Optional[str] = None) -> int:
        return sum(1 for r in self.rules if kind is None or r.kind == kind)

    def dump(self) -> str:
        lines = []
        for r in self.rules:
            rhs = " ".join(r.rhs)
            lines.append(f"{len(self.occurrences[r.id]):6d}  {r.lhs} -> {rhs}")
        return "\n".join(lines)


def to_acnf(stsg: Stsg) -> AcnfGrammar:
    return AcnfGrammar(stsg)


def _to_tree(node: _Node) -> Tree:
    kids = []
    for k in node.kids:
        if isinstance(k, tuple):
            kids.append(k[1] if k[0] == "term" else Tree(k[1]))
        else:
            kids.append(_to_tree(k))
    return Tree(node.label, kids)


def _reverse(g: AcnfGrammar, node, pos_addr, out_dec):
    """Return the list of original nodes for compiled ``node``.

    With ``pos_addr`` given (a callable node -> address), decorations are
    collected as (tree, address) entries into ``out_dec`` keyed by id().
    """
    if isinstance(node, str):
        return [node]
    label = node.label
    if label in g.wrappers:
        return list(node.children) if node.children else [g.wrappers[label]]
    kids = []
    for c in node.children:
        kids.extend(_reverse(g, c, pos_addr, out_dec))
    if label in g.fresh:
        return kids
    if not node.children:
        return [Tree(label)]
    parts = label.split(MERGE)
    addrs = None
    if pos_addr is not None:
        a = pos_addr(node)
        if a is None or not 0 <= a < g.num_addresses:
            raise AcnfError(f"address {a!r} unknown to the grammar")
        addrs = g.orig[a]
        if len(addrs) != len(parts):
            raise AcnfError(f"address {a} does not match label {label!r}")
    result = None
    for depth in range(len(parts) - 1, -1, -1):
        result = Tree(parts[depth], kids if result is None else [result])
        if addrs is not None:
            out_dec[id(result)] = (result, addrs[depth])
    return [result]


def reverse_parse(g: AcnfGrammar, parse: Tree) -> Tree:
    """Map a parse over compiled symbols back to the original symbols."""
    for lab in _labels(parse):
        if (lab not in g.fresh and lab not in g.wrappers
                and any(p not in g.stsg.nonterminals for p in lab.split(MERGE))):
            raise AcnfError(f"symbol {lab!r} unknown to the grammar")
    out = _reverse(g, parse, None, None)
    if len(out) != 1:
        raise AcnfError("parse root is an inserted node")
    return out[0]


def _labels(t: Tree):
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, Tree):
            yield n.label
            stack.extend(n.children)


def reverse_decorated(g: AcnfGrammar, parse: Tree, decoration: dict):
    """Reverse a compiled parse whose positions map to compiled addresses.

    Returns ``(tree, decoration)`` with positions of the original-symbol
    tree mapped to original addresses.
    """
    positions = {}

    def index(node, pos):
        if isinstance(node, Tree):
            positions[id(node)] = pos
            for i, c in enumerate(node.children):
                index(c, pos + (i,))

    index(parse, ())
    collected: dict = {}
    out = _reverse(g, parse, lambda n: decoration.get(positions[id(n)]),
                   collected)
    if len(out) != 1:
        raise AcnfError("parse root is an inserted node")
    tree = out[0]
    dec = {}

    def walk(node, pos):
        if isinstance(node, Tree) and node.children:
            entry = collected.get(id(node))
            if entry is not None and entry[0] is node:
                dec[pos] = entry[1]
            for i, c in enumerate(node.children):
                walk(c, pos + (i,))

    walk(tree, ())
    return tree, dec
