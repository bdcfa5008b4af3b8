"""Ordered labelled trees, tree-bank I/O and subtree enumeration.

A tree node is a :class:`Tree`.  Terminals are plain ``str`` leaves.  A
``Tree`` without children is a substitution site (a nonterminal leaf).
Nodes are identified by their *position*: the tuple of child indices on
the path from the root.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

UNKNOWN = "⟨UNK⟩"

Node = Union["Tree", str]
Position = tuple


class BracketParseError(ValueError):
    """Malformed bracketed string.  ``offset`` is the character index."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class TreebankError(ValueError):
    pass


class Tree:
    """Immutable ordered tree node."""

    __slots__ = ("label", "children", "_hash", "_str")

    def __init__(self, label: str, children: Iterable[Node] = ()):
        self.label = label
        self.children = tuple(children)
        self._hash = None
        self._str = None

    # identity ---------------------------------------------------------
    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Tree):
            return NotImplemented
        return (self.label == other.label and hash(self) == hash(other)
                and self.children == other.children)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.label, self.children))
        return self._hash

    def __lt__(self, other):
        return str(self) < str(other)

    def __str__(self):
        if self._str is None:
            self._str = write_bracketed(self)
        return self._str

    def __repr__(self):
        return f"Tree({str(self)!r})"

    # structure --------------------------------------------------------
    @property
    def is_site(self) -> bool:
        return not self.children

    @property
    def is_preterminal(self) -> bool:
        return bool(self.children) and all(
            isinstance(c, str) for c in self.children)

    def __getitem__(self, pos: Position) -> Node:
        node: Node = self
        for i in pos:
            node = node.children[i]
        return node

    def positions(self) -> list:
        """Preorder positions of all non-leaf nodes."""
        out = []
        stack = [((), self)]
        while stack:
            pos, node = stack.pop()
            out.append(pos)
            for i in range(len(node.children) - 1, -1, -1):
                child = node.children[i]
                if isinstance(child, Tree) and child.children:
                    stack.append((pos + (i,), child))
        return out

    def leaves(self) -> list:
        """Frontier nodes left to right: terminals and substitution sites."""
        if not self.children:
            return [self]
        out = []
        for child in self.children:
            if isinstance(child, str):
                out.append(child)
            else:
                out.extend(child.leaves())
        return out

    def frontier(self) -> tuple:
        """Frontier labels; sites contribute their label."""
        return tuple(x if isinstance(x, str) else x.label
                     for x in self.leaves())

    def words(self) -> tuple:
        return tuple(x for x in self.leaves() if isinstance(x, str))

    def sites(self) -> list:
        return [x for x in self.leaves() if isinstance(x, Tree)]

    def depth(self) -> int:
        """Length of the longest root-to-leaf path, counted in edges."""
        if not self.children:
            return 0
        return 1 + max(0 if isinstance(c, str) else c.depth()
                       for c in self.children)

    def productions(self) -> Iterator[tuple]:
        """Yield ``(lhs, rhs)`` for every non-leaf node."""
        for pos in self.positions():
            node = self[pos]
            yield node.label, tuple(
                c if isinstance(c, str) else c.label for c in node.children)

    def nonterminal_labels(self) -> set:
        out = set()
        stack = [self]
        while stack:
            node = stack.pop()
            out.add(node.label)
            stack.extend(c for c in node.children if isinstance(c, Tree))
        return out


# ----------------------------------------------------------------------
# bracketed notation

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")


def parse_bracketed(text: str) -> Tree:
    """Parse one bracketed tree such as ``(S (A a) (B))``.

    ``(B)`` denotes a substitution site.
    """
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise BracketParseError("unexpected character", pos)
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    if not tokens:
        raise BracketParseError("empty input", 0)

    idx = 0

    def parse_node() -> Tree:
        nonlocal idx
        tok, off = tokens[idx]
        if tok != "(":
            raise BracketParseError("expected '('", off)
        idx += 1
        if idx >= len(tokens):
            raise BracketParseError("missing label", len(text))
        label, off = tokens[idx]
        if label in "()":
            raise BracketParseError("missing label", off)
        idx += 1
        children = []
        while True:
            if idx >= len(tokens):
                raise BracketParseError("unbalanced brackets", len(text))
            tok, off = tokens[idx]
            if tok == ")":
                idx += 1
                return Tree(label, children)
            if tok == "(":
                children.append(parse_node())
            else:
                children.append(tok)
                idx += 1

    tree = parse_node()
    if idx != len(tokens):
        raise BracketParseError("trailing material", tokens[idx][1])
    return tree


def write_bracketed(node: Node) -> str:
    if isinstance(node, str):
        return node
    if not node.children:
        return f"({node.label})"
    return "(" + node.label + " " + " ".join(
        write_bracketed(c) for c in node.children) + ")"


# ----------------------------------------------------------------------
# tree-banks

class Treebank:
    """A non-empty list of complete parse trees sharing one start symbol."""

    def __init__(self, trees: Sequence[Tree], start: Optional[str] = None):
        trees = list(trees)
        if not trees:
            raise TreebankError("empty tree-bank")
        start = start or trees[0].label
        for k, t in enumerate(trees):
            if t.label != start:
                raise TreebankError(
                    f"tree {k} has root {t.label!r}, expected {start!r}")
            if not t.children:
                raise TreebankError(f"tree {k} is a bare site")
            for leaf in t.leaves():
                if not isinstance(leaf, str):
                    raise TreebankError(
                        f"tree {k} has nonterminal leaf ({leaf.label})")
                if leaf == "":
                    raise TreebankError(f"tree {k} has an empty leaf")
        self.trees = trees
        self.start = start
        nts = set()
        terms = set()
        for t in trees:
            nts |= t.nonterminal_labels()
            terms |= set(t.words())
        clash = nts & terms
        if clash:
            raise TreebankError(
                "symbols used both as terminal and nonterminal: "
                + ", ".join(sorted(clash)))
        self.nonterminals = frozenset(nts)
        self.terminals = frozenset(terms)

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i):
        return self.trees[i]


def read_trees(lines: Iterable[str]) -> list:
    """Parse one tree per line, skipping blank and ``#`` lines."""
    out = []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            out.append(parse_bracketed(s))
        except BracketParseError as e:
            raise BracketParseError(f"line {lineno}: {e}", e.offset) from None
    return out


def load_treebank(path) -> Treebank:
    with open(path, encoding="utf-8") as f:
        return Treebank(read_trees(f))


def write_treebank(trees: Iterable[Tree], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in trees:
            f.write(write_bracketed(t) + "\n")


# ----------------------------------------------------------------------
# context-free backbone

@dataclass(frozen=True)
class Cfg:
    start: str
    nonterminals: frozenset
    terminals: frozenset
    rules: frozenset  # of (lhs, rhs-tuple)

    def unary_cycle(self) -> Optional[list]:
        """Return a cycle of nonterminals linked by unary rules, if any."""
        graph: dict = {}
        for lhs, rhs in self.rules:
            if len(rhs) == 1 and rhs[0] in self.nonterminals:
                graph.setdefault(lhs, set()).add(rhs[0])
        return find_cycle(graph)

    def derives(self, tree: Tree) -> bool:
        if tree.label != self.start:
            return False
        return all(p in self.rules for p in tree.productions())


def find_cycle(graph: dict) -> Optional[list]:
    color: dict = {}
    for root in sorted(graph):
        if root in color:
            continue
        stack = [(root, iter(sorted(graph.get(root, ()))))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
                continue
            state = color.get(nxt)
            if state == 1:
                return path[path.index(nxt):] + [nxt]
            if state is None:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(sorted(graph.get(nxt, ())))))
    return None


def unary_cycle(trees: Iterable[Tree]) -> Optional[list]:
    """A cycle of labels linked by single-child nodes in ``trees``, if any."""
    graph: dict = {}
    for t in trees:
        for pos in t.positions():
            node = t[pos]
            if len(node.children) == 1 and isinstance(node.children[0], Tree):
                graph.setdefault(node.label, set()).add(node.children[0].label)
    return find_cycle(graph)


def underlying_cfg(tb: Treebank) -> Cfg:
    rules = set()
    for t in tb:
        rules.update(t.productions())
    cfg = Cfg(tb.start, tb.nonterminals, tb.terminals, frozenset(rules))
    cycle = cfg.unary_cycle()
    if cycle:
        raise TreebankError("unary cycle: " + " -> ".join(cycle))
    return cfg


def bamboo_collapse(tree: Tree) -> Tree:
    """Collapse unary chains, keeping the chain's top and bottom nodes.

    A node whose only child is an internal, non-preterminal node adopts
    that child's children; preterminals are never absorbed.
    """
    children = tree.children
    while (len(children) == 1 and isinstance(children[0], Tree)
           and children[0].children and not children[0].is_preterminal):
        children = children[0].children
    return Tree(tree.label, [
        c if isinstance(c, str) or not c.children else bamboo_collapse(c)
        for c in children])


def preterminal_labels(trees: Iterable[Tree]) -> set:
    out = set()
    for t in trees:
        for pos in t.positions():
            node = t[pos]
            if node.is_preterminal:
                out.add(node.label)
    return out


# ----------------------------------------------------------------------
# subtree enumeration

_NOTATION = re.compile(r"^(?:d(\d+))?(?:n(\d+))?(?:l(\d+))?(?:L(\d+))?$")


@dataclass(frozen=True)
class ProjectionParams:
    """Upper bounds on projected subtrees; ``None`` means unbounded.

    ``max_depth`` (d), ``max_sites`` (n), ``max_terminals`` (l) and
    ``max_consecutive_terminals`` (L).  Depth-1 subtrees are always kept.
    """
    max_depth: Optional[int] = 4
    max_sites: Optional[int] = 2
    max_terminals: Optional[int] = 7
    max_consecutive_terminals: Optional[int] = 3

    def __post_init__(self):
        for name in ("max_depth", "max_sites", "max_terminals",
                     "max_consecutive_terminals"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")

    @classmethod
    def unbounded(cls) -> "ProjectionParams":
        return cls(None, None, None, None)

    @classmethod
    def parse(cls, text: str) -> "ProjectionParams":
        m = _NOTATION.match(text)
        if not m or not text:
            raise ValueError(f"bad projection notation {text!r}")
        vals = [int(g) if g is not None else None for g in m.groups()]
        return cls(*vals)

    def __str__(self):
        parts = []
        for key, v in zip("dnlL", (self.max_depth, self.max_sites,
                                   self.max_terminals,
                                   self.max_consecutive_terminals)):
            if v is not None:
                parts.append(f"{key}{v}")
        return "".join(parts) or "unbounded"

    def admits(self, frag: Tree, depth: Optional[int] = None) -> bool:
        depth = frag.depth() if depth is None else depth
        if depth <= 1:
            return True
        if self.max_depth is not None and depth > self.max_depth:
            return False
        leaves = frag.leaves()
        if self.max_sites is not None:
            if sum(1 for x in leaves if not isinstance(x, str)) > self.max_sites:
                return False
        if self.max_terminals is not None:
            if sum(1 for x in leaves if isinstance(x, str)) > self.max_terminals:
                return False
        if self.max_consecutive_terminals is not None:
            run = 0
            for x in leaves:
                run = run + 1 if isinstance(x, str) else 0
                if run > self.max_consecutive_terminals:
                    return False
        return True


def _fragments(node: Tree, depth_limit: float, cuttable) -> list:
    """All fragments rooted at ``node`` with depth <= ``depth_limit``.

    ``cuttable(child)`` tells whether an internal child may become a site.
    Returns (fragment, depth) pairs.
    """
    options = []
    for child in node.children:
        if isinstance(child, str) or not child.children:
            options.append([(child, 0)])
            continue
        opts = []
        if cuttable(child):
            opts.append((Tree(child.label), 0))
        if depth_limit > 1:
            opts.extend(_fragments(child, depth_limit - 1, cuttable))
        options.append(opts)
    out = []
    for combo in itertools.product(*options):
        depth = 1 + max(d for _, d in combo)
        out.append((Tree(node.label, [c for c, _ in combo]), depth))
    return out


def enumerate_subtrees(tree: Tree,
                       params: ProjectionParams = ProjectionParams.unbounded()
                       ) -> list:
    """Every subtree of ``tree`` admitted by ``params``, in preorder of roots.

    A subtree is rooted at an internal node and, for each internal child,
    either cuts it to a site or continues into it.
    """
    limit = params.max_depth if params.max_depth is not None else float("inf")
    limit = max(limit, 1)
    out = []
    for pos in tree.positions():
        for frag, depth in _fragments(tree[pos], limit, lambda c: True):
            if params.admits(frag, depth):
                out.append(frag)
    return out


def count_subtrees(tree: Tree) -> int:
    """Number of unbounded subtrees, by the product-form recursion."""
    def count(node: Tree) -> int:
        n = 1
        for c in node.children:
            if isinstance(c, Tree) and c.children:
                n *= 1 + count(c)
        return n

    return sum(count(tree[pos]) for pos in tree.positions())
