"""Reductions from 3SAT to most-probable-parse/sentence decision problems.

``build_instance`` turns a 3CNF formula into an STSG, an input (word-graph
or sentence) and a threshold ``Q`` such that the formula is satisfiable
exactly when some parse (or sentence) of the input reaches probability
``Q``.  All probabilities are exact fractions.

Grammar layout, for variables ``u1..un`` and clauses ``C1..Cm``:

* per variable and truth value, an ``S`` tree whose clause nodes spell out
  every literal of that variable as the value it takes, other literals
  left as sites;
* per clause and literal slot, a ``Ck`` tree making that literal true;
* per literal, trees rewriting it to ``T`` and to ``F``;
* the bare ``S -> C1 .. Cm`` tree.

Literal nonterminals are named ``u3`` and ``~u3``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .chart import WordGraph
from .disambig import enumerate_derivations
from .grammar import Stsg, scfg_of
from .trees import Tree

KINDS = ("MPPWG", "MPS", "MPP", "MPS-SCFG")


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class Cnf3Formula:
    num_vars: int
    clauses: tuple  # of 3-tuples of nonzero ints

    def __post_init__(self):
        for cl in self.clauses:
            if len(cl) != 3:
                raise ValueError(f"clause {cl} does not have three literals")
            for lit in cl:
                if not 1 <= abs(lit) <= self.num_vars:
                    raise ValueError(f"literal {lit} out of range")

    @property
    def m(self) -> int:
        return len(self.clauses)

    def occurrences(self, var: int) -> int:
        return sum(1 for cl in self.clauses for lit in cl if abs(lit) == var)

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        return all(any(assignment[abs(l) - 1] == (l > 0) for l in cl)
                   for cl in self.clauses)

    def used_variables(self) -> list:
        return sorted({abs(l) for cl in self.clauses for l in cl})


def parse_dimacs(text: str) -> Cnf3Formula:
    n = None
    lits: list = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith("c"):
            continue
        if s.startswith("p"):
            parts = s.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad header {s!r}")
            n = int(parts[2])
            continue
        lits.extend(int(x) for x in s.split())
    if n is None:
        raise ValueError("missing 'p cnf' header")
    clauses, cur = [], []
    for x in lits:
        if x == 0:
            clauses.append(tuple(cur))
            cur = []
        else:
            cur.append(x)
    if cur:
        raise ValueError("last clause is not terminated by 0")
    return Cnf3Formula(n, tuple(clauses))


def write_dimacs(f: Cnf3Formula) -> str:
    lines = [f"p cnf {f.num_vars} {f.m}"]
    lines += [" ".join(str(l) for l in cl) + " 0" for cl in f.clauses]
    return "\n".join(lines) + "\n"


def sat_bruteforce(f: Cnf3Formula) -> bool:
    if f.num_vars > 24:
        raise ReductionError("too many variables for exhaustive search")
    return any(f.satisfied_by(a)
               for a in itertools.product((True, False), repeat=f.num_vars))


def _lit(l: int) -> str:
    return f"u{l}" if l > 0 else f"~u{-l}"


@dataclass
class ReductionInstance:
    kind: str
    formula: Cnf3Formula
    stsg: Stsg
    probs: dict  # tree id -> Fraction
    wordgraph: WordGraph
    theta: Fraction
    q: Fraction
    base: Fraction
    first_type: frozenset  # ids of the per-variable S trees

    @property
    def scfg(self):
        return scfg_of(self.stsg) if self.kind == "MPS-SCFG" else None

    @property
    def theta_interval(self) -> tuple:
        return theta_interval(self.formula, self.base)

    def manifest(self) -> str:
        return f"THETA {self.theta} Q {self.q} KIND {self.kind}"


def theta_interval(f: Cnf3Formula, base: Fraction) -> tuple:
    total = sum(base ** f.occurrences(v) for v in range(1, f.num_vars + 1))
    return 1 / (2 * total + base ** f.m), 1 / (2 * total)


def _compact(f: Cnf3Formula) -> Cnf3Formula:
    """Renumber variables so that every one of them occurs."""
    used = f.used_variables()
    ren = {v: k + 1 for k, v in enumerate(used)}
    return Cnf3Formula(len(used), tuple(
        tuple(ren[abs(l)] * (1 if l > 0 else -1) for l in cl)
        for cl in f.clauses))


def build_instance(f: Cnf3Formula, kind: str) -> ReductionInstance:
    if kind not in KINDS:
        raise ReductionError(f"unknown kind {kind!r}")
    if f.m == 0:
        raise ReductionError("formula has no clauses")
    f = _compact(f)
    n, m = f.num_vars, f.m
    lexical = kind == "MPP"
    base = Fraction(1, 6 * m) if lexical else Fraction(1, 2)
    lo, hi = theta_interval(f, base)
    if not lo < hi:
        raise ReductionError("empty interval for theta")  # cannot happen
    theta = (lo + hi) / 2
    total = sum(base ** f.occurrences(v) for v in range(1, n + 1))
    p0 = 1 - 2 * theta * total
    third = Fraction(1, 3)

    def value(k, j, val):
        """Leaf spelling truth value ``val`` at clause k, slot j."""
        if lexical:
            return Tree(val, [f"v{k + 1}_{j + 1}"])
        return val

    trees: list = []
    first: list = []
    for v in range(1, n + 1):
        for val in (True, False):
            clauses = []
            for k, cl in enumerate(f.clauses):
                kids = []
                for j, l in enumerate(cl):
                    if abs(l) == v:
                        holds = val == (l > 0)
                        kids.append(Tree(_lit(l), [value(k, j, "T" if holds else "F")]))
                    else:
                        kids.append(Tree(_lit(l)))
                clauses.append(Tree(f"C{k + 1}", kids))
            first.append(len(trees))
            trees.append((Tree("S", clauses), theta * base ** f.occurrences(v)))
    for k, cl in enumerate(f.clauses):
        for j in range(3):
            kids = [Tree(_lit(l), [value(k, jj, "T")]) if jj == j else Tree(_lit(l))
                    for jj, l in enumerate(cl)]
            trees.append((Tree(f"C{k + 1}", kids), third))
    literals = sorted({_lit(s * v) for v in range(1, n + 1) for s in (1, -1)})
    for lit in literals:
        if lexical:
            for k in range(m):
                for j in range(3):
                    for val in ("T", "F"):
                        trees.append((Tree(lit, [value(k, j, val)]), base))
        else:
            for val in ("T", "F"):
                trees.append((Tree(lit, [val]), base))
    trees.append((Tree("S", [Tree(f"C{k + 1}") for k in range(m)]), p0))

    if kind == "MPS-SCFG":
        trees = [(Tree(t.label, [x if isinstance(x, str) else Tree(x.label)
                                 for x in t.leaves()]), p) for t, p in trees]

    stsg = Stsg("S", [(t, math.log(p)) for t, p in trees])
    probs = {i: p for i, (_, p) in enumerate(trees)}
    if lexical:
        words = [f"v{k + 1}_{j + 1}" for k in range(m) for j in range(3)]
        wg = WordGraph.linear(words)
    else:
        wg = WordGraph(3 * m + 1, [(i, i + 1, w, 1.0)
                                   for i in range(3 * m) for w in ("F", "T")])
    q = n * theta * base ** (3 * m) + p0 * base ** (2 * m) * third ** m
    return ReductionInstance(kind, f, stsg, probs, wg, theta, q, base,
                             frozenset(first))


def decide_by_bruteforce(inst: ReductionInstance,
                         cap: int = 2_000_000) -> bool:
    """Whether some parse (or sentence) reaches the threshold, by
    enumerating every derivation with exact probabilities."""
    f = inst.formula
    if f.num_vars > 4 or f.m > 4:
        raise ReductionError("instance too large for exhaustive decision")
    derivs = enumerate_derivations(inst.stsg, inst.wordgraph,
                                   max_length=inst.wordgraph.num_states,
                                   cap=cap, weights=inst.probs,
                                   build=inst.kind in ("MPPWG", "MPP"))
    groups: dict = {}
    for d in derivs:
        key = (str(d.tree.parse) if inst.kind in ("MPPWG", "MPP")
               else d.sentence)
        groups[key] = groups.get(key, 0) + d.prob
    return any(p >= inst.q for p in groups.values())


def tree_count_bound(f: Cnf3Formula, kind: str) -> int:
    """Upper bound on the number of elementary trees of an instance."""
    n, m = len(f.used_variables()), f.m
    if kind == "MPP":
        return 2 * n + 1 + 3 * m + 4 * n * 3 * m
    return 2 * n + 1 + 3 * m + 4 * n


def random_formula(rng, max_vars: int = 3, max_clauses: int = 3) -> Cnf3Formula:
    n = rng.randint(1, max_vars)
    m = rng.randint(1, max_clauses)
    clauses = tuple(tuple(rng.choice((1, -1)) * rng.randint(1, n)
                          for _ in range(3)) for _ in range(m))
    return Cnf3Formula(n, clauses)


def parse_rational(text: str) -> Fraction:
    return Fraction(text)
