"""PARSEVAL-style scoring of output parses against gold parses.

Brackets are taken over every non-leaf node, preterminals included, with
word positions counted from 0: a node covering words ``i..j-1`` yields the
labeled bracket ``(label, i, j)`` and the unlabeled bracket ``(i, j)``.
Bracket collections are sets.  A missing parse (``None``) contributes no
output brackets and is left out of the recognized count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

from .trees import Tree


class EvalError(ValueError):
    pass


def labeled_brackets(tree: Tree) -> set:
    out = set()

    def walk(node, i):
        if isinstance(node, str):
            return i + 1
        if not node.children:  # a bare site still spans one position
            out.add((node.label, i, i + 1))
            return i + 1
        j = i
        for c in node.children:
            j = walk(c, j)
        out.add((node.label, i, j))
        return j

    walk(tree, 0)
    return out


def brackets(tree: Tree) -> set:
    return {(i, j) for _, i, j in labeled_brackets(tree)}


def crosses(a: tuple, b: tuple) -> bool:
    (h, j), (k, l) = a, b
    return h < k < j < l or k < h < l < j


def crossing(u: set, v: set) -> set:
    """The brackets of ``u`` that cross at least one bracket of ``v``."""
    return {a for a in u if any(crosses(a, b) for b in v)}


@dataclass
class EvalReport:
    items: int = 0
    recognized_items: int = 0
    exact_items: int = 0
    zero_crossing_items: int = 0
    sentence_match_items: int = 0
    gold_labeled: int = 0
    test_labeled: int = 0
    match_labeled: int = 0
    gold_brackets: int = 0
    test_brackets: int = 0
    match_brackets: int = 0
    gold_noncrossing: int = 0
    test_noncrossing: int = 0
    total_length: int = 0
    lengths: list = field(default_factory=list)

    @staticmethod
    def _ratio(a, b, empty=1.0):
        return a / b if b else empty

    @property
    def recognized(self) -> float:
        return self._ratio(self.recognized_items, self.items, 0.0)

    @property
    def exact_match(self) -> float:
        return self._ratio(self.exact_items, self.recognized_items, 0.0)

    @property
    def zero_crossing(self) -> float:
        return self._ratio(self.zero_crossing_items, self.recognized_items, 0.0)

    @property
    def exact_sentence_match(self) -> float:
        return self._ratio(self.sentence_match_items, self.items, 0.0)

    @property
    def labeled_recall(self) -> float:
        return self._ratio(self.match_labeled, self.gold_labeled)

    @property
    def labeled_precision(self) -> float:
        return self._ratio(self.match_labeled, self.test_labeled)

    @property
    def bracket_recall(self) -> float:
        return self._ratio(self.match_brackets, self.gold_brackets)

    @property
    def bracket_precision(self) -> float:
        return self._ratio(self.match_brackets, self.test_brackets)

    @property
    def ncb_recall(self) -> float:
        return self._ratio(self.gold_noncrossing, self.gold_brackets)

    @property
    def ncb_precision(self) -> float:
        return self._ratio(self.test_noncrossing, self.test_brackets)

    @property
    def mean_length(self) -> float:
        return self._ratio(self.total_length, self.items, 0.0)

    MEASURES = ("recognized", "exact_match", "labeled_recall",
                "labeled_precision", "bracket_recall", "bracket_precision",
                "ncb_recall", "ncb_precision", "zero_crossing",
                "exact_sentence_match")

    def measures(self) -> dict:
        return {m: getattr(self, m) for m in self.MEASURES}

    def as_text(self) -> str:
        rows = [("items", str(self.items)),
                ("mean length", f"{self.mean_length:.2f}")]
        rows += [(m.replace("_", " "), f"{100 * v:.2f}%")
                 for m, v in self.measures().items()]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)

    def as_key_values(self) -> str:
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)
                 if f.name != "lengths"]
        lines += [f"{k}={v!r}" for k, v in self.measures().items()]
        return "\n".join(lines)


def parseval(gold: Sequence[Tree], test: Sequence[Optional[Tree]],
             gold_sentences: Optional[Sequence[tuple]] = None,
             test_sentences: Optional[Sequence[Optional[tuple]]] = None
             ) -> EvalReport:
    """Score ``test`` against ``gold`` item by item.

    ``test_sentences`` (e.g. the sentence picked from a word-graph) are
    compared with ``gold_sentences`` for the exact-sentence counter.  Both
    default to the yields of the trees.
    """
    if len(gold) != len(test):
        raise EvalError(f"{len(gold)} gold items but {len(test)} test items")
    if test_sentences is not None and len(test_sentences) != len(gold):
        raise EvalError("test_sentences has the wrong length")
    rep = EvalReport()
    for idx, (g, t) in enumerate(zip(gold, test)):
        rep.items += 1
        glen = len(g.frontier())
        rep.lengths.append(glen)
        rep.total_length += glen
        gl = labeled_brackets(g)
        gb = {(i, j) for _, i, j in gl}
        rep.gold_labeled += len(gl)
        rep.gold_brackets += len(gb)
        want = (tuple(gold_sentences[idx]) if gold_sentences is not None
                else g.words())
        if test_sentences is not None:
            got = test_sentences[idx]
        else:
            got = t.words() if t is not None else None
        if got is not None and tuple(got) == want:
            rep.sentence_match_items += 1
        if t is None:
            continue
        if len(t.frontier()) != glen:
            raise EvalError(f"item {idx}: test frontier has "
                            f"{len(t.frontier())} symbols, gold has {glen}")
        rep.recognized_items += 1
        tl = labeled_brackets(t)
        tb = {(i, j) for _, i, j in tl}
        rep.test_labeled += len(tl)
        rep.test_brackets += len(tb)
        rep.match_labeled += len(gl & tl)
        rep.match_brackets += len(gb & tb)
        test_cross = crossing(tb, gb)
        rep.test_noncrossing += len(tb) - len(test_cross)
        rep.gold_noncrossing += len(gb) - len(crossing(gb, tb))
        if not test_cross:
            rep.zero_crossing_items += 1
        if t == g:
            rep.exact_items += 1
    return rep
