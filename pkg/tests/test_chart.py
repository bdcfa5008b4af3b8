import io
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import cnf_span_oracle
from stsgkit import _kernels
from stsgkit.acnf import to_acnf
from stsgkit.chart import (NotInGrammarError, UnknownWordError, WordGraph,
                           build_chart, cky_sentence, cky_wordgraph,
                           read_wordgraphs, scfg_viterbi, tree_to_chart,
                           write_wordgraph)
from stsgkit.disambig import enumerate_derivations
from stsgkit.grammar import Stsg, scfg_of
from stsgkit.random_grammars import (random_depth1_stsg, random_stsg,
                                     random_wordgraph)
from stsgkit.trees import parse_bracketed as T


def grammar(*pairs, start="S"):
    """``pairs`` are (bracketed tree, probability)."""
    return Stsg(start, [(T(x), math.log(p)) for x, p in pairs])


AB = grammar(("(S (A) (B))", 1.0), ("(A a)", 1.0), ("(B b)", 1.0))


def final_lhs(chart, i, j):
    g = chart.grammar
    return {(g.rules[r].lhs, g.rules[r].rhs) for r in chart.final_rules(i, j)}


class TestCkySentence:
    def test_simple_accept(self):
        chart = cky_sentence(to_acnf(AB), ["a", "b"])
        assert ("S", ("A", "B")) in final_lhs(chart, 0, 2)
        assert chart.recognized

    def test_simple_reject(self):
        chart = cky_sentence(to_acnf(AB), ["b", "a"])
        assert not final_lhs(chart, 0, 2)
        assert not chart.recognized

    def test_right_linearized(self):
        g = to_acnf(grammar(("(S (A) (B) (C))", 1.0), ("(A a)", 1.0),
                            ("(B b)", 1.0), ("(C c)", 1.0)))
        chart = cky_sentence(g, "a b c".split())
        assert ("S", ("A", "S′2")) in final_lhs(chart, 0, 3)
        assert ("S′2", ("B", "C")) in final_lhs(chart, 1, 3)

    def test_unknown_word(self):
        with pytest.raises(UnknownWordError):
            cky_sentence(to_acnf(AB), ["a", "zzz"])

    def test_unknown_word_mapped(self):
        g = to_acnf(grammar(("(S (A) (B))", 1.0), ("(A a)", 0.5),
                            ("(A ⟨UNK⟩)", 0.5), ("(B b)", 1.0)))
        assert cky_sentence(g, ["zzz", "b"]).recognized

    def test_empty_sentence(self):
        with pytest.raises(ValueError):
            cky_sentence(to_acnf(AB), [])

    def test_added_by(self):
        chart = cky_sentence(to_acnf(AB), ["a", "b"])
        g = chart.grammar
        s = g.rule_index[("S", ("A", "B"))]
        (k, left, right), = chart.added_by(s, 0, 2)
        assert k == 1
        assert [g.rules[r].lhs for r in left] == ["A"]
        assert [g.rules[r].lhs for r in right] == ["B"]
        a = g.rule_index[("A", ("a",))]
        assert chart.added_by(a, 0, 1)[0].word == "a"


class TestCkyWordgraph:
    G = to_acnf(grammar(("(S (A) (B))", 0.5), ("(S c)", 0.5), ("(A a)", 1.0),
                        ("(B b)", 1.0)))

    def test_linear_graph_equals_sentence(self):
        a = cky_sentence(self.G, ["a", "b"])
        b = cky_wordgraph(self.G, WordGraph.linear(["a", "b"]))
        assert np.array_equal(a.final, b.final)
        assert np.array_equal(a.cat, b.cat)

    def test_two_paths(self):
        wg = WordGraph(3, [(0, 1, "a", 0.5), (1, 2, "b", 1.0), (0, 2, "c", 0.5)])
        got = final_lhs(cky_wordgraph(self.G, wg), 0, 2)
        assert {("S", ("A", "B")), ("S", ("c",))} <= got

    def test_unreachable_state(self):
        # state 2 has no incoming edge
        wg = WordGraph(4, [(0, 1, "a", 1.0), (1, 3, "b", 1.0), (2, 3, "b", 1.0)])
        chart = cky_wordgraph(self.G, wg)
        spans = set(chart.spans())
        assert spans == {(0, 1), (1, 3), (2, 3), (0, 3)}
        assert chart.recognized

    def test_unknown_word_gives_empty_chart(self):
        wg = WordGraph(2, [(0, 1, "zzz", 1.0)])
        assert not cky_wordgraph(self.G, wg).final.any()

    def test_transitions_remembered(self):
        wg = WordGraph(3, [(0, 1, "a", 0.5), (1, 2, "b", 1.0), (0, 2, "c", 0.5)])
        chart = cky_wordgraph(self.G, wg)
        c = self.G.rule_index[("S", ("c",))]
        assert chart.lexical[(0, 2, c)].prob == 0.5

    def test_bad_graphs(self):
        with pytest.raises(ValueError):
            WordGraph(3, [(1, 1, "a", 1.0)])
        with pytest.raises(ValueError):
            WordGraph(3, [(0, 1, "a", 0.0)])
        with pytest.raises(ValueError):
            WordGraph(1, [])


class TestOracleAgreement:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_spans_match_recursive_oracle(self, seed):
        rng = random.Random(seed)
        g = to_acnf(random_stsg(rng))
        wg = random_wordgraph(rng, max_states=5)
        chart = cky_wordgraph(g, wg)
        got = {(int(i), int(j), g.categories[c])
               for i, j, c in np.argwhere(chart.cat)}
        assert got == cnf_span_oracle(g, wg)

    @pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba missing")
    def test_kernels_agree(self):
        rng = random.Random(3)
        for _ in range(60):
            g = to_acnf(random_stsg(rng))
            wg = random_wordgraph(rng, max_states=6)
            a = build_chart(g, wg, impl="numpy")
            b = build_chart(g, wg, impl="numba")
            assert np.array_equal(a.final, b.final)
            assert np.array_equal(a.cat, b.cat)

    def test_allowed_mask_blocks_category(self):
        g = to_acnf(AB)
        wg = WordGraph.linear(["a", "b"])
        allowed = np.ones((3, 3, len(g.categories)), dtype=bool)
        allowed[0, 1, g.cat_index["A"]] = False
        assert not build_chart(g, wg, allowed=allowed).recognized

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            build_chart(to_acnf(AB), WordGraph.linear(["a"]), impl="cuda")


class TestTreeToChart:
    def test_single_parse(self):
        g = to_acnf(AB)
        chart = tree_to_chart(g, T("(S (A a) (B b))"))
        assert int(chart.final.sum()) == 3
        assert chart.recognized

    def test_rule_not_in_grammar(self):
        with pytest.raises(NotInGrammarError):
            tree_to_chart(to_acnf(AB), T("(S (B b) (A a))"))

    def test_flat_parse_right_linearized(self):
        g = to_acnf(grammar(("(S (A) (B) (C))", 1.0), ("(A a)", 1.0),
                            ("(B b)", 1.0), ("(C c)", 1.0)))
        chart = tree_to_chart(g, T("(S (A a) (B b) (C c))"))
        assert final_lhs(chart, 0, 3) == {("S", ("A", "S′2"))}
        assert final_lhs(chart, 1, 3) == {("S′2", ("B", "C"))}
        assert int(chart.final.sum()) == 5

    def test_subset_of_sentence_chart(self):
        rng = random.Random(8)
        for _ in range(30):
            stsg = random_stsg(rng)
            g = to_acnf(stsg)
            for sent in [("a",), ("a", "b"), ("b", "c", "a")]:
                for d in enumerate_derivations(stsg, list(sent), build=True)[:3]:
                    one = tree_to_chart(g, d.tree.parse)
                    full = cky_sentence(g, list(sent))
                    assert one.recognized
                    assert not (one.final & ~full.final).any()


def brute_best_parse(stsg, inp):
    best = None
    for d in enumerate_derivations(stsg, inp):
        key = (-d.prob, str(d.tree.parse))
        if best is None or key < best[0]:
            best = (key, d)
    return best[1] if best else None


class TestScfgViterbi:
    def test_unit_grammar(self):
        res = scfg_viterbi(scfg_of(AB), ["a", "b"])
        assert res.parse == T("(S (A a) (B b))")
        assert res.logprob == 0.0

    def test_higher_rule_wins(self):
        stsg = grammar(("(S (A) (B))", 0.7), ("(S (X) (Y))", 0.3),
                       ("(A a)", 1.0), ("(B b)", 1.0), ("(X a)", 1.0),
                       ("(Y b)", 1.0))
        res = scfg_viterbi(scfg_of(stsg), ["a", "b"])
        assert res.parse == T("(S (A a) (B b))")
        assert res.logprob == pytest.approx(math.log(0.7), abs=1e-12)

    def test_wordgraph_changes_argmax(self):
        stsg = grammar(("(S a)", 0.6), ("(S b)", 0.4))
        wg = WordGraph(2, [(0, 1, "a", 0.3), (0, 1, "b", 0.7)])
        assert scfg_viterbi(scfg_of(stsg), ["a"]).sentence == ("a",)
        res = scfg_viterbi(scfg_of(stsg), wg)
        assert res.sentence == ("b",)
        assert res.logprob == pytest.approx(math.log(0.28), abs=1e-12)

    def test_not_recognized(self):
        assert scfg_viterbi(scfg_of(AB), ["b", "a"]) is None

    def test_long_rules(self):
        stsg = grammar(("(S (A) (A) (A) (A))", 1.0), ("(A a)", 0.5),
                       ("(A (A) b)", 0.5))
        res = scfg_viterbi(scfg_of(stsg), "a a a a b".split())
        brute = brute_best_parse(stsg, "a a a a b".split())
        assert res.logprob == pytest.approx(math.log(brute.prob), abs=1e-9)

    def test_random_against_brute_force(self):
        rng = random.Random(21)
        for _ in range(40):
            stsg = random_depth1_stsg(rng)
            scfg = scfg_of(stsg)
            wg = random_wordgraph(rng, max_states=5)
            res = scfg_viterbi(scfg, wg)
            brute = brute_best_parse(stsg, wg)
            if brute is None:
                assert res is None
                continue
            assert res.logprob == pytest.approx(math.log(brute.prob), abs=1e-9)


class TestWordgraphFiles:
    def test_round_trip(self, tmp_path):
        wg = WordGraph(3, [(0, 1, "a", 0.25), (0, 1, "b", 0.75),
                           (1, 2, "c", 1.0)])
        buf = io.StringIO()
        write_wordgraph(wg, buf)
        write_wordgraph(WordGraph.linear(["x"]), buf)
        path = tmp_path / "in.wg"
        path.write_text(buf.getvalue(), encoding="utf-8")
        back = read_wordgraphs(path)
        assert len(back) == 2
        assert back[0].transitions == wg.transitions
        assert back[1].is_linear()

    def test_unnormalized_warns(self, tmp_path, caplog):
        path = tmp_path / "in.wg"
        path.write_text("WG 2\nTRANS 0 1 a 0.5\n", encoding="utf-8")
        with caplog.at_level("WARNING"):
            read_wordgraphs(path)
        assert "do not sum to one" in caplog.text

    def test_bad_line(self, tmp_path):
        path = tmp_path / "in.wg"
        path.write_text("WG 2\nEDGE 0 1 a\n", encoding="utf-8")
        with pytest.raises(ValueError, match=r"in\.wg:2"):
            read_wordgraphs(path)
