import random

import pytest

from oracles import cut_oracle, rebuild
from stsgkit.acnf import to_acnf
from stsgkit.chart import WordGraph, build_chart
from stsgkit.grammar import CutMarkedTreebank, project_dop, project_sdop
from stsgkit.random_grammars import random_treebank
from stsgkit.specialize import (LearnerConfig, SsfStats, _View,
                                backoff_measure, complete_ambiguity_sets,
                                grf_measure, integrated_parse, osr_key,
                                sequential_cover, specialized_grammar,
                                ssf_pass)
from stsgkit.trees import ProjectionParams, Treebank, parse_bracketed as T

LOOSE = LearnerConfig(delta=0.95, phi=1)


def lexically_reduced(trees):
    views = []
    for t in trees:
        v = _View(t)
        v.marks = {p for p in t.positions() if p and t[p].is_preterminal}
        views.append(v)
    return views


class TestSsfPass:
    def test_ten_copies(self):
        views = lexically_reduced([T("(S (A a) (B b))")] * 10)
        stats, _ = ssf_pass(views, LOOSE)
        st = stats[("A", "B")]
        assert (st.freq_total, st.freq_c, st.cp) == (10, 10, 1.0)
        assert st.asd == {T("(S (A) (B))"): 1.0}

    def test_partial_constituency(self):
        trees = ([T("(S (X (A a) (B b)) (C c))")] * 19
                 + [T("(S (A a) (Y (B b) (C c)))")])
        stats, _ = ssf_pass(lexically_reduced(trees), LOOSE)
        st = stats[("A", "B")]
        assert (st.freq_total, st.freq_c) == (20, 19)
        assert st.cp == pytest.approx(0.95)
        assert sum(stats[("A", "B")].asd.values()) == pytest.approx(1.0)

    def test_length_limit(self):
        views = lexically_reduced([T("(S (A a) (B b) (C c))")])
        stats, _ = ssf_pass(views, LearnerConfig(phi=1, max_ssf_len=2))
        assert ("A", "B", "C") not in stats

    def test_words_never_in_ssf(self):
        stats, _ = ssf_pass([_View(T("(S (A a) (B b))"))], LOOSE)
        assert stats == {}


class TestMeasures:
    def test_grf(self):
        st = SsfStats(freq_total=10, freq_c=10, reduction=20, length=3)
        assert grf_measure(("A", "B", "C"), st, LOOSE) == 20

    def test_cp_gate(self):
        st = SsfStats(freq_total=100, freq_c=94, reduction=94, length=2)
        assert grf_measure(("A", "B"), st, LOOSE) == 0

    def test_phi_gate(self):
        st = SsfStats(freq_total=4, freq_c=4, reduction=4, length=2)
        assert grf_measure(("A", "B"), st, LearnerConfig(phi=5)) == 0

    def test_backoff_global_context_viable(self):
        st = SsfStats(freq_total=10, freq_c=10, reduction=20, length=3,
                      contexts={(("#", "#"), ("#", "#")): [6, 6],
                                (("#", "X"), ("#", "#")): [4, 4]})
        cfg = LearnerConfig(phi=5)
        assert backoff_measure(("A", "B", "C"), st, cfg) == \
            grf_measure(("A", "B", "C"), st, cfg) == 20

    def test_backoff_two_unrelated_contexts(self):
        st = SsfStats(freq_total=23, freq_c=13, reduction=13, length=2,
                      contexts={(("#", "#"), ("X", "#")): [6, 6],
                                (("#", "#"), ("Y", "#")): [7, 7],
                                (("#", "#"), ("Z", "#")): [10, 0]})
        assert backoff_measure(("A", "B"), st, LearnerConfig(phi=5)) == 13

    def test_backoff_nothing_viable(self):
        st = SsfStats(freq_total=20, freq_c=10, reduction=10, length=2,
                      contexts={(("#", "#"), ("X", "#")): [10, 5],
                                (("#", "#"), ("Y", "#")): [10, 5]})
        assert backoff_measure(("A", "B"), st, LearnerConfig(phi=1)) == 0

    def test_osr_key_collapses_repetitions(self):
        a = osr_key(T("(NP (N) (N) (N))"))
        b = osr_key(T("(NP (N) (N))"))
        assert a == b
        assert osr_key(T("(NP (DET) (N))")) != b

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LearnerConfig(delta=0)
        with pytest.raises(ValueError):
            LearnerConfig(phi=0)


class TestSequentialCover:
    def test_ten_copies(self):
        tb = Treebank([T("(S (A a) (B b))")] * 10)
        spec = sequential_cover(tb, LOOSE)
        assert [l.key for l in spec.learned] == [("A", "B")]
        assert spec.learned[0].iteration == 1
        assert all(m == {(), (0,), (1,)} for m in spec.marked.marks)
        assert {str(e.tree) for e in spec.tsg.elems} == \
            {"(S (A) (B))", "(A a)", "(B b)"}

    def test_low_cp_learns_nothing_below_roots(self):
        tb = Treebank([T("(S (A a) (Y (B b) (C c)))")] * 5
                      + [T("(S (X (A a) (B b)) (C c))")] * 5)
        spec = sequential_cover(tb, LOOSE)
        for t, m in zip(tb, spec.marked.marks):
            assert m == {()} | {p for p in t.positions()
                                if p and t[p].is_preterminal}
        got = {str(e.tree) for e in spec.tsg.elems}
        assert {"(S (A) (Y (B) (C)))", "(S (X (A) (B)) (C))"} <= got
        assert not any(l.key in {("A", "B"), ("B", "C")} for l in spec.learned)

    def test_zero_coverage_bound(self):
        tb = Treebank([T("(S (A a) (B b))"), T("(S (B b) (A a))")])
        spec = sequential_cover(tb, LearnerConfig(phi=1, coverage_upper_bound=0))
        assert spec.learned == []
        assert all(m == {()} for m in spec.marked.marks)
        assert [e.tree for e in spec.tsg.elems] == list(tb)

    def test_deterministic(self):
        tb = random_treebank(random.Random(1), size=60)
        a = sequential_cover(tb, LearnerConfig(phi=3))
        b = sequential_cover(tb, LearnerConfig(phi=3))
        assert a.marked.marks == b.marked.marks
        assert a.learned == b.learned

    def test_delta_gate_sound(self):
        cfg = LearnerConfig(delta=0.95, phi=3)
        spec = sequential_cover(random_treebank(random.Random(2), size=80), cfg)
        assert spec.learned
        for l in spec.learned:
            assert l.cp > cfg.delta and l.freq_c >= cfg.phi

    @pytest.mark.parametrize("cfg", [LearnerConfig(phi=3),
                                     LearnerConfig(phi=3, use_backoff=True),
                                     LearnerConfig(phi=3, use_eqclass=True),
                                     LearnerConfig(phi=2, use_backoff=True,
                                                   use_eqclass=True)])
    def test_cuts_are_grammar_trees(self, cfg):
        tb = random_treebank(random.Random(3), size=80)
        spec = sequential_cover(tb, cfg)
        elems = {e.tree for e in specialized_grammar(spec).elems}
        for k, (t, marks) in enumerate(zip(tb, spec.marked.marks)):
            pieces = cut_oracle(t, marks)
            assert set(pieces) <= elems
            assert sorted(map(str, pieces)) == sorted(map(str, spec.marked.cut(k)))
            assert rebuild(t, marks, elems) == t


class TestCompletion:
    TREE = T("(S (X (A a) (B b)) (C c))")
    LEX = {(0, 0), (0, 1), (1,)}

    def test_mixed_realizations(self):
        tb = Treebank([self.TREE] * 4)
        marks = [self.LEX | {(), (0,)}] * 3 + [self.LEX | {()}]
        extra = complete_ambiguity_sets(CutMarkedTreebank(tb, marks))
        assert extra == [T("(X (A) (B))")]

    def test_all_marked(self):
        tb = Treebank([self.TREE] * 4)
        marks = [self.LEX | {(), (0,)}] * 4
        assert complete_ambiguity_sets(CutMarkedTreebank(tb, marks)) == []

    def test_all_unmarked(self):
        tb = Treebank([self.TREE] * 4)
        marks = [self.LEX | {()}] * 4
        assert complete_ambiguity_sets(CutMarkedTreebank(tb, marks)) == []

    def test_specialized_grammar_adds_completions(self):
        tb = Treebank([self.TREE] * 4)
        marks = [self.LEX | {(), (0,)}] * 3 + [self.LEX | {()}]
        spec = sequential_cover(Treebank([self.TREE]), LOOSE)
        spec.marked = CutMarkedTreebank(tb, marks)
        with_c = {e.tree for e in specialized_grammar(spec).elems}
        without = {e.tree for e in specialized_grammar(spec, completion=False).elems}
        assert with_c - without == {T("(X (A) (B))")}


class TestIntegratedParse:
    @staticmethod
    def grammars(tb, cfg):
        spec = sequential_cover(tb, cfg)
        spec_tsg = to_acnf(specialized_grammar(spec))
        full = to_acnf(project_dop(tb, ProjectionParams(3, 2, None, None)))
        sdop = to_acnf(project_sdop(spec.marked, ProjectionParams(3, 2, None, None)))
        return spec_tsg, full, sdop

    TB = Treebank([T("(S (A a) (X (B b) (C c)))")] * 10
                  + [T("(S (D d) (X (C c) (B b)))")])

    def test_dispatch(self):
        spec_tsg, full, sdop = self.grammars(self.TB, LearnerConfig(phi=5))
        seen = integrated_parse(spec_tsg, full, "abc", sdop)
        assert seen.dispatch == "sdop" and seen.complete[0, 3]
        assert seen.result.parse == T("(S (A a) (X (B b) (C c)))")
        novel = integrated_parse(spec_tsg, full, "dbc", sdop)
        assert novel.dispatch == "dop" and not novel.complete[0, 3]
        assert novel.result.parse == T("(S (D d) (X (B b) (C c)))")
        assert integrated_parse(spec_tsg, full, "ccc", sdop).dispatch == "noparse"

    def test_never_loses_recognition(self):
        tb = random_treebank(random.Random(5), size=60, max_words=6)
        spec_tsg, full, sdop = self.grammars(tb, LearnerConfig(phi=3))
        rng = random.Random(6)
        sentences = [t.words() for t in tb][:20]
        words = sorted(full.terminals)
        sentences += [tuple(rng.choice(words) for _ in range(rng.randint(1, 5)))
                      for _ in range(40)]
        for sent in sentences:
            ip = integrated_parse(spec_tsg, full, sent, sdop)
            alone = build_chart(full, WordGraph.linear(list(sent))).recognized
            assert (ip.dispatch != "noparse") == alone
            assert not ip.fallback

    def test_without_sdop_uses_full_grammar(self):
        spec_tsg, full, _ = self.grammars(self.TB, LearnerConfig(phi=5))
        ip = integrated_parse(spec_tsg, full, "abc")
        assert ip.dispatch == "dop"
        assert ip.result.parse == T("(S (A a) (X (B b) (C c)))")
