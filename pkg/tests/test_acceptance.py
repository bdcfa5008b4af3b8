"""Acceptance suite: one test per criterion, each printed as a PASS/FAIL
line in the terminal summary.  Run alone with

    pytest tests/test_acceptance.py -v
"""

import math
import random
import subprocess
import sys
import time
from collections import defaultdict
from fractions import Fraction
from pathlib import Path

import pytest

from oracles import compose_cnf, cut_oracle, rebuild
from stsgkit.acnf import category, reverse_parse, to_acnf
from stsgkit.chart import WordGraph, build_chart, cky_sentence, cky_wordgraph, scfg_viterbi
from stsgkit.disambig import (count_checks, enumerate_derivations,
                              input_probability, mpd, mpid, parse_probability,
                              recognize_derivation_tree, stsg_language,
                              string_language)
from stsgkit.evaluation import parseval
from stsgkit.grammar import project_dop, project_sdop, scfg_of
from stsgkit.npc import (KINDS, Cnf3Formula, build_instance,
                         decide_by_bruteforce, random_formula, sat_bruteforce,
                         tree_count_bound)
from stsgkit.random_grammars import (random_depth1_stsg, random_stsg,
                                     random_treebank, random_wordgraph)
from stsgkit.specialize import (LearnerConfig, integrated_parse,
                                sequential_cover, specialized_grammar)
from stsgkit.trees import ProjectionParams, load_treebank, parse_bracketed as T

ROOT = Path(__file__).resolve().parent.parent
TOL = 1e-9


def oracle_corpus(seed=2024, size=200):
    """Random STSGs (at most 8 elementary trees of depth at most 3) with
    every sentence of length at most 5 they derive."""
    rng = random.Random(seed)
    out = []
    for _ in range(size):
        stsg = random_stsg(rng, max_trees=8, max_depth=3)
        out.append((stsg, sorted(stsg_language(stsg, 5))))
    return out


CORPUS = oracle_corpus()


@pytest.mark.criterion(1, "oracle MPD equivalence")
def test_oracle_mpd_equivalence(record_property):
    start = time.perf_counter()
    checked = 0
    for stsg, sentences in CORPUS:
        g = to_acnf(stsg)
        for sent in sentences:
            derivs = enumerate_derivations(stsg, list(sent), build=False)
            best = max(math.log(d.prob) for d in derivs)
            res = mpd(g, cky_sentence(g, list(sent)))
            assert res is not None, (stsg, sent)
            assert abs(res.logprob - best) <= TOL
            assert recognize_derivation_tree(stsg, res.decorated)
            checked += 1
    elapsed = time.perf_counter() - start
    record_property("detail", f"{len(CORPUS)} grammars, {checked} sentences, "
                              f"{elapsed:.1f}s")
    assert len(CORPUS) >= 200 and checked > 0
    assert elapsed < 60


@pytest.mark.criterion(2, "probability-sum equivalence")
def test_probability_sums(record_property):
    checked_parses = 0
    for stsg, sentences in CORPUS:
        g = to_acnf(stsg)
        for sent in sentences:
            derivs = enumerate_derivations(stsg, list(sent))
            total = math.log(sum(d.prob for d in derivs))
            got = input_probability(g, cky_sentence(g, list(sent)))
            assert abs(got - total) <= TOL
            by_parse = defaultdict(float)
            for d in derivs:
                by_parse[d.tree.parse] += d.prob
            for parse, p in by_parse.items():
                assert abs(parse_probability(g, parse) - math.log(p)) <= TOL
                checked_parses += 1
    record_property("detail", f"{checked_parses} parses")


@pytest.mark.criterion(3, "SCFG degeneracy")
def test_scfg_degeneracy(record_property):
    rng = random.Random(3)
    checked = 0
    for _ in range(50):
        stsg = random_depth1_stsg(rng)
        g, scfg = to_acnf(stsg), scfg_of(stsg)
        for sent in sorted(stsg_language(stsg, 5)):
            a = mpd(g, cky_sentence(g, list(sent)))
            b = scfg_viterbi(scfg, list(sent))
            assert a.parse == b.parse
            assert a.logprob == b.logprob
            checked += 1
    record_property("detail", f"50 grammars, {checked} sentences")
    assert checked > 0


@pytest.mark.criterion(4, "ACNF language preservation")
def test_acnf_language_preservation(record_property):
    rng = random.Random(4)
    sentences = round_trips = 0
    for _ in range(50):
        stsg = random_stsg(rng, max_trees=8, max_depth=3)
        g = to_acnf(stsg)
        before = stsg_language(stsg, 6)
        by_cat = defaultdict(list)
        for r in g.rules:
            by_cat[category(r.lhs)].append(r.rhs)
        candidates = string_language(by_cat, g.start, 6,
                                     lambda s: s in g.cat_index)
        after = {s for s in candidates
                 if mpd(g, cky_sentence(g, list(s))) is not None}
        assert before == after
        sentences += len(before)
        for sent in before:
            for d in enumerate_derivations(stsg, list(sent)):
                cnf = compose_cnf(g, d.ids, sent)
                assert reverse_parse(g, cnf) == d.tree.parse
                round_trips += 1
    record_property("detail", f"{sentences} sentences, "
                              f"{round_trips} round trips")


@pytest.mark.criterion(5, "word-graph correctness")
def test_wordgraph_correctness(record_property):
    rng = random.Random(5)
    recognized = 0
    for k in range(50):
        stsg = random_stsg(rng)
        g = to_acnf(stsg)
        # most graphs are built around a derivable sentence
        lang = sorted(stsg_language(stsg, 5))
        backbone = rng.choice(lang) if lang and k % 5 else None
        wg = random_wordgraph(rng, max_states=6, words=sorted(stsg.terminals),
                              backbone=backbone)
        # brute force: every path, every derivation of its sentence
        scored = []
        for path in wg.paths():
            sent = [t.word for t in path]
            p_path = math.prod(t.prob for t in path)
            for d in enumerate_derivations(stsg, sent, build=False):
                scored.append((math.log(p_path) + math.log(d.prob), tuple(sent)))
        res = mpid(g, cky_wordgraph(g, wg))
        if not scored:
            assert res is None
            continue
        recognized += 1
        best = max(s for s, _ in scored)
        assert abs(res.logprob - best) <= TOL
        assert res.sentence in {s for v, s in scored if abs(v - best) <= TOL}
        assert recognize_derivation_tree(stsg, res.decorated)
        for sent in {s for _, s in scored}:
            a = mpd(g, cky_sentence(g, list(sent)))
            b = mpid(g, cky_wordgraph(g, WordGraph.linear(list(sent))))
            assert (a.logprob, a.derivation, a.parse) == \
                (b.logprob, b.derivation, b.parse)
    record_property("detail", f"50 graphs, {recognized} recognized")
    assert recognized > 0


def theta_requirements(inst):
    f, b, theta = inst.formula, inst.base, inst.theta
    lo, hi = inst.theta_interval
    total = sum(b ** f.occurrences(v) for v in range(1, f.num_vars + 1))
    p0 = 1 - 2 * theta * total
    p_i = [theta * b ** f.occurrences(v) for v in range(1, f.num_vars + 1)]
    q = f.num_vars * theta * b ** (3 * f.m) + p0 * b ** (2 * f.m) * Fraction(1, 3) ** f.m
    second = p0 * b ** (2 * f.m) * Fraction(1, 3) ** f.m
    return (lo < theta < hi and 0 < p0 < 1 and all(0 < p < 1 for p in p_i)
            and 3 ** f.m * second < theta * b ** (3 * f.m) and q == inst.q)


@pytest.mark.criterion(6, "reduction answer preservation")
def test_reduction_answer_preservation(record_property):
    start = time.perf_counter()
    example = Cnf3Formula(3, ((1, -2, 3), (-1, 2, -3)))
    for kind in KINDS:
        inst = build_instance(example, kind)
        assert decide_by_bruteforce(inst)
        assert theta_requirements(inst)
    assert build_instance(example, "MPPWG").theta == Fraction(13, 21)
    rng = random.Random(6)
    # random small formulas are nearly always satisfiable; add some that are not
    unsat = [Cnf3Formula(1, ((1, 1, 1), (-1, -1, -1))),
             Cnf3Formula(2, ((1, 1, 2), (-1, -1, -1), (-2, -2, -2))),
             Cnf3Formula(3, ((1, 1, 3), (-1, -1, -1), (-3, -3, -3))),
             Cnf3Formula(2, ((1, 2, 1), (-1, 2, -1), (-2, -2, -2)))]
    formulas = [random_formula(rng, max_vars=3, max_clauses=3)
                for _ in range(60)] + unsat
    yes = 0
    for f in formulas:
        want = sat_bruteforce(f)
        yes += want
        n = len(f.used_variables())
        for kind in KINDS:
            inst = build_instance(f, kind)
            assert decide_by_bruteforce(inst) == want
            assert theta_requirements(inst)
            assert len(inst.stsg) <= tree_count_bound(f, kind)
            if kind != "MPP":  # the lexicalized variant has 4n trees per word
                assert len(inst.stsg) <= 2 * n + 1 + 3 * f.m + 4 * n
    elapsed = time.perf_counter() - start
    assert yes < len(formulas)
    record_property("detail", f"{len(formulas)} formulas ({yes} satisfiable) "
                              f"x 4 kinds, "
                              f"{elapsed:.1f}s")
    assert elapsed < 120


@pytest.mark.criterion(7, "linearity contrast")
def test_linearity_contrast(record_property):
    tb = random_treebank(random.Random(7), size=40, max_words=8)
    base = project_dop(tb, ProjectionParams(3, 2, None, None))
    sentence = list(max((t.words() for t in tb), key=len))
    opt, naive = [], []
    for factor in (1, 2, 4):
        g = to_acnf(base.duplicated(factor) if factor > 1 else base)
        chart = cky_sentence(g, sentence)
        opt.append(count_checks(g, chart))
        naive.append(count_checks(g, chart, naive=True))
    o2, o4 = opt[1] / opt[0], opt[2] / opt[0]
    n2, n4 = naive[1] / naive[0], naive[2] / naive[0]
    record_property("detail", f"optimized x{o2:.2f}/x{o4:.2f}, "
                              f"naive x{n2:.2f}/x{n4:.2f}")
    assert o2 <= 2.2 and o4 <= 4.8
    assert n2 >= 3.5 and n4 >= 12


@pytest.mark.criterion(8, "specialization TLC conservation")
def test_specialization(record_property):
    tb = random_treebank(random.Random(8), size=200)
    cfg = LearnerConfig(delta=0.95, phi=5)
    spec = sequential_cover(tb, cfg)
    tsg = specialized_grammar(spec)
    elems = {e.tree for e in tsg.elems}
    for t, marks in zip(tb, spec.marked.marks):
        assert set(cut_oracle(t, marks)) <= elems
        assert rebuild(t, marks, elems) == t
    assert spec.learned
    assert all(s.cp > cfg.delta and s.freq_c >= cfg.phi for s in spec.learned)

    params = ProjectionParams(4, 2, 7, 3)
    full = to_acnf(project_dop(tb, params))
    sdop = to_acnf(project_sdop(spec.marked, params))
    spec_g = to_acnf(tsg)
    rng = random.Random(80)
    words = sorted(full.terminals)
    sentences = [t.words() for t in tb]
    sentences += [tuple(rng.choice(words) for _ in range(rng.randint(1, 6)))
                  for _ in range(100)]
    # sentences of the full grammar's trees with two words swapped
    for t in tb[:50]:
        w = list(t.words())
        if len(w) > 2:
            i = rng.randrange(len(w) - 1)
            w[i], w[i + 1] = w[i + 1], w[i]
            sentences.append(tuple(w))
    dispatch = defaultdict(int)
    for sent in sentences:
        ip = integrated_parse(spec_g, full, sent, sdop)
        alone = build_chart(full, WordGraph.linear(list(sent))).recognized
        assert (ip.dispatch != "noparse") == alone
        dispatch[ip.dispatch] += 1
    record_property("detail", f"{len(spec.learned)} SSFs learned, dispatch "
                    + " ".join(f"{k}={v}" for k, v in sorted(dispatch.items())))


@pytest.mark.criterion(9, "PARSEVAL correctness")
def test_parseval():
    flat = T("(S (A a) (B b) (C c))")
    left = T("(S (X (A a) (B b)) (C c))")
    right = T("(S (A a) (Y (B b) (C c)))")
    np_ = T("(S (NP (D the) (N dog)) (V barks))")
    vp = T("(S (VP (D the) (N dog)) (V barks))")
    fields = ("labeled_recall", "labeled_precision", "bracket_recall",
              "bracket_precision", "ncb_recall", "ncb_precision",
              "zero_crossing", "exact_match")
    cases = [
        (flat, left, (1, 4 / 5, 1, 4 / 5, 1, 1, 1, 0)),
        (left, right, (4 / 5,) * 6 + (0, 0)),
        (np_, vp, (4 / 5, 4 / 5, 1, 1, 1, 1, 1, 0)),
    ]
    for gold, test, want in cases:
        rep = parseval([gold], [test])
        assert tuple(getattr(rep, f) for f in fields) == want
    gold = [flat, left, right, np_, vp]
    assert all(v == 1.0 for v in parseval(gold, gold).measures().values())


def run_cli(*args, cwd):
    proc = subprocess.run([sys.executable, "-m", "stsgkit", *map(str, args)],
                          cwd=cwd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


@pytest.mark.criterion(10, "end-to-end CLI smoke")
def test_cli_smoke(tmp_path, record_property):
    treebank = ROOT / "data" / "toy_treebank.txt"
    sentences = tmp_path / "sentences.txt"
    sentences.write_text("".join(" ".join(t.words()) + "\n"
                                 for t in load_treebank(treebank)),
                         encoding="utf-8")
    outputs = []
    for run in range(2):
        d = tmp_path / f"run{run}"
        d.mkdir()
        run_cli("project", treebank, d / "g.stsg", cwd=d)
        run_cli("parse", d / "g.stsg", sentences, "-o", d / "r.txt",
                "--jobs", "1", cwd=d)
        report = run_cli("eval", treebank, d / "r.txt", "--key-values", cwd=d)
        outputs.append(((d / "g.stsg").read_text(encoding="utf-8"),
                        (d / "r.txt").read_text(encoding="utf-8"), report))
    assert outputs[0] == outputs[1]
    kv = dict(ln.split("=", 1) for ln in outputs[0][2].split())
    record_property("detail", f"exact_match={float(kv['exact_match']):.2%}")
    assert float(kv["exact_match"]) == 1.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
