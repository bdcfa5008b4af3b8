"""Time the CKY recognition kernel: numba against the numpy fallback.

    python3 benchmarks/bench_cky.py [--trees 200] [--repeat 5]

A DOP grammar is projected from a synthetic tree-bank and the sampled
sentences are recognized with both backends.  Tables are checked to be
identical before timings are reported.
"""

import argparse
import random
import time

import numpy as np

from stsgkit._kernels import HAVE_NUMBA, cky_fill
from stsgkit.acnf import to_acnf
from stsgkit.chart import _empty, _lexical_key
from stsgkit.grammar import project_dop
from stsgkit.random_grammars import random_treebank
from stsgkit.trees import ProjectionParams


def prepared_tables(g, words):
    """Tables holding only the lexical entries, ready for the kernel."""
    n = len(words) + 1
    final, cat = _empty(g, n)
    for i, w in enumerate(words):
        key = _lexical_key(g, w, strict=False)
        for r in g.lexicon.get(key, ()) if key is not None else ():
            final[i, i + 1, r] = True
            cat[i, i + 1, g.rule_cat[r]] = True
    allowed = np.ones((n, n, len(g.categories)), dtype=np.bool_)
    return final, cat, allowed


def timed(g, tables, impl, repeat):
    best = float("inf")
    for _ in range(repeat):
        copies = [(f.copy(), c.copy(), a) for f, c, a in tables]
        t0 = time.perf_counter()
        for f, c, a in copies:
            cky_fill(f, c, a, g.binary, g.unary, impl=impl)
        best = min(best, time.perf_counter() - t0)
    return best, copies


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trees", type=int, default=200)
    ap.add_argument("--sentences", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    tb = random_treebank(rng, args.trees)
    g = to_acnf(project_dop(tb, ProjectionParams(max_depth=3)))
    sents = [t.words() for t in tb][:args.sentences]
    tables = [prepared_tables(g, s) for s in sents]
    print(f"grammar: {len(g.rules)} rules, {len(g.categories)} categories; "
          f"{len(sents)} sentences, mean length "
          f"{sum(map(len, sents)) / len(sents):.1f}")

    t_np, out_np = timed(g, tables, "numpy", args.repeat)
    print(f"numpy  {t_np * 1000:9.2f} ms")
    if not HAVE_NUMBA:
        print("numba not installed")
        return
    timed(g, tables[:1], "numba", 1)  # compile outside the timing
    t_nb, out_nb = timed(g, tables, "numba", args.repeat)
    for (f1, c1, _), (f2, c2, _) in zip(out_np, out_nb):
        assert (f1 == f2).all() and (c1 == c2).all(), "backends disagree"
    print(f"numba  {t_nb * 1000:9.2f} ms   speed-up {t_np / t_nb:.1f}x")


if __name__ == "__main__":
    main()
