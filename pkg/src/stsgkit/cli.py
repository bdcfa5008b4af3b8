"""Command-line interface: ``stsgkit <command> ...``.

Run ``stsgkit <command> --help`` for the arguments of each command.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from .acnf import AcnfGrammar, to_acnf
from .chart import (WordGraph, build_chart, read_wordgraphs, scfg_viterbi,
                    write_wordgraph)
from .disambig import (OracleLimitError, enumerate_derivations,
                       input_probability, mpd, recognize_derivation_tree)
from .evaluation import parseval
from .grammar import (GrammarError, project_dop, project_sdop,
                      read_marked_treebank, read_stsg, scfg_of,
                      validate_stsg, write_marked_treebank, write_stsg)
from .npc import KINDS, build_instance, parse_dimacs
from .random_grammars import random_stsg, random_wordgraph
from .specialize import (LearnerConfig, integrated_parse, sequential_cover,
                         specialized_grammar)
from .trees import ProjectionParams, Tree, load_treebank, parse_bracketed

log = logging.getLogger("stsgkit")

NOPARSE = "NOPARSE"


# ----------------------------------------------------------------------
# inputs and outputs

def read_inputs(path, wordgraph: bool) -> list:
    if wordgraph:
        return read_wordgraphs(path)
    with open(path, encoding="utf-8") as f:
        return [WordGraph.linear(ln.split()) for ln in f if ln.strip()]


def format_result(logprob: float, parse: Tree, ids, sentence=None) -> str:
    fields = [repr(float(logprob)), str(parse), ",".join(map(str, ids))]
    if sentence is not None:
        fields.append(" ".join(sentence))
    return "\t".join(fields)


def read_results(path) -> tuple:
    """Parses and sentences from a result file; ``None`` for NOPARSE.

    Plain tree-bank lines are accepted too.
    """
    parses, sentences = [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            s = line.rstrip("\n")
            if not s.strip():
                continue
            if s.strip() == NOPARSE:
                parses.append(None)
                sentences.append(None)
                continue
            cols = s.split("\t")
            if len(cols) == 1:
                t = parse_bracketed(cols[0])
                parses.append(t)
                sentences.append(t.words())
            else:
                parses.append(parse_bracketed(cols[1]))
                sentences.append(tuple(cols[3].split()) if len(cols) > 3
                                 else None)
    return parses, sentences


# Grammar state of worker processes, set once by _init_worker.
_WORKER: dict = {}


def _init_worker(state: dict) -> None:
    _WORKER.clear()
    _WORKER.update(state)


def _parse_one(wg: WordGraph) -> str:
    mode = _WORKER["mode"]
    show_sentence = not wg.is_linear()
    if mode == "viterbi":
        res = scfg_viterbi(_WORKER["scfg"], wg)
        if res is None:
            return NOPARSE
        return format_result(res.logprob, res.parse, res.rules,
                             res.sentence if show_sentence else None)
    if mode == "isdop":
        out = integrated_parse(_WORKER["spec"], _WORKER["g"], wg,
                               _WORKER.get("sdop"))
        res = out.result
    else:
        g = _WORKER["g"]
        chart = build_chart(g, wg)
        res = mpd(g, chart)
        if res is not None and mode == "prob":
            return format_result(input_probability(g, chart), res.parse,
                                 res.derivation,
                                 res.sentence if show_sentence else None)
    if res is None:
        return NOPARSE
    return format_result(res.logprob, res.parse, res.derivation,
                         res.sentence if show_sentence else None)


def _safe_parse_one(wg: WordGraph) -> tuple:
    try:
        return _parse_one(wg), None
    except Exception as exc:  # reported by the caller, batch goes on
        return NOPARSE, f"{type(exc).__name__}: {exc}"


def run_batch(state: dict, inputs: list, out, jobs: int) -> int:
    """Parse every input, write one line each; returns the failure count."""
    if jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker,
                                 initargs=(state,)) as pool:
            results = list(pool.map(_safe_parse_one, inputs, chunksize=4))
    else:
        _init_worker(state)
        results = map(_safe_parse_one, inputs)
    failures = 0
    for k, (line, err) in enumerate(results):
        if err:
            failures += 1
            log.error("input %d: %s", k + 1, err)
        out.write(line + "\n")
        out.flush()
    return failures


def _open_out(path):
    if path:
        return open(path, "w", encoding="utf-8")
    return contextlib.nullcontext(sys.stdout)


# ----------------------------------------------------------------------
# commands

def cmd_project(args) -> int:
    tb = load_treebank(args.treebank)
    g = project_dop(tb, _params(args), args.add_one_unknowns)
    write_stsg(g, args.output)
    log.info("%d elementary trees written to %s", len(g), args.output)
    return 0


def cmd_sdop(args) -> int:
    mtb = read_marked_treebank(args.marked)
    g = project_sdop(mtb, _params(args), args.add_one_unknowns)
    write_stsg(g, args.output)
    return 0


def cmd_specialize(args) -> int:
    tb = load_treebank(args.treebank)
    cfg = LearnerConfig(delta=args.delta, phi=args.phi,
                        max_ssf_len=args.max_ssf_len,
                        coverage_upper_bound=args.coverage,
                        use_backoff=args.backoff, use_eqclass=args.eqclass)
    spec = sequential_cover(tb, cfg)
    write_marked_treebank(spec.marked, args.marked)
    tsg = specialized_grammar(spec, completion=not args.no_completion)
    write_stsg(tsg, args.tsg, placeholder=True)
    for s in spec.learned:
        log.info("iteration %d: %s cp=%.4f measure=%g", s.iteration,
                 " ".join(s.key) if isinstance(s.key, tuple) else s.key,
                 s.cp, s.measure)
    return 0


def _grammar(path, dump: Optional[str] = None) -> AcnfGrammar:
    g = to_acnf(read_stsg(path))
    if dump:
        Path(dump).write_text(g.dump() + "\n", encoding="utf-8")
    return g


def cmd_parse(args) -> int:
    inputs = read_inputs(args.input, args.wordgraph)
    if args.mode == "viterbi":
        state = {"mode": "viterbi", "scfg": scfg_of(read_stsg(args.grammar))}
    else:
        state = {"mode": args.mode, "g": _grammar(args.grammar, args.dump_acnf)}
    with _open_out(args.output) as out:
        failures = run_batch(state, inputs, out, args.jobs)
    return 1 if failures else 0


def cmd_isdop_parse(args) -> int:
    inputs = read_inputs(args.input, args.wordgraph)
    state = {"mode": "isdop", "spec": _grammar(args.spec),
             "g": _grammar(args.dop)}
    if args.sdop:
        state["sdop"] = _grammar(args.sdop)
    with _open_out(args.output) as out:
        failures = run_batch(state, inputs, out, args.jobs)
    return 1 if failures else 0


def cmd_eval(args) -> int:
    gold = list(load_treebank(args.gold))
    test, sentences = read_results(args.test)
    sentences = [s if s is not None or t is None else t.words()
                 for s, t in zip(sentences, test)]
    rep = parseval(gold, test, test_sentences=sentences)
    print(rep.as_key_values() if args.key_values else rep.as_text())
    return 0


def cmd_reduce3sat(args) -> int:
    formula = parse_dimacs(Path(args.formula).read_text(encoding="utf-8"))
    kinds = KINDS if args.kind == "all" else (args.kind,)
    prefix = args.prefix or str(Path(args.formula).with_suffix(""))
    for kind in kinds:
        inst = build_instance(formula, kind)
        stem = f"{prefix}.{kind}"
        write_stsg(inst.stsg, stem + ".stsg")
        with open(stem + ".wg", "w", encoding="utf-8") as f:
            write_wordgraph(inst.wordgraph, f)
        print(inst.manifest())
    return 0


def _verify_one(stsg, wg, tol, max_length) -> list:
    """Mismatches between optimized parsing and exhaustive enumeration."""
    g = to_acnf(stsg)
    chart = build_chart(g, wg)
    derivs = enumerate_derivations(stsg, wg, max_length=max_length)
    problems = []
    res = mpd(g, chart)
    if not derivs:
        if res is not None:
            problems.append("parsed an input with no derivations")
        return problems
    if res is None:
        return ["no parse although derivations exist"]
    best = max(math.log(d.prob) for d in derivs)
    if abs(res.logprob - best) > tol:
        problems.append(f"MPD {res.logprob!r} != enumerated {best!r}")
    if not recognize_derivation_tree(stsg, res.decorated):
        problems.append("MPD decoration is not a derivation")
    total = math.log(sum(d.prob for d in derivs))
    got = input_probability(g, chart)
    if abs(got - total) > tol:
        problems.append(f"input probability {got!r} != enumerated {total!r}")
    return problems


def cmd_verify(args) -> int:
    cases = []
    if args.random:
        rng = random.Random(args.seed)
        for k in range(args.random):
            g = random_stsg(rng)
            cases.append((f"random {k}", g, random_wordgraph(rng)))
    else:
        if not (args.grammar and args.input):
            log.error("verify needs GRAMMAR and INPUT, or --random N")
            return 2
        g = read_stsg(args.grammar)
        for k, wg in enumerate(read_inputs(args.input, args.wordgraph)):
            cases.append((f"input {k + 1}", g, wg))
    mismatches = skipped = 0
    for name, g, wg in cases:
        try:
            problems = _verify_one(g, wg, args.tol, args.max_length)
        except OracleLimitError as exc:
            skipped += 1
            print(f"{name}\tSKIP\t{exc}")
            continue
        if problems:
            mismatches += 1
            print(f"{name}\tMISMATCH\t" + "; ".join(problems))
        else:
            print(f"{name}\tOK")
    print(f"checked={len(cases) - skipped} skipped={skipped} "
          f"mismatches={mismatches}")
    return 1 if mismatches else 0


def cmd_validate(args) -> int:
    diags = validate_stsg(read_stsg(args.grammar))
    for d in diags:
        print(f"{d.kind}\t{d.message}")
    return 1 if diags else 0


# ----------------------------------------------------------------------
# argument parsing

def _params(args) -> ProjectionParams:
    return ProjectionParams(max_depth=args.d, max_sites=args.n,
                            max_terminals=args.l,
                            max_consecutive_terminals=args.L)


def _add_projection(p) -> None:
    p.add_argument("-d", type=int, default=4, help="maximum depth")
    p.add_argument("-n", type=int, default=2, help="maximum substitution sites")
    p.add_argument("-l", type=int, default=7, help="maximum terminals")
    p.add_argument("-L", type=int, default=3,
                   help="maximum consecutive terminals")
    p.add_argument("--add-one-unknowns", action="store_true",
                   help="add-one smoothing plus an unknown-word tree per POS")


def _add_batch(p) -> None:
    p.add_argument("input", help="sentences, one per line, or word-graphs")
    p.add_argument("-o", "--output", help="result file (default stdout)")
    p.add_argument("--wordgraph", action="store_true",
                   help="input holds word-graphs rather than sentences")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stsgkit", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="tree-bank -> DOP grammar")
    p.add_argument("treebank")
    p.add_argument("output")
    _add_projection(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("sdop", help="marked tree-bank -> specialized DOP grammar")
    p.add_argument("marked")
    p.add_argument("output")
    _add_projection(p)
    p.set_defaults(func=cmd_sdop)

    p = sub.add_parser("specialize", help="learn cut marks and a specialized TSG")
    p.add_argument("treebank")
    p.add_argument("--marked", required=True, help="output marked tree-bank")
    p.add_argument("--tsg", required=True, help="output specialized TSG")
    p.add_argument("--delta", type=float, default=0.95)
    p.add_argument("--phi", type=int, default=5)
    p.add_argument("--max-ssf-len", type=int, default=8)
    p.add_argument("--coverage", type=float, default=None,
                   help="stop once this fraction of nodes is reduced")
    p.add_argument("--backoff", action="store_true")
    p.add_argument("--eqclass", action="store_true")
    p.add_argument("--no-completion", action="store_true",
                   help="skip ambiguity-set completion")
    p.set_defaults(func=cmd_specialize)

    p = sub.add_parser("parse", help="parse sentences or word-graphs")
    p.add_argument("grammar")
    _add_batch(p)
    p.add_argument("--mode", choices=("mpd", "prob", "mpid", "viterbi"),
                   default="mpd")
    p.add_argument("--dump-acnf", metavar="FILE",
                   help="write the compiled rule set with occurrence counts")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("isdop-parse", help="specialized-then-full parsing")
    p.add_argument("--spec", required=True, help="specialized TSG")
    p.add_argument("--dop", required=True, help="full DOP grammar")
    p.add_argument("--sdop", help="specialized DOP grammar")
    _add_batch(p)
    p.set_defaults(func=cmd_isdop_parse)

    p = sub.add_parser("eval", help="score results against gold trees")
    p.add_argument("gold")
    p.add_argument("test")
    p.add_argument("--key-values", action="store_true",
                   help="machine-readable key=value output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reduce3sat", help="3CNF formula -> decision instance")
    p.add_argument("formula", help="DIMACS file")
    p.add_argument("--kind", choices=KINDS + ("all",), default="all")
    p.add_argument("--prefix", help="output path prefix")
    p.set_defaults(func=cmd_reduce3sat)

    p = sub.add_parser("verify", help="compare parsing with enumeration")
    p.add_argument("grammar", nargs="?")
    p.add_argument("input", nargs="?")
    p.add_argument("--wordgraph", action="store_true")
    p.add_argument("--random", type=int, default=0, metavar="N",
                   help="check N random grammars instead")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-length", type=int, default=7)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("validate", help="check a grammar file")
    p.add_argument("grammar")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (OSError, ValueError, GrammarError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
