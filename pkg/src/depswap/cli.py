"""Command-line entry point: ``depswap train | lm-train | decode | tune | evaluate``."""

from __future__ import annotations

import argparse
import csv
import logging
import multiprocessing
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .bleu import bleu_corpus
from .config import ConfigError, RunConfig
from .core import FormatError, read_phrase_table, read_weights, write_phrase_table, write_weights
from .decoder import DEFAULT_WEIGHTS, DecoderConfig, DecodingError, Models, decode, mbr_select
from .deptree import ParseError, read_conll
from .features import SentenceAnalysis
from .lm import lm_train, read_lm, write_lm
from .training import (build_top_words, collect_instances, estimate_reordering, read_parallel,
                       read_reordering, read_top_words, score_phrases, write_reordering,
                       write_top_words)
from .tuning import Candidate, bootstrap_significance, tune

log = logging.getLogger("depswap")

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_DECODE = 0, 1, 2, 3
FAILED_LINE = "<decoding-failed>"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- per-sentence work, shared with worker processes -------------------------------------

_WORKER = {}


def _init_worker(models: Models, cfg: DecoderConfig, sentences):
    _WORKER.update(models=models, cfg=cfg, sentences=sentences)


def _translate(args):
    """Decode one sentence; returns (index, output, nbest, chosen steps, error)."""
    idx, weights = args
    models, cfg = _WORKER["models"], _WORKER["cfg"]
    if weights is not None:
        models = Models(models.table, models.lm, weights, models.pblr, models.hr, models.top_words)
    sentence = _WORKER["sentences"][idx]
    try:
        analysis = SentenceAnalysis(sentence)
        result = decode(sentence, models, cfg, analysis)
        nb = result.nbest(max(cfg.nbest_size, 1))
    except (DecodingError, ParseError) as e:
        return idx, None, [], (), f"sentence {idx}: {e}"
    chosen = 0
    if cfg.mbr and len(nb) > 1:
        chosen = mbr_select([e.target for e in nb], [e.score for e in nb], cfg.mbr_scale)
    return idx, nb[chosen].target, nb, nb[chosen].steps, None


def decode_all(models: Models, cfg: DecoderConfig, sentences, jobs: int = 1, weights=None):
    """Decode every sentence; results are ordered by sentence index whatever ``jobs`` is."""
    tasks = [(k, weights) for k in range(len(sentences))]
    if jobs <= 1 or len(sentences) <= 1:
        _init_worker(models, cfg, sentences)
        return [_translate(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(jobs, initializer=_init_worker, initargs=(models, cfg, sentences)) as pool:
        out = pool.map(_translate, tasks, chunksize=max(1, len(tasks) // (4 * jobs)))
    return sorted(out, key=lambda r: r[0])


# --- model loading ----------------------------------------------------------------------

def load_models(rc: RunConfig, dc: DecoderConfig) -> Models:
    rc.validate(required=("phrase_table", "lm"))
    table = read_phrase_table(rc.get("phrase_table"), rc.get("table_limit"))
    lm = read_lm(rc.get("lm"))
    weights = read_weights(rc.get("weights")) if "weights" in rc else dict(DEFAULT_WEIGHTS)
    pblr = read_reordering(rc.get("pblr_table")) if dc.use_pblr and "pblr_table" in rc else None
    hr = read_reordering(rc.get("hr_table")) if dc.use_hr and "hr_table" in rc else None
    top = frozenset(read_top_words(rc.get("top_words"))) if "top_words" in rc else frozenset()
    if dc.use_shr and "top_words" not in rc:
        log.warning("shr features enabled without a top_words list; every word is backed off to its tag")
    return Models(table, lm, weights, pblr, hr, top)


def _run_config(args) -> RunConfig:
    overrides = list(args.set or [])
    if args.features is not None:
        overrides.append(f"features={args.features}")
    if getattr(args, "mbr", False):
        overrides.append("mbr=true")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    return RunConfig.load(args.config, overrides)


def _read_lines(path) -> List[List[str]]:
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def _read_refs(paths, n: int):
    ref_sets = []
    for path in paths:
        lines = _read_lines(path)
        if len(lines) != n:
            raise FormatError(f"{len(lines)} reference lines but {n} hypotheses", path=path)
        ref_sets.append(lines)
    return [list(refs) for refs in zip(*ref_sets)]


def _format_features(fv) -> str:
    return " ".join(f"{k}={v!r}" for k, v in sorted(fv.items()))


# --- commands -------------------------------------------------------------------------

def cmd_train(args) -> int:
    corpus = read_parallel(args.src, args.tgt, args.align)
    if not corpus:
        raise FormatError("empty training corpus", path=args.src)
    instances = collect_instances(corpus, args.max_len)
    if not instances:
        raise FormatError("no phrase pairs could be extracted (is the alignment empty?)", path=args.align)
    table = score_phrases(instances, limit=args.table_limit)
    pblr, hr = estimate_reordering(corpus, args.max_len)
    top = build_top_words((p.src for p in corpus), args.top_k)
    os.makedirs(args.out, exist_ok=True)
    write_phrase_table(table, os.path.join(args.out, "phrase-table"))
    write_reordering(pblr, os.path.join(args.out, "reordering.pblr"))
    write_reordering(hr, os.path.join(args.out, "reordering.hr"))
    write_top_words(top, os.path.join(args.out, "top-words"))
    print(f"sentences\t{len(corpus)}")
    print(f"phrase instances\t{len(instances)}")
    print(f"phrase pairs\t{sum(1 for _ in table.pairs())}")
    print(f"source phrases\t{len(table)}")
    print(f"reordering entries\t{len(pblr)}")
    print(f"top words\t{len(top)}")
    return EXIT_OK


def cmd_lm_train(args) -> int:
    sentences = _read_lines(args.text)
    if not any(sentences):
        raise FormatError("empty LM training text", path=args.text)
    lm = lm_train(sentences, args.order)
    write_lm(lm, args.out)
    print(f"order\t{lm.order}")
    print(f"vocabulary\t{len(lm.vocab)}")
    return EXIT_OK


def cmd_decode(args) -> int:
    rc = _run_config(args)
    dc = rc.decoder_config()
    if args.nbest and dc.nbest_size < 1:
        raise ConfigError("nbest_size must be >= 1 when writing n-best lists")
    models = load_models(rc, dc)
    sentences = read_conll(args.input, frozenset(rc.get("wall_tags")))
    results = decode_all(models, dc, sentences, rc.get("jobs"))
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    nb_file = open(args.nbest, "w", encoding="utf-8") if args.nbest else None
    dump = open(args.dump_features, "w", encoding="utf-8") if args.dump_features else None
    failed = 0
    try:
        for idx, target, nb, steps, err in results:
            if err is not None:
                failed += 1
                print(f"error: {err}", file=sys.stderr)
                out.write(FAILED_LINE + "\n")
                continue
            out.write(" ".join(target) + "\n")
            if nb_file:
                for e in nb:
                    nb_file.write(f"{idx} ||| {' '.join(e.target)} ||| {_format_features(e.features)} "
                                  f"||| {e.score!r}\n")
            if dump:
                for step, (_, _, delta) in enumerate(steps, 1):
                    for key in sorted(k for k in delta if not k.startswith("dense|")):
                        dump.write(f"{idx}\t{step}\t{key}\n")
    finally:
        for f in (nb_file, dump):
            if f:
                f.close()
        if out is not sys.stdout:
            out.close()
    return EXIT_DECODE if failed else EXIT_OK


def cmd_tune(args) -> int:
    rc = _run_config(args)
    if args.iterations is not None:
        rc.set("pro_iterations", args.iterations)
    dc = rc.decoder_config()
    pc = rc.pro_config()
    models = load_models(rc, dc)
    sentences = read_conll(args.input, frozenset(rc.get("wall_tags")))
    if not args.refs:
        raise UsageError("tune needs at least one reference file")
    refs = _read_refs(args.refs, len(sentences))
    jobs = rc.get("jobs")
    os.makedirs(args.out, exist_ok=True)

    def nbest_fn(w):
        lists = []
        for idx, _, nb, _, err in decode_all(models, dc, sentences, jobs, weights=w):
            if err is not None:
                raise DecodingError(err)
            lists.append([Candidate(e.target, e.features) for e in nb])
        return lists

    def save(it, w, bleu):
        write_weights(w, os.path.join(args.out, f"weights.iter{it}"))

    write_weights(models.weights, os.path.join(args.out, "weights.iter0"))
    w, trace = tune(nbest_fn, refs, models.weights, pc, save)
    write_weights(w, os.path.join(args.out, "weights"))
    with open(os.path.join(args.out, "trace.csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["iter", "bleu"])
        for it, bleu in trace:
            writer.writerow([it, f"{bleu:.6f}"])
    for it, bleu in trace:
        print(f"iter {it}\tBLEU {bleu:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    hyps = _read_lines(args.hyp)
    refs = _read_refs(args.refs, len(hyps))
    if args.significance:
        other = _read_lines(args.significance)
        if len(other) != len(hyps):
            raise FormatError(f"{len(other)} lines in the comparison system but {len(hyps)} hypotheses",
                              path=args.significance)
        res = bootstrap_significance(hyps, other, refs, args.resamples, args.seed or 0)
        print(f"BLEU\t{res.bleu_a:.4f}")
        print(f"BLEU other\t{res.bleu_b:.4f}")
        print(f"p(BLEU <= other)\t{res.p_a_le_b:.4f}")
        print(f"p(other <= BLEU)\t{res.p_b_le_a:.4f}")
    else:
        print(f"BLEU\t{bleu_corpus(hyps, refs):.4f}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="depswap", description="Phrase-based translation with dependency reordering features.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, decoding=True):
        sp.add_argument("--seed", type=int, default=None)
        if decoding:
            sp.add_argument("-c", "--config", help="key = value run configuration")
            sp.add_argument("-o", "--set", action="append", metavar="KEY=VALUE",
                            help="override a configuration key (repeatable)")
            sp.add_argument("--features", default=None, help="comma-separated subset of ds,ddp,shr,path")
            sp.add_argument("--jobs", type=int, default=None, help="decode sentences in J processes")

    t = sub.add_parser("train", help="extract and score phrase and reordering tables")
    t.add_argument("--src", required=True)
    t.add_argument("--tgt", required=True)
    t.add_argument("--align", required=True)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--max-len", type=int, default=7)
    t.add_argument("--table-limit", type=int, default=20)
    t.add_argument("--top-k", type=int, default=80)
    common(t, decoding=False)
    t.set_defaults(func=cmd_train)

    lmp = sub.add_parser("lm-train", help="train a Witten-Bell backoff n-gram LM")
    lmp.add_argument("--text", required=True)
    lmp.add_argument("--order", type=int, default=3)
    lmp.add_argument("--out", required=True)
    common(lmp, decoding=False)
    lmp.set_defaults(func=cmd_lm_train)

    d = sub.add_parser("decode", help="translate a parsed source file")
    d.add_argument("--input", required=True, help="CoNLL-style parse file")
    d.add_argument("--output", help="translations (default stdout)")
    d.add_argument("--mbr", action="store_true", help="rerank the n-best list by MBR")
    d.add_argument("--nbest", metavar="FILE")
    d.add_argument("--dump-features", metavar="FILE")
    common(d)
    d.set_defaults(func=cmd_decode)

    tu = sub.add_parser("tune", help="PRO weight tuning on a dev set")
    tu.add_argument("--input", required=True, help="dev parse file")
    tu.add_argument("--refs", nargs="+", required=True)
    tu.add_argument("--out", required=True, help="output directory for weights and trace")
    tu.add_argument("--iterations", type=int)
    common(tu)
    tu.set_defaults(func=cmd_tune)

    e = sub.add_parser("evaluate", help="corpus BLEU and bootstrap significance")
    e.add_argument("hyp")
    e.add_argument("refs", nargs="+")
    e.add_argument("--significance", metavar="OTHER_HYP")
    e.add_argument("--resamples", type=int, default=1000)
    common(e, decoding=False)
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ParseError, UnicodeDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as e:
        print(f"error: {e.strerror}: {e.filename}", file=sys.stderr)
        return EXIT_FORMAT
    except DecodingError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DECODE


if __name__ == "__main__":
    sys.exit(main())
