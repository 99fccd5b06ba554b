"""Case-insensitive BLEU-4 with the shortest-reference brevity penalty."""

from __future__ import annotations

import math
from collections import Counter
from typing import List, Sequence

import numpy as np

MAX_ORDER = 4
# columns: matches[1..4], totals[1..4], hyp length, shortest reference length
N_STATS = 2 * MAX_ORDER + 2


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[k:k + n]) for k in range(len(tokens) - n + 1))


def sentence_stats(hyp: Sequence[str], refs: Sequence[Sequence[str]]) -> List[int]:
    if not refs:
        raise ValueError("every sentence needs at least one reference")
    hyp = [w.lower() for w in hyp]
    refs = [[w.lower() for w in r] for r in refs]
    stats = []
    totals = []
    for n in range(1, MAX_ORDER + 1):
        h = _ngrams(hyp, n)
        max_ref = Counter()
        for r in refs:
            for g, c in _ngrams(r, n).items():
                if c > max_ref[g]:
                    max_ref[g] = c
        stats.append(sum(min(c, max_ref[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return stats + totals + [len(hyp), min(len(r) for r in refs)]


def bleu_from_stats(stats: Sequence[float]) -> float:
    matches, totals = stats[:MAX_ORDER], stats[MAX_ORDER:2 * MAX_ORDER]
    c, r = stats[-2], stats[-1]
    if c == 0 or min(matches) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matches, totals)) / MAX_ORDER
    return math.exp(log_prec + min(0.0, 1.0 - r / c))


def corpus_stats(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[Sequence[str]]]) -> np.ndarray:
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses but {len(refs)} reference sets")
    return np.array([sentence_stats(h, r) for h, r in zip(hyps, refs)], dtype=np.int64).reshape(-1, N_STATS)


def bleu_corpus(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[Sequence[str]]]) -> float:
    """Corpus BLEU; ``refs[k]`` holds the reference token lists of sentence ``k``."""
    if not hyps:
        return 0.0
    return bleu_from_stats(corpus_stats(hyps, refs).sum(axis=0).tolist())


def bleu_sentence_plus1(hyp: Sequence[str], refs: Sequence[Sequence[str]]) -> float:
    """Sentence BLEU with add-one smoothing for orders 2-4; unigrams unsmoothed."""
    stats = sentence_stats(hyp, refs)
    matches, totals = stats[:MAX_ORDER], stats[MAX_ORDER:2 * MAX_ORDER]
    c, r = stats[-2], stats[-1]
    if c == 0 or matches[0] == 0:
        return 0.0
    log_prec = math.log(matches[0] / totals[0])
    for m, t in zip(matches[1:], totals[1:]):
        log_prec += math.log((m + 1) / (t + 1))
    return math.exp(log_prec / MAX_ORDER + min(0.0, 1.0 - r / c))
