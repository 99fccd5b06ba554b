"""Small Witten-Bell backoff n-gram language model.

Probabilities are log10, as in ARPA files. The interpolated Witten-Bell
estimate is stored in backoff form without loss: seen n-grams hold the
interpolated probability and each history ``h`` gets the backoff weight
``T(h) / (c(h) + T(h))``, where ``T(h)`` counts distinct continuations.
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Dict, Iterable, List, Sequence, Tuple

from .core import FormatError

BOS = "<s>"
EOS = "</s>"
DEFAULT_OOV_LOGPROB = -7.0
NO_PROB = -99.0

State = Tuple[str, ...]


class NGramLM:
    def __init__(self, order: int, probs: Dict[Tuple[str, ...], float],
                 backoffs: Dict[Tuple[str, ...], float], oov_logprob: float = DEFAULT_OOV_LOGPROB):
        if order < 1:
            raise ValueError("LM order must be >= 1")
        self.order = order
        self.probs = probs
        self.backoffs = backoffs
        self.oov_logprob = oov_logprob
        self.vocab = frozenset(ng[0] for ng in probs if len(ng) == 1)

    def begin(self) -> State:
        return (BOS,) if self.order > 1 else ()

    def score(self, state: State, word: str) -> Tuple[float, State]:
        """log10 p(word | state) and the successor state."""
        if word not in self.vocab or word == BOS:
            return self.oov_logprob, ()
        keep = self.order - 1
        ctx = state[-keep:] if keep else ()
        lp = 0.0
        while (ctx + (word,)) not in self.probs:
            lp += self.backoffs.get(ctx, 0.0)
            ctx = ctx[1:]
        lp += self.probs[ctx + (word,)]
        new_state = (state + (word,))[-keep:] if keep else ()
        return lp, new_state

    def end(self, state: State) -> float:
        return self.score(state, EOS)[0]

    def score_sentence(self, words: Sequence[str]) -> float:
        state = self.begin()
        total = 0.0
        for w in words:
            lp, state = self.score(state, w)
            total += lp
        return total + self.end(state)

    def score_context_free(self, words: Sequence[str]) -> float:
        """Score a phrase with no left context and no sentence end."""
        state: State = ()
        total = 0.0
        for w in words:
            lp, state = self.score(state, w)
            total += lp
        return total


def lm_score(lm: NGramLM, state: State, word: str) -> Tuple[float, State]:
    return lm.score(state, word)


def ngram_counts(sentences: Iterable[Sequence[str]], order: int):
    """counts[k][history][word] for history length k = 0..order-1."""
    counts: List[Dict[tuple, Dict[str, int]]] = [defaultdict(lambda: defaultdict(int)) for _ in range(order)]
    for sent in sentences:
        padded = [BOS] + list(sent) + [EOS]
        for pos in range(1, len(padded)):
            w = padded[pos]
            for k in range(order):
                if pos - k < 0:
                    break
                counts[k][tuple(padded[pos - k:pos])][w] += 1
    return counts


def lm_train(sentences: Iterable[Sequence[str]], order: int = 3,
             oov_logprob: float = DEFAULT_OOV_LOGPROB) -> NGramLM:
    if order < 1:
        raise ValueError("LM order must be >= 1")
    sentences = [list(s) for s in sentences]
    counts = ngram_counts(sentences, order)
    unigram = counts[0][()]
    vocab = sorted(unigram)
    total = sum(unigram.values())
    if not total:
        raise ValueError("cannot train an LM on an empty corpus")

    probs: Dict[tuple, float] = {}
    backoffs: Dict[tuple, float] = {}
    lower = {w: (unigram[w] + 1) / (total + len(vocab)) for w in vocab}
    for w in vocab:
        probs[(w,)] = math.log10(lower[w])
    probs[(BOS,)] = NO_PROB

    known: Dict[tuple, float] = {(w,): p for w, p in lower.items()}
    bow: Dict[tuple, float] = {}

    def interpolated(ngram):
        if ngram in known:
            return known[ngram]
        return bow.get(ngram[:-1], 1.0) * interpolated(ngram[1:])

    for k in range(1, order):
        level = {}
        for hist, cont in counts[k].items():
            c_h = sum(cont.values())
            t_h = len(cont)
            for w, c in cont.items():
                level[hist + (w,)] = (c + t_h * interpolated(hist[1:] + (w,))) / (c_h + t_h)
            bow[hist] = t_h / (c_h + t_h)
        known.update(level)
        for ng, p in level.items():
            probs[ng] = math.log10(p)
    for hist, b in bow.items():
        backoffs[hist] = math.log10(b)
    return NGramLM(order, probs, backoffs, oov_logprob)


# --- plain-text backoff format ---------------------------------------------------------

def write_lm(lm: NGramLM, path) -> None:
    by_order: Dict[int, List[tuple]] = defaultdict(list)
    for ng in lm.probs:
        by_order[len(ng)].append(ng)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        f.write(f"order={lm.order}\n")
        f.write(f"oov={lm.oov_logprob!r}\n\n")
        for k in range(1, lm.order + 1):
            f.write(f"\\{k}-grams:\n")
            for ng in sorted(by_order[k]):
                bow = lm.backoffs.get(ng)
                line = f"{lm.probs[ng]!r}\t{' '.join(ng)}"
                if bow is not None:
                    line += f"\t{bow!r}"
                f.write(line + "\n")
            f.write("\n")
        f.write("\\end\\\n")


def read_lm(path) -> NGramLM:
    probs: Dict[tuple, float] = {}
    backoffs: Dict[tuple, float] = {}
    order = None
    oov = DEFAULT_OOV_LOGPROB
    section = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("\\"):
                section = line
                continue
            if section == "\\data\\":
                key, _, value = line.partition("=")
                if key == "order":
                    order = int(value)
                elif key == "oov":
                    oov = float(value)
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise FormatError("expected log10prob<TAB>ngram[<TAB>log10backoff]", lineno, path)
            try:
                ng = tuple(parts[1].split())
                probs[ng] = float(parts[0])
                if len(parts) == 3:
                    backoffs[ng] = float(parts[2])
            except ValueError:
                raise FormatError("non-numeric LM entry", lineno, path) from None
    if order is None:
        order = max((len(ng) for ng in probs), default=1)
    return NGramLM(order, probs, backoffs, oov)
