"""Phrase-based stack decoding with dependency reordering features.

Hypotheses are grouped into stacks by the number of covered source words and
expanded left to right in the output. Every extension produces a feature
delta; the model score is the dot product of the accumulated features with
the weights, so n-best lists carry exactly the vectors the tuner needs.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .bleu import bleu_sentence_plus1
from .core import (Derivation, FeatureVector, PhrasePair, PhraseTable,
                   SourceSentence, Span, Weights, dense, fv_dot, fv_iadd, fv_inc)
from .deptree import Coverage, span_mask, uncovered_runs
from .features import (D, M, DSFuture, ExtensionContext, SentenceAnalysis,
                       ddp_score, ds_fire, hr_orientation, path_fire,
                       pblr_orientation, shr_fire)
from .lm import NGramLM
from .training import ReorderingTable

log = logging.getLogger(__name__)

LN10 = math.log(10.0)
TM_FEATURES = ("tm_fwd", "tm_bwd", "lex_fwd", "lex_bwd")
DENSE_FEATURES = TM_FEATURES + ("lm", "word_penalty", "phrase_penalty", "distortion",
                                "pblr_fwd", "pblr_bwd", "hr_fwd", "hr_bwd", "ddp")
SPARSE_FAMILIES = ("ds", "ddp", "shr", "path")

DEFAULT_WEIGHTS: Weights = {
    dense("tm_fwd"): 0.2, dense("tm_bwd"): 0.2, dense("lex_fwd"): 0.2, dense("lex_bwd"): 0.2,
    dense("lm"): 0.5, dense("word_penalty"): -0.3, dense("phrase_penalty"): 0.2,
    dense("distortion"): 0.3, dense("pblr_fwd"): 0.1, dense("pblr_bwd"): 0.1,
    dense("hr_fwd"): 0.1, dense("hr_bwd"): 0.1, dense("ddp"): -0.5,
}


class DecodingError(RuntimeError):
    pass


@dataclass
class DecoderConfig:
    beam_size: Optional[int] = 100          # None: no pruning
    distortion_limit: Optional[int] = 14    # None: unlimited
    use_ddp: bool = False
    use_ds: bool = False
    use_shr: bool = False
    use_path: bool = False
    use_pblr: bool = True
    use_hr: bool = True
    ds_future: bool = True
    nbest_size: int = 100
    mbr: bool = False
    mbr_scale: float = 1.0
    max_phrase_len: int = 7
    pass_through: bool = True
    pass_through_score: float = -10.0
    path_max_len: int = 4

    def __post_init__(self):
        if self.beam_size is not None and self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.distortion_limit is not None and self.distortion_limit < 0:
            raise ValueError("distortion_limit must be >= 0")

    def set_features(self, names: Sequence[str]) -> None:
        unknown = set(names) - set(SPARSE_FAMILIES)
        if unknown:
            raise ValueError(f"unknown feature families: {', '.join(sorted(unknown))}")
        for fam in SPARSE_FAMILIES:
            setattr(self, "use_" + fam, fam in names)


@dataclass
class Models:
    table: PhraseTable
    lm: NGramLM
    weights: Weights = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    pblr: Optional[ReorderingTable] = None
    hr: Optional[ReorderingTable] = None
    top_words: frozenset = frozenset()


class Hypothesis:
    __slots__ = ("cov", "prev", "lm_state", "reo_state", "score", "future", "parent",
                 "pair", "fv_delta", "arcs", "ncovered")

    def __init__(self, cov, prev, lm_state, reo_state, score, future, parent, pair, fv_delta, ncovered):
        self.cov: Coverage = cov
        self.prev: Optional[Span] = prev
        self.lm_state = lm_state
        self.reo_state = reo_state
        self.score: float = score
        self.future: float = future
        self.parent: Optional[Hypothesis] = parent
        self.pair: Optional[PhrasePair] = pair
        self.fv_delta: FeatureVector = fv_delta
        self.arcs: List[Hypothesis] = []    # recombined losers
        self.ncovered = ncovered

    @property
    def heuristic(self) -> float:
        return self.score + self.future

    def chain(self) -> List["Hypothesis"]:
        out = []
        h = self
        while h.parent is not None:
            out.append(h)
            h = h.parent
        return out[::-1]


def recombination_key(h: Hypothesis):
    return (h.cov, h.prev, h.lm_state, h.reo_state)


# --- translation options and future costs ---------------------------------------------

def phrase_options(sentence: SourceSentence, table: PhraseTable, cfg: DecoderConfig) -> Dict[Span, List[PhrasePair]]:
    forms = sentence.forms
    n = len(forms)
    options: Dict[Span, List[PhrasePair]] = {}
    for i in range(1, n + 1):
        for j in range(i, min(n, i + cfg.max_phrase_len - 1) + 1):
            found = table.get(forms[i - 1:j])
            if found:
                options[i, j] = found
    covered = set()
    for i, j in options:
        covered.update(range(i, j + 1))
    missing = [p for p in range(1, n + 1) if p not in covered]
    if cfg.pass_through:
        floor = (cfg.pass_through_score,) * 4
        for p in missing:
            options[p, p] = [PhrasePair((forms[p - 1],), (forms[p - 1],), floor, frozenset({(0, 0)}))]
        missing = []
    if missing:
        words = " ".join(f"{forms[p - 1]}@{p}" for p in missing)
        raise DecodingError(f"untranslatable word: {words}")
    return options


def phrase_estimate(pair: PhrasePair, lm: NGramLM, w: Weights) -> float:
    """Context-free score of using ``pair``: translation, LM and penalties."""
    get = w.get
    s = sum(get(dense(name), 0.0) * x for name, x in zip(TM_FEATURES, pair.scores))
    s += get(dense("lm"), 0.0) * LN10 * lm.score_context_free(pair.tgt)
    s -= get(dense("word_penalty"), 0.0) * len(pair.tgt)
    s -= get(dense("phrase_penalty"), 0.0)
    return s


class FutureCostTable:
    """``fc[i][j]``: best context-free score for translating span ``[i, j]``."""

    def __init__(self, n: int):
        self.n = n
        self.fc = [[-math.inf] * (n + 2) for _ in range(n + 2)]

    def __getitem__(self, span: Span) -> float:
        return self.fc[span[0]][span[1]]

    def runs_total(self, cov: Coverage) -> float:
        return sum(self.fc[i][j] for i, j in uncovered_runs(cov, self.n))


def compute_future_costs(sentence: SourceSentence, table: Optional[PhraseTable], lm: NGramLM, w: Weights,
                         cfg: Optional[DecoderConfig] = None, options=None) -> FutureCostTable:
    cfg = cfg or DecoderConfig()
    if options is None:
        options = phrase_options(sentence, table, cfg)
    n = len(sentence)
    fct = FutureCostTable(n)
    fc = fct.fc
    for (i, j), pairs in options.items():
        fc[i][j] = max(phrase_estimate(p, lm, w) for p in pairs)
    for length in range(2, n + 1):
        for i in range(1, n - length + 2):
            j = i + length - 1
            best = fc[i][j]
            for k in range(i, j):
                best = max(best, fc[i][k] + fc[k + 1][j])
            fc[i][j] = best
    return fct


def hypothesis_future(h: Hypothesis, fct: FutureCostTable, ds_term: Optional[DSFuture] = None) -> float:
    value = fct.runs_total(h.cov)
    if ds_term is not None:
        value += ds_term(h.cov)
    return value


def valid_extension(h: Hypothesis, span: Span, cfg: DecoderConfig, walls: Coverage = 0) -> bool:
    i, j = span
    if h.cov & span_mask(i, j):
        return False
    prev_end = h.prev[1] if h.prev else 0
    if cfg.distortion_limit is not None and abs(i - prev_end - 1) > cfg.distortion_limit:
        return False
    return walls & ~h.cov & ((1 << (i - 1)) - 1) == 0


# --- search ------------------------------------------------------------------------

class NBestEntry(NamedTuple):
    target: Tuple[str, ...]
    features: FeatureVector
    score: float
    steps: Tuple[Tuple[Span, PhrasePair, FeatureVector], ...]   # span, pair, feature delta


@dataclass
class DecodeResult:
    derivation: Derivation
    finals: List[Hypothesis]
    best: Hypothesis
    stacks: List[Dict[tuple, Hypothesis]]
    sentence: SourceSentence

    def nbest(self, k: int) -> List[NBestEntry]:
        return nbest(self, k)


class Search:
    """Decoding state for one sentence against shared, read-only models."""

    def __init__(self, sentence: SourceSentence, models: Models, cfg: DecoderConfig,
                 analysis: Optional[SentenceAnalysis] = None):
        self.sentence = sentence
        self.models = models
        self.cfg = cfg
        self.n = len(sentence)
        self.full = (1 << self.n) - 1
        self.sent = analysis or SentenceAnalysis(sentence)
        self.walls = 0
        for p in sentence.walls:
            self.walls |= 1 << (p - 1)
        self.options = phrase_options(sentence, models.table, cfg)
        self.fct = compute_future_costs(sentence, None, models.lm, models.weights, cfg, self.options)
        self.ds_term = DSFuture(self.sent, models.weights) if cfg.use_ds and cfg.ds_future else None
        self._future: Dict[Coverage, float] = {}

    def initial(self) -> Hypothesis:
        h = Hypothesis(0, None, self.models.lm.begin(), None, 0.0, 0.0, None, None, {}, 0)
        h.future = self.future(0)
        return h

    def future(self, cov: Coverage) -> float:
        value = self._future.get(cov)
        if value is None:
            value = self.fct.runs_total(cov)
            if self.ds_term is not None:
                value += self.ds_term(cov)
            self._future[cov] = value
        return value

    def extension_features(self, h: Hypothesis, span: Span, pair: PhrasePair):
        """Feature delta, new LM state and new reordering state of an extension."""
        cfg, models = self.cfg, self.models
        i, j = span
        fv: FeatureVector = {}
        for name, x in zip(TM_FEATURES, pair.scores):
            fv_inc(fv, dense(name), x)
        lm = models.lm
        state = h.lm_state
        lm_lp = 0.0
        for word in pair.tgt:
            lp, state = lm.score(state, word)
            lm_lp += lp
        new_cov = h.cov | span_mask(i, j)
        if new_cov == self.full:
            lm_lp += lm.end(state)
        fv_inc(fv, dense("lm"), lm_lp * LN10)
        fv_inc(fv, dense("word_penalty"), -len(pair.tgt))
        fv_inc(fv, dense("phrase_penalty"), -1.0)
        prev_end = h.prev[1] if h.prev else 0
        fv_inc(fv, dense("distortion"), -abs(i - prev_end - 1))

        reo_state = None
        if (cfg.use_pblr and models.pblr is not None) or (cfg.use_hr and models.hr is not None):
            reo = []
            for model_name, table, orient in (
                    ("pblr", models.pblr if cfg.use_pblr else None,
                     lambda: pblr_orientation(h.prev, span)),
                    ("hr", models.hr if cfg.use_hr else None,
                     lambda: hr_orientation(h.cov, h.prev, span))):
                if table is None:
                    continue
                o = orient() if h.prev else (M if i == 1 else D)
                logs = table.lookup(pair.src, pair.tgt)
                fv_inc(fv, dense(model_name + "_fwd"), logs[("M", "S", "D").index(o)])
                if h.reo_state is not None:
                    prev_logs = h.reo_state[len(reo)]
                    fv_inc(fv, dense(model_name + "_bwd"), prev_logs[("M", "S", "D").index(o)])
                reo.append(logs[3:])
            reo_state = tuple(reo)

        if cfg.use_ds or cfg.use_shr or cfg.use_path or cfg.use_ddp:
            ctx = ExtensionContext(self.sent, h.cov, h.prev, span, pair)
            if cfg.use_ds:
                fv_iadd(fv, ds_fire(ctx))
            if cfg.use_shr:
                fv_iadd(fv, shr_fire(ctx, models.top_words))
            if cfg.use_path:
                fv_iadd(fv, path_fire(ctx, cfg.path_max_len))
            if cfg.use_ddp:
                fv_inc(fv, dense("ddp"), ddp_score(ctx))
        return fv, state, reo_state

    def expand(self, h: Hypothesis, span: Span, pair: PhrasePair) -> Hypothesis:
        fv, lm_state, reo_state = self.extension_features(h, span, pair)
        cov = h.cov | span_mask(*span)
        score = h.score + fv_dot(self.models.weights, fv)
        return Hypothesis(cov, span, lm_state, reo_state, score, self.future(cov), h, pair, fv,
                          h.ncovered + span[1] - span[0] + 1)

    def extensions(self, h: Hypothesis):
        n = self.n
        max_len = self.cfg.max_phrase_len
        for i in range(1, n + 1):
            if h.cov >> (i - 1) & 1:
                continue
            for j in range(i, min(n, i + max_len - 1) + 1):
                if h.cov >> (j - 1) & 1:
                    break
                pairs = self.options.get((i, j))
                if pairs and valid_extension(h, (i, j), self.cfg, self.walls):
                    for pair in pairs:
                        yield (i, j), pair

    def run(self) -> DecodeResult:
        n = self.n
        stacks: List[Dict[tuple, Hypothesis]] = [dict() for _ in range(n + 1)]
        init = self.initial()
        stacks[0][recombination_key(init)] = init
        beam = self.cfg.beam_size
        for c in range(n):
            hyps = sorted(stacks[c].values(), key=lambda x: -x.heuristic)
            if beam is not None:
                del hyps[beam:]
            stacks[c] = {recombination_key(x): x for x in hyps}
            for h in hyps:
                for span, pair in self.extensions(h):
                    child = self.expand(h, span, pair)
                    stack = stacks[child.ncovered]
                    key = recombination_key(child)
                    old = stack.get(key)
                    if old is None:
                        stack[key] = child
                    elif child.score > old.score:
                        child.arcs = old.arcs
                        old.arcs = []
                        child.arcs.append(old)
                        stack[key] = child
                    else:
                        old.arcs.append(child)
        finals = list(stacks[n].values())
        if not finals:
            sizes = ", ".join(str(len(s)) for s in stacks)
            raise DecodingError(f"decoding failed: no complete hypothesis (stack sizes {sizes})")
        best = finals[0]
        for h in finals[1:]:
            if h.score > best.score:
                best = h
        return DecodeResult(derivation_of(best), finals, best, stacks, self.sentence)


def derivation_of(h: Hypothesis) -> Derivation:
    steps = []
    fv: FeatureVector = {}
    for x in h.chain():
        steps.append((x.prev, x.pair))
        fv_iadd(fv, x.fv_delta)
    return Derivation(steps, h.score, fv)


def decode(sentence: SourceSentence, models: Models, cfg: Optional[DecoderConfig] = None,
           analysis: Optional[SentenceAnalysis] = None) -> DecodeResult:
    return Search(sentence, models, cfg or DecoderConfig(), analysis).run()


def nbest(result: DecodeResult, k: int, max_pops: Optional[int] = None) -> List[NBestEntry]:
    """Top-``k`` distinct target strings by exact best-first search over the lattice.

    A partial path is a suffix of arcs ending at a final hypothesis; its
    priority is the suffix score plus the best score of the node it starts
    from, which is exactly the best completion of that suffix.
    """
    if k <= 0:
        return []
    max_pops = max_pops or 200 * k + 1000
    heap = []
    tick = 0
    for h in result.finals:
        heap.append((-h.score, tick, h, (), 0.0))
        tick += 1
    heapq.heapify(heap)
    best_chain = result.best.chain()
    seen = set()
    out: List[NBestEntry] = []
    pops = 0
    while heap and len(out) < k and pops < max_pops:
        neg, _, node, suffix, suffix_score = heapq.heappop(heap)
        pops += 1
        if node.parent is None:
            target = tuple(w for arc in suffix for w in arc.pair.tgt)
            if target in seen:
                continue
            seen.add(target)
            fv: FeatureVector = {}
            for arc in suffix:
                fv_iadd(fv, arc.fv_delta)
            score = result.best.score if list(suffix) == best_chain else -neg
            out.append(NBestEntry(target, fv, score, tuple((a.prev, a.pair, a.fv_delta) for a in suffix)))
            continue
        for arc in [node] + node.arcs:
            parent = arc.parent
            s = suffix_score + (arc.score - parent.score)
            heapq.heappush(heap, (-(parent.score + s), tick, parent, (arc,) + suffix, s))
            tick += 1
    return out


def mbr_select(candidates: Sequence[Sequence[str]], scores: Sequence[float], scale: float = 1.0) -> int:
    """Index of the candidate with the highest expected BLEU+1 against the others."""
    if not candidates:
        raise ValueError("mbr_select needs at least one candidate")
    top = max(scores)
    post = [math.exp(scale * (s - top)) for s in scores]
    z = sum(post)
    post = [p / z for p in post]
    best, best_gain = 0, -math.inf
    for i, cand in enumerate(candidates):
        gain = sum(p * bleu_sentence_plus1(cand, [ref]) for ref, p in zip(candidates, post))
        if gain > best_gain:
            best, best_gain = i, gain
    return best
