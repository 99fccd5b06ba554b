"""Reordering feature families fired when a hypothesis is extended.

* dependency swap (DS): head-child and sibling word pairs, in order or swapped
* dependency distortion penalty (DDP): cohesion violations
* sparse hierarchical orientation (SHR): M/S/D against the covered block
* dependency path (Path): tree path between consecutive source phrases

All feature functions take an :class:`ExtensionContext`; they are pure and
can be shared across threads.
"""

from __future__ import annotations

from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .core import (FeatureVector, Ordering, PhrasePair, SourceSentence, Span,
                   Token, Weights, fv_inc, render_key, target_order)
from .deptree import (DOWN, HEAD_CHILD, Coverage, DepTree, RelatedPair,
                      build_tree, check_interruption, is_covered, related_pairs,
                      tree_path)

IO, SW = Ordering.IN_ORDER, Ordering.SWAPPED
M, S, D = "M", "S", "D"
PATH_IN_ORDER, PATH_SWAPPED = "in_order", "swapped"
DEFAULT_PATH_MAX_LEN = 4


class SentenceAnalysis:
    """A source sentence with its tree and the pair tables DS needs."""

    def __init__(self, sentence: SourceSentence, tree: Optional[DepTree] = None):
        self.sentence = sentence
        self.n = len(sentence)
        self.tree = tree or build_tree(sentence)
        self.pairs: List[RelatedPair] = related_pairs(self.tree)
        self.pairs_at: List[List[int]] = [[] for _ in range(self.n + 1)]
        for idx, rp in enumerate(self.pairs):
            self.pairs_at[rp.a].append(idx)
            self.pairs_at[rp.b].append(idx)
        self.pair_keys: List[Dict[Ordering, Tuple[str, ...]]] = [
            {o: ds_keys(sentence, rp, o) for o in (IO, SW)} for rp in self.pairs]

    def token(self, p: int) -> Token:
        return self.sentence.tokens[p - 1]


class ExtensionContext(NamedTuple):
    sent: SentenceAnalysis
    cov: Coverage                 # coverage before the extension
    prev: Optional[Span]          # None on the first extension
    span: Span
    pair: PhrasePair


# --- dependency swap -------------------------------------------------------------------

def ds_keys(sentence: SourceSentence, rp: RelatedPair, o: Ordering) -> Tuple[str, ...]:
    x, y = sentence.tokens[rp.a - 1], sentence.tokens[rp.b - 1]
    combos = ((x.label, y.label), (x.pos, y.pos), (x.label, y.pos), (x.pos, y.label))
    if rp.kind == HEAD_CHILD:
        return tuple(render_key("ds_hc", f1, f2, rp.side, o.value) for f1, f2 in combos)
    return tuple(render_key("ds_sib", f1, f2, o.value) for f1, f2 in combos)


def ds_pair_orderings(ctx: ExtensionContext) -> List[Tuple[int, Ordering]]:
    """(pair index, ordering) for every related pair decided by this extension."""
    i, j = ctx.span
    sent = ctx.sent
    seen = set()
    out = []
    for p in range(i, j + 1):
        for idx in sent.pairs_at[p]:
            if idx in seen:
                continue
            seen.add(idx)
            rp = sent.pairs[idx]
            other = rp.b if rp.a == p else rp.a
            if i <= other <= j:
                o = target_order(ctx.pair, rp.left - i, rp.right - i)
            elif is_covered(ctx.cov, other):
                continue
            else:
                o = SW if other < p else IO
            out.append((idx, o))
    out.sort()
    return out


def ds_fire(ctx: ExtensionContext) -> FeatureVector:
    fv: FeatureVector = {}
    for idx, o in ds_pair_orderings(ctx):
        for key in ctx.sent.pair_keys[idx][o]:
            fv_inc(fv, key)
    return fv


class DSFuture:
    """Future DS score of the still-undecided pairs, cached per coverage."""

    def __init__(self, sent: SentenceAnalysis, w: Weights):
        self.sent = sent
        get = w.get
        self.sums = [{o: sum(get(k, 0.0) for k in keys[o]) for o in (IO, SW)}
                     for keys in sent.pair_keys]
        self._cache: Dict[Coverage, float] = {}

    def __call__(self, cov: Coverage) -> float:
        value = self._cache.get(cov)
        if value is None:
            value = self._cache[cov] = self._estimate(cov)
        return value

    def _estimate(self, cov: Coverage) -> float:
        tree = self.sent.tree
        anc = 0
        for p in range(1, self.sent.n + 1):
            if is_covered(cov, p):
                anc |= tree.anc_mask[p]
        open_anc = anc & ~cov
        total = 0.0
        for rp, sums in zip(self.sent.pairs, self.sums):
            u, v = rp.left, rp.right
            if is_covered(cov, u) or is_covered(cov, v):
                continue
            fu = is_covered(open_anc, u)
            fv = is_covered(open_anc, v)
            if fu and not fv:
                total += sums[IO]   # left member comes first
            elif fv and not fu:
                total += sums[SW]   # right member comes first
            else:
                total += max(sums[IO], sums[SW])
        return total


def ds_future_estimate(sent: SentenceAnalysis, cov: Coverage, w: Weights) -> float:
    return DSFuture(sent, w)(cov)


# --- dependency distortion penalty --------------------------------------------------

def ddp_score(ctx: ExtensionContext) -> int:
    if ctx.prev is None:
        return 0
    return int(check_interruption(ctx.sent.tree, ctx.cov, ctx.prev, ctx.span))


# --- orientations ----------------------------------------------------------------------

def grow_block(cov: Coverage, prev: Span) -> Span:
    """Widen ``prev`` to the maximal run of covered positions around it."""
    s, e = prev
    while s > 1 and is_covered(cov, s - 1):
        s -= 1
    while is_covered(cov, e + 1):
        e += 1
    return s, e


def hr_orientation(cov: Coverage, prev: Span, new: Span) -> str:
    return pblr_orientation(grow_block(cov, prev), new)


def pblr_orientation(prev: Span, new: Span) -> str:
    if new[0] == prev[1] + 1:
        return M
    if new[1] == prev[0] - 1:
        return S
    return D


# --- sparse hierarchical orientation ------------------------------------------------

def rep_token(tok: Token, top_words) -> List[str]:
    if tok.form in top_words:
        return [tok.pos, tok.form]
    return [tok.pos]


def shr_fire(ctx: ExtensionContext, top_words) -> FeatureVector:
    fv: FeatureVector = {}
    if ctx.prev is None:
        return fv
    i, j = ctx.span
    s, e = grow_block(ctx.cov, ctx.prev)
    o = pblr_orientation((s, e), (i, j))
    locs = [("s_first", i), ("s_last", j), ("p_first", s), ("p_last", e)]
    if o == D:
        gap = (e + 1, i - 1) if i > e else (j + 1, s - 1)
        locs += [("g_first", gap[0]), ("g_last", gap[1])]
    for name, p in locs:
        for rep in rep_token(ctx.sent.token(p), top_words):
            fv_inc(fv, render_key("shr", name, rep, o))
    return fv


# --- dependency path -------------------------------------------------------------------

def render_path(edges: Sequence[Tuple[str, str]], max_len: int = DEFAULT_PATH_MAX_LEN) -> str:
    if len(edges) > max_len:
        return "long"
    return ",".join(label + "R" if d == DOWN else label for label, d in edges)


def path_fire(ctx: ExtensionContext, max_len: int = DEFAULT_PATH_MAX_LEN) -> FeatureVector:
    if ctx.prev is None:
        return {}
    a, b = ctx.prev[1], ctx.span[0]
    edges = tree_path(ctx.sent.tree, min(a, b), max(a, b))
    o = PATH_IN_ORDER if ctx.span[0] > ctx.prev[1] else PATH_SWAPPED
    return {render_key("path", render_path(edges, max_len), o): 1.0}
