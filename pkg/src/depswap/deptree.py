"""Dependency trees over parsed source sentences.

Positions are 1-based source indices; the artificial root (0) is never a
node. Coverage vectors are ints used as bit sets: bit ``p - 1`` is set iff
source position ``p`` has been translated.
"""

from __future__ import annotations

import unicodedata
from itertools import combinations
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .core import FormatError, SourceSentence, Span, Token

Coverage = int

UP = "up"
DOWN = "down"
HEAD_CHILD = "head_child"
SIBLING = "sibling"
LEFT = "left"
RIGHT = "right"


class ParseError(ValueError):
    pass


def coverage_of(positions: Iterable[int]) -> Coverage:
    cov = 0
    for p in positions:
        cov |= 1 << (p - 1)
    return cov


def span_mask(i: int, j: int) -> Coverage:
    return ((1 << (j - i + 1)) - 1) << (i - 1)


def is_covered(cov: Coverage, p: int) -> bool:
    return (cov >> (p - 1)) & 1 == 1


def positions_of(cov: Coverage) -> List[int]:
    out = []
    p = 1
    while cov:
        if cov & 1:
            out.append(p)
        cov >>= 1
        p += 1
    return out


def uncovered_runs(cov: Coverage, n: int) -> List[Span]:
    runs = []
    start = None
    for p in range(1, n + 1):
        if not is_covered(cov, p):
            if start is None:
                start = p
        elif start is not None:
            runs.append((start, p - 1))
            start = None
    if start is not None:
        runs.append((start, n))
    return runs


class RelatedPair(NamedTuple):
    """A head-child pair ``(a=h, b=c, side)`` or a sibling pair ``(a=l, b=r)``.

    ``side`` is where the head sits relative to the child in the source; it
    is None for siblings.
    """

    kind: str
    a: int
    b: int
    side: Optional[str] = None

    @property
    def left(self) -> int:
        return min(self.a, self.b)

    @property
    def right(self) -> int:
        return max(self.a, self.b)


class DepTree:
    def __init__(self, heads: Sequence[int], labels: Sequence[str]):
        # heads[p] / labels[p] for p in 1..n; index 0 is a placeholder
        self.n = len(heads) - 1
        self.heads = tuple(heads)
        self.labels = tuple(labels)
        for p in range(1, self.n + 1):
            if not 0 <= heads[p] <= self.n or heads[p] == p:
                raise ParseError("malformed parse")
        for p in range(1, self.n + 1):
            h, steps = heads[p], 0
            while h:
                h, steps = heads[h], steps + 1
                if steps > self.n:
                    raise ParseError("cyclic parse")
        roots = [p for p in range(1, self.n + 1) if heads[p] == 0]
        if len(roots) != 1:
            raise ParseError("malformed parse")
        self.root = roots[0]
        self.children: List[List[int]] = [[] for _ in range(self.n + 1)]
        for p in range(1, self.n + 1):
            if heads[p]:
                self.children[heads[p]].append(p)

        self.depth = [0] * (self.n + 1)
        self.anc_mask = [0] * (self.n + 1)
        order = []
        stack = [self.root]
        while stack:
            p = stack.pop()
            order.append(p)
            for c in self.children[p]:
                self.depth[c] = self.depth[p] + 1
                self.anc_mask[c] = self.anc_mask[p] | (1 << (p - 1))
                stack.append(c)
        self.desc_mask = [0] * (self.n + 1)
        for p in reversed(order):
            m = 1 << (p - 1)
            for c in self.children[p]:
                m |= self.desc_mask[c]
            self.desc_mask[p] = m

    def descendants(self, p: int) -> List[int]:
        """The subtree of ``p``, including ``p`` itself."""
        return positions_of(self.desc_mask[p])

    def ancestors(self, p: int) -> List[int]:
        """Proper ancestors of ``p``, nearest first."""
        out = []
        h = self.heads[p]
        while h:
            out.append(h)
            h = self.heads[h]
        return out


def build_tree(sentence: SourceSentence) -> DepTree:
    heads = [0] + [t.head for t in sentence.tokens]
    labels = [""] + [t.label for t in sentence.tokens]
    return DepTree(heads, labels)


def related_pairs(tree: DepTree) -> List[RelatedPair]:
    pairs = []
    for h in range(1, tree.n + 1):
        kids = tree.children[h]
        for c in kids:
            pairs.append(RelatedPair(HEAD_CHILD, h, c, LEFT if h < c else RIGHT))
        for l, r in combinations(kids, 2):
            pairs.append(RelatedPair(SIBLING, l, r))
    return pairs


def is_ancestor(tree: DepTree, a: int, d: int) -> bool:
    return (tree.anc_mask[d] >> (a - 1)) & 1 == 1


def tree_path(tree: DepTree, a: int, b: int) -> List[Tuple[str, str]]:
    """Edges from ``a`` to ``b`` through their lowest common ancestor."""
    if a == b:
        raise ValueError("tree_path needs two distinct nodes")
    up_side = [a] + tree.ancestors(a)
    down_side = [b] + tree.ancestors(b)
    on_down = set(down_side)
    lca = next(x for x in up_side if x in on_down)
    path = [(tree.labels[x], UP) for x in up_side[:up_side.index(lca)]]
    path += [(tree.labels[x], DOWN) for x in reversed(down_side[:down_side.index(lca)])]
    return path


def check_interruption(tree: DepTree, cov: Coverage, prev: Optional[Span], new: Span) -> bool:
    """True iff extending ``prev`` by ``new`` leaves a started subtree behind.

    ``cov`` is the coverage before the extension (it contains ``prev``).
    """
    if prev is None:
        return False
    new_mask = span_mask(*new)
    for w in {prev[0], prev[1]}:
        n = w
        while n and tree.desc_mask[n] & ~cov == 0:
            n = tree.heads[n]
        if n and tree.desc_mask[n] & new_mask == 0:
            return True
    return False


# --- CoNLL-like input ----------------------------------------------------------------

DEFAULT_WALL_TAGS = frozenset({"PU"})


def is_punctuation(form: str) -> bool:
    return bool(form) and all(unicodedata.category(ch).startswith("P") for ch in form)


def sentence_from_tokens(tokens: Sequence[Token], wall_tags=DEFAULT_WALL_TAGS) -> SourceSentence:
    walls = frozenset(t.index for t in tokens if t.pos in wall_tags or is_punctuation(t.form))
    return SourceSentence(tuple(tokens), walls)


def read_conll(path, wall_tags=DEFAULT_WALL_TAGS) -> List[SourceSentence]:
    """Read ``INDEX FORM POS HEAD DEPREL`` (tab-separated) blocks.

    Ten-column CoNLL-X lines are also accepted. Each sentence is checked by
    building its tree, so malformed or cyclic parses fail here with a line
    number.
    """
    sentences = []
    block: List[Token] = []
    start = 1

    def flush(lineno):
        if not block:
            return
        sent = sentence_from_tokens(block, wall_tags)
        try:
            build_tree(sent)
        except ParseError as e:
            raise FormatError(str(e), start, path) from None
        sentences.append(sent)
        block.clear()

    with open(path, encoding="utf-8") as f:
        lineno = 0
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                start = lineno + 1
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) == 10:
                cols = [cols[0], cols[1], cols[4], cols[6], cols[7]]
            if len(cols) != 5:
                raise FormatError("expected INDEX FORM POS HEAD DEPREL", lineno, path)
            try:
                tok = Token(int(cols[0]), cols[1], cols[2], cols[4], int(cols[3]))
            except ValueError as e:
                raise FormatError(str(e), lineno, path) from None
            if tok.index != len(block) + 1:
                raise FormatError(f"token index {tok.index} out of sequence", lineno, path)
            block.append(tok)
        flush(lineno)
    return sentences


def write_conll(sentences: Iterable[SourceSentence], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in sentences:
            for t in sent.tokens:
                f.write(f"{t.index}\t{t.form}\t{t.pos}\t{t.head}\t{t.label}\n")
            f.write("\n")
