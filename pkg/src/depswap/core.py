"""Shared domain types, sparse feature vectors and phrase tables.

Feature vectors and weights are plain dicts keyed by the canonical string
rendering of a :class:`FeatureKey`, e.g. ``ds_hc|root|dobj|left|io``.
Rendered keys contain no whitespace and no ``=``, so they can be written
verbatim into weights files and n-best lines.
"""

from __future__ import annotations

import enum
import math
import re
from functools import cached_property
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple
from urllib.parse import quote, unquote

NAMESPACES = ("ds_hc", "ds_sib", "shr", "path", "dense")

FeatureVector = Dict[str, float]
Weights = Dict[str, float]
Span = Tuple[int, int]


class FormatError(ValueError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, lineno: Optional[int] = None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class Ordering(str, enum.Enum):
    IN_ORDER = "io"
    SWAPPED = "sw"


class FeatureKey(NamedTuple):
    namespace: str
    fields: Tuple[str, ...]

    def render(self) -> str:
        if self.namespace not in NAMESPACES:
            raise ValueError(f"unknown feature namespace {self.namespace!r}")
        return "|".join((self.namespace,) + tuple(_escape(f) for f in self.fields))


_ESCAPE_RE = re.compile(r"[%|=\s]")


def _escape(text: str) -> str:
    return _ESCAPE_RE.sub(lambda m: quote(m.group(), safe=""), text)


def render_key(namespace: str, *fields: str) -> str:
    return FeatureKey(namespace, tuple(fields)).render()


def parse_key(text: str) -> FeatureKey:
    parts = text.split("|")
    if parts[0] not in NAMESPACES:
        raise ValueError(f"unknown feature namespace in {text!r}")
    return FeatureKey(parts[0], tuple(unquote(p) for p in parts[1:]))


def dense(name: str) -> str:
    return "dense|" + name


# --- feature vector algebra -------------------------------------------------

def fv_dot(w: Weights, v: FeatureVector) -> float:
    get = w.get
    return sum(get(k, 0.0) * x for k, x in v.items())


def fv_iadd(a: FeatureVector, b: FeatureVector, scale: float = 1.0) -> FeatureVector:
    """In-place ``a += scale * b``; entries cancelling to zero are dropped."""
    for k, x in b.items():
        y = a.get(k, 0.0) + scale * x
        if y == 0.0:
            a.pop(k, None)
        else:
            a[k] = y
    return a


def fv_add(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    return fv_iadd(dict(a), b)


def fv_inc(v: FeatureVector, key: str, amount: float = 1.0) -> None:
    y = v.get(key, 0.0) + amount
    if y == 0.0:
        v.pop(key, None)
    else:
        v[key] = y


# --- source side -------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    index: int
    form: str
    pos: str
    label: str
    head: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"token index must be >= 1, got {self.index}")
        if self.head == self.index:
            raise ValueError(f"token {self.index} is its own head")
        if not self.pos or not self.label:
            raise ValueError(f"token {self.index} needs a POS tag and a label")


@dataclass(frozen=True)
class SourceSentence:
    tokens: Tuple[Token, ...]
    walls: frozenset = frozenset()

    def __post_init__(self):
        for expected, tok in enumerate(self.tokens, 1):
            if tok.index != expected:
                raise ValueError(f"token indices must be 1..N, found {tok.index} at {expected}")

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> Tuple[str, ...]:
        return tuple(t.form for t in self.tokens)

    def token(self, position: int) -> Token:
        return self.tokens[position - 1]


# --- phrase pairs --------------------------------------------------------------

@dataclass(frozen=True)
class PhrasePair:
    src: Tuple[str, ...]
    tgt: Tuple[str, ...]
    scores: Tuple[float, float, float, float]
    align: frozenset

    def __post_init__(self):
        if not self.src or not self.tgt:
            raise ValueError("phrase pair sides must be nonempty")
        for s, t in self.align:
            if not (0 <= s < len(self.src) and 0 <= t < len(self.tgt)):
                raise ValueError(f"alignment point {s}-{t} out of range")

    @cached_property
    def resolved(self) -> Tuple[int, ...]:
        """Target position of every source word, with unaligned-word fallback.

        An aligned source word sits at its minimum aligned target offset. An
        unaligned one inherits from the nearest aligned word to its left, or,
        failing that, the nearest to its right.
        """
        first: List[Optional[int]] = [None] * len(self.src)
        for s, t in self.align:
            if first[s] is None or t < first[s]:
                first[s] = t
        if all(p is None for p in first):
            raise ValueError("unalignable phrase pair")
        resolved = list(first)
        for s, p in enumerate(first):
            if p is not None:
                continue
            left = next((first[k] for k in range(s - 1, -1, -1) if first[k] is not None), None)
            if left is not None:
                resolved[s] = left
            else:
                resolved[s] = next(first[k] for k in range(s + 1, len(first)) if first[k] is not None)
        return tuple(resolved)

    def __str__(self):
        return f"{' '.join(self.src)} -> {' '.join(self.tgt)}"


def target_order(pair: PhrasePair, s1: int, s2: int) -> Ordering:
    """Whether source offsets ``s1`` and ``s2`` keep their order in the target.

    Result is relative to the argument order: in_order means the translation
    of ``s1`` does not come after that of ``s2``. Ties count as in_order.
    """
    if s1 == s2:
        raise ValueError("target_order needs two distinct offsets")
    n = len(pair.src)
    if not (0 <= s1 < n and 0 <= s2 < n):
        raise ValueError("source offset out of range")
    resolved = pair.resolved
    return Ordering.IN_ORDER if resolved[s1] <= resolved[s2] else Ordering.SWAPPED


class PhraseTable:
    """Source phrase -> translation options, best first, pruned to ``limit``."""

    def __init__(self, entries: Iterable[PhrasePair] = (), limit: int = 20):
        self.limit = limit
        self._table: Dict[Tuple[str, ...], List[PhrasePair]] = {}
        for pair in entries:
            self._table.setdefault(pair.src, []).append(pair)
        for src, options in self._table.items():
            options.sort(key=lambda p: (-sum(p.scores), p.tgt))
            del options[limit:]
        self.max_src_len = max((len(s) for s in self._table), default=0)

    def get(self, src: Sequence[str]) -> List[PhrasePair]:
        return self._table.get(tuple(src), [])

    def __contains__(self, src):
        return tuple(src) in self._table

    def __len__(self):
        return len(self._table)

    def __iter__(self):
        return iter(self._table)

    def pairs(self) -> Iterable[PhrasePair]:
        for options in self._table.values():
            yield from options


@dataclass
class Derivation:
    steps: List[Tuple[Span, PhrasePair]]
    score: float
    features: FeatureVector = field(default_factory=dict)

    @property
    def target(self) -> Tuple[str, ...]:
        return tuple(w for _, pair in self.steps for w in pair.tgt)

    def check(self, n: int) -> None:
        covered = sorted(p for (i, j), _ in self.steps for p in range(i, j + 1))
        if covered != list(range(1, n + 1)):
            raise AssertionError(f"derivation spans do not partition 1..{n}")


# --- file formats ----------------------------------------------------------------

def parse_alignment(text: str, lineno: Optional[int] = None) -> frozenset:
    links = set()
    for item in text.split():
        try:
            s, t = item.split("-")
            links.add((int(s), int(t)))
        except ValueError:
            raise FormatError(f"bad alignment point {item!r}", lineno) from None
    return frozenset(links)


def format_alignment(links: Iterable[Tuple[int, int]]) -> str:
    return " ".join(f"{s}-{t}" for s, t in sorted(links))


def _log(p: float) -> float:
    return math.log(p) if p > 0 else -math.inf


def read_phrase_table(path, limit: int = 20) -> PhraseTable:
    """Read ``src ||| tgt ||| p1 p2 p3 p4 ||| alignment``; probabilities become logs."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            fields = [x.strip() for x in line.split("|||")]
            if len(fields) != 4:
                raise FormatError("expected 4 '|||'-separated fields", lineno, path)
            try:
                probs = [float(x) for x in fields[2].split()]
            except ValueError:
                raise FormatError("non-numeric phrase score", lineno, path) from None
            if len(probs) != 4:
                raise FormatError("expected 4 phrase scores", lineno, path)
            try:
                pairs.append(PhrasePair(
                    tuple(fields[0].split()), tuple(fields[1].split()),
                    tuple(_log(p) for p in probs), parse_alignment(fields[3], lineno)))
            except ValueError as e:
                raise FormatError(str(e), lineno, path) from None
    return PhraseTable(pairs, limit=limit)


def write_phrase_table(table_or_pairs, path) -> None:
    pairs = table_or_pairs.pairs() if isinstance(table_or_pairs, PhraseTable) else table_or_pairs
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            probs = " ".join(repr(math.exp(s)) for s in p.scores)
            f.write(f"{' '.join(p.src)} ||| {' '.join(p.tgt)} ||| {probs} ||| {format_alignment(p.align)}\n")


def read_weights(path) -> Weights:
    w: Weights = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                key, value = line.split("\t")
                x = float(value)
                parse_key(key)
            except ValueError:
                raise FormatError("expected 'featurekey<TAB>value'", lineno, path) from None
            if not math.isfinite(x):
                raise FormatError(f"non-finite weight for {key}", lineno, path)
            w[key] = x
    return w


def write_weights(w: Weights, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(w):
            if w[key] != 0.0:
                f.write(f"{key}\t{w[key]!r}\n")
