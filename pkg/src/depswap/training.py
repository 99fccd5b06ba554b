"""Model estimation from word-aligned parallel text.

Everything here is count-based and deterministic: phrase extraction under
the standard alignment-consistency criterion, four-score phrase tables,
lexicalized (PBLR) and hierarchical (HR) reordering tables, and the
frequent-word list used by the sparse orientation features.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .core import FormatError, PhrasePair, PhraseTable, parse_alignment

M, S, D = "M", "S", "D"
ORIENTATIONS = (M, S, D)
NULL = "<null>"


class AlignedSentencePair(NamedTuple):
    src: Tuple[str, ...]
    tgt: Tuple[str, ...]
    align: frozenset


class PhraseInstance(NamedTuple):
    src_span: Tuple[int, int]   # 0-based inclusive
    tgt_span: Tuple[int, int]
    align: frozenset            # offsets relative to the spans


def read_parallel(src_path, tgt_path, align_path) -> List[AlignedSentencePair]:
    with open(src_path, encoding="utf-8") as fs, open(tgt_path, encoding="utf-8") as ft, \
            open(align_path, encoding="utf-8") as fa:
        src_lines, tgt_lines, align_lines = fs.readlines(), ft.readlines(), fa.readlines()
    if not (len(src_lines) == len(tgt_lines) == len(align_lines)):
        raise FormatError(f"parallel files differ in length ({len(src_lines)}, "
                          f"{len(tgt_lines)}, {len(align_lines)} lines)")
    corpus = []
    for lineno, (s, t, a) in enumerate(zip(src_lines, tgt_lines, align_lines), 1):
        src, tgt = tuple(s.split()), tuple(t.split())
        links = parse_alignment(a, lineno)
        for i, j in links:
            if not (0 <= i < len(src) and 0 <= j < len(tgt)):
                raise FormatError(f"alignment point {i}-{j} out of range", lineno, align_path)
        corpus.append(AlignedSentencePair(src, tgt, links))
    return corpus


# --- extraction ------------------------------------------------------------------

def extract_phrases(p: AlignedSentencePair, max_len: Optional[int] = 7) -> List[PhraseInstance]:
    """All alignment-consistent phrase pairs, including unaligned-boundary expansions."""
    n_src, n_tgt = len(p.src), len(p.tgt)
    limit = max_len if max_len is not None else max(n_src, n_tgt)
    tgt_aligned = [False] * n_tgt
    src_links: List[List[int]] = [[] for _ in range(n_src)]
    for i, j in p.align:
        tgt_aligned[j] = True
        src_links[i].append(j)
    out = []
    for s1 in range(n_src):
        t_min, t_max = n_tgt, -1
        for s2 in range(s1, min(n_src, s1 + limit)):
            for j in src_links[s2]:
                t_min, t_max = min(t_min, j), max(t_max, j)
            if t_max < 0 or t_max - t_min + 1 > limit:
                continue
            if any(t_min <= j <= t_max and not s1 <= i <= s2 for i, j in p.align):
                continue
            ts = t_min
            while True:
                te = t_max
                while te - ts + 1 <= limit:
                    links = frozenset((i - s1, j - ts) for i, j in p.align
                                      if s1 <= i <= s2 and ts <= j <= te)
                    out.append(PhraseInstance((s1, s2), (ts, te), links))
                    te += 1
                    if te >= n_tgt or tgt_aligned[te]:
                        break
                ts -= 1
                if ts < 0 or tgt_aligned[ts]:
                    break
    return out


# --- phrase scoring ----------------------------------------------------------------

def word_translation_table(corpus: Iterable[AlignedSentencePair]):
    """w(t|s) and w(s|t) from link counts; unaligned words pair with NULL."""
    st = Counter()
    for p in corpus:
        src_linked = set()
        tgt_linked = set()
        for i, j in p.align:
            st[p.src[i], p.tgt[j]] += 1
            src_linked.add(i)
            tgt_linked.add(j)
        for i, w in enumerate(p.src):
            if i not in src_linked:
                st[w, NULL] += 1
        for j, w in enumerate(p.tgt):
            if j not in tgt_linked:
                st[NULL, w] += 1
    src_tot, tgt_tot = Counter(), Counter()
    for (s, t), c in st.items():
        src_tot[s] += c
        tgt_tot[t] += c
    t_given_s = {(s, t): c / src_tot[s] for (s, t), c in st.items()}
    s_given_t = {(s, t): c / tgt_tot[t] for (s, t), c in st.items()}
    return t_given_s, s_given_t


def lexical_weight(src, tgt, align, table, reverse=False) -> float:
    """Product over target words of the mean link probability (NULL if unlinked).

    With ``reverse`` the roles swap and ``table`` must be keyed ``(s, t)``
    giving ``w(s|t)``.
    """
    if reverse:
        src, tgt = tgt, src
        align = {(t, s) for s, t in align}
    links = defaultdict(list)
    for s, t in align:
        links[t].append(s)
    weight = 1.0
    for t, word in enumerate(tgt):
        if links[t]:
            if reverse:
                probs = [table.get((word, src[s]), 0.0) for s in links[t]]
            else:
                probs = [table.get((src[s], word), 0.0) for s in links[t]]
            weight *= sum(probs) / len(probs)
        else:
            weight *= table.get((word, NULL) if reverse else (NULL, word), 0.0)
    return weight


def collect_instances(corpus: Sequence[AlignedSentencePair], max_len: int = 7):
    """(src, tgt, internal alignment) for every extracted phrase occurrence."""
    out = []
    for p in corpus:
        for inst in extract_phrases(p, max_len):
            (s1, s2), (t1, t2) = inst.src_span, inst.tgt_span
            out.append((p.src[s1:s2 + 1], p.tgt[t1:t2 + 1], inst.align))
    return out


def score_phrases(instances, lexicon=None, limit: int = 20) -> PhraseTable:
    """Relative frequencies and lexical weights, both directions, as logs.

    ``lexicon`` is ``(w(t|s), w(s|t))``; when omitted it is estimated from
    the instances' own internal links.
    """
    instances = list(instances)
    if not instances:
        raise ValueError("no phrase instances to score")
    if lexicon is None:
        lexicon = word_translation_table(AlignedSentencePair(s, t, a) for s, t, a in instances)
    t_given_s, s_given_t = lexicon
    pair_count = Counter()
    align_count: Dict[tuple, Counter] = defaultdict(Counter)
    src_count, tgt_count = Counter(), Counter()
    for src, tgt, align in instances:
        pair_count[src, tgt] += 1
        align_count[src, tgt][tuple(sorted(align))] += 1
        src_count[src] += 1
        tgt_count[tgt] += 1
    pairs = []
    for (src, tgt), c in pair_count.items():
        best_align = min(align_count[src, tgt].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        align = frozenset(best_align)
        probs = (c / src_count[src], c / tgt_count[tgt],
                 lexical_weight(src, tgt, align, t_given_s),
                 lexical_weight(src, tgt, align, s_given_t, reverse=True))
        pairs.append(PhrasePair(src, tgt, tuple(math.log(x) if x > 0 else -math.inf for x in probs), align))
    return PhraseTable(pairs, limit=limit)


# --- reordering tables ---------------------------------------------------------------

UNIFORM = tuple([math.log(1.0 / 3.0)] * 6)


class ReorderingTable:
    """(src, tgt) -> log probs for M, S, D forward then M, S, D backward."""

    def __init__(self, entries: Optional[Dict[tuple, Tuple[float, ...]]] = None):
        self.entries = entries or {}

    def lookup(self, src, tgt) -> Tuple[float, ...]:
        return self.entries.get((tuple(src), tuple(tgt)), UNIFORM)

    def forward(self, src, tgt, o: str) -> float:
        return self.lookup(src, tgt)[ORIENTATIONS.index(o)]

    def backward(self, src, tgt, o: str) -> float:
        return self.lookup(src, tgt)[3 + ORIENTATIONS.index(o)]

    def __len__(self):
        return len(self.entries)


def _orientations(inst: PhraseInstance, blocks, n_src: int, n_tgt: int) -> Tuple[str, str]:
    ends_end, starts_end, starts_start, ends_start = blocks
    (s1, s2), (t1, t2) = inst.src_span, inst.tgt_span
    if t1 == 0:
        fwd = M if s1 == 0 else D
    elif (s1 - 1, t1 - 1) in ends_end:
        fwd = M
    elif (s2 + 1, t1 - 1) in starts_end:
        fwd = S
    else:
        fwd = D
    if t2 == n_tgt - 1:
        bwd = M if s2 == n_src - 1 else D
    elif (s2 + 1, t2 + 1) in starts_start:
        bwd = M
    elif (s1 - 1, t2 + 1) in ends_start:
        bwd = S
    else:
        bwd = D
    return fwd, bwd


def _block_index(instances: Iterable[PhraseInstance]):
    ends_end, starts_end, starts_start, ends_start = set(), set(), set(), set()
    for inst in instances:
        (s1, s2), (t1, t2) = inst.src_span, inst.tgt_span
        ends_end.add((s2, t2))
        starts_end.add((s1, t2))
        starts_start.add((s1, t1))
        ends_start.add((s2, t1))
    return ends_end, starts_end, starts_start, ends_start


def estimate_reordering(corpus: Sequence[AlignedSentencePair], max_len: int = 7,
                        smoothing: float = 0.5) -> Tuple[ReorderingTable, ReorderingTable]:
    """PBLR and HR tables.

    The previous (next) unit of a phrase occurrence is a target-adjacent
    extractable phrase for PBLR and any consistent block, however long, for
    HR. Counts get add-``smoothing`` per orientation and are normalised per
    direction.
    """
    counts = {"pblr": defaultdict(lambda: [0] * 6), "hr": defaultdict(lambda: [0] * 6)}
    for p in corpus:
        phrases = extract_phrases(p, max_len)
        blocks = {"pblr": _block_index(phrases), "hr": _block_index(extract_phrases(p, None))}
        for inst in phrases:
            (s1, s2), (t1, t2) = inst.src_span, inst.tgt_span
            key = (p.src[s1:s2 + 1], p.tgt[t1:t2 + 1])
            for model in ("pblr", "hr"):
                fwd, bwd = _orientations(inst, blocks[model], len(p.src), len(p.tgt))
                row = counts[model][key]
                row[ORIENTATIONS.index(fwd)] += 1
                row[3 + ORIENTATIONS.index(bwd)] += 1
    tables = []
    for model in ("pblr", "hr"):
        entries = {}
        for key, row in counts[model].items():
            logs = []
            for half in (row[:3], row[3:]):
                total = sum(half) + 3 * smoothing
                logs += [math.log((c + smoothing) / total) for c in half]
            entries[key] = tuple(logs)
        tables.append(ReorderingTable(entries))
    return tables[0], tables[1]


def write_reordering(table: ReorderingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for (src, tgt), logs in table.entries.items():
            probs = " ".join(repr(math.exp(x)) for x in logs)
            f.write(f"{' '.join(src)} ||| {' '.join(tgt)} ||| {probs}\n")


def read_reordering(path) -> ReorderingTable:
    entries = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            fields = [x.strip() for x in line.split("|||")]
            if len(fields) != 3:
                raise FormatError("expected 'src ||| tgt ||| 6 probabilities'", lineno, path)
            try:
                probs = [float(x) for x in fields[2].split()]
            except ValueError:
                raise FormatError("non-numeric reordering probability", lineno, path) from None
            if len(probs) != 6 or min(probs) <= 0:
                raise FormatError("expected 6 positive probabilities", lineno, path)
            entries[tuple(fields[0].split()), tuple(fields[1].split())] = tuple(math.log(x) for x in probs)
    return ReorderingTable(entries)


# --- frequent words ---------------------------------------------------------------------

def build_top_words(sentences: Iterable[Sequence[str]], k: int = 80) -> List[str]:
    counts = Counter(w for sent in sentences for w in sent)
    return [w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def read_top_words(path) -> List[str]:
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def write_top_words(words: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for w in words:
            f.write(w + "\n")
