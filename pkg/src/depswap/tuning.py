"""Pairwise ranking optimisation (PRO) and bootstrap significance testing."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, sparse

from .bleu import bleu_corpus, bleu_from_stats, bleu_sentence_plus1, corpus_stats
from .core import FeatureVector, Weights

log = logging.getLogger(__name__)


@dataclass
class ProConfig:
    samples: int = 5000         # candidate pairs drawn per sentence
    keep: int = 50              # pairs kept per sentence, largest BLEU+1 gap first
    min_gap: float = 0.05
    interpolation: float = 0.1  # weight of the new solution
    iterations: int = 15
    l2: float = 1.0
    seed: int = 1

    def __post_init__(self):
        if self.keep > self.samples:
            raise ValueError("keep must not exceed samples")
        if not 0.0 < self.interpolation <= 1.0:
            raise ValueError("interpolation must be in (0, 1]")


class Candidate(NamedTuple):
    target: Tuple[str, ...]
    features: FeatureVector


# --- logistic ranking fit -------------------------------------------------------------

def logistic_objective(w: np.ndarray, X, y: np.ndarray, l2: float):
    margins = y * (X @ w)
    loss = np.logaddexp(0.0, -margins).sum() + 0.5 * l2 * (w @ w)
    # d/dm log(1 + e^-m) = -sigmoid(-m)
    coef = -y * np.exp(-np.logaddexp(0.0, margins))
    grad = X.T @ coef + l2 * w
    return loss, np.asarray(grad).ravel()


def fit_logistic(X, y: np.ndarray, l2: float) -> np.ndarray:
    x0 = np.zeros(X.shape[1])
    res = optimize.minimize(logistic_objective, x0, args=(X, y, l2), jac=True, method="L-BFGS-B",
                            options={"maxiter": 5000, "gtol": 1e-10, "ftol": 1e-15})
    _, grad = logistic_objective(res.x, X, y, l2)
    if np.linalg.norm(grad) > 1e-4:
        log.warning("logistic fit stopped with gradient norm %.3g", np.linalg.norm(grad))
    return res.x


def sample_pairs(gains: Sequence[float], cfg: ProConfig, rng: np.random.Generator) -> List[Tuple[int, int]]:
    n = len(gains)
    if n < 2:
        return []
    g = np.asarray(gains)
    draws = rng.integers(0, n, size=(cfg.samples, 2))
    gap = np.abs(g[draws[:, 0]] - g[draws[:, 1]])
    ok = np.flatnonzero(gap > cfg.min_gap)
    order = ok[np.argsort(-gap[ok], kind="stable")][:cfg.keep]
    return [(int(draws[k, 0]), int(draws[k, 1])) for k in order]


def pro_iteration(pool: Sequence[Sequence[Candidate]], refs: Sequence[Sequence[Sequence[str]]],
                  w_old: Weights, cfg: ProConfig, rng: Optional[np.random.Generator] = None) -> Weights:
    """One PRO update: sample ranked pairs, fit a linear separator, interpolate."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    diffs: List[Dict[str, float]] = []
    labels: List[float] = []
    for cands, sent_refs in zip(pool, refs):
        gains = [bleu_sentence_plus1(c.target, sent_refs) for c in cands]
        for a, b in sample_pairs(gains, cfg, rng):
            d: Dict[str, float] = dict(cands[a].features)
            for k, x in cands[b].features.items():
                d[k] = d.get(k, 0.0) - x
            sign = 1.0 if gains[a] > gains[b] else -1.0
            diffs.append(d)
            labels.append(sign)
    if not diffs:
        log.warning("no candidate pair exceeds the BLEU+1 gap %.3g; keeping weights", cfg.min_gap)
        return dict(w_old)
    keys = sorted({k for d in diffs for k in d})
    index = {k: n for n, k in enumerate(keys)}
    rows, cols, vals = [], [], []
    for r, d in enumerate(diffs):
        for k, x in d.items():
            if x != 0.0:
                rows += [2 * r, 2 * r + 1]
                cols += [index[k], index[k]]
                vals += [x, -x]
    X = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * len(diffs), len(keys)))
    y = np.repeat(np.asarray(labels), 2) * np.tile([1.0, -1.0], len(diffs))
    w_fit = fit_logistic(X, y, cfg.l2)
    psi = cfg.interpolation
    new: Weights = {k: (1.0 - psi) * x for k, x in w_old.items()}
    for k, x in zip(keys, w_fit):
        new[k] = new.get(k, 0.0) + psi * float(x)
    return {k: x for k, x in new.items() if x != 0.0}


# --- tuning loop ---------------------------------------------------------------------

NBestFn = Callable[[Weights], List[List[Candidate]]]


def tune(nbest_fn: NBestFn, refs: Sequence[Sequence[Sequence[str]]], w0: Weights, cfg: ProConfig,
         on_iteration: Optional[Callable[[int, Weights, float], None]] = None):
    """Decode, pool n-best lists, run PRO; repeat ``cfg.iterations`` times.

    Returns the final weights and a trace of ``(iteration, dev BLEU)`` where
    entry ``k`` is the 1-best BLEU under the weights after ``k`` updates.
    """
    pool: List[Dict[Tuple[str, ...], Candidate]] = [dict() for _ in refs]
    w = dict(w0)
    trace: List[Tuple[int, float]] = []
    nbests = nbest_fn(w)
    for it in range(cfg.iterations):
        bleu = bleu_corpus([nb[0].target for nb in nbests], refs)
        trace.append((it, bleu))
        log.info("iteration %d: dev BLEU %.4f", it, bleu)
        for sent_pool, nb in zip(pool, nbests):
            for c in nb:
                sent_pool.setdefault(c.target, c)
        w = pro_iteration([list(p.values()) for p in pool], refs, w, cfg,
                          np.random.default_rng([cfg.seed, it]))
        nbests = nbest_fn(w)
        if on_iteration is not None:
            on_iteration(it + 1, w, bleu)
    final = bleu_corpus([nb[0].target for nb in nbests], refs)
    trace.append((cfg.iterations, final))
    return w, trace


# --- significance --------------------------------------------------------------------

class BootstrapResult(NamedTuple):
    bleu_a: float
    bleu_b: float
    p_a_le_b: float     # fraction of resamples with BLEU(A) <= BLEU(B)
    p_b_le_a: float


def bootstrap_significance(sys_a, sys_b, refs, resamples: int = 1000, seed: int = 0) -> BootstrapResult:
    if len(sys_a) != len(sys_b):
        raise ValueError("systems differ in sentence count")
    stats_a = corpus_stats(sys_a, refs)
    stats_b = corpus_stats(sys_b, refs)
    rng = np.random.default_rng(seed)
    n = len(sys_a)
    a_le_b = b_le_a = 0
    for _ in range(resamples):
        idx = rng.integers(0, n, size=n)
        ba = bleu_from_stats(stats_a[idx].sum(axis=0).tolist())
        bb = bleu_from_stats(stats_b[idx].sum(axis=0).tolist())
        a_le_b += ba <= bb
        b_le_a += bb <= ba
    return BootstrapResult(bleu_from_stats(stats_a.sum(axis=0).tolist()),
                           bleu_from_stats(stats_b.sum(axis=0).tolist()),
                           a_le_b / resamples, b_le_a / resamples)
