import math
import random
from collections import defaultdict

import pytest
from conftest import WORKED_STEPS, WORKED_TARGET, make_sentence, w_phrases
from oracles import (HashWeights, brute_force_best, derivation_features, enumerate_derivations,
                     random_lm, random_reordering, random_sentence, random_table)

from depswap.core import PhrasePair, PhraseTable, dense, fv_dot
from depswap.decoder import (LN10, DecoderConfig, DecodingError, Hypothesis, Models, Search,
                             compute_future_costs, decode, hypothesis_future, mbr_select, nbest,
                             phrase_estimate, phrase_options, recombination_key, valid_extension)
from depswap.bleu import bleu_sentence_plus1
from depswap.deptree import coverage_of
from depswap.features import DSFuture, SentenceAnalysis
from depswap.lm import lm_train


def chain_sentence(forms, walls=()):
    """Flat tree: last word is the root, everything else attaches to it."""
    n = len(forms)
    rows = [(p, f, "NN", 0 if p == n else n, "root" if p == n else "dep") for p, f in enumerate(forms, 1)]
    return make_sentence(rows, walls)


def pp(src, tgt, scores=(0.0, 0.0, 0.0, 0.0), align=None):
    src, tgt = tuple(src.split()), tuple(tgt.split())
    align = align if align is not None else {(0, 0)}
    return PhrasePair(src, tgt, scores, frozenset(align))


TM_ONLY = {dense("tm_fwd"): 1.0}
NULL_LM = lm_train([["zzz"]], 1)


def hyp(cov, prev):
    return Hypothesis(coverage_of(cov), prev, (), None, 0.0, 0.0, None, None, {}, len(cov))


class TestFutureCosts:
    def test_single_option(self):
        s = chain_sentence(["a"])
        table = PhraseTable([pp("a", "x", (-2.5, 0, 0, 0))])
        fct = compute_future_costs(s, table, NULL_LM, TM_ONLY)
        assert fct[1, 1] == -2.5

    def test_bigram_beats_split(self):
        s = chain_sentence(["a", "b"])
        table = PhraseTable([pp("a b", "x y", (-3.0, 0, 0, 0)), pp("a", "x", (-2.0, 0, 0, 0)),
                             pp("b", "y", (-1.5, 0, 0, 0))])
        assert compute_future_costs(s, table, NULL_LM, TM_ONLY)[1, 2] == -3.0

    def test_full_span_bounds_every_monotone_derivation(self):
        rng = random.Random(1)
        for _ in range(50):
            s = random_sentence(rng, 3)
            table = random_table(rng, s, multi_prob=0.6)
            lm = random_lm(rng)
            w = HashWeights(rng.random())
            fct = compute_future_costs(s, table, lm, w)
            best = -math.inf
            for steps in enumerate_derivations(s, table, DecoderConfig(distortion_limit=0)):
                value = sum(phrase_estimate(pair, lm, w) for _, pair in steps)
                assert value <= fct[1, 3] + 1e-12
                best = max(best, value)
            assert fct[1, 3] == pytest.approx(best, abs=1e-12)

    def test_split_invariant(self):
        rng = random.Random(2)
        for _ in range(30):
            n = rng.randint(2, 7)
            s = random_sentence(rng, n)
            fct = compute_future_costs(s, random_table(rng, s), random_lm(rng), HashWeights(3))
            for i in range(1, n + 1):
                for j in range(i + 1, n + 1):
                    for k in range(i, j):
                        assert fct[i, j] >= fct[i, k] + fct[k + 1, j] - 1e-12

    def test_untranslatable_word(self):
        s = chain_sentence(["a", "b"])
        table = PhraseTable([pp("a", "x")])
        with pytest.raises(DecodingError, match="untranslatable word"):
            phrase_options(s, table, DecoderConfig(pass_through=False))
        options = phrase_options(s, table, DecoderConfig(pass_through=True, pass_through_score=-9.0))
        (through,) = options[2, 2]
        assert through.tgt == ("b",) and through.scores == (-9.0,) * 4

    def test_pass_through_not_added_when_covered(self):
        s = chain_sentence(["a", "b"])
        options = phrase_options(s, PhraseTable([pp("a b", "x", align={(0, 0), (1, 0)})]), DecoderConfig())
        assert set(options) == {(1, 2)}


class TestHypothesisFuture:
    def setup_method(self):
        self.s = chain_sentence(list("abcdef"))
        rng = random.Random(0)
        self.table = random_table(rng, self.s)
        self.lm = random_lm(rng)
        self.w = HashWeights(5)
        self.fct = compute_future_costs(self.s, self.table, self.lm, self.w)

    def test_complete(self):
        assert hypothesis_future(hyp(range(1, 7), (6, 6)), self.fct) == 0.0

    def test_two_runs(self):
        h = hyp({1, 3, 4}, (4, 4))
        expected = self.fct[2, 2] + self.fct[5, 6]
        assert hypothesis_future(h, self.fct) == pytest.approx(expected, abs=1e-12)
        ds = DSFuture(SentenceAnalysis(self.s), self.w)
        assert hypothesis_future(h, self.fct, ds) == pytest.approx(expected + ds(h.cov), abs=1e-12)

    def test_search_future_matches_flags(self):
        models = Models(self.table, self.lm, self.w)
        plain = Search(self.s, models, DecoderConfig(use_ds=False))
        with_ds = Search(self.s, models, DecoderConfig(use_ds=True))
        no_ds_future = Search(self.s, models, DecoderConfig(use_ds=True, ds_future=False))
        cov = coverage_of({2, 5})
        assert plain.future(cov) == pytest.approx(self.fct.runs_total(cov), abs=1e-12)
        assert no_ds_future.future(cov) == plain.future(cov)
        assert with_ds.future(cov) != plain.future(cov)


class TestValidExtension:
    def test_distortion_boundary(self):
        cfg = DecoderConfig(distortion_limit=14)
        h = hyp(range(1, 5), (1, 4))
        assert valid_extension(h, (19, 19), cfg)
        assert not valid_extension(h, (20, 20), cfg)

    def test_wall(self):
        h = hyp({1, 2}, (2, 2))
        assert not valid_extension(h, (5, 5), DecoderConfig(), walls=coverage_of({3}))
        assert valid_extension(h, (3, 4), DecoderConfig(), walls=coverage_of({3}))

    def test_first_extension(self):
        assert valid_extension(hyp(set(), None), (1, 1), DecoderConfig(distortion_limit=0))
        assert not valid_extension(hyp(set(), None), (2, 2), DecoderConfig(distortion_limit=0))

    def test_overlap(self):
        assert not valid_extension(hyp({2}, (2, 2)), (1, 2), DecoderConfig())

    def test_config_invariants(self):
        with pytest.raises(ValueError):
            DecoderConfig(beam_size=0)
        with pytest.raises(ValueError):
            DecoderConfig(distortion_limit=-1)
        with pytest.raises(ValueError):
            DecoderConfig().set_features(["ds", "bogus"])


def all_on(n, **kw):
    return DecoderConfig(beam_size=None, distortion_limit=n, use_ds=True, use_ddp=True, use_shr=True,
                         use_path=True, pass_through=False, **kw)


class TestExpand:
    def test_zero_weights(self, W, w_table):
        models = Models(w_table, NULL_LM, {})
        search = Search(W, models, all_on(6))
        h = search.initial()
        for span, pair in search.extensions(h):
            assert search.expand(h, span, pair).score == h.score

    def test_lm_delta_matches_rescoring(self):
        rng = random.Random(4)
        for _ in range(30):
            s = random_sentence(rng, rng.randint(1, 6))
            models = Models(random_table(rng, s), random_lm(rng, 3), HashWeights(1))
            result = decode(s, models, DecoderConfig(pass_through=False))
            lm_total = sum(x.fv_delta.get(dense("lm"), 0.0) for x in result.best.chain())
            assert lm_total == pytest.approx(models.lm.score_sentence(result.derivation.target) * LN10, abs=1e-9)

    def test_score_is_weighted_feature_sum(self):
        rng = random.Random(5)
        for _ in range(30):
            s = random_sentence(rng, rng.randint(1, 6))
            table = random_table(rng, s)
            models = Models(table, random_lm(rng), HashWeights(2), random_reordering(rng, table),
                            random_reordering(rng, table), frozenset(["w1"]))
            cfg = all_on(len(s))
            result = decode(s, models, cfg)
            d = result.derivation
            assert fv_dot(models.weights, d.features) == pytest.approx(d.score, abs=1e-9)
            steps = [(span, pair) for span, pair in zip([x.prev for x in result.best.chain()],
                                                     [x.pair for x in result.best.chain()])]
            oracle = derivation_features(s, steps, models, cfg)
            assert set(oracle) == set(d.features)
            for k in oracle:
                assert oracle[k] == pytest.approx(d.features[k], abs=1e-9)


class TestRecombination:
    def test_key_fields(self):
        a = hyp({1, 2}, (2, 2))
        b = hyp({1, 2}, (1, 2))
        assert recombination_key(a) != recombination_key(b)
        assert recombination_key(a) == recombination_key(hyp({1, 2}, (2, 2)))

    def test_different_segmentation_is_merged(self):
        s = chain_sentence(["a", "b", "c"])
        table = PhraseTable([pp("a b", "x y", align={(0, 0), (1, 1)}), pp("a", "x"), pp("b", "y"), pp("c", "z")])
        models = Models(table, NULL_LM, {dense("phrase_penalty"): 1.0})
        result = decode(s, models, DecoderConfig(beam_size=None, pass_through=False, use_pblr=False,
                                                 use_hr=False))
        finals = [h for h in result.finals if h.prev == (3, 3)]
        assert len(finals) == 1
        (winner,) = finals
        assert [x.prev for x in winner.chain()] == [(1, 2), (3, 3)]
        # the three-phrase derivation survives only as a recombination arc
        assert any(loser.parent.prev == (2, 2) for loser in winner.arcs) or \
            any(loser.prev == (2, 2) for node in winner.chain() for loser in node.arcs)

    def test_prev_span_matters(self):
        # a path weight makes the left-to-right split better; merging on
        # coverage alone would lose it
        s = chain_sentence(["a", "b", "c"])
        table = PhraseTable([pp("a b", "x y", align={(0, 0), (1, 1)}), pp("a", "x"), pp("b", "y"), pp("c", "z")])
        models = Models(table, NULL_LM, HashWeights(17))
        cfg = all_on(3)
        result = decode(s, models, cfg)
        best, _ = brute_force_best(s, models, cfg)
        assert result.best.score == pytest.approx(best, abs=1e-9)


class TestDecode:
    def test_one_word(self):
        s = chain_sentence(["a"])
        result = decode(s, Models(PhraseTable([pp("a", "x")]), NULL_LM, TM_ONLY))
        assert result.derivation.target == ("x",)

    def test_walls_everywhere_force_monotone(self):
        rng = random.Random(6)
        for _ in range(20):
            n = rng.randint(2, 6)
            s = random_sentence(rng, n)
            s = type(s)(s.tokens, frozenset(range(1, n + 1)))
            table = random_table(rng, s)
            models = Models(table, random_lm(rng), HashWeights(3))
            result = decode(s, models, all_on(n))
            starts = [span[0] for span, _ in result.derivation.steps]
            assert starts == sorted(starts)
            for steps in enumerate_derivations(s, table, all_on(n)):
                assert [sp[0] for sp, _ in steps] == sorted(sp[0] for sp, _ in steps)

    def test_no_complete_hypothesis(self):
        s = chain_sentence(["a", "b", "c"])
        table = PhraseTable([pp("a b", "x"), pp("b c", "y")])
        with pytest.raises(DecodingError, match="decoding failed"):
            decode(s, Models(table, NULL_LM, TM_ONLY), DecoderConfig(pass_through=False))

    def test_stacks_and_derivations(self):
        rng = random.Random(7)
        for _ in range(30):
            n = rng.randint(1, 7)
            s = random_sentence(rng, n, wall_prob=0.2)
            models = Models(random_table(rng, s), random_lm(rng), HashWeights(4))
            result = decode(s, models, DecoderConfig(beam_size=5, pass_through=False, use_ds=True))
            for c, stack in enumerate(result.stacks):
                for h in stack.values():
                    assert bin(h.cov).count("1") == c
                    assert sum(sp[1] - sp[0] + 1 for sp in (x.prev for x in h.chain())) == c
                    assert math.isfinite(h.score)
            result.derivation.check(n)
            assert len(result.derivation.target) == sum(len(p.tgt) for _, p in result.derivation.steps)

    def test_future_cost_admissible(self):
        # DS off, LM weight 0 and non-positive excluded terms: fc never underestimates
        rng = random.Random(8)
        for trial in range(40):
            n = rng.randint(1, 6)
            s = random_sentence(rng, n)
            table = random_table(rng, s)
            w = {dense(k): rng.uniform(-1, 1) for k in ("tm_fwd", "tm_bwd", "lex_fwd", "lex_bwd",
                                                        "word_penalty", "phrase_penalty")}
            w[dense("distortion")] = rng.uniform(0, 1)
            models = Models(table, random_lm(rng), w)
            cfg = DecoderConfig(beam_size=None, distortion_limit=n, pass_through=False)
            best, steps = brute_force_best(s, models, cfg)
            search = Search(s, models, cfg)
            h = search.initial()
            assert h.heuristic >= best - 1e-9
            for span, pair in steps:
                h = search.expand(h, span, pair)
                assert h.heuristic >= best - 1e-9

    def test_worked_example_is_the_lm_best(self, W, w_table):
        lm = lm_train([WORKED_TARGET], 3)
        result = decode(W, Models(w_table, lm, {dense("lm"): 1.0}), all_on(6))
        assert result.derivation.target == tuple(WORKED_TARGET)
        assert [(span, pair) for span, pair in result.derivation.steps] == \
            [(span, w_phrases()[k]) for span, k in WORKED_STEPS]


class TestNBest:
    def setup_method(self):
        self.s = chain_sentence(["a", "b"])
        # "x y" is reachable two ways
        self.table = PhraseTable([pp("a b", "x y", (-1.0, 0, 0, 0), {(0, 0), (1, 1)}),
                                  pp("a", "x", (-0.2, 0, 0, 0)), pp("b", "y", (-0.3, 0, 0, 0)),
                                  pp("b", "w", (-2.0, 0, 0, 0))])
        self.models = Models(self.table, NULL_LM, TM_ONLY)
        self.cfg = DecoderConfig(beam_size=None, pass_through=False, use_pblr=False, use_hr=False,
                                 distortion_limit=0)

    def test_k1_is_best(self):
        result = decode(self.s, self.models, self.cfg)
        (top,) = nbest(result, 1)
        assert top.target == result.derivation.target and top.score == result.best.score

    def test_dedup_keeps_max(self):
        result = decode(self.s, self.models, self.cfg)
        entries = nbest(result, 10)
        targets = [e.target for e in entries]
        assert targets == [("x", "y"), ("x", "w")]
        assert entries[0].score == pytest.approx(-0.5)
        assert entries[1].score == pytest.approx(-2.2)

    def test_k_larger_than_available(self):
        result = decode(self.s, self.models, self.cfg)
        assert len(nbest(result, 100)) == 2
        assert nbest(result, 0) == []

    def test_matches_exhaustive_distinct_strings(self):
        rng = random.Random(9)
        for trial in range(40):
            n = rng.randint(1, 5)
            s = random_sentence(rng, n)
            table = random_table(rng, s, max_options=3)
            models = Models(table, random_lm(rng), HashWeights(trial), random_reordering(rng, table))
            cfg = all_on(n, use_hr=False)
            result = decode(s, models, cfg)
            per_string = defaultdict(lambda: -math.inf)
            for steps in enumerate_derivations(s, table, cfg):
                fv = derivation_features(s, steps, models, cfg)
                target = tuple(w for _, p in steps for w in p.tgt)
                per_string[target] = max(per_string[target], fv_dot(models.weights, fv))
            expected = sorted(per_string.values(), reverse=True)[:10]
            got = nbest(result, 10)
            assert [e.score for e in got] == pytest.approx(expected, abs=1e-9)
            for e in got:
                assert per_string[e.target] == pytest.approx(e.score, abs=1e-9)
                assert fv_dot(models.weights, e.features) == pytest.approx(e.score, abs=1e-9)


class TestMBR:
    def test_single(self):
        assert mbr_select([("a",)], [0.0]) == 0

    def test_identical(self):
        assert mbr_select([("a", "b")] * 3, [-1.0, 0.0, -3.0]) == 0

    def test_three_candidates_by_table(self):
        cands = [("the", "cat", "sat"), ("a", "cat", "sat", "down"), ("the", "cat", "sat", "down")]
        scores = [-1.0, -1.2, -1.5]
        z = sum(math.exp(x) for x in scores)
        post = [math.exp(x) / z for x in scores]
        gains = [sum(post[j] * bleu_sentence_plus1(cands[i], [cands[j]]) for j in range(3)) for i in range(3)]
        assert mbr_select(cands, scores) == max(range(3), key=lambda i: (gains[i], -i))

    def test_scale_zero_is_uniform(self):
        cands = [("x",), ("y", "z"), ("y", "z")]
        # under a flat posterior the repeated candidate wins despite its score
        assert mbr_select(cands, [5.0, 0.0, 0.0], scale=0.0) == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            mbr_select([], [])
