import math

import pytest
from hypothesis import given, strategies as st

from depswap.core import (FeatureKey, FormatError, Ordering, PhrasePair, PhraseTable, Token, dense,
                          fv_add, fv_dot, fv_iadd, parse_alignment, parse_key, read_phrase_table,
                          read_weights, render_key, target_order, write_phrase_table, write_weights)

IO, SW = Ordering.IN_ORDER, Ordering.SWAPPED


def pair(src, tgt, align, scores=(0.0,) * 4):
    return PhrasePair(tuple(src.split()), tuple(tgt.split()), scores, frozenset(align))


class TestTargetOrder:
    def test_made_a_speech_in_order(self):
        assert target_order(pair("发表 讲话", "made a speech", {(0, 0), (1, 2)}), 0, 1) is IO

    def test_reversed_alignment_swaps(self):
        assert target_order(pair("a b", "x y", {(0, 1), (1, 0)}), 0, 1) is SW

    def test_unaligned_inherits_left_neighbour(self):
        # b has no link; inherits a's position 0, tie -> in order
        assert target_order(pair("a b", "x", {(0, 0)}), 0, 1) is IO

    def test_unaligned_leading_word_inherits_right_neighbour(self):
        p = pair("a b c", "x y", {(1, 1), (2, 0)})
        # a -> 1 (from b), c -> 0
        assert p.resolved == (1, 1, 0)
        assert target_order(p, 0, 2) is SW
        assert target_order(p, 0, 1) is IO

    def test_multiply_aligned_uses_minimum(self):
        p = pair("a b", "x y z", {(0, 0), (0, 2), (1, 1)})
        assert p.resolved == (0, 1)

    def test_all_unaligned_is_an_error(self):
        with pytest.raises(ValueError, match="unalignable phrase pair"):
            target_order(pair("a b", "x", set()), 0, 1)

    def test_bad_offsets(self):
        p = pair("a b", "x y", {(0, 0)})
        with pytest.raises(ValueError):
            target_order(p, 0, 0)
        with pytest.raises(ValueError):
            target_order(p, 0, 2)

    @given(st.integers(2, 5), st.integers(1, 5), st.data())
    def test_antisymmetric_unless_tied(self, n_src, n_tgt, data):
        links = data.draw(st.sets(st.tuples(st.integers(0, n_src - 1), st.integers(0, n_tgt - 1)), min_size=1))
        p = PhrasePair(tuple("s%d" % k for k in range(n_src)), tuple("t%d" % k for k in range(n_tgt)),
                       (0.0,) * 4, frozenset(links))
        s1, s2 = data.draw(st.lists(st.integers(0, n_src - 1), min_size=2, max_size=2, unique=True))
        if p.resolved[s1] != p.resolved[s2]:
            assert target_order(p, s1, s2) != target_order(p, s2, s1)
        else:
            assert target_order(p, s1, s2) is target_order(p, s2, s1) is IO


class TestFeatureVectors:
    def test_dot_examples(self):
        assert fv_dot({}, {"f": 1}) == 0.0
        assert fv_dot({"f": 2.0}, {"f": 3}) == 6.0
        assert fv_dot({"f": 1.5, "g": -1}, {"f": 2, "h": 4}) == 3.0

    def test_add_examples(self):
        assert fv_add({}, {"f": 1}) == {"f": 1}
        assert fv_add({"f": 1}, {"f": -1}) == {}
        assert fv_add({"f": 1, "g": 2}, {"g": 3}) == {"f": 1, "g": 5}

    def test_add_does_not_mutate(self):
        a = {"f": 1.0}
        fv_add(a, {"f": 2.0})
        assert a == {"f": 1.0}

    def test_iadd_scale(self):
        a = {"f": 1.0}
        assert fv_iadd(a, {"f": 0.5, "g": 1.0}, scale=-2.0) == {"g": -2.0}

    vectors = st.dictionaries(st.sampled_from("abcdef"), st.floats(-1e3, 1e3).filter(lambda x: x != 0.0))

    @given(vectors, vectors, vectors)
    def test_dot_is_linear(self, w, a, b):
        assert fv_dot(w, fv_add(a, b)) == pytest.approx(fv_dot(w, a) + fv_dot(w, b), abs=1e-12 * (1 + sum(
            abs(w.get(k, 0)) * (abs(a.get(k, 0)) + abs(b.get(k, 0))) for k in set(a) | set(b))))

    @given(vectors, vectors)
    def test_no_stored_zeros(self, a, b):
        assert 0.0 not in fv_add(a, b).values()


class TestFeatureKeys:
    def test_rendering(self):
        assert render_key("ds_hc", "root", "dobj", "left", "io") == "ds_hc|root|dobj|left|io"
        assert dense("lm") == "dense|lm"

    def test_unknown_namespace(self):
        with pytest.raises(ValueError):
            render_key("bogus", "x")

    field = st.text(min_size=0, max_size=6)

    @given(st.sampled_from(["ds_hc", "ds_sib", "shr", "path", "dense"]), st.lists(field, max_size=5))
    def test_round_trip(self, ns, fields):
        key = FeatureKey(ns, tuple(fields))
        text = key.render()
        assert parse_key(text) == key
        assert "=" not in text and not any(c.isspace() for c in text)

    @given(st.lists(field, min_size=1, max_size=4), st.lists(field, min_size=1, max_size=4))
    def test_injective(self, f1, f2):
        if f1 != f2:
            assert render_key("shr", *f1) != render_key("shr", *f2)


class TestTokens:
    def test_invariants(self):
        with pytest.raises(ValueError):
            Token(0, "a", "NN", "dobj", 1)
        with pytest.raises(ValueError):
            Token(2, "a", "NN", "dobj", 2)
        with pytest.raises(ValueError):
            Token(1, "a", "", "dobj", 0)


class TestPhraseTable:
    def test_sorted_and_pruned(self):
        pairs = [pair("a", f"x{k}", {(0, 0)}, (math.log(0.1 * (k + 1)),) * 4) for k in range(5)]
        table = PhraseTable(pairs, limit=3)
        got = table.get(("a",))
        assert [p.tgt for p in got] == [("x4",), ("x3",), ("x2",)]
        assert ("a",) in table and len(table) == 1
        assert table.get(("zz",)) == []

    def test_file_round_trip(self, tmp_path):
        pairs = [pair("a b", "x", {(0, 0), (1, 0)}, tuple(math.log(p) for p in (0.5, 0.25, 0.2, 1.0)))]
        path = tmp_path / "pt"
        write_phrase_table(pairs, path)
        back = list(read_phrase_table(path).pairs())
        assert back[0].src == ("a", "b") and back[0].align == pairs[0].align
        assert back[0].scores == pytest.approx(pairs[0].scores, abs=1e-12)

    def test_reader_takes_probabilities(self, tmp_path):
        path = tmp_path / "pt"
        path.write_text("a ||| x ||| 0.5 1 1 1 ||| 0-0\n", encoding="utf-8")
        (p,) = read_phrase_table(path).pairs()
        assert p.scores[0] == pytest.approx(math.log(0.5))

    @pytest.mark.parametrize("line", ["a ||| x ||| 1 1 1 ||| 0-0", "a ||| x ||| 1 1 1 q ||| 0-0",
                                      "a ||| x ||| 1 1 1 1 ||| 0-3", "a ||| x ||| 1 1 1 1"])
    def test_malformed_lines(self, tmp_path, line):
        path = tmp_path / "pt"
        path.write_text("a ||| y ||| 1 1 1 1 ||| 0-0\n" + line + "\n", encoding="utf-8")
        with pytest.raises(FormatError) as err:
            read_phrase_table(path)
        assert err.value.lineno == 2

    def test_alignment_parsing(self):
        assert parse_alignment("0-1 2-0") == {(0, 1), (2, 0)}
        with pytest.raises(FormatError):
            parse_alignment("0-x", 7)


class TestWeightsFile:
    def test_round_trip(self, tmp_path):
        w = {"ds_hc|root|dobj|left|io": 0.25, dense("lm"): -1.5, "shr|p_first|在|S": 3.0, "dense|x": 0.0}
        path = tmp_path / "w"
        write_weights(w, path)
        assert read_weights(path) == {k: v for k, v in w.items() if v}

    def test_rejects_non_finite(self, tmp_path):
        path = tmp_path / "w"
        path.write_text("dense|lm\tnan\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_weights(path)
