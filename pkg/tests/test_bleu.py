import math
import random

import pytest
from hypothesis import given, strategies as st

from monoses_kit.bleu import BleuStats, bleu_report, bleu_stats, brevity_penalty, corpus_bleu, sum_stats

sentences = st.lists(st.sampled_from("abcde"), min_size=1, max_size=10).map(tuple)


def test_stats_examples():
    s = bleu_stats("a b c d e".split(), "a b c d e".split())
    assert s.matches == s.counts == (5, 4, 3, 2)
    assert (s.hyp_len, s.ref_len) == (5, 5)
    assert bleu_stats(("a", "b"), ("c", "d")).matches == (0, 0, 0, 0)
    clipped = bleu_stats(("a", "a"), ("a",))
    assert clipped.matches[0] == 1 and clipped.counts[0] == 2


def test_brevity_penalty_example():
    stats = bleu_stats("a b c d".split(), "a b c d e".split())
    assert brevity_penalty(4, 5) == pytest.approx(math.exp(1 - 5 / 4))
    assert corpus_bleu(stats) == pytest.approx(0.7788, abs=1e-4)


def test_identity_and_zero_precision():
    s = bleu_stats("x y z w".split(), "x y z w".split())
    assert corpus_bleu(s) == 1.0
    assert corpus_bleu(bleu_stats("a b c d".split(), "a c b e".split())) == 0.0


def test_smoothing_only_touches_higher_orders():
    s = bleu_stats("a b c d".split(), "a c b d".split())  # no bigram matches
    assert corpus_bleu(s, "none") == 0.0
    expected = math.exp((math.log(4 / 4) + math.log(1 / 4) + math.log(1 / 3) + math.log(1 / 2)) / 4)
    assert corpus_bleu(s, "plus_one_higher_orders") == pytest.approx(expected)
    assert corpus_bleu(bleu_stats(("q",), ("a",)), "plus_one_higher_orders") == 0.0


def test_zero_length_hypothesis_is_an_error():
    with pytest.raises(ValueError):
        corpus_bleu(bleu_stats((), ("a",)))


@given(st.lists(st.tuples(sentences, sentences), min_size=1, max_size=12))
def test_additivity_bounds_and_permutation(pairs):
    parts = [bleu_stats(h, r) for h, r in pairs]
    total = sum_stats(parts)
    assert all(m <= c for m, c in zip(total.matches, total.counts))
    b = corpus_bleu(total)
    assert 0.0 <= b <= 1.0
    shuffled = list(parts)
    random.Random(len(pairs)).shuffle(shuffled)
    assert corpus_bleu(sum_stats(shuffled)) == b
    arr = sum(p.as_array() for p in parts)
    assert BleuStats.from_array(arr) == total


@given(st.lists(sentences, min_size=1, max_size=5))
def test_bleu_one_when_equal(hyps):
    long = [h + ("x", "y", "z") for h in hyps]
    assert corpus_bleu(sum_stats(bleu_stats(h, h) for h in long)) == pytest.approx(1.0)


def test_report_fields():
    hyps = [("a", "b", "c"), ("d",)]
    refs = [("a", "b", "c", "e"), ("d",)]
    r = bleu_report(hyps, refs)
    assert (r["hyp_len"], r["ref_len"]) == (4, 5)
    assert r["matches"] == [4, 2, 1, 0] and r["counts"] == [4, 2, 1, 0]
    assert r["precisions"][:3] == [1.0, 1.0, 1.0]
    assert r["brevity_penalty"] == pytest.approx(math.exp(1 - 5 / 4))
    with pytest.raises(ValueError):
        bleu_report(hyps, refs[:1])
