import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from monoses_kit.align import (
    NULL, align_words, diagonal_model2, grow_diag_final_and, ibm_model1, model1_log_likelihood, word_lexicon,
)


def _model1_oracle(corpus, iterations):
    """Textbook Model 1 EM with dictionaries; returns t(f|e) and per-iteration log likelihoods."""
    f_vocab = {w for _, t in corpus for w in t}
    t = {}
    for src, tgt in corpus:
        for e in (NULL,) + src:
            for f in tgt:
                t[(e, f)] = 1.0 / len(f_vocab)
    lls = []
    for _ in range(iterations):
        count, total, ll = {}, {}, 0.0
        for src, tgt in corpus:
            es = (NULL,) + src
            for f in tgt:
                z = sum(t[(e, f)] for e in es)
                ll += math.log(z / len(es))
                for e in es:
                    c = t[(e, f)] / z
                    count[(e, f)] = count.get((e, f), 0.0) + c
                    total[e] = total.get(e, 0.0) + c
        lls.append(ll)
        t = {k: count[k] / total[k[0]] for k in t}
    return t, lls


def _random_corpus(rng, pairs=15):
    out = []
    for _ in range(pairs):
        src = tuple(rng.choice("abcde") for _ in range(rng.randint(1, 5)))
        tgt = tuple(rng.choice("vwxyz") for _ in range(rng.randint(1, 5)))
        out.append((src, tgt))
    return out


def test_model1_matches_dictionary_oracle():
    rng = random.Random(0)
    for _ in range(5):
        corpus = _random_corpus(rng)
        model = ibm_model1(corpus, 4)
        theta, lls = _model1_oracle(corpus, 4)
        assert model.log_likelihoods == pytest.approx(lls, abs=1e-9)
        links = model.links
        # map unique-pair ids back to words through one corpus scan
        e_vocab = {NULL: 0}
        f_vocab = {}
        for s, t in corpus:
            for w in s:
                e_vocab.setdefault(w, len(e_vocab))
            for w in t:
                f_vocab.setdefault(w, len(f_vocab))
        inv_e = {v: k for k, v in e_vocab.items()}
        inv_f = {v: k for k, v in f_vocab.items()}
        for key, p in zip(links.pair_of_u, model.theta):
            e, f = inv_e[int(key // links.n_tgt_vocab)], inv_f[int(key % links.n_tgt_vocab)]
            assert p == pytest.approx(theta[(e, f)], abs=1e-12)


@given(st.integers(0, 10_000))
def test_em_log_likelihood_non_decreasing(seed):
    corpus = _random_corpus(random.Random(seed))
    m1 = ibm_model1(corpus, 8)
    assert np.all(np.diff(m1.log_likelihoods) >= -1e-9)
    assert model1_log_likelihood(m1) >= m1.log_likelihoods[-1] - 1e-9
    m2 = diagonal_model2(corpus, 3, 6)
    assert np.all(np.diff(m2.log_likelihoods) >= -1e-9)


def test_example_corpus():
    corpus = [(("a", "b"), ("x", "y")), (("a",), ("x",))]
    model = ibm_model1(corpus, 5)
    theta, _ = _model1_oracle(corpus, 5)
    assert theta[("a", "x")] > theta[("a", "y")]
    links = align_words(corpus)
    assert (0, 0) in links[0] and links[1] == frozenset({(0, 0)})
    assert model.log_likelihoods[-1] > model.log_likelihoods[0]
    assert align_words([(("q",), ("r",))]) == [frozenset({(0, 0)})]
    with pytest.raises(ValueError):
        align_words([])


link_sets = st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=12)


@given(link_sets)
def test_symmetrization_fixed_point(links):
    assert grow_diag_final_and(links, links) == frozenset(links)


@given(link_sets, link_sets)
def test_symmetrization_between_intersection_and_union(a, b):
    out = grow_diag_final_and(a, b)
    assert a & b <= out <= a | b


def test_grow_diag_example():
    fwd = {(0, 0), (1, 1), (2, 1)}
    bwd = {(0, 0), (1, 1), (2, 2)}
    # both union-only links grow from their neighbor (1, 1), each bringing in an unaligned word
    assert grow_diag_final_and(fwd, bwd) == frozenset({(0, 0), (1, 1), (2, 1), (2, 2)})


def test_word_lexicon_counts_nulls():
    corpus = [(("a", "b"), ("x", "y", "z"))]
    lex = word_lexicon(corpus, [{(0, 0), (1, 1)}])
    assert lex == {("a", "x"): 1.0, ("b", "y"): 1.0, (NULL, "z"): 1.0}
