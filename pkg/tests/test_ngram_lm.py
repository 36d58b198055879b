import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from monoses_kit.ngram_lm import BOS, EOS, UNK, LanguageModel, lm_logprob, per_word_entropy, train_kn_lm


def _vocab(lm):
    return sorted(lm.vocab - {BOS})


def _random_corpus(seed, n_sent=300, vocab=12):
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(vocab)]
    return [tuple(rng.choice(words[: rng.randint(2, vocab)]) for _ in range(rng.randint(1, 8)))
            for _ in range(n_sent)]


def test_unigram_model_hand_values():
    lm = train_kn_lm([("a", "a", "a", "b")], order=1)
    # D = 0.75 fallback; vocab {a, b, </s>, <unk>}; gamma = 0.75 * 3 / 5
    p = {w: 10 ** lm.word_logprob((), w) for w in ("a", "b", EOS, UNK)}
    assert p["a"] == pytest.approx(0.5625, abs=1e-12)
    assert p["b"] == pytest.approx(0.1625, abs=1e-12)
    assert p[UNK] == pytest.approx(0.1125, abs=1e-12)
    assert sum(p.values()) == pytest.approx(1.0, abs=1e-9)
    h = per_word_entropy(lm, [("a",)])
    assert h == pytest.approx(-(math.log2(0.5625) + math.log2(0.1625)) / 2, abs=1e-12)


def _kn_bigram_oracle(corpus, d=0.75):
    """Interpolated KN bigram with one fixed discount, written out directly."""
    big = {}
    for s in corpus:
        toks = (BOS,) + s + (EOS,)
        for a, b in zip(toks, toks[1:]):
            big[(a, b)] = big.get((a, b), 0) + 1
    cont = {}
    for (a, b) in big:
        cont[b] = cont.get(b, 0) + 1
    vocab = sorted({w for s in corpus for w in s} | {EOS, UNK})
    total = sum(cont.values())
    g0 = d * len(cont) / total
    p1 = {w: max(cont.get(w, 0) - d, 0) / total + g0 / len(vocab) for w in vocab}
    p2 = {}
    for h in {a for a, _ in big}:
        ch = sum(c for (a, _), c in big.items() if a == h)
        types = sum(1 for (a, _) in big if a == h)
        for w in vocab:
            p2[(h, w)] = max(big.get((h, w), 0) - d, 0) / ch + d * types / ch * p1[w]
    return p1, p2


def test_bigram_matches_hand_kn_table():
    corpus = [("a", "b"), ("b", "a", "b"), ("a", "c")]
    lm = train_kn_lm(corpus, order=2)
    p1, p2 = _kn_bigram_oracle(corpus)
    for w, p in p1.items():
        assert 10 ** lm.word_logprob((), w) == pytest.approx(p, abs=1e-9)
    for (h, w), p in p2.items():
        assert 10 ** lm.word_logprob((h,), w) == pytest.approx(p, abs=1e-9)


def test_distinct_words_give_uniform_lower_order():
    lm = train_kn_lm([("a", "b", "c", "d")], order=2)
    values = {round(lm.word_logprob((), w), 12) for w in ("a", "b", "c", "d", EOS)}
    assert len(values) == 1


@pytest.mark.parametrize("order", [2, 3, 5])
def test_normalization_for_every_observed_history(order):
    corpus = _random_corpus(order, n_sent=200)
    assert sum(len(s) for s in corpus) <= 5000
    lm = train_kn_lm(corpus, order)
    vocab = _vocab(lm)
    histories = set()
    for s in corpus:
        toks = (BOS,) + s + (EOS,)
        for i in range(1, len(toks)):
            for n in range(1, order):
                if i - n >= 0:
                    histories.add(toks[i - n:i])
    for h in histories:
        total = sum(10 ** lm.word_logprob(h, w) for w in vocab)
        assert total == pytest.approx(1.0, abs=1e-6), h


def test_first_token_distribution_sums_to_one():
    # every one-token continuation of <s>, where </s> stands for the empty sentence
    lm = train_kn_lm([("x", "y"), ("y",), ("x", "x", "y")], order=3)
    assert sum(10 ** lm.word_logprob((BOS,), w) for w in _vocab(lm)) == pytest.approx(1.0, abs=1e-6)


def test_unknown_sentence_is_finite():
    lm = train_kn_lm(_random_corpus(1), order=3)
    assert math.isfinite(lm_logprob(lm, ("never-seen",)))
    assert lm_logprob(lm, ("never-seen",)) > -20


@given(st.lists(st.sampled_from(["w0", "w1", "w2", "w3", "zz"]), min_size=0, max_size=10), st.sampled_from(
    ["w0", "w1", "w5", "zz"]))
@settings(max_examples=60)
def test_prefix_probability_never_grows(prefix, extra):
    lm = _shared_lm()
    state = lm.begin_state()
    total = 0.0
    for w in prefix:
        lp, state = lm.score(state, w)
        total += lp
    lp, _ = lm.score(state, extra)
    assert total + lp <= total + 1e-12


_LM = {}


def _shared_lm():
    if "lm" not in _LM:
        _LM["lm"] = train_kn_lm(_random_corpus(7, vocab=4), order=3)
    return _LM["lm"]


def test_uniform_model_entropy():
    lm = LanguageModel.uniform(["a", "b", "c"])
    corpus = [("a", "b"), ("c",), ("b", "b", "a")]
    assert per_word_entropy(lm, corpus) == pytest.approx(math.log2(4), abs=1e-9)


def test_training_text_has_lower_entropy_than_shuffled_tokens():
    rng = random.Random(3)
    words = [f"w{i}" for i in range(30)]
    succ = {w: rng.sample(words, 3) for w in words}
    corpus = []
    for _ in range(1000):
        w = rng.choice(words)
        s = [w]
        for _ in range(rng.randint(2, 9)):
            w = rng.choice(succ[w])
            s.append(w)
        corpus.append(tuple(s))
    lm = train_kn_lm(corpus, order=3)
    tokens = [t for s in corpus for t in s]
    rng.shuffle(tokens)
    shuffled, k = [], 0
    for s in corpus:
        shuffled.append(tuple(tokens[k:k + len(s)]))
        k += len(s)
    assert per_word_entropy(lm, corpus) < per_word_entropy(lm, shuffled)


def test_entropy_ignores_sentence_order():
    corpus = _random_corpus(4)
    lm = train_kn_lm(corpus, order=3)
    assert per_word_entropy(lm, corpus) == pytest.approx(per_word_entropy(lm, corpus[::-1]), rel=1e-12)


def test_arpa_round_trip(tmp_path):
    corpus = _random_corpus(5)
    lm = train_kn_lm(corpus, order=4)
    path = tmp_path / "lm.arpa"
    lm.write_arpa(path)
    text = path.read_text(encoding="utf-8")
    assert text.lstrip().startswith("\\data\\") and text.rstrip().endswith("\\end\\")
    assert "\\4-grams:" in text
    back = LanguageModel.read_arpa(path)
    rng = random.Random(9)
    words = _vocab(lm) + ["oov"]
    for _ in range(1000):
        s = tuple(rng.choice(words) for _ in range(rng.randint(0, 10)))
        assert back.sentence_logprob(s) == lm.sentence_logprob(s)


def test_short_corpus_reduces_order():
    with pytest.warns(UserWarning):
        lm = train_kn_lm([("a",)], order=5)
    assert lm.order == 3


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        train_kn_lm([], order=3)
