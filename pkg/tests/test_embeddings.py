import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from monoses_kit.corpus import build_ngram_inventory
from monoses_kit.embeddings import (
    EmbeddingSpace, NegativeSampler, SgnsConfig, extract_training_pairs, sgns_gradients, sgns_loss, sgns_update,
    train_phrase_embeddings, train_phrase_embeddings_full,
)


class _Inv:
    def __init__(self, phrases):
        self.phrases = {tuple(p) for p in phrases}

    def __contains__(self, p):
        return tuple(p) in self.phrases


def test_pair_extraction_examples():
    s = ("a", "b", "c")
    assert extract_training_pairs(s, _Inv([("b",)]), 1) == [(("b",), "a"), (("b",), "c")]
    assert extract_training_pairs(s, _Inv([("a", "b")]), 1) == [(("a", "b"), "c")]
    assert extract_training_pairs(("a",), _Inv([("a",)]), 5) == []


def _brute_pairs(sentence, phrases, window):
    out = []
    n = len(sentence)
    for i in range(n):
        for L in (1, 2, 3):
            p = sentence[i:i + L]
            if len(p) < L or p not in phrases:
                continue
            for j in range(n):
                inside = i <= j <= i + L - 1
                if not inside and (i - window <= j < i or i + L - 1 < j <= i + L - 1 + window):
                    out.append((p, sentence[j]))
    return sorted(out)


@given(st.lists(st.sampled_from("abcd"), max_size=12).map(tuple), st.integers(1, 4), st.randoms())
def test_pair_extraction_matches_enumeration(sentence, window, rnd):
    grams = {sentence[i:i + L] for L in (1, 2, 3) for i in range(len(sentence) - L + 1)}
    phrases = {g for g in grams if rnd.random() < 0.7}
    assert sorted(extract_training_pairs(sentence, _Inv(phrases), window)) == _brute_pairs(sentence, phrases, window)


def test_gradients_match_central_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        t, c = rng.normal(size=8), rng.normal(size=8)
        negs = rng.normal(size=(3, 8))
        g_t, g_c, g_n = sgns_gradients(t, c, negs)
        h = 1e-6
        for vec, grad in ((t, g_t), (c, g_c)) + tuple((negs[k], g_n[k]) for k in range(3)):
            for i in range(8):
                old = vec[i]
                vec[i] = old + h
                up = sgns_loss(t, c, negs)
                vec[i] = old - h
                down = sgns_loss(t, c, negs)
                vec[i] = old
                num = (up - down) / (2 * h)
                worst = max(worst, abs(num - grad[i]) / max(abs(num), abs(grad[i]), 1e-3))
    assert worst < 1e-5


def test_saturated_positive_pair_barely_moves():
    t = np.full(4, 10.0)
    new_t, new_c, _ = sgns_update(t, t.copy(), np.zeros((0, 4)), 0.5)
    assert np.abs(new_t - t).max() < 1e-12 and np.abs(new_c - t).max() < 1e-12


def test_single_positive_step_lowers_loss():
    t = np.array([0.3, -0.2, 0.1])
    before = sgns_loss(t, t, [])
    nt, nc, _ = sgns_update(t, t.copy(), [], 0.1)
    assert before == pytest.approx(np.logaddexp(0, -t @ t))
    assert sgns_loss(nt, nc, []) < before
    with pytest.raises(ValueError):
        sgns_update(t, t, [], 0.0)


def test_negative_sampler_frequencies():
    counts = np.array([1000, 300, 50, 7, 1])
    sampler = NegativeSampler(counts)
    draws = sampler.draw(1_000_000, 11)
    freq = np.bincount(draws, minlength=len(counts)) / len(draws)
    expected = counts ** 0.75 / np.sum(counts ** 0.75)
    assert np.all(np.abs(freq - expected) <= 0.02 * expected + 2e-4)


def _synthetic(seed, n=5000):
    """x and y are interchangeable; z lives in different contexts."""
    rng = np.random.default_rng(seed)
    left = [f"l{i}" for i in range(5)]
    right = [f"r{i}" for i in range(5)]
    other = [f"o{i}" for i in range(5)]
    corpus = []
    for _ in range(n):
        if rng.random() < 0.5:
            mid = "x" if rng.random() < 0.5 else "y"
            corpus.append((rng.choice(left), mid, rng.choice(right)))
        else:
            corpus.append((rng.choice(other), "z", rng.choice(other)))
    return corpus


def _cos(a, b):
    return float(a @ b / np.linalg.norm(a) / np.linalg.norm(b))


def test_interchangeable_words_end_up_close():
    wins = 0
    for seed in range(20):
        corpus = _synthetic(seed)
        inv = build_ngram_inventory(corpus, (100, 0, 0))
        space = train_phrase_embeddings(corpus, inv, SgnsConfig(dimension=16, window=2, negatives=5, epochs=3,
                                                                subsample=0, seed=seed))
        x, y, z = space[("x",)], space[("y",)], space[("z",)]
        wins += _cos(x, y) > _cos(x, z)
    assert wins >= 19


def _small_run(**kw):
    corpus = _synthetic(0, 800)
    inv = build_ngram_inventory(corpus, (100, 50, 50))
    config = SgnsConfig(**{**dict(dimension=64, window=2, negatives=5, epochs=4, subsample=0, seed=3), **kw})
    return corpus, inv, train_phrase_embeddings_full(corpus, inv, config)


def test_shape_determinism_and_heldout_loss():
    corpus, inv, result = _small_run()
    space = result.space
    assert set(space.phrases) == set(inv.entries)
    assert space.matrix.shape == (len(inv), 64)
    again = _small_run()[2].space
    assert np.array_equal(space.matrix, again.matrix)
    losses = result.heldout_losses
    assert len(losses) == 5 and losses[-1] < losses[0]


def test_hogwild_mode_runs():
    _, _, result = _small_run(deterministic=False, workers=2, epochs=1)
    assert np.all(np.isfinite(result.space.matrix))


def test_errors():
    inv = build_ngram_inventory([("a", "b")], (5, 5, 5))
    with pytest.raises(ValueError):
        train_phrase_embeddings([], inv, SgnsConfig(dimension=4))
    with pytest.raises(ValueError):
        train_phrase_embeddings([("a",)], build_ngram_inventory([], (1, 1, 1)), SgnsConfig(dimension=4))
    with pytest.raises(ValueError):
        SgnsConfig(dimension=0)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5))
def test_embedding_file_round_trip(tmp_path_factory, n, dim):
    rng = np.random.default_rng(n * 10 + dim)
    phrases = [("w", str(i)) if i % 2 else (f"w{i}",) for i in range(n)]
    space = EmbeddingSpace(phrases, rng.normal(size=(n, dim)))
    path = tmp_path_factory.mktemp("emb") / "e.vec"
    space.save(path)
    back = EmbeddingSpace.load(path)
    assert back.phrases == space.phrases
    assert np.allclose(back.matrix, space.matrix, rtol=1e-7)
    assert path.read_text().splitlines()[0] == f"{n} {dim}"
