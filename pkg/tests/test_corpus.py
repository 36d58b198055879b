from collections import Counter

from hypothesis import given, settings, strategies as st

from monoses_kit.corpus import (
    PhraseInventory, apply_truecase, build_ngram_inventory, count_ngrams, merge_counts, normalize_and_tokenize,
    prepare_file, read_corpus, train_truecaser,
)

words = st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), min_size=0, max_size=8).map(tuple)
corpora = st.lists(words, min_size=0, max_size=30)


def test_tokenize_examples():
    assert normalize_and_tokenize("Hello, world.") == ("Hello", ",", "world", ".")
    assert normalize_and_tokenize("") == ()
    assert normalize_and_tokenize("e-mail") == ("e", "@-@", "mail")


def test_tokenize_normalizes_unicode_punctuation():
    assert normalize_and_tokenize("“yes” – no") == ('"', "yes", '"', "-", "no")
    assert normalize_and_tokenize("3.5 or 1,000") == ("3.5", "or", "1,000")


@given(st.text(max_size=60))
def test_tokens_are_clean_and_deterministic(text):
    toks = normalize_and_tokenize(text)
    assert toks == normalize_and_tokenize(text)
    assert all(t and not any(c.isspace() for c in t) for t in toks)


def test_truecase_examples():
    model = train_truecaser([("The", "cat"), ("the", "cat"), ("the", "dog")])
    assert apply_truecase(model, ("The", "cat")) == ("the", "cat")
    assert apply_truecase(model, ("Zzyzx", "cat")) == ("Zzyzx", "cat")
    assert apply_truecase(model, ("the", "NASA")) == ("the", "NASA")


@given(st.lists(st.lists(st.sampled_from(["The", "the", "A", "a", "NASA", "Nasa"]), min_size=1, max_size=5)
                .map(tuple), min_size=1, max_size=20))
def test_truecase_retraining_is_idempotent(corpus):
    model = train_truecaser(corpus)
    once = [apply_truecase(model, s) for s in corpus]
    again = train_truecaser(once)
    assert [apply_truecase(again, s) for s in once] == once


def test_inventory_examples():
    inv = build_ngram_inventory([("a", "b", "a")], (10, 10, 10))
    assert inv.entries == {("a",): 2, ("b",): 1, ("a", "b"): 1, ("b", "a"): 1, ("a", "b", "a"): 1}
    assert build_ngram_inventory([("a", "b", "a")], (1, 0, 0)).entries == {("a",): 2}
    assert len(build_ngram_inventory([], (5, 5, 5))) == 0


def _recount(corpus):
    counts = Counter()
    for s in corpus:
        for i in range(len(s)):
            for j in range(i + 1, min(len(s), i + 3) + 1):
                counts[s[i:j]] += 1
    return counts


@given(corpora, st.tuples(*[st.integers(0, 6)] * 3))
def test_inventory_matches_sliding_window_recount(corpus, caps):
    inv = build_ngram_inventory(corpus, caps)
    full = _recount(corpus)
    for phrase, c in inv.entries.items():
        assert full[phrase] == c
    for n, cap in enumerate(caps, 1):
        kept = {p: c for p, c in inv.entries.items() if len(p) == n}
        dropped = {p: c for p, c in full.items() if len(p) == n and p not in kept}
        assert len(kept) == min(cap, sum(1 for p in full if len(p) == n))
        if kept and dropped:
            # most frequent first, ties broken lexicographically
            worst = max(kept, key=lambda p: (-kept[p], p))
            best_dropped = min(dropped, key=lambda p: (-dropped[p], p))
            assert (-kept[worst], worst) < (-dropped[best_dropped], best_dropped)


@given(corpora, st.integers(1, 4))
def test_sharded_counts_merge_in_any_order(corpus, shards):
    parts = [count_ngrams(corpus[i::shards]) for i in range(shards)]
    assert merge_counts(parts) == merge_counts(reversed(parts)) == count_ngrams(corpus)


@settings(max_examples=20)
@given(corpora)
def test_inventory_file_round_trip(tmp_path_factory, corpus):
    path = tmp_path_factory.mktemp("inv") / "inv.tsv"
    inv = build_ngram_inventory(corpus, (5, 5, 5))
    inv.save(path)
    assert PhraseInventory.load(path).entries == inv.entries


def test_prepare_file(tmp_path):
    raw = tmp_path / "raw.txt"
    raw.write_text("The cat sat.\nthe dog-house\n\nthe end\n", encoding="utf-8")
    out = tmp_path / "out.txt"
    model = prepare_file(raw, out, tmp_path / "tc")
    assert read_corpus(out) == [("the", "cat", "sat", "."), ("the", "dog", "@-@", "house"), (), ("the", "end")]
    assert model.best("THE") == "the"
    assert (tmp_path / "tc").read_text(encoding="utf-8").startswith(".")
