"""Synthetic "cipher" language pairs with a known word-level decipherment.

Language E is sampled from a sparse random bigram model.  Language F is the
image of a disjoint set of E sentences under a token bijection that leaves
numerals and punctuation unchanged, so those act as identical-string anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PUNCTUATION = (",", ".", "?", "!", ";", ":", "(", ")", "\"", "'")
_ONSETS = ("b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "pl", "gr")
_VOWELS = ("a", "e", "i", "o", "u", "ai", "ou", "ei")


@dataclass
class CipherData:
    mono_e: list
    mono_f: list
    lexicon: dict          # E token -> F token
    heldout_f: list
    heldout_e: list        # decipherment of heldout_f
    anchors: tuple

    def encipher(self, sentence):
        return tuple(self.lexicon[t] for t in sentence)


def _words(rng, count, syllables=(2, 3), taken=()):
    out = []
    seen = set(taken)
    while len(out) < count:
        n = rng.integers(syllables[0], syllables[1] + 1)
        w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(n))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


class BigramSource:
    """Sparse bigram model: each token has a handful of Zipf-weighted successors."""

    def __init__(self, vocab, rng, successors=12, mean_length=10):
        self.vocab = list(vocab)
        self.rng = rng
        v = len(self.vocab)
        zipf = 1.0 / np.arange(1, v + 1)
        self.start = zipf / zipf.sum()
        self.succ = []
        for _ in range(v + 1):
            nxt = rng.choice(v, size=successors, replace=False, p=self.start)
            w = rng.dirichlet(np.full(successors, 0.5))
            self.succ.append((nxt, np.cumsum(w)))
        self.stop = 1.0 / mean_length

    def sentence(self):
        rng = self.rng
        nxt, cum = self.succ[-1]
        tok = nxt[min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), len(nxt) - 1)]
        out = [tok]
        while rng.random() > self.stop and len(out) < 40:
            nxt, cum = self.succ[tok]
            tok = nxt[min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), len(nxt) - 1)]
            out.append(tok)
        return tuple(self.vocab[t] for t in out)


def generate_cipher(n_sentences=50000, content_words=500, numerals=30, heldout=500, seed=0,
                    successors=12, mean_length=10) -> CipherData:
    rng = np.random.default_rng(seed)
    anchors = tuple(str(i) for i in range(numerals)) + PUNCTUATION
    e_words = _words(rng, content_words)
    f_words = _words(rng, content_words, taken=e_words)
    lexicon = dict(zip(e_words, f_words))
    lexicon.update({a: a for a in anchors})
    # interleave anchors into the frequency ranking so they are not all rare
    vocab = list(e_words)
    for i, a in enumerate(anchors):
        vocab.insert(min(len(vocab), 3 + i * (content_words // len(anchors))), a)
    source = BigramSource(vocab, rng, successors, mean_length)
    mono_e = [source.sentence() for _ in range(n_sentences)]
    hidden = [source.sentence() for _ in range(n_sentences)]
    mono_f = [tuple(lexicon[t] for t in s) for s in hidden]
    heldout_e = [source.sentence() for _ in range(heldout)]
    heldout_f = [tuple(lexicon[t] for t in s) for s in heldout_e]
    return CipherData(mono_e, mono_f, lexicon, heldout_f, heldout_e, anchors)


def ground_truth_lexicon(data: CipherData, counts, size=200):
    """The ``size`` most frequent non-anchor E words with their F images."""
    anchors = set(data.anchors)
    ranked = sorted((w for w in counts if w not in anchors), key=lambda w: (-counts[w], w))
    return {w: data.lexicon[w] for w in ranked[:size]}
