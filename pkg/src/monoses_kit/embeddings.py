"""Skip-gram with negative sampling over unigram, bigram and trigram targets.

Every occurrence of an inventory phrase is a training target; its contexts
are the unigrams within ``window`` positions to the left of its first token
and to the right of its last token.  Negative contexts are drawn from the
unigram distribution raised to the 0.75 power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .corpus import PhraseInventory


@dataclass
class SgnsConfig:
    dimension: int = 300
    window: int = 5
    negatives: int = 10
    epochs: int = 5
    learning_rate: float = 0.025
    subsample: float = 1e-5
    seed: int = 1
    workers: int = 1
    deterministic: bool = True
    max_order: int = 3

    def __post_init__(self):
        if min(self.dimension, self.window, self.epochs, self.workers) < 1 or self.negatives < 0:
            raise ValueError("SGNS configuration values must be positive")
        if self.learning_rate <= 0 or self.subsample < 0:
            raise ValueError("learning rate must be positive and subsampling non-negative")


class EmbeddingSpace:
    """Phrase vectors stored row-wise in ``matrix``; row order is ``phrases``."""

    def __init__(self, phrases, matrix):
        self.phrases = [tuple(p) for p in phrases]
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.phrases):
            raise ValueError("matrix rows must match the phrase list")
        self.index = {p: i for i, p in enumerate(self.phrases)}

    @property
    def dimension(self):
        return self.matrix.shape[1]

    @property
    def vectors(self):
        return {p: self.matrix[i] for i, p in enumerate(self.phrases)}

    def __len__(self):
        return len(self.phrases)

    def __contains__(self, phrase):
        return tuple(phrase) in self.index

    def __getitem__(self, phrase):
        return self.matrix[self.index[tuple(phrase)]]

    def subset(self, phrases):
        return EmbeddingSpace(phrases, self.matrix[[self.index[tuple(p)] for p in phrases]])

    def with_matrix(self, matrix):
        return EmbeddingSpace(self.phrases, matrix)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            print(f"{len(self.phrases)} {self.dimension}", file=f)
            for p, row in zip(self.phrases, self.matrix):
                print(" ".join(p) + "\t" + " ".join(f"{x:.8g}" for x in row), file=f)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            count, dim = (int(x) for x in f.readline().split())
            phrases = []
            matrix = np.empty((count, dim))
            for i in range(count):
                phrase, values = f.readline().rstrip("\n").split("\t")
                phrases.append(tuple(phrase.split(" ")))
                matrix[i] = np.array(values.split(), dtype=np.float64)
        return cls(phrases, matrix)


def extract_training_pairs(sentence, inventory, window, max_order=3):
    """(target phrase, context token) pairs in positional order."""
    sentence = tuple(sentence)
    n = len(sentence)
    pairs = []
    for i in range(n):
        for length in range(1, max_order + 1):
            if i + length > n:
                break
            phrase = sentence[i:i + length]
            if phrase not in inventory:
                continue
            for j in range(max(0, i - window), i):
                pairs.append((phrase, sentence[j]))
            for j in range(i + length, min(n, i + length - 1 + window + 1)):
                pairs.append((phrase, sentence[j]))
    return pairs


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sgns_loss(target, context, negatives):
    """-log s(t.c) - sum_k log s(-t.n_k)."""
    negatives = np.atleast_2d(negatives) if len(negatives) else np.zeros((0, len(target)))
    loss = np.logaddexp(0.0, -np.dot(target, context))
    if len(negatives):
        loss += np.sum(np.logaddexp(0.0, negatives @ target))
    return float(loss)


def sgns_gradients(target, context, negatives):
    negatives = np.atleast_2d(negatives) if len(negatives) else np.zeros((0, len(target)))
    pos = _sigmoid(np.dot(target, context)) - 1.0
    neg = _sigmoid(negatives @ target) if len(negatives) else np.zeros(0)
    g_target = pos * context + neg @ negatives
    g_context = pos * target
    g_negatives = np.outer(neg, target)
    return g_target, g_context, g_negatives


def sgns_update(target, context, negatives, learning_rate):
    """One simultaneous gradient step; returns updated copies."""
    if learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    g_t, g_c, g_n = sgns_gradients(target, context, negatives)
    negatives = np.atleast_2d(negatives) if len(negatives) else np.zeros((0, len(target)))
    return (target - learning_rate * g_t, context - learning_rate * g_c, negatives - learning_rate * g_n)


@numba.njit(cache=True)
def _sig(x):
    if x > 30.0:
        return 1.0
    if x < -30.0:
        return 0.0
    return 1.0 / (1.0 + math.exp(-x))


@numba.njit(cache=True)
def _pair_step(w_in, w_out, t, c, negs, lr, grad):
    """SGD step for one (target, context) pair and its sampled negatives."""
    dim = w_in.shape[1]
    for d in range(dim):
        grad[d] = 0.0
    for k in range(negs.shape[0] + 1):
        if k == 0:
            x = c
            label = 1.0
        else:
            x = negs[k - 1]
            label = 0.0
        f = 0.0
        for d in range(dim):
            f += w_in[t, d] * w_out[x, d]
        g = (label - _sig(f)) * lr
        for d in range(dim):
            grad[d] += g * w_out[x, d]
        for d in range(dim):
            w_out[x, d] += g * w_in[t, d]
    for d in range(dim):
        w_in[t, d] += grad[d]


@numba.njit(cache=True)
def _draw(cum):
    return np.searchsorted(cum, np.random.random() * cum[-1], side="right")


@numba.njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@numba.njit(cache=True)
def _draw_many(cum, count, seed):
    np.random.seed(seed)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = _draw(cum)
    return out


@numba.njit(cache=True)
def _train_range(ctx, targets, sent_start, sent_end, w_in, w_out, cum, keep, window, negatives,
                 lr0, done0, total, first, last):
    """Train on sentences [first, last); returns the number of target occurrences processed."""
    dim = w_in.shape[1]
    grad = np.empty(dim)
    negs = np.empty(negatives, dtype=np.int64)
    max_order = targets.shape[0]
    done = done0
    for s in range(first, last):
        a = sent_start[s]
        b = sent_end[s]
        for i in range(a, b):
            for length in range(1, max_order + 1):
                if i + length > b:
                    break
                t = targets[length - 1, i]
                if t < 0:
                    continue
                done += 1
                if keep[t] < 1.0 and np.random.random() > keep[t]:
                    continue
                lr = lr0 * max(1e-4, 1.0 - done / (total + 1.0))
                lo = max(a, i - window)
                hi = min(b, i + length + window)
                for j in range(lo, hi):
                    if j >= i and j < i + length:
                        continue
                    c = ctx[j]
                    if c < 0:
                        continue
                    # draws that hit the positive context are dropped, not redrawn
                    k = 0
                    for _ in range(negatives):
                        n = _draw(cum)
                        if n != c:
                            negs[k] = n
                            k += 1
                    _pair_step(w_in, w_out, t, c, negs[:k], lr, grad)
    return done


@numba.njit(cache=True, parallel=True)
def _train_hogwild(ctx, targets, sent_start, sent_end, w_in, w_out, cum, keep, window, negatives,
                   lr0, done0, total, chunks):
    # workers update the shared matrices without coordination
    n_chunks = chunks.shape[0] - 1
    processed = np.zeros(n_chunks, dtype=np.int64)
    for w in numba.prange(n_chunks):
        processed[w] = _train_range(ctx, targets, sent_start, sent_end, w_in, w_out, cum, keep, window,
                                    negatives, lr0, done0, total, chunks[w], chunks[w + 1]) - done0
    return done0 + processed.sum()


class NegativeSampler:
    """Draws context ids with probability proportional to count ** power."""

    def __init__(self, counts, power=0.75):
        weights = np.asarray(counts, dtype=np.float64) ** power
        self.probabilities = weights / weights.sum()
        self.cumulative = np.cumsum(weights)

    def draw(self, count, seed):
        return _draw_many(self.cumulative, int(count), int(seed))


def _encode(corpus, inventory, max_order):
    phrases = inventory.ranked()
    index = {p: i for i, p in enumerate(phrases)}
    unigrams = [p for p in phrases if len(p) == 1]
    ctx_index = {p[0]: i for i, p in enumerate(unigrams)}
    ctx_counts = np.array([inventory[p] for p in unigrams], dtype=np.float64)
    ctx = []
    targets = [[] for _ in range(max_order)]
    starts = []
    ends = []
    pos = 0
    for sentence in corpus:
        sentence = tuple(sentence)
        n = len(sentence)
        starts.append(pos)
        for i, tok in enumerate(sentence):
            ctx.append(ctx_index.get(tok, -1))
            for length in range(1, max_order + 1):
                if i + length <= n:
                    targets[length - 1].append(index.get(sentence[i:i + length], -1))
                else:
                    targets[length - 1].append(-1)
        pos += n
        ends.append(pos)
    return (phrases, ctx_index, ctx_counts, np.array(ctx, dtype=np.int64),
            np.array(targets, dtype=np.int64).reshape(max_order, -1),
            np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64))


def _keep_probabilities(phrases, inventory, threshold):
    keep = np.ones(len(phrases))
    if threshold <= 0:
        return keep
    total = sum(c for p, c in inventory.entries.items() if len(p) == 1)
    for i, p in enumerate(phrases):
        if len(p) == 1:
            f = inventory[p] / total
            keep[i] = min(1.0, (math.sqrt(f / threshold) + 1.0) * threshold / f)
    return keep


@dataclass
class TrainingResult:
    space: EmbeddingSpace
    context_matrix: np.ndarray
    heldout_losses: list


def train_phrase_embeddings_full(corpus, inventory: PhraseInventory, config: SgnsConfig, heldout_pairs=2000):
    """Train and also report held-out SGNS loss before training and after each epoch."""
    corpus = [tuple(s) for s in corpus]
    if not any(corpus):
        raise ValueError("cannot train embeddings on an empty corpus")
    if len(inventory) == 0:
        raise ValueError("inventory is empty")
    phrases, ctx_index, ctx_counts, ctx, targets, starts, ends = _encode(corpus, inventory, config.max_order)
    if len(ctx_counts) == 0:
        raise ValueError("inventory has no unigrams to use as contexts")
    rng = np.random.default_rng(config.seed)
    dim = config.dimension
    w_in = (rng.random((len(phrases), dim)) - 0.5) / dim
    w_out = np.zeros((len(ctx_counts), dim))
    sampler = NegativeSampler(ctx_counts)
    keep = _keep_probabilities(phrases, inventory, config.subsample)

    # fixed held-out sample of (target, context, negatives) triples
    occurrences = np.argwhere(targets >= 0)
    sample = []
    if len(occurrences):
        picks = rng.choice(len(occurrences), size=min(heldout_pairs, len(occurrences)), replace=False)
        for p in picks:
            length, i = occurrences[p]
            s = np.searchsorted(ends, i, side="right")
            lo, hi = max(starts[s], i - config.window), min(ends[s], i + length + 1 + config.window)
            # occurrence row `length` holds phrases of length + 1
            cands = [j for j in range(lo, hi) if not (i <= j <= i + length) and ctx[j] >= 0]
            if cands:
                j = cands[rng.integers(len(cands))]
                negs = rng.choice(len(ctx_counts), size=config.negatives, p=sampler.probabilities)
                sample.append((targets[length, i], ctx[j], negs))

    def heldout_loss():
        if not sample:
            return float("nan")
        return float(np.mean([sgns_loss(w_in[t], w_out[c], w_out[n]) for t, c, n in sample]))

    losses = [heldout_loss()]
    total = int((targets >= 0).sum()) * config.epochs
    done = 0
    n_sent = len(starts)
    for epoch in range(config.epochs):
        _seed(config.seed * 1000003 + epoch)
        if config.deterministic or config.workers == 1:
            done = _train_range(ctx, targets, starts, ends, w_in, w_out, sampler.cumulative, keep,
                                config.window, config.negatives, config.learning_rate, done, total, 0, n_sent)
        else:
            chunks = np.linspace(0, n_sent, config.workers + 1).astype(np.int64)
            done = _train_hogwild(ctx, targets, starts, ends, w_in, w_out, sampler.cumulative, keep,
                                  config.window, config.negatives, config.learning_rate, done, total, chunks)
        losses.append(heldout_loss())
    return TrainingResult(EmbeddingSpace(phrases, w_in), w_out, losses)


def train_phrase_embeddings(corpus, inventory: PhraseInventory, config: SgnsConfig) -> EmbeddingSpace:
    return train_phrase_embeddings_full(corpus, inventory, config).space
