"""Tokenized BLEU: sufficient statistics and corpus-level score."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 4


@dataclass(frozen=True)
class BleuStats:
    """Clipped matches and hypothesis n-gram counts for n = 1..4, plus lengths."""

    matches: tuple = (0, 0, 0, 0)
    counts: tuple = (0, 0, 0, 0)
    hyp_len: int = 0
    ref_len: int = 0

    def __add__(self, other):
        return BleuStats(
            tuple(a + b for a, b in zip(self.matches, other.matches)),
            tuple(a + b for a, b in zip(self.counts, other.counts)),
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )

    def as_array(self) -> np.ndarray:
        return np.array(list(self.matches) + list(self.counts) + [self.hyp_len, self.ref_len], dtype=np.int64)

    @classmethod
    def from_array(cls, arr):
        arr = [int(x) for x in arr]
        return cls(tuple(arr[0:4]), tuple(arr[4:8]), arr[8], arr[9])


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hypothesis, reference) -> BleuStats:
    hypothesis = tuple(hypothesis)
    reference = tuple(reference)
    matches = []
    counts = []
    for n in range(1, MAX_ORDER + 1):
        hyp = _ngrams(hypothesis, n)
        ref = _ngrams(reference, n)
        matches.append(sum(min(c, ref[g]) for g, c in hyp.items()))
        counts.append(max(len(hypothesis) - n + 1, 0))
    return BleuStats(tuple(matches), tuple(counts), len(hypothesis), len(reference))


def sum_stats(stats) -> BleuStats:
    total = BleuStats()
    for s in stats:
        total = total + s
    return total


def brevity_penalty(hyp_len, ref_len) -> float:
    if hyp_len <= 0:
        raise ValueError("hypothesis length must be positive")
    return math.exp(min(0.0, 1.0 - ref_len / hyp_len))


def bleu_from_array(arr, smoothing: str = "none") -> float:
    """Corpus BLEU from a stats vector laid out as in :meth:`BleuStats.as_array`."""
    hyp_len = arr[8]
    ref_len = arr[9]
    if hyp_len <= 0:
        raise ValueError("hypothesis length must be positive")
    log_p = 0.0
    for n in range(MAX_ORDER):
        m = float(arr[n])
        c = float(arr[4 + n])
        if smoothing == "plus_one_higher_orders" and n > 0:
            m += 1.0
            c += 1.0
        elif smoothing not in ("none", "plus_one_higher_orders"):
            raise ValueError(f"unknown smoothing {smoothing!r}")
        if m <= 0 or c <= 0:
            return 0.0
        log_p += math.log(m / c)
    return math.exp(log_p / MAX_ORDER) * math.exp(min(0.0, 1.0 - ref_len / hyp_len))


def corpus_bleu(aggregated: BleuStats, smoothing: str = "none") -> float:
    return bleu_from_array(aggregated.as_array(), smoothing)


def bleu_report(hypotheses, references) -> dict:
    """BLEU together with its components, as reported by the evaluation stage."""
    hypotheses = list(hypotheses)
    references = list(references)
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    stats = sum_stats(bleu_stats(h, r) for h, r in zip(hypotheses, references))
    precisions = [m / c if c else 0.0 for m, c in zip(stats.matches, stats.counts)]
    return {
        "bleu": corpus_bleu(stats),
        "brevity_penalty": brevity_penalty(stats.hyp_len, stats.ref_len),
        "precisions": precisions,
        "hyp_len": stats.hyp_len,
        "ref_len": stats.ref_len,
        "matches": list(stats.matches),
        "counts": list(stats.counts),
    }
