"""Phrase-table and lexical reordering model containers and their text formats."""

from __future__ import annotations

import gzip
import math
from typing import Iterator

SCORE_NAMES = ("phi_fwd", "lex_fwd", "phi_bwd", "lex_bwd", "char_fwd", "char_bwd")
ORIENTATIONS = ("mono", "swap", "disc")


def _open(path, mode="rt"):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8")
    return open(path, mode[0], encoding="utf-8")


class PhraseTable:
    """Source phrase -> {target phrase: six scores in (0, 1]}."""

    def __init__(self, entries=None):
        self.entries = entries if entries is not None else {}

    def add(self, src, tgt, scores):
        scores = tuple(float(s) for s in scores)
        if len(scores) != 6:
            raise ValueError(f"expected 6 scores, got {len(scores)}")
        self.entries.setdefault(tuple(src), {})[tuple(tgt)] = scores

    def get(self, src):
        return self.entries.get(tuple(src), {})

    def __contains__(self, src):
        return tuple(src) in self.entries

    def __len__(self):
        return sum(len(t) for t in self.entries.values())

    def sources(self):
        return self.entries.keys()

    def items(self) -> Iterator:
        for src in sorted(self.entries):
            targets = self.entries[src]
            for tgt in sorted(targets):
                yield src, tgt, targets[tgt]

    def pairs(self) -> set:
        return {(s, t) for s, targets in self.entries.items() for t in targets}

    def max_source_len(self) -> int:
        return max((len(s) for s in self.entries), default=1)

    def check(self):
        for src, tgt, scores in self.items():
            for name, value in zip(SCORE_NAMES, scores):
                if not (0.0 < value <= 1.0) or math.isnan(value):
                    raise ValueError(f"{name}={value} out of (0, 1] for {src} ||| {tgt}")

    def write(self, path):
        with _open(path, "wt") as f:
            for src, tgt, scores in self.items():
                text = " ".join(f"{s:.6g}" for s in scores)
                f.write(f"{' '.join(src)} ||| {' '.join(tgt)} ||| {text} ||| |||\n")

    @classmethod
    def read(cls, path):
        table = cls()
        with _open(path, "rt") as f:
            for line in f:
                cols = line.split("|||")
                if len(cols) < 3:
                    continue
                src = tuple(cols[0].split())
                tgt = tuple(cols[1].split())
                scores = [float(x) for x in cols[2].split()]
                table.add(src, tgt, scores)
        return table


class ReorderingModel:
    """Per phrase pair orientation probabilities.

    Six values: backward (relative to the previous phrase) monotone, swap,
    discontinuous, then forward (relative to the next phrase) in the same
    order.
    """

    def __init__(self, probs=None):
        self.probs = probs if probs is not None else {}

    def get(self, src, tgt):
        return self.probs.get((tuple(src), tuple(tgt)))

    def __len__(self):
        return len(self.probs)

    def write(self, path):
        with _open(path, "wt") as f:
            for (src, tgt) in sorted(self.probs):
                values = " ".join(f"{p:.6g}" for p in self.probs[(src, tgt)])
                f.write(f"{' '.join(src)} ||| {' '.join(tgt)} ||| {values}\n")

    @classmethod
    def read(cls, path):
        probs = {}
        with _open(path, "rt") as f:
            for line in f:
                cols = line.split("|||")
                if len(cols) < 3:
                    continue
                probs[(tuple(cols[0].split()), tuple(cols[1].split()))] = tuple(float(x) for x in cols[2].split())
        return cls(probs)
