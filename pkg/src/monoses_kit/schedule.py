"""Mixing schedule for SMT and NMT back-translations during hybrid training."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .refine import SyntheticParallelCorpus


@dataclass(frozen=True)
class ScheduleMix:
    n_smt: int
    n_nmt_greedy: int
    n_nmt_sampled: int

    @property
    def total(self):
        return self.n_smt + self.n_nmt_greedy + self.n_nmt_sampled


def backtranslation_mix(t, n, a) -> ScheduleMix:
    """n_smt = round-half-up(n * max(0, 1 - t/a)); the rest split greedy-first."""
    if a <= 0:
        raise ValueError("transition length a must be positive")
    if t < 0 or n < 0:
        raise ValueError("t and n must be non-negative")
    share = max(Fraction(0), 1 - Fraction(t) / Fraction(a))
    exact = Fraction(n) * share
    n_smt = int(exact + Fraction(1, 2))  # floor(x + 1/2) on a non-negative exact value
    rest = n - n_smt
    greedy = (rest + 1) // 2
    return ScheduleMix(n_smt, greedy, rest - greedy)


def assemble_iteration_corpus(mix: ScheduleMix, smt_pairs, nmt_greedy_pairs, nmt_sampled_pairs):
    """First n pairs of each stream, concatenated in the order smt, greedy, sampled."""
    out = []
    for name, stream, count in (("smt", smt_pairs, mix.n_smt), ("greedy", nmt_greedy_pairs, mix.n_nmt_greedy),
                                ("sampled", nmt_sampled_pairs, mix.n_nmt_sampled)):
        stream = list(stream[:count]) if hasattr(stream, "__getitem__") else [p for _, p in zip(range(count), stream)]
        if len(stream) < count:
            raise ValueError(f"{name} stream has {len(stream)} pairs, {count} requested")
        out.extend(stream)
    return SyntheticParallelCorpus(out, "mixed")
