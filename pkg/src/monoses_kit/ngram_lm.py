"""Interpolated modified Kneser-Ney n-gram language model with ARPA I/O."""

from __future__ import annotations

import math
import warnings
from collections import Counter, defaultdict
from typing import Iterable

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
LOG10_ZERO = -99.0
LN10 = math.log(10.0)
FALLBACK_DISCOUNT = 0.75


def _discounts(adjusted_counts):
    """Modified KN discounts (D1, D2, D3+) from count-of-counts."""
    coc = Counter()
    for c in adjusted_counts:
        if c <= 4:
            coc[c] += 1
    n1, n2, n3, n4 = coc[1], coc[2], coc[3], coc[4]
    fallback = (FALLBACK_DISCOUNT,) * 3
    if min(n1, n2, n3, n4) == 0:
        return fallback
    y = n1 / (n1 + 2 * n2)
    d = (1 - 2 * y * n2 / n1, 2 - 3 * y * n3 / n2, 3 - 4 * y * n4 / n3)
    if not (0 < d[0] <= 1 and 0 < d[1] <= 2 and 0 < d[2] <= 3):
        return fallback
    return d


class LanguageModel:
    """Backoff n-gram model stored as log10 probabilities and backoff weights.

    ``probs[n]`` maps n-gram tuples to log10 p, ``backoffs[n]`` maps n-gram
    tuples to their log10 backoff weight.  Scoring follows the usual ARPA
    backoff chain.
    """

    def __init__(self, order, probs, backoffs):
        self.order = order
        self.probs = probs
        self.backoffs = backoffs
        self.vocab = frozenset(w for (w,) in probs.get(1, {}))
        # every prefix of a stored n-gram is a usable context, even without an explicit backoff
        self._contexts = set()
        for n in range(2, order + 1):
            for gram in probs.get(n, {}):
                self._contexts.add(gram[:-1])
        for n, table in backoffs.items():
            self._contexts.update(table)
        self._cache = {}
        self._phrase_cache = {}

    # ---- scoring -----------------------------------------------------
    def _map(self, word):
        return word if word in self.vocab else UNK

    def word_logprob(self, context, word) -> float:
        """log10 p(word | context) through the backoff chain."""
        word = self._map(word)
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        total = 0.0
        for start in range(len(context) + 1):
            h = context[start:]
            table = self.probs.get(len(h) + 1)
            if table is not None:
                lp = table.get(h + (word,))
                if lp is not None:
                    return total + lp
            if h:
                total += self.backoffs.get(len(h), {}).get(h, 0.0)
        # word missing from the unigram table (only possible for hand-built models)
        return total + LOG10_ZERO

    def minimize(self, context):
        """Longest suffix of ``context`` that can still condition a prediction."""
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        for start in range(len(context)):
            if context[start:] in self._contexts:
                return context[start:]
        return ()

    def begin_state(self):
        return self.minimize((BOS,))

    def score(self, state, word):
        """Return (log10 p(word | state), next state) with memoization."""
        key = (state, word)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        lp = self.word_logprob(state, word)
        result = (lp, self.minimize(state + (self._map(word),)))
        if len(self._cache) > 2_000_000:
            self._cache.clear()
        self._cache[key] = result
        return result

    def score_phrase(self, state, words):
        """(summed log10 probability of ``words`` after ``state``, next state), memoized."""
        key = (state, words)
        hit = self._phrase_cache.get(key)
        if hit is not None:
            return hit
        total = 0.0
        for w in words:
            lp, state = self.score(state, w)
            total += lp
        result = (total, state)
        if len(self._phrase_cache) > 2_000_000:
            self._phrase_cache.clear()
        self._phrase_cache[key] = result
        return result

    def end_score(self, state) -> float:
        return self.score(state, EOS)[0]

    def phrase_estimate(self, words) -> float:
        """log10 score of a phrase with no left context (future-cost heuristic)."""
        state = ()
        total = 0.0
        for w in words:
            lp, state = self.score(state, w)
            total += lp
        return total

    def sentence_logprob(self, sentence) -> float:
        state = self.begin_state()
        total = 0.0
        for w in sentence:
            lp, state = self.score(state, w)
            total += lp
        return total + self.end_score(state)

    # ---- construction helpers ----------------------------------------
    @classmethod
    def uniform(cls, words):
        """Unigram model assigning equal probability to ``words`` (plus </s>)."""
        words = sorted(set(words) | {EOS})
        lp = -math.log10(len(words))
        probs = {1: {(w,): lp for w in words}}
        probs[1][(BOS,)] = LOG10_ZERO
        return cls(1, probs, {1: {}})

    def num_ngrams(self):
        return {n: len(self.probs.get(n, {})) for n in range(1, self.order + 1)}

    # ---- ARPA --------------------------------------------------------
    def write_arpa(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_arpa())

    def to_arpa(self) -> str:
        lines = ["", "\\data\\"]
        for n in range(1, self.order + 1):
            lines.append(f"ngram {n}={len(self.probs.get(n, {}))}")
        for n in range(1, self.order + 1):
            lines.append("")
            lines.append(f"\\{n}-grams:")
            table = self.probs.get(n, {})
            bows = self.backoffs.get(n, {})
            for gram in sorted(table):
                text = f"{table[gram]!r}\t{' '.join(gram)}"
                if n < self.order and gram in bows:
                    text += f"\t{bows[gram]!r}"
                lines.append(text)
        lines.append("")
        lines.append("\\end\\")
        lines.append("")
        return "\n".join(lines)

    @classmethod
    def read_arpa(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_arpa(f.read())

    @classmethod
    def from_arpa(cls, text):
        probs = defaultdict(dict)
        backoffs = defaultdict(dict)
        declared = {}
        section = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line == "\\data\\":
                section = "data"
                continue
            if line == "\\end\\":
                break
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:line.index("-")])
                continue
            if section == "data":
                if line.startswith("ngram "):
                    n, count = line[len("ngram "):].split("=")
                    declared[int(n)] = int(count)
                continue
            if isinstance(section, int):
                fields = line.split("\t")
                if len(fields) == 1:
                    fields = line.split()
                    lp = float(fields[0])
                    gram = tuple(fields[1:1 + section])
                    rest = fields[1 + section:]
                else:
                    lp = float(fields[0])
                    gram = tuple(fields[1].split(" "))
                    rest = fields[2:]
                probs[section][gram] = lp
                if rest:
                    backoffs[section][gram] = float(rest[0])
        if not declared:
            raise ValueError("not an ARPA file: missing \\data\\ section")
        order = max(declared)
        for n, count in declared.items():
            if len(probs[n]) != count:
                raise ValueError(f"ARPA header declares {count} {n}-grams, found {len(probs[n])}")
        return cls(order, dict(probs), dict(backoffs))


def train_kn_lm(corpus: Iterable, order: int = 5, unk_floor: float = 1e-7) -> LanguageModel:
    """Train an interpolated modified Kneser-Ney model.

    Highest-order n-grams use raw counts; lower orders use continuation
    counts, except n-grams starting with <s>, which keep raw counts.
    """
    if order < 1:
        raise ValueError("order must be positive")
    raw = [None] + [Counter() for _ in range(order)]
    n_sentences = 0
    for sentence in corpus:
        n_sentences += 1
        toks = (BOS,) + tuple(sentence) + (EOS,)
        for n in range(1, order + 1):
            table = raw[n]
            for i in range(len(toks) - n + 1):
                table[toks[i:i + n]] += 1
    if n_sentences == 0:
        raise ValueError("cannot train a language model on an empty corpus")
    effective = max(n for n in range(1, order + 1) if raw[n])
    if effective < order:
        warnings.warn(f"corpus too short for order {order}; using order {effective}")
        order = effective
        raw = raw[:order + 1]

    adjusted = [None] * (order + 1)
    adjusted[order] = raw[order]
    for n in range(order - 1, 0, -1):
        cont = Counter()
        for gram in raw[n + 1]:
            cont[gram[1:]] += 1
        adj = {}
        for gram, c in raw[n].items():
            adj[gram] = c if gram[0] == BOS else cont[gram]
        adjusted[n] = adj

    vocab = sorted({g[0] for g in raw[1]} - {BOS} | {UNK, EOS})

    probs: dict = {}
    backoffs: dict = {}
    lower_p: dict = {}
    for n in range(1, order + 1):
        counts = {g: c for g, c in adjusted[n].items() if not (n == 1 and g == (BOS,))}
        d1, d2, d3 = _discounts(counts.values())

        totals = defaultdict(int)
        nk = defaultdict(lambda: [0, 0, 0])
        for gram, c in counts.items():
            h = gram[:-1]
            totals[h] += c
            nk[h][min(c, 3) - 1] += 1
        gamma = {}
        for h, total in totals.items():
            n1, n2, n3 = nk[h]
            gamma[h] = (d1 * n1 + d2 * n2 + d3 * n3) / total

        level = {}
        if n == 1:
            total = totals[()]
            g0 = gamma[()]
            uniform = 1.0 / len(vocab)
            for w in vocab:
                c = counts.get((w,), 0)
                disc = 0.0 if c == 0 else (d1, d2, d3)[min(c, 3) - 1]
                p = (c - disc) / total + g0 * uniform
                if w == UNK:
                    p = max(p, unk_floor)
                level[(w,)] = p
        else:
            for gram, c in counts.items():
                h = gram[:-1]
                disc = (d1, d2, d3)[min(c, 3) - 1]
                p = (c - disc) / totals[h] + gamma[h] * lower_p[gram[1:]]
                level[gram] = p
        probs[n] = {g: math.log10(p) for g, p in level.items()}
        if n == 1:
            probs[1][(BOS,)] = LOG10_ZERO
        lower_p = level
        if n > 1:
            backoffs[n - 1] = {h: math.log10(g) if g > 0 else LOG10_ZERO for h, g in gamma.items()}
    backoffs.setdefault(order, {})
    for n in range(1, order):
        backoffs.setdefault(n, {})
    return LanguageModel(order, probs, backoffs)


def lm_logprob(model: LanguageModel, sentence) -> float:
    """log10 probability of a sentence wrapped in <s> ... </s>."""
    return model.sentence_logprob(sentence)


def per_word_entropy(model: LanguageModel, corpus) -> float:
    """Cross-entropy in bits per scored token (end markers included)."""
    total = 0.0
    tokens = 0
    for sentence in corpus:
        total += model.sentence_logprob(sentence)
        tokens += len(sentence) + 1
    if tokens == 0:
        raise ValueError("cannot compute entropy of an empty corpus")
    return -total * math.log2(10.0) / tokens
