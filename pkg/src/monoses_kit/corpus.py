"""Corpus preprocessing: normalization, tokenization, truecasing and n-gram inventories.

The tokenizer is a small, fixed rule set rather than a port of the Moses
scripts.  It normalizes punctuation variants to ASCII, splits punctuation
off words, and splits intra-word hyphens aggressively using the ``@-@``
marker token.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

HYPHEN_MARKER = "@-@"

# Fixed normalization table applied before tokenization.
_NORMALIZATION = {
    "\u00a0": " ",   # no-break space
    "\u2007": " ",
    "\u202f": " ",
    "\u2009": " ",
    "\u200b": "",    # zero-width space
    "\u2018": "'",
    "\u2019": "'",
    "\u201a": "'",
    "\u201b": "'",
    "\u2032": "'",
    "\u201c": '"',
    "\u201d": '"',
    "\u201e": '"',
    "\u201f": '"',
    "\u00ab": '"',
    "\u00bb": '"',
    "\u2033": '"',
    "\u2010": "-",
    "\u2011": "-",
    "\u2012": "-",
    "\u2013": "-",
    "\u2014": "-",
    "\u2015": "-",
    "\u2212": "-",
    "\u2026": "...",
    "\u00b4": "'",
    "`": "'",
}

Sentence = tuple  # tuple[str, ...]
Phrase = tuple    # tuple[str, ...]


def normalize_punctuation(text: str) -> str:
    text = unicodedata.normalize("NFC", text)
    return "".join(_NORMALIZATION.get(ch, ch) for ch in text)


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def _split_word(word: str) -> list[str]:
    tokens = []
    current = []
    n = len(word)
    for i, ch in enumerate(word):
        if _is_word_char(ch):
            current.append(ch)
            continue
        prev_alnum = i > 0 and _is_word_char(word[i - 1])
        next_alnum = i + 1 < n and _is_word_char(word[i + 1])
        # decimal separators between digits stay inside the number
        if ch in ".," and i > 0 and i + 1 < n and word[i - 1].isdigit() and word[i + 1].isdigit():
            current.append(ch)
            continue
        if current:
            tokens.append("".join(current))
            current = []
        if ch == "-" and prev_alnum and next_alnum:
            tokens.append(HYPHEN_MARKER)
        else:
            tokens.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


def normalize_and_tokenize(raw_line: str) -> Sentence:
    """Normalize punctuation and split a raw line into tokens.

    >>> normalize_and_tokenize("Hello, world.")
    ('Hello', ',', 'world', '.')
    >>> normalize_and_tokenize("e-mail")
    ('e', '@-@', 'mail')
    """
    text = normalize_punctuation(raw_line)
    tokens: list[str] = []
    for word in text.split():
        tokens.extend(_split_word(word))
    return tuple(tokens)


@dataclass(frozen=True)
class TruecaseModel:
    """Most frequent surface casing for each lowercased token."""

    casing: dict = field(default_factory=dict)

    def __contains__(self, token):
        return token.lower() in self.casing

    def best(self, token):
        return self.casing.get(token.lower())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for low in sorted(self.casing):
                print(f"{low}\t{self.casing[low]}", file=f)

    @classmethod
    def load(cls, path):
        casing = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                low, surface = line.split("\t")
                casing[low] = surface
        return cls(casing)


def train_truecaser(corpus: Iterable[Sentence]) -> TruecaseModel:
    counts: dict[str, Counter] = {}
    seen_any = False
    for sentence in corpus:
        seen_any = True
        for token in sentence:
            counts.setdefault(token.lower(), Counter())[token] += 1
    if not seen_any:
        raise ValueError("cannot train a truecaser on an empty corpus")
    casing = {}
    for low, forms in counts.items():
        # highest count, ties to the lexicographically smallest form
        casing[low] = min(forms.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return TruecaseModel(casing)


def apply_truecase(model: TruecaseModel, sentence: Sentence) -> Sentence:
    """Replace the sentence-initial token by its most frequent casing."""
    if not sentence:
        return tuple(sentence)
    best = model.best(sentence[0])
    if best is None:
        return tuple(sentence)
    return (best,) + tuple(sentence[1:])


@dataclass(frozen=True)
class PhraseInventory:
    """Frequency-capped unigram/bigram/trigram counts."""

    entries: dict
    caps: tuple = (200_000, 400_000, 400_000)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, phrase):
        return tuple(phrase) in self.entries

    def __getitem__(self, phrase):
        return self.entries[tuple(phrase)]

    def order(self, n: int) -> dict:
        return {p: c for p, c in self.entries.items() if len(p) == n}

    def ranked(self) -> list:
        """Phrases by decreasing count, ties broken lexicographically."""
        return sorted(self.entries, key=lambda p: (-self.entries[p], p))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for phrase in self.ranked():
                print(f"{' '.join(phrase)}\t{self.entries[phrase]}", file=f)

    @classmethod
    def load(cls, path, caps=None):
        entries = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                phrase, count = line.rsplit("\t", 1)
                entries[tuple(phrase.split(" "))] = int(count)
        if caps is None:
            caps = tuple(sum(1 for p in entries if len(p) == n) for n in (1, 2, 3))
        return cls(entries, tuple(caps))


def count_ngrams(corpus: Iterable[Sentence], max_order: int = 3) -> Counter:
    counts: Counter = Counter()
    for sentence in corpus:
        sentence = tuple(sentence)
        for n in range(1, max_order + 1):
            for i in range(len(sentence) - n + 1):
                counts[sentence[i:i + n]] += 1
    return counts


def merge_counts(shards: Iterable[Counter]) -> Counter:
    total: Counter = Counter()
    for shard in shards:
        total.update(shard)
    return total


def truncate_counts(counts: Counter, caps) -> dict:
    entries = {}
    for n, cap in enumerate(caps, start=1):
        if cap <= 0:
            continue
        order_n = [(p, c) for p, c in counts.items() if len(p) == n and c > 0]
        order_n.sort(key=lambda pc: (-pc[1], pc[0]))
        entries.update(order_n[:cap])
    return entries


def build_ngram_inventory(corpus: Iterable[Sentence], caps=(200_000, 400_000, 400_000)) -> PhraseInventory:
    caps = tuple(int(c) for c in caps)
    if len(caps) != 3 or any(c < 0 for c in caps):
        raise ValueError(f"caps must be three non-negative integers, got {caps}")
    return PhraseInventory(truncate_counts(count_ngrams(corpus, 3), caps), caps)


def read_sentences(path) -> Iterator[Sentence]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            yield tuple(line.split())


def read_corpus(path) -> list:
    return list(read_sentences(path))


def write_sentences(path, sentences) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sentence in sentences:
            print(" ".join(sentence), file=f)


def prepare_file(input_path, output_path, truecase_model_path=None) -> TruecaseModel:
    """Tokenize a raw file, train a truecaser on it and write the truecased result."""
    with open(input_path, encoding="utf-8") as f:
        tokenized = [normalize_and_tokenize(line) for line in f]
    model = train_truecaser(tokenized) if tokenized else TruecaseModel({})
    if truecase_model_path is not None:
        model.save(truecase_model_path)
    write_sentences(output_path, (apply_truecase(model, s) for s in tokenized))
    return model
