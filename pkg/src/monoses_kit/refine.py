"""Joint refinement from two back-translated corpora.

For a direction X->Y, the phrase pairs kept are those extracted from both
synthetic corpora.  p(y|x) is counted in the corpus whose X side is
machine-translated (its Y side is real text), p(x|y) in the corpus whose
Y side is machine-translated.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .align import align_words, word_lexicon
from .decoder import LogLinearWeights, System
from .phrase_induction import PROB_FLOOR, lexical_weighting, subword_score
from .tables import PhraseTable, ReorderingModel

MONO, SWAP, DISC = 0, 1, 2


@dataclass
class SyntheticParallelCorpus:
    """(translated, original) sentence pairs."""

    pairs: list
    direction: str = ""
    skipped: int = 0

    def __len__(self):
        return len(self.pairs)

    def write(self, synthetic_path, original_path):
        with open(synthetic_path, "w", encoding="utf-8") as fs, open(original_path, "w", encoding="utf-8") as fo:
            for syn, orig in self.pairs:
                print(" ".join(syn), file=fs)
                print(" ".join(orig), file=fo)

    @classmethod
    def read(cls, synthetic_path, original_path, direction=""):
        with open(synthetic_path, encoding="utf-8") as fs, open(original_path, encoding="utf-8") as fo:
            pairs = [(tuple(a.split()), tuple(b.split())) for a, b in zip(fs, fo)]
        return cls(pairs, direction)


def generate_synthetic_corpus(system: System, corpus, cap=10_000_000, direction="", log=None):
    decoder = system.decoder()
    pairs = []
    skipped = 0
    for sentence in corpus:
        if len(pairs) >= cap:
            break
        sentence = tuple(sentence)
        try:
            pairs.append((decoder.translate(sentence).tokens, sentence))
        except Exception as exc:  # one bad sentence should not sink the corpus
            skipped += 1
            if log:
                log(f"skipped sentence {' '.join(sentence)!r}: {exc}")
    return SyntheticParallelCorpus(pairs, direction, skipped)


# ------------------------------------------------------------- extraction
def _aligned(links, countf, counte):
    def is_aligned(fi, ei):
        if fi == -1 and ei == -1:
            return True
        if fi <= -1 or ei <= -1:
            return False
        if fi == countf and ei == counte:
            return True
        if fi >= countf or ei >= counte:
            return False
        return (fi, ei) in links
    return is_aligned


def orientations(s1, s2, t1, t2, is_aligned):
    """(backward, forward) word-based orientation of the pair spanning [s1,s2] x [t1,t2]."""
    if is_aligned(s1 - 1, t1 - 1):
        bwd = MONO
    elif is_aligned(s2 + 1, t1 - 1):
        bwd = SWAP
    else:
        bwd = DISC
    if is_aligned(s2 + 1, t2 + 1):
        fwd = MONO
    elif is_aligned(s1 - 1, t2 + 1):
        fwd = SWAP
    else:
        fwd = DISC
    return bwd, fwd


def extract_spans(src_len, tgt_len, links, max_len=5):
    """All consistent (s1, s2, t1, t2) rectangles (inclusive) with at least one link."""
    src_to_tgt = [[] for _ in range(src_len)]
    tgt_to_src = [[] for _ in range(tgt_len)]
    for s, t in links:
        src_to_tgt[s].append(t)
        tgt_to_src[t].append(s)
    out = []
    for t1 in range(tgt_len):
        smin, smax = src_len, -1
        for t2 in range(t1, min(tgt_len, t1 + max_len)):
            for s in tgt_to_src[t2]:
                smin = min(smin, s)
                smax = max(smax, s)
            if smax < 0 or smax - smin >= max_len:
                continue
            # every link leaving the source span must stay inside [t1, t2]
            if any(t < t1 or t > t2 for s in range(smin, smax + 1) for t in src_to_tgt[s]):
                continue
            s1 = smin
            while s1 >= 0 and smax - s1 < max_len:
                s2 = smax
                while s2 < src_len and s2 - s1 < max_len:
                    out.append((s1, s2, t1, t2))
                    s2 += 1
                    if s2 < src_len and src_to_tgt[s2]:
                        break
                s1 -= 1
                if s1 >= 0 and src_to_tgt[s1]:
                    break
    return out


@dataclass
class Extraction:
    """Phrase-pair counts plus orientation counts from one aligned corpus."""

    pair_counts: Counter = field(default_factory=Counter)
    orientation_counts: dict = field(default_factory=dict)
    lexicon: dict = field(default_factory=dict)   # p(target word | source word)
    reverse_lexicon: dict = field(default_factory=dict)

    def pairs(self):
        return set(self.pair_counts)


def extract_phrase_pairs(src, tgt, links, max_len=5):
    """List of (source phrase, target phrase, (backward, forward) orientation) for one pair."""
    src = tuple(src)
    tgt = tuple(tgt)
    is_aligned = _aligned(set(links), len(src), len(tgt))
    out = []
    for s1, s2, t1, t2 in extract_spans(len(src), len(tgt), links, max_len):
        out.append((src[s1:s2 + 1], tgt[t1:t2 + 1], orientations(s1, s2, t1, t2, is_aligned)))
    return out


def extract_corpus(corpus, alignments, max_len=5):
    """Extraction over (source, target) pairs with alignments of (source, target) links."""
    ext = Extraction()
    for (src, tgt), links in zip(corpus, alignments):
        for s, t, (bwd, fwd) in extract_phrase_pairs(src, tgt, links, max_len):
            ext.pair_counts[(s, t)] += 1
            counts = ext.orientation_counts.get((s, t))
            if counts is None:
                counts = ext.orientation_counts[(s, t)] = [0] * 6
            counts[bwd] += 1
            counts[3 + fwd] += 1
    ext.lexicon = word_lexicon(corpus, alignments)
    flipped = [(t, s) for s, t in corpus]
    ext.reverse_lexicon = word_lexicon(flipped, [{(t, s) for s, t in a} for a in alignments])
    return ext


# ------------------------------------------------------------- estimation
def estimate_phrase_table(synthetic_source: Extraction, synthetic_target: Extraction, epsilon=0.3) -> PhraseTable:
    """Intersected table; forward scores from the synthetic-source corpus, backward from the other."""
    keep = synthetic_source.pairs() & synthetic_target.pairs()
    if not keep:
        raise ValueError("the two extractions share no phrase pair")
    src_totals = Counter()
    tgt_totals = Counter()
    for s, t in keep:
        src_totals[s] += synthetic_source.pair_counts[(s, t)]
        tgt_totals[t] += synthetic_target.pair_counts[(s, t)]
    table = PhraseTable()
    for s, t in sorted(keep):
        phi_f = synthetic_source.pair_counts[(s, t)] / src_totals[s]
        phi_b = synthetic_target.pair_counts[(s, t)] / tgt_totals[t]
        lex_f, _ = lexical_weighting(s, t, synthetic_source.lexicon, {}, PROB_FLOOR)
        _, lex_b = lexical_weighting(s, t, {}, synthetic_target.reverse_lexicon, PROB_FLOOR)
        char_f, char_b = subword_score(s, t, epsilon)
        table.add(s, t, (phi_f, lex_f, phi_b, lex_b, char_f, char_b))
    return table


def estimate_lexical_reordering(extraction: Extraction, pairs=None, sigma=0.5) -> ReorderingModel:
    """Additively smoothed orientation distributions, backward then forward."""
    if not extraction.orientation_counts:
        raise ValueError("no orientation observations")
    probs = {}
    for pair, counts in extraction.orientation_counts.items():
        if pairs is not None and pair not in pairs:
            continue
        row = []
        for half in (counts[0:3], counts[3:6]):
            total = sum(half) + 3 * sigma
            row.extend((c + sigma) / total for c in half)
        probs[pair] = tuple(row)
    return ReorderingModel(probs)


# ------------------------------------------------------------------ loop
def _flip(corpus):
    return [(b, a) for a, b in corpus]


def _flip_alignments(alignments):
    return [frozenset((t, s) for s, t in a) for a in alignments]


@dataclass
class RefinedDirection:
    table: PhraseTable
    reordering: ReorderingModel


def refine_tables(syn_ef: SyntheticParallelCorpus, syn_fe: SyntheticParallelCorpus, max_len=5, epsilon=0.3,
                  align_options=None, log=None):
    """Re-estimate both directions from the two synthetic corpora.

    ``syn_ef`` holds (E->F output, original E); ``syn_fe`` holds (F->E output, original F).
    Returns (E->F direction, F->E direction).
    """
    align_options = align_options or {}
    # both corpora laid out as (E side, F side)
    corpus_a = [(e, f) for f, e in syn_ef.pairs]    # real E, synthetic F
    corpus_b = [(e, f) for e, f in syn_fe.pairs]    # synthetic E, real F
    links_a = align_words(corpus_a, **align_options)
    links_b = align_words(corpus_b, **align_options)
    if log:
        log(f"aligned {len(corpus_a)} + {len(corpus_b)} sentence pairs")
    ext_a_ef = extract_corpus(corpus_a, links_a, max_len)
    ext_b_ef = extract_corpus(corpus_b, links_b, max_len)
    ext_a_fe = extract_corpus(_flip(corpus_a), _flip_alignments(links_a), max_len)
    ext_b_fe = extract_corpus(_flip(corpus_b), _flip_alignments(links_b), max_len)
    # E->F: synthetic E source lives in corpus B; F->E: synthetic F source lives in corpus A
    table_ef = estimate_phrase_table(ext_b_ef, ext_a_ef, epsilon)
    table_fe = estimate_phrase_table(ext_a_fe, ext_b_fe, epsilon)
    ro_ef = estimate_lexical_reordering(ext_b_ef, table_ef.pairs())
    ro_fe = estimate_lexical_reordering(ext_a_fe, table_fe.pairs())
    if log:
        log(f"refined tables: E->F {len(table_ef)} entries, F->E {len(table_fe)} entries")
    return RefinedDirection(table_ef, ro_ef), RefinedDirection(table_fe, ro_fe)


@dataclass
class RefineIteration:
    index: int
    syn_ef: SyntheticParallelCorpus
    syn_fe: SyntheticParallelCorpus
    system_ef: System
    system_fe: System
    tuned: bool
    tune_result: object = None


def refine_loop(system_ef: System, system_fe: System, mono_e, mono_f, sample_e=None, sample_f=None, iterations=3,
                cap=10_000_000, max_len=5, epsilon=0.3, tune=None, align_options=None, log=None,
                on_iteration=None):
    """Alternate back-translation and re-estimation.

    ``tune(system_ef, system_fe)`` returns a result with ``weights_ef`` and
    ``weights_fe``; it runs on every iteration but the last, which installs
    the default weights instead.  Returns the final systems and the per-iteration records.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    history = []
    for it in range(1, iterations + 1):
        syn_ef = generate_synthetic_corpus(system_ef, mono_e, cap, "e-f", log)
        syn_fe = generate_synthetic_corpus(system_fe, mono_f, cap, "f-e", log)
        try:
            ef, fe = refine_tables(syn_ef, syn_fe, max_len, epsilon, align_options, log)
        except ValueError as exc:
            raise ValueError(f"refinement iteration {it}: {exc}") from exc
        defaults = LogLinearWeights.default()
        system_ef = System(ef.table, system_ef.lm, defaults, system_ef.config, ef.reordering)
        system_fe = System(fe.table, system_fe.lm, defaults.copy(), system_fe.config, fe.reordering)
        tuned = it < iterations and tune is not None
        result = None
        if tuned:
            result = tune(system_ef, system_fe)
            system_ef = system_ef.with_weights(result.weights_ef)
            system_fe = system_fe.with_weights(result.weights_fe)
        record = RefineIteration(it, syn_ef, syn_fe, system_ef, system_fe, tuned, result)
        history.append(record)
        if on_iteration:
            on_iteration(record)
        if log:
            log(f"refinement iteration {it} done ({'tuned' if tuned else 'default weights'})")
    return system_ef, system_fe, history

