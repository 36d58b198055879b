"""Initial phrase table from a shared cross-lingual embedding space."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .tables import PhraseTable

PROB_FLOOR = 1e-10
TAU_BOUNDS = (1e-3, 10.0)


# ------------------------------------------------------------- candidates
def _lex_rank(phrases):
    order = sorted(range(len(phrases)), key=lambda i: phrases[i])
    rank = np.empty(len(phrases), dtype=np.int64)
    rank[order] = np.arange(len(phrases))
    return rank


def candidate_table(mapped_src, mapped_tgt, k=100, rows=None, batch=1024):
    """Top-k cosine targets for each selected source row, ties broken lexicographically.

    Returns {source phrase: [(target phrase, cosine), ...]} with cosines descending.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    src = mapped_src.matrix / np.linalg.norm(mapped_src.matrix, axis=1, keepdims=True)
    tgt = mapped_tgt.matrix / np.linalg.norm(mapped_tgt.matrix, axis=1, keepdims=True)
    rows = np.arange(len(src)) if rows is None else np.asarray(rows)
    rank = _lex_rank(mapped_tgt.phrases)
    k = min(k, len(tgt))
    out = {}
    for b in range(0, len(rows), batch):
        block = rows[b:b + batch]
        sims = src[block] @ tgt.T
        kth = -np.partition(-sims, k - 1, axis=1)[:, k - 1]
        for r, row in enumerate(block):
            idx = np.flatnonzero(sims[r] >= kth[r])
            order = np.lexsort((rank[idx], -sims[r, idx]))[:k]
            out[mapped_src.phrases[row]] = [(mapped_tgt.phrases[j], float(sims[r, j])) for j in idx[order]]
    return out


def translation_candidates(source_phrase, mapped_src, mapped_tgt, k=100):
    source_phrase = tuple(source_phrase)
    if source_phrase not in mapped_src:
        raise KeyError(f"unknown phrase {' '.join(source_phrase)!r}")
    return candidate_table(mapped_src, mapped_tgt, k, rows=[mapped_src.index[source_phrase]])[source_phrase]


# ---------------------------------------------------------------- softmax
def softmax_scores(cosines, tau):
    c = np.asarray(cosines, dtype=np.float64) / tau
    if c.size == 0:
        raise ValueError("empty candidate list")
    e = np.exp(c - c.max())
    return e / e.sum()


def golden_section_max(f, lo, hi, tol=1e-4):
    """Maximizer of a unimodal function on [lo, hi]."""
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    # the bracket endpoints can beat the interior when the optimum sits on a bound
    best = max([(f(lo), lo), (fc, c), (fd, d), (f(hi), hi)], key=lambda x: x[0])
    return best[1]


def temperature_data(reverse_dictionary, candidates):
    """(cosine array, index of the paired candidate) for every usable dictionary pair."""
    data = []
    for src, tgt in sorted(reverse_dictionary):
        cands = candidates.get(tuple(src))
        if not cands:
            continue
        for i, (t, _) in enumerate(cands):
            if t == tuple(tgt):
                data.append((np.array([c for _, c in cands]), i))
                break
    return data


def log_likelihood(tau, data):
    total = 0.0
    for cos, i in data:
        z = cos / tau
        m = z.max()
        total += z[i] - m - math.log(np.exp(z - m).sum())
    return total


def estimate_temperature(reverse_dictionary, candidates, bounds=TAU_BOUNDS, tol=1e-4):
    """Maximum-likelihood softmax temperature over dictionary pairs.

    ``reverse_dictionary`` holds (source, target) pairs; each pair contributes
    the log softmax probability of its target among the source's candidates.
    """
    data = temperature_data(reverse_dictionary, candidates)
    if not data:
        raise ValueError("no dictionary pair has its target among the candidates")
    data = [(c, i) for c, i in data if len(c) > 1]
    if not data:
        raise ValueError("temperature is unidentifiable: all candidate sets are singletons")
    # stack into a matrix when all sets have the same size
    if len({len(c) for c, _ in data}) == 1:
        cos = np.stack([c for c, _ in data])
        idx = np.array([i for _, i in data])

        def f(tau):
            z = cos / tau
            m = z.max(axis=1)
            return float(np.sum(z[np.arange(len(idx)), idx] - m - np.log(np.exp(z - m[:, None]).sum(axis=1))))
    else:
        def f(tau):
            return log_likelihood(tau, data)
    return golden_section_max(f, bounds[0], bounds[1], tol)


# --------------------------------------------------------------- lexicals
def lexical_weighting(source, target, p_tgt_given_src, p_src_given_tgt, floor=PROB_FLOOR):
    """(lex_fwd, lex_bwd): for each word, the best-aligned word's probability, multiplied."""
    fwd = 1.0
    for t in target:
        fwd *= max([p_tgt_given_src.get((s, t), 0.0) for s in source] + [floor])
    bwd = 1.0
    for s in source:
        bwd *= max([p_src_given_tgt.get((t, s), 0.0) for t in target] + [floor])
    return fwd, bwd


def levenshtein(a, b):
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@lru_cache(maxsize=1 << 20)
def similarity(a, b):
    if not a or not b:
        raise ValueError("similarity needs non-empty strings")
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def subword_score(source, target, epsilon=0.3):
    """(char_fwd, char_bwd) with each word's best similarity floored at epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    fwd = 1.0
    for t in target:
        fwd *= max(epsilon, max(similarity(t, s) for s in source))
    bwd = 1.0
    for s in source:
        bwd *= max(epsilon, max(similarity(s, t) for t in target))
    return fwd, bwd


# ------------------------------------------------------------ whole table
def _nearest_dictionary(candidates):
    """(query, top candidate) for each query."""
    return {(q, c[0][0]) for q, c in candidates.items() if c}


def _probabilities(candidates, tau):
    out = {}
    for src, cands in candidates.items():
        p = softmax_scores([c for _, c in cands], tau)
        out[src] = {t: max(float(x), PROB_FLOOR) for (t, _), x in zip(cands, p)}
    return out


def _unigram_rows(space):
    return [i for i, p in enumerate(space.phrases) if len(p) == 1]


def _word_table(probs):
    return {(src[0], tgt[0]): p for src, row in probs.items() for tgt, p in row.items()}


def build_initial_phrase_table(mapped_src, mapped_tgt, k=100, epsilon=0.3, log=None):
    """Returns (PhraseTable, info) where info records the fitted temperatures."""
    fwd = candidate_table(mapped_src, mapped_tgt, k)
    bwd = candidate_table(mapped_tgt, mapped_src, k)
    # forward scores are fitted on the dictionary induced target -> source, and vice versa
    tau_fwd = estimate_temperature({(s, t) for t, s in _nearest_dictionary(bwd)}, fwd)
    tau_bwd = estimate_temperature({(t, s) for s, t in _nearest_dictionary(fwd)}, bwd)
    p_fwd = _probabilities(fwd, tau_fwd)
    p_bwd = _probabilities(bwd, tau_bwd)

    uni_src = mapped_src.subset([mapped_src.phrases[i] for i in _unigram_rows(mapped_src)])
    uni_tgt = mapped_tgt.subset([mapped_tgt.phrases[i] for i in _unigram_rows(mapped_tgt)])
    wf = candidate_table(uni_src, uni_tgt, k)
    wb = candidate_table(uni_tgt, uni_src, k)
    wtau_fwd = estimate_temperature({(s, t) for t, s in _nearest_dictionary(wb)}, wf)
    wtau_bwd = estimate_temperature({(t, s) for s, t in _nearest_dictionary(wf)}, wb)
    lex_t_given_s = _word_table(_probabilities(wf, wtau_fwd))
    lex_s_given_t = _word_table(_probabilities(wb, wtau_bwd))
    if log:
        log(f"temperatures: phrase {tau_fwd:.4g}/{tau_bwd:.4g} word {wtau_fwd:.4g}/{wtau_bwd:.4g}")

    table = PhraseTable()
    for src, row in p_fwd.items():
        for tgt, phi_f in row.items():
            phi_b = p_bwd.get(tgt, {}).get(src, PROB_FLOOR)
            lex_f, lex_b = lexical_weighting(src, tgt, lex_t_given_s, lex_s_given_t)
            char_f, char_b = subword_score(src, tgt, epsilon)
            table.add(src, tgt, (phi_f, lex_f, phi_b, lex_b, char_f, char_b))
    info = {"tau_fwd": tau_fwd, "tau_bwd": tau_bwd, "word_tau_fwd": wtau_fwd, "word_tau_bwd": wtau_bwd}
    return table, info
