"""Word alignment: IBM Model 1 then a diagonal-prior Model 2, both directions, symmetrized.

EM runs over the flat list of every (target token, candidate source word)
link in the corpus, so each iteration is a few numpy bincounts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NULL = "<null>"


@dataclass
class _Links:
    pair_of_u: np.ndarray      # unique (source word, target word) id per link
    src_of_u: np.ndarray       # source word id of each unique pair
    u: np.ndarray              # unique-pair id for each link
    group: np.ndarray          # target-token occurrence id for each link
    src_pos: np.ndarray        # 1-based source position, 0 for NULL
    tgt_pos: np.ndarray        # 1-based target position
    src_len: np.ndarray        # source length of the sentence of each link
    tgt_len: np.ndarray
    n_groups: int
    group_sentence: np.ndarray
    group_offsets: np.ndarray  # first link of each group
    n_tgt_vocab: int


def _index(corpus):
    src_vocab = {NULL: 0}
    tgt_vocab = {}
    e_ids, f_ids, groups, s_pos, t_pos, s_len, t_len, g_sent = [], [], [], [], [], [], [], []
    g = 0
    for k, (src, tgt) in enumerate(corpus):
        sids = [0] + [src_vocab.setdefault(w, len(src_vocab)) for w in src]
        n = len(src)
        m = len(tgt)
        for i, w in enumerate(tgt):
            fid = tgt_vocab.setdefault(w, len(tgt_vocab))
            e_ids.extend(sids)
            f_ids.extend([fid] * (n + 1))
            groups.extend([g] * (n + 1))
            s_pos.extend(range(n + 1))
            t_pos.extend([i + 1] * (n + 1))
            s_len.extend([n] * (n + 1))
            t_len.extend([m] * (n + 1))
            g_sent.append(k)
            g += 1
    e = np.array(e_ids, dtype=np.int64)
    f = np.array(f_ids, dtype=np.int64)
    key = e * max(len(tgt_vocab), 1) + f
    uniq, u = np.unique(key, return_inverse=True)
    groups = np.array(groups, dtype=np.int64)
    offsets = np.searchsorted(groups, np.arange(g))
    return _Links(uniq, uniq // max(len(tgt_vocab), 1), u, groups, np.array(s_pos), np.array(t_pos),
                  np.array(s_len), np.array(t_len), g, np.array(g_sent, dtype=np.int64), offsets,
                  max(len(tgt_vocab), 1))


def _diagonal_prior(links, tension, p0):
    i = links.tgt_pos.astype(float)
    j = links.src_pos.astype(float)
    m = links.tgt_len.astype(float)
    n = np.maximum(links.src_len.astype(float), 1.0)
    score = np.exp(-tension * np.abs(i / m - j / n))
    score[links.src_pos == 0] = 0.0
    z = np.bincount(links.group, score, minlength=links.n_groups)
    prior = (1.0 - p0) * score / np.where(z > 0, z, 1.0)[links.group]
    prior[links.src_pos == 0] = p0
    return prior


@dataclass
class AlignmentModel:
    theta: np.ndarray
    links: _Links
    prior: np.ndarray
    log_likelihoods: list


def _em(links, theta, prior, iterations, lls):
    for _ in range(iterations):
        p = theta[links.u] * prior
        denom = np.bincount(links.group, p, minlength=links.n_groups)
        lls.append(float(np.sum(np.log(denom))))
        post = p / denom[links.group]
        counts = np.bincount(links.u, post, minlength=len(theta))
        totals = np.bincount(links.src_of_u, counts)
        theta = counts / totals[links.src_of_u]
    return theta


def ibm_model1(corpus, iterations=5):
    """EM for Model 1; log likelihoods are recorded before each update."""
    links = _index(corpus)
    theta = np.full(len(links.pair_of_u), 1.0 / links.n_tgt_vocab)
    prior = 1.0 / (links.src_len + 1.0)
    lls = []
    theta = _em(links, theta, prior, iterations, lls)
    return AlignmentModel(theta, links, prior, lls)


def model1_log_likelihood(model: AlignmentModel):
    p = model.theta[model.links.u] * model.prior
    return float(np.sum(np.log(np.bincount(model.links.group, p, minlength=model.links.n_groups))))


def diagonal_model2(corpus, model1_iterations=5, iterations=5, tension=4.0, p0=0.08):
    model = ibm_model1(corpus, model1_iterations)
    links = model.links
    prior = _diagonal_prior(links, tension, p0)
    lls = []
    theta = _em(links, model.theta, prior, iterations, lls)
    return AlignmentModel(theta, links, prior, lls)


def viterbi_links(model: AlignmentModel, corpus):
    """Best source position for each target token; NULL choices leave the token unaligned."""
    links = model.links
    p = model.theta[links.u] * model.prior
    out = [set() for _ in corpus]
    starts = links.group_offsets
    ends = np.append(starts[1:], len(p))
    for g in range(links.n_groups):
        a, b = starts[g], ends[g]
        k = a + int(np.argmax(p[a:b]))
        j = links.src_pos[k]
        if j > 0:
            out[links.group_sentence[g]].add((int(j) - 1, int(links.tgt_pos[k]) - 1))
    return out


def grow_diag_final_and(forward, backward):
    """Symmetrize (source, target) link sets from the two directions."""
    forward = set(forward)
    backward = set(backward)
    union = forward | backward
    alignment = forward & backward
    neighbors = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))
    aligned_s = {s for s, _ in alignment}
    aligned_t = {t for _, t in alignment}
    added = True
    while added:
        added = False
        for s, t in sorted(alignment):
            for ds, dt in neighbors:
                cand = (s + ds, t + dt)
                if cand in union and cand not in alignment and (cand[0] not in aligned_s or cand[1] not in aligned_t):
                    alignment.add(cand)
                    aligned_s.add(cand[0])
                    aligned_t.add(cand[1])
                    added = True
    for direction in (forward, backward):
        for s, t in sorted(direction):
            if s not in aligned_s and t not in aligned_t:
                alignment.add((s, t))
                aligned_s.add(s)
                aligned_t.add(t)
    return frozenset(alignment)


def align_words(corpus, model1_iterations=5, iterations=5, tension=4.0, p0=0.08):
    """Symmetrized alignments for a list of (source tokens, target tokens) pairs."""
    corpus = [(tuple(s), tuple(t)) for s, t in corpus]
    if not corpus:
        raise ValueError("cannot align an empty corpus")
    fwd_model = diagonal_model2(corpus, model1_iterations, iterations, tension, p0)
    forward = viterbi_links(fwd_model, corpus)
    flipped = [(t, s) for s, t in corpus]
    bwd_model = diagonal_model2(flipped, model1_iterations, iterations, tension, p0)
    backward = [{(s, t) for t, s in links} for links in viterbi_links(bwd_model, flipped)]
    return [grow_diag_final_and(f, b) for f, b in zip(forward, backward)]


def word_lexicon(corpus, alignments):
    """Relative frequencies p(target word | source word) from aligned links.

    Unaligned words count as aligned to NULL on the other side.
    """
    counts = {}
    totals = {}
    for (src, tgt), links in zip(corpus, alignments):
        aligned_t = {t for _, t in links}
        for s, t in links:
            counts[(src[s], tgt[t])] = counts.get((src[s], tgt[t]), 0) + 1
            totals[src[s]] = totals.get(src[s], 0) + 1
        for t, w in enumerate(tgt):
            if t not in aligned_t:
                counts[(NULL, w)] = counts.get((NULL, w), 0) + 1
                totals[NULL] = totals.get(NULL, 0) + 1
    return {pair: c / totals[pair[0]] for pair, c in counts.items()}
