"""Unsupervised tuning: cycle-consistency plus LM-entropy loss, optimized by MERT.

One direction is tuned while the reverse system stays fixed.  Every
n-best hypothesis carries constant statistics (BLEU stats of its round trip,
LM log probability, lengths), so the corpus loss of any selection of
hypotheses is a function of summed statistics and the line search can be
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bleu import bleu_from_array, bleu_stats
from .decoder import FEATURES, NUM_FEATURES, TUNABLE, LogLinearWeights, System

LOG2_10 = 1.0 / math.log10(2.0)
GAMMA_RANGE = (-10.0, 10.0)

# layout of the per-hypothesis statistic vector
A_BLEU = slice(0, 10)     # round trip of a pool-A hypothesis against the original
A_LM = 10                 # log2 probability of the hypothesis under the target LM
A_TOK = 11                # scored tokens (words plus end marker)
B_BLEU = slice(12, 22)    # pool-B hypothesis against the original
STATS_DIM = 22


# ------------------------------------------------------------------ loss
def length_penalty(orig_len, roundtrip_len):
    if orig_len <= 0:
        raise ValueError("original length must be positive")
    return max(1.0, roundtrip_len / orig_len)


def lm_loss(h_translated, h_natural, lp, flip=False):
    """lp * hinge^2; by default penalizes translations less predictable than natural text."""
    diff = h_natural - h_translated if flip else h_translated - h_natural
    return lp * max(0.0, diff) ** 2


@dataclass
class LossBreakdown:
    l_cycle_e: float
    l_cycle_f: float
    l_lm_e: float
    l_lm_f: float
    lp_e: float = 1.0
    lp_f: float = 1.0

    @property
    def total(self):
        return self.l_cycle_e + self.l_cycle_f + self.l_lm_e + self.l_lm_f

    def swapped(self):
        return LossBreakdown(self.l_cycle_f, self.l_cycle_e, self.l_lm_f, self.l_lm_e, self.lp_f, self.lp_e)

    def as_row(self):
        return [self.l_cycle_e, self.l_cycle_f, self.l_lm_e, self.l_lm_f, self.lp_e, self.lp_f, self.total]

    HEADER = ("l_cycle_e", "l_cycle_f", "l_lm_e", "l_lm_f", "lp_e", "lp_f", "total")


def entropy_bits(log10_total, tokens):
    return -log10_total * LOG2_10 / tokens


def _scored_tokens(sentences):
    return sum(len(s) + 1 for s in sentences)


def unsupervised_loss(system_ef: System, system_fe: System, sample_e, sample_f, smoothing="plus_one_higher_orders",
                      flip_hinge=False, natural=None) -> LossBreakdown:
    """Decode both samples through both systems and evaluate the four loss terms.

    The target LMs are the systems' own LMs.  ``natural`` may supply the
    natural-text entropies (h_e, h_f) to avoid recomputing them.
    """
    lm_e, lm_f = system_fe.lm, system_ef.lm
    if natural is None:
        natural = natural_entropies(lm_e, lm_f, sample_e, sample_f)
    h_e, h_f = natural
    t_ef = system_ef.translate_all(sample_e)
    back_e = system_fe.translate_all(t_ef)
    t_fe = system_fe.translate_all(sample_f)
    back_f = system_ef.translate_all(t_fe)
    stats_e = sum((bleu_stats(b, o).as_array() for b, o in zip(back_e, sample_e)), np.zeros(10, dtype=np.int64))
    stats_f = sum((bleu_stats(b, o).as_array() for b, o in zip(back_f, sample_f)), np.zeros(10, dtype=np.int64))
    lp_e = length_penalty(stats_e[9], stats_e[8])
    lp_f = length_penalty(stats_f[9], stats_f[8])
    lp = lp_e * lp_f
    h_t_ef = entropy_bits(sum(lm_f.sentence_logprob(s) for s in t_ef), _scored_tokens(t_ef))
    h_t_fe = entropy_bits(sum(lm_e.sentence_logprob(s) for s in t_fe), _scored_tokens(t_fe))
    return LossBreakdown(
        1.0 - _bleu(stats_e, smoothing),
        1.0 - _bleu(stats_f, smoothing),
        lm_loss(h_t_ef, h_f, lp, flip_hinge),
        lm_loss(h_t_fe, h_e, lp, flip_hinge),
        lp_e, lp_f,
    )


def natural_entropies(lm_e, lm_f, sample_e, sample_f):
    h_e = entropy_bits(sum(lm_e.sentence_logprob(s) for s in sample_e), _scored_tokens(sample_e))
    h_f = entropy_bits(sum(lm_f.sentence_logprob(s) for s in sample_f), _scored_tokens(sample_f))
    return h_e, h_f


def _bleu(arr, smoothing):
    return bleu_from_array(arr, smoothing) if arr[8] > 0 else 0.0


# ----------------------------------------------------------------- pools
@dataclass
class PoolEntry:
    """Hypotheses for one source sentence: surfaces, feature rows, statistic rows."""

    source: tuple
    reference: tuple
    surfaces: list = field(default_factory=list)
    features: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    backs: list = field(default_factory=list)
    _seen: dict = field(default_factory=dict)
    _cache: tuple = None

    def add(self, surface, features, stats, back=None):
        if surface in self._seen:
            return False
        self._cache = None
        self._seen[surface] = len(self.surfaces)
        self.surfaces.append(surface)
        self.features.append(np.asarray(features, dtype=float))
        self.stats.append(np.asarray(stats, dtype=float))
        self.backs.append(back)
        return True

    def __len__(self):
        return len(self.surfaces)

    def matrices(self):
        if self._cache is None:
            self._cache = (np.array(self.features), np.array(self.stats))
        return self._cache


@dataclass
class TuningContext:
    """Everything fixed while one direction is tuned.

    ``h_fixed_translations`` is the entropy of the fixed system's output;
    no tuned weight can change the loss term it feeds.
    """

    h_src_natural: float      # natural entropy of the tuned direction's source language
    h_tgt_natural: float      # natural entropy of the tuned direction's target language
    h_fixed_translations: float
    smoothing: str = "plus_one_higher_orders"
    flip_hinge: bool = False


def pool_loss_breakdown(total, ctx: TuningContext) -> LossBreakdown:
    """Loss from summed statistics, named from the tuned direction's point of view.

    ``l_cycle_e``/``l_lm_e`` refer to the tuned direction's source language.
    """
    a = total[A_BLEU]
    b = total[B_BLEU]
    lp_src = length_penalty(a[9], a[8]) if a[9] > 0 else 1.0
    lp_tgt = length_penalty(b[9], b[8]) if b[9] > 0 else 1.0
    lp = lp_src * lp_tgt
    h_trans = -total[A_LM] / total[A_TOK] if total[A_TOK] > 0 else ctx.h_tgt_natural
    return LossBreakdown(
        1.0 - _bleu(a, ctx.smoothing),
        1.0 - _bleu(b, ctx.smoothing),
        lm_loss(h_trans, ctx.h_tgt_natural, lp, ctx.flip_hinge),
        lm_loss(ctx.h_fixed_translations, ctx.h_src_natural, lp, ctx.flip_hinge),
        lp_src, lp_tgt,
    )


def pool_loss(total, ctx):
    return pool_loss_breakdown(total, ctx).total


class Pools:
    """Accumulated n-best pools for both roles, kept as one list of sentences."""

    def __init__(self):
        self.entries = []

    def __len__(self):
        return len(self.entries)

    def size(self):
        return sum(len(e) for e in self.entries)

    def selection_stats(self, weights):
        """Summed statistics of each sentence's best hypothesis (first index on ties)."""
        w = weights.values if isinstance(weights, LogLinearWeights) else np.asarray(weights)
        total = np.zeros(STATS_DIM)
        for entry in self.entries:
            f, s = entry.matrices()
            total += s[int(np.argmax(f @ w))]
        return total


def _a_stats(hyp_tokens, back, original, lm):
    row = np.zeros(STATS_DIM)
    row[A_BLEU] = bleu_stats(back, original).as_array()
    row[A_LM] = lm.sentence_logprob(hyp_tokens) * LOG2_10
    row[A_TOK] = len(hyp_tokens) + 1
    return row


def _b_stats(hyp_tokens, original):
    row = np.zeros(STATS_DIM)
    row[B_BLEU] = bleu_stats(hyp_tokens, original).as_array()
    return row


class PoolBuilder:
    """Builds and merges pools for the tuned system; caches fixed-system outputs."""

    def __init__(self, fixed: System, sample_src, sample_tgt, back_beam=10):
        self.fixed = fixed
        self.sample_src = [tuple(s) for s in sample_src]
        self.sample_tgt = [tuple(s) for s in sample_tgt]
        self._back_decoder = fixed.decoder(beam_size=back_beam)
        self._back_cache = {}
        self.fixed_translations = fixed.translate_all(self.sample_tgt)
        self.pools = Pools()
        for s in self.sample_src:
            self.pools.entries.append(PoolEntry(s, s))
        for t, orig in zip(self.fixed_translations, self.sample_tgt):
            self.pools.entries.append(PoolEntry(tuple(t), orig))

    def back_translate(self, tokens):
        hit = self._back_cache.get(tokens)
        if hit is None:
            hit = self._back_decoder.translate(tokens).tokens
            self._back_cache[tokens] = hit
        return hit

    def extend(self, tuned: System, nbest_size):
        """Add the tuned system's current n-best lists; returns the number of new hypotheses."""
        dec = tuned.decoder()
        lm = tuned.lm
        added = 0
        n_a = len(self.sample_src)
        for k, entry in enumerate(self.pools.entries):
            for hyp in dec.nbest(entry.source, nbest_size):
                if hyp.tokens in entry._seen:
                    continue
                if k < n_a:
                    back = self.back_translate(hyp.tokens)
                    row = _a_stats(hyp.tokens, back, entry.reference, lm)
                else:
                    back = None
                    row = _b_stats(hyp.tokens, entry.reference)
                added += entry.add(hyp.tokens, hyp.features, row, back)
        return added


def build_pools(tuned: System, fixed: System, sample_src, sample_tgt, nbest_size, builder=None):
    """(pool over tuned-source sentences, pool over fixed translations of the other sample)."""
    builder = builder or PoolBuilder(fixed, sample_src, sample_tgt)
    builder.extend(tuned, nbest_size)
    n_a = len(builder.sample_src)
    return builder.pools.entries[:n_a], builder.pools.entries[n_a:], builder


# ----------------------------------------------------------- line search
@dataclass
class LineSearchResult:
    gamma: float
    loss: float
    interval: tuple
    loss_at_zero: float


def _envelope(a, b, lo, hi):
    """Upper envelope of lines a + g*b on [lo, hi] as (breakpoints, selected indices).

    ``breakpoints[k]`` is where ``indices[k]`` takes over; the first starts at lo.
    Ties at a point go to the steeper line when moving right, then the lower index.
    """
    vals = a + lo * b
    top = vals.max()
    cands = np.flatnonzero(vals == top)
    cur = cands[np.argmax(b[cands])] if len(cands) > 1 else cands[0]
    # among equal value and slope keep the lowest index
    same = cands[b[cands] == b[cur]]
    cur = int(same.min())
    points = [lo]
    chosen = [cur]
    g = lo
    while True:
        steeper = b > b[cur]
        if not steeper.any():
            break
        idx = np.flatnonzero(steeper)
        cross = (a[cur] - a[idx]) / (b[idx] - b[cur])
        nxt = cross.min()
        if nxt >= hi:
            break
        at = idx[cross == nxt]
        best_slope = b[at].max()
        cur = int(at[b[at] == best_slope].min())
        g = max(nxt, g)
        points.append(g)
        chosen.append(cur)
    return points, chosen


def mert_line_search(pools, weights, direction, loss_fn, gamma_range=GAMMA_RANGE) -> LineSearchResult:
    """Exact minimization over gamma of the corpus loss of argmax hypotheses under w + gamma d.

    ``pools`` is a sequence of PoolEntry; ``loss_fn`` maps summed statistics to a loss.
    Returns the midpoint of the best interval, or gamma=0 when no interval improves on it.
    """
    w = weights.values if isinstance(weights, LogLinearWeights) else np.asarray(weights, dtype=float)
    d = np.asarray(direction, dtype=float)
    if not np.any(d):
        raise ValueError("direction must be non-zero")
    lo, hi = gamma_range
    events = []
    total = None
    stats = []
    current = []
    zero_total = None
    for k, entry in enumerate(pools):
        f, s = entry.matrices()
        stats.append(s)
        a = f @ w
        b = f @ d
        points, chosen = _envelope(a, b, lo, hi)
        current.append(chosen[0])
        total = s[chosen[0]].copy() if total is None else total + s[chosen[0]]
        for g, idx in zip(points[1:], chosen[1:]):
            events.append((g, k, idx))
        best0 = int(np.argmax(a))
        zero_total = s[best0].copy() if zero_total is None else zero_total + s[best0]
    if total is None:
        raise ValueError("pools are empty")
    loss0 = loss_fn(zero_total)
    events.sort(key=lambda e: e[0])
    best_loss = loss_fn(total)
    best_iv = (lo, events[0][0] if events else hi)
    start = lo
    i = 0
    while i < len(events):
        g = events[i][0]
        # apply every change happening at this breakpoint
        while i < len(events) and events[i][0] == g:
            _, k, idx = events[i]
            total += stats[k][idx] - stats[k][current[k]]
            current[k] = idx
            i += 1
        end = events[i][0] if i < len(events) else hi
        if end > g:
            loss = loss_fn(total)
            if loss < best_loss:
                best_loss, best_iv = loss, (g, end)
        start = end
    if not best_loss < loss0:
        return LineSearchResult(0.0, loss0, best_iv, loss0)
    return LineSearchResult(0.5 * (best_iv[0] + best_iv[1]), best_loss, best_iv, loss0)


# ------------------------------------------------------------------ MERT
@dataclass
class MertConfig:
    nbest_size: int = 100
    random_directions: int = 8
    min_relative_gain: float = 1e-4
    max_outer: int = 20
    max_inner: int = 10
    back_beam: int = 10
    seed: int = 1
    tunable: tuple = TUNABLE


@dataclass
class MertTrace:
    accepted: list = field(default_factory=list)   # (loss before, loss after, direction name)
    pool_sizes: list = field(default_factory=list)
    final_pool_loss: float = float("nan")


def _directions(rng, tunable, count):
    dirs = []
    for k in tunable:
        d = np.zeros(NUM_FEATURES)
        d[k] = 1.0
        dirs.append((FEATURES[k], d))
    for r in range(count):
        d = np.zeros(NUM_FEATURES)
        d[list(tunable)] = rng.standard_normal(len(tunable))
        dirs.append((f"random{r}", d / np.linalg.norm(d)))
    return dirs


def mert_optimize_direction(tuned: System, fixed: System, sample_src, sample_tgt, config: MertConfig = None,
                            ctx: TuningContext = None, log=None):
    """Tune ``tuned``'s weights against the fixed reverse system; returns (weights, trace)."""
    config = config or MertConfig()
    if ctx is None:
        h_src, h_tgt = natural_entropies(fixed.lm, tuned.lm, sample_src, sample_tgt)
        ctx = TuningContext(h_src, h_tgt, 0.0)
    builder = PoolBuilder(fixed, sample_src, sample_tgt, config.back_beam)
    ctx.h_fixed_translations = entropy_bits(
        sum(fixed.lm.sentence_logprob(t) for t in builder.fixed_translations),
        _scored_tokens(builder.fixed_translations))
    rng = np.random.default_rng(config.seed)
    tunable = tuple(config.tunable)
    loss_fn = lambda total: pool_loss(total, ctx)  # noqa: E731
    w = tuned.weights.values.copy()
    history = [w.copy()]
    trace = MertTrace()
    for outer in range(config.max_outer):
        added = builder.extend(tuned.with_weights(LogLinearWeights(w)), config.nbest_size)
        trace.pool_sizes.append(builder.pools.size())
        if outer > 0 and added == 0:
            break
        entries = builder.pools.entries
        # directions along which no feature varies cannot change any selection
        varying = np.zeros(NUM_FEATURES, dtype=bool)
        for e in entries:
            f, _ = e.matrices()
            varying |= f.max(axis=0) > f.min(axis=0)
        active = tuple(k for k in tunable if varying[k])
        dirs = _directions(rng, active, config.random_directions if active else 0)
        accepted_here = 0
        for _ in range(config.max_inner):
            current = loss_fn(builder.pools.selection_stats(w))
            best = None
            for name, d in dirs:
                res = mert_line_search(entries, w, d, loss_fn)
                if res.gamma != 0.0 and (best is None or res.loss < best[0].loss):
                    best = (res, name, d)
            if best is None:
                break
            res, name, d = best
            gain = (current - res.loss) / current if current > 0 else 0.0
            if not gain >= config.min_relative_gain:
                break
            w = w + res.gamma * d
            after = loss_fn(builder.pools.selection_stats(w))
            trace.accepted.append((current, after, name))
            history.append(w.copy())
            accepted_here += 1
            if log:
                log(f"outer {outer} step {name} gamma={res.gamma:.4g} loss {current:.5f} -> {after:.5f}")
        if accepted_here == 0:
            break
    # the pools have grown since early steps were accepted; keep the best on the final pools
    losses = [loss_fn(builder.pools.selection_stats(h)) for h in history]
    best_k = int(np.argmin(losses))
    trace.final_pool_loss = losses[best_k]
    return LogLinearWeights(history[best_k]), trace


# ----------------------------------------------------------- alternation
@dataclass
class TuneResult:
    weights_ef: LogLinearWeights
    weights_fe: LogLinearWeights
    losses: list                  # LossBreakdown before tuning and after each half-round
    traces: list


def alternating_tune(system_ef: System, system_fe: System, sample_e, sample_f, rounds=4,
                     config: MertConfig = None, smoothing="plus_one_higher_orders", flip_hinge=False,
                     min_round_gain=1e-3, log=None) -> TuneResult:
    """Alternately tune E->F and F->E; ``rounds`` counts half-rounds."""
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    config = config or MertConfig()
    natural = natural_entropies(system_fe.lm, system_ef.lm, sample_e, sample_f)
    ef, fe = system_ef, system_fe
    losses = [unsupervised_loss(ef, fe, sample_e, sample_f, smoothing, flip_hinge, natural)]
    if log:
        log(f"initial loss {losses[0].total:.5f}")
    traces = []
    for half in range(rounds):
        if half % 2 == 0:
            ctx = TuningContext(natural[0], natural[1], 0.0, smoothing, flip_hinge)
            w, trace = mert_optimize_direction(ef, fe, sample_e, sample_f, config, ctx, log)
            ef = ef.with_weights(w)
        else:
            ctx = TuningContext(natural[1], natural[0], 0.0, smoothing, flip_hinge)
            w, trace = mert_optimize_direction(fe, ef, sample_f, sample_e, config, ctx, log)
            fe = fe.with_weights(w)
        traces.append(trace)
        losses.append(unsupervised_loss(ef, fe, sample_e, sample_f, smoothing, flip_hinge, natural))
        if log:
            log(f"half-round {half + 1}: loss {losses[-1].total:.5f}")
        if half % 2 == 1:
            before, after = losses[-3].total, losses[-1].total
            if before <= 0 or (before - after) / before < min_round_gain:
                break
    return TuneResult(ef.weights, fe.weights, losses, traces)
