"""Log-linear phrase-based stack decoder with n-best extraction.

Features are kept in the log domain (natural log).  The search keeps one
stack per number of covered source words; hypotheses that agree on
coverage, last covered position and minimized LM context are recombined,
with a few losing back-pointers retained so that n-best lists contain more
than one derivation per surviving state.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .ngram_lm import LN10

FEATURES = (
    "phi_fwd", "lex_fwd", "phi_bwd", "lex_bwd", "char_fwd", "char_bwd",
    "lm", "word_penalty", "phrase_penalty", "distortion",
    "ro_mono_bwd", "ro_swap_bwd", "ro_disc_bwd", "ro_mono_fwd", "ro_swap_fwd", "ro_disc_fwd",
    "unk",
)
NUM_FEATURES = len(FEATURES)
LM, WP, PP, DIST = 6, 7, 8, 9
RO_BWD, RO_FWD = 10, 13
UNK = 16
# Unknown words are penalized with a fixed weight that tuning never touches.
UNK_WEIGHT = 100.0
TUNABLE = tuple(i for i in range(NUM_FEATURES) if i != UNK)
_UNIFORM_RO = math.log(1.0 / 3.0)


class LogLinearWeights:
    """Feature weights in the fixed order of :data:`FEATURES`."""

    def __init__(self, values=None):
        if values is None:
            values = np.zeros(NUM_FEATURES)
            values[UNK] = UNK_WEIGHT
        values = np.asarray(values, dtype=float)
        if values.shape != (NUM_FEATURES,):
            raise ValueError(f"expected {NUM_FEATURES} weights, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("weights must be finite")
        self.values = values

    @classmethod
    def default(cls):
        """Fixed fallback weights, mirroring the usual Moses defaults."""
        w = np.zeros(NUM_FEATURES)
        w[0:6] = 0.2
        w[LM] = 0.5
        w[WP] = -1.0
        w[PP] = 0.2
        w[DIST] = 0.3
        w[RO_BWD:RO_BWD + 6] = 0.3
        w[UNK] = UNK_WEIGHT
        return cls(w)

    @classmethod
    def from_dict(cls, d):
        w = cls.default().values.copy()
        for name, value in d.items():
            w[FEATURES.index(name)] = float(value)
        return cls(w)

    def to_dict(self):
        return {name: float(v) for name, v in zip(FEATURES, self.values)}

    def copy(self):
        return LogLinearWeights(self.values.copy())

    def __eq__(self, other):
        return isinstance(other, LogLinearWeights) and np.array_equal(self.values, other.values)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for name, v in zip(FEATURES, self.values):
                print(f"{name}\t{float(v)!r}", file=f)

    @classmethod
    def load(cls, path):
        d = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    name, value = line.split("\t")
                    d[name] = value
        return cls.from_dict(d)


def score_hypothesis(features, weights) -> float:
    f = np.asarray(features, dtype=float)
    w = weights.values if isinstance(weights, LogLinearWeights) else np.asarray(weights, dtype=float)
    if f.shape != w.shape:
        raise ValueError(f"feature/weight length mismatch: {f.shape} vs {w.shape}")
    return float(np.dot(f, w))


@dataclass
class DecoderConfig:
    beam_size: int = 100
    distortion_limit: int = 6
    max_phrase_len: int = 5
    nbest_size: int = 100
    table_limit: int = 20
    recombination_arcs: int = 2
    unk_mode: str = "copy"

    def __post_init__(self):
        if self.beam_size < 1 or self.nbest_size < 1 or self.max_phrase_len < 1:
            raise ValueError("beam size, n-best size and phrase length must be positive")
        if self.distortion_limit < 0 or self.table_limit < 1 or self.recombination_arcs < 1:
            raise ValueError("invalid decoder configuration")
        if self.unk_mode not in ("copy", "drop"):
            raise ValueError(f"unknown unk mode {self.unk_mode!r}")


@dataclass
class TranslationHypothesis:
    tokens: tuple
    features: np.ndarray
    score: float
    derivation: list = field(default_factory=list)

    def __len__(self):
        return len(self.tokens)


class _Option:
    __slots__ = ("start", "end", "target", "feats", "static", "pair", "ro")

    def __init__(self, start, end, target, feats, static, pair, ro):
        self.start = start
        self.end = end
        self.target = target
        self.feats = feats
        self.static = static
        self.pair = pair
        self.ro = ro


class _Node:
    __slots__ = ("score", "est", "coverage", "last_start", "last_end", "state", "option", "arcs")

    def __init__(self, score, est, coverage, last_start, last_end, state, option, arcs):
        self.score = score
        self.est = est
        self.coverage = coverage
        self.last_start = last_start
        self.last_end = last_end
        self.state = state
        self.option = option
        self.arcs = arcs


def _orientation(start, end, prev_start, prev_end):
    if start == prev_end:
        return 0
    if end == prev_start:
        return 1
    return 2


class Decoder:
    """Decoder bound to one phrase table, target LM and weight vector."""

    def __init__(self, table, lm, weights, config=None, reordering=None):
        self.table = table
        self.lm = lm
        self.weights = weights if isinstance(weights, LogLinearWeights) else LogLinearWeights(weights)
        self.config = config or DecoderConfig()
        self.reordering = reordering
        self._option_cache = {}
        self._max_src = table.max_source_len()

    # ---- option collection ------------------------------------------
    def _phrase_options(self, src):
        cached = self._option_cache.get(src)
        if cached is not None:
            return cached
        w = self.weights.values
        candidates = self.table.get(src)
        opts = []
        for tgt, scores in candidates.items():
            tgt = tuple(tgt)
            feats = np.zeros(NUM_FEATURES)
            feats[0:6] = [math.log(s) for s in scores]
            feats[WP] = -len(tgt)
            feats[PP] = 1.0
            static = float(np.dot(feats, w))
            ro = None
            if self.reordering is not None:
                probs = self.reordering.get(src, tgt)
                ro = tuple(math.log(p) for p in probs) if probs is not None else (_UNIFORM_RO,) * 6
            estimate = static + w[LM] * LN10 * self.lm.phrase_estimate(tgt)
            opts.append((estimate, tgt, feats, static, ro))
        # keep the most promising candidates by model score plus context-free LM estimate
        opts.sort(key=lambda o: (-o[0], o[1]))
        opts = opts[:self.config.table_limit]
        self._option_cache[src] = opts
        return opts

    def _options(self, sentence):
        w = self.weights.values
        n = len(sentence)
        max_len = min(self.config.max_phrase_len, self._max_src, n) if n else 0
        options = {}
        for i in range(n):
            for j in range(i + 1, min(n, i + max_len) + 1):
                src = tuple(sentence[i:j])
                if src not in self.table:
                    continue
                opts = [_Option(i, j, tgt, feats, static, (src, tgt), ro)
                        for (_, tgt, feats, static, ro) in self._phrase_options(src)]
                if opts:
                    options[(i, j)] = opts
        for i in range(n):
            if (i, i + 1) not in options:
                word = sentence[i]
                feats = np.zeros(NUM_FEATURES)
                target = (word,) if self.config.unk_mode == "copy" else ()
                feats[WP] = -len(target)
                feats[PP] = 1.0
                feats[UNK] = -1.0
                ro = (_UNIFORM_RO,) * 6 if self.reordering is not None else None
                options[(i, i + 1)] = [_Option(i, i + 1, target, feats, float(np.dot(feats, w)),
                                               ((word,), target), ro)]
        return options

    def _future_costs(self, sentence, options):
        n = len(sentence)
        wlm = self.weights.values[LM]
        lm = self.lm
        best = [[-math.inf] * (n + 1) for _ in range(n + 1)]
        for (i, j), opts in options.items():
            best[i][j] = max(o.static + wlm * LN10 * lm.phrase_estimate(o.target) for o in opts)
        for length in range(2, n + 1):
            for i in range(0, n - length + 1):
                j = i + length
                b = best[i][j]
                for k in range(i + 1, j):
                    v = best[i][k] + best[k][j]
                    if v > b:
                        b = v
                best[i][j] = b
        return best

    # ---- search -------------------------------------------------------
    def _search(self, sentence):
        sentence = tuple(sentence)
        n = len(sentence)
        cfg = self.config
        w = self.weights.values
        w_lm = w[LM] * LN10
        w_dist = w[DIST]
        w_ro_b = w[RO_BWD:RO_BWD + 3]
        w_ro_f = w[RO_FWD:RO_FWD + 3]
        use_ro = self.reordering is not None
        lm = self.lm
        dl = cfg.distortion_limit
        arcs_k = cfg.recombination_arcs
        full = (1 << n) - 1

        options = self._options(sentence)
        spans = sorted(options)
        span_masks = {(i, j): ((1 << j) - 1) ^ ((1 << i) - 1) for (i, j) in spans}
        fc = self._future_costs(sentence, options)
        fc_cache = {}

        def future(cov):
            v = fc_cache.get(cov)
            if v is None:
                v = 0.0
                i = 0
                while i < n:
                    if cov >> i & 1:
                        i += 1
                        continue
                    j = i
                    while j < n and not cov >> j & 1:
                        j += 1
                    v += fc[i][j]
                    i = j
                fc_cache[cov] = v
            return v

        root = _Node(0.0, future(0), 0, -1, 0, lm.begin_state(), None, [])
        stacks = [dict() for _ in range(n + 1)]
        stacks[0][None] = root
        for k in range(n):
            stack = stacks[k]
            if not stack:
                continue
            hyps = sorted(stack.values(), key=lambda h: -h.est)[:cfg.beam_size]
            for h in hyps:
                cov = h.coverage
                last_end = h.last_end
                for span in spans:
                    i, j = span
                    mask = span_masks[span]
                    if cov & mask:
                        continue
                    jump = i - last_end
                    if jump < 0:
                        jump = -jump
                    if jump > dl:
                        continue
                    new_cov = cov | mask
                    done = new_cov == full
                    if not done:
                        # the leftmost gap must stay reachable: either from the new end or
                        # from the end of a later phrase over some uncovered position p with p + 1 - gap <= dl
                        gap = (~new_cov & (new_cov + 1)).bit_length() - 1
                        if gap < i and j - gap > dl and not (~new_cov >> (gap + 1)) & ((1 << max(dl - 1, 0)) - 1):
                            continue
                    nk = k + (j - i)
                    next_stack = stacks[nk]
                    fut = 0.0 if done else future(new_cov)
                    if use_ro:
                        orient = _orientation(i, j, h.last_start, last_end)
                    for opt in options[span]:
                        lmd, state = lm.score_phrase(h.state, opt.target)
                        if done:
                            lmd += lm.end_score(state)
                        delta = opt.static + w_lm * lmd - w_dist * jump
                        ro_b = ro_f = ro_end = None
                        if use_ro:
                            ro_b = (orient, opt.ro[orient])
                            delta += w_ro_b[orient] * opt.ro[orient]
                            if h.option is not None:
                                ro_f = (orient, h.option.ro[3 + orient])
                                delta += w_ro_f[orient] * h.option.ro[3 + orient]
                            if done:
                                end_orient = 0 if j == n else 2
                                ro_end = (end_orient, opt.ro[3 + end_orient])
                                delta += w_ro_f[end_orient] * opt.ro[3 + end_orient]
                            key = (new_cov, i, j, state, opt.pair)
                        else:
                            key = (new_cov, j, state)
                        score = h.score + delta
                        arc = (h, opt, lmd, jump, ro_b, ro_f, ro_end, delta)
                        node = next_stack.get(key)
                        if node is None:
                            next_stack[key] = _Node(score, score + fut, new_cov, i, j, state, opt, [arc])
                        elif score > node.score:
                            node.score = score
                            node.est = score + fut
                            node.option = opt
                            node.arcs.insert(0, arc)
                            del node.arcs[arcs_k:]
                        elif len(node.arcs) < arcs_k:
                            node.arcs.append(arc)
                        else:
                            worst = node.arcs[-1]
                            if worst[0].score + worst[7] < score:
                                node.arcs[-1] = arc
                                node.arcs.sort(key=lambda a: -(a[0].score + a[7]))
        return root, stacks[n], n

    def _path_hypothesis(self, path, n):
        feats = np.zeros(NUM_FEATURES)
        tokens = []
        derivation = []
        for (pred, opt, lmd, jump, ro_b, ro_f, ro_end, _delta) in path:
            feats += opt.feats
            feats[LM] += lmd * LN10
            feats[DIST] -= jump
            if ro_b is not None:
                feats[RO_BWD + ro_b[0]] += ro_b[1]
            if ro_f is not None:
                feats[RO_FWD + ro_f[0]] += ro_f[1]
            if ro_end is not None:
                feats[RO_FWD + ro_end[0]] += ro_end[1]
            tokens.extend(opt.target)
            derivation.append(((opt.start, opt.end), opt.pair[0], opt.target))
        return TranslationHypothesis(tuple(tokens), feats, score_hypothesis(feats, self.weights), derivation)

    def _empty(self):
        feats = np.zeros(NUM_FEATURES)
        feats[LM] = self.lm.end_score(self.lm.begin_state()) * LN10
        return TranslationHypothesis((), feats, score_hypothesis(feats, self.weights), [])

    def nbest(self, sentence, n=None):
        """Up to ``n`` surface-distinct hypotheses, best first."""
        n = n or self.config.nbest_size
        sentence = tuple(sentence)
        if not sentence:
            return [self._empty()]
        root, finals, length = self._search(sentence)
        if not finals and self.config.distortion_limit > 0:
            # reordering dead ends everywhere in the beam: retry monotonically
            monotone = Decoder(self.table, self.lm, self.weights,
                               DecoderConfig(**{**self.config.__dict__, "distortion_limit": 0}), self.reordering)
            root, finals, length = monotone._search(sentence)
        if not finals:
            raise RuntimeError("search produced no complete hypothesis")
        heap = []
        counter = 0
        for node in finals.values():
            heap.append((-node.score, counter, node, None, 0.0))
            counter += 1
        heapq.heapify(heap)
        results = []
        seen = set()
        pops = 0
        max_pops = 50 * n + 100
        while heap and len(results) < n and pops < max_pops:
            pops += 1
            _, _, node, suffix, suffix_sum = heapq.heappop(heap)
            if node is root:
                path = []
                while suffix is not None:
                    path.append(suffix[0])
                    suffix = suffix[1]
                hyp = self._path_hypothesis(path, length)
                if hyp.tokens not in seen:
                    seen.add(hyp.tokens)
                    results.append(hyp)
                continue
            for arc in node.arcs:
                pred = arc[0]
                delta = arc[7]
                total = suffix_sum + delta
                heapq.heappush(heap, (-(pred.score + total), counter, pred, (arc, suffix), total))
                counter += 1
        results.sort(key=lambda h: -h.score)
        return results

    def translate(self, sentence):
        return self.nbest(sentence, 1)[0]


@dataclass
class System:
    """Everything needed to translate in one direction."""

    table: object
    lm: object
    weights: LogLinearWeights
    config: DecoderConfig = field(default_factory=DecoderConfig)
    reordering: object = None

    def decoder(self, **overrides):
        config = self.config
        if overrides:
            config = DecoderConfig(**{**config.__dict__, **overrides})
        return Decoder(self.table, self.lm, self.weights, config, self.reordering)

    def with_weights(self, weights):
        return System(self.table, self.lm, weights, self.config, self.reordering)

    def translate(self, sentence):
        return self.decoder().translate(sentence)

    def translate_all(self, sentences):
        dec = self.decoder()
        return [dec.translate(s).tokens for s in sentences]

    def nbest(self, sentence, n=None):
        return self.decoder().nbest(sentence, n)


def translate(table, lm, weights, sentence, config=None, reordering=None):
    return Decoder(table, lm, weights, config, reordering).translate(sentence)


def nbest(table, lm, weights, sentence, config=None, reordering=None):
    return Decoder(table, lm, weights, config, reordering).nbest(sentence)


def format_nbest_line(sent_id, hyp) -> str:
    feats = " ".join(f"{name}={float(value)!r}" for name, value in zip(FEATURES, hyp.features))
    return f"{sent_id} ||| {' '.join(hyp.tokens)} ||| {feats} ||| {float(hyp.score)!r}"


def parse_nbest_line(line):
    cols = [c.strip() for c in line.split("|||")]
    sent_id = int(cols[0])
    tokens = tuple(cols[1].split())
    feats = np.zeros(NUM_FEATURES)
    for item in cols[2].split():
        name, value = item.split("=")
        feats[FEATURES.index(name)] = float(value)
    return sent_id, tokens, feats, float(cols[3])
