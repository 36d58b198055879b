"""Cross-lingual mapping: identical-string seeding plus Procrustes self-learning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace


class InitializationError(ValueError):
    pass


def _unit(matrix):
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero vector")
    return matrix / norms


def normalize_matrix(matrix):
    m = _unit(np.asarray(matrix, dtype=np.float64))
    m = m - m.mean(axis=0)
    return _unit(m)


def normalize_embeddings(space: EmbeddingSpace) -> EmbeddingSpace:
    """Unit length, mean centering, unit length again."""
    return space.with_matrix(normalize_matrix(space.matrix))


def seed_identical_dictionary(space_src, space_tgt) -> set:
    shared = {p for p in space_src.phrases if p in space_tgt}
    if not shared:
        raise InitializationError("no identical phrases shared by the two vocabularies")
    return {(p, p) for p in shared}


def procrustes_map(X, Z, weights=None):
    """Orthogonal W maximizing sum_i w_i (X_i W) . Z_i."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if X.shape != Z.shape:
        raise ValueError("X and Z must have the same shape")
    M = X.T @ (Z if weights is None else Z * np.asarray(weights)[:, None])
    if not np.any(M):
        raise ValueError("degenerate input: cross-covariance is zero")
    u, _, vt = np.linalg.svd(M)
    return u @ vt


def _top_mean(sims, k):
    k = min(k, sims.shape[1])
    part = np.partition(sims, sims.shape[1] - k, axis=1)[:, -k:]
    return part.mean(axis=1)


def nearest_neighbors(query, keys, retrieval="cosine", k=10, reverse_query=None, batch=2048):
    """Index of the best key row for every query row.

    Rows are assumed unit length, so dot products are cosines.  For CSLS
    ``reverse_query`` is the full query-side matrix used for the keys'
    neighborhood radius (defaults to ``query``).
    """
    if retrieval not in ("cosine", "csls"):
        raise ValueError(f"unknown retrieval {retrieval!r}")
    if retrieval == "csls":
        other = query if reverse_query is None else reverse_query
        key_r = np.concatenate([_top_mean(keys[i:i + batch] @ other.T, k) for i in range(0, len(keys), batch)])
    best = np.empty(len(query), dtype=np.int64)
    for i in range(0, len(query), batch):
        sims = query[i:i + batch] @ keys.T
        if retrieval == "csls":
            sims = 2 * sims - _top_mean(sims, k)[:, None] - key_r[None, :]
        best[i:i + batch] = np.argmax(sims, axis=1)
    return best


def _induce_indices(src, tgt, mode, retrieval, k=10):
    fwd = bwd = None
    if mode in ("forward", "union"):
        fwd = nearest_neighbors(src, tgt, retrieval, k)
    if mode in ("backward", "union"):
        bwd = nearest_neighbors(tgt, src, retrieval, k)
    if fwd is None and bwd is None:
        raise ValueError(f"unknown induction mode {mode!r}")
    return fwd, bwd


def induce_dictionary(mapped_src, mapped_tgt, mode="union", retrieval="cosine", cutoff=None, k=10) -> set:
    """Nearest-neighbor dictionary between two mapped spaces (first ``cutoff`` rows of each)."""
    src = mapped_src.matrix[:cutoff]
    tgt = mapped_tgt.matrix[:cutoff]
    fwd, bwd = _induce_indices(src, tgt, mode, retrieval, k)
    pairs = set()
    if fwd is not None:
        pairs |= {(mapped_src.phrases[i], mapped_tgt.phrases[j]) for i, j in enumerate(fwd)}
    if bwd is not None:
        pairs |= {(mapped_src.phrases[i], mapped_tgt.phrases[j]) for j, i in enumerate(bwd)}
    return pairs


@dataclass
class MappingResult:
    w_src: np.ndarray
    w_tgt: np.ndarray
    dictionary: set
    iterations: int
    objectives: list = field(default_factory=list)

    def apply(self, space_src, space_tgt):
        """Normalize then map both spaces into the shared space."""
        src = normalize_embeddings(space_src)
        tgt = normalize_embeddings(space_tgt)
        return src.with_matrix(src.matrix @ self.w_src), tgt.with_matrix(tgt.matrix @ self.w_tgt)


def _pairs_from_indices(fwd, bwd):
    """Weighted (src row, tgt row) pairs; forward and backward halves weigh equally."""
    rows_s = np.concatenate([np.arange(len(fwd)), bwd])
    rows_t = np.concatenate([fwd, np.arange(len(bwd))])
    weights = np.concatenate([np.full(len(fwd), 0.5 / len(fwd)), np.full(len(bwd), 0.5 / len(bwd))])
    return rows_s, rows_t, weights


def self_learn(space_src, space_tgt, max_iters=50, convergence_threshold=1e-6, retrieval="cosine",
               cutoff=20000, csls_k=10, log=None) -> MappingResult:
    """Alternate Procrustes fits and union dictionary induction.

    The source side is rotated onto the target side, so ``w_tgt`` stays the
    identity.  The tracked objective is the mean cosine of forward-induced
    pairs averaged with that of backward-induced pairs; with cosine retrieval
    it cannot decrease.
    """
    src = normalize_embeddings(space_src)
    tgt = normalize_embeddings(space_tgt)
    dim = src.dimension
    if tgt.dimension != dim:
        raise ValueError("embedding dimensions differ")
    seed = seed_identical_dictionary(src, tgt)
    identity = np.eye(dim)
    if max_iters <= 0:
        return MappingResult(identity, identity.copy(), seed, 0, [])

    rows_s = np.array([src.index[s] for s, _ in sorted(seed)])
    rows_t = np.array([tgt.index[t] for _, t in sorted(seed)])
    weights = None
    S = src.matrix[:cutoff]
    T = tgt.matrix[:cutoff]
    dictionary = seed
    objectives = []
    w = identity
    iterations = 0
    for it in range(1, max_iters + 1):
        iterations = it
        w = procrustes_map(src.matrix[rows_s], tgt.matrix[rows_t], weights)
        mapped = S @ w
        fwd, bwd = _induce_indices(mapped, T, "union", retrieval, csls_k)
        new_dict = {(src.phrases[i], tgt.phrases[j]) for i, j in enumerate(fwd)}
        new_dict |= {(src.phrases[i], tgt.phrases[j]) for j, i in enumerate(bwd)}
        objective = 0.5 * (np.mean(np.sum(mapped * T[fwd], axis=1)) + np.mean(np.sum(mapped[bwd] * T, axis=1)))
        gain = objective - objectives[-1] if objectives else np.inf
        objectives.append(float(objective))
        if log:
            log(f"iteration {it}: objective {objective:.6f} dictionary {len(new_dict)}")
        converged = new_dict == dictionary or gain < convergence_threshold
        dictionary = new_dict
        rows_s, rows_t, weights = _pairs_from_indices(fwd, bwd)
        if converged:
            break
    return MappingResult(w, identity.copy(), dictionary, iterations, objectives)
