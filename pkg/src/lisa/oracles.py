"""Slow reference attention implementations used as ground truth.

Everything here evaluates attention by explicit summation over sequence
positions, in double precision, sharing no reduction code with the
histogram-based fast path. Quadratic on purpose.
"""

import numpy as np

from .attention import MODES, ProjectionSet

__all__ = [
    "vanilla_attention",
    "direct_relaxed_attention",
    "setform_attention",
]


def vanilla_attention(x, proj: ProjectionSet, causal: bool = True) -> np.ndarray:
    """Dense softmax attention of a sequence over itself, output (L, D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"expected a non-empty (L, D) sequence, got shape {x.shape}")
    if x.shape[1] != proj.dim:
        raise ValueError(f"sequence dim {x.shape[1]} != projection dim {proj.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sequence contains non-finite values")
    queries = x @ proj.p_q
    keys = x @ proj.p_k
    vals = x @ proj.p_v
    logits = proj.scale * (queries @ keys.T)
    if causal:
        length = x.shape[0]
        logits = np.where(np.tril(np.ones((length, length), dtype=bool)), logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ vals


def _prepare(indices, codebooks, proj: ProjectionSet, mode: str):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    idx = np.asarray(indices)
    if idx.ndim != 2 or idx.shape[0] < 1:
        raise ValueError(f"indices must be a non-empty (L, B) matrix, got shape {idx.shape}")
    if idx.shape[1] != codebooks.n_codebooks:
        raise ValueError("indices and codebooks disagree on the number of codebooks")
    if idx.min() < 0 or idx.max() >= codebooks.n_codewords:
        raise IndexError(f"codeword index out of range [0, {codebooks.n_codewords})")
    idx = idx.astype(np.intp, copy=False)
    q_proj = codebooks.values @ proj.p_q  # (B, W, D)
    k_proj = codebooks.values @ proj.p_k
    v_proj = codebooks.values @ proj.p_v
    return idx, q_proj, k_proj, v_proj


def direct_relaxed_attention(indices, codebooks, proj: ProjectionSet, mode: str) -> np.ndarray:
    """Per-codebook attention summed over codebooks, evaluated position by
    position over every visible sequence item. No histograms, no tables."""
    idx, q_proj, k_proj, v_proj = _prepare(indices, codebooks, proj, mode)
    length, n_books = idx.shape
    out = np.zeros((length, codebooks.dim))
    for i in range(length):
        visible = idx[: i + 1] if mode == "unidirectional" else idx
        for b in range(n_books):
            query = q_proj[b, idx[i, b]]
            keys = k_proj[b, visible[:, b]]
            scores = np.exp(proj.scale * (keys @ query))
            out[i] += (scores @ v_proj[b, visible[:, b]]) / scores.sum()
    return out


def setform_attention(indices, codebooks, proj: ProjectionSet, mode: str) -> np.ndarray:
    """Same attention as :func:`direct_relaxed_attention`, but summed over
    the set of occurring codewords weighted by their occurrence counts."""
    idx, q_proj, k_proj, v_proj = _prepare(indices, codebooks, proj, mode)
    length, n_books = idx.shape
    out = np.zeros((length, codebooks.dim))
    for i in range(length):
        visible = idx[: i + 1] if mode == "unidirectional" else idx
        for b in range(n_books):
            occurring, counts = np.unique(visible[:, b], return_counts=True)
            query = q_proj[b, idx[i, b]]
            scores = counts * np.exp(proj.scale * (k_proj[b, occurring] @ query))
            out[i] += (scores @ v_proj[b, occurring]) / scores.sum()
    return out
