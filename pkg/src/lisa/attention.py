"""Linear-time self-attention over codeword histograms.

The sequence is represented by per-codebook codeword indices. All pairwise
codeword scores are precomputed once into an exponentiated inner-product
table; a prefix-sum histogram of codeword occurrences then lets every
position attend over the full visible context in O(B*W) instead of O(L).

Conventions: row vectors, projections multiply on the right (q = x @ P_Q),
and the scaling factor is applied inside the exponent.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProjectionSet",
    "InnerProductTable",
    "build_ip_table",
    "project_values",
    "histogram_prefix",
    "histogram_prefix_soft",
    "lisa_forward",
    "lisa_forward_soft",
    "lisa_forward_batch",
]

MODES = ("unidirectional", "bidirectional")

# exponent clamp for the table; exp(60) is ~1.1e26, far from f64 overflow
MAX_LOGIT = 60.0

# soft histograms keep every mass strictly positive, so a vanishing
# normalizer can only come from a broken invariant
DENOM_FLOOR = 1e-30


@dataclass(frozen=True)
class ProjectionSet:
    """Query/key/value projection matrices plus the exponent scale.

    ``scale=None`` resolves to 1/sqrt(D) so histogram attention and the
    dense reference run at the same temperature.
    """

    p_q: np.ndarray
    p_k: np.ndarray
    p_v: np.ndarray
    scale: float | None = None

    def __post_init__(self):
        mats = []
        for name in ("p_q", "p_k", "p_v"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square, got shape {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} contains non-finite values")
            mats.append(m)
        if not (mats[0].shape == mats[1].shape == mats[2].shape):
            raise ValueError("projection matrices disagree on dimensionality")
        scale = self.scale
        if scale is None:
            scale = 1.0 / np.sqrt(mats[0].shape[0])
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        object.__setattr__(self, "p_q", mats[0])
        object.__setattr__(self, "p_k", mats[1])
        object.__setattr__(self, "p_v", mats[2])
        object.__setattr__(self, "scale", float(scale))

    @property
    def dim(self) -> int:
        return self.p_q.shape[0]

    @classmethod
    def identity(cls, dim: int, scale: float | None = None) -> "ProjectionSet":
        eye = np.eye(dim)
        return cls(eye, eye, eye, scale)

    @classmethod
    def random(cls, dim: int, seed: int = 0, scale: float | None = None) -> "ProjectionSet":
        rng = np.random.default_rng(seed)
        mats = rng.normal(scale=1.0 / np.sqrt(dim), size=(3, dim, dim))
        return cls(mats[0], mats[1], mats[2], scale)


@dataclass(frozen=True)
class InnerProductTable:
    """Exponentiated projected codeword inner products, shape (B, W, W).

    ``values[b, i, j] = exp(scale * (c_i @ P_Q) . (c_j @ P_K))`` for
    codewords of codebook ``b``. ``max_abs_logit`` reports the largest
    pre-clamp exponent magnitude seen at build time.
    """

    values: np.ndarray
    scale: float
    max_abs_logit: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError(f"table must be (B, W, W), got shape {v.shape}")
        if not (np.all(np.isfinite(v)) and np.all(v > 0)):
            raise ValueError("table entries must be finite and strictly positive")
        object.__setattr__(self, "values", v)

    @property
    def n_codebooks(self) -> int:
        return self.values.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.values.shape[1]


def build_ip_table(codebooks, proj: ProjectionSet) -> InnerProductTable:
    """Precompute all codeword-pair attention scores, post-exponent."""
    if codebooks.dim != proj.dim:
        raise ValueError(
            f"codebooks are {codebooks.dim}-dimensional but projections are {proj.dim}-dimensional"
        )
    queries = codebooks.values @ proj.p_q
    keys = codebooks.values @ proj.p_k
    logits = proj.scale * np.einsum("bid,bjd->bij", queries, keys)
    max_abs = float(np.abs(logits).max())
    values = np.exp(np.clip(logits, -MAX_LOGIT, MAX_LOGIT))
    bad = ~np.isfinite(values)
    if bad.any():
        b, i, j = (int(v) for v in np.argwhere(bad)[0])
        raise OverflowError(f"inner-product table overflow at codebook {b}, entry ({i}, {j})")
    return InnerProductTable(values=values, scale=proj.scale, max_abs_logit=max_abs)


def project_values(codebooks, proj: ProjectionSet) -> np.ndarray:
    """Value-projected codebooks, shape (B, W, D)."""
    if codebooks.dim != proj.dim:
        raise ValueError(
            f"codebooks are {codebooks.dim}-dimensional but projections are {proj.dim}-dimensional"
        )
    return codebooks.values @ proj.p_v


def _check_indices(indices, n_codewords: int) -> np.ndarray:
    idx = np.asarray(indices)
    if idx.ndim != 2 or idx.shape[0] < 1 or idx.shape[1] < 1:
        raise ValueError(f"indices must be a non-empty (L, B) matrix, got shape {idx.shape}")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ValueError(f"indices must be integers, got dtype {idx.dtype}")
    if idx.min() < 0 or idx.max() >= n_codewords:
        raise IndexError(f"codeword index out of range [0, {n_codewords})")
    return idx.astype(np.intp, copy=False)


def _one_hot(idx: np.ndarray, n_codewords: int) -> np.ndarray:
    length, n_books = idx.shape
    e = np.zeros((length, n_books, n_codewords), dtype=np.int64)
    e[np.arange(length)[:, None], np.arange(n_books)[None, :], idx] = 1
    return e


def histogram_prefix(indices, n_codewords: int) -> np.ndarray:
    """Inclusive prefix counts of codeword occurrences, shape (L, B, W).

    ``out[i, b, w]`` is the number of positions j <= i whose codebook-b
    index equals w. Integer-exact.
    """
    idx = _check_indices(indices, n_codewords)
    return np.cumsum(_one_hot(idx, n_codewords), axis=0)


def histogram_prefix_soft(assignments) -> np.ndarray:
    """Inclusive prefix sums of soft assignment masses, shape (L, B, W)."""
    a = np.asarray(assignments, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] < 1:
        raise ValueError(f"assignments must be (L, B, W), got shape {a.shape}")
    if not np.all(np.isfinite(a)) or a.min() < 0:
        raise ValueError("assignments must be finite and nonnegative")
    return np.cumsum(a, axis=0)


def _gather_scores(table: InnerProductTable, idx: np.ndarray) -> np.ndarray:
    # S[..., b, :] = values[b, idx[..., b], :]
    books = np.arange(table.n_codebooks)
    return table.values[books, idx]


def _attend(hist: np.ndarray, scores: np.ndarray, values: np.ndarray) -> np.ndarray:
    weights = hist * scores
    denom = weights.sum(axis=-1, keepdims=True)
    if not np.all(denom > DENOM_FLOOR):
        raise AssertionError(
            "attention normalizer vanished; histogram invariant violated "
            "(every position must carry its own codeword mass)"
        )
    return np.einsum("...bw,bwd->...d", weights / denom, values)


def _check_forward_args(table: InnerProductTable, values, n_books: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.shape[:2] != (table.n_codebooks, table.n_codewords):
        raise ValueError(
            f"projected values must be ({table.n_codebooks}, {table.n_codewords}, D), "
            f"got shape {values.shape}"
        )
    if n_books != table.n_codebooks:
        raise ValueError(
            f"sequence uses {n_books} codebooks but the table holds {table.n_codebooks}"
        )
    return values


def lisa_forward(
    indices,
    table: InnerProductTable,
    values,
    mode: str = "unidirectional",
) -> np.ndarray:
    """Histogram attention over a hard-encoded sequence, output (L, D).

    Unidirectional mode attends each position over the inclusive prefix via
    prefix-sum histograms; bidirectional mode broadcasts the whole-sequence
    histogram to every position.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    idx = _check_indices(indices, table.n_codewords)
    values = _check_forward_args(table, values, idx.shape[1])
    if mode == "unidirectional":
        hist = histogram_prefix(idx, table.n_codewords).astype(np.float64)
    else:
        total = _one_hot(idx, table.n_codewords).sum(axis=0).astype(np.float64)
        hist = np.broadcast_to(total, (idx.shape[0],) + total.shape)
    return _attend(hist, _gather_scores(table, idx), values)


def lisa_forward_soft(
    assignments,
    query_indices,
    table: InnerProductTable,
    values,
    mode: str = "unidirectional",
) -> np.ndarray:
    """Histogram attention with soft key/value masses and hard queries.

    The histogram accumulates softmax assignment masses; the score row for
    each position is still looked up with its single hard codeword index.
    One-hot assignments reproduce :func:`lisa_forward` exactly.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    a = np.asarray(assignments, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"assignments must be (L, B, W), got shape {a.shape}")
    if a.shape[1:] != (table.n_codebooks, table.n_codewords):
        raise ValueError(
            f"assignments shape {a.shape} does not match table "
            f"({table.n_codebooks} codebooks, {table.n_codewords} codewords)"
        )
    idx = _check_indices(query_indices, table.n_codewords)
    if idx.shape != a.shape[:2]:
        raise ValueError("query indices and assignments disagree on (L, B)")
    values = _check_forward_args(table, values, idx.shape[1])
    if mode == "unidirectional":
        hist = histogram_prefix_soft(a)
    else:
        total = a.sum(axis=0)
        hist = np.broadcast_to(total, a.shape)
    return _attend(hist, _gather_scores(table, idx), values)


def lisa_forward_batch(
    indices,
    table: InnerProductTable,
    values,
    mode: str = "unidirectional",
    lengths=None,
) -> np.ndarray:
    """Vectorized forward over a batch of sequences, output (N, L, D).

    ``lengths`` marks the valid prefix of each row; padded positions carry
    no histogram mass and their output rows are zero.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    idx = np.asarray(indices)
    if idx.ndim != 3:
        raise ValueError(f"batched indices must be (N, L, B), got shape {idx.shape}")
    n_seq, length, n_books = idx.shape
    flat = _check_indices(idx.reshape(n_seq * length, n_books), table.n_codewords)
    idx = flat.reshape(n_seq, length, n_books)
    values = _check_forward_args(table, values, n_books)

    e = np.zeros((n_seq, length, n_books, table.n_codewords), dtype=np.int64)
    n_grid = np.arange(n_seq)[:, None, None]
    l_grid = np.arange(length)[None, :, None]
    b_grid = np.arange(n_books)[None, None, :]
    e[n_grid, l_grid, b_grid, idx] = 1
    valid = None
    if lengths is not None:
        lengths = np.asarray(lengths)
        if lengths.shape != (n_seq,):
            raise ValueError(f"lengths must be ({n_seq},), got shape {lengths.shape}")
        if lengths.min() < 1 or lengths.max() > length:
            raise ValueError("lengths must lie in [1, L]")
        valid = np.arange(length)[None, :] < lengths[:, None]
        e *= valid[:, :, None, None]

    if mode == "unidirectional":
        hist = np.cumsum(e, axis=1).astype(np.float64)
    else:
        total = e.sum(axis=1).astype(np.float64)
        hist = np.broadcast_to(total[:, None], e.shape)

    scores = _gather_scores(table, idx)
    weights = hist * scores
    denom = weights.sum(axis=-1, keepdims=True)
    if valid is not None:
        denom = np.where(valid[:, :, None, None], denom, 1.0)
        if not np.all(denom[valid] > DENOM_FLOOR):
            raise AssertionError("attention normalizer vanished on a valid position")
    elif not np.all(denom > DENOM_FLOOR):
        raise AssertionError("attention normalizer vanished")
    out = np.einsum("nlbw,bwd->nld", weights / denom, values)
    if valid is not None:
        out *= valid[:, :, None]
    return out
