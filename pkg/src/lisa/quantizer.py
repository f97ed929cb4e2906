"""Additive codebook quantization of embedding matrices.

An item embedding is approximated by the sum of one codeword per codebook.
Codebooks are fitted to a frozen embedding matrix with sequential residual
k-means: codebook ``b`` quantizes the residual left over by codebooks
``0..b-1``. Encoding follows the same greedy order, so a fitted model and its
encoder always agree on assignments.
"""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Codebooks",
    "fit_codebooks",
    "encode",
    "encode_batch",
    "reconstruct",
    "reconstruct_batch",
    "soft_assign",
    "soft_assign_batch",
    "compression_ratio",
    "reconstruction_mse",
]

INDEX_DTYPE = np.uint16  # supports up to 65536 codewords per codebook


@dataclass(frozen=True)
class Codebooks:
    """B codebooks of W codewords each, living in a shared D-dim space.

    ``values[b, w]`` is codeword ``w`` of codebook ``b``. Instances are
    immutable; all operations that consume them are pure.
    """

    values: np.ndarray  # (B, W, D) float64

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f"codebooks must be (B, W, D), got shape {values.shape}")
        b, w, d = values.shape
        if b < 1 or w < 2 or d < 1:
            raise ValueError(f"need B >= 1, W >= 2, D >= 1, got B={b}, W={w}, D={d}")
        if not np.all(np.isfinite(values)):
            raise ValueError("codebooks contain non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def n_codebooks(self) -> int:
        return self.values.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def _check_embeddings(embeddings) -> np.ndarray:
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"embeddings must be a non-empty (N, D) matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("embeddings contain non-finite values")
    return x


def _nearest(points: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    # argmin of squared L2 distance; np.argmin takes the lowest index on ties
    d2 = (
        np.sum(points**2, axis=1, keepdims=True)
        - 2.0 * points @ codewords.T
        + np.sum(codewords**2, axis=1)
    )
    return np.argmin(d2, axis=1)


def _assignment_mse(points: np.ndarray, codewords: np.ndarray, assign: np.ndarray) -> float:
    diff = points - codewords[assign]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def _kmeans_pass(
    points: np.ndarray,
    codewords: np.ndarray,
    iters: int,
    mse_log: list | None,
) -> np.ndarray:
    """Lloyd iterations with dead-codeword reseeding.

    The MSE recorded after each assignment step is non-increasing: the update
    step optimizes codewords for fixed assignments, reseeding only rewrites
    unused codewords, and the next assignment step re-optimizes.
    """
    n_codewords = codewords.shape[0]
    codewords = codewords.copy()
    for _ in range(max(1, iters)):
        assign = _nearest(points, codewords)
        if mse_log is not None:
            mse_log.append(_assignment_mse(points, codewords, assign))
        counts = np.bincount(assign, minlength=n_codewords)
        sums = np.zeros_like(codewords)
        np.add.at(sums, assign, points)
        used = counts > 0
        codewords[used] = sums[used] / counts[used, None]
        dead = np.flatnonzero(~used)
        if dead.size:
            err = np.sum((points - codewords[assign]) ** 2, axis=1)
            for w in dead:
                worst = int(np.argmax(err))
                codewords[w] = points[worst]
                err[worst] = 0.0
    return codewords


def _init_codewords(points: np.ndarray, n_codewords: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    if n <= n_codewords:
        # capacity case: every point can get its own codeword immediately
        init = np.repeat(points.mean(axis=0, keepdims=True), n_codewords, axis=0)
        init[:n] = points
        return init
    # the mean as first codeword guarantees the first assignment MSE never
    # exceeds the previous codebook's final MSE; the rest are spread with
    # squared-distance-weighted sampling to avoid merged clusters
    centers = np.empty((n_codewords, points.shape[1]))
    centers[0] = points.mean(axis=0)
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for k in range(1, n_codewords):
        total = d2.sum()
        if total > 0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            pick = int(rng.integers(0, n))
        centers[k] = points[pick]
        d2 = np.minimum(d2, np.sum((points - centers[k]) ** 2, axis=1))
    return centers


def fit_codebooks(
    embeddings,
    n_codebooks: int,
    n_codewords: int,
    iters: int = 10,
    seed: int = 0,
    refine_passes: int = 0,
    mse_log: list | None = None,
) -> Codebooks:
    """Fit additive codebooks to a frozen embedding matrix.

    Runs residual k-means per codebook in order, then ``refine_passes``
    full cycles in which each codebook is refitted against the residual of
    all the others. Deterministic for a given seed.

    Args:
        embeddings: (N, D) matrix to quantize.
        n_codebooks: number of additive codebooks B.
        n_codewords: codewords per codebook W.
        iters: Lloyd iterations per codebook per pass.
        seed: RNG seed for initialization.
        refine_passes: extra full-cycle refits after the greedy pass.
        mse_log: optional list; appended with the reconstruction MSE after
            every assignment step, a non-increasing sequence.
    """
    x = _check_embeddings(embeddings)
    n, dim = x.shape
    if n_codebooks < 1 or n_codewords < 2:
        raise ValueError("need n_codebooks >= 1 and n_codewords >= 2")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if n < n_codewords:
        warnings.warn(
            f"fitting {n_codewords} codewords to only {n} embeddings; "
            "some codewords will duplicate data points",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    books = np.zeros((n_codebooks, n_codewords, dim))
    assign = np.zeros((n, n_codebooks), dtype=np.intp)
    residual = x.copy()
    for b in range(n_codebooks):
        init = _init_codewords(residual, n_codewords, rng)
        books[b] = _kmeans_pass(residual, init, iters, mse_log)
        assign[:, b] = _nearest(residual, books[b])
        residual -= books[b][assign[:, b]]
    # coordinate-descent refinement: refit one codebook at a time against the
    # residual of the others, holding their assignments fixed so the logged
    # MSE stays non-increasing
    recon = x - residual
    for _ in range(refine_passes):
        for b in range(n_codebooks):
            others = recon - books[b][assign[:, b]]
            lifted = x - others
            books[b] = _kmeans_pass(lifted, books[b], iters, mse_log)
            assign[:, b] = _nearest(lifted, books[b])
            recon = others + books[b][assign[:, b]]
    return Codebooks(books)


def encode_batch(x, codebooks: Codebooks) -> np.ndarray:
    """Residual-greedy encode a (L, D) batch to (L, B) codeword indices."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != codebooks.dim:
        raise ValueError(f"expected (L, {codebooks.dim}) input, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    indices = np.zeros((x.shape[0], codebooks.n_codebooks), dtype=INDEX_DTYPE)
    residual = x.copy()
    for b in range(codebooks.n_codebooks):
        idx = _nearest(residual, codebooks.values[b])
        indices[:, b] = idx
        residual -= codebooks.values[b][idx]
    return indices


def encode(x, codebooks: Codebooks) -> np.ndarray:
    """Encode a single D-vector to its B codeword indices."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    return encode_batch(x[None, :], codebooks)[0]


def reconstruct_batch(indices, codebooks: Codebooks) -> np.ndarray:
    """Sum the selected codewords for each row of an (L, B) index matrix."""
    idx = np.asarray(indices)
    if idx.ndim != 2 or idx.shape[1] != codebooks.n_codebooks:
        raise ValueError(f"expected (L, {codebooks.n_codebooks}) indices, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= codebooks.n_codewords):
        raise IndexError(f"codeword index out of range [0, {codebooks.n_codewords})")
    out = np.zeros((idx.shape[0], codebooks.dim))
    for b in range(codebooks.n_codebooks):
        out += codebooks.values[b][idx[:, b].astype(np.intp)]
    return out


def reconstruct(indices, codebooks: Codebooks) -> np.ndarray:
    idx = np.asarray(indices)
    if idx.ndim != 1:
        raise ValueError(f"expected a 1-D index vector, got shape {idx.shape}")
    return reconstruct_batch(idx[None, :], codebooks)[0]


def reconstruction_mse(embeddings, codebooks: Codebooks) -> float:
    x = _check_embeddings(embeddings)
    recon = reconstruct_batch(encode_batch(x, codebooks), codebooks)
    return float(np.mean(np.sum((x - recon) ** 2, axis=1)))


def _similarity(residual: np.ndarray, codewords: np.ndarray) -> np.ndarray:
    # dot product with a half-squared-norm correction; its argmax matches
    # the nearest-centroid assignment used everywhere else
    return residual @ codewords.T - 0.5 * np.sum(codewords**2, axis=1)


def soft_assign_batch(x, codebooks: Codebooks, temperature: float = 1.0) -> np.ndarray:
    """Per-codebook softmax assignment weights, shape (L, B, W).

    Rows are softmax(similarity / temperature). The residual trajectory uses
    the hard argmax codeword, so the argmax of each soft row equals the hard
    encoding.
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != codebooks.dim:
        raise ValueError(f"expected (L, {codebooks.dim}) input, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    n = x.shape[0]
    out = np.zeros((n, codebooks.n_codebooks, codebooks.n_codewords))
    residual = x.copy()
    for b in range(codebooks.n_codebooks):
        scores = _similarity(residual, codebooks.values[b]) / temperature
        scores -= scores.max(axis=1, keepdims=True)
        weights = np.exp(scores)
        out[:, b, :] = weights / weights.sum(axis=1, keepdims=True)
        # the residual follows the hard assignment, the same trajectory the
        # hard encoder walks, so each soft row peaks at the hard index
        hard = _nearest(residual, codebooks.values[b])
        residual -= codebooks.values[b][hard]
    return out


def soft_assign(x, codebooks: Codebooks, temperature: float = 1.0) -> np.ndarray:
    """Soft assignment for a single vector, shape (B, W)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    return soft_assign_batch(x[None, :], codebooks, temperature)[0]


def _codebook_bytes(n_items: int, dim: int, shape: tuple) -> float:
    n_books, n_words = shape
    if n_books < 1 or n_words < 2:
        raise ValueError(f"bad codebook shape {shape}")
    bits = np.log2(n_words)
    if bits != int(bits):
        raise ValueError(f"W={n_words} is not a power of two; index packing undefined")
    return n_items * n_books * bits / 8.0 + 4.0 * n_books * n_words * dim


def compression_ratio(
    n_items: int,
    dim: int,
    seq_codebooks: tuple,
    target_codebooks: tuple | None = None,
) -> float:
    """Ratio of raw float32 embedding bytes to compressed bytes.

    Raw storage is 4*N*D bytes. Compressed storage packs each codeword index
    into log2(W) bits and keeps the codebooks themselves in float32; when a
    separate target codebook set is used, both sets are accounted.
    """
    if n_items < 1 or dim < 1:
        raise ValueError("need n_items >= 1 and dim >= 1")
    compressed = _codebook_bytes(n_items, dim, tuple(seq_codebooks))
    if target_codebooks is not None:
        compressed += _codebook_bytes(n_items, dim, tuple(target_codebooks))
    return 4.0 * n_items * dim / compressed
