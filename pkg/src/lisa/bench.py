"""Wall-time and memory accounting for the attention implementations.

The grid protocol keeps the total number of tokens per batch fixed while the
sequence length grows, so a linear-time method shows roughly flat wall time
and a quadratic one grows with every doubling. Dense attention rows whose
working set would blow past the memory cap are skipped and marked, instead
of thrashing the machine.
"""

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attention import ProjectionSet, build_ip_table, lisa_forward_batch, project_values
from .quantizer import Codebooks

__all__ = [
    "BenchRow",
    "BenchReport",
    "bench_attention",
    "dense_attention_batch",
    "memory_estimate",
    "worker_count",
]

METHODS = ("lisa", "vanilla")
CSV_HEADER = "method,L,batch,mean_ms,std_ms,est_bytes"
DEFAULT_MEM_CAP = 1_500_000_000  # bytes


@dataclass(frozen=True)
class BenchRow:
    method: str
    seq_len: int
    batch: int
    mean_ms: float  # nan when skipped
    std_ms: float
    est_bytes: int
    min_ms: float = float("nan")  # best-of-runs; robust to scheduler noise
    skip_reason: str | None = None


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    runs: int = 0
    workers: int = 1

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.method},{r.seq_len},{r.batch},{r.mean_ms:.3f},{r.std_ms:.3f},{r.est_bytes}"
            )
        return "\n".join(lines) + "\n"

    def times(self, method: str, stat: str = "mean_ms") -> dict:
        return {
            r.seq_len: getattr(r, stat)
            for r in self.rows
            if r.method == method and r.skip_reason is None
        }


def worker_count() -> int:
    """Worker threads for batched passes; LISA_THREADS overrides."""
    env = os.environ.get("LISA_THREADS")
    if env is not None:
        n = int(env)
        if n < 1:
            raise ValueError(f"LISA_THREADS must be >= 1, got {env}")
        return n
    return 1


def memory_estimate(
    n_codebooks: int,
    n_codewords: int,
    dim: int,
    seq_len: int | None = None,
    n_items: int | None = None,
) -> dict:
    """Closed-form working-set and storage byte counts per structure."""
    est = {
        "ip_table": n_codebooks * n_codewords**2 * 8,
        "projected_values": n_codebooks * n_codewords * dim * 8,
        "streaming_state": 16 + 2 * n_codebooks + 4 * n_codebooks * n_codewords,
        "streaming_histogram": n_codebooks * n_codewords * 8,
    }
    if seq_len is not None:
        est["histograms"] = seq_len * n_codebooks * n_codewords * 8
    if n_items is not None:
        bits = math.log2(n_codewords)
        if bits != int(bits):
            raise ValueError(f"W={n_codewords} is not a power of two")
        index = n_items * n_codebooks * bits / 8.0
        codebooks = 4 * n_codebooks * n_codewords * dim
        est["index_storage"] = int(index)
        est["codebook_storage"] = codebooks
        est["embedding_storage"] = 4 * n_items * dim
        est["compression_ratio"] = 4.0 * n_items * dim / (index + codebooks)
    return est


def _lisa_working_set(batch: int, seq_len: int, n_books: int, n_words: int, dim: int) -> int:
    per_position = batch * seq_len * n_books * n_words * 8
    # one-hot + histogram + gathered scores + weights
    return 4 * per_position + n_books * n_words**2 * 8 + n_books * n_words * dim * 8


def _vanilla_working_set(batch: int, seq_len: int, dim: int) -> int:
    # score matrix (reused in place) + causal mask + Q/K/V
    return batch * seq_len**2 * 8 + seq_len**2 + 3 * batch * seq_len * dim * 8


def dense_attention_batch(x: np.ndarray, proj: ProjectionSet) -> np.ndarray:
    """Causal softmax attention vectorized over a (N, L, D) batch.

    Score buffers are reused in place so the working set matches
    :func:`_vanilla_working_set`. Equals the per-sequence reference.
    """
    queries = x @ proj.p_q
    keys = x @ proj.p_k
    vals = x @ proj.p_v
    logits = np.einsum("nid,njd->nij", queries, keys)
    logits *= proj.scale
    future = ~np.tril(np.ones((x.shape[1], x.shape[1]), dtype=bool))
    logits[:, future] = -np.inf
    logits -= logits.max(axis=2, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=2, keepdims=True)
    return np.einsum("nij,njd->nid", logits, vals)


def _timed(fn, runs: int) -> tuple:
    fn()  # warmup, discarded
    samples = []
    for _ in range(runs):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1000.0)
    return float(np.mean(samples)), float(np.std(samples)), float(np.min(samples))


def bench_attention(
    methods=METHODS,
    l_grid=(256, 512, 1024, 2048, 4096, 8192),
    token_budget: int = 8192,
    dim: int = 32,
    n_codebooks: int = 4,
    n_codewords: int = 32,
    runs: int = 5,
    seed: int = 0,
    mem_cap_bytes: int = DEFAULT_MEM_CAP,
    workers: int | None = None,
) -> BenchReport:
    """Time full forward passes on synthetic data at a fixed token budget."""
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected subset of {METHODS}")
    l_grid = tuple(int(v) for v in l_grid)
    if any(token_budget % length for length in l_grid):
        raise ValueError(f"token budget {token_budget} must be divisible by every grid length")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if workers is None:
        workers = worker_count()

    rng = np.random.default_rng(seed)
    codebooks = Codebooks(rng.normal(size=(n_codebooks, n_codewords, dim)))
    proj = ProjectionSet.random(dim, seed=seed + 1)
    table = build_ip_table(codebooks, proj)
    values = project_values(codebooks, proj)

    report = BenchReport(runs=runs, workers=workers)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for seq_len in l_grid:
            batch = token_budget // seq_len
            if "lisa" in methods:
                idx = rng.integers(
                    0, n_codewords, size=(batch, seq_len, n_codebooks), dtype=np.uint16
                )
                est = _lisa_working_set(batch, seq_len, n_codebooks, n_codewords, dim)

                if pool is None:
                    def run(idx=idx):
                        lisa_forward_batch(idx, table, values)
                else:
                    chunks = np.array_split(idx, min(workers, batch), axis=0)

                    def run(chunks=chunks):
                        list(pool.map(lambda c: lisa_forward_batch(c, table, values), chunks))

                mean_ms, std_ms, min_ms = _timed(run, runs)
                report.rows.append(BenchRow("lisa", seq_len, batch, mean_ms, std_ms, est, min_ms))
            if "vanilla" in methods:
                est = _vanilla_working_set(batch, seq_len, dim)
                if est > mem_cap_bytes:
                    report.rows.append(
                        BenchRow(
                            "vanilla",
                            seq_len,
                            batch,
                            float("nan"),
                            float("nan"),
                            est,
                            skip_reason=f"working set {est} bytes exceeds cap {mem_cap_bytes}",
                        )
                    )
                    continue
                x = rng.normal(size=(batch, seq_len, dim))
                mean_ms, std_ms, min_ms = _timed(lambda x=x: dense_attention_batch(x, proj), runs)
                report.rows.append(
                    BenchRow("vanilla", seq_len, batch, mean_ms, std_ms, est, min_ms)
                )
    finally:
        if pool is not None:
            pool.shutdown()
    return report
