#!/usr/bin/env python3
"""Wall-time scaling at a fixed token budget.

Every grid point processes the same number of tokens, so a linear-time
method should cost about the same at every sequence length while a
quadratic one doubles with every doubling of L. Dense rows whose score
matrix would not fit under the memory cap are skipped rather than run.
"""

from lisa import bench_attention, memory_estimate

report = bench_attention(
    methods=("lisa", "vanilla"),
    l_grid=(256, 512, 1024, 2048, 4096, 8192),
    token_budget=8192,
    dim=32,
    n_codebooks=4,
    n_codewords=32,
    runs=3,
    mem_cap_bytes=400_000_000,
)

print(report.to_csv())

hist_times = report.times("lisa", "min_ms")
band = (max(hist_times.values()) - min(hist_times.values())) / min(hist_times.values())
print(f"histogram attention: best-run times vary {band * 100:.0f}% across the grid")

dense_times = report.times("vanilla", "min_ms")
lengths = sorted(dense_times)
for a, b in zip(lengths, lengths[1:]):
    print(f"dense attention {a:5d} -> {b:5d}: {dense_times[b] / dense_times[a]:.2f}x")
for row in report.rows:
    if row.skip_reason:
        print(f"skipped {row.method} at L={row.seq_len}: {row.skip_reason}")

# the byte ledger behind the est_bytes column
est = memory_estimate(4, 32, 32, seq_len=4096, n_items=80000)
print("\nper-structure byte estimates at L=4096:")
for key, val in est.items():
    print(f"  {key:22s} {val:,}" if isinstance(val, int) else f"  {key:22s} {val:.2f}")
