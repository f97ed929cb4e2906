"""Linear-time self-attention over codeword histograms.

Items are quantized to a few codeword indices per codebook; a sequence is
then summarized by per-position prefix histograms of those indices, and
attention becomes a table lookup plus a weighted average of projected
codewords. Cost is linear in sequence length, and a streaming user state of
constant size supports online inference over unbounded histories.
"""

from .attention import (
    InnerProductTable,
    ProjectionSet,
    build_ip_table,
    histogram_prefix,
    histogram_prefix_soft,
    lisa_forward,
    lisa_forward_batch,
    lisa_forward_soft,
    project_values,
)
from .bench import BenchReport, BenchRow, bench_attention, memory_estimate
from .evaluate import (
    MetricReport,
    RankingResult,
    RankingTask,
    SynthDataset,
    aggregate_results,
    evaluate_ranking,
    run_synthetic_eval,
    sample_negatives,
    score_candidates,
    synth_dataset,
)
from .oracles import direct_relaxed_attention, setform_attention, vanilla_attention
from .quantizer import (
    Codebooks,
    compression_ratio,
    encode,
    encode_batch,
    fit_codebooks,
    reconstruct,
    reconstruct_batch,
    reconstruction_mse,
    soft_assign,
    soft_assign_batch,
)
from .streaming import (
    UserState,
    state_from_bytes,
    state_init,
    state_to_bytes,
    state_update,
    state_update_soft,
    step_infer,
)
from .tensorfile import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "Codebooks",
    "fit_codebooks",
    "encode",
    "encode_batch",
    "reconstruct",
    "reconstruct_batch",
    "reconstruction_mse",
    "soft_assign",
    "soft_assign_batch",
    "compression_ratio",
    "ProjectionSet",
    "InnerProductTable",
    "build_ip_table",
    "project_values",
    "histogram_prefix",
    "histogram_prefix_soft",
    "lisa_forward",
    "lisa_forward_soft",
    "lisa_forward_batch",
    "vanilla_attention",
    "direct_relaxed_attention",
    "setform_attention",
    "UserState",
    "state_init",
    "state_update",
    "state_update_soft",
    "step_infer",
    "state_to_bytes",
    "state_from_bytes",
    "RankingTask",
    "RankingResult",
    "MetricReport",
    "score_candidates",
    "evaluate_ranking",
    "aggregate_results",
    "sample_negatives",
    "SynthDataset",
    "synth_dataset",
    "run_synthetic_eval",
    "BenchRow",
    "BenchReport",
    "bench_attention",
    "memory_estimate",
    "read_tensor",
    "write_tensor",
]
