"""Constant-size online inference state.

A user's whole history is summarized by a per-codebook codeword histogram
plus the last item's codeword indices, so the next attention output costs
O(B*W*D) regardless of how many items were consumed.

Serialized record (little-endian): u32 B, u32 W, u64 step, B x u16 last
indices (0xFFFF when unset), then B*W u32 counts in hard mode or B*W f64
masses in soft mode. The two modes are told apart by payload width.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .attention import DENOM_FLOOR, InnerProductTable

__all__ = [
    "UserState",
    "state_init",
    "state_update",
    "state_update_soft",
    "step_infer",
    "state_to_bytes",
    "state_from_bytes",
]

_UNSET = 0xFFFF
_HEADER = struct.Struct("<IIQ")


@dataclass(frozen=True)
class UserState:
    """Snapshot of one user's streaming attention state."""

    histogram: np.ndarray  # (B, W); int64 counts or float64 masses
    last_indices: np.ndarray  # (B,) int32, -1 until the first update
    step: int
    soft: bool = False

    def __post_init__(self):
        hist = np.asarray(self.histogram)
        if hist.ndim != 2:
            raise ValueError(f"histogram must be (B, W), got shape {hist.shape}")
        last = np.asarray(self.last_indices, dtype=np.int32)
        if last.shape != (hist.shape[0],):
            raise ValueError("last_indices length must equal the number of codebooks")
        if self.step < 0:
            raise ValueError("step must be nonnegative")
        dtype = np.float64 if self.soft else np.int64
        object.__setattr__(self, "histogram", hist.astype(dtype, copy=False))
        object.__setattr__(self, "last_indices", last)

    @property
    def n_codebooks(self) -> int:
        return self.histogram.shape[0]

    @property
    def n_codewords(self) -> int:
        return self.histogram.shape[1]


def state_init(n_codebooks: int, n_codewords: int, soft: bool = False) -> UserState:
    """Fresh state: zero histogram, no items consumed."""
    if n_codebooks < 1 or n_codewords < 2:
        raise ValueError("need n_codebooks >= 1 and n_codewords >= 2")
    dtype = np.float64 if soft else np.int64
    return UserState(
        histogram=np.zeros((n_codebooks, n_codewords), dtype=dtype),
        last_indices=np.full(n_codebooks, -1, dtype=np.int32),
        step=0,
        soft=soft,
    )


def _check_item(state: UserState, item_indices) -> np.ndarray:
    idx = np.asarray(item_indices)
    if idx.shape != (state.n_codebooks,):
        raise ValueError(f"item indices must be ({state.n_codebooks},), got shape {idx.shape}")
    if idx.min() < 0 or idx.max() >= state.n_codewords:
        raise IndexError(f"codeword index out of range [0, {state.n_codewords})")
    return idx.astype(np.int32)


def state_update(state: UserState, item_indices) -> UserState:
    """Consume one hard-encoded item; returns the successor state."""
    if state.soft:
        raise ValueError("hard update applied to a soft-mode state")
    idx = _check_item(state, item_indices)
    hist = state.histogram.copy()
    hist[np.arange(state.n_codebooks), idx] += 1
    return UserState(histogram=hist, last_indices=idx, step=state.step + 1)


def state_update_soft(state: UserState, assignment_row, query_indices) -> UserState:
    """Consume one item with soft key/value masses and a hard query index."""
    if not state.soft:
        raise ValueError("soft update applied to a hard-mode state")
    row = np.asarray(assignment_row, dtype=np.float64)
    if row.shape != state.histogram.shape:
        raise ValueError(f"assignment row must be {state.histogram.shape}, got {row.shape}")
    if not np.all(np.isfinite(row)) or row.min() < 0:
        raise ValueError("assignment masses must be finite and nonnegative")
    idx = _check_item(state, query_indices)
    return UserState(
        histogram=state.histogram + row,
        last_indices=idx,
        step=state.step + 1,
        soft=True,
    )


def step_infer(state: UserState, table: InnerProductTable, values) -> np.ndarray:
    """Attention output for the next step, a D-vector.

    Equals the final output row of the batch forward pass over everything
    the state has consumed, at O(B*W*D) cost independent of history length.
    """
    if state.step < 1:
        raise ValueError("cannot infer from an empty history")
    if (state.n_codebooks, state.n_codewords) != (table.n_codebooks, table.n_codewords):
        raise ValueError("state and table disagree on codebook geometry")
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(values.shape[2])
    for b in range(state.n_codebooks):
        weights = state.histogram[b].astype(np.float64) * table.values[b, state.last_indices[b]]
        denom = weights.sum()
        if not denom > DENOM_FLOOR:
            raise AssertionError("attention normalizer vanished; state histogram corrupt")
        out += (weights / denom) @ values[b]
    return out


def state_to_bytes(state: UserState) -> bytes:
    header = _HEADER.pack(state.n_codebooks, state.n_codewords, state.step)
    last = np.where(state.last_indices < 0, _UNSET, state.last_indices).astype("<u2")
    if state.soft:
        payload = state.histogram.astype("<f8").tobytes()
    else:
        if state.histogram.max(initial=0) >= 2**32:
            raise OverflowError("histogram count exceeds the u32 record format")
        payload = state.histogram.astype("<u4").tobytes()
    return header + last.tobytes() + payload


def state_from_bytes(data: bytes) -> UserState:
    if len(data) < _HEADER.size:
        raise ValueError("truncated state record")
    n_books, n_words, step = _HEADER.unpack_from(data)
    offset = _HEADER.size + 2 * n_books
    if len(data) < offset:
        raise ValueError("truncated last-index block")
    last = np.frombuffer(data, dtype="<u2", count=n_books, offset=_HEADER.size).astype(np.int32)
    last[last == _UNSET] = -1
    body = len(data) - offset
    if body == 4 * n_books * n_words:
        hist = np.frombuffer(data, dtype="<u4", offset=offset).astype(np.int64)
        soft = False
    elif body == 8 * n_books * n_words:
        hist = np.frombuffer(data, dtype="<f8", offset=offset).copy()
        soft = True
    else:
        raise ValueError(f"payload of {body} bytes matches neither hard nor soft layout")
    return UserState(
        histogram=hist.reshape(n_books, n_words),
        last_indices=last,
        step=step,
        soft=soft,
    )
