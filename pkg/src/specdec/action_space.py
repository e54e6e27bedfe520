"""Discretized action vocabulary: token bins, chunk layout, and bin distance.

A control action is a frame of 7 tokens, one per action dimension:
``[dpos_x, dpos_y, dpos_z, drot_x, drot_y, drot_z, gripper]``.  Each
dimension is quantized into ``vocab_size`` equal-width bins (256 by
default), and the distance between two tokens of the same dimension is
the absolute difference of their bin IDs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# One control action = 7 tokens, in this dimension order.
CHUNK_SIZE = 7
DIMENSION_NAMES = (
    "dpos_x",
    "dpos_y",
    "dpos_z",
    "drot_x",
    "drot_y",
    "drot_z",
    "gripper",
)

DEFAULT_VOCAB_SIZE = 256

# Fallback physical ranges: meters for position deltas, radians for rotation
# deltas, unitless for the gripper.  Overridable via config; nothing in the
# engine depends on the specific numbers.
_DEFAULT_LOW = (-0.05, -0.05, -0.05, -0.25, -0.25, -0.25, 0.0)
_DEFAULT_HIGH = (0.05, 0.05, 0.05, 0.25, 0.25, 0.25, 1.0)


def validate_token(token: int, vocab_size: int = DEFAULT_VOCAB_SIZE) -> int:
    """Check that ``token`` is a valid bin ID and return it as a plain int."""
    t = int(token)
    if not 0 <= t < vocab_size:
        raise ValueError(f"token {t} outside vocabulary [0, {vocab_size})")
    return t


def bin_distance(a: int, b: int) -> int:
    """Distance between two action tokens: absolute difference of bin IDs."""
    return abs(int(a) - int(b))


@dataclass(frozen=True)
class DimensionBounds:
    """Per-dimension (low, high) ranges used to map bins to real values."""

    low: tuple[float, ...] = _DEFAULT_LOW
    high: tuple[float, ...] = _DEFAULT_HIGH

    def __post_init__(self) -> None:
        if len(self.low) != CHUNK_SIZE or len(self.high) != CHUNK_SIZE:
            raise ValueError(f"bounds must cover exactly {CHUNK_SIZE} dimensions")
        for i, (lo, hi) in enumerate(zip(self.low, self.high)):
            if not lo < hi:
                raise ValueError(
                    f"dimension {i} ({DIMENSION_NAMES[i]}): low {lo} must be < high {hi}"
                )

    @classmethod
    def from_pairs(cls, pairs: list[list[float]] | list[tuple[float, float]]) -> DimensionBounds:
        if len(pairs) != CHUNK_SIZE:
            raise ValueError(f"expected {CHUNK_SIZE} [low, high] pairs, got {len(pairs)}")
        return cls(
            low=tuple(float(p[0]) for p in pairs),
            high=tuple(float(p[1]) for p in pairs),
        )

    def as_pairs(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in zip(self.low, self.high)]


def as_chunk(tokens, vocab_size: int = DEFAULT_VOCAB_SIZE) -> np.ndarray:
    """Validate a 7-token action chunk and return it as an int array."""
    arr = np.asarray(tokens, dtype=np.int64)
    if arr.shape != (CHUNK_SIZE,):
        raise ValueError(f"action chunk must have exactly {CHUNK_SIZE} tokens, got shape {arr.shape}")
    if (arr < 0).any() or (arr >= vocab_size).any():
        raise ValueError(f"chunk contains tokens outside [0, {vocab_size})")
    return arr


def detokenize(
    chunk,
    bounds: DimensionBounds | None = None,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
) -> np.ndarray:
    """Map a 7-token chunk to continuous values at the bin centers.

    Bin ``k`` of dimension ``i`` maps to ``low_i + (k + 0.5) * width_i`` with
    ``width_i = (high_i - low_i) / vocab_size``.  The bin-center convention
    makes ``tokenize(detokenize(k)) == k`` exact for every bin.
    """
    bounds = bounds or DimensionBounds()
    arr = as_chunk(chunk, vocab_size)
    low = np.asarray(bounds.low, dtype=np.float64)
    high = np.asarray(bounds.high, dtype=np.float64)
    width = (high - low) / vocab_size
    return low + (arr + 0.5) * width


def tokenize(
    values,
    bounds: DimensionBounds | None = None,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
) -> np.ndarray:
    """Quantize 7 continuous values into bin IDs; out-of-range values clamp."""
    bounds = bounds or DimensionBounds()
    vals = np.asarray(values, dtype=np.float64)
    if vals.shape != (CHUNK_SIZE,):
        raise ValueError(f"expected {CHUNK_SIZE} values, got shape {vals.shape}")
    low = np.asarray(bounds.low, dtype=np.float64)
    high = np.asarray(bounds.high, dtype=np.float64)
    clamped = np.clip(vals, low, high)
    bins = np.floor((clamped - low) / (high - low) * vocab_size).astype(np.int64)
    return np.clip(bins, 0, vocab_size - 1)
