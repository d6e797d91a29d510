"""Subtractive dithered uniform scalar quantization.

The encoder adds a dither offset shared with the decoder, quantizes to the
nearest step multiple, and the decoder subtracts the offset after scaling
the integer index back. With the offset drawn uniformly over one cell, the
end-to-end squared error equals ``step**2 / 12`` exactly for every input
value, which is what makes the rest of the package's accounting exact
rather than high-resolution-asymptotic.

Step size and target mean squared distortion are locked together by
``distortion = step**2 / 12``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "step_for_distortion",
    "distortion_for_step",
    "DitherSpec",
    "draw_dither",
    "quantize",
    "quantize_array",
    "QuantizedBlock",
    "encode_block",
    "reconstruct",
    "reconstruct_with_fresh_dither",
    "index_bound",
    "conditional_distortion",
    "conditional_mean_error",
]


def step_for_distortion(distortion: float) -> float:
    """Quantizer step achieving mean squared error ``distortion``."""
    if distortion <= 0.0:
        raise DomainError(f"distortion must be positive, got {distortion}")
    return 2.0 * math.sqrt(3.0 * distortion)


def distortion_for_step(step: float) -> float:
    if step <= 0.0:
        raise DomainError(f"step must be positive, got {step}")
    return step * step / 12.0


@dataclass(frozen=True)
class DitherSpec:
    """One dither realization: a step size and an offset in [-step/2, step/2].

    The offset is a single scalar reused for every coordinate of a block;
    fresh randomness across coordinates is a different channel model and is
    provided separately by :func:`reconstruct_with_fresh_dither`.
    """

    distortion: float
    step: float
    offset: float

    def __post_init__(self) -> None:
        if self.step <= 0.0:
            raise DomainError(f"step must be positive, got {self.step}")
        if abs(self.offset) > 0.5 * self.step * (1.0 + 1e-12):
            raise DomainError(
                f"offset {self.offset} outside [-step/2, step/2] for step {self.step}"
            )


def draw_dither(distortion: float, rng: np.random.Generator) -> DitherSpec:
    """Draw a dither offset uniformly over one quantizer cell."""
    step = step_for_distortion(distortion)
    offset = float(rng.uniform(-0.5 * step, 0.5 * step))
    return DitherSpec(distortion=distortion, step=step, offset=offset)


def quantize(value: float, step: float) -> int:
    """Nearest-multiple index of ``value``; exact half-cell ties round up."""
    return int(math.floor(value / step + 0.5))


def quantize_array(values: np.ndarray, step: float) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=np.float64) / step + 0.5).astype(np.int64)


@dataclass(frozen=True)
class QuantizedBlock:
    """Encoder output for one block: integer indices plus the dither used."""

    indices: np.ndarray
    dither: DitherSpec


def encode_block(values: np.ndarray, dither: DitherSpec) -> QuantizedBlock:
    """Add the dither offset to every coordinate and quantize."""
    indices = quantize_array(np.asarray(values, dtype=np.float64) + dither.offset, dither.step)
    return QuantizedBlock(indices=indices, dither=dither)


def reconstruct(block: QuantizedBlock) -> np.ndarray:
    """Decoder-side reconstruction: scale indices back and subtract the offset."""
    return block.indices.astype(np.float64) * block.dither.step - block.dither.offset


def reconstruct_with_fresh_dither(
    values: np.ndarray, distortion: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Quantize each coordinate under its own independent dither draw.

    Returns ``(reconstruction, offsets)``. Useful for sampling the additive
    noise picture of the channel, where the end-to-end error of each
    coordinate is uniform on one cell and independent of the input.
    """
    values = np.asarray(values, dtype=np.float64)
    step = step_for_distortion(distortion)
    offsets = rng.uniform(-0.5 * step, 0.5 * step, size=values.shape)
    indices = np.floor((values + offsets) / step + 0.5)
    return indices * step - offsets, offsets


def index_bound(halfwidth: float, step: float) -> int:
    """Largest |index| reachable from inputs in [-halfwidth, halfwidth].

    Covers every dither offset: the quantizer input never exceeds
    ``halfwidth + step/2`` in magnitude, and the tie rule makes the upper
    extreme the binding one.
    """
    if halfwidth < 0.0:
        raise DomainError(f"halfwidth must be nonnegative, got {halfwidth}")
    return quantize(halfwidth + 0.5 * step, step)


def _cell_error_moments(step: float, lo: float, hi: float, index: int) -> tuple[float, float]:
    # Integrals of (index*step - u) and its square for u in [lo, hi].
    a = index * step - lo
    b = index * step - hi
    return 0.5 * (a * a - b * b), (a * a * a - b * b * b) / 3.0


def _dither_window_moments(value: float, distortion: float) -> tuple[float, float]:
    """Mean and mean-square reconstruction error averaged over the dither.

    For fixed input ``value`` and offset uniform on one cell, the quantizer
    input sweeps a full cell-width window, so the average is an exact
    piecewise polynomial integral split at cell boundaries.
    """
    step = step_for_distortion(distortion)
    lo = value - 0.5 * step
    hi = value + 0.5 * step
    first = quantize(lo, step)
    last = quantize(hi, step)
    total_mean = 0.0
    total_square = 0.0
    for index in range(first, last + 1):
        seg_lo = max(lo, (index - 0.5) * step)
        seg_hi = min(hi, (index + 0.5) * step)
        if seg_hi <= seg_lo:
            continue
        mean_part, square_part = _cell_error_moments(step, seg_lo, seg_hi, index)
        total_mean += mean_part
        total_square += square_part
    return total_mean / step, total_square / step


def conditional_distortion(value: float, distortion: float) -> float:
    """Exact mean squared error at a fixed input, averaged over the dither.

    Equals ``distortion`` for every input value; exposed as a computation
    (not a constant) so tests can confirm the input independence.
    """
    return _dither_window_moments(value, distortion)[1]


def conditional_mean_error(value: float, distortion: float) -> float:
    """Exact mean reconstruction error at a fixed input. Always zero."""
    return _dither_window_moments(value, distortion)[0]
