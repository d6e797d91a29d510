"""Achievable-rate computations for dithered quantization of a pair source.

Everything here is conditioned on the dither pair: the central object is
the joint probability mass function of the two quantizer outputs at fixed
dither offsets, and region quantities are midpoint-grid averages of its
entropies over one cell of offsets per user.

The module also carries the two redundancy constants of the scheme
(the fixed per-sample gap of plain binning, and its improvement after
post-estimation) and a numerical harness for the conditional-entropy
ceiling that drives both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError, SearchCapError
from .quantizer import DitherSpec, index_bound, step_for_distortion
from .sources import JointSource, Marginal1D, _gl_rule

__all__ = [
    "entropy_bits",
    "redundancy_constant",
    "improved_constant",
    "QuantizedJointPMF",
    "joint_pmf_given_dithers",
    "RateRegionSpec",
    "region",
    "OuterSumLine",
    "outer_sum_line",
    "BlockEntropyCheck",
    "block_entropy_check",
    "IdentityReconstructor",
    "UniformQuantizerReconstructor",
    "DitheredQuantizerReconstructor",
    "BoundCheckResult",
    "entropy_bound_check",
]


def entropy_bits(probs: np.ndarray) -> float:
    """Shannon entropy in bits with the 0 log 0 = 0 convention.

    Terms are accumulated in the flattened storage order of ``probs`` so the
    result is bit-identical across runs for identical inputs.
    """
    flat = np.asarray(probs, dtype=np.float64).ravel()
    positive = flat[flat > 0.0]
    return float(-(positive * np.log2(positive)).sum())


def redundancy_constant() -> float:
    """Per-sample rate gap of the dithered binning scheme: half the log of
    pi*e/3, about 0.7547 bits."""
    return 0.5 * math.log2(math.pi * math.e / 3.0)


def improved_constant(dstar: float, distortion: float) -> float:
    """Per-sample gap after the estimation stage shrinks error dstar <= distortion.

    Equals half the log of (pi*e/6)(dstar/distortion + 1). Ranges from about
    0.2547 (dstar = 0) back up to the plain constant (dstar = distortion).
    """
    if distortion <= 0.0:
        raise DomainError(f"distortion must be positive, got {distortion}")
    if not 0.0 <= dstar <= distortion * (1.0 + 1e-12):
        raise PreconditionError(
            f"improved constant needs 0 <= dstar <= distortion, got dstar={dstar}, "
            f"distortion={distortion}"
        )
    ratio = min(dstar / distortion, 1.0)
    return 0.5 * math.log2(math.pi * math.e / 6.0 * (ratio + 1.0))


@dataclass(frozen=True)
class QuantizedJointPMF:
    """Joint law of the two quantizer indices at fixed dither offsets.

    ``probs[i, j]`` is the probability of index pair
    ``(first1 + i, first2 + j)``. The index box is wide enough to hold every
    index reachable from the support square under any offset.
    """

    probs: np.ndarray
    first1: int
    first2: int
    dither1: DitherSpec
    dither2: DitherSpec

    def total(self) -> float:
        return float(self.probs.sum())

    def joint_entropy(self) -> float:
        return entropy_bits(self.probs)

    def marginal1(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def marginal2(self) -> np.ndarray:
        return self.probs.sum(axis=0)


def _cell_edges(bound: int, step: float, offset: float) -> np.ndarray:
    return (np.arange(-bound, bound + 2, dtype=np.float64) - 0.5) * step - offset


def joint_pmf_given_dithers(
    source: JointSource, dither1: DitherSpec, dither2: DitherSpec
) -> QuantizedJointPMF:
    """Exact (or quadrature-exact) joint index law at fixed offsets."""
    bound1 = index_bound(source.halfwidth, dither1.step)
    bound2 = index_bound(source.halfwidth, dither2.step)
    edges1 = _cell_edges(bound1, dither1.step, dither1.offset)
    edges2 = _cell_edges(bound2, dither2.step, dither2.offset)
    probs = source.rect_mass_grid(edges1, edges2)
    return QuantizedJointPMF(
        probs=probs, first1=-bound1, first2=-bound2, dither1=dither1, dither2=dither2
    )


@dataclass(frozen=True)
class RateRegionSpec:
    """Dither-averaged entropies that pin down the admissible rate corner.

    ``h1g2`` and ``h2g1`` are the single-user floors given the other user's
    indices, ``h12`` the sum-rate floor, and ``h1``/``h2`` the single-user
    ceilings of the interesting range (rates above them waste bits).
    All values are bits per sample.
    """

    h1g2: float
    h2g1: float
    h12: float
    h1: float
    h2: float
    dither_grid: int


def _midpoint_offsets(step: float, grid: int) -> np.ndarray:
    return ((np.arange(grid, dtype=np.float64) + 0.5) / grid - 0.5) * step


def region(
    source: JointSource, d1: float, d2: float, dither_grid: int = 32
) -> RateRegionSpec:
    """Average the index-law entropies over a midpoint grid of offset pairs."""
    if dither_grid < 1:
        raise DomainError(f"dither_grid must be at least 1, got {dither_grid}")
    step1 = step_for_distortion(d1)
    step2 = step_for_distortion(d2)
    offsets1 = _midpoint_offsets(step1, dither_grid)
    offsets2 = _midpoint_offsets(step2, dither_grid)
    sum_h12 = 0.0
    sum_h1 = 0.0
    sum_h2 = 0.0
    for z1 in offsets1:
        for z2 in offsets2:
            pmf = joint_pmf_given_dithers(
                source,
                DitherSpec(distortion=d1, step=step1, offset=float(z1)),
                DitherSpec(distortion=d2, step=step2, offset=float(z2)),
            )
            sum_h12 += pmf.joint_entropy()
            sum_h1 += entropy_bits(pmf.marginal1())
            sum_h2 += entropy_bits(pmf.marginal2())
    count = dither_grid * dither_grid
    h12 = sum_h12 / count
    h1 = sum_h1 / count
    h2 = sum_h2 / count
    return RateRegionSpec(
        h1g2=h12 - h2, h2g1=h12 - h1, h12=h12, h1=h1, h2=h2, dither_grid=dither_grid
    )


@dataclass(frozen=True)
class OuterSumLine:
    """Converse reference for the sum rate: the joint floor minus twice the
    redundancy constant, clamped at zero when the gap exceeds the floor."""

    bits: float
    clamped: bool


def outer_sum_line(spec: RateRegionSpec) -> OuterSumLine:
    raw = spec.h12 - 2.0 * redundancy_constant()
    return OuterSumLine(bits=max(raw, 0.0), clamped=raw < 0.0)


@dataclass(frozen=True)
class BlockEntropyCheck:
    """Per-symbol entropy versus block entropy over block length, both
    averaged over the same dither grid. Memorylessness makes them equal."""

    symbol_bits: float
    block_bits_per_symbol: float
    block_length: int


def block_entropy_check(
    source: JointSource,
    d1: float,
    d2: float,
    block_length: int,
    dither_grid: int = 4,
    enumeration_cap: int = 10_000_000,
) -> BlockEntropyCheck:
    """Enumerate the exact block law of index pairs and compare entropies.

    Only discrete sources keep the enumeration finite and exact. The block
    law is the n-fold product of the single-pair law at fixed offsets, built
    by explicit outer products rather than by assuming the product rule for
    entropy, so the comparison actually exercises the identity.
    """
    if not source.is_discrete:
        raise DomainError("block entropy enumeration requires a discrete source")
    if block_length < 1:
        raise DomainError(f"block_length must be at least 1, got {block_length}")
    step1 = step_for_distortion(d1)
    step2 = step_for_distortion(d2)
    sum_symbol = 0.0
    sum_block = 0.0
    for z1 in _midpoint_offsets(step1, dither_grid):
        for z2 in _midpoint_offsets(step2, dither_grid):
            pmf = joint_pmf_given_dithers(
                source,
                DitherSpec(distortion=d1, step=step1, offset=float(z1)),
                DitherSpec(distortion=d2, step=step2, offset=float(z2)),
            )
            flat = pmf.probs.ravel()
            support = flat[flat > 0.0]
            if len(support) ** block_length > enumeration_cap:
                raise SearchCapError(
                    f"block law would need {len(support)}**{block_length} entries, "
                    f"beyond the cap of {enumeration_cap}"
                )
            block = support.copy()
            for _ in range(block_length - 1):
                block = np.outer(block, support).ravel()
            sum_symbol += entropy_bits(support)
            sum_block += entropy_bits(block) / block_length
    count = dither_grid * dither_grid
    return BlockEntropyCheck(
        symbol_bits=sum_symbol / count,
        block_bits_per_symbol=sum_block / count,
        block_length=block_length,
    )


class _StaircaseRealization:
    """Midpoint staircase map with a fixed shift. Constant between steps."""

    injective = False

    def __init__(self, step: float, shift: float) -> None:
        self.step = step
        self.shift = shift

    def values(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        return (
            np.floor((xs + self.shift) / self.step + 0.5) * self.step - self.shift
        )

    def breakpoints(self, halfwidth: float) -> np.ndarray:
        bound = index_bound(halfwidth, self.step) + 1
        points = (np.arange(-bound, bound + 1) + 0.5) * self.step - self.shift
        return points[(points > -halfwidth) & (points < halfwidth)]


class _IdentityRealization:
    injective = True

    def values(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(xs, dtype=np.float64)

    def breakpoints(self, halfwidth: float) -> np.ndarray:
        return np.empty(0)


class IdentityReconstructor:
    """Perfect reconstruction: zero distortion, zero conditional entropy
    contribution since the quantizer input is a function of the output."""

    def realizations(self, halfwidth: float) -> list[tuple[float, object]]:
        return [(1.0, _IdentityRealization())]


class UniformQuantizerReconstructor:
    """A plain midpoint staircase with a chosen step and optional shift."""

    def __init__(self, step: float, shift: float = 0.0) -> None:
        if step <= 0.0:
            raise DomainError(f"step must be positive, got {step}")
        self.step = step
        self.shift = shift

    def realizations(self, halfwidth: float) -> list[tuple[float, object]]:
        return [(1.0, _StaircaseRealization(self.step, self.shift))]


class DitheredQuantizerReconstructor:
    """A staircase family whose shift plays the role of internal dither.

    The shift grid is symmetric, so mean error cancels for symmetric
    marginals, and the step is shrunk slightly below the width that would
    meet the distortion budget exactly, keeping the measured distortion
    under budget despite the discretized shift average.
    """

    def __init__(
        self, distortion: float, shrink: float = 0.95, realization_count: int = 16
    ) -> None:
        if not 0.0 < shrink <= 1.0:
            raise DomainError(f"shrink must lie in (0, 1], got {shrink}")
        if realization_count < 2 or realization_count % 2 != 0:
            raise DomainError("realization_count must be even and at least 2")
        self.step = shrink * step_for_distortion(distortion)
        self.count = realization_count

    def realizations(self, halfwidth: float) -> list[tuple[float, object]]:
        shifts = _midpoint_offsets(self.step, self.count)
        weight = 1.0 / self.count
        return [(weight, _StaircaseRealization(self.step, float(s))) for s in shifts]


def _interval_masses(
    marginal: Marginal1D, edges: np.ndarray, rel_tol: float = 1e-9, max_nodes: int = 1024
) -> np.ndarray:
    """Per-interval masses of a 1D density with node-doubling refinement."""
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    order = 8
    previous = None
    while True:
        nodes, weights = _gl_rule(min(order, max_nodes))
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        vals = marginal.density(pts)
        current = (vals * weights[None, :]).sum(axis=1) * half
        if previous is not None:
            scale = max(float(np.max(np.abs(current))), 1e-300)
            if float(np.max(np.abs(current - previous))) <= rel_tol * scale:
                return current
        if order >= max_nodes:
            return current
        previous = current
        order *= 2


@dataclass(frozen=True)
class BoundCheckResult:
    """Outcome of one conditional-entropy ceiling measurement."""

    measured_bits: float
    bound_bits: float
    distortion: float
    mean_error: float
    passed: bool


def entropy_bound_check(
    source: JointSource,
    distortion: float,
    reconstructor,
    user: int = 1,
    dither_grid: int = 32,
) -> BoundCheckResult:
    """Measure H(index | reconstruction, offset) for one user and compare it
    to the redundancy constant.

    The reconstructor must be a deterministic map of the source coordinate
    (possibly mixing over finitely many internal realizations, which are
    conditioned on and thus can only lower the measured value). Its mean
    squared error must stay within ``distortion`` and its mean error must
    vanish; both are verified by quadrature before measuring, and violations
    raise PreconditionError rather than returning a meaningless comparison.
    """
    marginal = source.marginal(user)
    step = step_for_distortion(distortion)
    halfwidth = marginal.halfwidth
    realizations = reconstructor.realizations(halfwidth)

    total_weight = sum(w for w, _ in realizations)
    if not math.isclose(total_weight, 1.0, rel_tol=0.0, abs_tol=1e-9):
        raise DomainError(f"realization weights must sum to 1, got {total_weight}")

    # Moment preconditions, integrated exactly against the marginal.
    mse = 0.0
    mean_err = 0.0
    for weight, real in realizations:
        if real.injective:
            continue
        edges = np.unique(
            np.concatenate(
                [[-halfwidth, halfwidth], real.breakpoints(halfwidth)]
            )
        )

        def err_sq(xs: np.ndarray, _real=real) -> np.ndarray:
            diff = _real.values(xs) - xs
            return marginal.density(xs) * diff * diff

        def err(xs: np.ndarray, _real=real) -> np.ndarray:
            return marginal.density(xs) * (_real.values(xs) - xs)

        # The integrand is smooth between breakpoints, where the map is
        # constant, so splitting at the breakpoints keeps quadrature exact.
        probe = Marginal1D(halfwidth=halfwidth, density=err_sq)
        mse += weight * float(_interval_masses(probe, edges).sum())
        probe = Marginal1D(halfwidth=halfwidth, density=err)
        mean_err += weight * float(_interval_masses(probe, edges).sum())

    if mse > distortion * (1.0 + 1e-6):
        raise PreconditionError(
            f"reconstructor mean squared error {mse} exceeds the budget {distortion}"
        )
    if abs(mean_err) > max(1e-9, 1e-6 * math.sqrt(distortion)):
        raise PreconditionError(
            f"reconstructor mean error {mean_err} is not zero"
        )

    measured = 0.0
    for weight, real in realizations:
        if real.injective:
            continue
        real_total = 0.0
        for offset in _midpoint_offsets(step, dither_grid):
            bound = index_bound(halfwidth, step)
            cell_edges = (np.arange(-bound, bound + 2) - 0.5) * step - offset
            cell_edges = cell_edges[(cell_edges > -halfwidth) & (cell_edges < halfwidth)]
            edges = np.unique(
                np.concatenate(
                    [[-halfwidth, halfwidth], cell_edges, real.breakpoints(halfwidth)]
                )
            )
            masses = _interval_masses(marginal, edges)
            mids = 0.5 * (edges[:-1] + edges[1:])
            reps = real.values(mids)
            cells = np.floor((mids + offset) / step + 0.5).astype(np.int64)
            # Group intervals by reconstruction value; the staircase emits
            # exact float duplicates, so equality grouping is safe.
            conditional = 0.0
            for value in np.unique(reps):
                sel = masses[reps == value]
                cell_ids = cells[reps == value]
                group = np.zeros(2 * bound + 1)
                np.add.at(group, cell_ids + bound, sel)
                weight_here = group.sum()
                if weight_here > 0.0:
                    conditional += weight_here * entropy_bits(group / weight_here)
            real_total += conditional
        measured += weight * real_total / dither_grid

    bound_bits = redundancy_constant()
    return BoundCheckResult(
        measured_bits=float(measured),
        bound_bits=bound_bits,
        distortion=float(mse),
        mean_error=float(mean_err),
        passed=bool(measured <= bound_bits + 1e-9),
    )
