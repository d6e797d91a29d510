import math

import numpy as np
import pytest
import sympy

from ditherlab import rateregion
from ditherlab.errors import DomainError, PreconditionError, SearchCapError
from ditherlab.quantizer import DitherSpec, step_for_distortion
from ditherlab.sources import DiscreteGridSource, UniformSquareSource


def test_entropy_bits_basics():
    assert rateregion.entropy_bits(np.full(8, 1.0 / 8.0)) == 3.0
    assert rateregion.entropy_bits(np.array([1.0])) == 0.0
    assert rateregion.entropy_bits(np.array([0.5, 0.0, 0.5])) == 1.0
    matrix = np.array([[0.25, 0.25], [0.25, 0.25]])
    assert rateregion.entropy_bits(matrix) == 2.0


def test_constants_match_symbolic_oracle():
    c = sympy.log(sympy.pi * sympy.E / 3, 2) / 2
    assert rateregion.redundancy_constant() == pytest.approx(float(c), abs=1e-14)
    for ratio in (0.0, 0.25, 0.5, 1.0):
        expr = sympy.log(sympy.pi * sympy.E / 6 * (sympy.Rational(ratio) + 1), 2) / 2
        value = rateregion.improved_constant(ratio * 0.4, 0.4)
        assert value == pytest.approx(float(expr.evalf(30)), abs=1e-14)
    # Full-ratio improved constant collapses to the plain constant.
    assert rateregion.improved_constant(0.4, 0.4) == pytest.approx(
        rateregion.redundancy_constant(), abs=1e-14
    )


def test_improved_constant_rejects_bad_arguments():
    with pytest.raises(PreconditionError):
        rateregion.improved_constant(0.5, 0.4)
    with pytest.raises(PreconditionError):
        rateregion.improved_constant(-0.1, 0.4)
    with pytest.raises(DomainError):
        rateregion.improved_constant(0.0, 0.0)


def test_joint_pmf_matches_rect_mass():
    source = UniformSquareSource(1.0, 0.75)
    d1, d2 = 0.1, 0.2
    dither1 = DitherSpec(distortion=d1, step=step_for_distortion(d1), offset=0.13)
    dither2 = DitherSpec(distortion=d2, step=step_for_distortion(d2), offset=-0.21)
    pmf = rateregion.joint_pmf_given_dithers(source, dither1, dither2)
    assert pmf.total() == pytest.approx(1.0, abs=1e-12)
    # Spot-check one interior cell against the direct rectangle mass.
    i, j = 1, 2
    lo1 = (pmf.first1 + i - 0.5) * dither1.step - dither1.offset
    hi1 = lo1 + dither1.step
    lo2 = (pmf.first2 + j - 0.5) * dither2.step - dither2.offset
    hi2 = lo2 + dither2.step
    direct = source.rect_mass(lo1, hi1, lo2, hi2)
    assert pmf.probs[i, j] == pytest.approx(direct, abs=1e-12)
    assert pmf.marginal1().sum() == pytest.approx(1.0, abs=1e-12)


def test_region_on_even_cells_has_closed_form():
    # Unit halfwidth, distortion 1/3: step 2, three reachable cells, and a
    # 2-point midpoint offset grid puts the cell edge at +-0.5, so each
    # marginal is a (1/4, 3/4) split with entropy h(1/4).
    source = UniformSquareSource(1.0, 0.0)
    spec = rateregion.region(source, 1.0 / 3.0, 1.0 / 3.0, dither_grid=2)
    h_quarter = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
    assert spec.h1 == pytest.approx(h_quarter, abs=1e-12)
    assert spec.h2 == pytest.approx(h_quarter, abs=1e-12)
    # Independent coordinates: joint entropy splits additively.
    assert spec.h12 == pytest.approx(2.0 * h_quarter, abs=1e-12)
    assert spec.h1g2 == pytest.approx(h_quarter, abs=1e-12)


def test_region_identities_and_ordering():
    source = UniformSquareSource(1.0, 0.75)
    spec = rateregion.region(source, 0.25, 1.0 / 3.0, dither_grid=8)
    # Chain rule holds exactly by construction.
    assert spec.h1g2 + spec.h2 == pytest.approx(spec.h12, abs=1e-12)
    assert spec.h2g1 + spec.h1 == pytest.approx(spec.h12, abs=1e-12)
    # Conditioning cannot raise entropy; dependence makes it strict here.
    assert spec.h1g2 < spec.h1
    assert spec.h2g1 < spec.h2
    assert spec.h12 <= spec.h1 + spec.h2 + 1e-12


def test_outer_sum_line_clamps_at_zero():
    source = UniformSquareSource(1.0, 0.0)
    spec = rateregion.region(source, 1.0 / 3.0, 1.0 / 3.0, dither_grid=2)
    tight = rateregion.outer_sum_line(spec)
    assert not tight.clamped
    assert tight.bits == pytest.approx(
        spec.h12 - 2.0 * rateregion.redundancy_constant()
    )
    coarse = rateregion.outer_sum_line(rateregion.region(source, 2.0, 2.0, 4))
    assert coarse.clamped
    assert coarse.bits == 0.0


def test_block_entropy_check_equality_and_errors():
    source = DiscreteGridSource(
        1.0, [(1.0, 1.0, 0.475), (-1.0, -1.0, 0.475), (1.0, -1.0, 0.05)]
    )
    result = rateregion.block_entropy_check(source, 0.5, 0.5, 3, dither_grid=3)
    assert result.block_bits_per_symbol == pytest.approx(result.symbol_bits, abs=1e-12)
    with pytest.raises(DomainError):
        rateregion.block_entropy_check(UniformSquareSource(1.0, 0.0), 0.5, 0.5, 2)
    with pytest.raises(SearchCapError):
        rateregion.block_entropy_check(
            source, 0.02, 0.02, 12, dither_grid=1, enumeration_cap=10_000
        )


def test_entropy_bound_identity_is_zero():
    result = rateregion.entropy_bound_check(
        UniformSquareSource(1.0, 0.5), 0.05, rateregion.IdentityReconstructor()
    )
    assert result.measured_bits == 0.0
    assert result.passed


def test_entropy_bound_staircase_stays_under_ceiling():
    source = UniformSquareSource(1.0, 0.5)
    distortion = 0.03
    recon = rateregion.UniformQuantizerReconstructor(
        step=0.9 * step_for_distortion(distortion)
    )
    result = rateregion.entropy_bound_check(source, distortion, recon, user=2)
    assert result.distortion <= distortion * (1.0 + 1e-6)
    assert abs(result.mean_error) <= 1e-9
    assert 0.0 < result.measured_bits <= result.bound_bits + 1e-9
    assert result.passed


def test_entropy_bound_rejects_over_budget_reconstructor():
    source = UniformSquareSource(1.0, 0.0)
    # A step twice the budgeted width has four times the budgeted error.
    recon = rateregion.UniformQuantizerReconstructor(
        step=2.0 * step_for_distortion(0.02)
    )
    with pytest.raises(PreconditionError):
        rateregion.entropy_bound_check(source, 0.02, recon)


def test_entropy_bound_rejects_biased_reconstructor():
    source = UniformSquareSource(1.0, 0.0)
    # A shifted staircase keeps the error small but not zero mean.
    recon = rateregion.UniformQuantizerReconstructor(
        step=0.5 * step_for_distortion(0.02), shift=0.05
    )
    with pytest.raises(PreconditionError):
        rateregion.entropy_bound_check(source, 0.02, recon)


def test_entropy_bound_rejects_bad_realization_weights():
    class Half:
        def realizations(self, halfwidth):
            return [(0.5, rateregion._IdentityRealization())]

    with pytest.raises(DomainError):
        rateregion.entropy_bound_check(UniformSquareSource(1.0, 0.0), 0.02, Half())


def test_dithered_reconstructor_validation():
    with pytest.raises(DomainError):
        rateregion.DitheredQuantizerReconstructor(0.05, shrink=0.0)
    with pytest.raises(DomainError):
        rateregion.DitheredQuantizerReconstructor(0.05, realization_count=3)
