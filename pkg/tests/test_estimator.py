import numpy as np
import pytest
import sympy

from ditherlab import estimator, rng
from ditherlab.errors import DegenerateStatsError, DomainError
from ditherlab.sources import SecondOrderStats


def _symbolic_weights():
    """Solve the user-1 normal equations with exact algebra.

    The optimal weights w satisfy Cov(V) w = Cov(V, X1) where V is the pair
    of noisy outputs; the residual error is Var(X1) - w . Cov(V, X1).
    """
    c11, c22, c12, d1, d2 = sympy.symbols("c11 c22 c12 d1 d2", positive=True)
    cov = sympy.Matrix([[c11 + d1, c12], [c12, c22 + d2]])
    rhs = sympy.Matrix([c11, c12])
    w = cov.solve(rhs)
    err = c11 - (w.T * rhs)[0, 0]
    args = (c11, c22, c12, d1, d2)
    return (
        sympy.lambdify(args, sympy.simplify(w[0])),
        sympy.lambdify(args, sympy.simplify(w[1])),
        sympy.lambdify(args, sympy.simplify(err)),
    )


def test_weights_match_symbolic_solution():
    own_fn, cross_fn, err_fn = _symbolic_weights()
    cases = [
        (1.0, 1.0, 0.9, 0.1, 0.1),
        (1.0, 1.0, -0.8, 0.05, 0.4),
        (2.5, 0.3, 0.4, 1.0, 0.02),
        (1.0, 1.0, 0.0, 0.3, 0.3),
    ]
    for c11, c22, c12, d1, d2 in cases:
        stats = SecondOrderStats(m1=0.0, m2=0.0, s11=c11, s22=c22, s12=c12)
        weights = estimator.lmmse_weights(stats, d1, d2)
        assert weights.own1 == pytest.approx(own_fn(c11, c22, c12, d1, d2), abs=1e-13)
        assert weights.cross1 == pytest.approx(cross_fn(c11, c22, c12, d1, d2), abs=1e-13)
        assert weights.predicted1 == pytest.approx(err_fn(c11, c22, c12, d1, d2), abs=1e-13)
        # User 2 is the mirror image: swap variances and noises.
        mirrored = estimator.lmmse_weights(
            SecondOrderStats(m1=0.0, m2=0.0, s11=c22, s22=c11, s12=c12), d2, d1
        )
        assert weights.own2 == pytest.approx(mirrored.own1, abs=1e-13)
        assert weights.cross2 == pytest.approx(mirrored.cross1, abs=1e-13)
        assert weights.predicted2 == pytest.approx(mirrored.predicted1, abs=1e-13)


def test_predicted_error_never_exceeds_noise_or_variance():
    gen = rng.stream(77, "dstar-bounds")
    for _ in range(200):
        v1, v2 = np.exp(gen.uniform(-2.0, 2.0, size=2))
        rho = gen.uniform(-0.99, 0.99)
        stats = SecondOrderStats(
            m1=0.0, m2=0.0, s11=float(v1), s22=float(v2), s12=float(rho * np.sqrt(v1 * v2))
        )
        d1, d2 = np.exp(gen.uniform(-3.0, 1.0, size=2))
        e1, e2 = estimator.predicted_error(stats, float(d1), float(d2))
        assert 0.0 <= e1 <= min(d1, v1) * (1.0 + 1e-12)
        assert 0.0 <= e2 <= min(d2, v2) * (1.0 + 1e-12)


def test_uncorrelated_pair_reduces_to_single_user_wiener():
    # With no cross correlation the other output carries no information and
    # the weights collapse to the scalar Wiener gain v / (v + d).
    stats = SecondOrderStats(m1=0.0, m2=0.0, s11=2.0, s22=0.5, s12=0.0)
    weights = estimator.lmmse_weights(stats, 0.4, 0.1)
    assert weights.cross1 == 0.0
    assert weights.cross2 == 0.0
    assert weights.own1 == pytest.approx(2.0 / 2.4, abs=1e-14)
    assert weights.own2 == pytest.approx(0.5 / 0.6, abs=1e-14)
    assert weights.predicted1 == pytest.approx(0.4 * 2.0 / 2.4, abs=1e-14)


def test_apply_weights_centers_on_means():
    stats = SecondOrderStats(m1=1.5, m2=-2.0, s11=1.25 + 2.25, s22=1.0 + 4.0, s12=0.5 - 3.0)
    weights = estimator.lmmse_weights(stats, 0.2, 0.2)
    # Outputs equal to the means must estimate the means themselves.
    estimates = estimator.apply_weights(weights, np.array([[1.5, -2.0]]))
    assert estimates[0, 0] == pytest.approx(1.5, abs=1e-14)
    assert estimates[0, 1] == pytest.approx(-2.0, abs=1e-14)
    with pytest.raises(DomainError):
        estimator.apply_weights(weights, np.zeros((3, 3)))


def test_degenerate_covariance_is_rejected():
    stats = SecondOrderStats(m1=0.0, m2=0.0, s11=1.0, s22=1.0, s12=1.0)
    with pytest.raises(DegenerateStatsError):
        estimator.lmmse_weights(stats, 0.0, 0.0)
    with pytest.raises(DomainError):
        estimator.lmmse_weights(stats, -0.1, 0.1)


def test_stats_recovery_is_exact_without_noise():
    gen = rng.stream(123, "recovery")
    x = gen.normal(size=(2000, 2))
    estimate = estimator.estimate_stats_from_channel(x, 0.0, 0.0)
    assert estimate.stats.m1 == pytest.approx(float(x[:, 0].mean()), abs=1e-14)
    assert estimate.stats.var1 == pytest.approx(float(x[:, 0].var()), rel=1e-12)
    assert estimate.stats.cov12 == pytest.approx(
        float(((x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())).mean()),
        rel=1e-10,
    )
    assert not estimate.floored1 and not estimate.floored2
    assert not estimate.cross_clamped


def test_stats_recovery_unbiased_under_known_noise():
    gen = rng.stream(124, "recovery-noise")
    n = 400_000
    x1 = gen.choice([-1.0, 1.0], size=n)
    x2 = np.where(gen.random(n) < 0.95, x1, -x1)
    d1, d2 = 0.3, 0.2
    v1 = x1 + gen.uniform(-np.sqrt(3 * d1), np.sqrt(3 * d1), size=n)
    v2 = x2 + gen.uniform(-np.sqrt(3 * d2), np.sqrt(3 * d2), size=n)
    estimate = estimator.estimate_stats_from_channel(np.column_stack([v1, v2]), d1, d2)
    # True var 1, cov 0.9; allow 5 sigma-ish slack on each.
    assert abs(estimate.stats.var1 - 1.0) <= 0.02
    assert abs(estimate.stats.var2 - 1.0) <= 0.02
    assert abs(estimate.stats.cov12 - 0.9) <= 0.02


def test_stats_recovery_repairs_are_flagged():
    # Constant outputs have zero sample variance; subtracting the known
    # noise floor drives the raw estimate negative, which must be floored.
    outputs = np.ones((100, 2))
    estimate = estimator.estimate_stats_from_channel(outputs, 0.5, 0.0)
    assert estimate.floored1
    assert not estimate.floored2
    assert estimate.stats.var1 == 0.0
    assert not estimate.cross_clamped
    assert estimate.stats.cov12 == 0.0
    with pytest.raises(DomainError):
        estimator.estimate_stats_from_channel(np.ones((1, 2)), 0.1, 0.1)
