"""Numerical verification suite.

Ten checks, each with an explicit tolerance, covering every computable
claim the package rests on: the closed-form constants, exactness of the
dithered channel, the additive-noise picture and its moment identities,
the estimator algebra against an independent solver and Monte Carlo, the
conditional-entropy ceiling, memorylessness of block entropies, the
binning codec's achievability and converse behavior with an exhaustive
decoder audit, and byte-level determinism across thread counts.

All Monte Carlo checks run from fixed derived seeds, so a pass is
reproducible rather than probabilistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from . import estimator, rateregion, swcodec
from .config import ExperimentConfig
from .errors import PreconditionError
from .pipeline import run_pipeline
from .quantizer import (
    conditional_distortion,
    conditional_mean_error,
    reconstruct_with_fresh_dither,
    step_for_distortion,
)
from .report import RunReport
from .rng import stream
from .sources import (
    DiscreteGridSource,
    SecondOrderStats,
    TruncatedGaussianSource,
    UniformSquareSource,
)

__all__ = ["CheckResult", "ALL_CHECKS", "run_verification_suite"]

_SUITE_SEED = 20260817

# Kolmogorov statistic critical value at the 1 percent level, asymptotic:
# sqrt(-0.5 * ln(0.005)).
_KS_CRITICAL_1PCT = 1.6276


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _mixture_source() -> DiscreteGridSource:
    # Four corner atoms giving unit second moments and cross moment 0.9.
    return DiscreteGridSource(
        halfwidth=1.0,
        atoms=[
            (1.0, 1.0, 0.475),
            (-1.0, -1.0, 0.475),
            (1.0, -1.0, 0.025),
            (-1.0, 1.0, 0.025),
        ],
    )


def check_redundancy_constant() -> CheckResult:
    value = rateregion.redundancy_constant()
    ceiling = rateregion.improved_constant(1.0, 1.0)
    ok = abs(value - 0.7546) <= 5e-4 and abs(ceiling - value) <= 1e-12
    return CheckResult(
        name="constants.redundancy",
        passed=ok,
        detail=f"redundancy constant {value:.6f} (reference 0.7546); "
        f"improved constant at full ratio {ceiling:.6f}",
    )


def check_improved_constant() -> CheckResult:
    floor = rateregion.improved_constant(0.0, 0.2)
    mid = rateregion.improved_constant(0.1, 0.2)
    top = rateregion.improved_constant(0.2, 0.2)
    grid = [rateregion.improved_constant(r * 0.2, 0.2) for r in np.linspace(0, 1, 21)]
    monotone = all(b >= a - 1e-12 for a, b in zip(grid, grid[1:]))
    try:
        rateregion.improved_constant(0.3, 0.2)
        raised = False
    except PreconditionError:
        raised = True
    ok = (
        abs(floor - 0.2546) <= 5e-4
        and abs(mid - 0.547) <= 5e-4
        and abs(top - 0.7546) <= 5e-4
        and monotone
        and raised
    )
    return CheckResult(
        name="constants.improved",
        passed=ok,
        detail=f"floor {floor:.6f} (ref 0.2546), midpoint {mid:.6f} (ref 0.547), "
        f"ceiling {top:.6f} (ref 0.7546); monotone={monotone}; "
        f"precondition raise={raised}",
    )


def check_conditional_distortion() -> CheckResult:
    values = np.linspace(-6.0, 6.0, 100)
    targets = [0.01, 0.04, 0.1, 1.0 / 3.0, 1.0]
    worst_d = 0.0
    worst_m = 0.0
    for target in targets:
        for value in values:
            worst_d = max(
                worst_d, abs(conditional_distortion(float(value), target) - target)
            )
            worst_m = max(worst_m, abs(conditional_mean_error(float(value), target)))
    ok = worst_d <= 1e-9 and worst_m <= 1e-9
    return CheckResult(
        name="quantizer.conditional-distortion",
        passed=ok,
        detail=f"max |distortion - target| = {worst_d:.3e}, "
        f"max |mean error| = {worst_m:.3e} over {len(values) * len(targets)} probes "
        "(tolerance 1e-09)",
    )


def check_additive_noise_law() -> CheckResult:
    count = 100_000
    source = UniformSquareSource(1.0, 0.75)
    x = source.sample(count, stream(_SUITE_SEED, "noise-sample"))
    d1, d2 = 0.04, 0.09
    v1, _ = reconstruct_with_fresh_dither(x[:, 0], d1, stream(_SUITE_SEED, "noise-dither", 1))
    v2, _ = reconstruct_with_fresh_dither(x[:, 1], d2, stream(_SUITE_SEED, "noise-dither", 2))
    noise1 = v1 - x[:, 0]
    noise2 = v2 - x[:, 1]
    step1 = step_for_distortion(d1)
    step2 = step_for_distortion(d2)
    ks1 = float(
        scipy_stats.kstest(noise1, "uniform", args=(-0.5 * step1, step1)).statistic
    )
    ks2 = float(
        scipy_stats.kstest(noise2, "uniform", args=(-0.5 * step2, step2)).statistic
    )
    ks_limit = _KS_CRITICAL_1PCT / math.sqrt(count)
    corr_limit = 3.0 / math.sqrt(count)

    def corr(a: np.ndarray, b: np.ndarray) -> float:
        return float(np.corrcoef(a, b)[0, 1])

    corrs = {
        "noise1-input1": corr(noise1, x[:, 0]),
        "noise2-input2": corr(noise2, x[:, 1]),
        "noise1-input2": corr(noise1, x[:, 1]),
        "noise1-noise2": corr(noise1, noise2),
    }
    ok = (
        ks1 <= ks_limit
        and ks2 <= ks_limit
        and all(abs(c) <= corr_limit for c in corrs.values())
    )
    corr_text = ", ".join(f"{k}={v:+.5f}" for k, v in corrs.items())
    return CheckResult(
        name="quantizer.additive-noise-law",
        passed=ok,
        detail=f"KS statistics ({ks1:.5f}, {ks2:.5f}) vs limit {ks_limit:.5f}; "
        f"correlations {corr_text} vs limit {corr_limit:.5f}",
    )


def check_channel_moment_identities() -> CheckResult:
    count = 1_000_000
    source = TruncatedGaussianSource(4.0, 1.0, 1.0, 0.9)
    truth = source.moments()
    d1, d2 = 0.1, 0.25
    x = source.sample(count, stream(_SUITE_SEED, "moments-sample"))
    v1, _ = reconstruct_with_fresh_dither(x[:, 0], d1, stream(_SUITE_SEED, "moments-dither", 1))
    v2, _ = reconstruct_with_fresh_dither(x[:, 1], d2, stream(_SUITE_SEED, "moments-dither", 2))

    identities = {
        "mean-output": (v1, truth.m1),
        "output-power": (v1 * v1, truth.s11 + d1),
        "input-output": (x[:, 0] * v1, truth.s11),
        "cross-outputs": (v1 * v2, truth.s12),
        "input1-output2": (x[:, 0] * v2, truth.s12),
        "input2-output1": (x[:, 1] * v1, truth.s12),
    }
    failures = []
    details = []
    for name, (terms, expected) in identities.items():
        empirical = float(terms.mean())
        se = float(terms.std() / math.sqrt(count))
        gap = abs(empirical - expected)
        details.append(f"{name}: |{empirical:.6f} - {expected:.6f}| vs 3se={3 * se:.6f}")
        if gap > 3.0 * se + 1e-12:
            failures.append(name)
    return CheckResult(
        name="estimator.channel-moment-identities",
        passed=not failures,
        detail="; ".join(details) + (f"; FAILED: {failures}" if failures else ""),
    )


def check_predicted_error() -> CheckResult:
    stats_grid = [
        SecondOrderStats(m1=0.0, m2=0.0, s11=1.0, s22=1.0, s12=0.9),
        SecondOrderStats(m1=0.0, m2=0.0, s11=1.0, s22=1.0, s12=1.0),
        SecondOrderStats(m1=0.3, m2=-0.2, s11=1.2, s22=0.8, s12=0.5),
        SecondOrderStats(m1=0.0, m2=0.0, s11=0.5, s22=2.0, s12=0.0),
    ]
    noise_grid = [(0.1, 0.1), (0.05, 0.4), (1.0, 1.0)]
    worst = 0.0
    for stats in stats_grid:
        for d1, d2 in noise_grid:
            weights = estimator.lmmse_weights(stats, d1, d2)
            cov = np.array(
                [
                    [stats.var1 + d1, stats.cov12],
                    [stats.cov12, stats.var2 + d2],
                ]
            )
            sol1 = np.linalg.solve(cov, np.array([stats.var1, stats.cov12]))
            sol2 = np.linalg.solve(cov, np.array([stats.cov12, stats.var2]))
            direct1 = stats.var1 - sol1 @ np.array([stats.var1, stats.cov12])
            direct2 = stats.var2 - sol2 @ np.array([stats.cov12, stats.var2])
            worst = max(
                worst,
                abs(weights.predicted1 - float(direct1)) / max(1.0, abs(direct1)),
                abs(weights.predicted2 - float(direct2)) / max(1.0, abs(direct2)),
                abs(weights.own1 - float(sol1[0])),
                abs(weights.cross1 - float(sol1[1])),
                abs(weights.cross2 - float(sol2[0])),
                abs(weights.own2 - float(sol2[1])),
            )
    solver_ok = worst <= 1e-12

    # The predicted error never exceeds the raw channel noise.
    rng = stream(_SUITE_SEED, "dstar-scan")
    dstar_ok = True
    for _ in range(500):
        v1, v2 = np.exp(rng.uniform(-3.0, 3.0, size=2))
        rho = rng.uniform(-0.999, 0.999)
        m1, m2 = rng.uniform(-2.0, 2.0, size=2)
        stats = SecondOrderStats(
            m1=float(m1),
            m2=float(m2),
            s11=float(v1 + m1 * m1),
            s22=float(v2 + m2 * m2),
            s12=float(rho * math.sqrt(v1 * v2) + m1 * m2),
        )
        noise1, noise2 = np.exp(rng.uniform(-4.0, 2.0, size=2))
        e1, e2 = estimator.predicted_error(stats, float(noise1), float(noise2))
        if e1 > noise1 * (1 + 1e-12) or e2 > noise2 * (1 + 1e-12):
            dstar_ok = False
            break

    count = 1_000_000
    source = _mixture_source()
    d1, d2 = 0.1, 0.1
    truth = source.moments()
    weights = estimator.lmmse_weights(truth, d1, d2)
    x = source.sample(count, stream(_SUITE_SEED, "predicted-sample"))
    v1, _ = reconstruct_with_fresh_dither(x[:, 0], d1, stream(_SUITE_SEED, "predicted-dither", 1))
    v2, _ = reconstruct_with_fresh_dither(x[:, 1], d2, stream(_SUITE_SEED, "predicted-dither", 2))
    estimates = estimator.apply_weights(weights, np.column_stack([v1, v2]))
    mc1 = float(((estimates[:, 0] - x[:, 0]) ** 2).mean())
    mc2 = float(((estimates[:, 1] - x[:, 1]) ** 2).mean())
    rel1 = abs(mc1 - weights.predicted1) / weights.predicted1
    rel2 = abs(mc2 - weights.predicted2) / weights.predicted2
    mc_ok = rel1 <= 0.01 and rel2 <= 0.01
    return CheckResult(
        name="estimator.predicted-error",
        passed=solver_ok and dstar_ok and mc_ok,
        detail=f"max solver gap {worst:.2e} (tolerance 1e-12); predicted error "
        f"below channel noise on 500 random laws: {dstar_ok}; Monte Carlo at "
        f"{count} samples: ({mc1:.6f}, {mc2:.6f}) vs predicted "
        f"({weights.predicted1:.6f}, {weights.predicted2:.6f}), relative gaps "
        f"({rel1:.4f}, {rel2:.4f}) vs 0.01",
    )


def _fitted_bound_check(source, distortion: float, user: int, kind: str):
    """Run the ceiling check with a reconstructor scaled to meet its budget."""
    for factor in (1.0, 0.97, 0.94, 0.9, 0.85, 0.8):
        if kind == "staircase":
            recon = rateregion.UniformQuantizerReconstructor(
                step=factor * 0.95 * step_for_distortion(distortion)
            )
        else:
            recon = rateregion.DitheredQuantizerReconstructor(
                distortion, shrink=factor * 0.95
            )
        try:
            return rateregion.entropy_bound_check(source, distortion, recon, user=user)
        except PreconditionError:
            continue
    raise PreconditionError(f"no {kind} reconstructor met the budget {distortion}")


def check_entropy_bound() -> CheckResult:
    cases = [
        (UniformSquareSource(1.0, 0.5), 0.02, 1),
        (UniformSquareSource(1.0, 0.5), 0.02, 2),
        (TruncatedGaussianSource(2.0, 1.0, 1.0, 0.6), 0.05, 1),
    ]
    bound = rateregion.redundancy_constant()
    rows = []
    ok = True
    for source, distortion, user in cases:
        identity = rateregion.entropy_bound_check(
            source, distortion, rateregion.IdentityReconstructor(), user=user
        )
        stair = _fitted_bound_check(source, distortion, user, "staircase")
        dithered = _fitted_bound_check(source, distortion, user, "dithered")
        ok = ok and identity.measured_bits == 0.0
        for result in (identity, stair, dithered):
            ok = ok and result.passed and result.measured_bits <= bound + 1e-9
        # The dithered family should land close to the ceiling, not at zero.
        ok = ok and dithered.measured_bits >= 0.25
        rows.append(
            f"{source.kind}/user{user}: identity={identity.measured_bits:.6f}, "
            f"staircase={stair.measured_bits:.6f}, dithered={dithered.measured_bits:.6f}"
        )
    return CheckResult(
        name="rateregion.entropy-bound",
        passed=ok,
        detail=f"bound {bound:.6f}; " + "; ".join(rows),
    )


def check_memorylessness() -> CheckResult:
    region_cases = [
        (UniformSquareSource(1.0, 0.75), 1.0 / 3.0, 1.0 / 3.0, 16),
        (TruncatedGaussianSource(2.0, 1.0, 1.0, 0.6), 0.1, 0.2, 8),
        (_mixture_source(), 1.0 / 3.0, 0.25, 16),
    ]
    worst_chain = 0.0
    for source, d1, d2, grid in region_cases:
        spec = rateregion.region(source, d1, d2, grid)
        worst_chain = max(
            worst_chain,
            abs(spec.h1g2 + spec.h2 - spec.h12),
            abs(spec.h2g1 + spec.h1 - spec.h12),
        )
    chain_ok = worst_chain <= 1e-6

    worst_block = 0.0
    for block_length in (2, 3):
        result = rateregion.block_entropy_check(
            _mixture_source(), 1.0 / 3.0, 1.0 / 3.0, block_length, dither_grid=4
        )
        worst_block = max(
            worst_block, abs(result.block_bits_per_symbol - result.symbol_bits)
        )
    block_ok = worst_block <= 1e-9
    return CheckResult(
        name="rateregion.memorylessness",
        passed=chain_ok and block_ok,
        detail=f"max chain-rule residual {worst_chain:.2e} (tolerance 1e-06); "
        f"max block-vs-symbol gap {worst_block:.2e} (tolerance 1e-09)",
    )


def check_binning_codec() -> CheckResult:
    # Binary symmetric pair with correlation 0.9, concentrated on the diagonal.
    law = swcodec.PairLaw(probs=np.array([[0.475, 0.025], [0.025, 0.475]]))
    block_length = 8
    trials = 500
    margin = swcodec.sw_error_experiment(
        law, block_length, 0.5, 0.5, trials, _SUITE_SEED, threads=1
    )
    achieve_ok = margin.error_rate <= 0.10

    # Starve the sum rate a quarter bit per sample below the joint floor.
    floor_bits = block_length * law.joint_entropy()
    starved_total = int(round(floor_bits - 0.25 * block_length))
    starved = swcodec.sw_error_experiment(
        law,
        block_length,
        0.0,
        0.0,
        trials,
        _SUITE_SEED + 1,
        explicit_bits=(starved_total // 2, starved_total - starved_total // 2),
    )
    converse_ok = starved.error_rate >= 0.50

    # Exhaustive audit of both runs: every decoded pair attains the minimum
    # joint empirical entropy among all bin-consistent pairs.
    table = swcodec.pair_entropy_table(law.k1, law.k2, block_length)
    seqs1 = swcodec._all_sequences(law.k1, block_length)
    seqs2 = swcodec._all_sequences(law.k2, block_length)
    audit_ok = True
    audit_runs = [
        (_SUITE_SEED, margin.bits1, margin.bits2),
        (_SUITE_SEED + 1, starved.bits1, starved.bits2),
    ]
    for seed, bits1, bits2 in audit_runs:
        for index in range(trials):
            result = swcodec.experiment_trial(
                law, block_length, bits1, bits2, seed, index
            )
            rows = swcodec.assign_bin_array(seqs1, 1, result.code) == np.uint64(
                result.bin1
            )
            cols = swcodec.assign_bin_array(seqs2, 2, result.code) == np.uint64(
                result.bin2
            )
            best = float(table[np.ix_(rows, cols)].min())
            if result.outcome.entropy != best:
                audit_ok = False
                break
    return CheckResult(
        name="swcodec.binning",
        passed=achieve_ok and converse_ok and audit_ok,
        detail=f"margin run error rate {margin.error_rate:.3f} (limit 0.10, bits "
        f"{margin.bits1}+{margin.bits2}); starved run error rate "
        f"{starved.error_rate:.3f} (floor 0.50, bits {starved.bits1}+{starved.bits2}); "
        f"decoder audit over {2 * trials} trials: {'clean' if audit_ok else 'violated'}",
    )


def _determinism_config(threads: int) -> ExperimentConfig:
    return ExperimentConfig(
        source_kind="uniform-square",
        source_params={"halfwidth": 1.0, "tilt": 0.75},
        distortion1=1.0 / 3.0,
        distortion2=1.0 / 3.0,
        block_length=8,
        margin1=0.5,
        margin2=0.5,
        trials=120,
        dither_grid=16,
        seed=_SUITE_SEED,
        threads=threads,
        stats_mode="universal",
    )


def check_determinism() -> CheckResult:
    first = run_pipeline(_determinism_config(1)).json()
    second = run_pipeline(_determinism_config(1)).json()
    third = run_pipeline(_determinism_config(8)).json()
    ok = first == second == third
    return CheckResult(
        name="harness.determinism",
        passed=ok,
        detail=f"single-thread repeat identical: {first == second}; "
        f"8-thread run identical to single-thread: {first == third} "
        f"({len(first)} bytes of canonical output)",
    )


ALL_CHECKS = [
    check_redundancy_constant,
    check_improved_constant,
    check_conditional_distortion,
    check_additive_noise_law,
    check_channel_moment_identities,
    check_predicted_error,
    check_entropy_bound,
    check_memorylessness,
    check_binning_codec,
    check_determinism,
]


def run_verification_suite() -> RunReport:
    """Run every acceptance check and bundle the results into a report."""
    results = [check() for check in ALL_CHECKS]
    checks = [
        {
            "name": result.name,
            "status": "pass" if result.passed else "fail",
            "detail": result.detail,
        }
        for result in results
    ]
    payload = {
        "mode": "selftest",
        "passed": all(result.passed for result in results),
        "total": len(results),
        "failures": sum(1 for result in results if not result.passed),
        "checks": checks,
        "seed": _SUITE_SEED,
        "wall_clock_seconds": None,
    }
    return RunReport(payload=payload)
