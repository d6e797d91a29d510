"""End-to-end experiment drivers.

Each driver takes an ExperimentConfig and returns a RunReport whose payload
is deterministic in (config, seed): trial randomness comes from per-trial
derived streams, reductions run in trial order, and elapsed time is kept
out of the payload. Thread count changes wall time only.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import estimator, rateregion, swcodec
from .config import ExperimentConfig, build_source
from .quantizer import (
    DitherSpec,
    conditional_distortion,
    conditional_mean_error,
    draw_dither,
    index_bound,
    quantize_array,
    reconstruct_with_fresh_dither,
    step_for_distortion,
)
from .report import RunReport
from .rng import derive_seed, stream
from .sources import SecondOrderStats

__all__ = [
    "run_region_report",
    "run_quantize_demo",
    "run_sw_report",
    "run_estimate_report",
    "run_pipeline",
]


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "status": "pass" if passed else "fail", "detail": detail}


def _config_echo(config: ExperimentConfig) -> dict:
    return {
        "source": {"kind": config.source_kind, **config.source_params},
        "distortion1": config.distortion1,
        "distortion2": config.distortion2,
        "block_length": config.block_length,
        "margin1": config.margin1,
        "margin2": config.margin2,
        "trials": config.trials,
        "dither_grid": config.dither_grid,
        "stats_mode": config.stats_mode,
        "seed": config.seed,
    }


def _stats_dict(stats: SecondOrderStats) -> dict:
    return {
        "m1": stats.m1,
        "m2": stats.m2,
        "s11": stats.s11,
        "s22": stats.s22,
        "s12": stats.s12,
    }


def _region_dict(spec: rateregion.RateRegionSpec) -> dict:
    return {
        "h1_given_2": spec.h1g2,
        "h2_given_1": spec.h2g1,
        "h12": spec.h12,
        "h1": spec.h1,
        "h2": spec.h2,
        "dither_grid": spec.dither_grid,
    }


def _constants_dict(
    predicted1: float, predicted2: float, config: ExperimentConfig
) -> dict:
    base = rateregion.redundancy_constant()
    return {
        "redundancy_bits": base,
        "improved_bits_user1": rateregion.improved_constant(
            predicted1, config.distortion1
        ),
        "improved_bits_user2": rateregion.improved_constant(
            predicted2, config.distortion2
        ),
        "improved_bits_floor": rateregion.improved_constant(0.0, config.distortion1),
        "improved_bits_ceiling": base,
    }


def run_region_report(config: ExperimentConfig) -> RunReport:
    """Rate region corner entropies, redundancy constants and the outer
    sum-rate reference for the configured source and distortions."""
    source = build_source(config)
    spec = rateregion.region(
        source, config.distortion1, config.distortion2, config.dither_grid
    )
    moments = source.moments()
    predicted1, predicted2 = estimator.predicted_error(
        moments, config.distortion1, config.distortion2
    )
    outer = rateregion.outer_sum_line(spec)
    checks = [
        _check(
            "region.interesting-range",
            spec.h1g2 <= spec.h1 + 1e-9 and spec.h2g1 <= spec.h2 + 1e-9,
            f"h1_given_2={spec.h1g2:.6f} <= h1={spec.h1:.6f}, "
            f"h2_given_1={spec.h2g1:.6f} <= h2={spec.h2:.6f}",
        ),
        _check(
            "region.sum-consistency",
            abs(spec.h1g2 + spec.h2 - spec.h12) <= 1e-9
            and abs(spec.h2g1 + spec.h1 - spec.h12) <= 1e-9,
            "conditional plus marginal reproduces the joint on both orders",
        ),
    ]
    payload = {
        "mode": "region",
        "config": _config_echo(config),
        "region": _region_dict(spec),
        "constants": _constants_dict(predicted1, predicted2, config),
        "outer_sum_line": {"bits": outer.bits, "clamped": outer.clamped},
        "predicted_error": {"user1": predicted1, "user2": predicted2},
        "source_moments": _stats_dict(moments),
        "checks": checks,
        "seed": config.seed,
        "wall_clock_seconds": None,
    }
    return RunReport(payload=payload)


def run_quantize_demo(config: ExperimentConfig) -> RunReport:
    """One-block walkthrough of the dithered quantizer."""
    source = build_source(config)
    dither_rng = stream(config.seed, "demo-dither")
    dither = draw_dither(config.distortion1, dither_rng)
    block_rng = stream(config.seed, "demo-block")
    values = source.sample(
        config.block_length, block_rng, attempt_cap=config.sampler_attempt_cap
    )[:, 0]
    indices = quantize_array(values + dither.offset, dither.step)
    recon = indices.astype(np.float64) * dither.step - dither.offset
    errors = recon - values
    probes = [0.0, 0.31, -1.27, 2.5]
    probe_rows = [
        {
            "value": x,
            "distortion": conditional_distortion(x, config.distortion1),
            "mean_error": conditional_mean_error(x, config.distortion1),
        }
        for x in probes
    ]
    max_abs_err = float(np.max(np.abs(errors)))
    checks = [
        _check(
            "quantizer.cell-radius",
            max_abs_err <= 0.5 * dither.step * (1.0 + 1e-12),
            f"max reconstruction error {max_abs_err:.6f} within half step "
            f"{0.5 * dither.step:.6f}",
        ),
        _check(
            "quantizer.conditional-distortion",
            all(
                abs(row["distortion"] - config.distortion1) <= 1e-9 * config.distortion1
                for row in probe_rows
            ),
            "dither-averaged squared error equals the target at every probe",
        ),
        _check(
            "quantizer.zero-mean-error",
            all(abs(row["mean_error"]) <= 1e-9 for row in probe_rows),
            "dither-averaged error vanishes at every probe",
        ),
    ]
    payload = {
        "mode": "quantize-demo",
        "config": _config_echo(config),
        "dither": {"step": dither.step, "offset": dither.offset},
        "block": {
            "values": [float(v) for v in values],
            "indices": [int(i) for i in indices],
            "reconstruction": [float(v) for v in recon],
            "errors": [float(e) for e in errors],
        },
        "probes": probe_rows,
        "checks": checks,
        "seed": config.seed,
        "wall_clock_seconds": None,
    }
    return RunReport(payload=payload)


def _pair_law_at(
    source, config: ExperimentConfig, dither1: DitherSpec, dither2: DitherSpec
) -> swcodec.PairLaw:
    pmf = rateregion.joint_pmf_given_dithers(source, dither1, dither2)
    return swcodec.PairLaw.from_matrix(pmf.probs)


def run_sw_report(config: ExperimentConfig) -> RunReport:
    """Binning error rate on the quantized pair law at one dither draw."""
    source = build_source(config)
    dither_rng = stream(config.seed, "sw-dither")
    dither1 = draw_dither(config.distortion1, dither_rng)
    dither2 = draw_dither(config.distortion2, dither_rng)
    law = _pair_law_at(source, config, dither1, dither2)
    report = swcodec.sw_error_experiment(
        law,
        config.block_length,
        config.margin1,
        config.margin2,
        config.trials,
        config.seed,
        threads=config.threads,
        enumeration_cap=config.enumeration_cap,
        pair_eval_cap=config.pair_eval_cap,
    )
    rate_floor = report.cond1_given_2 + report.cond2_given_1
    checks = [
        _check(
            "swcodec.rates-above-floors",
            report.rate1 >= report.cond1_given_2 - 1e-9
            and report.rate2 >= report.cond2_given_1 - 1e-9
            and report.rate1 + report.rate2 >= report.joint_entropy - 1e-9,
            f"rates ({report.rate1:.4f}, {report.rate2:.4f}) clear floors "
            f"({report.cond1_given_2:.4f}, {report.cond2_given_1:.4f}, "
            f"joint {report.joint_entropy:.4f})",
        ),
    ]
    payload = {
        "mode": "sw-sim",
        "config": _config_echo(config),
        "dither": {
            "offset1": dither1.offset,
            "offset2": dither2.offset,
            "step1": dither1.step,
            "step2": dither2.step,
        },
        "law": {
            "alphabet1": law.k1,
            "alphabet2": law.k2,
            "joint_entropy": report.joint_entropy,
            "cond1_given_2": report.cond1_given_2,
            "cond2_given_1": report.cond2_given_1,
            "floor_sum": rate_floor,
        },
        "coding": {
            "block_length": report.block_length,
            "bits1": report.bits1,
            "bits2": report.bits2,
            "rate1": report.rate1,
            "rate2": report.rate2,
            "trials": report.trials,
            "error_rate": report.error_rate,
            "tie_rate": report.tie_rate,
            "mean_evaluations": report.mean_evaluations,
        },
        "checks": checks,
        "seed": config.seed,
        "wall_clock_seconds": None,
    }
    return RunReport(payload=payload)


def run_estimate_report(config: ExperimentConfig) -> RunReport:
    """Channel simulation with per-coordinate dithers plus the linear
    estimation stage, reporting predicted against empirical error."""
    source = build_source(config)
    count = config.estimator_samples
    x = source.sample(
        count, stream(config.seed, "estimate-sample"), attempt_cap=config.sampler_attempt_cap
    )
    v1, _ = reconstruct_with_fresh_dither(
        x[:, 0], config.distortion1, stream(config.seed, "estimate-dither", 1)
    )
    v2, _ = reconstruct_with_fresh_dither(
        x[:, 1], config.distortion2, stream(config.seed, "estimate-dither", 2)
    )
    outputs = np.column_stack([v1, v2])
    recovered = estimator.estimate_stats_from_channel(
        outputs, config.distortion1, config.distortion2
    )
    oracle = source.moments()
    stats_used = oracle if config.stats_mode == "oracle" else recovered.stats
    weights = estimator.lmmse_weights(stats_used, config.distortion1, config.distortion2)
    estimates = estimator.apply_weights(weights, outputs)
    err1 = estimates[:, 0] - x[:, 0]
    err2 = estimates[:, 1] - x[:, 1]
    post1 = float((err1 * err1).mean())
    post2 = float((err2 * err2).mean())
    pre1 = float(((v1 - x[:, 0]) ** 2).mean())
    pre2 = float(((v2 - x[:, 1]) ** 2).mean())
    se1 = float((err1 * err1).std() / np.sqrt(count))
    se2 = float((err2 * err2).std() / np.sqrt(count))
    checks = [
        _check(
            "estimator.predicted-vs-empirical-user1",
            abs(post1 - weights.predicted1) <= 3.0 * se1 + 1e-12,
            f"empirical {post1:.6f} vs predicted {weights.predicted1:.6f} "
            f"(3 standard errors = {3.0 * se1:.6f})",
        ),
        _check(
            "estimator.predicted-vs-empirical-user2",
            abs(post2 - weights.predicted2) <= 3.0 * se2 + 1e-12,
            f"empirical {post2:.6f} vs predicted {weights.predicted2:.6f} "
            f"(3 standard errors = {3.0 * se2:.6f})",
        ),
        _check(
            "estimator.improves-on-channel",
            post1 <= pre1 * 1.02 + 1e-12 and post2 <= pre2 * 1.02 + 1e-12,
            f"post ({post1:.6f}, {post2:.6f}) vs pre ({pre1:.6f}, {pre2:.6f})",
        ),
    ]
    payload = {
        "mode": "estimate",
        "config": _config_echo(config),
        "samples": count,
        "stats": {
            "mode": config.stats_mode,
            "oracle": _stats_dict(oracle),
            "recovered": _stats_dict(recovered.stats),
            "recovered_flags": {
                "floored1": recovered.floored1,
                "floored2": recovered.floored2,
                "cross_clamped": recovered.cross_clamped,
            },
        },
        "weights": {
            "own1": weights.own1,
            "cross1": weights.cross1,
            "own2": weights.own2,
            "cross2": weights.cross2,
        },
        "error": {
            "pre1": pre1,
            "pre2": pre2,
            "post1": post1,
            "post2": post2,
            "predicted1": weights.predicted1,
            "predicted2": weights.predicted2,
        },
        "checks": checks,
        "seed": config.seed,
        "wall_clock_seconds": None,
    }
    return RunReport(payload=payload)


def _zigzag(indices: np.ndarray) -> np.ndarray:
    """Map signed cell indices 0, 1, -1, 2, -2, ... to symbols 0, 1, 2, 3, 4.

    Zero maps to symbol zero, so on decoder entropy ties the lexicographic
    rule prefers the smallest-magnitude reconstruction; a point-mass source
    then decodes exactly even at zero rate.
    """
    return np.where(indices > 0, 2 * indices - 1, -2 * indices)


def _unzigzag(symbols: np.ndarray) -> np.ndarray:
    half = (symbols + 1) // 2
    return np.where(symbols % 2 == 1, half, -half)


def _pipeline_trial(
    source,
    config: ExperimentConfig,
    bits1: int,
    bits2: int,
    bound1: int,
    bound2: int,
    index: int,
) -> dict:
    step1 = step_for_distortion(config.distortion1)
    step2 = step_for_distortion(config.distortion2)
    dither_rng = stream(config.seed, "pipeline-dither", index)
    dither1 = draw_dither(config.distortion1, dither_rng)
    dither2 = draw_dither(config.distortion2, dither_rng)
    block = source.sample(
        config.block_length,
        stream(config.seed, "pipeline-block", index),
        attempt_cap=config.sampler_attempt_cap,
    )
    idx1 = quantize_array(block[:, 0] + dither1.offset, step1)
    idx2 = quantize_array(block[:, 1] + dither2.offset, step2)
    sym1 = _zigzag(idx1)
    sym2 = _zigzag(idx2)
    code = swcodec.BinningCode(
        block_length=config.block_length,
        k1=2 * bound1 + 1,
        k2=2 * bound2 + 1,
        bits1=bits1,
        bits2=bits2,
        key=derive_seed(config.seed, "pipeline-key", index),
    )
    bin1 = swcodec.assign_bin(sym1, 1, code)
    bin2 = swcodec.assign_bin(sym2, 2, code)
    outcome = swcodec.mje_decode(
        code,
        bin1,
        bin2,
        enumeration_cap=config.enumeration_cap,
        pair_eval_cap=config.pair_eval_cap,
    )
    consistent = swcodec.assign_bin(outcome.first, 1, code) == bin1 and (
        swcodec.assign_bin(outcome.second, 2, code) == bin2
    )
    dec1 = _unzigzag(outcome.first)
    dec2 = _unzigzag(outcome.second)
    recon1 = dec1.astype(np.float64) * step1 - dither1.offset
    recon2 = dec2.astype(np.float64) * step2 - dither2.offset
    correct = bool(np.array_equal(dec1, idx1) and np.array_equal(dec2, idx2))
    return {
        "x": block,
        "recon": np.column_stack([recon1, recon2]),
        "correct": correct,
        "tie": outcome.tie,
        "consistent": consistent,
    }


def run_pipeline(config: ExperimentConfig) -> RunReport:
    """Full chain: quantize, bin, decode, de-dither, estimate, account.

    The decoder never sees source statistics; the estimation stage recovers
    them from its own outputs unless stats_mode forces the oracle moments.
    """
    source = build_source(config)
    oracle = source.moments()
    spec = rateregion.region(
        source, config.distortion1, config.distortion2, config.dither_grid
    )

    rate1 = spec.h1g2 + config.margin1
    rate2 = spec.h2g1 + config.margin2
    floor = spec.h12 + max(config.margin1, config.margin2)
    deficit = floor - (rate1 + rate2)
    if deficit > 0.0:
        rate1 += 0.5 * deficit
        rate2 += 0.5 * deficit
    step1 = step_for_distortion(config.distortion1)
    step2 = step_for_distortion(config.distortion2)
    bound1 = index_bound(source.halfwidth, step1)
    bound2 = index_bound(source.halfwidth, step2)
    bits1, bits2 = swcodec.bits_for_rates(
        config.block_length, rate1, rate2, 2 * bound1 + 1, 2 * bound2 + 1
    )

    def one(index: int) -> dict:
        return _pipeline_trial(source, config, bits1, bits2, bound1, bound2, index)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(one, range(config.trials)))
    else:
        rows = [one(index) for index in range(config.trials)]

    x_all = np.concatenate([row["x"] for row in rows], axis=0)
    v_all = np.concatenate([row["recon"] for row in rows], axis=0)
    correct_rows = np.array([row["correct"] for row in rows])
    consistent_all = all(row["consistent"] for row in rows)
    tie_rate = float(np.mean([row["tie"] for row in rows]))
    error_rate = float(1.0 - correct_rows.mean())
    correct_mask = np.repeat(correct_rows, config.block_length)

    recovered = estimator.estimate_stats_from_channel(
        v_all, config.distortion1, config.distortion2
    )
    stats_used = oracle if config.stats_mode == "oracle" else recovered.stats
    weights = estimator.lmmse_weights(stats_used, config.distortion1, config.distortion2)
    estimates = estimator.apply_weights(weights, v_all)

    def mse(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float | None:
        diff = a - b
        if mask is not None:
            if not np.any(mask):
                return None
            diff = diff[mask]
        return float((diff * diff).mean())

    pre1 = mse(v_all[:, 0], x_all[:, 0])
    pre2 = mse(v_all[:, 1], x_all[:, 1])
    post1 = mse(estimates[:, 0], x_all[:, 0])
    post2 = mse(estimates[:, 1], x_all[:, 1])
    pre1_ok = mse(v_all[:, 0], x_all[:, 0], correct_mask)
    pre2_ok = mse(v_all[:, 1], x_all[:, 1], correct_mask)
    post1_ok = mse(estimates[:, 0], x_all[:, 0], correct_mask)
    post2_ok = mse(estimates[:, 1], x_all[:, 1], correct_mask)

    predicted_oracle = estimator.predicted_error(
        oracle, config.distortion1, config.distortion2
    )
    predicted_used = (weights.predicted1, weights.predicted2)

    solve1 = np.linalg.solve(
        np.array(
            [
                [stats_used.var1 + config.distortion1, stats_used.cov12],
                [stats_used.cov12, stats_used.var2 + config.distortion2],
            ]
        ),
        np.array([stats_used.var1, stats_used.cov12]),
    )
    direct1 = stats_used.var1 - solve1 @ np.array([stats_used.var1, stats_used.cov12])

    checks = [
        _check(
            "region.sum-consistency",
            abs(spec.h1g2 + spec.h2 - spec.h12) <= 1e-9
            and abs(spec.h2g1 + spec.h1 - spec.h12) <= 1e-9,
            "conditional plus marginal reproduces the joint on both orders",
        ),
        _check(
            "swcodec.decoded-bins-consistent",
            consistent_all,
            "every decoded pair re-hashes to the received bin pair",
        ),
        _check(
            "estimator.closed-form-matches-solver",
            abs(weights.predicted1 - float(direct1)) <= 1e-10 * max(1.0, abs(direct1)),
            f"closed form {weights.predicted1!r} vs solver {float(direct1)!r}",
        ),
        _check(
            "estimator.error-within-budget",
            predicted_used[0] <= config.distortion1 * (1.0 + 1e-9)
            and predicted_used[1] <= config.distortion2 * (1.0 + 1e-9),
            f"predicted ({predicted_used[0]:.6f}, {predicted_used[1]:.6f}) vs budgets "
            f"({config.distortion1:.6f}, {config.distortion2:.6f})",
        ),
    ]

    payload = {
        "mode": "pipeline",
        "config": _config_echo(config),
        "region": _region_dict(spec),
        "constants": _constants_dict(predicted_used[0], predicted_used[1], config),
        "outer_sum_line": {
            "bits": rateregion.outer_sum_line(spec).bits,
            "clamped": rateregion.outer_sum_line(spec).clamped,
        },
        "coding": {
            "alphabet1": 2 * bound1 + 1,
            "alphabet2": 2 * bound2 + 1,
            "rate1": rate1,
            "rate2": rate2,
            "bits1": bits1,
            "bits2": bits2,
            "trials": config.trials,
            "block_length": config.block_length,
            "error_rate": error_rate,
            "tie_rate": tie_rate,
        },
        "distortion": {
            "target1": config.distortion1,
            "target2": config.distortion2,
            "pre1": pre1,
            "pre2": pre2,
            "post1": post1,
            "post2": post2,
            "pre1_correct_only": pre1_ok,
            "pre2_correct_only": pre2_ok,
            "post1_correct_only": post1_ok,
            "post2_correct_only": post2_ok,
        },
        "estimation": {
            "stats_mode": config.stats_mode,
            "oracle_stats": _stats_dict(oracle),
            "recovered_stats": _stats_dict(recovered.stats),
            "recovered_flags": {
                "floored1": recovered.floored1,
                "floored2": recovered.floored2,
                "cross_clamped": recovered.cross_clamped,
            },
            "predicted_oracle": {
                "user1": predicted_oracle[0],
                "user2": predicted_oracle[1],
            },
            "predicted_used": {
                "user1": predicted_used[0],
                "user2": predicted_used[1],
            },
        },
        "checks": checks,
        "seed": config.seed,
        "wall_clock_seconds": None,
    }
    return RunReport(payload=payload)
