"""Distributed compression of correlated index streams by random binning.

Each user hashes its length-n symbol sequence into a bin of a keyed hash
family; the joint decoder scans the two bins for the pair of sequences
with the smallest empirical joint entropy. No statistics of the pair law
enter the encoder or the decoder, only the bin widths do, which is what
makes the scheme universal: it succeeds whenever the rates clear the
conditional-entropy floors of the true law by a margin.

The decoder enumerates candidates in lexicographic order and breaks exact
entropy ties toward the lexicographically smallest pair, so decoding is a
pure function of (bins, key, widths).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, RateInfeasibleError, SearchCapError
from .rng import derive_seed, mix64, mix64_array, stream

__all__ = [
    "PairLaw",
    "BinningCode",
    "assign_bin",
    "assign_bin_array",
    "empirical_joint_entropy",
    "empirical_conditional_entropy",
    "DecodeOutcome",
    "mje_decode",
    "derive_rates",
    "bits_for_rates",
    "SwTrialResult",
    "sw_trial",
    "experiment_trial",
    "SwExperimentReport",
    "sw_error_experiment",
    "pair_entropy_table",
]

_USER_SALT = {1: 0x9D5C7A1B3E64F821, 2: 0x1F83D9ABFB41BD6B}


@dataclass(frozen=True)
class PairLaw:
    """A joint law over two finite symbol alphabets, as a matrix."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise DomainError("pair law needs a 2D probability matrix")
        if np.any(probs < 0.0):
            raise DomainError("pair law probabilities must be nonnegative")
        total = float(probs.sum())
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise DomainError(f"pair law must sum to 1, got {total}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "PairLaw":
        """Build a law from a nearly-normalized matrix, absorbing the tiny
        negative and off-unity residue that grid quadrature leaves behind."""
        matrix = np.asarray(matrix, dtype=np.float64)
        floor = -1e-9 * max(float(matrix.max(initial=0.0)), 1.0)
        if np.any(matrix < floor):
            raise DomainError("matrix has substantially negative entries")
        clipped = np.clip(matrix, 0.0, None)
        total = float(clipped.sum())
        if total <= 0.0:
            raise DomainError("matrix has no mass")
        return cls(probs=clipped / total)

    @property
    def k1(self) -> int:
        return self.probs.shape[0]

    @property
    def k2(self) -> int:
        return self.probs.shape[1]

    def joint_entropy(self) -> float:
        flat = self.probs.ravel()
        positive = flat[flat > 0.0]
        return float(-(positive * np.log2(positive)).sum())

    def entropy1(self) -> float:
        marg = self.probs.sum(axis=1)
        positive = marg[marg > 0.0]
        return float(-(positive * np.log2(positive)).sum())

    def entropy2(self) -> float:
        marg = self.probs.sum(axis=0)
        positive = marg[marg > 0.0]
        return float(-(positive * np.log2(positive)).sum())

    def cond1_given_2(self) -> float:
        return self.joint_entropy() - self.entropy2()

    def cond2_given_1(self) -> float:
        return self.joint_entropy() - self.entropy1()

    def sample(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        flat = self.probs.ravel()
        ids = rng.choice(flat.size, size=count, p=flat / flat.sum())
        return (ids // self.k2).astype(np.int64), (ids % self.k2).astype(np.int64)


@dataclass(frozen=True)
class BinningCode:
    """Bin widths and hash key for one block length.

    ``injective=True`` replaces the keyed hash with per-symbol bit packing,
    the lossless special case used to isolate downstream stages.
    """

    block_length: int
    k1: int
    k2: int
    bits1: int
    bits2: int
    key: int
    injective: bool = False

    def __post_init__(self) -> None:
        if self.block_length < 1:
            raise DomainError("block_length must be at least 1")
        if self.k1 < 2 or self.k2 < 2:
            raise DomainError("alphabets need at least two symbols")
        for bits, k in ((self.bits1, self.k1), (self.bits2, self.k2)):
            width = self.block_length * math.ceil(math.log2(k))
            if self.injective:
                if bits != width:
                    raise DomainError(
                        f"injective mode requires exactly {width} bits, got {bits}"
                    )
                if width > 62:
                    raise DomainError("packed sequence exceeds 62 bits")
            else:
                if not 0 <= bits <= min(width, 62):
                    raise DomainError(
                        f"bin width {bits} outside [0, {min(width, 62)}]"
                    )

    def symbol_bits(self, user: int) -> int:
        k = self.k1 if user == 1 else self.k2
        return math.ceil(math.log2(k))


def _check_symbols(seqs: np.ndarray, k: int) -> np.ndarray:
    seqs = np.asarray(seqs)
    if np.any(seqs < 0) or np.any(seqs >= k):
        raise DomainError(f"symbols must lie in [0, {k})")
    return seqs.astype(np.uint64)


def _pack_rows(seqs: np.ndarray, width: int) -> np.ndarray:
    packed = np.zeros(seqs.shape[0], dtype=np.uint64)
    for col in range(seqs.shape[1]):
        packed = (packed << np.uint64(width)) | seqs[:, col]
    return packed


def assign_bin_array(seqs: np.ndarray, user: int, code: BinningCode) -> np.ndarray:
    """Bin index of every row of ``seqs`` (shape (m, block_length))."""
    if user not in (1, 2):
        raise DomainError(f"user must be 1 or 2, got {user}")
    k = code.k1 if user == 1 else code.k2
    bits = code.bits1 if user == 1 else code.bits2
    seqs = _check_symbols(seqs, k)
    if seqs.ndim != 2 or seqs.shape[1] != code.block_length:
        raise DomainError(
            f"sequences must have shape (m, {code.block_length}), got {seqs.shape}"
        )
    if code.injective:
        return _pack_rows(seqs, code.symbol_bits(user))
    state = mix64(mix64(code.key) ^ _USER_SALT[user])
    h = np.full(seqs.shape[0], state, dtype=np.uint64)
    for col in range(seqs.shape[1]):
        h = mix64_array(h ^ (seqs[:, col] + np.uint64(1)))
    if bits == 0:
        return np.zeros(seqs.shape[0], dtype=np.uint64)
    return h >> np.uint64(64 - bits)


def assign_bin(seq: np.ndarray, user: int, code: BinningCode) -> int:
    return int(assign_bin_array(np.asarray(seq).reshape(1, -1), user, code)[0])


def _entropy_from_counts(counts: np.ndarray, n: int) -> np.ndarray:
    """Entropy in bits of count vectors along the last axis.

    Counts are sorted descending before the log-sum so every permutation of
    the same count multiset produces the identical float, which makes exact
    tie detection meaningful.
    """
    ordered = -np.sort(-counts, axis=-1)
    p = ordered / float(n)
    terms = np.where(ordered > 0, p * np.log2(np.where(ordered > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def empirical_joint_entropy(y1: np.ndarray, y2: np.ndarray, k1: int, k2: int) -> float:
    """Entropy of the empirical pair type of two aligned symbol sequences."""
    y1 = _check_symbols(y1, k1)
    y2 = _check_symbols(y2, k2)
    if y1.shape != y2.shape or y1.ndim != 1:
        raise DomainError("sequences must be 1D and aligned")
    ids = (y1 * np.uint64(k2) + y2).astype(np.int64)
    counts = np.bincount(ids, minlength=k1 * k2)
    return float(_entropy_from_counts(counts[None, :], y1.size)[0])


def empirical_conditional_entropy(
    y1: np.ndarray, y2: np.ndarray, k1: int, k2: int
) -> float:
    """Empirical H(first | second), computed directly from grouped counts
    rather than as a difference of entropies."""
    y1 = _check_symbols(y1, k1)
    y2 = _check_symbols(y2, k2)
    ids = (y1 * np.uint64(k2) + y2).astype(np.int64)
    joint = np.bincount(ids, minlength=k1 * k2).reshape(k1, k2).astype(np.float64)
    col = joint.sum(axis=0)
    total = 0.0
    for j in range(k2):
        if col[j] <= 0.0:
            continue
        pj = joint[:, j] / col[j]
        positive = pj[pj > 0.0]
        total += (col[j] / y1.size) * float(-(positive * np.log2(positive)).sum())
    return total


@lru_cache(maxsize=8)
def _all_sequences(k: int, n: int) -> np.ndarray:
    if k**n > 1 << 24:
        raise SearchCapError(f"cannot materialize {k}**{n} sequences")
    ranks = np.arange(k**n, dtype=np.int64)
    digits = np.empty((k**n, n), dtype=np.int64)
    for col in range(n - 1, -1, -1):
        digits[:, col] = ranks % k
        ranks //= k
    return digits


def _bin_candidates(
    code: BinningCode, user: int, target: int, enumeration_cap: int
) -> np.ndarray:
    """All sequences hashing to ``target``, in lexicographic order."""
    k = code.k1 if user == 1 else code.k2
    n = code.block_length
    if code.injective:
        width = code.symbol_bits(user)
        symbols = np.empty(n, dtype=np.int64)
        value = int(target)
        for col in range(n - 1, -1, -1):
            symbols[col] = value & ((1 << width) - 1)
            value >>= width
        if np.any(symbols >= k):
            raise DomainError(f"bin {target} does not decode to valid symbols")
        return symbols.reshape(1, n)
    total = k**n
    if total > enumeration_cap:
        raise SearchCapError(
            f"bin scan needs {total} sequence evaluations, beyond the cap of "
            f"{enumeration_cap}"
        )
    matches: list[np.ndarray] = []
    chunk = 1 << 20
    powers = (k ** np.arange(n - 1, -1, -1, dtype=np.int64)).astype(np.int64)
    for start in range(0, total, chunk):
        ranks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (ranks[:, None] // powers[None, :]) % k
        bins = assign_bin_array(digits, user, code)
        hit = digits[bins == np.uint64(target)]
        if hit.shape[0]:
            matches.append(hit)
    if not matches:
        return np.empty((0, n), dtype=np.int64)
    return np.concatenate(matches, axis=0)


def _pair_entropy_block(
    cand1: np.ndarray, cand2: np.ndarray, k1: int, k2: int
) -> np.ndarray:
    """Empirical joint entropy of every candidate pair, shape (a, b)."""
    a, n = cand1.shape
    b = cand2.shape[0]
    alphabet = k1 * k2
    out = np.empty((a, b))
    chunk = max(1, int(2**22 / max(1, b * alphabet)))
    for start in range(0, a, chunk):
        stop = min(start + chunk, a)
        ids = cand1[start:stop, None, :] * k2 + cand2[None, :, :]
        rows = (stop - start) * b
        offsets = np.arange(rows, dtype=np.int64)[:, None] * alphabet
        flat = ids.reshape(rows, n) + offsets
        counts = np.bincount(flat.ravel(), minlength=rows * alphabet)
        counts = counts.reshape(stop - start, b, alphabet)
        out[start:stop] = _entropy_from_counts(counts, n)
    return out


def pair_entropy_table(k1: int, k2: int, n: int) -> np.ndarray:
    """Joint empirical entropy of every (sequence, sequence) pair.

    Row r, column c address the r-th and c-th sequences in lexicographic
    order. Used by exhaustive decoder audits at small sizes.
    """
    if (k1**n) * (k2**n) > 1 << 26:
        raise SearchCapError("full pair table too large")
    return _pair_entropy_block(_all_sequences(k1, n), _all_sequences(k2, n), k1, k2)


@dataclass(frozen=True)
class DecodeOutcome:
    """Decoder output plus bookkeeping about the search."""

    first: np.ndarray
    second: np.ndarray
    entropy: float
    tie: bool
    evaluations: int


def mje_decode(
    code: BinningCode,
    bin1: int,
    bin2: int,
    enumeration_cap: int = 1 << 28,
    pair_eval_cap: int = 10**8,
) -> DecodeOutcome:
    """Minimum-joint-entropy decoding of a received bin pair.

    Scans every bin-consistent candidate pair, returns the entropy
    minimizer, and flags whether the minimum was attained more than once
    (the winner is then the lexicographically smallest pair).
    """
    cand1 = _bin_candidates(code, 1, bin1, enumeration_cap)
    cand2 = _bin_candidates(code, 2, bin2, enumeration_cap)
    if cand1.shape[0] == 0 or cand2.shape[0] == 0:
        raise DomainError("received bins are empty; they cannot come from the encoder")
    pairs = cand1.shape[0] * cand2.shape[0]
    if pairs > pair_eval_cap:
        raise SearchCapError(
            f"decoding needs {pairs} pair evaluations, beyond the cap of {pair_eval_cap}"
        )
    table = _pair_entropy_block(cand1, cand2, code.k1, code.k2)
    flat_index = int(np.argmin(table))
    best = float(table.ravel()[flat_index])
    ties = int((table == best).sum())
    row, col = divmod(flat_index, cand2.shape[0])
    return DecodeOutcome(
        first=cand1[row].copy(),
        second=cand2[col].copy(),
        entropy=best,
        tie=ties > 1,
        evaluations=pairs,
    )


def derive_rates(
    law: PairLaw, margin1: float, margin2: float
) -> tuple[float, float]:
    """Per-sample rates: conditional floors plus margins, lifted so the sum
    clears the joint floor by at least the larger margin."""
    if margin1 < 0.0 or margin2 < 0.0:
        raise DomainError("margins must be nonnegative")
    r1 = law.cond1_given_2() + margin1
    r2 = law.cond2_given_1() + margin2
    floor = law.joint_entropy() + max(margin1, margin2)
    deficit = floor - (r1 + r2)
    if deficit > 0.0:
        r1 += 0.5 * deficit
        r2 += 0.5 * deficit
    return r1, r2


def bits_for_rates(
    block_length: int, rate1: float, rate2: float, k1: int, k2: int
) -> tuple[int, int]:
    """Integer bin widths for the requested per-sample rates."""
    out = []
    for rate, k in ((rate1, k1), (rate2, k2)):
        if rate < 0.0:
            raise DomainError(f"rates must be nonnegative, got {rate}")
        bits = max(0, math.ceil(block_length * rate - 1e-9))
        width = block_length * math.ceil(math.log2(k))
        if bits > width:
            raise RateInfeasibleError(
                f"rate {rate} needs {bits} bits but lossless coding uses only {width}"
            )
        out.append(bits)
    return out[0], out[1]


@dataclass(frozen=True)
class SwTrialResult:
    code: BinningCode
    y1: np.ndarray
    y2: np.ndarray
    bin1: int
    bin2: int
    outcome: DecodeOutcome
    error: bool


def sw_trial(
    law: PairLaw,
    code: BinningCode,
    rng: np.random.Generator,
    enumeration_cap: int = 1 << 28,
    pair_eval_cap: int = 10**8,
) -> SwTrialResult:
    """One encode-decode round trip on a fresh block from the law."""
    y1, y2 = law.sample(code.block_length, rng)
    bin1 = assign_bin(y1, 1, code)
    bin2 = assign_bin(y2, 2, code)
    outcome = mje_decode(
        code, bin1, bin2, enumeration_cap=enumeration_cap, pair_eval_cap=pair_eval_cap
    )
    error = bool(np.any(outcome.first != y1) or np.any(outcome.second != y2))
    return SwTrialResult(
        code=code, y1=y1, y2=y2, bin1=bin1, bin2=bin2, outcome=outcome, error=error
    )


def experiment_trial(
    law: PairLaw,
    block_length: int,
    bits1: int,
    bits2: int,
    seed: int,
    index: int,
    enumeration_cap: int = 1 << 28,
    pair_eval_cap: int = 10**8,
) -> SwTrialResult:
    """The trial that :func:`sw_error_experiment` runs at a given index,
    exposed so audits can replay any trial bit for bit."""
    code = BinningCode(
        block_length=block_length,
        k1=law.k1,
        k2=law.k2,
        bits1=bits1,
        bits2=bits2,
        key=derive_seed(seed, "binning-key", index),
    )
    return sw_trial(
        law,
        code,
        stream(seed, "sw-block", index),
        enumeration_cap=enumeration_cap,
        pair_eval_cap=pair_eval_cap,
    )


@dataclass(frozen=True)
class SwExperimentReport:
    block_length: int
    trials: int
    bits1: int
    bits2: int
    rate1: float
    rate2: float
    cond1_given_2: float
    cond2_given_1: float
    joint_entropy: float
    error_rate: float
    tie_rate: float
    mean_evaluations: float


def sw_error_experiment(
    law: PairLaw,
    block_length: int,
    margin1: float,
    margin2: float,
    trials: int,
    seed: int,
    threads: int = 1,
    explicit_bits: tuple[int, int] | None = None,
    enumeration_cap: int = 1 << 28,
    pair_eval_cap: int = 10**8,
) -> SwExperimentReport:
    """Monte Carlo block error rate of the binning scheme on a known law.

    Each trial draws its own hash key and source block from seed streams
    indexed by trial number, so the report is identical for any thread
    count. ``explicit_bits`` overrides the margin-derived widths, which is
    how starvation (rates under the floors) is exercised.
    """
    if trials < 1:
        raise DomainError("at least one trial is required")
    rate1, rate2 = derive_rates(law, margin1, margin2)
    if explicit_bits is not None:
        bits1, bits2 = explicit_bits
        rate1 = bits1 / block_length
        rate2 = bits2 / block_length
    else:
        bits1, bits2 = bits_for_rates(block_length, rate1, rate2, law.k1, law.k2)

    def one_trial(index: int) -> tuple[bool, bool, int]:
        result = experiment_trial(
            law,
            block_length,
            bits1,
            bits2,
            seed,
            index,
            enumeration_cap=enumeration_cap,
            pair_eval_cap=pair_eval_cap,
        )
        return result.error, result.outcome.tie, result.outcome.evaluations

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one_trial, range(trials)))
    else:
        rows = [one_trial(index) for index in range(trials)]

    errors = sum(1 for err, _, _ in rows if err)
    ties = sum(1 for _, tie, _ in rows if tie)
    evals = sum(ev for _, _, ev in rows)
    return SwExperimentReport(
        block_length=block_length,
        trials=trials,
        bits1=bits1,
        bits2=bits2,
        rate1=rate1,
        rate2=rate2,
        cond1_given_2=law.cond1_given_2(),
        cond2_given_1=law.cond2_given_1(),
        joint_entropy=law.joint_entropy(),
        error_rate=errors / trials,
        tie_rate=ties / trials,
        mean_evaluations=evals / trials,
    )
