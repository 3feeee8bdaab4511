"""Unconditional error lower bounds from non-expanding index subsets.

A subset S certifies expansion factor alpha when an alpha fraction of the
pairs either sample inside S while targeting entirely outside it, or the
reverse.  Any estimator, linear or not, must then suffer worst-case
expected squared error at least alpha/4 on cube-bounded data; the
construction realizing it sets the data to 1 on S and to a median-driven
constant off S.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .core import (
    LINF,
    DataValues,
    SampleTargetDistribution,
    SemilinearEstimator,
    validate_estimator,
)

# estimator black box: pair index plus observed values aligned with the
# pair's sorted sample set
PairEstimator = Callable[[int, np.ndarray], float]

_BRUTE_FORCE_MAX_N = 22
_CHUNK_BITS = 12


class BruteForceSizeError(ValueError):
    """Population too large for exhaustive subset search."""


@dataclass(frozen=True)
class NonExpansionCertificate:
    """Subset S with the two side counts; alpha = (side1 + side2) / m."""

    subset: tuple[int, ...]
    alpha: float
    side1_count: int
    side2_count: int


def check_non_expanding(
    dist: SampleTargetDistribution, subset: Iterable[int]
) -> NonExpansionCertificate:
    """Count pairs qualifying on each side of S.

    Side 1: sample inside S and target disjoint from S.  Side 2: sample
    disjoint from S and target inside S.  No pair can satisfy both (targets
    are nonempty), so alpha is the fraction qualifying on exactly one side.
    """
    S = set(int(j) for j in subset)
    for j in S:
        if not 0 <= j < dist.n:
            raise ValueError(f"subset index {j} outside [0, {dist.n})")
    side1 = 0
    side2 = 0
    for pair in dist.pairs:
        sample = set(pair.sample)
        target = set(pair.target)
        if sample <= S and not (target & S):
            side1 += 1
        elif not (sample & S) and target <= S:
            side2 += 1
    return NonExpansionCertificate(
        tuple(sorted(S)), (side1 + side2) / dist.m, side1, side2
    )


def _mask_to_tuple(mask: int) -> tuple[int, ...]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def best_S_bruteforce(dist: SampleTargetDistribution) -> NonExpansionCertificate:
    """Exhaustive search over all 2^n subsets (n <= 22).

    Ties break to the lexicographically smallest subset as a sorted index
    tuple (the empty set first, then prefix order).
    """
    n = dist.n
    if n > _BRUTE_FORCE_MAX_N:
        raise BruteForceSizeError(
            f"exhaustive search supports n <= {_BRUTE_FORCE_MAX_N}, got {n}"
        )
    a_masks = np.array(
        [sum(1 << j for j in pair.sample) for pair in dist.pairs], dtype=np.uint64
    )
    b_masks = np.array(
        [sum(1 << j for j in pair.target) for pair in dist.pairs], dtype=np.uint64
    )
    zero = np.uint64(0)
    total = 1 << n
    chunk = 1 << min(_CHUNK_BITS, n)
    best_count = -1
    best_key: tuple[int, ...] | None = None
    best_sides = (0, 0)
    for start in range(0, total, chunk):
        S = np.arange(start, min(start + chunk, total), dtype=np.uint64)[:, None]
        side1 = ((S & a_masks) == a_masks) & ((S & b_masks) == zero)
        side2 = ((S & a_masks) == zero) & ((S & b_masks) == b_masks)
        counts = side1.sum(axis=1) + side2.sum(axis=1)
        chunk_max = int(counts.max())
        if chunk_max < best_count:
            continue
        if chunk_max == best_count and best_key == ():
            continue  # nothing is lexicographically smaller than the empty set
        for idx in np.flatnonzero(counts == chunk_max):
            mask = start + int(idx)
            key = _mask_to_tuple(mask)
            if chunk_max > best_count or (best_key is not None and key < best_key):
                best_count = chunk_max
                best_key = key
                best_sides = (int(side1[idx].sum()), int(side2[idx].sum()))
    assert best_key is not None
    return NonExpansionCertificate(
        best_key, best_count / dist.m, best_sides[0], best_sides[1]
    )


def semilinear_callable(
    est: SemilinearEstimator, dist: SampleTargetDistribution
) -> PairEstimator:
    """Wrap a weighting estimator as a black box over observed values."""
    validate_estimator(est, dist)
    vecs = [
        np.array([est.weights[i].get(j, 0.0) for j in pair.sample])
        for i, pair in enumerate(dist.pairs)
    ]

    def f(i: int, observed: np.ndarray) -> float:
        observed = np.asarray(observed, dtype=float)
        if observed.size != vecs[i].size:
            raise ValueError(
                f"pair {i}: expected {vecs[i].size} observed values, got {observed.size}"
            )
        return float(vecs[i] @ observed)

    return f


def adversarial_values(
    dist: SampleTargetDistribution,
    subset: Iterable[int],
    f: PairEstimator,
) -> tuple[DataValues, float]:
    """Data on the cube realizing error >= alpha/4 against the black box f.

    Restricts to the majority qualifying side (swapping S for its
    complement if needed), takes c as the lower median of f on all-ones
    observations there, and sets the data to 1 on S and -sign(c) off S
    (sign(0) := +1).  At least half the restricted pairs then suffer
    squared error >= 1.  Returns the data vector and the achieved average
    error over all pairs.
    """
    cert = check_non_expanding(dist, subset)
    if cert.side1_count + cert.side2_count == 0:
        raise ValueError("subset certifies alpha = 0; no adversarial data exists")
    S = set(cert.subset)
    if cert.side2_count > cert.side1_count:
        S = set(range(dist.n)) - S
    restricted = [
        i
        for i, pair in enumerate(dist.pairs)
        if set(pair.sample) <= S and not (set(pair.target) & S)
    ]
    values = sorted(f(i, np.ones(len(dist.pairs[i].sample))) for i in restricted)
    c = values[(len(values) - 1) // 2]
    sign_c = 1.0 if c >= 0 else -1.0
    x = np.full(dist.n, -sign_c)
    if S:
        x[sorted(S)] = 1.0
    total = 0.0
    for i, pair in enumerate(dist.pairs):
        estimate = f(i, x[list(pair.sample)])
        total += (estimate - float(np.mean(x[list(pair.target)]))) ** 2
    return DataValues(x, LINF), total / dist.m
