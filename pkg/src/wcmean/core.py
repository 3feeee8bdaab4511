"""Core types for worst-case mean estimation under randomized data collection.

A collection process over a population of size ``n`` is a uniform
distribution over ``m`` index-set pairs: a *sample* set whose data values
are observed and a *target* set whose mean is to be estimated.  A
semilinear estimator answers pair ``i`` with the inner product of a weight
vector supported on the sample set and the data vector.  Its squared error
averaged over pairs is the quadratic form of a PSD loss matrix assembled
from the per-pair residuals between estimator weights and the
target-averaging vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np

LINF = "linf"
L2 = "l2"

# slack on the norm-ball membership checks
_REGIME_TOL = 1e-12


class SchemaError(ValueError):
    """Invalid on-disk distribution/estimator data; ``code`` names the violation."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class SupportError(ValueError):
    """An estimator weight was placed outside the pair's sample set."""


@dataclass(frozen=True)
class IndexPair:
    """One (sample, target) pair, both sorted tuples of 0-based population indices."""

    sample: tuple[int, ...]
    target: tuple[int, ...]


@dataclass(frozen=True)
class SampleTargetDistribution:
    """Uniform distribution over ``m`` (sample, target) pairs on ``[0, n)``.

    Target sets must be nonempty; sample sets may be empty (nothing was
    observed for that pair).  Pairs may repeat: the object is a multiset.
    """

    n: int
    pairs: tuple[IndexPair, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"population size must be >= 1, got {self.n}")
        if len(self.pairs) < 1:
            raise ValueError("at least one (sample, target) pair is required")
        canonical = []
        for i, pair in enumerate(self.pairs):
            sample = tuple(sorted(set(int(j) for j in pair.sample)))
            target = tuple(sorted(set(int(j) for j in pair.target)))
            if not target:
                raise ValueError(f"pair {i}: target set is empty")
            for j in sample + target:
                if not 0 <= j < self.n:
                    raise ValueError(f"pair {i}: index {j} outside [0, {self.n})")
            canonical.append(IndexPair(sample, target))
        object.__setattr__(self, "pairs", tuple(canonical))

    @property
    def m(self) -> int:
        return len(self.pairs)

    @cached_property
    def sample_mask(self) -> np.ndarray:
        """(m, n) boolean mask of the sample sets."""
        mask = np.zeros((self.m, self.n), dtype=bool)
        for i, pair in enumerate(self.pairs):
            mask[i, list(pair.sample)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def target_rows(self) -> np.ndarray:
        """(m, n) matrix whose row i is the target-averaging vector b_i."""
        rows = np.zeros((self.m, self.n))
        for i, pair in enumerate(self.pairs):
            rows[i, list(pair.target)] = 1.0 / len(pair.target)
        rows.setflags(write=False)
        return rows


@dataclass(frozen=True)
class SemilinearEstimator:
    """Per-pair weight vectors, stored sparsely as index -> weight maps.

    Entry ``weights[i]`` answers pair ``i``; every key must lie in the
    pair's sample set of the distribution it is used with.
    """

    n: int
    weights: tuple[dict[int, float], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"population size must be >= 1, got {self.n}")
        if len(self.weights) < 1:
            raise ValueError("at least one weight vector is required")
        for i, w in enumerate(self.weights):
            for j, val in w.items():
                if not 0 <= int(j) < self.n:
                    raise ValueError(f"weights[{i}]: index {j} outside [0, {self.n})")
                if not math.isfinite(val):
                    raise ValueError(f"weights[{i}][{j}] is not finite")

    @property
    def m(self) -> int:
        return len(self.weights)

    def dense(self) -> np.ndarray:
        """(m, n) dense weight matrix."""
        arr = np.zeros((self.m, self.n))
        for i, w in enumerate(self.weights):
            for j, val in w.items():
                arr[i, j] = val
        return arr


@dataclass(frozen=True)
class DataValues:
    """A data vector, optionally certified to lie in a norm ball.

    ``norm_regime`` is "linf" (max |x_j| <= 1), "l2" (||x|| <= sqrt(n)) or
    None when no ball membership is asserted (arbitrary fixed datasets).
    """

    values: np.ndarray
    norm_regime: str | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("data values must be a nonempty 1-D vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("data values must be finite")
        if self.norm_regime == LINF:
            top = float(np.max(np.abs(vals)))
            if top > 1.0 + _REGIME_TOL:
                raise ValueError(f"linf regime requires max|x_j| <= 1, got {top}")
        elif self.norm_regime == L2:
            bound = math.sqrt(vals.size) * (1.0 + _REGIME_TOL)
            nrm = float(np.linalg.norm(vals))
            if nrm > bound:
                raise ValueError(f"l2 regime requires ||x|| <= sqrt(n), got {nrm}")
        elif self.norm_regime is not None:
            raise ValueError(f"unknown norm regime {self.norm_regime!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass
class LossMatrix:
    """PSD loss matrix in factored form: M = rows^T rows.

    Row i is the residual (a_i - b_i) / sqrt(m), so <M, xx^T> is the
    mean squared estimation error on data x.
    """

    dim: int
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != self.dim:
            raise ValueError(f"rows must be (m, {self.dim}), got {rows.shape}")
        self.rows = rows

    @cached_property
    def dense(self) -> np.ndarray:
        """Materialized (n, n) matrix."""
        return self.rows.T @ self.rows

    @property
    def trace(self) -> float:
        return float(np.sum(self.rows * self.rows))

    def matvec(self, w: np.ndarray) -> np.ndarray:
        """M @ w computed through the factor in O(mn)."""
        return self.rows.T @ (self.rows @ w)

    def quad(self, x: np.ndarray) -> float:
        """x^T M x, nonnegative by construction."""
        y = self.rows @ np.asarray(x, dtype=float)
        return float(y @ y)


def target_vector(dist: SampleTargetDistribution, i: int) -> dict[int, float]:
    """Sparse target-averaging vector b_i: 1/|target| on the target set."""
    pair = dist.pairs[i]
    share = 1.0 / len(pair.target)
    return {j: share for j in pair.target}


def validate_estimator(est: SemilinearEstimator, dist: SampleTargetDistribution) -> None:
    """Check n/m consistency and that every weight lies in its sample set."""
    if est.n != dist.n:
        raise ValueError(f"population size mismatch: estimator {est.n}, distribution {dist.n}")
    if est.m != dist.m:
        raise ValueError(f"pair count mismatch: estimator {est.m}, distribution {dist.m}")
    for i, w in enumerate(est.weights):
        sample = set(dist.pairs[i].sample)
        for j in w:
            if j not in sample:
                raise SupportError(f"weights[{i}]: index {j} outside the sample set")


def build_loss_matrix(est: SemilinearEstimator, dist: SampleTargetDistribution) -> LossMatrix:
    """Assemble M(a) = (1/m) sum_i (a_i - b_i)(a_i - b_i)^T in factored form."""
    validate_estimator(est, dist)
    resid = est.dense() - dist.target_rows
    return LossMatrix(dist.n, resid / math.sqrt(dist.m))


def fixed_data_error(
    est: SemilinearEstimator,
    dist: SampleTargetDistribution,
    x: DataValues | np.ndarray,
) -> float:
    """Mean squared error on a fixed data vector: (1/m) sum_i <a_i - b_i, x>^2."""
    vals = x.values if isinstance(x, DataValues) else np.asarray(x, dtype=float)
    if vals.size != dist.n:
        raise ValueError(f"data vector has size {vals.size}, expected {dist.n}")
    return build_loss_matrix(est, dist).quad(vals)


def evaluate_pointwise(
    est: SemilinearEstimator, i: int, observed: Mapping[int, float]
) -> float:
    """Estimate for pair i given observed values keyed by population index."""
    total = 0.0
    for j, weight in est.weights[i].items():
        if j not in observed:
            raise ValueError(f"missing observation for supported index {j} in pair {i}")
        total += weight * observed[j]
    return total


# ---------------------------------------------------------------------------
# JSON formats.  Distribution files: {"n": int, "pairs": [{"A": [...], "B": [...]}]}
# Estimator files: {"n": int, "weights": [[[index, value], ...], ...]}
# ---------------------------------------------------------------------------


def _check_index_list(raw, code_prefix: str, n: int, where: str) -> tuple[int, ...]:
    if not isinstance(raw, list) or not all(isinstance(j, int) and not isinstance(j, bool) for j in raw):
        raise SchemaError("bad_schema", f"{where}: expected a list of integers")
    for j in raw:
        if not 0 <= j < n:
            raise SchemaError("index_out_of_range", f"{where}: index {j} outside [0, {n})")
    for prev, cur in zip(raw, raw[1:]):
        if cur == prev:
            raise SchemaError("duplicate_indices", f"{where}: duplicate index {cur}")
        if cur < prev:
            raise SchemaError("unsorted_indices", f"{where}: indices not sorted")
    return tuple(raw)


def distribution_from_dict(data) -> SampleTargetDistribution:
    if not isinstance(data, dict) or "n" not in data or "pairs" not in data:
        raise SchemaError("bad_schema", 'distribution JSON must have keys "n" and "pairs"')
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("bad_schema", f'"n" must be a positive integer, got {n!r}')
    raw_pairs = data["pairs"]
    if not isinstance(raw_pairs, list) or not raw_pairs:
        raise SchemaError("bad_schema", '"pairs" must be a nonempty list')
    pairs = []
    for i, entry in enumerate(raw_pairs):
        if not isinstance(entry, dict) or "A" not in entry or "B" not in entry:
            raise SchemaError("bad_schema", f'pair {i}: expected keys "A" and "B"')
        sample = _check_index_list(entry["A"], "A", n, f'pair {i} "A"')
        target = _check_index_list(entry["B"], "B", n, f'pair {i} "B"')
        if not target:
            raise SchemaError("empty_target", f'pair {i}: "B" must be nonempty')
        pairs.append(IndexPair(sample, target))
    return SampleTargetDistribution(n, tuple(pairs))


def distribution_to_dict(dist: SampleTargetDistribution) -> dict:
    return {
        "n": dist.n,
        "pairs": [{"A": list(p.sample), "B": list(p.target)} for p in dist.pairs],
    }


def estimator_from_dict(data) -> SemilinearEstimator:
    if not isinstance(data, dict) or "n" not in data or "weights" not in data:
        raise SchemaError("bad_schema", 'estimator JSON must have keys "n" and "weights"')
    n = data["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("bad_schema", f'"n" must be a positive integer, got {n!r}')
    raw = data["weights"]
    if not isinstance(raw, list) or not raw:
        raise SchemaError("bad_schema", '"weights" must be a nonempty list')
    weights = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, list):
            raise SchemaError("bad_schema", f"weights[{i}]: expected a list of [index, value]")
        w: dict[int, float] = {}
        for item in entry:
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not isinstance(item[0], int)
                or isinstance(item[0], bool)
                or not isinstance(item[1], (int, float))
                or isinstance(item[1], bool)
            ):
                raise SchemaError("bad_schema", f"weights[{i}]: entries must be [index, value]")
            j, val = item[0], float(item[1])
            if not 0 <= j < n:
                raise SchemaError("index_out_of_range", f"weights[{i}]: index {j} outside [0, {n})")
            if j in w:
                raise SchemaError("duplicate_indices", f"weights[{i}]: duplicate index {j}")
            if not math.isfinite(val):
                raise SchemaError("bad_schema", f"weights[{i}][{j}] is not finite")
            w[j] = val
        weights.append(w)
    return SemilinearEstimator(n, tuple(weights))


def estimator_to_dict(est: SemilinearEstimator) -> dict:
    return {
        "n": est.n,
        "weights": [[[j, float(w[j])] for j in sorted(w)] for w in est.weights],
    }


def _load_json(path: str | Path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError("unreadable", f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("malformed_json", f"{path}: {exc}") from exc


def load_distribution_file(path: str | Path) -> SampleTargetDistribution:
    return distribution_from_dict(_load_json(path))


def save_distribution_file(dist: SampleTargetDistribution, path: str | Path) -> None:
    Path(path).write_text(json.dumps(distribution_to_dict(dist)) + "\n")


def load_estimator_file(path: str | Path) -> SemilinearEstimator:
    return estimator_from_dict(_load_json(path))


def save_estimator_file(est: SemilinearEstimator, path: str | Path) -> None:
    Path(path).write_text(json.dumps(estimator_to_dict(est)) + "\n")


def estimator_from_dense(
    dist: SampleTargetDistribution, dense: np.ndarray
) -> SemilinearEstimator:
    """Wrap a dense (m, n) weight array, keeping every sample-set coordinate."""
    dense = np.asarray(dense, dtype=float)
    if dense.shape != (dist.m, dist.n):
        raise ValueError(f"expected shape {(dist.m, dist.n)}, got {dense.shape}")
    weights = tuple(
        {j: float(dense[i, j]) for j in pair.sample} for i, pair in enumerate(dist.pairs)
    )
    return SemilinearEstimator(dist.n, weights)
