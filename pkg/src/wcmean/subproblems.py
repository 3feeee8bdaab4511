"""Worst-case error subproblems for a fixed estimator.

Two relaxations of the worst case over data balls are computed from the
loss matrix M(a):

* ``sdp2_value``: n * lambda_max(M), exact for the ball ||x|| <= sqrt(n),
  via power iteration on the factored M.
* ``sdp_inf_solve``: max <M, X> over PSD X with unit diagonal, an upper
  bound within pi/2 of the worst case over the cube |x_j| <= 1.  Solved in
  low-rank factored form X = V^T V by coordinate ascent over the unit-norm
  columns of V, with sign rounding recovering a cube adversary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    L2,
    LINF,
    DataValues,
    LossMatrix,
    SampleTargetDistribution,
    SemilinearEstimator,
    build_loss_matrix,
)


class SdpConvergenceError(RuntimeError):
    """Coordinate ascent hit its sweep cap; carries the best assignment found."""

    def __init__(self, assignment: "PsdAssignment"):
        super().__init__(
            f"sdp solver did not converge; best objective {assignment.objective:.6g}"
        )
        self.assignment = assignment


@dataclass(frozen=True)
class EigenResult:
    """Approximate top eigenpair: unit vector, its Rayleigh quotient, iterations used."""

    vector: np.ndarray
    rayleigh: float
    iterations: int


@dataclass(frozen=True)
class PsdAssignment:
    """Feasible SDP point X = factor^T factor with unit-norm columns (unit diagonal)."""

    factor: np.ndarray  # (rank, n), columns are the vector assignments
    objective: float
    rank: int

    def dense(self) -> np.ndarray:
        return self.factor.T @ self.factor


def top_eigen(M: LossMatrix, eps: float, rng: np.random.Generator) -> EigenResult:
    """Block power iteration through the factor; each step is O(mn).

    Iterates a 4-column random subspace (QR-orthonormalized each step)
    and reads off the top Rayleigh-Ritz pair, capping at
    ceil(40 ln(n+10) / eps) iterations and exiting early once the top
    Ritz value's relative change over 10 iterations drops below eps/100.
    A single vector can stall on the second eigenvector when the gap is
    small and the start is unlucky; the block's Ritz value keeps growing
    toward lambda_max as long as any column sees the top eigenvector, so
    the plateau test is safe.  The Ritz value is nondecreasing for PSD
    matrices, so the last iterate is returned.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not np.all(np.isfinite(M.rows)):
        raise ValueError("loss matrix contains non-finite entries")
    n = M.dim
    if M.trace == 0.0:
        v = np.zeros(n)
        v[0] = 1.0
        return EigenResult(v, 0.0, 0)
    block = min(4, n)
    V = rng.standard_normal((n, block))
    V, _ = np.linalg.qr(V)
    cap = math.ceil(40.0 * math.log(n + 10) / eps)
    rayleighs: list[float] = []
    used = 0
    vector = V[:, 0]
    ray = 0.0
    for it in range(1, cap + 1):
        used = it
        Y = M.rows @ V  # (m, block)
        small = Y.T @ Y  # V^T M V
        vals, vecs = np.linalg.eigh(small)
        ray = float(vals[-1])
        vector = V @ vecs[:, -1]
        rayleighs.append(ray)
        Z = M.rows.T @ Y
        if not np.any(Z):
            break  # the whole block landed in the kernel
        V, _ = np.linalg.qr(Z)
        if it >= 11:
            prev = rayleighs[-11]
            if abs(ray - prev) < (eps / 100.0) * max(ray, 1e-300):
                break
    y = M.rows @ vector
    return EigenResult(vector, float(y @ y), used)


def sdp2_value(
    est: SemilinearEstimator,
    dist: SampleTargetDistribution,
    eps: float,
    rng: np.random.Generator | None = None,
) -> tuple[float, DataValues]:
    """Worst-case error over ||x|| <= sqrt(n): n * lambda_max(M(a)), with adversary."""
    if rng is None:
        rng = np.random.default_rng(0)
    M = build_loss_matrix(est, dist)
    eig = top_eigen(M, eps, rng)
    value = dist.n * eig.rayleigh
    adversary = DataValues(math.sqrt(dist.n) * eig.vector, L2)
    return value, adversary


def sdp_inf_solve(
    M: LossMatrix,
    eps: float,
    rng: np.random.Generator,
    max_sweeps: int = 1000,
) -> PsdAssignment:
    """Maximize <M, X> over PSD X with unit diagonal, in factored form.

    X = V^T V with V of rank ceil(sqrt(2n)) + 1 and unit-norm columns.
    Each coordinate step replaces column j with the normalized sum
    sum_{l != j} M_jl V_l (keeping the column when the sum vanishes), which
    maximizes the objective in that column exactly, so sweeps are monotone.
    Converged when a full sweep improves the objective by at most
    eps/20 * max(objective, trace M).  Raises SdpConvergenceError carrying
    the best assignment if the sweep cap is hit first.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not np.all(np.isfinite(M.rows)):
        raise ValueError("loss matrix contains non-finite entries")
    n = M.dim
    dense = M.dense
    trace = M.trace
    rank = math.ceil(math.sqrt(2 * n)) + 1
    V = rng.standard_normal((rank, n))
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0.0] = 1.0
    V /= norms
    diag = np.diag(dense).copy()

    def objective() -> float:
        return float(np.sum((V @ dense) * V))

    obj = objective()
    for _ in range(max_sweeps):
        for j in range(n):
            d = V @ dense[:, j] - diag[j] * V[:, j]
            nd = float(np.linalg.norm(d))
            if nd > 1e-15:
                V[:, j] = d / nd
        new_obj = objective()
        if new_obj - obj <= (eps / 20.0) * max(new_obj, trace):
            return PsdAssignment(V.copy(), new_obj, rank)
        obj = new_obj
    raise SdpConvergenceError(PsdAssignment(V.copy(), obj, rank))


def round_sign(
    assignment: PsdAssignment,
    M: LossMatrix,
    trials: int,
    rng: np.random.Generator,
) -> DataValues:
    """Gaussian sign rounding of an SDP point to a cube vertex.

    Each trial draws g ~ N(0, I_rank) and takes x = sign(V^T g) with
    sign(0) := +1; the best x^T M x over the trials is kept.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    best_val = -math.inf
    best_x: np.ndarray | None = None
    for _ in range(trials):
        g = rng.standard_normal(assignment.rank)
        x = np.where(assignment.factor.T @ g >= 0.0, 1.0, -1.0)
        val = M.quad(x)
        if val > best_val:
            best_val = val
            best_x = x
    assert best_x is not None
    return DataValues(best_x, LINF)
