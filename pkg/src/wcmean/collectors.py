"""Generators for the three studied data-collection processes."""

from __future__ import annotations

from collections import deque
from typing import Sequence

import numpy as np

from .baselines import GroupStructure
from .core import (
    IndexPair,
    SampleTargetDistribution,
    load_distribution_file,
)


def gen_importance(
    n: int = 50,
    split: int = 25,
    probs: tuple[float, float] = (0.1, 0.5),
    m: int = 2000,
    seed: int = 0,
) -> tuple[SampleTargetDistribution, GroupStructure]:
    """Independent Bernoulli inclusion with two probability groups.

    Indices [0, split) are included with probs[0], the rest with probs[1];
    every target set is the full population.
    """
    if not 0 < split < n:
        raise ValueError(f"split must lie strictly inside (0, {n}), got {split}")
    for p in probs:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"inclusion probabilities must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    inclusion = np.where(np.arange(n) < split, probs[0], probs[1])
    draws = rng.random((m, n)) < inclusion
    full = tuple(range(n))
    pairs = tuple(
        IndexPair(tuple(int(j) for j in np.flatnonzero(row)), full) for row in draws
    )
    gs = GroupStructure(
        groups=(tuple(range(split)), tuple(range(split, n))),
        inclusion_prob=inclusion,
    )
    return SampleTargetDistribution(n, pairs), gs


def _recruitment_lists(
    points: np.ndarray, num_neighbors: int, graph: str
) -> list[np.ndarray]:
    """Per-vertex recruitment candidates on the nearest-neighbor graph."""
    n = len(points)
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    # stable argsort so distance ties break by index, keeping draws reproducible
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :num_neighbors]
    if graph == "directed":
        return [nearest[v] for v in range(n)]
    if graph == "mutual":
        adj = np.zeros((n, n), dtype=bool)
        for v in range(n):
            adj[v, nearest[v]] = True
        adj &= adj.T
        return [np.flatnonzero(adj[v]) for v in range(n)]
    raise ValueError(f"graph must be 'directed' or 'mutual', got {graph!r}")


def _reachable_count(nbrs: list[np.ndarray], start: int) -> int:
    seen = {start}
    stack = [start]
    while stack:
        for u in nbrs[stack.pop()]:
            if int(u) not in seen:
                seen.add(int(u))
                stack.append(int(u))
    return len(seen)


def gen_snowball(
    n: int = 50,
    k: int = 25,
    num_neighbors: int = 5,
    recruit: int = 2,
    m: int = 2000,
    seed: int = 0,
    graph: str = "directed",
    traversal: str = "fifo",
    start: str = "perdraw",
    stall: str = "fresh",
) -> tuple[SampleTargetDistribution, np.ndarray]:
    """Snowball sampling over a random point cloud in the unit square.

    Each draw grows a sample from a uniform start vertex by recruiting
    ``recruit`` distinct uniform picks among each member's neighbors
    (already-included picks are skipped), stopping at exactly k members;
    the target set is the full population.  Returns the distribution and
    the (n, 2) point cloud.

    The recruitment semantics are deliberately parameterized, since
    published snowball experiments rarely pin them down:

    - graph: "directed" recruits among each vertex's ``num_neighbors``
      nearest points; "mutual" keeps only reciprocated neighbor links.
    - traversal: "fifo" lets each member recruit once, in inclusion
      order; "rounds" sweeps every member again each round.
    - start: "perdraw" draws a fresh uniform start per sample; "fixed"
      draws one start for the whole distribution.
    - stall: when growth dies before k, "fresh" inserts a uniform
      unincluded vertex, "redraw" regrows the sample from its start
      (starts are then restricted to vertices that can reach k members).
    """
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if not 1 <= num_neighbors < n:
        raise ValueError(f"num_neighbors must lie in [1, {n}), got {num_neighbors}")
    if not 1 <= recruit <= num_neighbors:
        raise ValueError(f"recruit must lie in [1, {num_neighbors}], got {recruit}")
    if traversal not in ("fifo", "rounds"):
        raise ValueError(f"traversal must be 'fifo' or 'rounds', got {traversal!r}")
    if start not in ("perdraw", "fixed"):
        raise ValueError(f"start must be 'perdraw' or 'fixed', got {start!r}")
    if stall not in ("fresh", "redraw"):
        raise ValueError(f"stall must be 'fresh' or 'redraw', got {stall!r}")
    rng = np.random.default_rng(seed)
    points = rng.random((n, 2))
    nbrs = _recruitment_lists(points, num_neighbors, graph)

    if stall == "redraw":
        viable = [v for v in range(n) if _reachable_count(nbrs, v) >= k]
        if not viable:
            raise ValueError("no start vertex can reach k members; redraw would loop")
    else:
        viable = list(range(n))

    def pick_start() -> int:
        return viable[int(rng.integers(len(viable)))]

    def grow_once(s: int) -> set[int] | None:
        """One growth attempt; None signals a stall under the redraw policy."""
        included = {s}
        queue: deque[int] = deque([s])
        while len(included) < k:
            if traversal == "fifo":
                if not queue:
                    if stall == "redraw":
                        return None
                    fresh = [v for v in range(n) if v not in included]
                    v = int(fresh[rng.integers(len(fresh))])
                    included.add(v)
                    queue.append(v)
                    continue
                recruiters = [queue.popleft()]
            else:
                recruiters = sorted(included)
            grew = False
            for recruiter in recruiters:
                cands = nbrs[recruiter]
                if len(cands) == 0:
                    continue
                picks = rng.choice(cands, size=min(recruit, len(cands)), replace=False)
                for u in picks:
                    u = int(u)
                    if u not in included:
                        included.add(u)
                        queue.append(u)
                        grew = True
                        if len(included) == k:
                            return included
            if traversal == "rounds" and not grew:
                if stall == "redraw":
                    return None
                fresh = [v for v in range(n) if v not in included]
                v = int(fresh[rng.integers(len(fresh))])
                included.add(v)
                queue.append(v)
        return included

    def draw(s: int) -> set[int]:
        while True:
            got = grow_once(s)
            if got is not None:
                return got

    full = tuple(range(n))
    fixed_start = pick_start() if start == "fixed" else None
    pairs = []
    for _ in range(m):
        s = fixed_start if fixed_start is not None else pick_start()
        pairs.append(IndexPair(tuple(sorted(draw(s))), full))
    return SampleTargetDistribution(n, tuple(pairs)), points


def gen_selective(
    n: int = 32,
    windows: Sequence[int] = (1, 2, 4, 8, 16),
    overlap: bool = False,
) -> SampleTargetDistribution:
    """All prefix-sample/window-target pairs, enumerated (no randomness).

    For each prefix length t >= 1 and window w, the sample is {0, ..., t-1}
    and the target is {t, ..., t+w-1} (disjoint convention) or
    {t-1, ..., t-1+w} (overlap convention: the newest observed point is
    also a target).  Combinations reaching past the population are
    excluded; a window with no valid prefix is an error.
    """
    windows = tuple(int(w) for w in windows)
    if not windows:
        raise ValueError("at least one window length is required")
    for w in windows:
        if w < 1:
            raise ValueError(f"window lengths must be >= 1, got {w}")
        if w >= n:
            raise ValueError(f"window {w} leaves no valid prefix for population {n}")
    pairs = []
    for t in range(1, n):
        for w in windows:
            if t + w > n:
                continue
            sample = tuple(range(t))
            if overlap:
                target = tuple(range(t - 1, t + w))
            else:
                target = tuple(range(t, t + w))
            pairs.append(IndexPair(sample, target))
    return SampleTargetDistribution(n, tuple(pairs))


def load_distribution(path) -> SampleTargetDistribution:
    """Read a distribution JSON file (schema errors carry distinct codes)."""
    return load_distribution_file(path)
