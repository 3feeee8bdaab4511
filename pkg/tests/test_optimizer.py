"""OGD machinery: geometry, projection, gradients, runs, doubling."""

import math

import numpy as np
import pytest

from conftest import make_dist, random_dist
from wcmean.core import (
    L2,
    LINF,
    build_loss_matrix,
    estimator_from_dense,
)
from wcmean.optimizer import (
    InfeasibleBallError,
    OgdConfig,
    ball_geometry,
    loss_gradient,
    loss_value,
    minimize_sdp2,
    minimize_sdp_inf,
    ogd_step,
    project_to_ball,
    radius_for,
    run_with_doubling,
    trace_summary,
    uniform_init,
    write_trace_csv,
)
from wcmean.subproblems import sdp_inf_solve

TOL = 1e-9
FD_TOL = 1e-5
PROJ_TOL = 1e-6


def random_estimator(rng, dist, scale=1.0):
    arr = np.where(dist.sample_mask, scale * rng.standard_normal((dist.m, dist.n)), 0.0)
    return estimator_from_dense(dist, arr)


# ── geometry ─────────────────────────────────────────────────────────


def test_radius_formulas():
    assert abs(radius_for(LINF, 8, 0.5) - math.sqrt(math.pi * 8 * 0.5 / 2)) < TOL
    assert abs(radius_for(L2, 8, 0.5) - math.sqrt(8 * 0.5)) < TOL
    with pytest.raises(ValueError):
        radius_for("other", 8, 0.5)


def test_ball_geometry_beta():
    # A = {0}, B = {0,1}: b = (.5,.5), off-subspace part (0,.5), beta = .25
    dist = make_dist(2, [([0], [0, 1])])
    geom = ball_geometry(dist, 1.0)
    assert abs(geom.beta - 0.25) < TOL
    np.testing.assert_allclose(geom.center, [[0.5, 0.0]], atol=TOL)


def test_ball_geometry_zero_beta_for_covering_samples():
    dist = make_dist(3, [([0, 1, 2], [1])])
    geom = ball_geometry(dist, 0.5)
    assert geom.beta == 0.0


def test_uniform_init():
    dist = make_dist(3, [([0, 2], [1]), ([], [0])])
    init = uniform_init(dist)
    np.testing.assert_allclose(init, [[0.5, 0.0, 0.5], [0.0, 0.0, 0.0]], atol=TOL)


# ── projection ───────────────────────────────────────────────────────


def test_projection_matches_scalar_oracle():
    rng = np.random.default_rng(21)
    for trial in range(25):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, 7))
        dist = random_dist(rng, n, m)
        est = random_estimator(rng, dist, scale=3.0)
        geom = ball_geometry(dist, math.sqrt(geom_beta(dist)) + 0.5)
        projected = project_to_ball(est, geom)
        # independent 1-D solution: lam = min(1, sqrt(slack / ||a - c||^2))
        a = est.dense()
        d2 = float(np.sum((a - geom.center) ** 2))
        lam = 1.0 if d2 == 0.0 else min(1.0, math.sqrt(max(geom.squared_slack, 0.0) / d2))
        expect = lam * a + (1 - lam) * geom.center
        np.testing.assert_allclose(
            projected.dense(), expect, atol=PROJ_TOL, err_msg=f"trial {trial}"
        )


def geom_beta(dist):
    b = dist.target_rows
    return float(np.sum((b - np.where(dist.sample_mask, b, 0.0)) ** 2))


def test_projection_feasible_and_idempotent():
    rng = np.random.default_rng(22)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        dist = random_dist(rng, n, 5)
        est = random_estimator(rng, dist, scale=4.0)
        r = math.sqrt(geom_beta(dist)) + float(rng.random()) + 0.1
        geom = ball_geometry(dist, r)
        once = project_to_ball(est, geom)
        dense = once.dense()
        dist_to_b = math.sqrt(float(np.sum((dense - dist.target_rows) ** 2)))
        assert dist_to_b <= r + PROJ_TOL
        twice = project_to_ball(once, geom)
        np.testing.assert_allclose(twice.dense(), dense, atol=PROJ_TOL)


def test_projection_keeps_interior_points():
    dist = make_dist(2, [([0, 1], [0, 1])])
    est = estimator_from_dense(dist, np.array([[0.5, 0.5]]))  # equals b: distance 0
    geom = ball_geometry(dist, 1.0)
    assert project_to_ball(est, geom) is est


def test_infeasible_radius_raises():
    dist = make_dist(2, [([0], [1])])  # beta = 1, need r >= 1
    est = estimator_from_dense(dist, np.array([[1.0, 0.0]]))
    with pytest.raises(InfeasibleBallError):
        project_to_ball(est, ball_geometry(dist, 0.5))


def test_projection_rejects_off_support_weight():
    dist = make_dist(3, [([0, 1], [2])])
    other = make_dist(3, [([0, 1, 2], [2])])
    est = estimator_from_dense(other, np.array([[0.2, 0.3, 0.5]]))
    with pytest.raises(ValueError):
        project_to_ball(est, ball_geometry(dist, 2.0))


# ── loss and gradient ────────────────────────────────────────────────


def test_loss_value_matches_inner_product():
    rng = np.random.default_rng(23)
    dist = random_dist(rng, 6, 5)
    est = random_estimator(rng, dist)
    M = build_loss_matrix(est, dist)
    X = rng.standard_normal((6, 6))
    X = X @ X.T
    assert abs(loss_value(est, X, dist) - float(np.sum(M.dense * X))) < 1e-9
    x = rng.standard_normal(6)
    assert abs(loss_value(est, x, dist) - float(x @ M.dense @ x)) < 1e-9


def central_fd_gradient(est, X, dist, delta=1e-5):
    arr = est.dense()
    grad = np.zeros_like(arr)
    for i in range(dist.m):
        for j in dist.pairs[i].sample:
            plus = arr.copy()
            plus[i, j] += delta
            minus = arr.copy()
            minus[i, j] -= delta
            f_plus = loss_value(estimator_from_dense(dist, plus), X, dist)
            f_minus = loss_value(estimator_from_dense(dist, minus), X, dist)
            grad[i, j] = (f_plus - f_minus) / (2 * delta)
    return grad


@pytest.mark.parametrize("x_kind", ["vector", "dense", "assignment"])
def test_gradient_matches_central_differences(x_kind):
    rng = np.random.default_rng(24)
    dist = random_dist(rng, 5, 4)
    est = random_estimator(rng, dist)
    if x_kind == "vector":
        X = rng.standard_normal(5)
    elif x_kind == "dense":
        G = rng.standard_normal((5, 5))
        X = G @ G.T
    else:
        X = sdp_inf_solve(build_loss_matrix(est, dist), 0.01, rng)
    grad = loss_gradient(est, X, dist)
    fd = central_fd_gradient(est, X, dist)
    np.testing.assert_allclose(grad, fd, atol=FD_TOL)


def test_gradient_vanishes_off_support():
    rng = np.random.default_rng(25)
    dist = random_dist(rng, 5, 4)
    est = random_estimator(rng, dist)
    grad = loss_gradient(est, rng.standard_normal(5), dist)
    assert np.all(grad[~dist.sample_mask] == 0.0)


def test_ogd_step_rejects_bad_iteration():
    dist = make_dist(2, [([0, 1], [0, 1])])
    est = estimator_from_dense(dist, np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        ogd_step(est, np.ones(2), 0, ball_geometry(dist, 1.0), dist)


def test_ogd_step_fixed_point_at_target():
    # at a = b with X arbitrary the gradient is zero: the step keeps a
    dist = make_dist(2, [([0, 1], [0, 1])])
    est = estimator_from_dense(dist, np.array([[0.5, 0.5]]))
    geom = ball_geometry(dist, 1.0)
    stepped = ogd_step(est, np.array([1.0, -1.0]), 1, geom, dist)
    np.testing.assert_allclose(stepped.dense(), est.dense(), atol=TOL)


# ── runs and doubling ────────────────────────────────────────────────


def test_minimize_wrong_regime_rejected():
    dist = make_dist(2, [([0, 1], [0, 1])])
    with pytest.raises(ValueError):
        minimize_sdp2(dist, OgdConfig(regime=LINF))
    with pytest.raises(ValueError):
        minimize_sdp_inf(dist, OgdConfig(regime=L2))


def test_zero_optimum_at_iteration_one():
    # sample = target: uniform init is already exact, both regimes
    rng = np.random.default_rng(26)
    pairs = []
    for _ in range(6):
        s = sorted(rng.choice(8, size=int(rng.integers(1, 8)), replace=False))
        pairs.append((list(s), list(s)))
    dist = make_dist(8, pairs)
    for fn, regime in ((minimize_sdp2, L2), (minimize_sdp_inf, LINF)):
        est, trace = fn(dist, OgdConfig(regime=regime, t_max=3))
        assert trace.best_value <= 1e-9
        assert trace.best_t == 1
        assert abs(trace.f_t[0]) <= 1e-9


def test_ogd_trace_is_deterministic():
    rng = np.random.default_rng(27)
    dist = random_dist(rng, 6, 10, full_targets=True)
    cfg = OgdConfig(regime=L2, t_max=20, seed=3)
    _, t1 = minimize_sdp2(dist, cfg)
    _, t2 = minimize_sdp2(dist, cfg)
    np.testing.assert_array_equal(t1.f_t, t2.f_t)
    np.testing.assert_array_equal(t1.lam, t2.lam)


def test_doubling_accepts_when_value_below_p():
    rng = np.random.default_rng(28)
    dist = random_dist(rng, 6, 10, full_targets=True)
    cfg = OgdConfig(regime=L2, t_max=40, seed=0)
    est, trace, p_final = run_with_doubling(dist, cfg)
    assert trace.best_value <= p_final + TOL
    # the estimator returned is the best iterate of the accepted run
    value = 6 * np.linalg.eigvalsh(build_loss_matrix(est, dist).dense)[-1]
    assert value <= trace.best_value * (1 + 0.01) + 1e-6


def test_doubling_respects_regime_override():
    rng = np.random.default_rng(29)
    dist = random_dist(rng, 5, 8, full_targets=True)
    cfg = OgdConfig(regime=L2, t_max=15, seed=0)
    est, trace, p_final = run_with_doubling(dist, cfg, regime=LINF)
    assert trace.regime == LINF


def test_trace_csv_round_trip(tmp_path):
    rng = np.random.default_rng(30)
    dist = random_dist(rng, 5, 8, full_targets=True)
    _, trace = minimize_sdp2(dist, OgdConfig(regime=L2, t_max=10))
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert "f_t" in header and "elapsed_ms" in header
    assert len(lines) == 1 + 10


def test_trace_summary_fields():
    rng = np.random.default_rng(31)
    dist = random_dist(rng, 5, 8, full_targets=True)
    _, trace = minimize_sdp2(dist, OgdConfig(regime=L2, t_max=10))
    summary = trace_summary(trace, 0.25)
    for key in ("regime", "best_value", "best_t", "p_final"):
        assert key in summary
