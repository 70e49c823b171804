import numpy as np
import pytest

from inarout import (
    DegenerateDenominator,
    InnovationDist,
    ModelSpec,
    Series,
    SimConfig,
    child_seed,
    cls_alpha,
    cls_joint,
    simulate_inar1,
)


def test_known_mean_reference_value():
    # X = (1, 2, 1, 3), mu = 1: numerator 1*1 + 2*0 + 1*2 = 3, denominator 6
    assert cls_alpha(Series((1, 2, 1, 3)), mu_eps=1.0) == pytest.approx(0.5, abs=1e-15)


def test_known_mean_constant_series():
    # constant c: estimate is (c - mu) / c
    assert cls_alpha(Series((3, 3, 3, 3)), mu_eps=1.5) == pytest.approx(0.5, abs=1e-15)
    assert cls_alpha(Series((4, 4, 4)), mu_eps=1.0) == pytest.approx(0.75, abs=1e-15)


def test_joint_reference_value():
    # alternating 0,1: lag mean 0.4 vs alternation forces alpha = -1, mu = 1
    alpha_hat, mu_hat = cls_joint(Series((0, 1, 0, 1, 0)))
    assert alpha_hat == pytest.approx(-1.0, abs=1e-12)
    assert mu_hat == pytest.approx(1.0, abs=1e-12)


def test_joint_estimates_unclipped():
    # estimates may leave the parameter space on pathological samples and
    # must be reported as-is
    alpha_hat, _ = cls_joint(Series((0, 1, 0, 1, 0)))
    assert alpha_hat < 0.0


def test_normal_equations_hold(base_model):
    for seed in (1, 2, 3):
        path = simulate_inar1(SimConfig(model=base_model, n=400, seed=seed))
        y = path.array.astype(float)
        lag, cur = y[:-1], y[1:]
        alpha_hat, mu_hat = cls_joint(path)
        resid = cur - alpha_hat * lag - mu_hat
        scale = float(np.sum(np.abs(cur))) + 1.0
        assert abs(float(resid @ lag)) < 1e-9 * scale
        assert abs(float(np.sum(resid))) < 1e-9 * scale
        # known-mean variant satisfies its single normal equation too
        a1 = cls_alpha(path, mu_eps=1.0)
        assert abs(float((cur - a1 * lag - 1.0) @ lag)) < 1e-9 * scale


def test_degenerate_all_zero_history():
    with pytest.raises(DegenerateDenominator):
        cls_alpha(Series((0, 0, 0, 5)), mu_eps=1.0)


def test_degenerate_constant_history_joint():
    with pytest.raises(DegenerateDenominator):
        cls_joint(Series((2, 2, 2, 2)))


def _dense_grid_alpha(y, mu_eps):
    """Independent 1-d oracle: dense grid plus exact parabola refinement."""
    lag, cur = y[:-1], y[1:]

    def q(a):
        r = cur - a * lag - mu_eps
        return float(r @ r)

    grid = np.linspace(-2.0, 3.0, 5001)
    vals = np.array([q(a) for a in grid])
    i = int(np.argmin(vals))
    a, h = grid[i], grid[1] - grid[0]
    f0, f1, f2 = q(a - h), q(a), q(a + h)
    denom = f0 - 2 * f1 + f2
    return a + 0.5 * h * (f0 - f2) / denom if denom > 0 else a


def _coordinate_descent_joint(y):
    """Independent 2-d oracle: alternate exact line minimizations."""
    lag, cur = y[:-1], y[1:]
    a, m = 0.0, float(np.mean(cur))
    for _ in range(200):
        a_new = float((cur - m) @ lag / (lag @ lag))
        m_new = float(np.mean(cur - a_new * lag))
        if abs(a_new - a) + abs(m_new - m) < 1e-14:
            a, m = a_new, m_new
            break
        a, m = a_new, m_new
    return a, m


def test_known_mean_matches_dense_grid(base_model):
    for rep in range(20):
        path = simulate_inar1(
            SimConfig(model=base_model, n=30, seed=child_seed("grid", rep))
        )
        y = path.array.astype(float)
        assert cls_alpha(path, mu_eps=1.0) == pytest.approx(
            _dense_grid_alpha(y, 1.0), abs=1e-8
        )


def test_joint_matches_coordinate_descent(base_model):
    for rep in range(20):
        path = simulate_inar1(
            SimConfig(model=base_model, n=30, seed=child_seed("joint", rep))
        )
        y = path.array.astype(float)
        a_hat, m_hat = cls_joint(path)
        a_ref, m_ref = _coordinate_descent_joint(y)
        assert a_hat == pytest.approx(a_ref, abs=1e-6)
        assert m_hat == pytest.approx(m_ref, abs=1e-6)


def test_consistency_on_moderate_samples():
    # alpha = 0.3, Poisson(2), n = 5000: most seeds land close to truth
    model = ModelSpec(0.3, InnovationDist.poisson(2.0), init=3)
    hits = 0
    reps = 100
    for rep in range(reps):
        path = simulate_inar1(SimConfig(model=model, n=5000, seed=child_seed("cons", rep)))
        a_hat, m_hat = cls_joint(path)
        if abs(a_hat - 0.3) < 0.03 and abs(m_hat - 2.0) < 0.1:
            hits += 1
    assert hits >= 90
