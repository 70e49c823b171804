"""CLS estimation and asymptotic laws for innovational outliers.

An innovational outlier of size theta at time s enters through the
innovation term, so it perturbs exactly one one-step conditional mean (the
one at k = s) and then propagates through the thinning recursion.  The
size estimator therefore zeroes the residual at s exactly, and the alpha
(and mu) estimators are the ordinary least-squares forms with the outlier
times excluded from every sum.

Parameter order everywhere: (alpha, mu?, theta_1[, theta_2]).
"""

from __future__ import annotations

import numpy as np

from .errors import BadTimes, DegenerateDenominator, OptimizerFailed, ValidationError
from .model import (
    GRADIENT_TOL,
    AsymptoticLaw,
    EstimateReport,
    ModelSpec,
    OptimizerInfo,
    OutlierScenario,
    Series,
    validate_scenario,
)
from .moments import cls_covariance


def innovational_objective(series: Series, scenario: OutlierScenario, params,
                           mu_eps: float | None = None) -> float:
    """Sum of squared one-step residuals at explicit parameters."""
    if scenario.family != "innovational":
        raise ValidationError("innovational_objective needs an innovational scenario")
    validate_scenario(series, scenario, mu_eps)
    params = [float(p) for p in params]
    alpha = params.pop(0)
    mu = mu_eps if scenario.mu_known else params.pop(0)
    y = series.array.astype(float)
    e = y[1:] - alpha * y[:-1] - mu
    for s, th in zip(scenario.times, params):
        e[s - 1] -= th
    return float(e @ e)


def _hessian(series: Series, scenario: OutlierScenario) -> np.ndarray:
    """Analytic Hessian; constant in the parameters since the model is linear."""
    y = series.array.astype(float)
    lag = y[:-1]
    n = series.n
    mu_unknown = not scenario.mu_known
    d = 1 + (1 if mu_unknown else 0) + scenario.count
    h = np.zeros((d, d))
    h[0, 0] = 2.0 * float(lag @ lag)
    col = 1
    if mu_unknown:
        h[0, 1] = h[1, 0] = 2.0 * float(np.sum(lag))
        h[1, 1] = 2.0 * n
        col = 2
    for i, s in enumerate(scenario.times):
        c = col + i
        h[0, c] = h[c, 0] = 2.0 * float(y[s - 1])
        if mu_unknown:
            h[1, c] = h[c, 1] = 2.0
        h[c, c] = 2.0
    return h


def estimate_innovational(series: Series, scenario: OutlierScenario,
                          mu_eps: float | None = None) -> EstimateReport:
    """Closed-form minimizer of the innovational-outlier objective."""
    tag = validate_scenario(series, scenario, mu_eps)
    y = series.array.astype(float)
    n = series.n
    lag, cur = y[:-1], y[1:]
    keep = np.ones(n, dtype=bool)
    for s in scenario.times:
        keep[s - 1] = False
    klag, kcur = lag[keep], cur[keep]
    m = int(np.sum(keep))

    if scenario.mu_known:
        mu_hat = None
        mu_val = float(mu_eps)
        denom = float(klag @ klag)
        if denom <= 0.0:
            raise DegenerateDenominator(
                f"excluded-sum lag second moment {denom!r} is not positive"
            )
        alpha_hat = float((kcur - mu_val) @ klag) / denom
    else:
        s_lag = float(np.sum(klag))
        s_cur = float(np.sum(kcur))
        s_lag2 = float(klag @ klag)
        s_cross = float(klag @ kcur)
        big_d = m * s_lag2 - s_lag * s_lag
        if big_d <= 0.0:
            raise DegenerateDenominator(
                f"excluded-sum least-squares denominator {big_d!r} is not positive"
            )
        alpha_hat = (m * s_cross - s_cur * s_lag) / big_d
        mu_hat = (s_lag2 * s_cur - s_lag * s_cross) / big_d
        mu_val = mu_hat

    thetas = tuple(
        float(y[s] - alpha_hat * y[s - 1] - mu_val) for s in scenario.times
    )

    e = cur - alpha_hat * lag - mu_val
    for s, th in zip(scenario.times, thetas):
        e[s - 1] -= th
    objective_value = float(e @ e)
    grad = [2.0 * float(-(e @ lag))]
    if not scenario.mu_known:
        grad.append(-2.0 * float(np.sum(e)))
    grad.extend(-2.0 * float(e[s - 1]) for s in scenario.times)
    worst = max(abs(g) for g in grad)
    if worst >= GRADIENT_TOL:
        raise OptimizerFailed(f"closed form left gradient max-norm {worst:.3e}")

    hess = _hessian(series, scenario)
    return EstimateReport(
        scenario=scenario.without_sizes(),
        tag=tag,
        alpha_hat=float(alpha_hat),
        mu_hat=None if mu_hat is None else float(mu_hat),
        theta_hat=thetas,
        objective_value=objective_value,
        optimizer=OptimizerInfo(method="closed-form", iterations=0, bracket=None),
        certificate=tuple(
            float(np.linalg.det(hess[: i + 1, : i + 1]))
            for i in range(hess.shape[0])
        ),
    )


def innovational_limit_values(alpha: float, mu_eps: float, series: Series,
                              scenario: OutlierScenario) -> tuple[float, ...]:
    """Almost-sure limits of the size estimators, given the realized path."""
    if scenario.family != "innovational":
        raise ValidationError("innovational limits need an innovational scenario")
    y = series.array.astype(float)
    n = series.n
    out = []
    for s in scenario.times:
        if s > n:
            raise BadTimes(f"outlier at {s} is beyond the last observation {n}")
        out.append(float(y[s] - alpha * y[s - 1] - mu_eps))
    return tuple(out)


def innovational_conditional_law(alpha: float, mu_eps: float, model: ModelSpec,
                                 series: Series, scenario: OutlierScenario) -> AsymptoticLaw:
    """Limits plus the conditional asymptotic covariance of the size estimators."""
    limits = innovational_limit_values(alpha, mu_eps, series, scenario)
    cov_info = cls_covariance(model.with_alpha(alpha))
    y = series.array.astype(float)
    pre = np.array([float(y[s - 1]) for s in scenario.times])
    if scenario.mu_known:
        cov = cov_info.sigma2_alpha * np.outer(pre, pre)
    else:
        rows = np.column_stack([pre, np.ones_like(pre)])
        cov = rows @ cov_info.b_mat @ rows.T
    return AsymptoticLaw(limits=limits, cov=cov, sigma2_alpha=cov_info.sigma2_alpha)


def z_moments(alpha: float, theta: int, k: int):
    """First and second moments of the propagated outlier component.

    Returns (mean, second_moment, lag1_product) for the component k steps
    after the outlier time; the lag-1 cross moment is None at k = 0 because
    the component does not exist before the outlier hits.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha!r}")
    if k < 0:
        raise ValidationError(f"step offset must be nonnegative, got {k!r}")
    if theta <= 0:
        raise ValidationError(f"outlier size must be positive, got {theta!r}")
    ak = alpha**k
    mean = theta * ak
    second = theta * theta * ak * ak - theta * ak * (ak - 1.0)
    if k == 0:
        return float(mean), float(second), None
    prev = alpha ** (k - 1)
    second_prev = theta * theta * prev * prev - theta * prev * (prev - 1.0)
    return float(mean), float(second), float(alpha * second_prev)
