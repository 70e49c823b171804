"""Stationary and transient moments, CLS asymptotic covariance objects,
and the stationary probability generating function.

For the stable chain with innovation mean mu and variance s2, writing
X~ for a stationary draw:

    E X~   = mu / (1 - alpha)
    E X~^2 = (s2 + alpha mu) / (1 - alpha^2) + mu^2 / (1 - alpha)^2

and E X~^3 follows from the third derivative of log of the stationary pgf.
The scalar estimator of alpha has asymptotic variance

    sigma2_alpha = (alpha (1 - alpha) m3 + s2 m2) / m2^2,

and the joint (alpha, mu) estimator has covariance B = M^-1 A M^-1 with
M = [[m2, m1], [m1, 1]].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMoment, ValidationError
from .model import ModelSpec


@dataclass(frozen=True)
class StationaryMoments:
    m1: float
    m2: float
    m3: float
    var: float


@dataclass(frozen=True, eq=False)
class ClsCovariance:
    sigma2_alpha: float
    a_mat: np.ndarray
    b_mat: np.ndarray


def stationary_moments(model: ModelSpec) -> StationaryMoments:
    a = model.alpha
    mu = model.innovation.mu
    s2 = model.innovation.sigma2
    e3 = model.innovation.third_raw
    m1 = mu / (1.0 - a)
    m2 = (s2 + a * mu) / (1.0 - a * a) + mu * mu / (1.0 - a) ** 2
    m3 = (
        (e3 - 3.0 * s2 * (1.0 + mu) - mu**3 + 2.0 * mu) / (1.0 - a**3)
        + 3.0 * (s2 + a * mu) / (1.0 - a * a)
        - 2.0 * mu / (1.0 - a)
        + 3.0 * mu * (s2 + a * mu) / ((1.0 - a) * (1.0 - a * a))
        + mu**3 / (1.0 - a) ** 3
    )
    return StationaryMoments(m1=m1, m2=m2, m3=m3, var=m2 - m1 * m1)


def stationary_third_moment_fixed_point(model: ModelSpec) -> float:
    """E X~^3 from the stationarity identity X~ =d thin(X~) + eps.

    Independent route: expand E(thin(X~) + eps)^3 with the conditional
    moments of the Bernoulli-thinning sum and solve for E X~^3.
    """
    a = model.alpha
    mu = model.innovation.mu
    s2 = model.innovation.sigma2
    e3 = model.innovation.third_raw
    m = stationary_moments(model)
    return (
        3.0 * a * a * (1.0 - a) * m.m2
        + 3.0 * a * a * mu * m.m2
        + 3.0 * a * m.m1 * (s2 + mu * mu)
        + e3
        + 3.0 * a * (1.0 - a) * mu * m.m1
        + a * (1.0 - a) * (1.0 - 2.0 * a) * m.m1
    ) / (1.0 - a**3)


def cls_covariance(model: ModelSpec) -> ClsCovariance:
    """Asymptotic variance of the alpha estimator and the 2x2 matrices for
    the joint (alpha, mu) estimator."""
    m = stationary_moments(model)
    a = model.alpha
    s2 = model.innovation.sigma2
    if m.var <= 0:
        raise SingularMoment("stationary variance is not positive")
    sigma2_alpha = (a * (1.0 - a) * m.m3 + s2 * m.m2) / (m.m2 * m.m2)
    a_mat = a * (1.0 - a) * np.array([[m.m3, m.m2], [m.m2, m.m1]]) + s2 * np.array(
        [[m.m2, m.m1], [m.m1, 1.0]]
    )
    # explicit 2x2 inverse of M = [[m2, m1], [m1, 1]]
    m_inv = np.array([[1.0, -m.m1], [-m.m1, m.m2]]) / m.var
    b_mat = m_inv @ a_mat @ m_inv
    return ClsCovariance(sigma2_alpha=sigma2_alpha, a_mat=a_mat, b_mat=b_mat)


def transient_moments(model: ModelSpec, k: int, ex0: float | None = None):
    """Mean of X_k and variance of the one-step martingale increment
    M_k = X_k - E(X_k | X_{k-1}), for a chain started at mean ``ex0``.

    Returns (E X_k, Var M_k).
    """
    if k < 1:
        raise ValidationError("k must be a positive integer")
    a = model.alpha
    mu = model.innovation.mu
    s2 = model.innovation.sigma2
    if ex0 is None:
        ex0 = model.init_mean
    ex_k = a**k * ex0 + mu * (1.0 - a**k) / (1.0 - a)
    var_m_k = a * mu * (1.0 - a ** (k - 1)) + a**k * (1.0 - a) * ex0 + s2
    return ex_k, var_m_k


def stationary_pgf(model: ModelSpec, s: float, truncation_tol: float = 1e-12) -> float:
    """E s^X~ via the truncated infinite product.

    The stationary pgf is P(s) = B(s) prod_k B(A_k(s)) where B is the
    innovation pgf and A_k(s) = (s - 1) alpha^k + 1 is the k-fold iterate of
    the thinning pgf.  Each factor satisfies 1 - B(A_k(s)) <= mu alpha^k, so
    the tail beyond the first K factors is negligible once
    alpha^K (1 - s) mu < truncation_tol.
    """
    if not 0.0 <= s < 1.0:
        raise ValidationError("pgf argument must lie in [0, 1)")
    a = model.alpha
    mu = model.innovation.mu
    innov = model.innovation
    out = innov.pgf(s)
    # include factors k = 1..K where K is the first index whose tail bound
    # alpha^k (1 - s) mu drops below the tolerance
    k = 1
    a_pow = a
    while True:
        out *= innov.pgf((s - 1.0) * a_pow + 1.0)
        if a_pow * (1.0 - s) * mu < truncation_tol:
            break
        k += 1
        a_pow *= a
    return out
