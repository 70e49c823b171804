"""Conditional least squares for the clean process.

With E(X_k | past) = alpha X_{k-1} + mu, least squares over k = 1..n gives
closed forms.  Estimates are reported unclipped even when they leave
(0,1) x (0,inf): small samples can and do produce such values, and clipping
would wreck the distributional checks downstream.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateDenominator
from .model import Series


def cls_alpha(series: Series, mu_eps: float) -> float:
    """Estimate alpha with the innovation mean known."""
    y = series.array.astype(float)
    lag, cur = y[:-1], y[1:]
    denom = float(lag @ lag)
    if denom <= 0.0:
        raise DegenerateDenominator("all-zero history: sum of squared lags is zero")
    return float((cur - mu_eps) @ lag) / denom


def cls_joint(series: Series) -> tuple[float, float]:
    """Jointly estimate (alpha, mu) by the two normal equations."""
    y = series.array.astype(float)
    lag, cur = y[:-1], y[1:]
    n = len(cur)
    s_lag = float(np.sum(lag))
    s_cur = float(np.sum(cur))
    s_lag2 = float(lag @ lag)
    s_cross = float(lag @ cur)
    denom = n * s_lag2 - s_lag * s_lag
    if denom <= 0.0:
        raise DegenerateDenominator("constant history: design matrix is singular")
    alpha_hat = (n * s_cross - s_lag * s_cur) / denom
    mu_hat = (s_cur - alpha_hat * s_lag) / n
    return alpha_hat, mu_hat
