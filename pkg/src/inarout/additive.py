"""CLS estimation and asymptotic laws for additive outliers.

An additive outlier of size theta at time s perturbs two one-step
conditional means: the residual at k = s picks up -theta and the residual
at k = s+1 picks up +alpha * theta.  For fixed alpha the objective is a
quadratic in the linear parameters (mu?, theta_1[, theta_2]), so those are
profiled out by a small linear solve and only a one-dimensional search in
alpha remains.

Scenario shapes (tags from ``validate_scenario``):

    ADD1 / ADD1M        one outlier, mu known / estimated
    ADD2SEP / ADD2SEPM  two outliers at least two steps apart
    ADD2ADJ / ADD2ADJM  two outliers at consecutive times

Parameter order everywhere: (alpha, mu?, theta_1[, theta_2]).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (
    BadTimes,
    DegenerateDenominator,
    OptimizerFailed,
    ValidationError,
)
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

GRID_SPAN = (-1.0, 2.0)
GRID_POINTS = 4001
GOLDEN_TOL = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _adjusted_residuals(y, times, alpha, mu, thetas):
    """Residuals e_k = y_k - E(y_k | past) and their alpha-derivatives g_k.

    Index convention: entry k-1 of the returned arrays is time k.
    """
    lag = y[:-1].astype(float)
    e = y[1:] - alpha * lag - mu
    g = -lag.copy()
    n = len(y) - 1
    for s, th in zip(times, thetas):
        e[s - 1] -= th
        if s + 1 <= n:
            e[s] += alpha * th
            g[s] += th
    return e, g


def additive_objective(series: Series, scenario: OutlierScenario, params,
                       mu_eps: float | None = None) -> float:
    """The scenario objective at explicit parameters.

    ``params`` is (alpha, mu, theta...) when the innovation mean is unknown
    and (alpha, theta...) with ``mu_eps`` supplied when it is known.
    """
    if scenario.family != "additive":
        raise ValidationError("additive_objective needs an additive scenario")
    validate_scenario(series, scenario, mu_eps)
    params = [float(p) for p in params]
    alpha = params.pop(0)
    mu = mu_eps if scenario.mu_known else params.pop(0)
    if mu is None:
        raise ValidationError("mu_eps is required when the scenario declares it known")
    y = series.array.astype(float)
    e, _ = _adjusted_residuals(y, scenario.times, alpha, mu, params)
    return float(e @ e)


def objective_gradient(series: Series, scenario: OutlierScenario, params,
                       mu_eps: float | None = None) -> np.ndarray:
    """Gradient in parameter order (alpha, mu?, theta...)."""
    params = [float(p) for p in params]
    alpha = params[0]
    rest = params[1:]
    mu_unknown = not scenario.mu_known
    mu = rest.pop(0) if mu_unknown else float(mu_eps)
    thetas = rest
    y = series.array.astype(float)
    e, g = _adjusted_residuals(y, scenario.times, alpha, mu, thetas)
    n = series.n
    out = [2.0 * float(e @ g)]
    if mu_unknown:
        out.append(-2.0 * float(np.sum(e)))
    for s in scenario.times:
        acc = e[s - 1]
        if s + 1 <= n:
            acc -= alpha * e[s]
        out.append(-2.0 * float(acc))
    return np.array(out)


def objective_hessian(series: Series, scenario: OutlierScenario, params,
                      mu_eps: float | None = None) -> np.ndarray:
    """Analytic Hessian in parameter order (alpha, mu?, theta...).

    Only the alpha row depends on the point: the linear block is constant
    in the parameters (twice the profile design matrix).
    """
    params = [float(p) for p in params]
    alpha = params[0]
    rest = params[1:]
    mu_unknown = not scenario.mu_known
    mu = rest.pop(0) if mu_unknown else float(mu_eps)
    thetas = rest
    y = series.array.astype(float)
    e, g = _adjusted_residuals(y, scenario.times, alpha, mu, thetas)
    n = series.n
    times = scenario.times
    d = (1 if mu_unknown else 0) + len(times)
    h = np.zeros((d + 1, d + 1))
    h[0, 0] = 2.0 * float(g @ g)
    col = 1
    if mu_unknown:
        h[0, col] = h[col, 0] = -2.0 * float(np.sum(g))
        h[col, col] = 2.0 * n
        col += 1
    theta_cols = list(range(col, col + len(times)))
    for i, s in enumerate(times):
        c = theta_cols[i]
        cross = g[s - 1]
        if s + 1 <= n:
            cross -= alpha * g[s]
        # d/dalpha of the theta_i normal equation also hits the residual at s+1
        h[0, c] = h[c, 0] = -2.0 * float(cross) + (2.0 * float(e[s]) if s + 1 <= n else 0.0)
        h[c, c] = 2.0 * (1.0 + alpha * alpha) if s + 1 <= n else 2.0
        if mu_unknown:
            h[1, c] = h[c, 1] = 2.0 * (1.0 - alpha) if s + 1 <= n else 2.0
    if len(times) == 2 and times[1] == times[0] + 1:
        c1, c2 = theta_cols
        h[c1, c2] = h[c2, c1] = -2.0 * alpha
    return h


def _leading_minors(h: np.ndarray) -> tuple[float, ...]:
    return tuple(float(np.linalg.det(h[: i + 1, : i + 1])) for i in range(h.shape[0]))


class ProfileObjective:
    """The objective with the linear parameters minimized out.

    ``value(alpha)`` evaluates the profile; ``backout(alpha)`` returns the
    minimizing (mu?, theta...) by solving the scenario's linear system
    A(alpha) v = t(alpha).
    """

    def __init__(self, series: Series, scenario: OutlierScenario,
                 mu_eps: float | None = None):
        if scenario.family != "additive":
            raise ValidationError("profile objective is for additive scenarios")
        self.tag = validate_scenario(series, scenario, mu_eps)
        self.series = series
        self.scenario = scenario
        self.mu_unknown = not scenario.mu_known
        self.mu_eps = float(mu_eps) if scenario.mu_known else 0.0
        self.times = scenario.times
        self.adjacent = scenario.adjacent
        y = series.array.astype(float)
        self._y = y
        self.n = series.n
        lag, cur = y[:-1], y[1:]
        self._s_lag = float(np.sum(lag))
        self._s_cur = float(np.sum(cur))
        self._s_lag2 = float(lag @ lag)
        self._s_cur2 = float(cur @ cur)
        self._s_cross = float(lag @ cur)
        self.dim = (1 if self.mu_unknown else 0) + len(self.times)
        self.c_n = self._leading_coefficient()

    def _leading_coefficient(self) -> float:
        """Leading coefficient of the numerator polynomial of the profile.

        Positive iff the profile diverges at +-infinity, which is what makes
        an interior minimum certifiable.
        """
        y = self._y
        outlier_vals = [float(y[s]) for s in self.times]
        if not self.mu_unknown:
            return self._s_lag2 - sum(v * v for v in outlier_vals)
        n = self.n
        if len(self.times) == 1:
            ys = outlier_vals[0]
            return (
                (n - 1) * self._s_lag2
                - self._s_lag**2
                + 2.0 * self._s_lag * ys
                - n * ys * ys
            )
        y1, y2 = outlier_vals
        return (
            (n - 2) * self._s_lag2
            - self._s_lag**2
            - (n - 1) * (y1 * y1 + y2 * y2)
            + 2.0 * (y1 + y2) * self._s_lag
            - 2.0 * y1 * y2
        )

    def residual_sumsq(self, alpha):
        """Sum over k of (y_k - alpha y_{k-1} - mu_known)^2, vectorized in alpha."""
        alpha = np.asarray(alpha, dtype=float)
        val = self._s_cur2 - 2.0 * alpha * self._s_cross + alpha * alpha * self._s_lag2
        if not self.mu_unknown:
            mu = self.mu_eps
            val = val - 2.0 * mu * (self._s_cur - alpha * self._s_lag) + self.n * mu * mu
        return val

    def design_matrix(self, alpha):
        """A(alpha), stacked over a vector of alphas: shape (..., d, d)."""
        alpha = np.asarray(alpha, dtype=float)
        shape = alpha.shape + (self.dim, self.dim)
        a = np.zeros(shape)
        off = 0
        if self.mu_unknown:
            a[..., 0, 0] = self.n
            off = 1
        for i in range(len(self.times)):
            c = off + i
            a[..., c, c] = 1.0 + alpha * alpha
            if self.mu_unknown:
                a[..., 0, c] = a[..., c, 0] = 1.0 - alpha
        if self.adjacent:
            a[..., off, off + 1] = a[..., off + 1, off] = -alpha
        return a

    def target_vector(self, alpha):
        """t(alpha), stacked over a vector of alphas: shape (..., d)."""
        alpha = np.asarray(alpha, dtype=float)
        t = np.zeros(alpha.shape + (self.dim,))
        y = self._y
        mu = self.mu_eps
        off = 0
        if self.mu_unknown:
            t[..., 0] = self._s_cur - alpha * self._s_lag
            off = 1
            mu = 0.0
        for i, s in enumerate(self.times):
            t[..., off + i] = (
                (1.0 + alpha * alpha) * y[s]
                - alpha * (y[s - 1] + y[s + 1])
                - (1.0 - alpha) * mu
            )
        return t

    def profile_denominator(self, alpha):
        """det A(alpha) in the closed form each scenario admits."""
        alpha = np.asarray(alpha, dtype=float)
        n = self.n
        one = 1.0 + alpha * alpha
        if not self.mu_unknown:
            if len(self.times) == 1:
                return one
            return one * one - alpha * alpha if self.adjacent else one * one
        if len(self.times) == 1:
            return (n - 1) * alpha * alpha + 2.0 * alpha + (n - 1)
        if self.adjacent:
            return (1.0 + alpha + alpha * alpha) * (
                (n - 2) * alpha * alpha - (n - 4) * alpha + (n - 2)
            )
        return one * ((n - 2) * alpha * alpha + 4.0 * alpha + (n - 2))

    def _explicit_inverse(self, alpha):
        """The printed closed-form inverse for the mu-unknown adjacent pair."""
        n = self.n
        det = float(self.profile_denominator(alpha))
        u = -(1.0 - alpha) * (1.0 + alpha + alpha * alpha)
        v = (1.0 - alpha) ** 2 + n * alpha
        w = n * (1.0 + alpha * alpha) - (1.0 - alpha) ** 2
        top = 1.0 + alpha**2 + alpha**4
        return np.array([[top, u, u], [u, w, v], [u, v, w]]) / det

    def backout(self, alpha: float) -> np.ndarray:
        """Minimizing linear parameters (mu?, theta...) at this alpha."""
        t = self.target_vector(alpha)
        if self.dim == 1:
            return t / (1.0 + alpha * alpha)
        if self.tag == "ADD2ADJM":
            return self._explicit_inverse(alpha) @ t
        return np.linalg.solve(self.design_matrix(alpha), t)

    def value_and_backout(self, alpha: float):
        v = self.backout(alpha)
        t = self.target_vector(alpha)
        return float(self.residual_sumsq(alpha) - t @ v), v

    def value(self, alpha: float) -> float:
        return self.value_and_backout(alpha)[0]

    def values(self, alphas: np.ndarray) -> np.ndarray:
        """Profile values on a whole grid at once (batched linear solves)."""
        alphas = np.asarray(alphas, dtype=float)
        t = self.target_vector(alphas)
        if self.dim == 1:
            v = t / (1.0 + alphas * alphas)[..., None]
        else:
            v = np.linalg.solve(self.design_matrix(alphas), t[..., None])[..., 0]
        return self.residual_sumsq(alphas) - np.einsum("...i,...i->...", t, v)

    def full_params(self, alpha: float):
        return (alpha, *self.backout(alpha))

    def derivative(self, alpha: float) -> float:
        """d/dalpha of the profile (the envelope derivative)."""
        qv, v = self.value_and_backout(alpha)
        grad = objective_gradient(
            self.series, self.scenario, (alpha, *v),
            None if self.mu_unknown else self.mu_eps,
        )
        return float(grad[0])

    def curvature(self, alpha: float) -> float:
        """d2/dalpha2 of the profile via the Hessian Schur complement."""
        v = self.backout(alpha)
        h = objective_hessian(
            self.series, self.scenario, (alpha, *v),
            None if self.mu_unknown else self.mu_eps,
        )
        block = h[1:, 1:]
        cross = h[0, 1:]
        return float(h[0, 0] - cross @ np.linalg.solve(block, cross))


def _golden_section(fn, lo, hi, tol=GOLDEN_TOL):
    """Minimize a unimodal function on [lo, hi]; returns (argmin, evaluations)."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    evals = 2
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
        evals += 1
    return (a + b) / 2.0, evals


def _newton_polish(po: ProfileObjective, alpha: float, max_iter: int = 12):
    """Drive the profile derivative to zero from a near-optimal start."""
    best = alpha
    for i in range(max_iter):
        slope = po.derivative(best)
        if abs(slope) < 0.25 * GRADIENT_TOL:
            return best, i
        curv = po.curvature(best)
        if not curv > 0.0:
            break
        step = slope / curv
        best -= step
        if abs(step) < 1e-16 * max(1.0, abs(best)):
            return best, i + 1
    return best, max_iter


def _minimize_grid(po: ProfileObjective):
    grid = np.linspace(GRID_SPAN[0], GRID_SPAN[1], GRID_POINTS)
    vals = po.values(grid)
    i = int(np.argmin(vals))  # first minimum = smallest alpha on ties
    if i == 0 or i == GRID_POINTS - 1:
        raise OptimizerFailed(
            f"profile minimum at the edge of the search span {GRID_SPAN}"
        )
    bracket = (float(grid[i - 1]), float(grid[i + 1]))
    alpha, evals = _golden_section(po.value, *bracket)
    return alpha, evals, bracket


def _polynomial_pieces(po: ProfileObjective):
    """Numerator N and denominator D with profile = N / D exactly."""
    n = po.n
    y = po._y
    mu = po.mu_eps
    p_one = Polynomial([1.0, 0.0, 1.0])     # 1 + a^2
    p_lin = Polynomial([1.0, -1.0])         # 1 - a
    p_nega = Polynomial([0.0, -1.0])        # -a
    entries = {}
    off = 0
    if po.mu_unknown:
        entries[(0, 0)] = Polynomial([float(n)])
        off = 1
        mu = 0.0
    tvec = []
    if po.mu_unknown:
        tvec.append(Polynomial([po._s_cur, -po._s_lag]))
    for i, s in enumerate(po.times):
        c = off + i
        entries[(c, c)] = p_one
        if po.mu_unknown:
            entries[(0, c)] = entries[(c, 0)] = p_lin
        tvec.append(
            Polynomial([y[s] - mu, mu - (y[s - 1] + y[s + 1]), y[s]])
        )
    if po.adjacent:
        entries[(off, off + 1)] = entries[(off + 1, off)] = p_nega
    d = po.dim
    a_poly = [[entries.get((i, j), Polynomial([0.0])) for j in range(d)] for i in range(d)]

    if d == 1:
        det = a_poly[0][0]
        adj = [[Polynomial([1.0])]]
    elif d == 2:
        det = a_poly[0][0] * a_poly[1][1] - a_poly[0][1] * a_poly[1][0]
        adj = [[a_poly[1][1], -a_poly[0][1]], [-a_poly[1][0], a_poly[0][0]]]
    else:
        def minor(i, j):
            rows = [r for r in range(3) if r != i]
            cols = [c for c in range(3) if c != j]
            return (
                a_poly[rows[0]][cols[0]] * a_poly[rows[1]][cols[1]]
                - a_poly[rows[0]][cols[1]] * a_poly[rows[1]][cols[0]]
            )
        det = sum(
            (a_poly[0][j] * minor(0, j) * ((-1.0) ** j) for j in range(3)),
            Polynomial([0.0]),
        )
        adj = [[minor(j, i) * ((-1.0) ** (i + j)) for j in range(3)] for i in range(3)]

    if po.mu_unknown:
        sbb = Polynomial([po._s_cur2, -2.0 * po._s_cross, po._s_lag2])
    else:
        mu_k = po.mu_eps
        sbb = Polynomial(
            [
                po._s_cur2 - 2.0 * mu_k * po._s_cur + n * mu_k * mu_k,
                -2.0 * po._s_cross + 2.0 * mu_k * po._s_lag,
                po._s_lag2,
            ]
        )
    quad = Polynomial([0.0])
    for i in range(d):
        for j in range(d):
            quad = quad + tvec[i] * adj[i][j] * tvec[j]
    numer = sbb * det - quad
    return _trim(numer), _trim(det)


def _trim(poly: Polynomial) -> Polynomial:
    scale = float(np.max(np.abs(poly.coef))) if poly.coef.size else 1.0
    return poly.trim(1e-9 * max(1.0, scale))


def _minimize_poly(po: ProfileObjective):
    """Exact critical points: roots of N'D - ND', then pick the best."""
    numer, den = _polynomial_pieces(po)
    crit_poly = _trim(numer.deriv() * den - numer * den.deriv())
    roots = crit_poly.roots()
    real = sorted(
        float(r.real) for r in roots if abs(r.imag) <= 1e-8 * (1.0 + abs(r.real))
    )
    if not real:
        raise OptimizerFailed("no real critical point of the profile found")
    vals = [po.value(r) for r in real]
    best = int(np.argmin(vals))  # ties resolve to the smallest root (sorted)
    return real[best], len(real), (real[0], real[-1])


def estimate_additive(series: Series, scenario: OutlierScenario,
                      mu_eps: float | None = None, method: str = "grid") -> EstimateReport:
    """Minimize the scenario objective and report estimates + certificate."""
    po = ProfileObjective(series, scenario, mu_eps)
    if po.c_n <= 0.0:
        raise DegenerateDenominator(
            f"profile leading coefficient c_n = {po.c_n!r} is not positive"
        )
    if method == "grid":
        alpha0, iterations, bracket = _minimize_grid(po)
    elif method == "poly":
        alpha0, iterations, bracket = _minimize_poly(po)
    else:
        raise ValidationError(f"unknown method {method!r}; use 'grid' or 'poly'")
    alpha_hat, polish_iters = _newton_polish(po, alpha0)
    iterations += polish_iters
    objective_value, v = po.value_and_backout(alpha_hat)
    params = (alpha_hat, *v)
    kw_mu = None if po.mu_unknown else po.mu_eps
    grad = objective_gradient(series, scenario, params, kw_mu)
    if float(np.max(np.abs(grad))) >= GRADIENT_TOL:
        raise OptimizerFailed(
            f"gradient max-norm {float(np.max(np.abs(grad))):.3e} at the optimum"
        )
    hess = objective_hessian(series, scenario, params, kw_mu)
    mu_hat = float(v[0]) if po.mu_unknown else None
    thetas = tuple(float(x) for x in (v[1:] if po.mu_unknown else v))
    return EstimateReport(
        scenario=scenario.without_sizes(),
        tag=po.tag,
        alpha_hat=float(alpha_hat),
        mu_hat=mu_hat,
        theta_hat=thetas,
        objective_value=float(objective_value),
        optimizer=OptimizerInfo(method=method, iterations=int(iterations),
                                bracket=(float(bracket[0]), float(bracket[1]))),
        certificate=_leading_minors(hess),
    )


def additive_limit_values(alpha: float, mu_eps: float, series: Series,
                          scenario: OutlierScenario) -> tuple[float, ...]:
    """Almost-sure limits of the size estimators, given the realized path.

    The size estimators are not consistent; they settle on a random limit
    determined by the observations surrounding each outlier.
    """
    if scenario.family != "additive":
        raise ValidationError("additive limits need an additive scenario")
    y = series.array.astype(float)
    n = series.n
    if scenario.adjacent:
        s = scenario.times[0]
        if s + 2 > n:
            raise BadTimes(f"adjacent pair at {s} needs an observation at {s + 2}")
        denom = 1.0 + alpha**2 + alpha**4
        shared = (1.0 - alpha**3) * mu_eps
        first = y[s] + (
            -alpha * (1.0 + alpha * alpha) * y[s - 1] - alpha * alpha * y[s + 2] - shared
        ) / denom
        second = y[s + 1] + (
            -alpha * alpha * y[s - 1] - alpha * (1.0 + alpha * alpha) * y[s + 2] - shared
        ) / denom
        return (float(first), float(second))
    out = []
    for s in scenario.times:
        if s + 1 > n:
            raise BadTimes(f"outlier at {s} needs an observation at {s + 1}")
        out.append(
            float(
                y[s]
                - alpha / (1.0 + alpha * alpha) * (y[s - 1] + y[s + 1])
                - (1.0 - alpha) / (1.0 + alpha * alpha) * mu_eps
            )
        )
    return tuple(out)


def _limit_jacobian(alpha: float, mu_eps: float, series: Series,
                    scenario: OutlierScenario) -> np.ndarray:
    """Rows: d(limit_i)/d(alpha[, mu]) in closed form."""
    y = series.array.astype(float)
    rows = []
    if scenario.adjacent:
        s = scenario.times[0]
        denom2 = (1.0 + alpha**2 + alpha**4) ** 2
        heavy = (alpha * alpha - 1.0) * (alpha**4 + 3.0 * alpha**2 + 1.0)
        light = 2.0 * alpha * (alpha**4 - 1.0)
        mu_term = alpha * (2.0 - alpha) * (1.0 + alpha + alpha * alpha) ** 2 * mu_eps
        d_mu = (alpha**3 - 1.0) / (1.0 + alpha**2 + alpha**4)
        rows.append([(heavy * y[s - 1] + light * y[s + 2] + mu_term) / denom2, d_mu])
        rows.append([(light * y[s - 1] + heavy * y[s + 2] + mu_term) / denom2, d_mu])
    else:
        d_mu = -(1.0 - alpha) / (1.0 + alpha * alpha)
        for s in scenario.times:
            factor = (
                (alpha * alpha - 1.0) * (y[s - 1] + y[s + 1])
                + (1.0 + 2.0 * alpha - alpha * alpha) * mu_eps
            ) / (1.0 + alpha * alpha) ** 2
            rows.append([factor, d_mu])
    return np.array(rows)


def additive_conditional_law(alpha: float, mu_eps: float, model: ModelSpec,
                             series: Series, scenario: OutlierScenario) -> AsymptoticLaw:
    """Limits plus the conditional asymptotic covariance of the size estimators.

    With the innovation mean known the driver is the scalar variance of the
    alpha estimator; with it unknown, the joint 2x2 covariance — in both
    cases the closed-form coefficient rows below multiply it.
    """
    limits = additive_limit_values(alpha, mu_eps, series, scenario)
    cov_info = cls_covariance(model.with_alpha(alpha))
    jac = _limit_jacobian(alpha, mu_eps, series, scenario)
    if scenario.mu_known:
        vec = jac[:, 0]
        cov = cov_info.sigma2_alpha * np.outer(vec, vec)
    else:
        cov = jac @ cov_info.b_mat @ jac.T
    return AsymptoticLaw(limits=limits, cov=cov, sigma2_alpha=cov_info.sigma2_alpha)
