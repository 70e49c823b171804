"""Domain types and scenario validation.

The model is the integer-valued autoregression of order one

    X_k = sum_{j=1}^{X_{k-1}} xi_{k,j} + eps_k,

with i.i.d. Bernoulli(alpha) thinning variables xi and i.i.d. nonnegative
integer innovations eps.  Observed series may carry one or two outliers,
either additive (a shift added to the observed value at time s) or
innovational (a shift added to the innovation at time s, which then
propagates through the recursion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import BadTimes, MissingMu, SampleTooShort, ValidationError

SCENARIO_TAGS = (
    "ADD1", "ADD1M", "ADD2SEP", "ADD2SEPM", "ADD2ADJ", "ADD2ADJM",
    "INN1", "INN1M", "INN2", "INN2M",
)

#: default tolerance on the objective gradient max-norm at a reported optimum
GRADIENT_TOL = 1e-8


@dataclass(frozen=True)
class InnovationDist:
    """Innovation law: Poisson(lam) or a finite pmf on nonnegative integers.

    Both kinds have all three raw moments in closed form, which is everything
    the asymptotic formulas need.
    """

    kind: str
    lam: Optional[float] = None
    support: Optional[tuple[tuple[int, float], ...]] = None

    def __post_init__(self):
        if self.kind == "poisson":
            if self.lam is None or not self.lam > 0:
                raise ValidationError("poisson innovation needs lam > 0")
            if self.support is not None:
                raise ValidationError("poisson innovation takes no support")
        elif self.kind == "finite_pmf":
            if not self.support:
                raise ValidationError("finite_pmf innovation needs support points")
            total = 0.0
            positive_mass = 0.0
            for value, prob in self.support:
                if int(value) != value or value < 0:
                    raise ValidationError("pmf support values must be nonnegative integers")
                if prob < 0:
                    raise ValidationError("pmf probabilities must be nonnegative")
                total += prob
                if value > 0:
                    positive_mass += prob
            if abs(total - 1.0) > 1e-12:
                raise ValidationError(f"pmf probabilities sum to {total!r}, not 1")
            if positive_mass <= 0:
                raise ValidationError("innovation must satisfy P(eps != 0) > 0")
        else:
            raise ValidationError(f"unknown innovation kind {self.kind!r}")

    @classmethod
    def poisson(cls, lam: float) -> "InnovationDist":
        return cls(kind="poisson", lam=float(lam))

    @classmethod
    def finite_pmf(cls, pmf) -> "InnovationDist":
        """Build from a {value: probability} mapping or an iterable of pairs."""
        items = pmf.items() if hasattr(pmf, "items") else pmf
        support = tuple(sorted((int(v), float(p)) for v, p in items))
        return cls(kind="finite_pmf", support=support)

    def _raw_moment(self, r: int) -> float:
        if self.kind == "poisson":
            lam = self.lam
            if r == 1:
                return lam
            if r == 2:
                return lam + lam * lam
            # third raw moment of Poisson
            return lam**3 + 3 * lam**2 + lam
        return float(sum(p * v**r for v, p in self.support))

    @property
    def mu(self) -> float:
        return self._raw_moment(1)

    @property
    def sigma2(self) -> float:
        return self._raw_moment(2) - self.mu**2

    @property
    def third_raw(self) -> float:
        """E eps^3."""
        return self._raw_moment(3)

    def pgf(self, s: float) -> float:
        """E s^eps."""
        if self.kind == "poisson":
            return math.exp(self.lam * (s - 1.0))
        return float(sum(p * s**v for v, p in self.support))


@dataclass(frozen=True)
class ModelSpec:
    """Clean-process parameters: thinning mean, innovation law, initial law.

    ``init`` is either a fixed nonnegative integer or a distribution of the
    same family as the innovations (so the third moment always exists).
    """

    alpha: float
    innovation: InnovationDist
    init: Union[int, InnovationDist] = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie strictly inside (0, 1)")
        if isinstance(self.init, InnovationDist):
            pass
        elif isinstance(self.init, (int, np.integer)) and not isinstance(self.init, bool):
            if self.init < 0:
                raise ValidationError("fixed initial value must be nonnegative")
        else:
            raise ValidationError("init must be a nonnegative int or an InnovationDist")

    @property
    def init_mean(self) -> float:
        if isinstance(self.init, InnovationDist):
            return self.init.mu
        return float(self.init)

    def with_alpha(self, alpha: float) -> "ModelSpec":
        return replace(self, alpha=alpha)


@dataclass(frozen=True)
class OutlierScenario:
    """Which contamination to apply / estimate.

    ``sizes`` carries the true outlier magnitudes.  Simulation needs them;
    estimation must not see them — pass ``scenario.without_sizes()`` to any
    estimator-facing call.
    """

    family: str
    times: tuple[int, ...]
    sizes: Optional[tuple[int, ...]] = None
    mu_known: bool = True

    def __post_init__(self):
        if self.family not in ("additive", "innovational"):
            raise ValidationError(f"unknown outlier family {self.family!r}")
        times = tuple(int(t) for t in self.times)
        if len(times) not in (1, 2):
            raise ValidationError("scenario takes one or two outliers")
        if any(t < 1 for t in times):
            raise ValidationError("outlier times must be positive")
        sizes = self.sizes
        if sizes is not None:
            sizes = tuple(int(v) for v in sizes)
            if len(sizes) != len(times):
                raise ValidationError("sizes must match times one-to-one")
            if any(v < 0 for v in sizes):
                raise ValidationError("outlier sizes must be nonnegative integers")
        # canonical ascending order, carrying sizes along
        if len(times) == 2:
            if times[0] == times[1]:
                raise ValidationError("outlier times must be distinct")
            if times[0] > times[1]:
                times = (times[1], times[0])
                if sizes is not None:
                    sizes = (sizes[1], sizes[0])
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sizes", sizes)

    @property
    def count(self) -> int:
        return len(self.times)

    @property
    def adjacent(self) -> bool:
        """Two additive outliers at consecutive times."""
        return (
            self.family == "additive"
            and len(self.times) == 2
            and self.times[1] == self.times[0] + 1
        )

    def without_sizes(self) -> "OutlierScenario":
        return replace(self, sizes=None)


@dataclass(frozen=True)
class Series:
    """An observed path Y_0..Y_n; the array index is the time index."""

    values: tuple[int, ...]

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        if len(values) < 2:
            raise ValidationError("series needs at least two observations")
        if any(v < 0 for v in values):
            raise ValidationError("series values must be nonnegative integers")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_iterable(cls, values) -> "Series":
        return cls(tuple(int(v) for v in values))

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]


@dataclass(frozen=True)
class OptimizerInfo:
    method: str
    iterations: int
    bracket: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class EstimateReport:
    """Point estimates plus the diagnostics needed to audit them.

    ``certificate`` holds the leading principal minors of the objective
    Hessian at the optimum, in parameter order (alpha, mu?, theta...);
    all positive means the reported point is a certified strict minimum.
    """

    scenario: OutlierScenario
    tag: str
    alpha_hat: float
    mu_hat: Optional[float]
    theta_hat: tuple[float, ...]
    objective_value: float
    optimizer: OptimizerInfo
    certificate: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class AsymptoticLaw:
    """A.s. limits of the size estimators and their conditional covariance."""

    limits: tuple[float, ...]
    cov: np.ndarray
    sigma2_alpha: float

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValidationError("cov must be a square matrix")
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > 1e-10 * scale:
            raise ValidationError("cov must be symmetric")
        if np.min(np.linalg.eigvalsh((cov + cov.T) / 2.0)) < -1e-10 * scale:
            raise ValidationError("cov must be positive semidefinite")
        object.__setattr__(self, "cov", cov)


def validate_scenario(series: Series, scenario: OutlierScenario,
                      mu_eps: Optional[float] = None) -> str:
    """Classify (family, times, mu_known) into one of the ten scenario tags
    and enforce the per-scenario minimum sample size.

    Returns the tag; raises MissingMu / SampleTooShort / BadTimes.
    """
    if scenario.mu_known and mu_eps is None:
        raise MissingMu("scenario declares the innovation mean known; pass mu_eps")
    n = series.n
    times = scenario.times
    if scenario.family == "additive":
        if scenario.count == 1:
            s = times[0]
            tag = "ADD1" if scenario.mu_known else "ADD1M"
            minimum = s + 1 if scenario.mu_known else max(3, s + 1)
        elif scenario.adjacent:
            s = times[0]
            tag = "ADD2ADJ" if scenario.mu_known else "ADD2ADJM"
            minimum = s + 2 if scenario.mu_known else max(3, s + 2)
        else:
            s2 = times[1]
            tag = "ADD2SEP" if scenario.mu_known else "ADD2SEPM"
            minimum = s2 + 1 if scenario.mu_known else max(5, s2 + 1)
    else:
        if scenario.count == 1:
            s = times[0]
            tag = "INN1" if scenario.mu_known else "INN1M"
            minimum = max(3, s + 1) if scenario.mu_known else s
        else:
            s1, s2 = times
            tag = "INN2" if scenario.mu_known else "INN2M"
            minimum = max(3, s1, s2) if scenario.mu_known else max(s1, s2)
    if n < minimum:
        raise SampleTooShort(
            f"{tag} needs n >= {minimum}, got n = {n} (times {times})"
        )
    if max(times) > n:
        raise BadTimes(f"outlier times {times} exceed the sample horizon n = {n}")
    return tag
