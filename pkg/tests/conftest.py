import numpy as np
import pytest
from hypothesis import settings

import inarout as io

settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def base_model():
    """alpha=0.5, Poisson(1), fixed start at 2 (the stationary mean)."""
    return io.ModelSpec(alpha=0.5, innovation=io.InnovationDist.poisson(1.0), init=2)


@pytest.fixture(scope="session")
def stationary_model():
    """Same chain but started in its stationary law.

    For Poisson innovations the stationary distribution is itself Poisson
    with mean mu/(1-alpha): thinning a Poisson(m) gives Poisson(alpha*m) and
    adding an independent Poisson(lam) gives Poisson(alpha*m + lam), which
    equals Poisson(m) exactly when m = lam/(1-alpha).
    """
    return io.ModelSpec(
        alpha=0.5,
        innovation=io.InnovationDist.poisson(1.0),
        init=io.InnovationDist.poisson(2.0),
    )


@pytest.fixture(scope="session")
def long_path(stationary_model):
    """One million steps of the stationary-started chain; shared by the
    moment and pgf acceptance checks."""
    cfg = io.SimConfig(model=stationary_model, n=1_000_000, seed=20260815)
    return io.simulate_inar1(cfg)


def batch_mean_se(values, batches=1000):
    """Standard error of the mean of a weakly dependent sequence via batch
    means; correlations decay geometrically so distant batches are
    effectively independent."""
    values = np.asarray(values, dtype=float)
    usable = (len(values) // batches) * batches
    means = values[:usable].reshape(batches, -1).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(batches))


@pytest.fixture(scope="session")
def se_of():
    return batch_mean_se
