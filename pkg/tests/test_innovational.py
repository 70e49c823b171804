import numpy as np
import pytest

import _oracles
from inarout import (
    BadTimes,
    DegenerateDenominator,
    InnovationDist,
    ModelSpec,
    OutlierScenario,
    Series,
    SimConfig,
    ValidationError,
    child_seed,
    estimate_innovational,
    innovational_conditional_law,
    innovational_limit_values,
    innovational_objective,
    simulate_observed,
    z_moments,
)
from inarout.innovational import _hessian

MODEL = ModelSpec(0.5, InnovationDist.poisson(1.0), init=2)

TAG_CASES = {
    "INN1": OutlierScenario("innovational", times=(14,), sizes=(8,), mu_known=True),
    "INN1M": OutlierScenario("innovational", times=(14,), sizes=(8,), mu_known=False),
    "INN2": OutlierScenario("innovational", times=(10, 24), sizes=(8, 6), mu_known=True),
    "INN2M": OutlierScenario("innovational", times=(10, 24), sizes=(8, 6), mu_known=False),
}


def observed(tag, n=45, seed=0):
    sc = TAG_CASES[tag]
    cfg = SimConfig(model=MODEL, n=n, seed=child_seed("inn", tag, n, seed), scenario=sc)
    return simulate_observed(cfg), sc


def mu_arg(sc):
    return 1.0 if sc.mu_known else None


class TestObjective:
    def test_matches_longhand_oracle(self):
        rng = np.random.default_rng(3)
        for tag, sc in TAG_CASES.items():
            y, _ = observed(tag, seed=1)
            for _ in range(5):
                alpha = rng.uniform(-0.8, 1.5)
                thetas = rng.uniform(-3, 12, size=sc.count)
                mu = 1.0 if sc.mu_known else rng.uniform(0.2, 3.0)
                params = (alpha, *(() if sc.mu_known else (mu,)), *thetas)
                mine = innovational_objective(y, sc, params, mu_eps=mu_arg(sc))
                ref = _oracles.naive_objective(
                    "innovational", y.array, sc.times, params, mu_eps=mu_arg(sc)
                )
                assert mine == pytest.approx(ref, rel=1e-12)

    def test_rejects_additive_scenarios(self):
        sc = OutlierScenario("additive", times=(2,))
        with pytest.raises(ValidationError):
            innovational_objective(Series((1, 2, 1, 3)), sc, (0.5, 1.0), mu_eps=1.0)


class TestEstimation:
    def test_reference_values(self):
        # Y = (1, 2, 1, 3, 2), outlier at 2, mu = 1 known: the k = 2 term is
        # zeroed by theta, leaving alpha = 6/11 from the remaining sums, and
        # theta = 1 - (6/11) * 2 - 1 = -12/11
        sc = OutlierScenario("innovational", times=(2,), mu_known=True)
        report = estimate_innovational(Series((1, 2, 1, 3, 2)), sc, mu_eps=1.0)
        assert report.alpha_hat == pytest.approx(6.0 / 11.0, abs=1e-14)
        assert report.theta_hat[0] == pytest.approx(-12.0 / 11.0, abs=1e-13)
        assert report.tag == "INN1"
        assert report.optimizer.method == "closed-form"

    def test_size_estimate_zeroes_its_residual(self):
        for tag, sc in TAG_CASES.items():
            y, _ = observed(tag, seed=2)
            report = estimate_innovational(y, sc.without_sizes(), mu_eps=mu_arg(sc))
            mu_val = 1.0 if sc.mu_known else report.mu_hat
            arr = y.array.astype(float)
            for s, th in zip(sc.times, report.theta_hat):
                assert th == pytest.approx(
                    arr[s] - report.alpha_hat * arr[s - 1] - mu_val, abs=1e-12
                ), tag

    def test_objective_value_consistent(self):
        for tag, sc in TAG_CASES.items():
            y, _ = observed(tag, seed=3)
            report = estimate_innovational(y, sc.without_sizes(), mu_eps=mu_arg(sc))
            params = (
                report.alpha_hat,
                *(() if sc.mu_known else (report.mu_hat,)),
                *report.theta_hat,
            )
            direct = innovational_objective(y, sc, params, mu_eps=mu_arg(sc))
            assert report.objective_value == pytest.approx(direct, rel=1e-12), tag

    def test_matches_brute_force(self):
        for tag, sc in TAG_CASES.items():
            for seed in (4, 5):
                y, _ = observed(tag, seed=seed)
                report = estimate_innovational(y, sc.without_sizes(), mu_eps=mu_arg(sc))
                ref = _oracles.brute_force_minimize(
                    "innovational", y, sc.times, mu_eps=mu_arg(sc)
                )
                mine = np.array(
                    [report.alpha_hat]
                    + ([report.mu_hat] if not sc.mu_known else [])
                    + list(report.theta_hat)
                )
                assert np.max(np.abs(mine - ref)) < 1e-6, (tag, seed)

    def test_reference_scale_recovery(self):
        # two sizeable outliers on a 300-step path: estimates land near truth
        model = ModelSpec(0.4, InnovationDist.poisson(2.0), init=3)
        sc = OutlierScenario(
            "innovational", times=(40, 120), sizes=(8, 6), mu_known=False
        )
        cfg = SimConfig(model=model, n=300, seed=child_seed("inn-ref"), scenario=sc)
        y = simulate_observed(cfg)
        report = estimate_innovational(y, sc.without_sizes())
        ref = _oracles.brute_force_minimize("innovational", y, sc.times, mu_eps=None)
        mine = np.array([report.alpha_hat, report.mu_hat, *report.theta_hat])
        assert np.max(np.abs(mine - ref)) < 1e-5
        assert abs(report.alpha_hat - 0.4) < 0.15
        assert abs(report.mu_hat - 2.0) < 0.6

    def test_gradient_vanishes_tightly_on_moderate_samples(self):
        # closed forms leave only rounding; at n <= 2000 that is far below
        # the generic optimizer gate
        for tag, sc in TAG_CASES.items():
            y, _ = observed(tag, n=2000, seed=6)
            report = estimate_innovational(y, sc.without_sizes(), mu_eps=mu_arg(sc))
            mu_val = 1.0 if sc.mu_known else report.mu_hat
            arr = y.array.astype(float)
            lag, cur = arr[:-1], arr[1:]
            e = cur - report.alpha_hat * lag - mu_val
            for s, th in zip(sc.times, report.theta_hat):
                e[s - 1] -= th
            grads = [2.0 * float(e @ lag)]
            if not sc.mu_known:
                grads.append(2.0 * float(np.sum(e)))
            grads.extend(2.0 * float(e[s - 1]) for s in sc.times)
            assert max(abs(g) for g in grads) < 1e-10, tag

    def test_certificate_closed_forms(self):
        # minors of the (constant) Hessian: Delta_1 = 2 sum y^2 over all lags,
        # then each outlier column knocks out its own lag term
        y, sc = observed("INN2", seed=7)
        report = estimate_innovational(y, sc.without_sizes(), mu_eps=1.0)
        arr = y.array.astype(float)
        lag2 = float(arr[:-1] @ arr[:-1])
        s1, s2 = sc.times
        want = (
            2.0 * lag2,
            4.0 * (lag2 - arr[s1 - 1] ** 2),
            8.0 * (lag2 - arr[s1 - 1] ** 2 - arr[s2 - 1] ** 2),
        )
        assert np.allclose(report.certificate, want, rtol=1e-8)
        assert all(m > 0 for m in report.certificate)

    def test_certificate_positive_across_tags(self):
        for tag, sc in TAG_CASES.items():
            y, _ = observed(tag, n=200, seed=8)
            report = estimate_innovational(y, sc.without_sizes(), mu_eps=mu_arg(sc))
            assert all(m > 0 for m in report.certificate), tag
            dim = 1 + (0 if sc.mu_known else 1) + sc.count
            assert len(report.certificate) == dim

    def test_hessian_matches_finite_differences(self):
        rng = np.random.default_rng(19)
        for tag, sc in TAG_CASES.items():
            y, _ = observed(tag, seed=9)
            alpha = rng.uniform(-0.5, 1.2)
            head = () if sc.mu_known else (rng.uniform(0.3, 2.5),)
            thetas = tuple(rng.uniform(-2, 11, size=sc.count))
            params = np.array((alpha, *head, *thetas))
            fn = lambda p: innovational_objective(y, sc, p, mu_eps=mu_arg(sc))
            fd = _oracles.fd_hessian(fn, params)
            hess = _hessian(y, sc)
            scale = np.max(np.abs(fd)) + 1.0
            assert np.max(np.abs(hess - fd)) < 1e-4 * scale, tag

    def test_degenerate_known_mean(self):
        # every lag outside the excluded time is zero
        sc = OutlierScenario("innovational", times=(2,), mu_known=True)
        with pytest.raises(DegenerateDenominator):
            estimate_innovational(Series((0, 5, 0, 0)), sc, mu_eps=1.0)

    def test_degenerate_unknown_mean(self):
        # constant lags outside the excluded time make the design singular
        sc = OutlierScenario("innovational", times=(4,), mu_known=False)
        with pytest.raises(DegenerateDenominator):
            estimate_innovational(Series((2, 2, 2, 2, 9)), sc)

    def test_report_never_carries_true_sizes(self):
        y, sc = observed("INN2M", seed=10)
        report = estimate_innovational(y, sc.without_sizes())
        assert report.scenario.sizes is None
        assert report.tag == "INN2M"
        assert report.mu_hat is not None


class TestLimits:
    def test_reference_value(self):
        # Y_{s-1} = 3, Y_s = 12, alpha = .5, mu = 1: 12 - 1.5 - 1 = 9.5
        sc = OutlierScenario("innovational", times=(1,), mu_known=True)
        out = innovational_limit_values(0.5, 1.0, Series((3, 12, 4)), sc)
        assert out == (pytest.approx(9.5, abs=1e-13),)

    def test_alpha_zero(self):
        sc = OutlierScenario("innovational", times=(1,), mu_known=True)
        out = innovational_limit_values(0.0, 1.0, Series((3, 12, 4)), sc)
        assert out == (pytest.approx(11.0, abs=1e-14),)

    def test_no_right_neighbour_needed(self):
        # unlike the additive case, an outlier at the last time is fine
        sc = OutlierScenario("innovational", times=(2,), mu_known=True)
        out = innovational_limit_values(0.5, 1.0, Series((3, 4, 12)), sc)
        assert out == (pytest.approx(12 - 2 - 1),)

    def test_time_beyond_sample(self):
        sc = OutlierScenario("innovational", times=(5,), mu_known=True)
        with pytest.raises(BadTimes):
            innovational_limit_values(0.5, 1.0, Series((3, 4, 12)), sc)

    def test_two_outliers_decouple(self):
        sc = OutlierScenario("innovational", times=(1, 3), mu_known=True)
        y = Series((3, 12, 4, 9, 2))
        both = innovational_limit_values(0.5, 1.0, y, sc)
        assert both[0] == pytest.approx(12 - 1.5 - 1)
        assert both[1] == pytest.approx(9 - 2 - 1)


class TestConditionalLaw:
    def test_reference_variance_known_mean(self):
        # Y_{s-1} = 2: variance is 4 * sigma2_alpha = 4 * 11.5/36
        sc = OutlierScenario("innovational", times=(1,), mu_known=True)
        law = innovational_conditional_law(0.5, 1.0, MODEL, Series((2, 9, 3)), sc)
        assert law.cov[0, 0] == pytest.approx(4.0 * 11.5 / 36.0, rel=1e-12)

    def test_zero_lag_value_kills_the_variance(self):
        sc = OutlierScenario("innovational", times=(1,), mu_known=True)
        law = innovational_conditional_law(0.5, 1.0, MODEL, Series((0, 9, 3)), sc)
        assert law.cov[0, 0] == 0.0

    def test_reference_variance_unknown_mean(self):
        # row (Y_{s-1}, 1) = (2, 1) against B = [[7/8, -3/2], [-3/2, 4]]
        # gives 4*(7/8) - 2*2*(3/2) + 4 = 3/2
        sc = OutlierScenario("innovational", times=(1,), mu_known=False)
        law = innovational_conditional_law(0.5, 1.0, MODEL, Series((2, 9, 3)), sc)
        assert law.cov[0, 0] == pytest.approx(1.5, rel=1e-12)

    def test_known_mean_covariance_is_rank_one(self):
        sc = OutlierScenario("innovational", times=(1, 3), mu_known=True)
        law = innovational_conditional_law(0.5, 1.0, MODEL, Series((2, 9, 3, 8, 1)), sc)
        eig = np.linalg.eigvalsh(law.cov)
        assert eig[0] == pytest.approx(0.0, abs=1e-12)
        assert eig[-1] > 0

    def test_jacobian_consistency_via_finite_differences(self):
        # the covariance rows are minus the limit map's (alpha, mu) Jacobian;
        # signs cancel in J B J^T, so check cov == J_fd B J_fd^T directly
        from inarout import cls_covariance

        sc = OutlierScenario("innovational", times=(1, 3), mu_known=False)
        y = Series((2, 9, 3, 8, 1))
        alpha, mu = 0.45, 1.3
        model = MODEL.with_alpha(alpha)
        law = innovational_conditional_law(alpha, mu, model, y, sc)
        fn = lambda p: np.array(innovational_limit_values(p[0], p[1], y, sc))
        jac = _oracles.fd_jacobian(fn, np.array([alpha, mu]))
        want = jac @ cls_covariance(model).b_mat @ jac.T
        assert np.allclose(law.cov, want, rtol=1e-6, atol=1e-9)

    def test_limits_match_the_report(self):
        sc = OutlierScenario("innovational", times=(1, 3), mu_known=True)
        y = Series((2, 9, 3, 8, 1))
        law = innovational_conditional_law(0.5, 1.0, MODEL, y, sc)
        assert law.limits == innovational_limit_values(0.5, 1.0, y, sc)


class TestZMoments:
    def test_at_the_hit(self):
        mean, second, cross = z_moments(0.6, 5, 0)
        assert mean == 5.0
        assert second == 25.0
        assert cross is None

    def test_reference_values(self):
        # theta = 4, alpha = .5, k = 2: mean 1, second 1.75
        mean, second, _ = z_moments(0.5, 4, 2)
        assert mean == pytest.approx(1.0, abs=1e-15)
        assert second == pytest.approx(1.75, abs=1e-15)

    def test_reference_cross_moment(self):
        # k = 1: E Z_s Z_{s+1} = alpha * E Z_s^2 = .5 * 16 = 8
        _, _, cross = z_moments(0.5, 4, 1)
        assert cross == pytest.approx(8.0, abs=1e-15)

    def test_mean_decays_geometrically(self):
        for k in range(1, 12):
            mean, _, _ = z_moments(0.7, 6, k)
            assert mean == pytest.approx(6.0 * 0.7**k, rel=1e-12)

    def test_binomial_identity(self):
        # Z_{s+k} | Z_s = theta is Binomial(theta, alpha^k): check the
        # second moment against the textbook form
        for alpha, theta, k in ((0.3, 7, 3), (0.8, 2, 5), (0.55, 11, 1)):
            mean, second, _ = z_moments(alpha, theta, k)
            p = alpha**k
            assert second == pytest.approx(theta * p * (1 - p) + (theta * p) ** 2, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValidationError):
            z_moments(0.0, 5, 1)
        with pytest.raises(ValidationError):
            z_moments(1.0, 5, 1)
        with pytest.raises(ValidationError):
            z_moments(0.5, 0, 1)
        with pytest.raises(ValidationError):
            z_moments(0.5, 5, -1)


def test_empirical_z_moments_agree():
    # simulate the propagated component and check all three moments at a few
    # offsets against the closed forms, within 4 standard errors
    from inarout import simulate_innovational

    alpha, theta, s = 0.6, 5, 1
    model = ModelSpec(alpha, InnovationDist.poisson(1.0), init=2)
    sc = OutlierScenario("innovational", times=(s,), sizes=(theta,), mu_known=True)
    reps = 20_000
    ks = (0, 1, 2, 4)
    n = s + max(ks)
    z = np.empty((reps, len(ks)))
    for rep in range(reps):
        cfg = SimConfig(model=model, n=n, seed=child_seed("zmom", rep), scenario=sc)
        path = simulate_innovational(cfg).z[0].array
        z[rep] = [path[s + k] for k in ks]
    for j, k in enumerate(ks):
        mean, second, cross = z_moments(alpha, theta, k)
        se_mean = np.std(z[:, j], ddof=1) / np.sqrt(reps)
        assert abs(z[:, j].mean() - mean) < 4 * se_mean + 1e-12
        se_second = np.std(z[:, j] ** 2, ddof=1) / np.sqrt(reps)
        assert abs(np.mean(z[:, j] ** 2) - second) < 4 * se_second + 1e-12
        if k > 0:
            prod = z[:, j - 1] * z[:, j] if k in (1, 2) else None
            if prod is not None:
                se_prod = np.std(prod, ddof=1) / np.sqrt(reps)
                assert abs(prod.mean() - cross) < 4 * se_prod + 1e-12
