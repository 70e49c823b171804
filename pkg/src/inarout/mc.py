"""Deterministic, replication-parallel Monte Carlo harness.

Turns the asymptotic statements about the estimators into pass/fail
numerical experiments: simulate, estimate, compare against truth or against
the per-path random limits, and persist both raw per-replication records
and an aggregated summary.

Determinism contract: replication (n, rep) is driven entirely by a
substream derived from (master_seed, n, rep), and aggregation is an ordered
reduction over (n, rep) — so the persisted records are byte-identical for
one worker or many.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .additive import additive_conditional_law, estimate_additive
from .errors import CampaignFailed, DegenerateDenominator, OptimizerFailed, ValidationError
from .innovational import estimate_innovational, innovational_conditional_law
from .model import ModelSpec, OutlierScenario, Series, validate_scenario
from .moments import cls_covariance
from .simulate import (
    SimConfig,
    child_seed,
    simulate_innovational,
    simulate_innovational_direct,
    simulate_observed,
)

CHECKS = (
    "consistency",
    "limit_convergence",
    "conditional_clt",
    "covariance_match",
    "z_moments",
    "decomposition",
)

RECORD_FIELDS = (
    "n", "rep", "scenario", "alpha_hat", "mu_hat", "theta_hat_1", "theta_hat_2",
    "limit_1", "limit_2", "cond_var_11", "cond_var_12", "cond_var_22", "degenerate",
)
RECORD_HEADER = ",".join(RECORD_FIELDS)


@dataclass(frozen=True)
class McThresholds:
    """Pass/fail knobs; the defaults are the tolerances the release gate uses."""

    alpha_bias: float = 0.02
    mu_bias: float = 0.1
    limit_tol: float = 0.05
    limit_frac: float = 0.9
    var_lo: float = 0.85
    var_hi: float = 1.15
    ks_max: float = 0.05
    sigma_rel: float = 0.15
    b_rel: float = 0.20
    degenerate_frac: float = 0.01


@dataclass(frozen=True)
class McCampaign:
    model: ModelSpec
    scenario: OutlierScenario
    n_values: tuple[int, ...]
    replications: int
    master_seed: int
    checks: tuple[str, ...] = CHECKS[:4]
    thresholds: McThresholds = field(default_factory=McThresholds)

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "checks", tuple(self.checks))
        if not self.n_values or any(n <= 0 for n in self.n_values):
            raise ValidationError("n_values must be positive integers")
        if self.replications <= 0:
            raise ValidationError("replications must be positive")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ValidationError(f"unknown checks {bad!r}; choose from {CHECKS}")
        if self.scenario.sizes is None:
            raise ValidationError("campaign scenario needs true outlier sizes")
        if self.scenario.family != "innovational":
            for c in ("z_moments", "decomposition"):
                if c in self.checks:
                    raise ValidationError(f"check {c!r} needs an innovational scenario")
        mu_arg = self.model.innovation.mu if self.scenario.mu_known else None
        probe = Series((0,) * (min(self.n_values) + 1))
        validate_scenario(probe, self.scenario.without_sizes(), mu_arg)


@dataclass(frozen=True)
class McRecord:
    n: int
    rep: int
    scenario: str
    alpha_hat: float | None
    mu_hat: float | None
    theta_hat: tuple[float, ...]
    limits: tuple[float, ...]
    cond_var: tuple[float | None, float | None, float | None]  # (11, 12, 22)
    degenerate: bool

    def csv_row(self) -> str:
        def fmt(x):
            return "" if x is None else repr(float(x))

        th = list(self.theta_hat) + [None] * (2 - len(self.theta_hat))
        lim = list(self.limits) + [None] * (2 - len(self.limits))
        cells = [
            str(self.n), str(self.rep), self.scenario,
            fmt(self.alpha_hat), fmt(self.mu_hat),
            fmt(th[0]), fmt(th[1]), fmt(lim[0]), fmt(lim[1]),
            fmt(self.cond_var[0]), fmt(self.cond_var[1]), fmt(self.cond_var[2]),
            "1" if self.degenerate else "0",
        ]
        return ",".join(cells)

    @classmethod
    def from_csv_row(cls, line: str) -> "McRecord":
        cells = line.rstrip("\n").split(",")
        if len(cells) != len(RECORD_FIELDS):
            raise ValidationError(f"malformed record row: {line!r}")

        def num(cell):
            return None if cell == "" else float(cell)

        thetas = tuple(v for v in (num(cells[5]), num(cells[6])) if v is not None)
        limits = tuple(v for v in (num(cells[7]), num(cells[8])) if v is not None)
        return cls(
            n=int(cells[0]), rep=int(cells[1]), scenario=cells[2],
            alpha_hat=num(cells[3]), mu_hat=num(cells[4]),
            theta_hat=thetas, limits=limits,
            cond_var=(num(cells[9]), num(cells[10]), num(cells[11])),
            degenerate=cells[12] == "1",
        )


def write_records(records, path) -> None:
    with open(path, "w") as fh:
        fh.write(RECORD_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def read_records(path) -> list[McRecord]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != RECORD_HEADER:
            raise ValidationError(f"unexpected record header {header!r}")
        return [McRecord.from_csv_row(line) for line in fh if line.strip()]


def _ks_to_standard_normal(z) -> float:
    z = np.sort(np.asarray(z, dtype=float))
    r = len(z)
    cdf = np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in z])
    hi = np.arange(1, r + 1) / r - cdf
    lo = cdf - np.arange(0, r) / r
    return float(max(hi.max(), lo.max()))


def _mean_sd(vals):
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0:
        return None, None
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1)) if vals.size > 1 else None
    return mean, sd


def _replicate(campaign: McCampaign, n: int, rep: int):
    """One replication: returns (record, z_path_values | None, decomp_ok | None)."""
    model = campaign.model
    scen = campaign.scenario
    bare = scen.without_sizes()
    mu_true = model.innovation.mu
    mu_arg = mu_true if scen.mu_known else None
    seed = child_seed(campaign.master_seed, n, rep)
    cfg = SimConfig(model=model, n=n, seed=seed, scenario=scen)
    z_vals = None
    decomp_ok = None
    if scen.family == "additive":
        series = simulate_observed(cfg)
    else:
        path = simulate_innovational(cfg)
        series = path.y
        if "decomposition" in campaign.checks:
            direct = simulate_innovational_direct(cfg)
            decomp_ok = direct.values == path.y.values
        if "z_moments" in campaign.checks:
            s = scen.times[0]
            kmax = min(10, n - s)
            first = path.z[0]
            z_vals = tuple(float(first[s + k]) for k in range(kmax + 1))
    tag = validate_scenario(series, bare, mu_arg)
    try:
        if scen.family == "additive":
            est = estimate_additive(series, bare, mu_eps=mu_arg)
        else:
            est = estimate_innovational(series, bare, mu_eps=mu_arg)
    except (DegenerateDenominator, OptimizerFailed):
        rec = McRecord(
            n=n, rep=rep, scenario=tag, alpha_hat=None, mu_hat=None,
            theta_hat=(), limits=(), cond_var=(None, None, None), degenerate=True,
        )
        return rec, z_vals, decomp_ok
    if scen.family == "additive":
        law = additive_conditional_law(model.alpha, mu_true, model, series, bare)
    else:
        law = innovational_conditional_law(model.alpha, mu_true, model, series, bare)
    cov = law.cov
    if scen.count == 2:
        cond = (float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 1]))
    else:
        cond = (float(cov[0, 0]), None, None)
    rec = McRecord(
        n=n, rep=rep, scenario=tag,
        alpha_hat=est.alpha_hat, mu_hat=est.mu_hat,
        theta_hat=est.theta_hat, limits=law.limits,
        cond_var=cond, degenerate=False,
    )
    return rec, z_vals, decomp_ok


def _replicate_chunk(campaign: McCampaign, tasks):
    return [(n, rep, *_replicate(campaign, n, rep)) for n, rep in tasks]


def summarize_records(campaign: McCampaign, records) -> tuple[dict, dict]:
    """Aggregate persisted records: (per-n statistics, record-driven check results).

    Everything here is a pure function of the record rows, so reading the
    CSV back and re-running this reproduces the in-run summary exactly.
    """
    model = campaign.model
    alpha_true = model.alpha
    mu_true = model.innovation.mu
    mu_unknown = not campaign.scenario.mu_known
    th = campaign.thresholds
    cov_true = cls_covariance(model)
    n_outliers = campaign.scenario.count

    stats: dict = {}
    for n in campaign.n_values:
        rows = [r for r in records if r.n == n]
        ok = [r for r in rows if not r.degenerate]
        entry: dict = {"replications": len(rows), "degenerate": len(rows) - len(ok)}
        a_mean, a_sd = _mean_sd([r.alpha_hat for r in ok])
        entry["alpha"] = {
            "mean": a_mean, "sd": a_sd,
            "bias": None if a_mean is None else a_mean - alpha_true,
        }
        if mu_unknown:
            m_mean, m_sd = _mean_sd([r.mu_hat for r in ok])
            entry["mu"] = {
                "mean": m_mean, "sd": m_sd,
                "bias": None if m_mean is None else m_mean - mu_true,
            }
        gaps = [
            max(abs(t - l) for t, l in zip(r.theta_hat, r.limits)) for r in ok
        ]
        for i in range(n_outliers):
            t_mean, t_sd = _mean_sd([r.theta_hat[i] for r in ok])
            g_mean, g_sd = _mean_sd([r.theta_hat[i] - r.limits[i] for r in ok])
            zi = []
            for r in ok:
                var = r.cond_var[0] if i == 0 else r.cond_var[2]
                if var is not None and var > 0.0:
                    zi.append(math.sqrt(n) * (r.theta_hat[i] - r.limits[i]) / math.sqrt(var))
            z_mean, z_sd = _mean_sd(zi)
            entry[f"theta_{i + 1}"] = {
                "mean": t_mean, "sd": t_sd,
                "gap_mean": g_mean, "gap_sd": g_sd,
                "z_count": len(zi), "z_mean": z_mean,
                "z_var": None if z_sd is None else z_sd**2,
                "z_ks": _ks_to_standard_normal(zi) if len(zi) > 1 else None,
            }
        entry["limit_within_frac"] = (
            sum(g < th.limit_tol for g in gaps) / len(gaps) if gaps else None
        )
        scaled = [math.sqrt(n) * (r.alpha_hat - alpha_true) for r in ok]
        _, sc_sd = _mean_sd(scaled)
        entry["alpha_scaled_var"] = None if sc_sd is None else sc_sd**2
        if mu_unknown and len(ok) > 1:
            pairs = np.array(
                [[math.sqrt(n) * (r.alpha_hat - alpha_true),
                  math.sqrt(n) * (r.mu_hat - mu_true)] for r in ok]
            )
            emp = np.cov(pairs, rowvar=False, ddof=1)
            entry["joint_scaled_cov"] = [[float(emp[0, 0]), float(emp[0, 1])],
                                         [float(emp[1, 0]), float(emp[1, 1])]]
        stats[n] = entry

    results: dict = {}
    if "consistency" in campaign.checks:
        detail = {}
        for n in campaign.n_values:
            e = stats[n]
            ok_a = e["alpha"]["bias"] is not None and abs(e["alpha"]["bias"]) < th.alpha_bias
            ok_m = True
            if mu_unknown:
                ok_m = e["mu"]["bias"] is not None and abs(e["mu"]["bias"]) < th.mu_bias
            detail[n] = {
                "alpha_bias": e["alpha"]["bias"],
                "mu_bias": e["mu"]["bias"] if mu_unknown else None,
                "passed": bool(ok_a and ok_m),
            }
        results["consistency"] = {
            "passed": all(d["passed"] for d in detail.values()),
            "per_n": detail,
        }
    if "limit_convergence" in campaign.checks:
        detail = {}
        for n in campaign.n_values:
            frac = stats[n]["limit_within_frac"]
            detail[n] = {
                "within_frac": frac,
                "passed": frac is not None and frac >= th.limit_frac,
            }
        results["limit_convergence"] = {
            "passed": all(d["passed"] for d in detail.values()),
            "per_n": detail,
        }
    if "conditional_clt" in campaign.checks:
        detail = {}
        for n in campaign.n_values:
            coords = {}
            good = True
            for i in range(n_outliers):
                e = stats[n][f"theta_{i + 1}"]
                ok_i = (
                    e["z_var"] is not None
                    and th.var_lo <= e["z_var"] <= th.var_hi
                    and e["z_ks"] is not None
                    and e["z_ks"] < th.ks_max
                )
                coords[f"theta_{i + 1}"] = {
                    "z_var": e["z_var"], "z_ks": e["z_ks"], "passed": bool(ok_i),
                }
                good = good and ok_i
            detail[n] = {"coords": coords, "passed": bool(good)}
        results["conditional_clt"] = {
            "passed": all(d["passed"] for d in detail.values()),
            "per_n": detail,
        }
    if "covariance_match" in campaign.checks:
        detail = {}
        for n in campaign.n_values:
            e = stats[n]
            var = e["alpha_scaled_var"]
            # profiling mu out alongside alpha changes the alpha estimator's
            # limiting variance from sigma2_alpha to the joint matrix's corner
            ref_var = float(cov_true.b_mat[0, 0]) if mu_unknown else cov_true.sigma2_alpha
            ok_v = var is not None and abs(var - ref_var) <= th.sigma_rel * ref_var
            ok_b = True
            emp = e.get("joint_scaled_cov")
            if mu_unknown:
                ok_b = emp is not None
                if ok_b:
                    for i in range(2):
                        for j in range(2):
                            ref = cov_true.b_mat[i, j]
                            ok_b = ok_b and abs(emp[i][j] - ref) <= th.b_rel * abs(ref)
            detail[n] = {
                "alpha_scaled_var": var,
                "alpha_var_ref": ref_var,
                "joint_scaled_cov": emp if mu_unknown else None,
                "passed": bool(ok_v and ok_b),
            }
        results["covariance_match"] = {
            "passed": all(d["passed"] for d in detail.values()),
            "per_n": detail,
        }
    return stats, results


def _z_accumulators(campaign, aux_z):
    """Ordered reduction of per-replication Z path values, keyed by (n, offset)."""
    acc: dict = {}
    for n, seq in aux_z:
        for k, z in enumerate(seq):
            a = acc.setdefault((n, k), [0, 0.0, 0.0, 0.0, 0.0, 0.0, 0])
            a[0] += 1
            a[1] += z
            a[2] += z * z
            a[3] += z**4
            if k > 0:
                prev = seq[k - 1]
                a[4] += prev * z
                a[5] += (prev * z) ** 2
            if z == 0.0:
                a[6] += 1
    return acc


def _sample_se(count, total, total_sq):
    if count < 2:
        return 0.0
    var = (total_sq - total * total / count) / (count - 1)
    return math.sqrt(max(var, 0.0) / count)


def _z_moment_check(campaign: McCampaign, acc) -> dict:
    alpha = campaign.model.alpha
    theta = campaign.scenario.sizes[0]
    th_detail = {}
    passed = True
    slack = 1e-9
    for n in campaign.n_values:
        ks = sorted(k for (nn, k) in acc if nn == n)
        rows = []
        means = []
        ses = []
        for k in ks:
            c, s1, s2, s4, sc, sc2, zeros = acc[(n, k)]
            mean = s1 / c
            m2 = s2 / c
            ak = alpha**k
            want_mean = theta * ak
            want_m2 = theta * theta * ak * ak - theta * ak * (ak - 1.0)
            want0 = (1.0 - ak) ** theta
            # a constant all-zero sample carries no information when it is a
            # likely draw; only then may a zero sample SE excuse a mismatch
            all_zero_plausible = want0 > 0.0 and c * math.log(want0) >= math.log(1e-3)

            def close(emp, want, se):
                if se > 0.0:
                    return abs(emp - want) <= 3.0 * se + slack
                return abs(emp - want) <= slack or (emp == 0.0 and all_zero_plausible)

            # the mean's SE comes from the exact variance of the component
            se_mean = math.sqrt(max(want_m2 - want_mean**2, 0.0) / c)
            ok = close(mean, want_mean, se_mean)
            ok = ok and close(m2, want_m2, _sample_se(c, s2, s4))
            cross = None
            if k > 0:
                cross = sc / c
                prev = alpha ** (k - 1)
                want_cross = alpha * (theta * theta * prev * prev - theta * prev * (prev - 1.0))
                ok = ok and close(cross, want_cross, _sample_se(c, sc, sc2))
            frac0 = zeros / c
            se0 = math.sqrt(want0 * (1.0 - want0) / c)
            ok = ok and close(frac0, want0, se0)
            rows.append({
                "k": k, "count": c, "mean": mean, "second": m2,
                "cross": cross, "zero_frac": frac0, "passed": bool(ok),
            })
            means.append(mean)
            ses.append(se_mean)
            passed = passed and ok
        for i in range(1, len(means)):
            if means[i] > means[i - 1] + 3.0 * (ses[i] + ses[i - 1]) + slack:
                passed = False
                rows[i]["monotone_violation"] = True
        th_detail[n] = rows
    return {"passed": bool(passed), "per_n": th_detail}


@dataclass
class McSummary:
    n_values: tuple[int, ...]
    replications: int
    checks: tuple[str, ...]
    thresholds: McThresholds
    total: int
    degenerate_count: int
    stats: dict
    check_results: dict

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.check_results.values())

    @property
    def degenerate_fraction(self) -> float:
        return self.degenerate_count / self.total if self.total else 0.0

    def to_json(self) -> str:
        payload = {
            "n_values": list(self.n_values),
            "replications": self.replications,
            "checks": list(self.checks),
            "thresholds": {k: getattr(self.thresholds, k)
                           for k in self.thresholds.__dataclass_fields__},
            "total": self.total,
            "degenerate_count": self.degenerate_count,
            "degenerate_fraction": self.degenerate_fraction,
            "passed": self.passed,
            "stats": {str(n): v for n, v in self.stats.items()},
            "check_results": {
                name: _stringify_keys(res) for name, res in self.check_results.items()
            },
        }
        return json.dumps(payload, indent=2)


def _stringify_keys(obj):
    if isinstance(obj, dict):
        return {str(k): _stringify_keys(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_stringify_keys(v) for v in obj]
    return obj


def run_campaign(campaign: McCampaign, workers: int = 1,
                 records_csv=None, summary_json=None) -> McSummary:
    """Execute every replication, persist records/summary, aggregate checks.

    Raises CampaignFailed (after persisting) if the degenerate fraction
    exceeds its budget.
    """
    tasks = [(n, rep) for n in campaign.n_values for rep in range(campaign.replications)]
    if workers <= 1:
        raw = [(n, rep, *_replicate(campaign, n, rep)) for n, rep in tasks]
    else:
        chunk_size = max(1, len(tasks) // (4 * workers))
        chunks = [tasks[i:i + chunk_size] for i in range(0, len(tasks), chunk_size)]
        raw = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_replicate_chunk, [campaign] * len(chunks), chunks):
                raw.extend(part)
        order = {t: i for i, t in enumerate(tasks)}
        raw.sort(key=lambda item: order[(item[0], item[1])])

    records = [item[2] for item in raw]
    aux_z = [(item[0], item[3]) for item in raw if item[3] is not None]
    aux_decomp = [item[4] for item in raw if item[4] is not None]

    if records_csv is not None:
        write_records(records, records_csv)

    stats, check_results = summarize_records(campaign, records)
    if "z_moments" in campaign.checks:
        check_results["z_moments"] = _z_moment_check(campaign, _z_accumulators(campaign, aux_z))
    if "decomposition" in campaign.checks:
        fails = sum(1 for ok in aux_decomp if not ok)
        check_results["decomposition"] = {
            "passed": fails == 0, "paths": len(aux_decomp), "mismatches": fails,
        }

    degenerate_count = sum(1 for r in records if r.degenerate)
    summary = McSummary(
        n_values=campaign.n_values,
        replications=campaign.replications,
        checks=campaign.checks,
        thresholds=campaign.thresholds,
        total=len(records),
        degenerate_count=degenerate_count,
        stats=stats,
        check_results=check_results,
    )
    if summary_json is not None:
        with open(summary_json, "w") as fh:
            fh.write(summary.to_json() + "\n")
    if summary.degenerate_fraction > campaign.thresholds.degenerate_frac:
        raise CampaignFailed(
            f"{degenerate_count}/{len(records)} replications degenerate "
            f"(budget {campaign.thresholds.degenerate_frac:.2%})"
        )
    return summary
