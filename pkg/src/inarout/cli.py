"""Command-line front door: simulate, estimate, moments, mc.

Exit codes: 0 success, 2 validation/usage error, 3 degenerate data or a
failed campaign run, 4 campaign finished but a check missed its threshold.

The `estimate` subcommand accepts outlier *times* only, never true sizes —
sizes are what the estimator is for.
"""

from __future__ import annotations

import argparse
import json
import sys

from .additive import estimate_additive
from .baseline import cls_alpha, cls_joint
from .errors import (
    CampaignFailed,
    DegenerateDenominator,
    InarError,
    OptimizerFailed,
    ValidationError,
)
from .innovational import estimate_innovational
from .mc import CHECKS, McCampaign, McThresholds, run_campaign
from .model import InnovationDist, ModelSpec, OutlierScenario
from .moments import cls_covariance, stationary_moments
from .simulate import SimConfig, read_series, series_text, simulate_observed, write_series


def _parse_innov(text: str) -> InnovationDist:
    kind, _, rest = text.partition(":")
    if kind == "poisson":
        try:
            return InnovationDist.poisson(float(rest))
        except ValueError as exc:
            raise ValidationError(f"bad poisson spec {text!r}: {exc}") from None
    if kind == "pmf":
        pairs = []
        for chunk in rest.split(","):
            v, _, p = chunk.partition(":")
            if not p:
                raise ValidationError(f"bad pmf entry {chunk!r}; expected value:prob")
            pairs.append((int(v), float(p)))
        return InnovationDist.finite_pmf(pairs)
    raise ValidationError(f"unknown innovation spec {text!r}; use poisson:<lam> or pmf:<v:p,...>")


def _parse_x0(text: str):
    try:
        return int(text)
    except ValueError:
        return _parse_innov(text)


def _parse_outlier(text: str, mu_known: bool, need_sizes: bool) -> OutlierScenario:
    parts = text.split(":")
    family = parts[0]
    fields = {}
    for part in parts[1:]:
        key, _, val = part.partition("=")
        if not val:
            raise ValidationError(f"bad outlier component {part!r}; expected key=value")
        fields[key] = val
    if "s" not in fields:
        raise ValidationError(f"outlier spec {text!r} is missing s=<time>")
    times = tuple(int(t) for t in fields["s"].split(","))
    sizes = None
    if "theta" in fields:
        sizes = tuple(int(v) for v in fields["theta"].split(","))
    if need_sizes and sizes is None:
        raise ValidationError(f"outlier spec {text!r} needs theta=<size>[,<size>]")
    return OutlierScenario(family=family, times=times, sizes=sizes, mu_known=mu_known)


def _cmd_simulate(args) -> int:
    model = ModelSpec(alpha=args.alpha, innovation=_parse_innov(args.innov),
                      init=_parse_x0(args.x0))
    scenario = None
    if args.outlier:
        scenario = _parse_outlier(args.outlier, mu_known=True, need_sizes=True)
    config = SimConfig(model=model, n=args.n, seed=args.seed, scenario=scenario)
    series = simulate_observed(config)
    if args.out:
        write_series(series, args.out, fmt=args.format)
    else:
        sys.stdout.write(series_text(series, fmt=args.format))
    return 0


def _cmd_estimate(args) -> int:
    series = read_series(args.infile)
    if args.scenario == "none":
        if args.mu is not None:
            payload = {"scenario": "none", "alpha_hat": cls_alpha(series, args.mu)}
        else:
            alpha_hat, mu_hat = cls_joint(series)
            payload = {"scenario": "none", "alpha_hat": alpha_hat, "mu_hat": mu_hat}
        print(json.dumps(payload, indent=2))
        return 0
    if args.s1 is None:
        raise ValidationError("estimate needs --s1 (first outlier time)")
    times = (args.s1,) if args.s2 is None else (args.s1, args.s2)
    scenario = OutlierScenario(family=args.scenario, times=times, sizes=None,
                               mu_known=args.mu is not None)
    if args.scenario == "additive":
        report = estimate_additive(series, scenario, mu_eps=args.mu, method=args.method)
    else:
        report = estimate_innovational(series, scenario, mu_eps=args.mu)
    payload = {
        "scenario": report.tag,
        "family": args.scenario,
        "times": list(times),
        "alpha_hat": report.alpha_hat,
        "mu_hat": report.mu_hat,
        "theta_hat": list(report.theta_hat),
        "objective_value": report.objective_value,
        "optimizer": {
            "method": report.optimizer.method,
            "iterations": report.optimizer.iterations,
            "bracket": list(report.optimizer.bracket) if report.optimizer.bracket else None,
        },
        "certificate": list(report.certificate),
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_moments(args) -> int:
    model = ModelSpec(alpha=args.alpha, innovation=_parse_innov(args.innov))
    mom = stationary_moments(model)
    cov = cls_covariance(model)
    payload = {
        "m1": mom.m1,
        "m2": mom.m2,
        "m3": mom.m3,
        "var": mom.var,
        "sigma2_alpha": cov.sigma2_alpha,
        "a_mat": cov.a_mat.tolist(),
        "b_mat": cov.b_mat.tolist(),
    }
    print(json.dumps(payload, indent=2))
    return 0


_MC_KEYS = (
    "alpha", "innov", "x0", "outlier", "mu_known", "n_values", "replications",
    "master_seed", "checks", "workers", "records_csv", "summary_json",
)
_THRESHOLD_KEYS = tuple(McThresholds.__dataclass_fields__)


def _load_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValidationError(f"bad config line {raw!r}; expected key=value")
            out[key.strip()] = val.strip()
    return out


def _as_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def _cmd_mc(args) -> int:
    cfg = _load_config(args.config) if args.config else {}
    for key in _MC_KEYS:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            cfg[key] = cli_val
    unknown = set(cfg) - set(_MC_KEYS) - set(_THRESHOLD_KEYS)
    if unknown:
        raise ValidationError(f"unknown campaign keys {sorted(unknown)!r}")
    for key in ("alpha", "innov", "outlier", "n_values", "replications", "master_seed"):
        if key not in cfg:
            raise ValidationError(f"campaign needs {key!r} (config file or flag)")

    model = ModelSpec(
        alpha=float(cfg["alpha"]),
        innovation=_parse_innov(str(cfg["innov"])),
        init=_parse_x0(str(cfg.get("x0", "0"))),
    )
    mu_known = _as_bool(str(cfg.get("mu_known", "true")))
    scenario = _parse_outlier(str(cfg["outlier"]), mu_known=mu_known, need_sizes=True)
    checks = cfg.get("checks")
    if checks is None:
        checks = CHECKS[:4]
    elif isinstance(checks, str):
        checks = tuple(c.strip() for c in checks.split(",") if c.strip())
    overrides = {k: float(cfg[k]) for k in _THRESHOLD_KEYS if k in cfg}
    campaign = McCampaign(
        model=model,
        scenario=scenario,
        n_values=tuple(int(v) for v in str(cfg["n_values"]).split(",")),
        replications=int(cfg["replications"]),
        master_seed=int(cfg["master_seed"]),
        checks=checks,
        thresholds=McThresholds(**overrides),
    )
    workers = int(cfg.get("workers", 1))
    summary = run_campaign(
        campaign,
        workers=workers,
        records_csv=cfg.get("records_csv"),
        summary_json=cfg.get("summary_json"),
    )
    if cfg.get("summary_json"):
        print(f"passed={summary.passed} degenerate={summary.degenerate_count}/{summary.total}")
    else:
        print(summary.to_json())
    return 0 if summary.passed else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inarout",
        description="Integer-valued AR(1) simulation and outlier-size estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a series (optionally contaminated)")
    p_sim.add_argument("--alpha", type=float, required=True)
    p_sim.add_argument("--innov", required=True,
                       help="poisson:<lam> or pmf:<value:prob,...>")
    p_sim.add_argument("--x0", default="0", help="integer start or a distribution spec")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--outlier", default=None,
                       help="<additive|innovational>:s=<t>[,<t2>]:theta=<v>[,<v2>]")
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate outlier sizes from a series file")
    p_est.add_argument("--in", dest="infile", required=True)
    p_est.add_argument("--scenario", choices=("additive", "innovational", "none"),
                       required=True)
    p_est.add_argument("--s1", type=int, default=None, help="first outlier time")
    p_est.add_argument("--s2", type=int, default=None, help="second outlier time")
    p_est.add_argument("--mu", type=float, default=None,
                       help="innovation mean, when it is known")
    p_est.add_argument("--method", choices=("grid", "poly"), default="grid")
    p_est.add_argument("--format", choices=("json",), default="json")
    p_est.set_defaults(func=_cmd_estimate)

    p_mom = sub.add_parser("moments", help="stationary moments and CLS covariances")
    p_mom.add_argument("--alpha", type=float, required=True)
    p_mom.add_argument("--innov", required=True)
    p_mom.set_defaults(func=_cmd_moments)

    p_mc = sub.add_parser("mc", help="run a Monte Carlo verification campaign")
    p_mc.add_argument("--config", default=None, help="flat key=value file")
    p_mc.add_argument("--alpha", dest="alpha", default=None)
    p_mc.add_argument("--innov", dest="innov", default=None)
    p_mc.add_argument("--x0", dest="x0", default=None)
    p_mc.add_argument("--outlier", dest="outlier", default=None)
    p_mc.add_argument("--mu-known", dest="mu_known", default=None,
                      help="true/false: treat the innovation mean as known")
    p_mc.add_argument("--n-values", dest="n_values", default=None)
    p_mc.add_argument("--replications", dest="replications", default=None)
    p_mc.add_argument("--master-seed", dest="master_seed", default=None)
    p_mc.add_argument("--checks", dest="checks", default=None)
    p_mc.add_argument("--workers", dest="workers", default=None)
    p_mc.add_argument("--records-out", dest="records_csv", default=None)
    p_mc.add_argument("--summary-out", dest="summary_json", default=None)
    p_mc.set_defaults(func=_cmd_mc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateDenominator, OptimizerFailed, CampaignFailed) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
