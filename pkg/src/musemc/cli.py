"""Command-line front end.

Five subcommands cover the shipped experiments: ``estimate`` (one process /
reward / schedule), ``tune-rate`` (grid search of the geometric rate by
cost-adjusted variance), ``gaussian-suite`` (estimator vs. oracle vs. biased
baselines across horizons), ``bermudan`` (max-timing of a discounted basket
put under GBM), and ``stop`` (episodes of the estimator-driven stopping
policy).  Every command honors ``--seed``, ``--workers`` (overridden by the
``MUSE_WORKERS`` environment variable), ``--out-dir``, and ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .baselines import TreeSpec, gaussian_dp_oracle, mc1_estimate, mc2_estimate
from .estimator import LevelPolicy, MuseReplicateTask, RateSchedule, theoretical_rate_schedule
from .inference import bootstrap_ci, clt_ci, self_normalized_variance, summarize, summary_to_json
from .parallel import run_replicated, map_replicated, resolve_workers
from .policy import PolicyConfig, PolicyEpisodeTask, run_stopping_policy, write_episode_log
from .processes import gaussian_iid, gbm, process_spec_from_dict
from .rewards import basket_put, identity_reward, reward_spec_from_dict
from .streams import derive_substream

_BOOTSTRAP_KEY = 1 << 62  # reserved stream namespace; never collides with replicate paths


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed keying every stream in the run")
    common.add_argument("--workers", type=int, default=None, help="worker processes (MUSE_WORKERS overrides)")
    common.add_argument("--out-dir", default=".", help="directory for CSV/JSON outputs")
    common.add_argument("--config", default=None, help="JSON file with 'process'/'reward' objects")

    parser = argparse.ArgumentParser(prog="muse", description="Unbiased multilevel estimation for optimal stopping")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="estimate the stopping value of one instance")
    _add_process_flags(p)
    _add_schedule_flags(p)
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--ci", choices=["clt", "bootstrap"], default="clt")
    p.add_argument("--bootstrap-resamples", type=int, default=1000)
    p.add_argument("--truncate-level", type=int, default=None, help="cap levels at M (biased diagnostic mode)")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("tune-rate", parents=[common], help="grid-search the geometric rate")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--r-min", type=float, default=0.51)
    p.add_argument("--r-max", type=float, default=0.70)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--replicates", type=int, default=100_000)
    p.set_defaults(handler=_cmd_tune_rate)

    p = sub.add_parser("gaussian-suite", parents=[common], help="estimator vs oracle vs baselines across horizons")
    p.add_argument("--horizons", default="2,3,4", help="comma-separated horizons")
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--rates", default="0.6", help="constant rate or per-stage list for the longest horizon")
    p.add_argument("--mc1-paths", type=int, default=100_000)
    p.add_argument("--trees", type=int, default=1000)
    p.add_argument("--arity", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(handler=_cmd_gaussian_suite)

    p = sub.add_parser("bermudan", parents=[common], help="discounted basket put under multi-asset GBM")
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--strike", type=float, default=100.0)
    p.add_argument("--spot", type=float, default=100.0)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--rate", type=float, default=0.05, help="risk-free rate (drift and discount)")
    p.add_argument("--div", type=float, default=0.0, help="dividend yield")
    p.add_argument("--dates", default="0,1,2,3", help="comma-separated exercise dates (years)")
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--geo-rate", default="0.6", help="geometric rate(s) for the level draws")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(handler=_cmd_bermudan)

    p = sub.add_parser("stop", parents=[common], help="run the estimator-driven stopping policy")
    _add_process_flags(p)
    _add_schedule_flags(p)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--inner-replicates", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=None, help="fixed slack; omit for the adaptive CI slack")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(handler=_cmd_stop)

    return parser


def _add_process_flags(p):
    p.add_argument("--process", choices=["gaussian-iid", "gbm", "user-discrete"], default="gaussian-iid")
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--dimension", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.05, help="GBM drift / discount rate")
    p.add_argument("--div", type=float, default=0.0, help="GBM dividend yield")
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--spot", type=float, default=100.0)
    p.add_argument("--dates", default=None, help="comma-separated stage times for GBM/BasketPut")
    p.add_argument("--reward", choices=["identity", "basket-put"], default=None)
    p.add_argument("--strike", type=float, default=None)


def _add_schedule_flags(p):
    p.add_argument("--rates", default=None, help="constant geometric rate or comma-separated per-stage rates")
    p.add_argument("--delta-mom", type=float, default=None, help="derive rates from the moment-budget formula")


def _parse_floats(text):
    return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]


def _load_config(args) -> dict:
    if not args.config:
        return {}
    with open(args.config) as fh:
        return json.load(fh)


def _resolve_instance(args, config):
    """Build (process, reward) from config objects, falling back to flags."""
    if "process" in config:
        process = process_spec_from_dict(config["process"])
    elif args.process == "gaussian-iid":
        process = gaussian_iid(horizon=args.horizon, dimension=args.dimension)
    elif args.process == "gbm":
        if args.dates is None:
            raise ValueError("GBM needs --dates (one calendar time per stage)")
        dates = _parse_floats(args.dates)
        process = gbm(
            dimension=args.dimension,
            horizon=len(dates),
            gamma=args.gamma,
            div_yield=args.div,
            sigma=args.sigma,
            spot=args.spot,
            times=dates,
        )
    else:
        raise ValueError("user-discrete processes are configured via --config (support and transitions)")

    if "reward" in config:
        reward_spec = reward_spec_from_dict(config["reward"])
    else:
        kind = args.reward or ("basket-put" if args.process == "gbm" else "identity")
        if kind == "identity":
            reward_spec = identity_reward()
        else:
            strike = args.strike if args.strike is not None else args.spot
            reward_spec = basket_put(strike=strike, discount=args.gamma, times=process.times)
    return process, reward_spec


def _resolve_schedule(args, horizon) -> RateSchedule:
    if args.delta_mom is not None and args.rates is not None:
        raise ValueError("give either --rates or --delta-mom, not both")
    if args.delta_mom is not None:
        return theoretical_rate_schedule(args.delta_mom, horizon)
    rates = _parse_floats(args.rates if args.rates is not None else "0.6")
    if len(rates) == 1:
        return RateSchedule.constant(rates[0], horizon)
    if len(rates) != horizon - 1:
        raise ValueError(f"need 1 or {horizon - 1} rates for horizon {horizon}, got {len(rates)}")
    return RateSchedule(rates=tuple(rates))


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write_replicates_csv(path, samples):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate_id", "value", "top_level", "cost"])
        for i, s in enumerate(samples):
            writer.writerow([i, repr(s.value), s.top_level, s.cost])


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _estimate_and_write(args, process, reward_spec, schedule, policy, config_snapshot):
    task = MuseReplicateTask(process, reward_spec, schedule, policy)
    samples, values, costs, manifest = run_replicated(
        task, args.replicates, args.seed, workers=args.workers, config=config_snapshot
    )
    summary = summarize(values, costs, wall_time=manifest.wall_time)
    if getattr(args, "ci", "clt") == "bootstrap":
        ci = bootstrap_ci(values, alpha=args.alpha, resamples=getattr(args, "bootstrap_resamples", 1000),
                          stream=derive_substream(args.seed, (_BOOTSTRAP_KEY,)))
    else:
        ci = clt_ci(summary, alpha=args.alpha)
    _write_replicates_csv(_out_path(args, "replicates.csv"), samples)
    _write_json(_out_path(args, "summary.json"), summary_to_json(summary, ci))
    manifest.save(_out_path(args, "manifest.json"))
    print(
        f"n={summary.n}  mean={summary.mean:.6f}  se={summary.std_error:.6f}  "
        f"{100 * ci.level:.0f}% CI [{ci.lo:.6f}, {ci.hi:.6f}]  cost={summary.total_cost}  "
        f"wall={summary.wall_time:.2f}s  -> {args.out_dir}"
    )
    return summary, ci


def _cmd_estimate(args) -> int:
    config = _load_config(args)
    process, reward_spec = _resolve_instance(args, config)
    schedule = _resolve_schedule(args, process.horizon)
    policy = LevelPolicy() if args.truncate_level is None else LevelPolicy.truncated(args.truncate_level)
    snapshot = {
        "command": "estimate",
        "process_kind": process.kind,
        "horizon": process.horizon,
        "dimension": process.dimension,
        "rates": list(schedule.rates),
        "replicates": args.replicates,
        "level_policy": policy.mode,
    }
    _estimate_and_write(args, process, reward_spec, schedule, policy, snapshot)
    return 0


def _cmd_tune_rate(args) -> int:
    if not 0.5 < args.r_min <= args.r_max < 1.0:
        raise ValueError("the rate grid must satisfy 0.5 < r_min <= r_max < 1")
    if args.step <= 0:
        raise ValueError("step must be positive")
    process = gaussian_iid(horizon=args.horizon)
    reward_spec = identity_reward()
    grid = np.arange(args.r_min, args.r_max + 1e-12, args.step)
    rows = []
    manifests = []
    for r in grid:
        schedule = RateSchedule.constant(float(r), args.horizon)
        task = MuseReplicateTask(process, reward_spec, schedule)
        _, values, costs, manifest = run_replicated(task, args.replicates, args.seed, workers=args.workers)
        rows.append((float(r), float(costs.mean()), float(np.var(values, ddof=1)), self_normalized_variance(values, costs)))
        manifests.append(manifest.to_json())
    path = _out_path(args, "rate_grid.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "mean_cost", "variance", "self_normalized_variance"])
        for row in rows:
            writer.writerow([f"{row[0]:.6f}", repr(row[1]), repr(row[2]), repr(row[3])])
    _write_json(_out_path(args, "manifest.json"), {"command": "tune-rate", "points": manifests})
    best = min(rows, key=lambda row: row[3])
    print(f"minimum self-normalized variance {best[3]:.4f} at r={best[0]:.3f}  -> {path}")
    return 0


def _cmd_gaussian_suite(args) -> int:
    horizons = [int(float(tok)) for tok in str(args.horizons).split(",") if tok.strip()]
    if not horizons or min(horizons) < 2:
        raise ValueError("horizons must be a comma-separated list of integers >= 2")
    base_rates = _parse_floats(args.rates)
    rows = []
    manifests = []
    for horizon in horizons:
        process = gaussian_iid(horizon=horizon)
        reward_spec = identity_reward()
        if len(base_rates) == 1:
            schedule = RateSchedule.constant(base_rates[0], horizon)
        else:
            schedule = RateSchedule(rates=tuple(base_rates[: horizon - 1]))
        task = MuseReplicateTask(process, reward_spec, schedule)
        _, values, costs, manifest = run_replicated(task, args.replicates, args.seed, workers=args.workers)
        manifests.append(manifest.to_json())
        summary = summarize(values, costs, wall_time=manifest.wall_time)
        ci = clt_ci(summary, alpha=args.alpha)
        oracle = gaussian_dp_oracle(horizon)
        mc1 = mc1_estimate(process, reward_spec, horizon, args.mc1_paths, derive_substream(args.seed, (_BOOTSTRAP_KEY + 1, horizon)))
        tree = TreeSpec(arity=args.arity, depth=horizon, forest_size=args.trees)
        mc2 = mc2_estimate(process, reward_spec, tree, derive_substream(args.seed, (_BOOTSTRAP_KEY + 2, horizon)))
        rows.append(
            {
                "horizon": horizon,
                "oracle": oracle,
                "muse_mean": summary.mean,
                "muse_se": summary.std_error,
                "muse_ci_lo": ci.lo,
                "muse_ci_hi": ci.hi,
                "muse_total_cost": summary.total_cost,
                "mc1_mean": mc1,
                "mc1_bias": mc1 - oracle,
                "mc2_mean": mc2,
                "mc2_bias": mc2 - oracle,
            }
        )
        print(
            f"T={horizon}: oracle={oracle:.6f}  muse={summary.mean:.6f} (se {summary.std_error:.6f})  "
            f"mc1={mc1:.6f} (bias {mc1 - oracle:+.4f})  mc2={mc2:.6f} (bias {mc2 - oracle:+.4f})"
        )
    path = _out_path(args, "gaussian_suite.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (v if isinstance(v, int) else repr(float(v))) for k, v in row.items()})
    _write_json(_out_path(args, "manifest.json"), {"command": "gaussian-suite", "points": manifests})
    print(f"-> {path}")
    return 0


def _cmd_bermudan(args) -> int:
    dates = _parse_floats(args.dates)
    process = gbm(
        dimension=args.dim,
        horizon=len(dates),
        gamma=args.rate,
        div_yield=args.div,
        sigma=args.sigma,
        spot=args.spot,
        times=dates,
    )
    reward_spec = basket_put(strike=args.strike, discount=args.rate, times=dates)
    geo = _parse_floats(args.geo_rate)
    schedule = RateSchedule.constant(geo[0], process.horizon) if len(geo) == 1 else RateSchedule(rates=tuple(geo))
    snapshot = {
        "command": "bermudan",
        "dim": args.dim,
        "strike": args.strike,
        "spot": args.spot,
        "sigma": args.sigma,
        "rate": args.rate,
        "div": args.div,
        "dates": dates,
        "rates": list(schedule.rates),
        "replicates": args.replicates,
    }
    _estimate_and_write(args, process, reward_spec, schedule, LevelPolicy(), snapshot)
    return 0


def _cmd_stop(args) -> int:
    config = _load_config(args)
    process, reward_spec = _resolve_instance(args, config)
    schedule = _resolve_schedule(args, process.horizon)
    policy_config = PolicyConfig(
        schedule=schedule,
        inner_replicates=args.inner_replicates,
        tolerance=args.tolerance,
        alpha=args.alpha,
    )
    workers = resolve_workers(args.workers)
    if workers == 1:
        outcomes, reward_summary = run_stopping_policy(process, reward_spec, policy_config, args.episodes, args.seed)
        manifest_json = None
    else:
        task = PolicyEpisodeTask(process, reward_spec, policy_config)
        outcomes, manifest = map_replicated(task, args.episodes, args.seed, workers=workers)
        rewards = np.array([o.realized_reward for o in outcomes], dtype=float)
        costs = np.array([o.inner_cost for o in outcomes], dtype=np.int64)
        reward_summary = summarize(rewards, costs, wall_time=manifest.wall_time)
        manifest_json = manifest.to_json()
    write_episode_log(_out_path(args, "episodes.csv"), outcomes)
    taus = np.array([o.tau for o in outcomes], dtype=float)
    payload = {
        "episodes": len(outcomes),
        "mean_reward": reward_summary.mean,
        "std_error": reward_summary.std_error,
        "mean_tau": float(taus.mean()),
        "total_inner_cost": reward_summary.total_cost,
    }
    _write_json(_out_path(args, "policy_summary.json"), payload)
    if manifest_json is not None:
        _write_json(_out_path(args, "manifest.json"), manifest_json)
    print(
        f"episodes={len(outcomes)}  mean reward={reward_summary.mean:.6f} (se {reward_summary.std_error:.6f})  "
        f"mean tau={taus.mean():.3f}  -> {args.out_dir}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
