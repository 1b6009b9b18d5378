"""Command-line front end: ``hsfl {optimize,simulate,sweep,verify}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .channel import derive_seeds, sample
from .config import ConfigError, load_config
from .cutlayer import optimize_cuts
from .policies import baseline_policy
from .profiles import LINKS
from .protocol import jsonable, run_training, write_records_jsonl, write_summary_csv


def _policies(arg, cfg):
    if arg is None:
        return list(cfg.policies)
    return [baseline_policy(p).name for p in arg.split(",") if p.strip()]


def _seed(args, cfg):
    return cfg.seeds[0] if args.seed is None else args.seed


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_optimize(args) -> int:
    """Cut search plus one round's allocation on a single environment draw."""
    cfg = load_config(args.config)
    scen = cfg.scenario()
    policy = baseline_policy(args.policy or "OPT")
    seed = _seed(args, cfg)
    ga = optimize_cuts(cfg.ga, scen.stats, scen.model, scen.sys)
    round_seq, cut_seq = derive_seeds(seed, 2)
    cut = policy.choose_cuts(scen.model, scen.sys, rng=cut_seq, optimized_cut=ga.cut)
    env = sample(scen.stats, round_seq.spawn(1)[0])
    plan = policy.allocate(scen.model, scen.sys, env, cut)
    alloc = plan.allocation
    print(f"policy    {policy.name}")
    print(f"cut       {alloc.cut.tolist()}   (GA: {ga.generations} generations, "
          f"SAA latency {ga.latency:.6g} s)")
    print(f"freq      {np.array2string(alloc.server_freq_share, precision=4)}")
    for j, name in enumerate(LINKS):
        print(f"{name:9s} assign {alloc.subchannel_assign[j].tolist()} "
              f"power {np.array2string(alloc.power[j], precision=4)}")
    print(f"latency   {plan.latency:.6g} s")
    if args.out:
        out = _out_dir(args, cfg)
        ga.write_log(out / "ga_log.csv")
        with open(out / "optimize.json", "w") as fh:
            json.dump(jsonable({"policy": policy.name, "seed": seed,
                                "latency": plan.latency, "allocation": alloc.to_dict(),
                                "clients": plan.breakdown.as_rows()}),
                      fh, indent=2, sort_keys=True)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    scen = cfg.scenario()
    seed = _seed(args, cfg)
    out = _out_dir(args, cfg)
    ga = optimize_cuts(cfg.ga, scen.stats, scen.model, scen.sys)
    for name in _policies(args.policy, cfg):
        recs = run_training(scen.sys.total_rounds, baseline_policy(name), scen.stats,
                            scen.model, scen.sys, seed, optimized_cut=ga.cut)
        stem = f"{name.lower()}_seed{seed}"
        write_records_jsonl(recs, out / f"{stem}.jsonl")
        write_summary_csv(recs, out / f"{stem}.csv")
        print(f"{name:5s} cut {recs[0].allocation.cut.tolist()} "
              f"mean round {recs[-1].cumulative / len(recs):.6g} s, "
              f"total {recs[-1].cumulative:.6g} s")
    return 0


def cmd_sweep(args) -> int:
    from .experiments import run_experiment, write_results

    cfg = load_config(args.config)
    seeds = None if args.seed is None else [args.seed]
    results = run_experiment(cfg, seeds=seeds, policies=_policies(args.policy, cfg),
                             log=lambda msg: print(msg, file=sys.stderr))
    paths = write_results(results, _out_dir(args, cfg))
    print(f"wrote {paths['summary']}")
    failed = [r for res in results for r in res.rows if r.status != "ok"]
    return 1 if failed else 0


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all(args.config, log=print)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "verify.jsonl", "w") as fh:
            for r in results:
                fh.write(json.dumps({"check": r.name, "passed": r.passed, "detail": r.detail,
                                     "seconds": round(r.seconds, 3)}) + "\n")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsfl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "optimize": (cmd_optimize, "cut search and one round's allocation"),
        "simulate": (cmd_simulate, "full multi-round run per policy"),
        "sweep": (cmd_sweep, "policy comparison over the configured sweeps"),
        "verify": (cmd_verify, "run the oracle suites (shape checks with --config)"),
    }
    for name, (fn, help_text) in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name != "verify", help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="run seed (default: first in config)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--policy", default=None,
                       help="policy name, or comma-separated names (default: config list)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
