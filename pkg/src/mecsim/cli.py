"""Command-line entry points: run one episode, sweep arrival rates, or solve
the tiny-instance oracle."""
from __future__ import annotations

import argparse
import os

from .config import SimConfig, load_config
from .harness import POLICIES, SweepSpec, run_episode, sweep, write_metrics_csv
from .oracle import value_iteration_oracle


def _load(path: str | None) -> SimConfig:
    if path is None:
        return SimConfig().validate()
    return load_config(path)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mecsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one seeded episode and write per-slot metrics")
    run_p.add_argument("--config", default=None)
    run_p.add_argument("--policy", choices=POLICIES, required=True)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--slots", type=int, required=True)
    run_p.add_argument("--out", required=True)

    sweep_p = sub.add_parser("sweep", help="sweep arrival rates over seeds and policies")
    sweep_p.add_argument("--config", default=None)
    sweep_p.add_argument("--rates", default="1.2,1.5,1.8,2.1",
                         help="comma-separated arrival rates in Mbps")
    sweep_p.add_argument("--policies", default=",".join(POLICIES))
    sweep_p.add_argument("--seeds", type=int, default=3)
    sweep_p.add_argument("--slots", type=int, default=13000)
    sweep_p.add_argument("--workers", type=int, default=1)
    sweep_p.add_argument("--out", required=True)

    oracle_p = sub.add_parser("oracle", help="exact value iteration on a tiny instance")
    oracle_p.add_argument("--config", default=None,
                          help="tiny config; defaults to the built-in single-MT instance")
    oracle_p.add_argument("--gamma", type=float, default=0.9)
    oracle_p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)

    if args.command == "run":
        cfg = _load(args.config)
        series = run_episode(cfg, args.policy, args.seed, args.slots)
        path = os.path.join(args.out, f"run_{args.policy}_seed{args.seed}.csv")
        write_metrics_csv(series, path)
        print(f"wrote {path} ({len(series)} slots)")
    elif args.command == "sweep":
        cfg = _load(args.config)
        rates = tuple(float(r) * 1e6 for r in args.rates.split(","))
        policies = tuple(args.policies.split(","))
        spec = SweepSpec(rates_bps=rates, slots=args.slots, seeds=args.seeds,
                         policies=policies)
        rows = sweep(spec, cfg, workers=args.workers)
        path = os.path.join(args.out, "sweep.csv")
        write_metrics_csv(rows, path)
        print(f"wrote {path} ({len(rows)} rows)")
    else:
        if args.config is None:
            from .harness import tiny_config

            cfg = tiny_config()
        else:
            cfg = load_config(args.config)
        solution = value_iteration_oracle(cfg, gamma=args.gamma)
        path = os.path.join(args.out, "oracle_values.csv")
        rows = []
        for c in range(cfg.num_cells):
            for f in range(len(cfg.fading_levels)):
                for q in range(cfg.queue_capacity + 1):
                    for t in range(6):
                        rows.append({
                            "cell": c, "fading": f, "queue": q, "tasks": t,
                            "value": float(solution.values[c, f, q, t]),
                            "action": int(solution.policy[c, f, q, t]),
                        })
        write_metrics_csv(rows, path)
        print(f"wrote {path} ({len(rows)} states, {solution.iterations} sweeps)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
