"""Command-line entry points: run, baseline, eval, serve."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .harness import (PRESETS, RunConfig, build_model, evaluate, make_env,
                      oracle_score, run_bt_baseline, run_hsbc)
from .sampling import Ensemble


def _load_config(args) -> RunConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = RunConfig.from_dict(json.load(fh))
    elif args.preset:
        cfg = PRESETS[args.preset]()
    else:
        raise SystemExit("need --config FILE or --preset NAME")
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.false_rate is not None:
        cfg.oracle.rate = args.false_rate
        if cfg.oracle.kind == "rational" and args.false_rate > 0:
            cfg.oracle.kind = "batch-flip"
    if args.gamma is not None:
        cfg.gamma = args.gamma
    if getattr(args, "iterations", None) is not None:
        cfg.iterations = args.iterations
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run-configuration JSON file")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="named preset instead of a config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--false-rate", type=float, default=None,
                   help="override the oracle's false-label rate")
    p.add_argument("--gamma", type=float, default=None,
                   help="override the conservativeness level")
    p.add_argument("--iterations", type=int, default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="prefcut",
        description="Preference-based reward learning by hypothesis-space "
                    "batch cutting")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the batch-cutting learner")
    _add_common(p_run)

    p_base = sub.add_parser("baseline", help="run the Bradley-Terry baseline")
    _add_common(p_base)

    p_eval = sub.add_parser("eval", help="evaluate a saved ensemble checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True,
                        help="ensemble .npz written by a run")
    p_eval.add_argument("--episodes", type=int, default=5)

    p_serve = sub.add_parser("serve", help="human-labeling session service")
    _add_common(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--ui", default=None,
                         help="directory of static UI files to serve at /")

    args = parser.parse_args(argv)
    cfg = _load_config(args)

    if args.command in ("run", "baseline"):
        runner = run_hsbc if args.command == "run" else run_bt_baseline
        result = runner(cfg)
        for p in result.curve.points:
            print(f"queries={p.queries:5d} return={p.mean:10.3f} "
                  f"+-{p.std:.3f} (iteration {p.iteration})")
        if result.degraded:
            print("note: run degraded "
                  f"(sampler={result.degraded_sampler}, "
                  f"batches={result.degraded_batches})", file=sys.stderr)
        if cfg.out_dir:
            print(f"artifacts in {cfg.out_dir}")
        return 0

    if args.command == "eval":
        env = make_env(cfg.env)
        model = build_model(cfg.model, env)
        data = np.load(args.checkpoint)
        ensemble = Ensemble(members=data["members"],
                            iteration=int(data["iteration"]))
        seeds = [cfg.seed + k for k in range(args.episodes)]
        mean, std, scores = evaluate(env, model, ensemble,
                                     cfg.resolved_eval_planner(),
                                     cfg.eval_len, seeds)
        omean, ostd, _ = oracle_score(env, cfg.resolved_eval_planner(),
                                      cfg.eval_len, seeds)
        print(f"ensemble return: {mean:.3f} +- {std:.3f}")
        print(f"oracle   return: {omean:.3f} +- {ostd:.3f}")
        return 0

    if args.command == "serve":
        from .service import serve_session
        cfg.oracle.kind = "human"
        server, runner = serve_session(cfg, host=args.host, port=args.port,
                                       out_dir=cfg.out_dir, ui_dir=args.ui)
        print(f"session service on http://{args.host}:{args.port} "
              f"(out={cfg.out_dir})")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            runner.shutdown()
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
