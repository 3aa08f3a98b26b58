"""Command-line front end.

Subcommands: gen-topology, train, eval, compare, curve, serve-env. All
experiment parameters resolve as profile defaults < config file < CLI
flags; every run logs its resolved configuration. The output root comes
from --out-root, else the HETNETSIM_OUT environment variable, else
./results.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import bridge
from .errors import ValidationError
from .records import TrainingRecord
from .runner import (
    ALL_METHODS,
    ExperimentConfig,
    Method,
    build_env,
    compare_table,
    desk_profile,
    emit_learning_curve,
    evaluate_method,
    full_profile,
    record_path,
    run_training,
    write_eval_rows,
    write_table_csv,
    write_table_markdown,
)
from .topology import ScenarioKind, generate_scenario, load_topology, save_topology

EXPERIMENT_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _apply_config_dict(cfg: ExperimentConfig, data: dict) -> ExperimentConfig:
    """Overlay a nested config mapping onto an ExperimentConfig, naming any
    offending key on validation failure."""
    updates = {}
    for key, value in data.items():
        if key not in EXPERIMENT_KEYS:
            raise ValidationError(f"unknown config key {key!r}")
        try:
            if key == "scenario":
                updates[key] = ScenarioKind.parse(value)
            elif key == "method":
                updates[key] = Method.parse(value)
            elif key == "seeds":
                updates[key] = tuple(int(s) for s in value)
            elif key == "td3":
                updates[key] = dataclasses.replace(cfg.td3, **value)
            elif key == "ppo":
                updates[key] = dataclasses.replace(cfg.ppo, **value)
            else:
                updates[key] = type(getattr(cfg, key))(value)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"config key {key!r}: {exc}") from exc
    return dataclasses.replace(cfg, **updates)


def _resolved_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["scenario"] = cfg.scenario.value
    d["method"] = cfg.method.value
    d["seeds"] = list(cfg.seeds)
    d["td3"]["hidden_dims"] = list(cfg.td3.hidden_dims)
    d["ppo"]["hidden_dims"] = list(cfg.ppo.hidden_dims)
    return d


def resolve_config(args) -> ExperimentConfig:
    profile = getattr(args, "profile", "desk")
    cfg = full_profile() if profile == "full" else desk_profile()
    if getattr(args, "config", None):
        path = args.config
        if not os.path.exists(path):
            raise ValidationError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            cfg = _apply_config_dict(cfg, json.load(fh))
    overrides = {}
    for key in ("scenario", "method", "seeds", "episodes", "horizon", "n_users",
                "topology_seed", "eval_episodes", "out_root", "kappa", "beta",
                "phi", "gamma", "eta", "sigma_sh_db"):
        value = getattr(args, key, None)
        if value is not None:
            if key == "seeds" and isinstance(value, str):
                value = [tok for tok in value.split(",") if tok.strip()]
            overrides[key] = value
    if overrides:
        cfg = _apply_config_dict(cfg, overrides)
    if getattr(args, "out_root", None) is None and "out_root" not in overrides:
        env_root = os.environ.get("HETNETSIM_OUT")
        if env_root:
            cfg = dataclasses.replace(cfg, out_root=env_root)
    return cfg


def _log_config(cfg: ExperimentConfig, save_dir: str | None = None) -> None:
    payload = json.dumps(_resolved_dict(cfg), indent=2, sort_keys=True)
    print(f"resolved config:\n{payload}", file=sys.stderr)
    if save_dir:
        os.makedirs(save_dir, exist_ok=True)
        with open(os.path.join(save_dir, "resolved_config.json"), "w",
                  encoding="utf-8") as fh:
            fh.write(payload + "\n")


def _parse_list(text: str, parse_one, universe=None):
    if text.strip().lower() == "all" and universe is not None:
        return list(universe)
    return [parse_one(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetnetsim",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_method=True):
        p.add_argument("--profile", choices=("desk", "full"), default="desk")
        p.add_argument("--config", help="JSON config file mirroring ExperimentConfig")
        p.add_argument("--scenario", help="dense-urban | sparse-suburban | hotspot | mixed")
        if with_method:
            p.add_argument("--method", help="td3 | ppo | g-ofdma | ip-pc | pf-eq")
        p.add_argument("--seeds", help="comma-separated training seeds")
        p.add_argument("--episodes", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--n-users", dest="n_users", type=int)
        p.add_argument("--topology-seed", dest="topology_seed", type=int)
        p.add_argument("--eval-episodes", dest="eval_episodes", type=int)
        p.add_argument("--out-root", dest="out_root")
        for name in ("kappa", "beta", "phi", "gamma", "eta", "sigma_sh_db"):
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = sub.add_parser("gen-topology", help="write a scenario layout as CSV")
    add_common(p, with_method=False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train TD3/PPO over the configured seeds")
    add_common(p)

    p = sub.add_parser("eval", help="evaluate a method, emitting per-episode metrics")
    add_common(p)
    p.add_argument("--out", help="metrics CSV path (default under out-root)")

    p = sub.add_parser("compare", help="best/second-best comparison across methods")
    add_common(p, with_method=False)
    p.add_argument("--scenarios", default="all")
    p.add_argument("--methods", default="all")
    p.add_argument("--out", help="comparison CSV path (default under out-root)")
    p.add_argument("--markdown", help="optional markdown rendering path")

    p = sub.add_parser("curve", help="learning-curve CSV from training records")
    add_common(p)
    p.add_argument("--column", default="mean_reward")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve-env", help="serve one environment over stdio")
    add_common(p, with_method=False)
    p.add_argument("--topology", help="topology CSV instead of a generated scenario")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _dispatch(args)
    except (ValidationError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cfg = resolve_config(args)
    if args.command == "gen-topology":
        topo = generate_scenario(cfg.scenario, cfg.n_users, cfg.topology_seed)
        save_topology(topo, args.out)
        print(f"wrote {topo.n_stations} stations to {args.out}", file=sys.stderr)
        return 0

    if args.command == "train":
        _log_config(cfg, os.path.join(cfg.out_root, cfg.scenario.value,
                                      cfg.method.value))
        records = run_training(cfg)
        for seed, record in zip(cfg.seeds, records):
            print(f"seed {seed}: {record.n_episodes} episodes, final "
                  f"mean reward {record.column('mean_reward')[-1]:.3f}",
                  file=sys.stderr)
        return 0

    if args.command == "eval":
        _log_config(cfg)
        rows_by_seed = evaluate_method(cfg, cfg.scenario, cfg.method)
        out = args.out or os.path.join(cfg.out_root, cfg.scenario.value,
                                       f"{cfg.method.value}_eval.csv")
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        merged = [row for rows in rows_by_seed.values() for row in rows]
        write_eval_rows(merged, out)
        print(f"wrote {len(merged)} evaluation rows to {out}", file=sys.stderr)
        return 0

    if args.command == "compare":
        _log_config(cfg)
        scenarios = _parse_list(args.scenarios, ScenarioKind.parse, list(ScenarioKind))
        methods = _parse_list(args.methods, Method.parse, ALL_METHODS)
        table = compare_table(scenarios, methods, cfg)
        out = args.out or os.path.join(cfg.out_root, "comparison.csv")
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        write_table_csv(table, out)
        if args.markdown:
            write_table_markdown(table, args.markdown)
        print(f"wrote comparison table ({len(table)} rows) to {out}", file=sys.stderr)
        return 0

    if args.command == "curve":
        records = []
        for seed in cfg.seeds:
            path = record_path(cfg.out_root, cfg.scenario, cfg.method, seed)
            if not os.path.exists(path):
                raise ValidationError(f"missing training record: {path}")
            records.append(TrainingRecord.from_csv(path))
        emit_learning_curve(records, args.out, column=args.column)
        print(f"wrote learning curve to {args.out}", file=sys.stderr)
        return 0

    if args.command == "serve-env":
        if args.topology:
            from .topology import place_users
            topo = load_topology(args.topology)
            topo = place_users(topo, cfg.n_users, cfg.topology_seed)
            env = _env_from_topology(cfg, topo)
        else:
            env = build_env(cfg)
        _log_config(cfg)
        return bridge.serve(env, sys.stdin, sys.stdout)

    raise ValidationError(f"unhandled command {args.command!r}")


def _env_from_topology(cfg: ExperimentConfig, topo):
    from .channel import ChannelParams
    from .env import EnvConfig, HetNetEnv
    return HetNetEnv(EnvConfig(
        topology=topo,
        channel_params=ChannelParams(eta=cfg.eta, sigma_sh_db=cfg.sigma_sh_db),
        horizon=cfg.horizon, kappa=cfg.kappa, beta=cfg.beta, phi=cfg.phi,
        gamma=cfg.gamma))


if __name__ == "__main__":
    sys.exit(main())
