"""``oc`` command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 training aborted by a diverging run.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import checkpoint, config as config_mod, verification
from .agent import make_agent
from .critic import DivergenceError
from .envs import FourRooms, MDPEnv, Pinball, PinballConfig
from . import mdp as mdp_mod
from .mdp import make_rng
from .policies import sigmoid

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3

CSV_COLUMNS = ("episode", "steps", "undiscounted_return", "discounted_return", "option_switches", "mean_option_duration")


class UsageError(Exception):
    pass


# environments and agents ---------------------------------------------------


def make_env(cfg: config_mod.RunConfig):
    ec = cfg.env_cfg
    if cfg.env == "fourrooms":
        kw = {"relocation_episode": ec.relocation_episode, "slip": ec.slip}
        return FourRooms.from_file(ec.map_file, **kw) if ec.map_file else FourRooms(**kw)
    if cfg.env == "pinball":
        maze = PinballConfig.load(ec.map_file) if ec.map_file else PinballConfig.default()
        return Pinball(maze, ec.fourier_order)
    return MDPEnv(mdp_mod.load(ec.map_file))


def n_options_of(agent_cfg) -> int:
    return agent_cfg.n_options if agent_cfg.agent == "oc" else 1


def checkpoint_text(cfg, env, agent, run: int, episode: int) -> str:
    meta = {"agent": cfg.agent.agent, "run": run, "seed": cfg.seed + run, "episode": episode}
    if isinstance(env, FourRooms):
        meta["goal"] = "{}:{}".format(*env.goal_cell)
    return checkpoint.dumps_arrays(cfg.env, n_options_of(cfg.agent), env.feature_map.kind, agent.arrays(), meta)


# training ------------------------------------------------------------------


def log_row(log) -> list:
    return [log.episode, log.steps, repr(float(log.undiscounted_return)), repr(float(log.discounted_return)),
            log.option_switches, repr(float(log.mean_option_duration))]


def train_run(cfg: config_mod.RunConfig, run: int) -> dict:
    """One seeded training run. Returns rows and checkpoint texts; writes nothing."""
    agent_cfg = cfg.run_agent_config(run)
    env = make_env(cfg)
    rng = make_rng(agent_cfg.seed)
    agent = make_agent(env, agent_cfg, rng)
    rows, ckpts = [], {}
    try:
        for episode in range(agent_cfg.episodes):
            env.on_episode_start(episode, rng)
            rows.append(log_row(agent.run_episode(env, rng, episode)))
            if cfg.checkpoint_every and (episode + 1) % cfg.checkpoint_every == 0:
                ckpts[f"run_{run}_ep{episode + 1}.ckpt"] = checkpoint_text(cfg, env, agent, run, episode + 1)
    except DivergenceError as exc:
        return {"run": run, "error": f"run {run} (seed {agent_cfg.seed}) diverged at episode {len(rows)}: {exc}"}
    ckpts[f"run_{run}.ckpt"] = checkpoint_text(cfg, env, agent, run, agent_cfg.episodes)
    return {"run": run, "rows": rows, "checkpoints": ckpts}


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


def mean_rows(per_run: list[list]) -> list:
    """Per-episode arithmetic mean of every column across runs."""
    out = []
    n = len(per_run)
    for episode_rows in zip(*per_run):
        row = [episode_rows[0][0]]
        for col in range(1, len(CSV_COLUMNS)):
            row.append(repr(math.fsum(float(r[col]) for r in episode_rows) / n))
        out.append(row)
    return out


def output_dir(cfg) -> str:
    return os.environ.get("OC_OUTPUT_DIR") or cfg.output_dir


def run_all(cfg, jobs: int) -> list[dict]:
    runs = range(cfg.n_runs)
    if jobs <= 1 or cfg.n_runs == 1:
        return [train_run(cfg, k) for k in runs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(train_run, [cfg] * cfg.n_runs, runs))


def cmd_train(args) -> int:
    cfg = config_mod.load(args.config)
    results = run_all(cfg, args.jobs)
    errors = [r["error"] for r in results if "error" in r]
    if errors:
        for e in errors:
            print(f"oc train: aborted: {e}", file=sys.stderr)
        return EXIT_ABORT
    out = output_dir(cfg)
    os.makedirs(out, exist_ok=True)
    for r in results:
        with open(os.path.join(out, f"run_{r['run']}.csv"), "w", newline="") as fh:
            fh.write(csv_text(r["rows"]))
        for name, text in r["checkpoints"].items():
            with open(os.path.join(out, name), "w") as fh:
                fh.write(text)
    with open(os.path.join(out, "mean.csv"), "w", newline="") as fh:
        fh.write(csv_text(mean_rows([r["rows"] for r in results])))
    print(f"wrote {cfg.n_runs} run(s) of {cfg.agent.episodes} episodes to {out}")
    return EXIT_OK


# heatmap -------------------------------------------------------------------


def cmd_heatmap(args) -> int:
    header, arrays = checkpoint.load_arrays(args.checkpoint)
    if header["env"] != "fourrooms":
        raise UsageError(f"heatmap needs a fourrooms checkpoint, got env {header['env']!r}")
    if "vartheta" not in arrays:
        raise UsageError("checkpoint holds no termination weights (not an option-critic run)")
    env = FourRooms.from_file(args.map) if args.map else FourRooms()
    vartheta = arrays["vartheta"]
    if vartheta.shape[1] != env.n_states:
        raise UsageError(f"checkpoint has {vartheta.shape[1]} features, map has {env.n_states} cells")
    rows_out, cols_out = env.shape
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("option", "row", "col", "beta"))
    for option in range(vartheta.shape[0]):
        for r in range(rows_out):
            for c in range(cols_out):
                s = env.index.get((r, c))
                beta = -1.0 if s is None else float(sigmoid(vartheta[option, s]))
                writer.writerow((option, r, c, repr(beta)))
    return EXIT_OK


# verify --------------------------------------------------------------------


def cmd_verify(args) -> int:
    results = verification.run_battery(
        args.instances, args.seed, args.max_states, args.max_actions, args.max_options,
        corrupt=args.corrupt_gradient,
    )
    sys.stdout.write(verification.format_report(results))
    failed = [r for r in results if not r.passed]
    if not failed:
        return EXIT_OK
    directory = os.path.join(os.environ.get("OC_OUTPUT_DIR") or ".", "verify_failures")
    for r in failed:
        for path in verification.write_replay(r, directory):
            print(f"replay: {path}")
    return EXIT_VERIFY


# eval ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    cfg = config_mod.load(args.config)
    header, arrays = checkpoint.load_arrays(args.checkpoint)
    if header["env"] != cfg.env:
        raise UsageError(f"checkpoint is for env {header['env']!r}, config says {cfg.env!r}")
    if header.get("agent", cfg.agent.agent) != cfg.agent.agent:
        raise UsageError(f"checkpoint holds a {header['agent']!r} agent, config says {cfg.agent.agent!r}")
    if header["n_options"] != n_options_of(cfg.agent):
        raise UsageError(f"checkpoint has {header['n_options']} options, config asks for {n_options_of(cfg.agent)}")
    env = make_env(cfg)
    rng = make_rng(cfg.seed)
    agent = make_agent(env, cfg.agent, rng)
    try:
        agent.load_arrays(arrays)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"checkpoint does not fit the configured agent: {exc}") from None
    if isinstance(env, FourRooms) and "goal" in header:
        env.goal = env.index[tuple(int(v) for v in header["goal"].split(":"))]
        env.relocation_episode = -1
    rows = [log_row(agent.run_episode(env, rng, episode, learn=False)) for episode in range(cfg.eval_episodes)]
    sys.stdout.write(csv_text(rows))
    return EXIT_OK


# entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oc", description="Option-critic experiments and oracle checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train n_runs seeded agents and write CSV learning curves")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("heatmap", help="termination probabilities of a four-rooms checkpoint as CSV")
    p.add_argument("checkpoint")
    p.add_argument("--map", help="four-rooms map file, if the run used a custom one")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("verify", help="check the exact option gradients against finite differences")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-states", type=int, default=5)
    p.add_argument("--max-actions", type=int, default=3)
    p.add_argument("--max-options", type=int, default=3)
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", help="replay a checkpoint with learning off; CSV on stdout")
    p.add_argument("checkpoint")
    p.add_argument("config")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("oc: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (config_mod.ConfigError, checkpoint.CheckpointError, UsageError) as exc:
        print(f"oc {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"oc {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
