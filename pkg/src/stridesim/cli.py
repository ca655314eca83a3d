"""Command-line entry points: run, benchmark, replay.

Every config field is reachable as a dotted override, mirroring the config
tree: ``stridesim run Velocity-Flat --env.scene.num-envs 64
--env.rewards.track-vx-exp.weight 2.0 --agent.policy scripted-sine``.
``--list-paths`` prints the full override namespace with types and current
defaults for a task.

Exit codes: 0 clean run, 2 usage/override error, 3 a nonfinite capture dump
was written during the run, 4 replay could not load the dump.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .capture import CaptureError, load_capture
from .config import ConfigError, apply_override, enumerate_paths
from .env import EnvCfg, ManagerBasedRlEnv
from .metrics import MetricsWriter, build_record
from .policies import POLICIES, scripted_sine_policy
from .tasks import TaskError, make_env_cfg

DEFAULT_PORT = int(os.environ.get("STRIDESIM_PORT", "8800"))

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DUMP_WRITTEN = 3
EXIT_REPLAY_ERROR = 4


@dataclass
class AgentCfg:
    policy: str = "zero"
    sine_amplitude: float = 0.6
    sine_frequency_hz: float = 1.5


@dataclass
class RunCfg:
    env: EnvCfg = field(default_factory=EnvCfg)
    agent: AgentCfg = field(default_factory=AgentCfg)


def apply_cli_overrides(run_cfg: RunCfg, tokens: list[str]) -> None:
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r} (overrides look like --env.seed 3)")
        path = tok[2:]
        if "=" in path:
            path, value = path.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for override {tok!r}")
            value = tokens[i + 1]
            i += 2
        apply_override(run_cfg, path, value)


def _print_paths(run_cfg: RunCfg) -> None:
    print(f"{'path':<60} {'type':<10} default")
    for path, tname, value in enumerate_paths(run_cfg):
        print(f"--{path:<58} {tname:<10} {value}")


def _make_policy(agent: AgentCfg):
    if agent.policy == "scripted-sine":
        return lambda env, step: scripted_sine_policy(
            env, step, agent.sine_amplitude, agent.sine_frequency_hz
        )
    if agent.policy not in POLICIES:
        raise ConfigError(
            f"unknown policy {agent.policy!r}; choose from {', '.join(sorted(POLICIES))}"
        )
    return POLICIES[agent.policy]


def cmd_run(args: argparse.Namespace, overrides: list[str]) -> int:
    try:
        run_cfg = RunCfg(env=make_env_cfg(args.task))
        apply_cli_overrides(run_cfg, overrides)
        policy = _make_policy(run_cfg.agent)
    except (TaskError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.list_paths:
        _print_paths(run_cfg)
        return EXIT_OK

    env = ManagerBasedRlEnv(run_cfg.env, args.task)
    env.reset()
    writer = MetricsWriter(args.metrics)
    bridge = None
    if args.serve:
        from .bridge import Bridge

        bridge = Bridge.serve_live(env, policy, port=args.port, rate_hz=args.rate)
        print(f"viewer bridge listening on port {args.port}")
    t_start = time.perf_counter()
    t_last = t_start
    try:
        for step in range(1, args.steps + 1):
            if bridge is not None:
                bridge.session.wait_if_paused(env)
            _, reward, _, _, extras = env.step(policy(env, step))
            if bridge is not None:
                bridge.publish(env)
            if step % args.log_every == 0 or step == args.steps:
                now = time.perf_counter()
                sps = args.log_every / max(now - t_last, 1e-9) if args.log_timing else None
                t_last = now
                writer.write(build_record(env, step, reward, sps))
    finally:
        writer.close()
        if bridge is not None:
            bridge.stop()
    elapsed = time.perf_counter() - t_start
    world_steps = args.steps * env.num_envs
    print(
        f"{args.task}: {args.steps} control steps x {env.num_envs} worlds in "
        f"{elapsed:.2f}s ({world_steps / elapsed:,.0f} world-steps/s); "
        f"metrics -> {args.metrics}"
    )
    if env.dump_paths:
        print(f"nonfinite state detected; capture dump(s): {', '.join(env.dump_paths)}")
        return EXIT_DUMP_WRITTEN
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace, overrides: list[str]) -> int:
    try:
        worlds = [int(w) for w in args.worlds.split(",") if w.strip()]
    except ValueError:
        print(f"error: bad --worlds list {args.worlds!r}", file=sys.stderr)
        return EXIT_USAGE
    results = []
    for n in worlds:
        try:
            run_cfg = RunCfg(env=make_env_cfg(args.task, num_envs=n))
            apply_cli_overrides(run_cfg, overrides)
            policy = _make_policy(run_cfg.agent)
        except (TaskError, ConfigError) as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_USAGE
        env = ManagerBasedRlEnv(run_cfg.env, args.task)
        env.reset()
        actions = policy(env, 0)
        for _ in range(5):  # warmup
            env.step(actions)
        steps = 0
        t0 = time.perf_counter()
        while time.perf_counter() - t0 < args.duration:
            env.step(policy(env, steps))
            steps += 1
        elapsed = time.perf_counter() - t0
        results.append(
            {
                "worlds": n,
                "control_steps_per_sec": steps / elapsed,
                "world_steps_per_sec": steps * n / elapsed,
                "world_substeps_per_sec": steps * n * env.decimation / elapsed,
            }
        )
    header = f"{'worlds':>8} {'ctrl-steps/s':>14} {'world-steps/s':>15} {'world-substeps/s':>18}"
    print(header)
    for r in results:
        print(
            f"{r['worlds']:>8} {r['control_steps_per_sec']:>14.1f} "
            f"{r['world_steps_per_sec']:>15.0f} {r['world_substeps_per_sec']:>18.0f}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"task": args.task, "results": results}, fh, indent=2)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        dump = load_capture(args.dump)
    except CaptureError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_REPLAY_ERROR
    steps = [f.sim_step for f in dump.frames]
    print(f"capture dump: {args.dump}")
    print(f"task: {dump.task_id or '(unknown)'}  config hash: {dump.config_hash[:16]}...")
    print(
        f"{len(dump.frames)} frames (ring capacity {dump.capacity}), "
        f"{dump.n_worlds} worlds, sim steps {steps[0]}..{steps[-1]}"
        if steps
        else "0 frames"
    )
    hits = dump.nonfinite_summary()
    if hits:
        first = hits[0]
        print(
            f"first nonfinite value: array {first['array']!r} world {first['world']} "
            f"at frame {first['frame']} (sim step {first['sim_step']})"
        )
        for hit in hits[1:]:
            print(f"  also: {hit['array']} world {hit['world']} frame {hit['frame']}")
    else:
        print("no nonfinite values in captured frames")
    if dump.metadata.get("offending_observation_terms"):
        print(f"offending observation terms: {dump.metadata['offending_observation_terms']}")
    if dump.metadata.get("offending_reward_terms"):
        print(f"offending reward terms: {dump.metadata['offending_reward_terms']}")
    if args.serve:
        from .bridge import Bridge

        bridge = Bridge.serve_replay(dump, port=args.port, rate_hz=args.rate)
        print(f"replay bridge listening on port {args.port}; ctrl-c to stop")
        try:
            bridge.run_replay_loop()
        except KeyboardInterrupt:
            pass
        finally:
            bridge.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stridesim",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="roll a policy in a task and log metrics")
    run.add_argument("task")
    run.add_argument("--steps", type=int, default=200)
    run.add_argument("--metrics", default="metrics.jsonl")
    run.add_argument("--log-every", type=int, default=10)
    run.add_argument(
        "--log-timing",
        action="store_true",
        help="include steps/sec in records (makes logs timing-dependent)",
    )
    run.add_argument("--list-paths", action="store_true", help="print all override paths")
    run.add_argument("--serve", action="store_true", help="serve the web viewer while running")
    run.add_argument("--port", type=int, default=DEFAULT_PORT)
    run.add_argument("--rate", type=float, default=30.0, help="viewer frame rate (Hz)")

    bench = sub.add_parser("benchmark", help="measure stepping throughput")
    bench.add_argument("task")
    bench.add_argument("--worlds", default="1,64,1024,4096")
    bench.add_argument("--duration", type=float, default=2.0, help="seconds per world count")
    bench.add_argument("--json", default="", help="also write results as JSON")

    replay = sub.add_parser("replay", help="inspect or serve a capture dump")
    replay.add_argument("dump")
    replay.add_argument("--serve", action="store_true")
    replay.add_argument("--port", type=int, default=DEFAULT_PORT)
    replay.add_argument("--rate", type=float, default=30.0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, overrides = parser.parse_known_args(argv)
    if args.command == "run":
        return cmd_run(args, overrides)
    if args.command == "benchmark":
        return cmd_benchmark(args, overrides)
    if args.command == "replay":
        if overrides:
            print(f"error: unexpected arguments {overrides}", file=sys.stderr)
            return EXIT_USAGE
        return cmd_replay(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
