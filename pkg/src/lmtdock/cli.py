"""Command-line entry point for the whole pipeline.

Every run writes a run-manifest.json with the resolved configuration and
seeds; every artifact embeds the tool version and a config fingerprint.
Exit codes: 0 ok, 1 run failure (including --assert violations), 2 config
error (bad flags, missing/malformed files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, configs
from .env import Environment, EpisodeParams
from .evalkit import bench as bench_mod
from .evalkit import dataio, fidelity, report
from .evalkit.iterate import iterative_sampling_build
from .evalkit.rollout import augment_dataset, build_dataset, rollout
from .evalkit.starts import gen_starting_points, split_starts
from .policy import BaselinePolicy, MlpPolicy
from .tree import model as tree_model
from .tree.build import DEFAULT_GROUPS, BuildConfig, grow
from .tree.surrogate import TreePolicy


class CliConfigError(Exception):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("LMTDOCK_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_env(args) -> Environment:
    params = EpisodeParams(h=args.h, max_steps=args.max_steps)
    return Environment(
        geom=configs.load_harbor(args.harbor),
        model=configs.load_vessel(args.vessel),
        reward_params=configs.load_reward(args.reward),
        params=params,
    )


def _load_policy(args, env: Environment):
    if args.policy == "baseline":
        return BaselinePolicy(configs.load_baseline_gains(args.baseline), env.model.thrusters)
    return MlpPolicy.from_file(args.policy)


def _manifest(args, out: Path, extra=None) -> None:
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    payload = {
        "tool_version": __version__,
        "command": args.command,
        "resolved": resolved,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    payload.update(extra or {})
    with open(out / "run-manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)


def _build_config(args) -> BuildConfig:
    return BuildConfig(
        max_leaves=args.leaves,
        min_samples=args.min_samples,
        n_thresholds=args.thresholds,
        jitter=args.jitter,
        ordered_groups=DEFAULT_GROUPS if args.ofs else (),
        rng_seed=args.seed,
        min_loss_decrease=args.min_loss_decrease,
    )


def _check_schema(tree, label):
    from .harbor import FEATURE_NAMES

    if tuple(tree.feature_names) != FEATURE_NAMES:
        raise CliConfigError(
            f"{label}: tree feature schema {tree.feature_names} does not match "
            f"the dataset schema {FEATURE_NAMES}"
        )


def cmd_gen_starts(args) -> int:
    env = _load_env(args)
    out = _out_dir(args)
    starts = gen_starting_points(args.n, args.seed, env.geom, clearance=args.clearance)
    parts = split_starts(starts)
    payload = {
        "seed": args.seed,
        "clearance": args.clearance,
        "tool_version": __version__,
        "splits": {
            name: [
                {"pose": list(p), "vel": list(v)} for p, v in entries
            ]
            for name, entries in parts.items()
        },
    }
    with open(out / "starts.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    _manifest(args, out, {"counts": {k: len(v) for k, v in parts.items()}})
    print(f"wrote {out / 'starts.json'} "
          f"({len(parts['train'])}/{len(parts['val'])}/{len(parts['test'])})")
    return 0


def _load_starts(path, split):
    from .vessel import Pose, Velocity

    with open(path) as fh:
        payload = json.load(fh)
    try:
        entries = payload["splits"][split]
        return [
            (Pose(*e["pose"]), Velocity(*e["vel"])) for e in entries
        ], payload.get("seed")
    except KeyError as exc:
        raise CliConfigError(f"starts file {path} lacks split {split!r}") from exc


def cmd_gen_data(args) -> int:
    env = _load_env(args)
    policy = _load_policy(args, env)
    out = _out_dir(args)
    if args.starts:
        starts, seed = _load_starts(args.starts, args.split)
    else:
        starts = split_starts(
            gen_starting_points(args.n, args.seed, env.geom)
        )[args.split]
        seed = args.seed
    ds = build_dataset(policy, starts, env, jobs=args.jobs)
    raw_rows = len(ds)
    if args.augment > 0:
        ds = augment_dataset(ds, policy, fraction=args.augment, seed=args.seed)
    fingerprint = configs.config_fingerprint(env.geom, env.model, env.reward_params)
    save_path = out / args.name
    dataio.save_dataset(
        ds,
        save_path,
        extra_stats={
            "seed": seed,
            "split": args.split,
            "raw_rows": raw_rows,
            "augment_fraction": args.augment,
            "config_fingerprint": fingerprint,
            "tool_version": __version__,
            "policy": args.policy,
        },
    )
    _manifest(args, out, {"rows": len(ds), "config_fingerprint": fingerprint})
    print(f"wrote {save_path} ({len(ds)} rows, {raw_rows} from rollouts)")
    return 0


def cmd_build(args) -> int:
    out = _out_dir(args)
    ds = dataio.load_dataset(args.data)
    config = _build_config(args)
    tree = grow(ds.X, ds.Y, config)
    tree.metadata["source_dataset"] = str(args.data)
    tree_model.save(tree, out / args.name)
    stats = tree_model.tree_stats(tree)
    _manifest(args, out, {"n_leaves": stats[0], "max_depth": stats[1], "min_leaf_depth": stats[2]})
    print(f"wrote {out / args.name} (leaves={stats[0]}, deepest={stats[1]}, shallowest={stats[2]})")
    return 0


def cmd_build_iterative(args) -> int:
    env = _load_env(args)
    policy = _load_policy(args, env)
    out = _out_dir(args)
    if args.starts:
        starts, _ = _load_starts(args.starts, args.split)
    else:
        starts = split_starts(gen_starting_points(args.n, args.seed, env.geom))[args.split]
    config = _build_config(args)
    trees, sizes = iterative_sampling_build(policy, env, starts, config, args.iterations)
    if args.val_data:
        val = dataio.load_dataset(args.val_data)
        losses = [float(np.mean((t.predict_batch(val.X) - val.Y) ** 2)) for t in trees]
        best = int(np.argmin(losses))
    else:
        losses = None
        best = len(trees) - 1
    for i, tree in enumerate(trees):
        tree_model.save(tree, out / f"tree-it{i + 1}.json")
    tree_model.save(trees[best], out / args.name)
    _manifest(args, out, {"dataset_sizes": sizes, "selected_iteration": best + 1,
                          "validation_losses": losses})
    print(f"wrote {out / args.name} (selected iteration {best + 1} of {len(trees)})")
    return 0


def cmd_eval(args) -> int:
    env = _load_env(args)
    policy = _load_policy(args, env)
    out = _out_dir(args)
    tree = tree_model.load(args.tree)
    _check_schema(tree, "eval")
    testset = dataio.load_dataset(args.data)
    rows = fidelity.output_error(tree, testset)
    result = {
        "tool_version": __version__,
        "tree": str(args.tree),
        "data": str(args.data),
        "config_fingerprint": configs.config_fingerprint(env.geom, env.model, env.reward_params),
        "tree_fingerprint": tree.metadata.get("dataset_fingerprint"),
        "output_error": [r.to_dict() for r in rows],
    }
    if args.starts:
        starts, _ = _load_starts(args.starts, "test")
        starts = starts[: args.n_closed_loop] if args.n_closed_loop else starts
        table, episodes = fidelity.path_comparison(
            {"policy": policy, "surrogate": TreePolicy(tree)}, env, starts
        )
        agreement = fidelity.closed_loop_agreement(table, "policy", "surrogate")
        result["path_outcomes"] = table
        result["closed_loop"] = agreement
        if args.episodes_dir:
            epdir = Path(args.episodes_dir)
            epdir.mkdir(parents=True, exist_ok=True)
            for (name, i), ep in episodes.items():
                dataio.save_episode(ep, epdir / f"{name}-{i:03d}.ndjson")
    with open(out / "fidelity.json", "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
    _manifest(args, out)
    worst = max(r.mae_pct for r in rows)
    print(f"wrote {out / 'fidelity.json'} (worst MAE {worst:.2f}% of range)")
    if args.assert_mae_pct is not None and worst > args.assert_mae_pct:
        print(f"ASSERT FAILED: worst MAE {worst:.2f}% > {args.assert_mae_pct}%")
        return 1
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args)
    ds = dataio.load_dataset(args.data)
    if args.subsample and len(ds) > args.subsample:
        rng = np.random.default_rng(args.seed)
        pick = np.sort(rng.choice(len(ds), args.subsample, replace=False))
        from .evalkit.rollout import Dataset

        ds = Dataset(X=ds.X[pick], Y=ds.Y[pick])
    budgets = [int(x) for x in args.leaves.split(",")]
    base = BuildConfig(
        min_samples=args.min_samples,
        n_thresholds=args.thresholds,
        jitter=args.jitter,
        rng_seed=args.seed,
    )
    rows = bench_mod.build_benchmark(ds, budgets, base, repeats=args.repeats)
    ratios = bench_mod.speedup_ratios(rows)
    payload = {
        "tool_version": __version__,
        "rows": len(ds),
        "repeats": args.repeats,
        "seed": args.seed,
        "results": rows,
        "ofs_over_plain": {str(k): v for k, v in ratios.items()},
    }
    with open(out / "timings.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    _manifest(args, out)
    for budget, ratio in ratios.items():
        print(f"leaves={budget}: ofs/plain = {ratio:.3f}")
    return 0


def cmd_rollout(args) -> int:
    env = _load_env(args)
    policy = _load_policy(args, env)
    out = _out_dir(args)
    tree = tree_model.load(args.tree) if args.tree else None
    if tree is not None:
        _check_schema(tree, "rollout")
    starts = gen_starting_points(args.index + 1, args.seed, env.geom)
    ep = rollout(policy, env, starts[args.index], shadow_tree=tree)
    path = out / args.name
    dataio.save_episode(
        ep, path, extra_header={"seed": args.seed, "index": args.index,
                                "tool_version": __version__}
    )
    _manifest(args, out, {"outcome": ep.outcome, "steps": len(ep.steps)})
    print(f"wrote {path} ({ep.outcome} after {len(ep.steps)} steps, "
          f"cumulative reward {ep.cumulative_reward:.1f})")
    return 0


def cmd_plot(args) -> int:
    env = _load_env(args)
    out = _out_dir(args)
    raw = dataio.load_episode_raw(args.episode)
    ep = _episode_from_raw(raw)
    if args.kind == "report":
        report.developer_report(ep, out / args.name)
    elif args.kind == "path":
        report.plot_paths({"episode": ep}, env.geom, out / args.name)
    elif args.kind == "forces":
        if not args.tree:
            raise CliConfigError("plot --kind forces needs --tree")
        tree = tree_model.load(args.tree)
        cmp = fidelity.force_comparison(tree, ep, env.model.thrusters)
        report.plot_forces(cmp, out / args.name)
    _manifest(args, out)
    print(f"wrote {out / args.name}")
    return 0


def _episode_from_raw(raw):
    """Rebuild an Episode (records only as far as plotting needs them)."""
    from .env import StepRecord
    from .explain import AttributionFrame
    from .evalkit.rollout import Episode
    from .harbor import StateVector
    from .policy import Action
    from .reward import RewardComponents
    from .vessel import Pose, Velocity

    steps = []
    for s in raw["steps"]:
        attr = None
        if s.get("attr") is not None:
            a = s["attr"]
            attr = AttributionFrame(
                raw=np.array(a["raw"]),
                combined=np.array(a["combined"]),
                compressed=a["compressed"],
                degenerate=a["degenerate"],
                leaf_id=a.get("leaf_id"),
            )
        steps.append(
            StepRecord(
                step=s["step"],
                t=s["t"],
                state=StateVector(*s["state"]),
                controller_action=Action(*s["action"]),
                active_action=Action(*s["active"]),
                surrogate_action=Action(*s["surrogate"]) if s.get("surrogate") else None,
                attribution=attr,
                forces=tuple(s["forces"]),
                reward=RewardComponents(**s["reward"]),
                pose=Pose(*s["pose"]),
                velocity=Velocity(*s["vel"]),
                state_after=StateVector(*s["state"]),  # not stored per step
                control_mode=s["mode"],
                done=False,
                outcome=None,
            )
        )
    header = raw["header"]
    return Episode(
        start_pose=Pose(*header["start_pose"]),
        start_vel=Velocity(*header["start_vel"]),
        steps=steps,
        outcome=header["outcome"],
        cumulative_reward=header["cumulative_reward"],
        h=header["h"],
    )


def cmd_serve(args) -> int:
    from .stream import ScenarioConfig, serve

    scenario = ScenarioConfig(
        harbor_path=args.harbor,
        vessel_path=args.vessel,
        reward_path=args.reward,
        baseline_path=args.baseline,
        policy=args.policy,
        tree_path=args.tree,
        start_seed=args.seed,
        start_index=args.index,
        params=EpisodeParams(h=args.h, max_steps=args.max_steps),
        realtime_factor=args.speed,
        console_dir=args.console_dir,
    )
    out = _out_dir(args)
    _manifest(args, out)
    print(f"serving on http://{args.host}:{args.port} (ws endpoint /ws)")
    serve(scenario, host=args.host, port=args.port)
    return 0


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--harbor", help="harbor geometry JSON (default: bundled)")
    p.add_argument("--vessel", help="vessel model JSON (default: bundled)")
    p.add_argument("--reward", help="reward parameters JSON (default: bundled)")
    p.add_argument("--baseline", help="baseline gains JSON (default: bundled)")
    p.add_argument("--policy", default="baseline",
                   help="'baseline' or a policy weights file")
    p.add_argument("--h", type=float, default=0.5, help="integrator step, s")
    p.add_argument("--max-steps", type=int, default=2500)


def _add_build_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--leaves", type=int, default=100)
    p.add_argument("--min-samples", type=int, default=50)
    p.add_argument("--thresholds", type=int, default=20)
    p.add_argument("--jitter", type=float, default=0.02)
    p.add_argument("--min-loss-decrease", type=float, default=0.0)
    ofs = p.add_mutually_exclusive_group()
    ofs.add_argument("--ofs", dest="ofs", action="store_true", default=True,
                     help="ordered feature splitting (default)")
    ofs.add_argument("--no-ofs", dest="ofs", action="store_false")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmtdock",
        description="Linear model tree surrogates and live explanations for docking controllers",
    )
    parser.add_argument("--version", action="version", version=f"lmtdock {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-starts", help="sample starting points and the 80/5/15 split")
    _add_env_flags(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clearance", type=float, default=50.0)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_gen_starts)

    p = sub.add_parser("gen-data", help="roll the policy out and write the dataset CSV")
    _add_env_flags(p)
    p.add_argument("--starts", help="starts.json from gen-starts")
    p.add_argument("--split", default="train", choices=("train", "val", "test"))
    p.add_argument("--n", type=int, default=1000, help="starts to sample when no --starts file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--augment", type=float, default=0.5,
                   help="fraction of policy-labeled jittered replicas to append")
    p.add_argument("--jobs", type=int, default=1, help="parallel rollout processes")
    p.add_argument("--name", default="dataset.csv")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build", help="grow a tree from a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_build_flags(p)
    p.add_argument("--name", default="tree.json")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("build-iterative", help="legacy alternating sample/build loop")
    _add_env_flags(p)
    p.add_argument("--starts")
    p.add_argument("--split", default="train", choices=("train", "val", "test"))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--val-data", help="dataset CSV used to select the best iteration")
    _add_build_flags(p)
    p.add_argument("--name", default="tree.json")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_build_iterative)

    p = sub.add_parser("eval", help="fidelity report for a tree against a test dataset")
    _add_env_flags(p)
    p.add_argument("--tree", required=True)
    p.add_argument("--data", required=True, help="test split dataset CSV")
    p.add_argument("--starts", help="starts.json; enables closed-loop comparison")
    p.add_argument("--n-closed-loop", type=int, default=0,
                   help="limit closed-loop starts (0 = all test starts)")
    p.add_argument("--episodes-dir", help="write per-episode ndjson files here")
    p.add_argument("--assert-mae-pct", type=float,
                   help="exit 1 if any action's MAE exceeds this % of range")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="plain vs ordered build-time benchmark")
    p.add_argument("--data", required=True)
    p.add_argument("--leaves", default="10,50")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--subsample", type=int, default=0)
    p.add_argument("--min-samples", type=int, default=50)
    p.add_argument("--thresholds", type=int, default=20)
    p.add_argument("--jitter", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rollout", help="run one episode and write it as ndjson")
    _add_env_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0, help="start index within the seed's sequence")
    p.add_argument("--tree", help="surrogate to shadow (records predictions + attributions)")
    p.add_argument("--name", default="episode.ndjson")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("plot", help="render an episode file as SVG")
    _add_env_flags(p)
    p.add_argument("--episode", required=True)
    p.add_argument("--kind", default="report", choices=("report", "path", "forces"))
    p.add_argument("--tree", help="needed for --kind forces")
    p.add_argument("--name", default="report.svg")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="live session with the web console")
    _add_env_flags(p)
    p.add_argument("--tree", help="surrogate tree for shadow explanations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--speed", type=float, default=1.0, help="real-time factor (0 = unthrottled)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--console-dir", help="static console bundle directory")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (configs.ConfigError, CliConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (tree_model.TreeFormatError, dataio.DatasetFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # run failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
