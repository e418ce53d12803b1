"""Command-line interface.

Subcommands cover the whole pipeline: weight training (irl-train),
Q-learning search (search), gradient-based search (diff-search), the
score-sensitivity diagnostic (modify-diag), balance-scalar comparisons
(lambda-sweep), DOT export (export-dot), and exhaustive space dumps
(enumerate).

Configuration precedence: built-in defaults, then a JSON config file
(--config), then explicit flags.  The seed falls back to the IRLAS_SEED
environment variable when neither flag nor file provides one.  Exit
codes: 0 success, 2 usage or configuration error, 3 evaluator transport
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .arch import (
    BlockArch,
    ParseError,
    arch_to_obj,
    canonical_serialize,
    enumerate_blocks,
    op_by_name,
    parse_arch,
    to_dot,
    to_trajectory,
    validate,
)
from .diffsearch import (
    DIFF_CSV_HEADER,
    AlphaCell,
    QuadraticTaskLoss,
    UNARY_POOL,
    cell_to_obj,
    run_diff_search,
)
from .evaluate import (
    CachedEvaluator,
    ExternalEvaluator,
    SurrogateEvaluator,
    SurrogateParams,
    TransportError,
)
from .features import feature_count
from .mirror import (
    IrlConfig,
    MirrorWeights,
    expert_library,
    mirror_stimuli,
    residual_variants,
    train_mirror,
    weights_from_obj,
    weights_to_obj,
)
from .qsearch import SearchConfig, run_search

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3


class ConfigError(Exception):
    pass


def _env_seed() -> int | None:
    raw = os.environ.get("IRLAS_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"IRLAS_SEED must be an integer, got {raw!r}")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ConfigError("config file must hold a JSON object")
    return obj


def _merge(defaults: dict, file_cfg: dict, flags: dict) -> dict:
    merged = dict(defaults)
    for key, value in file_cfg.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


def _parse_pool(spec: str | None):
    if not spec:
        return ()
    try:
        return tuple(op_by_name(name.strip()) for name in spec.split(",") if name.strip())
    except ValueError as exc:
        raise ConfigError(str(exc))


def _resolve_seed(flag_seed, file_cfg: dict):
    if flag_seed is not None:
        return flag_seed
    if "seed" in file_cfg:
        return file_cfg["seed"]
    return _env_seed()


def _write_lines(path: Path, lines: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _load_weights(path: str) -> MirrorWeights:
    try:
        with open(path, encoding="utf-8") as fh:
            return weights_from_obj(json.load(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read weights file: {exc}")
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"malformed weights file {path!r}: {exc}")


def _save_weights(path: Path, weights: MirrorWeights) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(weights_to_obj(weights), fh)
        fh.write("\n")


def _load_arch(path: str) -> BlockArch:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read architecture file: {exc}")
    try:
        return parse_arch(text)
    except ParseError as exc:
        raise ConfigError(f"malformed architecture file {path!r}: {exc}")


# ---------------------------------------------------------------- irl-train

def cmd_irl_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {
        "expert": "resnet_block",
        "epsilon": 0.01,
        "max_iterations": 50,
        "gamma": 0.9,
        "pool": "",
        "max_len": 24,
        "seed": None,
        "seed_policy": "dwconv3",
        "inner_solver": "exact",
        "inner_episodes": 4000,
    }
    flags = {
        "expert": args.expert,
        "epsilon": args.epsilon,
        "max_iterations": args.max_iterations,
        "gamma": args.gamma,
        "pool": args.pool,
        "max_len": args.max_len,
        "seed_policy": args.seed_policy,
        "inner_solver": args.inner_solver,
        "inner_episodes": args.inner_episodes,
    }
    cfg = _merge(defaults, file_cfg, flags)
    cfg["seed"] = _resolve_seed(args.seed, file_cfg)

    try:
        expert = expert_library(cfg["expert"], max_len=cfg["max_len"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    irl_cfg = IrlConfig(
        epsilon=cfg["epsilon"],
        max_iterations=cfg["max_iterations"],
        gamma=cfg["gamma"],
        op_pool=_parse_pool(cfg["pool"]),
        max_len=cfg["max_len"],
        seed_policy=cfg["seed_policy"],
        seed=cfg["seed"],
        inner_solver=cfg["inner_solver"],
        inner_episodes=cfg["inner_episodes"],
    )
    weights, trace = train_mirror(expert, irl_cfg)

    out = Path(args.out)
    _save_weights(out, weights)
    trace_path = Path(args.trace) if args.trace else out.with_suffix(".trace.csv")
    _write_lines(
        trace_path,
        ["iteration,delta"] + [f"{it.index},{it.delta!r}" for it in trace.iterations],
    )
    print(
        f"trained on {cfg['expert']}: delta={weights.final_margin:.6g} "
        f"iterations={len(trace.iterations)} converged={trace.converged}"
    )
    print(f"weights -> {out}")
    print(f"trace   -> {trace_path}")
    return EXIT_OK


# ------------------------------------------------------------------- search

def _build_evaluator(cfg: dict, reference, noise_amp: float, noise_seed: int):
    if cfg["evaluator"] == "surrogate":
        params = SurrogateParams(
            reference=reference, noise_amp=noise_amp, noise_seed=noise_seed
        )
        return SurrogateEvaluator(params)
    if cfg["evaluator"] == "external":
        if not cfg["evaluator_cmd"]:
            raise ConfigError("--evaluator external requires --evaluator-cmd")
        return ExternalEvaluator(cfg["evaluator_cmd"], timeout=cfg["timeout"])
    raise ConfigError(f"unknown evaluator {cfg['evaluator']!r}")


def _search_config(cfg: dict) -> SearchConfig:
    try:
        return SearchConfig(
            eta=cfg["eta"],
            gamma_q=cfg["gamma_q"],
            lam=cfg["lambda"],
            batch=cfg["batch"],
            max_len=cfg["max_len"],
            iterations=cfg["iterations"],
            samples_per_iteration=cfg["samples_per_iteration"],
            replay_capacity=cfg["replay_capacity"],
            anneal_fraction=cfg["anneal_fraction"],
            top_k=cfg["top_k"],
            window=cfg["window"],
            seed=cfg["seed"],
            op_pool=_parse_pool(cfg["pool"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


SEARCH_DEFAULTS = {
    "evaluator": "surrogate",
    "evaluator_cmd": "",
    "timeout": 600.0,
    "expert": "resnet_block",
    "weights": "train",
    "lambda": 30.0,
    "eta": 0.01,
    "gamma_q": 0.9,
    "batch": 64,
    "max_len": 24,
    "iterations": 180,
    "samples_per_iteration": 64,
    "replay_capacity": 2000,
    "anneal_fraction": 0.9,
    "top_k": 5,
    "window": 1,
    "pool": "",
    "noise_amp": 1.0,
    "noise_seed": 0,
    "irl_epsilon": 0.01,
    "seed": None,
}


def _search_flags(args) -> dict:
    return {
        "evaluator": args.evaluator,
        "evaluator_cmd": args.evaluator_cmd,
        "timeout": args.timeout,
        "expert": args.expert,
        "weights": args.weights,
        "lambda": getattr(args, "lambda_"),
        "eta": args.eta,
        "gamma_q": args.gamma_q,
        "batch": args.batch,
        "max_len": args.max_len,
        "iterations": args.iterations,
        "samples_per_iteration": args.samples_per_iteration,
        "replay_capacity": args.replay_capacity,
        "anneal_fraction": args.anneal_fraction,
        "top_k": args.top_k,
        "window": args.window,
        "pool": args.pool,
        "noise_amp": args.noise_amp,
        "noise_seed": args.noise_seed,
        "irl_epsilon": args.irl_epsilon,
    }


def _obtain_weights(cfg: dict, out_dir: Path) -> MirrorWeights:
    """Load or train the topology weights per the run config."""
    if cfg["weights"] not in ("", "train", None) :
        return _load_weights(cfg["weights"])
    try:
        expert = expert_library(cfg["expert"], max_len=cfg["max_len"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    if cfg["lambda"] == 0.0:
        # the score never enters the reward; skip training
        return MirrorWeights(
            w=np.zeros(9), gamma=cfg["gamma_q"],
            trained_against=canonical_serialize(expert.arch), final_margin=0.0,
        )
    irl_cfg = IrlConfig(
        epsilon=cfg["irl_epsilon"],
        gamma=cfg["gamma_q"],
        op_pool=_parse_pool(cfg["pool"]),
        max_len=cfg["max_len"],
    )
    weights, _ = train_mirror(expert, irl_cfg)
    _save_weights(out_dir / "weights.json", weights)
    return weights


def _run_one_search(cfg: dict, out_dir: Path, weights: MirrorWeights):
    try:
        expert = expert_library(cfg["expert"], max_len=cfg["max_len"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    reference = feature_count(to_trajectory(expert.arch), weights.gamma)
    evaluator = CachedEvaluator(
        _build_evaluator(cfg, reference, cfg["noise_amp"], cfg["noise_seed"])
    )
    try:
        return run_search(_search_config(cfg), evaluator, weights)
    finally:
        evaluator.close()


def _write_manifest(out_dir: Path, command: str, cfg: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: cfg[k] for k in sorted(cfg)},
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_search(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _merge(SEARCH_DEFAULTS, file_cfg, _search_flags(args))
    cfg["seed"] = _resolve_seed(args.seed, file_cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    weights = _obtain_weights(cfg, out_dir)
    result = _run_one_search(cfg, out_dir, weights)

    _write_lines(out_dir / "convergence.csv", result.csv_lines())
    summary = ["rank,kind,R,accuracy,file"]
    for rank, entry in enumerate(result.top_by_reward, start=1):
        name = f"top_r_{rank}"
        _write_lines(out_dir / f"{name}.json", [canonical_serialize(entry.arch)])
        _write_lines(out_dir / f"{name}.dot", [to_dot(entry.arch, name=name)])
        summary.append(f"{rank},reward,{entry.reward!r},{entry.accuracy!r},{name}.json")
    for rank, entry in enumerate(result.top_by_accuracy, start=1):
        name = f"top_acc_{rank}"
        _write_lines(out_dir / f"{name}.json", [canonical_serialize(entry.arch)])
        _write_lines(out_dir / f"{name}.dot", [to_dot(entry.arch, name=name)])
        summary.append(f"{rank},accuracy,{entry.reward!r},{entry.accuracy!r},{name}.json")
    _write_lines(out_dir / "summary.csv", summary)
    _write_manifest(out_dir, "search", cfg)

    best_r = result.top_by_reward[0].reward if result.top_by_reward else float("nan")
    print(
        f"search done: {result.samples_total} samples, "
        f"{result.errors} failed, best R={best_r!r}"
    )
    print(f"results -> {out_dir}")
    return EXIT_OK


# -------------------------------------------------------------- diff-search

def cmd_diff_search(args) -> int:
    file_cfg = _load_config_file(args.config)
    defaults = {
        "nodes": 3,
        "ops": "",
        "steps": 500,
        "lr": 0.1,
        "K": 5,
        "scale": 0.5,
        "weights": "",
        "expert": "resnet_block",
        "gamma": 0.9,
        "irl_epsilon": 0.01,
        "seed": None,
    }
    flags = {
        "nodes": args.nodes,
        "ops": args.ops,
        "steps": args.steps,
        "lr": args.lr,
        "K": args.K,
        "scale": args.scale,
        "weights": args.weights,
        "expert": args.expert,
        "gamma": args.gamma,
        "irl_epsilon": args.irl_epsilon,
    }
    cfg = _merge(defaults, file_cfg, flags)
    cfg["seed"] = _resolve_seed(args.seed, file_cfg)

    ops = _parse_pool(cfg["ops"]) or UNARY_POOL
    try:
        cell = AlphaCell(nodes=cfg["nodes"], ops=ops)
    except ValueError as exc:
        raise ConfigError(str(exc))

    if cfg["weights"]:
        weights = _load_weights(cfg["weights"])
    else:
        try:
            expert = expert_library(cfg["expert"], max_len=len(cell.edges))
        except ValueError as exc:
            raise ConfigError(str(exc))
        weights, _ = train_mirror(
            expert,
            IrlConfig(
                epsilon=cfg["irl_epsilon"], gamma=cfg["gamma"],
                op_pool=ops, max_len=len(cell.edges),
            ),
        )

    rng = np.random.default_rng(cfg["seed"])
    target = np.zeros_like(cell.logits)
    result = run_diff_search(
        cell, weights, QuadraticTaskLoss(target),
        scale=cfg["scale"], steps=cfg["steps"], lr=cfg["lr"], K=cfg["K"], rng=rng,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_lines(out_dir / "trace.csv", result.csv_lines())
    with open(out_dir / "cell.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cell_to_obj(result.cell), fh, indent=2)
        fh.write("\n")
    _write_manifest(out_dir, "diff-search", cfg)
    status = "diverged" if result.diverged else "ok"
    print(f"diff-search {status}: {len(result.trace)} steps")
    print(f"results -> {out_dir}")
    return EXIT_OK


# -------------------------------------------------------------- modify-diag

def cmd_modify_diag(args) -> int:
    weights = _load_weights(args.weights)
    max_len = args.max_len if args.max_len is not None else 24
    expert = expert_library("resnet_block", max_len=max_len)
    variants = residual_variants(max_len=max_len)

    mu_star = feature_count(to_trajectory(expert.arch), weights.gamma).mu
    f_star = mirror_stimuli(weights, expert.arch)

    lines = ["variant,delta_mu_norm,delta_F_topology"]
    rows = [("expert", expert.arch)] + list(variants.items())
    for name, arch in rows:
        mu = feature_count(to_trajectory(arch), weights.gamma).mu
        d_mu = float(np.linalg.norm(mu - mu_star))
        d_f = abs(mirror_stimuli(weights, arch) - f_star)
        lines.append(f"{name},{d_mu!r},{d_f!r}")

    for line in lines:
        print(line)
    if args.out:
        _write_lines(Path(args.out), lines)
    return EXIT_OK


# ------------------------------------------------------------- lambda-sweep

def cmd_lambda_sweep(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _merge(
        {**SEARCH_DEFAULTS, "lambdas": "0,30,60", "sweep_seeds": 5, "threshold": None},
        file_cfg,
        {**_search_flags(args), "lambdas": args.lambdas,
         "sweep_seeds": args.sweep_seeds, "threshold": args.threshold},
    )
    cfg["seed"] = _resolve_seed(args.seed, file_cfg)
    try:
        lambdas = [float(tok) for tok in str(cfg["lambdas"]).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --lambdas: {exc}")
    if not lambdas:
        raise ConfigError("empty lambda list")
    base_seed = cfg["seed"] if cfg["seed"] is not None else 0

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["lambda,seed,best_R,best_acc,best_topo,samples_to_threshold"]
    for lam in lambdas:
        run_cfg = dict(cfg)
        run_cfg["lambda"] = lam
        weights = _obtain_weights(run_cfg, out_dir)
        for offset in range(int(cfg["sweep_seeds"])):
            seed = base_seed + offset
            run_cfg["seed"] = seed
            result = _run_one_search(run_cfg, out_dir, weights)
            best_r = max(result.reward_history, default=float("nan"))
            best_acc = max(result.accuracy_history, default=float("nan"))
            best_topo = (
                max(
                    mirror_stimuli(weights, entry.arch)
                    for entry in result.top_by_reward
                )
                if result.top_by_reward
                else float("nan")
            )
            if cfg["threshold"] is None:
                hit = ""
            else:
                hit = next(
                    (
                        str(i + 1)
                        for i, acc in enumerate(result.accuracy_history)
                        if acc >= float(cfg["threshold"]) - 1e-9
                    ),
                    "",
                )
            lines.append(
                f"{lam!r},{seed},{best_r!r},{best_acc!r},{best_topo!r},{hit}"
            )

    _write_lines(out_dir / "sweep.csv", lines)
    _write_manifest(out_dir, "lambda-sweep", cfg)
    for line in lines:
        print(line)
    return EXIT_OK


# --------------------------------------------------------------- export-dot

def cmd_export_dot(args) -> int:
    arch = _load_arch(args.arch_file)
    problems = validate(arch)
    if problems:
        raise ConfigError("invalid architecture: " + "; ".join(problems))
    text = to_dot(arch, name=args.name)
    if args.out:
        _write_lines(Path(args.out), [text])
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------- enumerate

def cmd_enumerate(args) -> int:
    pool = _parse_pool(args.pool)
    if not pool:
        raise ConfigError("--pool is required (comma-separated op names)")
    count = 0
    for arch in enumerate_blocks(args.max_len, pool):
        count += 1
        if not args.count_only:
            print(canonical_serialize(arch))
    if args.count_only:
        print(count)
    return EXIT_OK


# ------------------------------------------------------------------ parsing

def _add_search_flags(sub) -> None:
    sub.add_argument("--evaluator", choices=["surrogate", "external"])
    sub.add_argument("--evaluator-cmd")
    sub.add_argument("--timeout", type=float)
    sub.add_argument("--expert")
    sub.add_argument("--weights", help="weights file path, or 'train'")
    sub.add_argument("--lambda", dest="lambda_", type=float)
    sub.add_argument("--eta", type=float)
    sub.add_argument("--gamma-q", type=float)
    sub.add_argument("--batch", type=int)
    sub.add_argument("--max-len", type=int)
    sub.add_argument("--iterations", type=int)
    sub.add_argument("--samples-per-iteration", type=int)
    sub.add_argument("--replay-capacity", type=int)
    sub.add_argument("--anneal-fraction", type=float)
    sub.add_argument("--top-k", type=int)
    sub.add_argument("--window", type=int)
    sub.add_argument("--pool", help="comma-separated op names")
    sub.add_argument("--noise-amp", type=float)
    sub.add_argument("--noise-seed", type=int)
    sub.add_argument("--irl-epsilon", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irlas",
        description="Topology-guided architecture search toolkit",
    )
    parser.add_argument("--version", action="version", version=f"irlas {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("irl-train", help="train topology-score weights")
    p.add_argument("--expert")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--pool")
    p.add_argument("--max-len", type=int)
    p.add_argument("--seed-policy", choices=["dwconv3", "random"])
    p.add_argument("--inner-solver", choices=["exact", "sampled"])
    p.add_argument("--inner-episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_irl_train)

    p = subs.add_parser("search", help="Q-learning architecture search")
    _add_search_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_search)

    p = subs.add_parser("diff-search", help="gradient-based search with topology term")
    p.add_argument("--nodes", type=int)
    p.add_argument("--ops")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--weights")
    p.add_argument("--expert")
    p.add_argument("--gamma", type=float)
    p.add_argument("--irl-epsilon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diff_search)

    p = subs.add_parser("modify-diag", help="score sensitivity of expert variants")
    p.add_argument("--weights", required=True)
    p.add_argument("--max-len", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_modify_diag)

    p = subs.add_parser("lambda-sweep", help="compare balance scalars with shared seeds")
    _add_search_flags(p)
    p.add_argument("--lambdas", help="comma-separated values, e.g. 0,30,60")
    p.add_argument("--sweep-seeds", type=int, help="number of seeds per lambda")
    p.add_argument("--threshold", type=float, help="accuracy threshold for the samples-to-threshold column")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lambda_sweep)

    p = subs.add_parser("export-dot", help="render an architecture file as DOT")
    p.add_argument("arch_file")
    p.add_argument("--name", default="block")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_dot)

    p = subs.add_parser("enumerate", help="dump every valid block of a small space")
    p.add_argument("--max-len", type=int, required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--count-only", action="store_true")
    p.set_defaults(func=cmd_enumerate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"evaluator transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
