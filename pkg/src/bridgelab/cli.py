"""Experiment CLI: train models and reproduce the figure/table-shaped CSVs.

Subcommands
    train          train the predictor and one bridge model per seed
    sweep-steps    distortion/perception versus sampling-step count
    exposure-bias  per-step prediction error along the sampling trajectory
    strategies     train and evaluate conditioning strategies M1..M5
    ablation       train and evaluate perturbation strategies
    dump-dataset   write sampled (x, y, x_star) triples as CSV

Every CSV starts with a '# generated: ...' timestamp line followed by a
header whose first field is the schema version; re-running a subcommand
with the same config and seed reproduces the body byte for byte (the one
exception is the wall_time_s column of training logs).  All randomness
derives from the per-run master seed through named sub-streams (predictor,
train, eval, sample, data), so any stage can be replayed in isolation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .metrics import EvalReport, perception_distance, si_sdr
from .model import (
    ModelParameters,
    apply_mlp,
    bridge_model_spec,
    load_checkpoint,
    predictor_spec,
    save_checkpoint,
)
from .sampler import sample_trajectory_batch
from .seeding import named_stream
from .training import (
    ConditioningStrategy,
    DivergenceError,
    TrainingStrategy,
    inference_endpoints,
    make_bridge_predictor,
    train,
    train_predictor,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_CHECKPOINT = 4

EVAL_PAIRS = 512
EVAL_REFERENCE = 2048
DATASET_DUMP_ROWS = 1000

ALL_CONDITIONINGS = [
    ConditioningStrategy.M1,
    ConditioningStrategy.M2,
    ConditioningStrategy.M3,
    ConditioningStrategy.M4,
    ConditioningStrategy.M5,
]
ALL_PERTURBATIONS = [
    TrainingStrategy.VANILLA,
    TrainingStrategy.INPUT_ONLY,
    TrainingStrategy.JOINT,
]


class CheckpointMismatchError(RuntimeError):
    """Checkpoint does not match the configured task/model."""


# ---------------------------------------------------------------------------
# csv emission


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, schema: str, columns: list[str], rows: list[list]) -> None:
    lines = [f"# generated: {datetime.now(timezone.utc).isoformat()}"]
    lines.append(",".join([schema, *columns]))
    lines.extend(",".join(["row", *[_fmt(v) for v in row]]) for row in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def csv_body(path: Path) -> str:
    """CSV content with comment lines stripped (what determinism covers)."""
    return "".join(
        line for line in Path(path).read_text().splitlines(keepends=True) if not line.startswith("#")
    )


# ---------------------------------------------------------------------------
# training orchestration


def _task_dim(cfg: ExperimentConfig) -> int:
    return cfg.task.dim


def _method_label(strategy: TrainingStrategy, conditioning: ConditioningStrategy) -> str:
    return conditioning.value if conditioning is not ConditioningStrategy.M1 else strategy.value


def train_predictor_for_seed(cfg: ExperimentConfig, seed: int, seed_dir: Path) -> tuple[ModelParameters, Path]:
    d = _task_dim(cfg)
    pspec = predictor_spec(d, cfg.model_hidden)
    params = train_predictor(cfg.task, pspec, cfg.train, named_stream(seed, "predictor"))
    path = seed_dir / "predictor.json"
    save_checkpoint(
        path,
        pspec,
        params,
        seed_lineage={"master_seed": seed, "stream": "predictor"},
        meta={"role": "predictor", "seed": seed, "task_dim": d},
    )
    return params, path


def train_bridge_for_seed(
    cfg: ExperimentConfig,
    seed: int,
    strategy: TrainingStrategy,
    conditioning: ConditioningStrategy,
    predictor_params: ModelParameters,
    seed_dir: Path,
    label: str | None = None,
) -> Path:
    d = _task_dim(cfg)
    spec = bridge_model_spec(d, cfg.model_hidden, cfg.time_embed_pairs)
    train_cfg = replace(cfg.train, strategy=strategy, conditioning=conditioning, seed=seed)
    params, ema, log = train(
        cfg.task,
        spec,
        train_cfg,
        cfg.schedule,
        predictor_params,
        named_stream(seed, "train"),
        sampler=cfg.sampler,
    )
    label = label or _method_label(strategy, conditioning)
    path = seed_dir / f"model_{label}.json"
    save_checkpoint(
        path,
        spec,
        params,
        ema=ema,
        seed_lineage={"master_seed": seed, "stream": "train"},
        meta={
            "role": "bridge",
            "method": label,
            "strategy": strategy.value,
            "conditioning": conditioning.value,
            "seed": seed,
            "task_dim": d,
            "predictor_file": "predictor.json",
        },
    )
    write_csv(
        seed_dir / f"training_log_{label}.csv",
        "train_log.v1",
        ["epoch", "train_loss", "val_mse", "val_w2", "is_ema", "wall_time_s"],
        [[r["epoch"], r["train_loss"], r["val_mse"], r["val_w2"], r["is_ema"], r["wall_time_s"]] for r in log],
    )
    return path


# ---------------------------------------------------------------------------
# evaluation


def _load_bridge(path: Path, cfg: ExperimentConfig) -> dict:
    if not Path(path).is_file():
        raise CheckpointMismatchError(f"checkpoint not found: {path}")
    try:
        ckpt = load_checkpoint(path)
    except (ValueError, KeyError) as exc:
        raise CheckpointMismatchError(f"unreadable checkpoint {path}: {exc}") from exc
    expected = bridge_model_spec(_task_dim(cfg), cfg.model_hidden, cfg.time_embed_pairs)
    if ckpt["spec"] != expected:
        raise CheckpointMismatchError(
            f"checkpoint {path} was trained with {ckpt['spec']}, config expects {expected}"
        )
    if ckpt["meta"].get("role") != "bridge":
        raise CheckpointMismatchError(f"checkpoint {path} is not a bridge model")
    return ckpt


def _predictor_fn_for(ckpt: dict, ckpt_path: Path, cfg: ExperimentConfig):
    """Load the sibling predictor only when the strategy needs it at inference."""
    conditioning = ConditioningStrategy(ckpt["meta"]["conditioning"])
    if not conditioning.needs_predictor_at_inference:
        return None
    pred_path = Path(ckpt_path).parent / ckpt["meta"].get("predictor_file", "predictor.json")
    if not pred_path.is_file():
        raise CheckpointMismatchError(
            f"{conditioning.value} needs the predictor checkpoint, missing: {pred_path}"
        )
    pred = load_checkpoint(pred_path)
    if pred["spec"].output_dim != _task_dim(cfg):
        raise CheckpointMismatchError(f"predictor {pred_path} does not match the task dimension")
    return lambda ys: apply_mlp(pred["params"], ys)


def make_eval_set(cfg: ExperimentConfig, eval_seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fixed evaluation pairs and clean reference set for one eval seed."""
    xs, ys, _ = cfg.task.sample_pairs(EVAL_PAIRS, named_stream(eval_seed, "eval"))
    reference = cfg.task.clean_sampler(EVAL_REFERENCE, named_stream(eval_seed, "eval", index=1))
    return xs, ys, reference


def evaluate_bridge(
    cfg: ExperimentConfig,
    ckpt: dict,
    xs: np.ndarray,
    ys: np.ndarray,
    reference: np.ndarray,
    eval_seed: int,
    n_steps: int | None = None,
    predictor_fn=None,
) -> EvalReport:
    """Evaluate one bridge checkpoint on the fixed evaluation set.

    The sampling noise stream is keyed by the step count only, so methods
    compared at equal step counts see identical noise.
    """
    conditioning = ConditioningStrategy(ckpt["meta"]["conditioning"])
    starts, conditions = inference_endpoints(conditioning, ys, predictor_fn)
    sampler_cfg = cfg.sampler if n_steps is None else replace(cfg.sampler, n_steps=n_steps)
    rng = named_stream(eval_seed, "sample", index=sampler_cfg.n_steps)
    _, _, preds = sample_trajectory_batch(
        make_bridge_predictor(ckpt["params"], ckpt["spec"]), starts, conditions, sampler_cfg, cfg.schedule, rng
    )
    finals = preds[-1]
    w2, energy = perception_distance(finals, reference)
    return EvalReport(
        mse=float(np.mean((finals - xs) ** 2)),
        si_sdr_db=float(np.mean([si_sdr(f, x) for f, x in zip(finals, xs)])),
        w2=w2,
        energy_distance=energy,
        per_step_error=[float(np.mean(np.sum((preds[i] - xs) ** 2, axis=1))) for i in range(len(preds))],
    )


def evaluate_checkpoint_file(
    cfg: ExperimentConfig,
    path: Path,
    xs: np.ndarray,
    ys: np.ndarray,
    reference: np.ndarray,
    eval_seed: int,
    n_steps: int | None = None,
) -> tuple[str, EvalReport]:
    """Disk-level evaluation: loads the bridge model and, only if the
    strategy requires it, the sibling predictor."""
    ckpt = _load_bridge(path, cfg)
    predictor_fn = _predictor_fn_for(ckpt, path, cfg)
    report = evaluate_bridge(cfg, ckpt, xs, ys, reference, eval_seed, n_steps, predictor_fn)
    return ckpt["meta"]["method"], report


# ---------------------------------------------------------------------------
# subcommands


def _resolve_out(cfg: ExperimentConfig, out_override: str | None) -> Path:
    out = Path(out_override) if out_override else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_seeds(cfg: ExperimentConfig, seed_override: int | None) -> list[int]:
    return [seed_override] if seed_override is not None else list(cfg.seeds)


def cmd_train(config_path: str, out_override: str | None = None, seed_override: int | None = None) -> list[Path]:
    cfg = load_config(config_path)
    out = _resolve_out(cfg, out_override)
    written = []
    for seed in _resolve_seeds(cfg, seed_override):
        seed_dir = out / f"seed_{seed}"
        print(f"[train] seed {seed}: predictor")
        predictor_params, ppath = train_predictor_for_seed(cfg, seed, seed_dir)
        label = _method_label(cfg.train.strategy, cfg.train.conditioning)
        print(f"[train] seed {seed}: bridge model ({label})")
        mpath = train_bridge_for_seed(
            cfg, seed, cfg.train.strategy, cfg.train.conditioning, predictor_params, seed_dir
        )
        written.extend([ppath, mpath])
    for p in written:
        print(f"[train] wrote {p}")
    return written


def _parse_steps(steps_arg: str | None) -> list[int]:
    if not steps_arg:
        return [1, 2, 4, 8, 16, 32, 50]
    try:
        steps = [int(s) for s in steps_arg.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--steps must be a comma-separated integer list: {steps_arg!r}") from exc
    if not steps or any(s < 1 for s in steps):
        raise ConfigError("--steps needs at least one positive step count")
    return steps


def cmd_sweep_steps(
    config_path: str,
    checkpoints: list[str],
    steps_arg: str | None = None,
    out_override: str | None = None,
    seed_override: int | None = None,
) -> Path:
    cfg = load_config(config_path)
    out = _resolve_out(cfg, out_override)
    steps = _parse_steps(steps_arg)
    eval_seed = seed_override if seed_override is not None else cfg.seeds[0]
    xs, ys, reference = make_eval_set(cfg, eval_seed)
    rows = []
    for path in checkpoints:
        for n in steps:
            method, report = evaluate_checkpoint_file(cfg, Path(path), xs, ys, reference, eval_seed, n_steps=n)
            print(f"[sweep] {method} steps={n} mse={report.mse:.5f} w2={report.w2:.5f}")
            rows.append([method, n, report.mse, report.si_sdr_db, report.w2, report.energy_distance])
    out_path = out / "sweep_steps.csv"
    write_csv(out_path, "sweep.v1", ["method", "steps", "mse", "si_sdr_db", "w2", "energy_distance"], rows)
    print(f"[sweep] wrote {out_path}")
    return out_path


def cmd_exposure_bias(
    config_path: str,
    checkpoints: list[str],
    out_override: str | None = None,
    seed_override: int | None = None,
) -> Path:
    cfg = load_config(config_path)
    out = _resolve_out(cfg, out_override)
    eval_seed = seed_override if seed_override is not None else cfg.seeds[0]
    xs, ys, reference = make_eval_set(cfg, eval_seed)
    times = cfg.sampler.times(cfg.schedule)
    rows = []
    for path in checkpoints:
        ckpt = _load_bridge(Path(path), cfg)
        predictor_fn = _predictor_fn_for(ckpt, Path(path), cfg)
        conditioning = ConditioningStrategy(ckpt["meta"]["conditioning"])
        starts, conditions = inference_endpoints(conditioning, ys, predictor_fn)
        rng = named_stream(eval_seed, "sample", index=cfg.sampler.n_steps)
        _, _, preds = sample_trajectory_batch(
            make_bridge_predictor(ckpt["params"], ckpt["spec"]), starts, conditions, cfg.sampler, cfg.schedule, rng
        )
        method = ckpt["meta"]["method"]
        for i in range(len(preds)):
            pred_err = float(np.mean(np.sum((preds[i] - xs) ** 2, axis=1)))
            step_mse = float(np.mean((preds[i] - xs) ** 2))
            w2, _ = perception_distance(preds[i], reference)
            rows.append([method, i + 1, float(times[i]), pred_err, step_mse, w2])
        print(f"[exposure] {method}: final pred_err={rows[-1][3]:.5f}")
    out_path = out / "exposure_bias.csv"
    write_csv(out_path, "exposure.v1", ["method", "step", "t", "pred_err", "mse", "w2"], rows)
    print(f"[exposure] wrote {out_path}")
    return out_path


def _median_rows(rows: list[list], group_idx: int, seed_idx: int, value_start: int, group_order: list[str]) -> list[list]:
    medians = []
    for group in group_order:
        values = np.array([r[value_start:] for r in rows if r[group_idx] == group], dtype=float)
        medians.append([group, "median", *[float(np.median(values[:, j])) for j in range(values.shape[1])]])
    return medians


def cmd_strategies(
    config_path: str,
    out_override: str | None = None,
    seed_override: int | None = None,
) -> Path:
    cfg = load_config(config_path)
    out = _resolve_out(cfg, out_override)
    seeds = _resolve_seeds(cfg, seed_override)
    eval_seed = seeds[0]
    xs, ys, reference = make_eval_set(cfg, eval_seed)
    rows = []
    for seed in seeds:
        seed_dir = out / f"seed_{seed}"
        print(f"[strategies] seed {seed}: predictor")
        predictor_params, _ = train_predictor_for_seed(cfg, seed, seed_dir)
        for conditioning in ALL_CONDITIONINGS:
            print(f"[strategies] seed {seed}: training {conditioning.value}")
            path = train_bridge_for_seed(
                cfg, seed, TrainingStrategy.VANILLA, conditioning, predictor_params, seed_dir,
                label=conditioning.value,
            )
            method, report = evaluate_checkpoint_file(cfg, path, xs, ys, reference, eval_seed)
            rows.append([method, seed, report.mse, report.si_sdr_db, report.w2, report.energy_distance])
    rows.extend(_median_rows(rows, 0, 1, 2, [c.value for c in ALL_CONDITIONINGS]))
    out_path = out / "strategies.csv"
    write_csv(out_path, "strategies.v1", ["strategy", "seed", "mse", "si_sdr_db", "w2", "energy_distance"], rows)
    print(f"[strategies] wrote {out_path}")
    return out_path


def cmd_ablation(
    config_path: str,
    out_override: str | None = None,
    seed_override: int | None = None,
) -> Path:
    cfg = load_config(config_path)
    out = _resolve_out(cfg, out_override)
    seeds = _resolve_seeds(cfg, seed_override)
    eval_seed = seeds[0]
    xs, ys, reference = make_eval_set(cfg, eval_seed)
    rows = []
    for seed in seeds:
        seed_dir = out / f"seed_{seed}"
        print(f"[ablation] seed {seed}: predictor")
        predictor_params, _ = train_predictor_for_seed(cfg, seed, seed_dir)
        for strategy in ALL_PERTURBATIONS:
            print(f"[ablation] seed {seed}: training {strategy.value}")
            path = train_bridge_for_seed(
                cfg, seed, strategy, ConditioningStrategy.M1, predictor_params, seed_dir
            )
            method, report = evaluate_checkpoint_file(cfg, path, xs, ys, reference, eval_seed)
            rows.append([method, seed, report.mse, report.si_sdr_db, report.w2, report.energy_distance])
    rows.extend(_median_rows(rows, 0, 1, 2, [s.value for s in ALL_PERTURBATIONS]))
    out_path = out / "ablation.csv"
    write_csv(out_path, "ablation.v1", ["strategy", "seed", "mse", "si_sdr_db", "w2", "energy_distance"], rows)
    print(f"[ablation] wrote {out_path}")
    return out_path


def cmd_dump_dataset(
    config_path: str,
    out_override: str | None = None,
    seed_override: int | None = None,
) -> Path:
    cfg = load_config(config_path)
    out = _resolve_out(cfg, out_override)
    seed = seed_override if seed_override is not None else cfg.seeds[0]
    xs, ys, x_stars = cfg.task.sample_pairs(DATASET_DUMP_ROWS, named_stream(seed, "data"))
    d, m = xs.shape[1], ys.shape[1]
    columns = [f"x{i}" for i in range(d)] + [f"y{i}" for i in range(m)] + [f"x_star{i}" for i in range(d)]
    rows = [list(xs[i]) + list(ys[i]) + list(x_stars[i]) for i in range(len(xs))]
    out_path = out / "dataset.csv"
    write_csv(out_path, "dataset.v1", columns, rows)
    print(f"[dump-dataset] wrote {out_path} ({len(rows)} rows)")
    return out_path


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bridgelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, checkpoints=False, steps=False):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="single seed (overrides config list)")
        if checkpoints:
            p.add_argument("--checkpoint", nargs="+", required=True, help="bridge model checkpoint(s)")
        if steps:
            p.add_argument("--steps", default=None, help="comma-separated step counts")

    add_common(sub.add_parser("train", help="train predictor and bridge model"))
    add_common(sub.add_parser("sweep-steps", help="metrics versus step count"), checkpoints=True, steps=True)
    add_common(sub.add_parser("exposure-bias", help="per-step prediction errors"), checkpoints=True)
    add_common(sub.add_parser("strategies", help="conditioning strategies M1..M5"))
    add_common(sub.add_parser("ablation", help="perturbation strategy ablation"))
    add_common(sub.add_parser("dump-dataset", help="write sampled pairs as CSV"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            cmd_train(args.config, args.out, args.seed)
        elif args.command == "sweep-steps":
            cmd_sweep_steps(args.config, args.checkpoint, args.steps, args.out, args.seed)
        elif args.command == "exposure-bias":
            cmd_exposure_bias(args.config, args.checkpoint, args.out, args.seed)
        elif args.command == "strategies":
            cmd_strategies(args.config, args.out, args.seed)
        elif args.command == "ablation":
            cmd_ablation(args.config, args.out, args.seed)
        elif args.command == "dump-dataset":
            cmd_dump_dataset(args.config, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except CheckpointMismatchError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
