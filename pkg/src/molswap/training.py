"""Training loops for the diffusion and time models.

Datasets are processed in slices with a deterministic 80/20 split. Every
epoch regenerates each molecule's noising trajectory from a functional
seed, which doubles as data augmentation and makes any position in the run
reproducible from (dataset, config, seed) alone; checkpoints only need to
store weights, optimizer moments and a cursor.
"""

from __future__ import annotations

import io
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chem import MolGraph
from .diffusion import Trajectory, noise_trajectory
from .errors import CorruptFile, EmptyDataset, VersionMismatch
from .features import FeatureBundle, featurize, fingerprint, _featurize_at
from .io_utils import atomic_write_bytes, stable_hash
from .neural import (
    Adam,
    ModelWeights,
    as_tensors,
    diffusion_forward,
    diffusion_losses,
    from_tensors,
    init_weights,
    time_forward,
    time_loss,
)
from .neural.model import VARIANT_BASE, VARIANT_FPS, expected_shapes


@dataclass
class TrainConfig:
    slice_size: int = 100_000
    train_fraction: float = 0.8
    batch_size: int = 12
    epochs: int = 3
    lr: float = 1e-4
    lr_schedule: str = "constant"  # "constant" or "cosine"
    lr_end: float = 1e-5  # final rate for the cosine schedule
    lr_pretrained: float = 1e-5
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    checkpoint_interval: int = 1_000
    worker_count: int = 24
    seed: int = 0
    variant: str = VARIANT_BASE
    steps_factor: float = 0.25
    checkpoint_dir: str | None = None
    validate: bool = True
    # fresh trajectories every epoch are the augmentation mechanism; fix them
    # (same trajectory each epoch) for pure-memorization sanity runs
    fresh_trajectories: bool = True

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie in (0, 1)")
        for name in ("slice_size", "batch_size", "epochs", "checkpoint_interval",
                     "worker_count"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")


def lr_at_epoch(cfg: "TrainConfig", epoch: int) -> float:
    """Per-epoch learning rate; a function of the epoch alone so resumed
    runs stay bit-identical."""
    if cfg.lr_schedule == "constant" or cfg.epochs <= 1:
        return cfg.lr
    frac = epoch / (cfg.epochs - 1)
    return cfg.lr_end + 0.5 * (cfg.lr - cfg.lr_end) * (1.0 + math.cos(math.pi * frac))


def dataset_slices(cfg: TrainConfig, n: int) -> list[tuple[list[int], list[int]]]:
    """Per slice: (train indices, validation indices), deterministic in seed."""
    out = []
    for start in range(0, n, cfg.slice_size):
        idx = list(range(start, min(start + cfg.slice_size, n)))
        rng = random.Random(stable_hash(cfg.seed, "split", start))
        rng.shuffle(idx)
        cut = max(1, int(len(idx) * cfg.train_fraction)) if len(idx) > 1 else 1
        out.append((sorted(idx[:cut]), sorted(idx[cut:])))
    return out


def _epoch_order(cfg: TrainConfig, train_idx: list[int], epoch: int) -> list[int]:
    order = list(train_idx)
    random.Random(stable_hash(cfg.seed, "order", epoch)).shuffle(order)
    return order


def _trajectory_for(cfg: TrainConfig, mol: MolGraph, epoch: int, index: int) -> Trajectory:
    epoch_key = epoch if cfg.fresh_trajectories else 0
    return noise_trajectory(
        mol,
        rng_seed=stable_hash(cfg.seed, "traj", epoch_key, index),
        steps_factor=cfg.steps_factor,
    )


class _FeatureWorkers:
    """Optional process pool for the featurization fan-out."""

    def __init__(self, workers: int):
        self.pool = (
            ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
        )

    def bundles(self, jobs: list[tuple[MolGraph, float]]) -> list[FeatureBundle]:
        if self.pool is None or len(jobs) < 2:
            return [featurize(g, t) for g, t in jobs]
        return list(self.pool.map(_featurize_at, jobs))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


@dataclass
class _Cursor:
    epoch: int = 0
    slice: int = 0
    item: int = 0  # position within the slice's iteration order
    unit: int = 0  # next pair (diffusion) or state (time) within the molecule
    batches: int = 0
    in_batch: int = 0  # units accumulated toward the current batch


def _checkpoint_path(cfg: TrainConfig, mode: str) -> Path | None:
    if cfg.checkpoint_dir is None:
        return None
    d = Path(cfg.checkpoint_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{mode}-checkpoint.npz"


def save_checkpoint(
    path: Path,
    variant: str,
    params: dict,
    opt: Adam,
    cursor: _Cursor,
    mode: str,
) -> None:
    arrays: dict[str, np.ndarray] = {}
    for k, p in params.items():
        arrays["w:" + k] = p.data
    state = opt.state_dict()
    for k, v in state["m"].items():
        arrays["m:" + k] = v
    for k, v in state["v"].items():
        arrays["v:" + k] = v
    arrays["meta"] = np.array(
        [cursor.epoch, cursor.slice, cursor.item, cursor.unit, cursor.batches,
         state["t"]],
        dtype=np.int64,
    )
    arrays["variant"] = np.array([variant, mode])
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: str | Path, cfg: TrainConfig, mode: str):
    try:
        data = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise CorruptFile(f"cannot read checkpoint: {exc}") from exc
    variant, saved_mode = (str(x) for x in data["variant"])
    if variant != cfg.variant:
        raise VersionMismatch(
            f"checkpoint variant {variant!r} does not match config {cfg.variant!r}"
        )
    if saved_mode != mode:
        raise VersionMismatch(f"checkpoint is for {saved_mode!r}, not {mode!r}")
    tensors = {
        k[2:]: np.asarray(data[k]) for k in data.files if k.startswith("w:")
    }
    weights = ModelWeights(variant, tensors)
    missing = set(expected_shapes(variant)) - set(tensors)
    if missing:
        raise CorruptFile(f"checkpoint lacks tensors: {sorted(missing)[:3]}")
    meta = data["meta"]
    cursor = _Cursor(
        int(meta[0]), int(meta[1]), int(meta[2]), int(meta[3]), int(meta[4])
    )
    opt_state = {
        "t": int(meta[5]),
        "m": {k[2:]: np.asarray(data[k]) for k in data.files if k.startswith("m:")},
        "v": {k[2:]: np.asarray(data[k]) for k in data.files if k.startswith("v:")},
    }
    return weights, opt_state, cursor


def _units_of(mode: str, traj: Trajectory):
    """Training units: consecutive-step pairs for the diffusion model, every
    state for the time model."""
    if mode == "diffusion":
        return [
            (traj.states[0], traj.states[s + 1], traj.moves[s], traj.times[s + 1])
            for s in range(traj.steps)
        ]
    return [(traj.states[s], traj.times[s]) for s in range(len(traj.states))]


def _unit_jobs(mode, units) -> list[tuple[MolGraph, float]]:
    if mode == "diffusion":
        return [(gt, t) for _, gt, _, t in units]
    return [(state, 0.0) for state, _ in units]  # the time model does not see t


def _unit_loss(mode, unit, bundle, params, cfg):
    if mode == "diffusion":
        g0, gt, move, _ = unit
        fp = fingerprint(gt) if cfg.variant == VARIANT_FPS else None
        scores = diffusion_forward(bundle, gt, params, fp)
        lb = diffusion_losses(scores, move.reverse(), g0, gt, cfg.loss_weights)
        return lb.total(), lb.values()
    state, t = unit
    fp = fingerprint(state) if cfg.variant == VARIANT_FPS else None
    pred = time_forward(bundle, params, fp)
    loss = time_loss(pred, t)
    return loss, {"mse": float(loss.data)}


def _run_training(
    dataset: list[MolGraph],
    cfg: TrainConfig,
    params: dict,
    opt: Adam,
    mode: str,
    cursor: _Cursor,
    metrics: list[dict],
    stop_after_batches: int | None = None,
) -> bool:
    """Returns True if the run completed, False if stopped early."""
    slices = dataset_slices(cfg, len(dataset))
    ckpt_path = _checkpoint_path(cfg, mode)
    workers = _FeatureWorkers(cfg.worker_count)

    batch_values: list[dict] = []
    since_checkpoint = 0

    def flush_batch():
        nonlocal since_checkpoint
        if cursor.in_batch == 0:
            return
        opt.step(grad_scale=1.0 / cursor.in_batch)
        opt.zero_grad()
        cursor.batches += 1
        since_checkpoint += 1
        row = {"kind": "batch", "mode": mode, "batch": cursor.batches,
               "epoch": cursor.epoch, "units": cursor.in_batch}
        keys = set().union(*(v.keys() for v in batch_values))
        for key in sorted(keys):
            vals = [v[key] for v in batch_values if v.get(key) is not None]
            row[key] = sum(vals) / len(vals) if vals else None
        metrics.append(row)
        batch_values.clear()
        cursor.in_batch = 0

    def checkpoint():
        if ckpt_path is not None:
            save_checkpoint(ckpt_path, cfg.variant, params, opt, cursor, mode)

    try:
        while cursor.epoch < cfg.epochs:
            opt.lr = lr_at_epoch(cfg, cursor.epoch)
            while cursor.slice < len(slices):
                train_idx, val_idx = slices[cursor.slice]
                order = _epoch_order(cfg, train_idx, cursor.epoch)
                while cursor.item < len(order):
                    mol_index = order[cursor.item]
                    traj = _trajectory_for(
                        cfg, dataset[mol_index], cursor.epoch, mol_index
                    )
                    units = _units_of(mode, traj)
                    if traj.truncated and not units:
                        metrics.append(
                            {"kind": "skip", "mode": mode, "index": mol_index,
                             "reason": "no feasible move"}
                        )
                    pending = units[cursor.unit:]
                    bundles = workers.bundles(_unit_jobs(mode, pending))
                    for unit, bundle in zip(pending, bundles):
                        loss, values = _unit_loss(mode, unit, bundle, params, cfg)
                        loss.backward()
                        batch_values.append(values)
                        cursor.unit += 1
                        cursor.in_batch += 1
                        if cursor.in_batch == cfg.batch_size:
                            flush_batch()
                            if since_checkpoint >= cfg.checkpoint_interval:
                                checkpoint()
                                since_checkpoint = 0
                            if (
                                stop_after_batches is not None
                                and cursor.batches >= stop_after_batches
                            ):
                                checkpoint()
                                return False
                    cursor.unit = 0
                    cursor.item += 1
                # slice boundary: flush the partial batch and checkpoint
                flush_batch()
                checkpoint()
                since_checkpoint = 0
                if cfg.validate and val_idx:
                    metrics.append(
                        _validation_row(dataset, cfg, params, mode,
                                        cursor.epoch, val_idx)
                    )
                cursor.item = 0
                cursor.slice += 1
            cursor.slice = 0
            cursor.epoch += 1
        checkpoint()
        return True
    finally:
        workers.close()


def _validation_row(dataset, cfg, params, mode, epoch, val_idx) -> dict:
    totals: list[float] = []
    for mol_index in val_idx:
        traj = _trajectory_for(cfg, dataset[mol_index], epoch, mol_index)
        units = _units_of(mode, traj)
        for unit, job in zip(units, _unit_jobs(mode, units)):
            loss, _ = _unit_loss(mode, unit, featurize(*job), params, cfg)
            totals.append(float(loss.data))
    mean = sum(totals) / len(totals) if totals else None
    return {"kind": "validation", "mode": mode, "epoch": epoch,
            "mean_loss": mean, "units": len(totals)}


def _train(
    dataset: list[MolGraph],
    cfg: TrainConfig,
    mode: str,
    weights: ModelWeights | None = None,
    resume_from: str | Path | None = None,
    stop_after_batches: int | None = None,
    lr_overrides: dict[str, float] | None = None,
) -> tuple[ModelWeights, list[dict]]:
    if not dataset:
        raise EmptyDataset("training needs at least one molecule")
    cursor = _Cursor()
    opt_state = None
    if resume_from is not None:
        weights, opt_state, cursor = load_checkpoint(resume_from, cfg, mode)
    if weights is None:
        weights = init_weights(cfg.variant, cfg.seed)
    params = as_tensors(weights)
    opt = Adam(params, lr=cfg.lr, lr_overrides=lr_overrides)
    if opt_state is not None:
        opt.load_state_dict(opt_state)
    metrics: list[dict] = []
    _run_training(dataset, cfg, params, opt, mode, cursor, metrics,
                  stop_after_batches)
    return from_tensors(params, cfg.variant), metrics


def train_diffusion(
    dataset: list[MolGraph],
    cfg: TrainConfig,
    weights: ModelWeights | None = None,
    resume_from: str | Path | None = None,
    stop_after_batches: int | None = None,
) -> tuple[ModelWeights, list[dict]]:
    """Train the swap-prediction part; the time part rides along untouched."""
    return _train(dataset, cfg, "diffusion", weights, resume_from,
                  stop_after_batches)


def train_time(
    dataset: list[MolGraph],
    cfg: TrainConfig,
    weights: ModelWeights | None = None,
    resume_from: str | Path | None = None,
    stop_after_batches: int | None = None,
) -> tuple[ModelWeights, list[dict]]:
    """Train the normalized-time predictor on every trajectory state."""
    return _train(dataset, cfg, "time", weights, resume_from, stop_after_batches)


FPS_NEW_GROUPS = (
    "diffusion.fps.",
    "diffusion.form.w_fp",
    "diffusion.break.w_fp",
    "time.fps.",
    "time.head.w_fp",
)


def upgrade_to_fps(base: ModelWeights, seed: int = 0) -> ModelWeights:
    """FPS container initialized from BASE weights; the fingerprint adapters
    start at zero so the upgraded model reproduces the BASE outputs."""
    if base.variant != VARIANT_BASE:
        raise VersionMismatch("fine-tuning needs BASE weights to start from")
    fps = init_weights(VARIANT_FPS, seed)
    for name, arr in base.tensors.items():
        fps.tensors[name] = arr.copy()
    return fps


def finetune_fps(
    base_weights: ModelWeights,
    dataset: list[MolGraph],
    cfg: TrainConfig,
) -> tuple[ModelWeights, list[dict]]:
    """Differential fine-tuning: pre-trained groups at cfg.lr_pretrained,
    fingerprint-related groups at cfg.lr."""
    fps = upgrade_to_fps(base_weights, cfg.seed)
    if cfg.variant != VARIANT_FPS:
        cfg = TrainConfig(**{**cfg.__dict__, "variant": VARIANT_FPS})
    overrides = {prefix: cfg.lr for prefix in FPS_NEW_GROUPS}
    base_lr_cfg = TrainConfig(**{**cfg.__dict__, "lr": cfg.lr_pretrained})
    weights, metrics = _train(
        dataset, base_lr_cfg, "diffusion", weights=fps, lr_overrides=overrides
    )
    weights, metrics2 = _train(
        dataset, base_lr_cfg, "time", weights=weights, lr_overrides=overrides
    )
    return weights, metrics + metrics2
