import random

import numpy as np
import pytest

from molswap.chem import parse_smiles
from molswap.diffusion import noise_trajectory
from molswap.errors import EmptyDataset, VersionMismatch
from molswap.features import featurize
from molswap.neural import as_tensors, init_weights, time_forward
from molswap.neural.model import VARIANT_BASE, VARIANT_FPS
from molswap.training import (
    TrainConfig,
    dataset_slices,
    finetune_fps,
    train_diffusion,
    train_time,
    upgrade_to_fps,
)

TOY = [
    "CCO", "CCC", "CCN", "CC=C", "C1CCCCC1", "CC(C)O", "CCCO", "C1=CC=CC=C1",
]


def toy_dataset():
    return [parse_smiles(t) for t in TOY]


def quick_cfg(**over):
    base = dict(
        slice_size=100, batch_size=8, epochs=2, lr=1e-3, seed=7,
        worker_count=1, checkpoint_interval=1000, validate=False,
    )
    base.update(over)
    return TrainConfig(**base)


def batch_rows(metrics, epoch=None):
    rows = [m for m in metrics if m["kind"] == "batch"]
    if epoch is not None:
        rows = [m for m in rows if m["epoch"] == epoch]
    return rows


def test_empty_dataset_raises():
    with pytest.raises(EmptyDataset):
        train_diffusion([], quick_cfg())


def test_split_disjoint_and_deterministic():
    cfg = quick_cfg()
    s1 = dataset_slices(cfg, 50)
    s2 = dataset_slices(cfg, 50)
    assert s1 == s2
    train, val = s1[0]
    assert set(train).isdisjoint(val)
    assert len(train) + len(val) == 50
    assert len(train) == 40  # 80 percent


def test_train_diffusion_loss_decreases():
    ds = toy_dataset()
    cfg = quick_cfg(epochs=5)
    weights, metrics = train_diffusion(ds, cfg)
    first = [r["total"] for r in batch_rows(metrics, epoch=0)]
    last = [r["total"] for r in batch_rows(metrics, epoch=cfg.epochs - 1)]
    assert sum(last) / len(last) < sum(first) / len(first)
    assert weights.variant == VARIANT_BASE
    assert weights.all_finite()


def test_batch_size_honored():
    ds = toy_dataset()
    cfg = quick_cfg(epochs=1, batch_size=12)
    _, metrics = train_diffusion(ds, cfg)
    rows = batch_rows(metrics, epoch=0)
    units = sum(r["units"] for r in rows)
    assert len(rows) == -(-units // 12)  # ceil(pairs / batch size)
    assert all(r["units"] == 12 for r in rows[:-1])


def test_metrics_rows_count_time_mode():
    ds = toy_dataset()
    cfg = quick_cfg(epochs=1, batch_size=4)
    _, metrics = train_time(ds, cfg)
    rows = batch_rows(metrics)
    total_states = sum(r["units"] for r in rows)
    # states visited = trajectory length per molecule in the training split
    cfg_states = 0
    train_idx = dataset_slices(cfg, len(ds))[0][0]
    from molswap.io_utils import stable_hash

    for i in train_idx:
        traj = noise_trajectory(
            ds[i], rng_seed=stable_hash(cfg.seed, "traj", 0, i),
            steps_factor=cfg.steps_factor,
        )
        cfg_states += len(traj.states)
    assert total_states == cfg_states


def test_untrained_time_model_near_uniform_variance():
    rng = random.Random(1)
    params = as_tensors(init_weights(VARIANT_BASE, seed=3))
    ds = toy_dataset()
    errors = []
    for _ in range(120):
        g = ds[rng.randrange(len(ds))]
        traj = noise_trajectory(g, rng_seed=rng.getrandbits(32))
        state = traj.states[rng.randrange(len(traj.states))]
        t_real = rng.random()
        pred = float(time_forward(featurize(state, 0.0), params).data)
        errors.append((pred - t_real) ** 2)
    mse = sum(errors) / len(errors)
    assert abs(mse - 1 / 12) < 0.03


def test_train_time_reduces_mse():
    ds = toy_dataset()
    cfg = quick_cfg(epochs=5)
    _, metrics = train_time(ds, cfg)
    first = [r["mse"] for r in batch_rows(metrics, epoch=0)]
    last = [r["mse"] for r in batch_rows(metrics, epoch=cfg.epochs - 1)]
    assert sum(last) / len(last) < sum(first) / len(first)


def test_resume_reproduces_metric_stream(tmp_path):
    ds = toy_dataset()
    cfg = quick_cfg(epochs=2, checkpoint_dir=str(tmp_path))
    _, full_metrics = train_diffusion(ds, quick_cfg(epochs=2))
    _, partial = train_diffusion(ds, cfg, stop_after_batches=2)
    ckpt = tmp_path / "diffusion-checkpoint.npz"
    assert ckpt.exists()
    _, resumed = train_diffusion(ds, cfg, resume_from=ckpt)
    full_batches = batch_rows(full_metrics)
    resumed_batches = batch_rows(resumed)
    assert [r["batch"] for r in resumed_batches] == [
        r["batch"] for r in full_batches[2:]
    ]
    for a, b in zip(full_batches[2:], resumed_batches):
        assert a == b  # bit-identical metric stream after resume


def test_worker_pool_matches_serial():
    ds = toy_dataset()[:4]
    w1, m1 = train_diffusion(ds, quick_cfg(epochs=1, worker_count=1))
    w2, m2 = train_diffusion(ds, quick_cfg(epochs=1, worker_count=2))
    assert m1 == m2
    for k in w1.tensors:
        assert (w1.tensors[k] == w2.tensors[k]).all()


def test_finetune_fps_variant_and_stability():
    ds = toy_dataset()[:4]
    cfg = quick_cfg(epochs=1)
    base_weights, base_metrics = train_diffusion(ds, cfg)
    fps_cfg = quick_cfg(epochs=1, variant=VARIANT_FPS, lr=1e-4)
    fps_weights, fps_metrics = finetune_fps(base_weights, ds, fps_cfg)
    assert fps_weights.variant == VARIANT_FPS
    assert fps_weights.all_finite()
    base_final = batch_rows(base_metrics)[-1]["total"]
    fps_first = batch_rows(fps_metrics)[0]["total"]
    assert fps_first <= base_final * 1.10


def test_finetune_requires_base():
    fps = init_weights(VARIANT_FPS, seed=1)
    with pytest.raises(VersionMismatch):
        upgrade_to_fps(fps)


def test_checkpoint_loads_and_continues(tmp_path):
    ds = toy_dataset()[:4]
    cfg = quick_cfg(epochs=1, checkpoint_dir=str(tmp_path), batch_size=4)
    train_diffusion(ds, cfg, stop_after_batches=1)
    ckpt = tmp_path / "diffusion-checkpoint.npz"
    weights, metrics = train_diffusion(ds, cfg, resume_from=ckpt)
    assert weights.all_finite()
    assert batch_rows(metrics)
