import math
import random

import numpy as np
import pytest

from molswap.chem import parse_smiles
from molswap.diffusion import apply, enumerate_feasible
from molswap.errors import CorruptFile, DimensionMismatch, VersionMismatch
from molswap.features import featurize, fingerprint
from molswap.neural import (
    Adam,
    as_tensors,
    backward_and_step,
    bce_mean,
    count_parameters,
    diffusion_forward,
    diffusion_losses,
    expected_shapes,
    from_tensors,
    gine_forward,
    init_weights,
    load_weights,
    save_weights,
    time_forward,
    time_loss,
)
from molswap.neural.autodiff import Tensor
from molswap.neural.model import VARIANT_BASE, VARIANT_FPS

from helpers import permuted


def jittered_weights(variant, seed=5, dtype=np.float64):
    """Float64 weights with zero-initialized tensors nudged off their kinks,
    for finite-difference comparisons."""
    w = init_weights(variant, seed=seed, dtype=dtype)
    rng = np.random.default_rng(seed + 1)
    for name, arr in w.tensors.items():
        if arr.size and np.all(arr == 0):
            w.tensors[name] = rng.normal(0.0, 0.05, arr.shape).astype(dtype)
    return w


def test_parameter_audit_base():
    w = init_weights(VARIANT_BASE, seed=0)
    diff = count_parameters(w, "diffusion")
    time = count_parameters(w, "time")
    assert abs(diff - 471_000) <= 0.10 * 471_000, diff
    assert abs(time - 63_000) <= 0.10 * 63_000, time


def test_parameter_audit_fps():
    w = init_weights(VARIANT_FPS, seed=0)
    diff = count_parameters(w, "diffusion")
    time = count_parameters(w, "time")
    assert abs(diff - 3_100_000) <= 0.10 * 3_100_000, diff
    assert abs(time - 1_300_000) <= 0.10 * 1_300_000, time


@pytest.mark.parametrize("text", ["C", "CCO", "C1=CC=CC=C1", "CC(C)C1=CC=CC=C1"])
def test_gine_output_shape(text):
    g = parse_smiles(text)
    bundle = featurize(g, 0.2)
    params = as_tensors(init_weights(VARIANT_BASE, seed=1))
    h = gine_forward(bundle, params, "diffusion")
    assert h.shape == (g.n, 124)
    ht = gine_forward(bundle, params, "time")
    assert ht.shape == (g.n, 64)


def test_gine_permutation_equivariance():
    rng = random.Random(3)
    g = parse_smiles("CC(C)O")
    bundle = featurize(g, 0.4)
    params = as_tensors(jittered_weights(VARIANT_BASE))
    h = gine_forward(bundle, params, "diffusion").data
    perm = list(range(g.n))
    rng.shuffle(perm)
    gp = permuted(g, perm)
    hp = gine_forward(featurize(gp, 0.4), params, "diffusion").data
    for i in range(g.n):
        np.testing.assert_allclose(h[i], hp[perm[i]], rtol=1e-8, atol=1e-10)


def test_gine_constant_rows_for_equal_atoms_with_zero_edge_effect():
    # zero everything except the node path: atoms with equal features map to
    # equal embeddings when messages vanish
    g = parse_smiles("[H][H]")
    bundle = featurize(g, 0.0)
    w = init_weights(VARIANT_BASE, seed=2)
    for name, arr in w.tensors.items():
        if ".w_edge" in name or ".w_ctx" in name or ".b_edge" in name or ".b_ctx" in name:
            w.tensors[name] = np.zeros_like(arr)
    params = as_tensors(w)
    h = gine_forward(bundle, params, "diffusion").data
    np.testing.assert_allclose(h[0], h[1], rtol=1e-6)


def test_dimension_mismatch_raises():
    g = parse_smiles("CCO")
    bundle = featurize(g, 0.0)
    bad = bundle.__class__(bundle.X[:, :-1], bundle.E, bundle.g, bundle.t)
    params = as_tensors(init_weights(VARIANT_BASE, seed=1))
    with pytest.raises(DimensionMismatch):
        gine_forward(bad, params)


def test_swap_scores_ranges_and_symmetry():
    g = parse_smiles("CCO")
    bundle = featurize(g, 0.1)
    params = as_tensors(jittered_weights(VARIANT_BASE))
    scores = diffusion_forward(bundle, g, params)
    q = scores.q_values()
    assert ((q > 0) & (q < 1)).all()
    for i in range(g.n):
        for j in range(g.n):
            if i != j:
                assert scores.p_form(i, j) == scores.p_form(j, i)
    assert set(scores.q_inv) == set(scores.moves)


def test_forced_half_probabilities():
    g = parse_smiles("CCO")
    bundle = featurize(g, 0.1)
    w = init_weights(VARIANT_BASE, seed=4)
    for head in ("form", "break"):
        w.tensors[f"diffusion.{head}.w_out"] = np.zeros_like(
            w.tensors[f"diffusion.{head}.w_out"]
        )
        w.tensors[f"diffusion.{head}.b_out"] = np.zeros_like(
            w.tensors[f"diffusion.{head}.b_out"]
        )
    scores = diffusion_forward(bundle, g, as_tensors(w))
    assert np.allclose(scores.p_form_vec.data, 0.5)
    assert np.allclose(scores.p_break_vec.data, 0.5)
    assert np.allclose(scores.q_values(), 0.0625)


def test_time_forward_range_and_invariance():
    rng = random.Random(9)
    g = parse_smiles("CC(C)C1=CC=CC=C1")
    bundle = featurize(g, 0.7)
    params = as_tensors(jittered_weights(VARIANT_BASE))
    t = float(time_forward(bundle, params).data)
    assert 0.0 < t < 1.0
    perm = list(range(g.n))
    rng.shuffle(perm)
    gp = permuted(g, perm)
    tp = float(time_forward(featurize(gp, 0.7), params).data)
    assert t == pytest.approx(tp, rel=1e-9)


def test_time_zeroed_final_layer_gives_half():
    g = parse_smiles("CCO")
    bundle = featurize(g, 0.3)
    w = init_weights(VARIANT_BASE, seed=0)
    w.tensors["time.head.w_out"] = np.zeros_like(w.tensors["time.head.w_out"])
    w.tensors["time.head.b_out"] = np.zeros_like(w.tensors["time.head.b_out"])
    assert float(time_forward(bundle, as_tensors(w)).data) == 0.5


def test_time_outputs_in_open_interval_many():
    params = as_tensors(init_weights(VARIANT_BASE, seed=8))
    rng = random.Random(10)
    from helpers import fixture_molecules

    for g in fixture_molecules()[:20]:
        t = float(time_forward(featurize(g, rng.random()), params).data)
        assert 0.0 < t < 1.0


def test_bce_analytics():
    p = Tensor(np.array([0.5, 0.5, 0.5]))
    y = np.array([1.0, 0.0, 1.0])
    loss = bce_mean(p, y)
    assert float(loss.data) == pytest.approx(math.log(2), rel=1e-12)
    # perfect predictions, clipped at 1e-7
    perfect = Tensor(np.array([1.0, 0.0]))
    loss2 = bce_mean(perfect, np.array([1.0, 0.0]))
    assert float(loss2.data) <= 1.7e-7


def test_time_loss_zero_at_target():
    assert float(time_loss(Tensor(np.asarray(0.37)), 0.37).data) == 0.0


def test_diffusion_losses_labels():
    g = parse_smiles("C=C")
    moves = enumerate_feasible(g)
    assert moves
    gt = apply(g, moves[0])
    bundle = featurize(gt, 0.5)
    params = as_tensors(jittered_weights(VARIANT_BASE))
    scores = diffusion_forward(bundle, gt, params)
    lb = diffusion_losses(scores, moves[0].reverse(), g0=g, gt=gt)
    vals = lb.values()
    assert vals["l_des"] is not None and vals["l_des"] > 0
    assert vals["l_form"] > 0 and vals["l_break"] > 0
    assert vals["total"] == pytest.approx(
        vals["l_des"] + vals["l_form"] + vals["l_break"]
    )


def gradcheck_params(variant, sample_per_tensor=3, h=1e-5):
    g = parse_smiles("C=C")  # six atoms
    moves = enumerate_feasible(g)
    gt = apply(g, moves[0])
    bundle = featurize(gt, 0.5)
    fp = fingerprint(gt) if variant == VARIANT_FPS else None
    w = jittered_weights(variant, seed=6)
    params = as_tensors(w)

    def total_loss() -> float:
        scores = diffusion_forward(bundle, gt, params, fp)
        lb = diffusion_losses(scores, moves[0].reverse(), g0=g, gt=gt)
        t_pred = time_forward(bundle, params, fp)
        return lb.total() + time_loss(t_pred, 0.4)

    loss = total_loss()
    loss.backward()
    rng = np.random.default_rng(0)
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        assert p.grad is not None, f"no gradient reached {name}"
        flat = p.data.ravel()
        gflat = p.grad.ravel()
        count = min(sample_per_tensor, flat.size)
        for k in rng.choice(flat.size, size=count, replace=False):
            orig = flat[k]
            flat[k] = orig + h
            up = float(total_loss().data)
            flat[k] = orig - h
            dn = float(total_loss().data)
            flat[k] = orig
            num = (up - dn) / (2 * h)
            ana = gflat[k]
            err = abs(ana - num) / max(1.0, abs(num))
            worst = max(worst, err)
            assert err < 1e-4, f"{name}[{k}]: analytic {ana} vs numeric {num}"
    return worst


def test_gradcheck_base():
    gradcheck_params(VARIANT_BASE)


def test_gradcheck_fps():
    gradcheck_params(VARIANT_FPS, sample_per_tensor=2)


def test_single_step_decreases_loss():
    g = parse_smiles("C=C")
    moves = enumerate_feasible(g)
    gt = apply(g, moves[0])
    bundle = featurize(gt, 0.5)
    w = jittered_weights(VARIANT_BASE, seed=12, dtype=np.float64)
    params = as_tensors(w)
    opt = Adam(params, lr=1e-4)

    def loss_now():
        scores = diffusion_forward(bundle, gt, params)
        return diffusion_losses(scores, moves[0].reverse(), g0=g, gt=gt).total()

    before = float(loss_now().data)
    backward_and_step(loss_now(), opt)
    after = float(loss_now().data)
    assert after < before


def test_zero_lr_keeps_weights_bitwise():
    g = parse_smiles("C=C")
    moves = enumerate_feasible(g)
    gt = apply(g, moves[0])
    bundle = featurize(gt, 0.5)
    w = init_weights(VARIANT_BASE, seed=3)
    params = as_tensors(w)
    before = {k: p.data.copy() for k, p in params.items()}
    opt = Adam(params, lr=0.0)
    scores = diffusion_forward(bundle, gt, params)
    backward_and_step(
        diffusion_losses(scores, moves[0].reverse(), g0=g, gt=gt).total(), opt
    )
    for k, p in params.items():
        assert (p.data == before[k]).all(), k


def test_differential_learning_rates():
    g = parse_smiles("C=C")
    moves = enumerate_feasible(g)
    gt = apply(g, moves[0])
    bundle = featurize(gt, 0.5)
    fp = fingerprint(gt)
    w = jittered_weights(VARIANT_FPS, seed=14)
    params = as_tensors(w)
    pretrained_lr = 1e-5
    opt = Adam(
        params,
        lr=pretrained_lr,
        lr_overrides={"diffusion.fps.": 1e-4, "diffusion.form.w_fp": 1e-4},
    )
    before = {k: p.data.copy() for k, p in params.items()}
    scores = diffusion_forward(bundle, gt, params, fp)
    backward_and_step(
        diffusion_losses(scores, moves[0].reverse(), g0=g, gt=gt).total(), opt
    )
    old_step = np.abs(params["diffusion.form.w_in"].data - before["diffusion.form.w_in"]).max()
    new_step = np.abs(params["diffusion.fps.w1"].data - before["diffusion.fps.w1"]).max()
    # adaptive-moment steps scale with the learning rate, so the ratio holds
    assert old_step <= 0.11 * new_step


def test_weights_roundtrip_bitwise(tmp_path):
    w = init_weights(VARIANT_BASE, seed=7)
    p1 = tmp_path / "w1.json"
    p2 = tmp_path / "w2.json"
    save_weights(w, p1)
    w2 = load_weights(p1)
    save_weights(w2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    for k in w.tensors:
        assert (w.tensors[k] == w2.tensors[k]).all()


def test_truncated_weights_file(tmp_path):
    w = init_weights(VARIANT_BASE, seed=7)
    path = tmp_path / "w.json"
    save_weights(w, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptFile):
        load_weights(path)


def test_variant_mismatch(tmp_path):
    w = init_weights(VARIANT_BASE, seed=7)
    path = tmp_path / "w.json"
    save_weights(w, path)
    with pytest.raises(VersionMismatch):
        load_weights(path, expect_variant=VARIANT_FPS)


def test_missing_tensor_is_corrupt(tmp_path):
    import json

    w = init_weights(VARIANT_BASE, seed=7)
    path = tmp_path / "w.json"
    save_weights(w, path)
    doc = json.loads(path.read_text())
    doc["tensors"] = doc["tensors"][:-1]
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptFile):
        load_weights(path)


def test_fps_zero_adapter_matches_base_outputs():
    base = init_weights(VARIANT_BASE, seed=21)
    fps = init_weights(VARIANT_FPS, seed=21)
    for name, arr in base.tensors.items():
        fps.tensors[name] = arr.copy()
    g = parse_smiles("CCO")
    bundle = featurize(g, 0.2)
    fp = fingerprint(g)
    s_base = diffusion_forward(bundle, g, as_tensors(base))
    s_fps = diffusion_forward(bundle, g, as_tensors(fps), fp)
    np.testing.assert_allclose(
        s_base.p_form_vec.data, s_fps.p_form_vec.data, rtol=1e-6
    )
    t_base = float(time_forward(bundle, as_tensors(base)).data)
    t_fps = float(time_forward(bundle, as_tensors(fps), fp).data)
    assert t_base == pytest.approx(t_fps, rel=1e-6)
