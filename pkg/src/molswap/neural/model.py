"""Network architecture: message-passing trunk, pair heads, time head.

One ModelWeights container carries both the diffusion-model parameters
(shared trunk + bond-formation and bond-breakage heads) and the time-model
parameters; trainers update their own part and the sampler consumes both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chem import MolGraph
from ..diffusion import DesMove, enumerate_feasible
from ..errors import DimensionMismatch
from ..features import E_TOTAL, G_WIDTH, X_WIDTH, FP_BITS, FeatureBundle, Fingerprint
from . import autodiff as ad
from .autodiff import Tensor

VARIANT_BASE = "base"
VARIANT_FPS = "fps"

D_EMBED = 124
D_FFN = 320
D_HEAD = 256
D_CTX = G_WIDTH + 1  # graph features plus the diffusion time
T_EMBED = 64
T_FFN = 64
T_HEAD = 64
T_CTX = G_WIDTH  # the time model predicts t, so t is not an input
PAIR_IN = 2 * D_EMBED + E_TOTAL + G_WIDTH
FP_OUT = 256

FORMAT_VERSION = 1


def _gine_shapes(prefix: str, d_in: int, d: int, f: int, ctx: int) -> dict[str, tuple]:
    shapes = {}
    for l in range(3):
        din = d_in if l == 0 else d
        shapes[f"{prefix}.gine{l}.w_node"] = (din, d)
        shapes[f"{prefix}.gine{l}.b_node"] = (d,)
        shapes[f"{prefix}.gine{l}.w_edge"] = (E_TOTAL, d)
        shapes[f"{prefix}.gine{l}.b_edge"] = (d,)
        shapes[f"{prefix}.gine{l}.w_ctx"] = (ctx, d)
        shapes[f"{prefix}.gine{l}.b_ctx"] = (d,)
        shapes[f"{prefix}.gine{l}.eps"] = ()
        shapes[f"{prefix}.gine{l}.ffn_w1"] = (d, f)
        shapes[f"{prefix}.gine{l}.ffn_b1"] = (f,)
        shapes[f"{prefix}.gine{l}.ffn_w2"] = (f, d)
        shapes[f"{prefix}.gine{l}.ffn_b2"] = (d,)
        shapes[f"{prefix}.gine{l}.w_res"] = (din, d)
        shapes[f"{prefix}.gine{l}.b_res"] = (d,)
    return shapes


def expected_shapes(variant: str) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {}
    shapes.update(_gine_shapes("diffusion", X_WIDTH, D_EMBED, D_FFN, D_CTX))
    for head in ("form", "break"):
        shapes[f"diffusion.{head}.w_in"] = (PAIR_IN, D_HEAD)
        shapes[f"diffusion.{head}.b_in"] = (D_HEAD,)
        shapes[f"diffusion.{head}.w_out"] = (D_HEAD, 1)
        shapes[f"diffusion.{head}.b_out"] = (1,)
    shapes.update(_gine_shapes("time", X_WIDTH, T_EMBED, T_FFN, T_CTX))
    shapes["time.head.w_in"] = (T_EMBED, T_HEAD)
    shapes["time.head.b_in"] = (T_HEAD,)
    shapes["time.head.w_out"] = (T_HEAD, 1)
    shapes["time.head.b_out"] = (1,)
    if variant == VARIANT_FPS:
        shapes["diffusion.fps.w1"] = (FP_BITS, 1024)
        shapes["diffusion.fps.b1"] = (1024,)
        shapes["diffusion.fps.w2"] = (1024, 512)
        shapes["diffusion.fps.b2"] = (512,)
        shapes["diffusion.fps.w3"] = (512, FP_OUT)
        shapes["diffusion.fps.b3"] = (FP_OUT,)
        shapes["diffusion.form.w_fp"] = (FP_OUT, D_HEAD)
        shapes["diffusion.break.w_fp"] = (FP_OUT, D_HEAD)
        shapes["time.fps.w1"] = (FP_BITS, 512)
        shapes["time.fps.b1"] = (512,)
        shapes["time.fps.w2"] = (512, FP_OUT)
        shapes["time.fps.b2"] = (FP_OUT,)
        shapes["time.head.w_fp"] = (FP_OUT, T_HEAD)
    return shapes


@dataclass
class ModelWeights:
    """Versioned parameter container for both models (float32 storage)."""

    variant: str
    tensors: dict[str, np.ndarray]
    version: int = FORMAT_VERSION

    def copy(self) -> "ModelWeights":
        return ModelWeights(
            self.variant, {k: v.copy() for k, v in self.tensors.items()}, self.version
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.tensors.values())


def init_weights(
    variant: str = VARIANT_BASE, seed: int = 0, dtype=np.float32
) -> ModelWeights:
    """Glorot-style init; output layers start small so heads begin near 0.5."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in sorted(expected_shapes(variant).items()):
        if name.endswith(("b_node", "b_edge", "b_ctx", "ffn_b1", "ffn_b2", "b_res",
                          "b_in", "b_out", "b1", "b2", "b3", "eps")):
            tensors[name] = np.zeros(shape, dtype=dtype)
        elif name.endswith(("w_out",)):
            tensors[name] = (0.01 * rng.standard_normal(shape)).astype(dtype)
        elif name.endswith("w_fp"):
            # zero adapter keeps an FPS model equal to its BASE parent at start
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in, fan_out = shape[0], shape[-1]
            scale = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-scale, scale, size=shape).astype(dtype)
    return ModelWeights(variant, tensors)


def count_parameters(w: ModelWeights, part: str) -> int:
    """part is 'diffusion' or 'time'."""
    return sum(v.size for k, v in w.tensors.items() if k.startswith(part + "."))


def as_tensors(w: ModelWeights, dtype=None) -> dict[str, Tensor]:
    return {
        k: Tensor(v.astype(dtype) if dtype is not None else v)
        for k, v in w.tensors.items()
    }


def from_tensors(params: dict[str, Tensor], variant: str) -> ModelWeights:
    return ModelWeights(variant, {k: t.data.copy() for k, t in params.items()})


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def _check_bundle(bundle: FeatureBundle) -> None:
    n = bundle.X.shape[0]
    if bundle.X.shape != (n, X_WIDTH):
        raise DimensionMismatch(f"X has shape {bundle.X.shape}, expected (n, {X_WIDTH})")
    if bundle.E.shape != (n, n, E_TOTAL):
        raise DimensionMismatch(f"E has shape {bundle.E.shape}")
    if bundle.g.shape != (G_WIDTH,):
        raise DimensionMismatch(f"g has shape {bundle.g.shape}")


def _edge_arrays(bundle: FeatureBundle):
    """Directed edge list over bonded pairs (both directions)."""
    bonded = bundle.E[:, :, E_TOTAL - 1] == 0.0
    np.fill_diagonal(bonded, False)
    src, dst = np.nonzero(bonded)
    feats = bundle.E[src, dst]
    return src, dst, feats


def gine_forward(
    bundle: FeatureBundle,
    params: dict[str, Tensor],
    prefix: str = "diffusion",
) -> Tensor:
    """Three message-passing layers; returns per-atom embeddings."""
    _check_bundle(bundle)
    dtype = params[f"{prefix}.gine0.w_node"].data.dtype
    n = bundle.n
    src, dst, edge_np = _edge_arrays(bundle)
    edge_feats = Tensor(edge_np.astype(dtype))
    if prefix == "time":
        ctx_np = bundle.g.astype(dtype)
    else:
        ctx_np = np.concatenate([bundle.g, [bundle.t]]).astype(dtype)
    ctx = Tensor(ctx_np)
    h: Tensor = Tensor(bundle.X.astype(dtype))
    for l in range(3):
        p = {k: params[f"{prefix}.gine{l}.{k}"] for k in (
            "w_node", "b_node", "w_edge", "b_edge", "w_ctx", "b_ctx",
            "eps", "ffn_w1", "ffn_b1", "ffn_w2", "ffn_b2", "w_res", "b_res",
        )}
        a = ad.matmul(h, p["w_node"]) + p["b_node"]
        eproj = ad.matmul(edge_feats, p["w_edge"]) + p["b_edge"]
        cproj = ad.matmul(ctx, p["w_ctx"]) + p["b_ctx"]
        msg = ad.relu(ad.gather(a, src) + eproj + cproj)
        agg = ad.segment_sum(msg, dst, n)
        scaled = a + ad.mul(a, p["eps"])  # (1 + eps) * a
        s = scaled + agg
        hidden = ad.relu(ad.matmul(s, p["ffn_w1"]) + p["ffn_b1"])
        out = ad.matmul(hidden, p["ffn_w2"]) + p["ffn_b2"]
        h = out + (ad.matmul(h, p["w_res"]) + p["b_res"])
    return h


def fps_forward(params: dict[str, Tensor], prefix: str, fp: Fingerprint) -> Tensor:
    dtype = params[f"{prefix}.fps.w1"].data.dtype
    x: Tensor = Tensor(fp.as_float().astype(dtype))
    x = ad.relu(ad.matmul(x, params[f"{prefix}.fps.w1"]) + params[f"{prefix}.fps.b1"])
    x = ad.relu(ad.matmul(x, params[f"{prefix}.fps.w2"]) + params[f"{prefix}.fps.b2"])
    if f"{prefix}.fps.w3" in params:
        x = ad.relu(ad.matmul(x, params[f"{prefix}.fps.w3"]) + params[f"{prefix}.fps.b3"])
    return x


@dataclass
class SwapScores:
    """Per-pair formation scores, per-bond breakage scores, and the combined
    score of every feasible reverse move."""

    moves: list[DesMove]
    q_vec: Tensor  # (M,)
    p_form_vec: Tensor  # (P,) over unordered pairs i<j
    p_break_vec: Tensor  # (B,) over bond entities
    pair_pos: dict[tuple[int, int], int]
    bond_pos: dict[tuple[int, int], int]

    def p_form(self, i: int, j: int) -> float:
        return float(self.p_form_vec.data[self.pair_pos[(min(i, j), max(i, j))]])

    def p_break(self, i: int, j: int) -> float:
        return float(self.p_break_vec.data[self.bond_pos[(min(i, j), max(i, j))]])

    @property
    def q_inv(self) -> dict[DesMove, float]:
        return {m: float(q) for m, q in zip(self.moves, self.q_vec.data)}

    def q_values(self) -> np.ndarray:
        return self.q_vec.data.copy()


def _pair_head(
    params: dict[str, Tensor],
    name: str,
    base: Tensor,
    fps_rows: Tensor | None,
) -> Tensor:
    pre = ad.matmul(base, params[f"{name}.w_in"]) + params[f"{name}.b_in"]
    if fps_rows is not None:
        pre = pre + ad.matmul(fps_rows, params[f"{name}.w_fp"])
    hidden = ad.relu(pre)
    logits = ad.matmul(hidden, params[f"{name}.w_out"]) + params[f"{name}.b_out"]
    return ad.sigmoid(ad.reshape(logits, (logits.shape[0],)))


def diffusion_forward(
    bundle: FeatureBundle,
    graph: MolGraph,
    params: dict[str, Tensor],
    fp: Fingerprint | None = None,
    moves: list[DesMove] | None = None,
) -> SwapScores:
    """Score bond formation for every pair, breakage for every bond, and
    combine them into reverse-move scores
    q(m) = p_break(r1) * p_break(r2) * p_form(a1) * p_form(a2)."""
    _check_bundle(bundle)
    if graph.n != bundle.n:
        raise DimensionMismatch("graph and bundle disagree on atom count")
    h = gine_forward(bundle, params, "diffusion")
    dtype = h.data.dtype
    n = graph.n

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pair_pos = {p: k for k, p in enumerate(pairs)}
    I = np.fromiter((p[0] for p in pairs), dtype=int, count=len(pairs))
    J = np.fromiter((p[1] for p in pairs), dtype=int, count=len(pairs))
    hi = ad.gather(h, I)
    hj = ad.gather(h, J)
    e_rows = Tensor(bundle.E[I, J].astype(dtype))
    g_rows = ad.expand_rows(Tensor(bundle.g.astype(dtype)), len(pairs))
    base = ad.concat([hi + hj, ad.absolute(hi - hj), e_rows, g_rows], axis=1)

    fps_pair_rows = None
    fps_bond_rows = None
    if "diffusion.fps.w1" in params:
        if fp is None:
            raise DimensionMismatch("FPS variant needs a fingerprint input")
        branch = fps_forward(params, "diffusion", fp)
        fps_pair_rows = ad.expand_rows(branch, len(pairs))

    bond_keys = [(a, b) for a, b, _ in graph.bonds]
    bond_pos = {k: p for p, k in enumerate(bond_keys)}
    bond_rows = np.fromiter((pair_pos[k] for k in bond_keys), dtype=int,
                            count=len(bond_keys))
    base_bonds = ad.gather(base, bond_rows)
    if fps_pair_rows is not None:
        fps_bond_rows = ad.gather(fps_pair_rows, bond_rows)

    p_form = _pair_head(params, "diffusion.form", base, fps_pair_rows)
    p_break = _pair_head(params, "diffusion.break", base_bonds, fps_bond_rows)

    if moves is None:
        moves = enumerate_feasible(graph)
    if moves:
        r1 = np.fromiter((bond_pos[m.removed[0]] for m in moves), dtype=int)
        r2 = np.fromiter((bond_pos[m.removed[1]] for m in moves), dtype=int)
        a1 = np.fromiter((pair_pos[m.added[0]] for m in moves), dtype=int)
        a2 = np.fromiter((pair_pos[m.added[1]] for m in moves), dtype=int)
        q = ad.mul(
            ad.mul(ad.gather(p_break, r1), ad.gather(p_break, r2)),
            ad.mul(ad.gather(p_form, a1), ad.gather(p_form, a2)),
        )
    else:
        q = Tensor(np.zeros(0, dtype=dtype))
    return SwapScores(moves, q, p_form, p_break, pair_pos, bond_pos)


def time_forward(
    bundle: FeatureBundle,
    params: dict[str, Tensor],
    fp: Fingerprint | None = None,
) -> Tensor:
    """Scalar in (0,1): predicted normalized diffusion time."""
    h = gine_forward(bundle, params, "time")
    pooled = ad.tmean(h, axis=0)
    pre = ad.matmul(pooled, params["time.head.w_in"]) + params["time.head.b_in"]
    if "time.fps.w1" in params:
        if fp is None:
            raise DimensionMismatch("FPS variant needs a fingerprint input")
        branch = fps_forward(params, "time", fp)
        pre = pre + ad.matmul(branch, params["time.head.w_fp"])
    hidden = ad.relu(pre)
    out = ad.matmul(hidden, params["time.head.w_out"]) + params["time.head.b_out"]
    return ad.sigmoid(ad.reshape(out, ()))
