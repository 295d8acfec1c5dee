"""Training objectives: three binary cross-entropies for the diffusion model
and squared error for the time model. Probabilities are clipped to
[1e-7, 1 - 1e-7] so saturated predictions keep finite losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..chem import MolGraph
from ..diffusion import DesMove
from . import autodiff as ad
from .autodiff import Tensor
from .model import SwapScores

CLIP = 1e-7


def bce_mean(p: Tensor, y: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of probabilities p against 0/1 labels y."""
    y = np.asarray(y, dtype=p.data.dtype)
    pc = ad.clip(p, CLIP, 1.0 - CLIP)
    pos = ad.mul(ad.log(pc), y)
    neg = ad.mul(ad.log(1.0 - pc), 1.0 - y)
    return ad.mul(ad.tmean(pos + neg), -1.0)


@dataclass
class LossBreakdown:
    l_des: Tensor | None  # None when the graph has no feasible moves (masked)
    l_form: Tensor
    l_break: Tensor
    w_des: float = 1.0
    w_form: float = 1.0
    w_break: float = 1.0

    def total(self) -> Tensor:
        out = ad.mul(self.l_form, self.w_form) + ad.mul(self.l_break, self.w_break)
        if self.l_des is not None:
            out = out + ad.mul(self.l_des, self.w_des)
        return out

    def values(self) -> dict[str, float]:
        return {
            "l_des": float(self.l_des.data) if self.l_des is not None else None,
            "l_form": float(self.l_form.data),
            "l_break": float(self.l_break.data),
            "total": float(self.total().data),
        }


def diffusion_losses(
    scores: SwapScores,
    reverse_move: DesMove,
    g0: MolGraph,
    gt: MolGraph,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> LossBreakdown:
    """Labels: the reverse move that undoes the forward step is the positive
    move; a pair should form iff bonded in the original molecule; a bond of
    the current graph should break iff absent from the original molecule."""
    g0_bonded = {(a, b) for a, b, _ in g0.bonds}

    if scores.moves:
        key = reverse_move.canonical_key
        y_des = np.fromiter(
            (1.0 if m.canonical_key == key else 0.0 for m in scores.moves),
            dtype=float,
            count=len(scores.moves),
        )
        l_des = bce_mean(scores.q_vec, y_des)
    else:
        l_des = None

    y_form = np.zeros(len(scores.pair_pos))
    for pair, pos in scores.pair_pos.items():
        if pair in g0_bonded:
            y_form[pos] = 1.0
    l_form = bce_mean(scores.p_form_vec, y_form)

    y_break = np.zeros(len(scores.bond_pos))
    for bond, pos in scores.bond_pos.items():
        if bond not in g0_bonded:
            y_break[pos] = 1.0
    l_break = bce_mean(scores.p_break_vec, y_break)

    return LossBreakdown(l_des, l_form, l_break, *weights)


def time_loss(t_pred: Tensor, t_real: float) -> Tensor:
    diff = t_pred - float(t_real)
    return ad.mul(diff, diff)
