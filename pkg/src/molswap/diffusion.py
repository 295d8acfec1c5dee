"""Valence-constrained forward noising by double edge swaps.

A move removes bonds (i,j) and (k,l) and creates (i,k) and (j,l); every
atom loses one bond and gains one, so degrees, formula, atom count and
bond count are conserved at every step. Feasibility additionally requires
distinct endpoints, multiplicities that stay within triple bonds, and a
connected result.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .chem import MolGraph
from .errors import InfeasibleMove, NoFeasibleMove
from .topo import is_connected

Pair = tuple[int, int]


def _pair(a: int, b: int) -> Pair:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class DesMove:
    removed: tuple[Pair, Pair]
    added: tuple[Pair, Pair]

    @staticmethod
    def from_quad(i: int, j: int, k: int, l: int) -> "DesMove":
        if len({i, j, k, l}) != 4:
            raise ValueError("double edge swap needs four distinct atoms")
        removed = tuple(sorted((_pair(i, j), _pair(k, l))))
        added = tuple(sorted((_pair(i, k), _pair(j, l))))
        return DesMove(removed, added)

    @property
    def canonical_key(self) -> tuple[tuple[Pair, Pair], tuple[Pair, Pair]]:
        """Normalized identity of the move up to edge-order symmetry."""
        return (self.removed, self.added)

    def reverse(self) -> "DesMove":
        return DesMove(self.added, self.removed)


def _passes_multiplicity(g: MolGraph, m: DesMove) -> bool:
    (r1, r2) = m.removed
    (a1, a2) = m.added
    if g.multiplicity(*r1) < 1 or g.multiplicity(*r2) < 1:
        return False
    return g.multiplicity(*a1) < 3 and g.multiplicity(*a2) < 3


def _apply_unchecked(g: MolGraph, m: DesMove) -> MolGraph:
    mult = {(a, b): mm for a, b, mm in g.bonds}
    for r in m.removed:
        mult[r] -= 1
    for a in m.added:
        mult[a] = mult.get(a, 0) + 1
    return MolGraph.create(
        g.elements,
        [(a, b, mm) for (a, b), mm in mult.items() if mm > 0],
        g.provenance,
    )


def feasible(g: MolGraph, m: DesMove) -> bool:
    """Conditions: four distinct atoms (by construction), removed bonds
    exist, added bonds stay at most triple, result stays connected."""
    if not _passes_multiplicity(g, m):
        return False
    return is_connected(_apply_unchecked(g, m))


def apply(g: MolGraph, m: DesMove) -> MolGraph:
    if not feasible(g, m):
        raise InfeasibleMove(f"move {m} is not feasible here")
    return _apply_unchecked(g, m)


def _candidate_moves(g: MolGraph) -> list[DesMove]:
    """Moves passing the distinctness and multiplicity conditions (1-3),
    before the connectivity check. Both rewirings of every disjoint bond
    pair, each exactly once, in a deterministic order."""
    bonds = [(a, b) for a, b, _ in g.bonds]
    out: list[DesMove] = []
    for x in range(len(bonds)):
        i, j = bonds[x]
        for y in range(x + 1, len(bonds)):
            k, l = bonds[y]
            if i in (k, l) or j in (k, l):
                continue
            for quad in ((i, j, k, l), (i, j, l, k)):
                m = DesMove.from_quad(*quad)
                if _passes_multiplicity(g, m):
                    out.append(m)
    return out


def enumerate_feasible(g: MolGraph) -> list[DesMove]:
    """Every feasible move exactly once, sorted by canonical key."""
    return sorted(
        (m for m in _candidate_moves(g) if is_connected(_apply_unchecked(g, m))),
        key=lambda m: m.canonical_key,
    )


def noise_step(g: MolGraph, rng_seed: int) -> tuple[MolGraph, DesMove]:
    """One uniform draw over the feasible moves of g.

    Proposal-rejection: draw uniformly among moves passing conditions 1-3
    and redraw while the connectivity condition fails, which keeps the
    accepted move uniform over the full feasible set without filtering
    every candidate. Falls back to exact filtering if rejection drags on.
    """
    rng = random.Random(rng_seed)
    candidates = _candidate_moves(g)
    if not candidates:
        raise NoFeasibleMove("no double edge swap passes the bond conditions")
    max_tries = 20 + 4 * len(candidates)
    for _ in range(max_tries):
        m = candidates[rng.randrange(len(candidates))]
        result = _apply_unchecked(g, m)
        if is_connected(result):
            return result, m
    survivors = [m for m in candidates if is_connected(_apply_unchecked(g, m))]
    if not survivors:
        raise NoFeasibleMove("every candidate swap disconnects the graph")
    m = survivors[rng.randrange(len(survivors))]
    return _apply_unchecked(g, m), m


@dataclass(frozen=True)
class Trajectory:
    states: tuple[MolGraph, ...]
    moves: tuple[DesMove, ...]
    times: tuple[float, ...]
    truncated: bool = False

    @property
    def steps(self) -> int:
        return len(self.moves)


def default_steps(g: MolGraph, factor: float = 0.25) -> int:
    """Randomization horizon: a quarter of the total bond multiplicity."""
    return math.ceil(factor * g.bond_count)


def noise_trajectory(
    g0: MolGraph,
    steps: int | None = None,
    rng_seed: int = 0,
    steps_factor: float = 0.25,
) -> Trajectory:
    """Run the noising chain from g0, recording each state and move.

    times[s] = s / steps against the intended horizon even if the chain
    stalls early (the truncated flag records that).
    """
    if steps is None:
        steps = default_steps(g0, steps_factor)
    rng = random.Random(rng_seed)
    states = [g0]
    moves: list[DesMove] = []
    truncated = False
    for _ in range(steps):
        try:
            nxt, mv = noise_step(states[-1], rng.getrandbits(63))
        except NoFeasibleMove:
            truncated = True
            break
        states.append(nxt)
        moves.append(mv)
    if steps == 0:
        times = (0.0,)
    else:
        times = tuple(s / steps for s in range(len(states)))
    return Trajectory(tuple(states), tuple(moves), times, truncated)
