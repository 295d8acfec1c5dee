"""Model input tensors and circular fingerprints.

featurize() produces the node matrix X, the per-pair edge tensor E, the
graph vector g and the normalized diffusion time t. Count-valued entries
are normalized by fixed caps (neighbor counts /4, bridge counts /8, cycle
counts /10, path count /8); binary entries stay 0/1.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .chem import MolGraph, canonical_order, relabel, stable_atom_classes
from .errors import TimeOutOfRange
from .topo import (
    bridges,
    connected_components,
    is_planar,
    layout_2d,
    local_edge_connectivity,
    min_cycle_basis,
)

# Element one-hot order follows the supported-element listing.
ELEMENT_ORDER = (
    "B", "N", "C", "O", "F", "P", "S", "Cl", "Br", "I",
    "Ca", "K", "Na", "Mg", "H",
)
_ELEMENT_SLOT = {sym: k for k, sym in enumerate(ELEMENT_ORDER)}

X_WIDTH = 31  # element 15 + cycle flags 13 + heavy 1 + hydrogen 1 + bridge 1
E_WIDTH = 20  # mult one-hot 4 + cycle flags 13 + bridge 1 + paths 1 + distance 1
E_TOTAL = E_WIDTH + 1  # plus the trailing no-bond indicator
G_WIDTH = 21  # cycle counts 13 + planar 1 + components 1 + fractions 2 + bond mix 4

NEIGHBOR_CAP = 4.0
BRIDGE_CAP = 8.0
CYCLE_CAP = 10.0
PATH_CAP = 8.0


@dataclass(frozen=True)
class FeatureBundle:
    X: np.ndarray  # (n, 31)
    E: np.ndarray  # (n, n, 21); [..., :20] bond features, [..., 20] no-bond flag
    g: np.ndarray  # (21,)
    t: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def with_time(self, t: float) -> "FeatureBundle":
        _check_time(t)
        return replace(self, t=float(t))


def _check_time(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise TimeOutOfRange(f"t={t} outside [0, 1]")


def _cycle_flags(sizes: tuple[int, ...]) -> np.ndarray:
    flags = np.zeros(13)
    for s in sizes:
        flags[min(s, 15) - 3] = 1.0
    return flags


def featurize(g: MolGraph, t: float) -> FeatureBundle:
    """Assemble X, E, g, t for one connected molecule. Deterministic."""
    _check_time(t)
    cs = min_cycle_basis(g)  # raises NotConnected on disconnected input
    multi_bridges, simple_bridges = bridges(g)
    n = g.n

    X = np.zeros((n, X_WIDTH))
    bridge_count = {i: 0 for i in range(n)}
    for a, b in multi_bridges:
        bridge_count[a] += 1
        bridge_count[b] += 1
    for i in range(n):
        X[i, _ELEMENT_SLOT[g.elements[i]]] = 1.0
        X[i, 15:28] = _cycle_flags(cs.per_node_membership[i])
        X[i, 28] = g.heavy_neighbor_count(i) / NEIGHBOR_CAP
        X[i, 29] = g.h_neighbor_count(i) / NEIGHBOR_CAP
        X[i, 30] = bridge_count[i] / BRIDGE_CAP

    distances = _bond_distances(g)
    E = np.zeros((n, n, E_TOTAL))
    E[:, :, E_WIDTH] = 1.0  # everything starts as "no bond"
    for a, b, m in g.bonds:
        vec = np.zeros(E_TOTAL)
        vec[m - 1] = 1.0  # single/double/triple; the aromatic slot stays 0
        key = (a, b) if a < b else (b, a)
        vec[4:17] = _cycle_flags(cs.per_edge_membership[key])
        vec[17] = 1.0 if key in multi_bridges else 0.0
        vec[18] = local_edge_connectivity(g, a, b) / PATH_CAP
        vec[19] = distances[key]
        E[a, b] = vec
        E[b, a] = vec

    gvec = np.zeros(G_WIDTH)
    gvec[0:13] = np.asarray(cs.size_histogram(), dtype=float) / CYCLE_CAP
    gvec[13] = 1.0 if is_planar(g) else 0.0
    gvec[14] = float(connected_components(g))
    entities = len(g.bonds)
    if entities:
        gvec[15] = len(multi_bridges) / entities
        gvec[16] = len(simple_bridges) / entities
        mults = [m for _, _, m in g.bonds]
        for m in mults:
            gvec[17 + m - 1] += 1.0 / entities
    return FeatureBundle(X, E, gvec, float(t))


def _bond_distances(g: MolGraph) -> dict[tuple[int, int], float]:
    """Per-bond 2D length, averaged over refinement classes.

    Lengths come from the layout of the canonically-relabeled graph and are
    pooled over bonds whose endpoint classes and multiplicity agree, so the
    value is exactly preserved under any relabeling of the input.
    """
    order = canonical_order(g)
    gc = relabel(g, order)
    layout = layout_2d(gc)
    pos_of = {atom: k for k, atom in enumerate(order)}
    classes = stable_atom_classes(g)

    sums: dict[tuple, float] = {}
    counts: dict[tuple, int] = {}
    keys: dict[tuple[int, int], tuple] = {}
    for a, b, m in g.bonds:
        key = (min(classes[a], classes[b]), max(classes[a], classes[b]), m)
        keys[(a, b)] = key
        d = layout.distance(pos_of[a], pos_of[b])
        sums[key] = sums.get(key, 0.0) + d
        counts[key] = counts.get(key, 0) + 1
    return {e: sums[k] / counts[k] for e, k in keys.items()}


def _featurize_at(args) -> FeatureBundle:
    g, t = args
    return featurize(g, t)


def featurize_many(
    graphs: list[MolGraph], t: float = 0.0, workers: int = 1
) -> list[FeatureBundle]:
    """Data-parallel featurization across molecules."""
    if workers <= 1 or len(graphs) < 2:
        return [featurize(g, t) for g in graphs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_featurize_at, [(g, t) for g in graphs], chunksize=8))


# ---------------------------------------------------------------------------
# Morgan-style circular fingerprints
# ---------------------------------------------------------------------------

FP_BITS = 2048
FP_RADIUS = 3


class Fingerprint:
    """Fixed-width binary substructure fingerprint."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        assert bits.shape == (FP_BITS,)
        self.bits = bits.astype(np.uint8)

    def count(self) -> int:
        return int(self.bits.sum())

    def as_float(self) -> np.ndarray:
        return self.bits.astype(float)

    def __eq__(self, other) -> bool:
        return isinstance(other, Fingerprint) and bool(
            (self.bits == other.bits).all()
        )

    def __hash__(self):
        return hash(self.bits.tobytes())


def _hash64(payload: str) -> int:
    digest = hashlib.blake2b(payload.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def fingerprint(g: MolGraph) -> Fingerprint:
    """Iterative neighborhood hashing, radius 3, folded to 2048 bits.

    Initial atom invariant: (element, degree, hydrogen-neighbor count,
    sorted incident multiplicities). Permutation-invariant by construction.
    """
    codes = [
        _hash64(
            repr(
                (
                    g.elements[i],
                    g.degree(i),
                    g.h_neighbor_count(i),
                    tuple(sorted(g.adjacency[i].values())),
                )
            )
        )
        for i in range(g.n)
    ]
    bits = np.zeros(FP_BITS, dtype=np.uint8)
    for c in codes:
        bits[c % FP_BITS] = 1
    for _ in range(FP_RADIUS):
        codes = [
            _hash64(
                repr(
                    (
                        codes[i],
                        tuple(sorted((m, codes[j]) for j, m in g.adjacency[i].items())),
                    )
                )
            )
            for i in range(g.n)
        ]
        for c in codes:
            bits[c % FP_BITS] = 1
    return Fingerprint(bits)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a AND b| / |a OR b|; 0 when both fingerprints are empty."""
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        return 0.0
    inter = int(np.logical_and(a.bits, b.bits).sum())
    return inter / union
