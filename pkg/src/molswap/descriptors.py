"""Graph-computable molecular descriptor battery.

Implemented set (22 ids, including the set-level internal similarity).
Descriptors that need external parameterizations (logP and partial-charge
families, BertzCT, IPC, VSA families) are deliberately not implemented;
the report machinery treats the battery as pluggable.
"""

from __future__ import annotations

import math
from collections import deque

from .chem import ELEMENTS, MolGraph
from .errors import NotConnected
from .features import fingerprint, tanimoto
from .topo import bridges, is_connected, min_cycle_basis

DESCRIPTOR_IDS = (
    "molecular_weight",
    "exact_molecular_weight",
    "heavy_atom_count",
    "valence_electron_count",
    "nhoh_count",
    "no_count",
    "fraction_csp3",
    "balaban_j",
    "h_bond_donors",
    "h_bond_acceptors",
    "rotatable_bonds",
    "tpsa",
    "aromatic_rings",
    "aliphatic_rings",
    "ring_count",
    "saturated_rings",
    "chi0",
    "chi1",
    "chi0n",
    "chi2n",
    "chi3n",
    "internal_similarity",
)

INTEGER_DESCRIPTORS = frozenset(
    {
        "heavy_atom_count",
        "valence_electron_count",
        "nhoh_count",
        "no_count",
        "h_bond_donors",
        "h_bond_acceptors",
        "rotatable_bonds",
        "aromatic_rings",
        "aliphatic_rings",
        "ring_count",
        "saturated_rings",
    }
)

# Fragment contributions for topological polar surface area, kekulized
# neutral N/O patterns only.
_TPSA_N = {
    ("triple",): 23.79,
    ("h0", "d1"): 12.36,
    ("h0", "d0", "ring3"): 3.01,
    ("h0", "d0"): 3.24,
    ("h1", "d1"): 23.85,
    ("h1", "d0", "ring3"): 21.94,
    ("h1", "d0"): 12.03,
    ("h2", "d0"): 26.02,
}
_TPSA_O = {
    ("h0", "d1"): 17.07,
    ("h0", "d0", "ring3"): 12.53,
    ("h0", "d0"): 9.23,
    ("h1", "d0"): 20.23,
}


def _heavy_indices(g: MolGraph) -> list[int]:
    return [i for i in range(g.n) if g.elements[i] != "H"]


def _heavy_adj(g: MolGraph) -> dict[int, list[int]]:
    heavy = set(_heavy_indices(g))
    return {
        i: sorted(j for j in g.adjacency[i] if j in heavy) for i in heavy
    }


def _bfs_distance_sums(adj: dict[int, list[int]]) -> dict[int, int]:
    sums = {}
    for s in adj:
        dist = {s: 0}
        q = deque([s])
        while q:
            v = q.popleft()
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    q.append(w)
        sums[s] = sum(dist.values())
    return sums


def _balaban_j(g: MolGraph) -> float:
    adj = _heavy_adj(g)
    edges = [
        (a, b)
        for a, b, _ in g.bonds
        if g.elements[a] != "H" and g.elements[b] != "H"
    ]
    m = len(edges)
    if m == 0 or len(adj) < 2:
        return 0.0
    mu = m - len(adj) + 1
    s = _bfs_distance_sums(adj)
    total = sum(1.0 / math.sqrt(s[a] * s[b]) for a, b in edges)
    return m / (mu + 1.0) * total


def _tpsa(g: MolGraph, ring3_nodes: set[int]) -> float:
    total = 0.0
    for i, sym in enumerate(g.elements):
        if sym not in ("N", "O"):
            continue
        h = g.h_neighbor_count(i)
        mults = [m for j, m in g.adjacency[i].items() if g.elements[j] != "H"]
        doubles = sum(1 for m in mults if m == 2)
        triples = sum(1 for m in mults if m == 3)
        table = _TPSA_N if sym == "N" else _TPSA_O
        if triples and sym == "N":
            total += table[("triple",)]
            continue
        key3 = (f"h{h}", f"d{doubles}", "ring3")
        key = (f"h{h}", f"d{doubles}")
        if i in ring3_nodes and key3 in table:
            total += table[key3]
        elif key in table:
            total += table[key]
        # patterns outside the table (e.g. hypervalent) contribute nothing
    return total


def _ring_pi_electrons(
    g: MolGraph, cycle: tuple, ring_atoms: set[int]
) -> int | None:
    """Electron count of the simple 4n+2 model, or None if the ring cannot
    be aromatic (non-CNOS atom, triple bond, saturated carbon).

    Ring-internal double bonds give two electrons. A carbon whose double
    bond leaves this ring still contributes one electron when the partner
    sits in a fused ring, which keeps the count independent of which kekule
    structure the input happened to use. Carbonyl-style carbons (double to
    a non-ring atom) contribute nothing but stay conjugation-compatible.
    """
    ring_nodes = sorted({v for e in cycle for v in e})
    ring_edges = set(cycle)
    electrons = 0
    for a, b in ring_edges:
        m = g.multiplicity(a, b)
        if m == 3:
            return None
        if m == 2:
            electrons += 2
    for v in ring_nodes:
        sym = g.elements[v]
        if sym not in ("C", "N", "O", "S"):
            return None
        if any(
            g.multiplicity(a, b) == 2 and v in (a, b) for a, b in ring_edges
        ):
            continue
        exo_doubles = [
            j for j, m in g.adjacency[v].items() if m == 2
        ]
        if sym in ("N", "O", "S"):
            electrons += 2  # lone pair enters the ring system
        elif not exo_doubles:
            return None  # saturated carbon breaks conjugation
        elif any(j in ring_atoms for j in exo_doubles):
            electrons += 1  # double bond shared with a fused ring
    return electrons


def _is_aromatic_ring(g: MolGraph, cycle: tuple, ring_atoms: set[int]) -> bool:
    if len(cycle) not in (5, 6):
        return False
    electrons = _ring_pi_electrons(g, cycle, ring_atoms)
    return electrons is not None and electrons == 6  # 4n+2 with n=1


def _chi_deltas(g: MolGraph):
    adj = _heavy_adj(g)
    delta = {i: len(adj[i]) for i in adj}
    delta_v = {
        i: ELEMENTS[g.elements[i]].valence_electrons - g.h_neighbor_count(i)
        for i in adj
    }
    return adj, delta, delta_v


def _paths_of_length(adj: dict[int, list[int]], k: int):
    """Simple paths with k edges, each undirected path yielded once."""
    out = []

    def extend(path: list[int]):
        if len(path) == k + 1:
            if path[0] < path[-1]:
                out.append(tuple(path))
            return
        for w in adj[path[-1]]:
            if w not in path:
                path.append(w)
                extend(path)
                path.pop()

    for s in adj:
        extend([s])
    return out


def descriptors(g: MolGraph) -> dict[str, float]:
    """Per-molecule descriptor values (internal_similarity is set-level and
    computed by descriptor_samples)."""
    if not is_connected(g):
        raise NotConnected("descriptors need a connected molecule")
    cs = min_cycle_basis(g)
    _, simple_bridges = bridges(g)
    heavy = _heavy_indices(g)
    ring3_nodes = {
        v for cyc in cs.cycles if len(cyc) == 3 for e in cyc for v in e
    }

    mw = sum(ELEMENTS[s].atomic_mass for s in g.elements)
    exact = sum(ELEMENTS[s].monoisotopic_mass for s in g.elements)
    valence_electrons = sum(ELEMENTS[s].valence_electrons for s in g.elements)
    nhoh = sum(
        g.h_neighbor_count(i) for i in heavy if g.elements[i] in ("N", "O")
    )
    no_count = sum(1 for i in heavy if g.elements[i] in ("N", "O"))
    carbons = [i for i in heavy if g.elements[i] == "C"]
    sp3 = [
        i for i in carbons if all(m == 1 for m in g.adjacency[i].values())
    ]
    donors = sum(
        1
        for i in heavy
        if g.elements[i] in ("N", "O") and g.h_neighbor_count(i) > 0
    )

    heavy_set = set(heavy)
    heavy_degree = {
        i: sum(1 for j in g.adjacency[i] if j in heavy_set) for i in heavy
    }
    rotatable = 0
    for a, b, m in g.bonds:
        if m != 1 or g.elements[a] == "H" or g.elements[b] == "H":
            continue
        if (min(a, b), max(a, b)) not in simple_bridges:
            continue  # ring bonds cannot rotate
        if heavy_degree[a] >= 2 and heavy_degree[b] >= 2:
            rotatable += 1

    ring_atoms = {i for i in range(g.n) if cs.per_node_membership[i]}
    aromatic = sum(
        1 for cyc in cs.cycles if _is_aromatic_ring(g, cyc, ring_atoms)
    )
    saturated = sum(
        1
        for cyc in cs.cycles
        if all(g.multiplicity(a, b) == 1 for a, b in cyc)
    )

    adj, delta, delta_v = _chi_deltas(g)
    chi0 = sum(1.0 / math.sqrt(delta[i]) for i in adj if delta[i] > 0)
    chi1 = sum(
        1.0 / math.sqrt(delta[a] * delta[b])
        for a, b, _ in g.bonds
        if a in heavy_set and b in heavy_set
    )
    chi0n = sum(1.0 / math.sqrt(delta_v[i]) for i in adj if delta_v[i] > 0)

    def chi_path(k: int) -> float:
        total = 0.0
        for path in _paths_of_length(adj, k):
            prod = 1.0
            ok = True
            for v in path:
                if delta_v[v] <= 0:
                    ok = False
                    break
                prod *= delta_v[v]
            if ok:
                total += 1.0 / math.sqrt(prod)
        return total

    return {
        "molecular_weight": mw,
        "exact_molecular_weight": exact,
        "heavy_atom_count": float(len(heavy)),
        "valence_electron_count": float(valence_electrons),
        "nhoh_count": float(nhoh),
        "no_count": float(no_count),
        "fraction_csp3": len(sp3) / len(carbons) if carbons else 0.0,
        "balaban_j": _balaban_j(g),
        "h_bond_donors": float(donors),
        "h_bond_acceptors": float(no_count),
        "rotatable_bonds": float(rotatable),
        "tpsa": _tpsa(g, ring3_nodes),
        "aromatic_rings": float(aromatic),
        "aliphatic_rings": float(len(cs.cycles) - aromatic),
        "ring_count": float(len(cs.cycles)),
        "saturated_rings": float(saturated),
        "chi0": chi0,
        "chi1": chi1,
        "chi0n": chi0n,
        "chi2n": chi_path(2),
        "chi3n": chi_path(3),
    }


def internal_similarity(mols: list[MolGraph]) -> list[float]:
    """Per molecule: highest fingerprint similarity to any other molecule."""
    fps = [fingerprint(g) for g in mols]
    out = []
    for i, fp in enumerate(fps):
        best = 0.0
        for j, other in enumerate(fps):
            if i != j:
                best = max(best, tanimoto(fp, other))
        out.append(best)
    return out


def descriptor_samples(mols: list[MolGraph]) -> dict[str, list[float]]:
    """Full battery over a molecule set, one value per molecule for each of
    the 22 descriptor ids."""
    rows = [descriptors(g) for g in mols]
    out = {key: [r[key] for r in rows] for key in rows[0]} if rows else {
        key: [] for key in DESCRIPTOR_IDS if key != "internal_similarity"
    }
    out["internal_similarity"] = internal_similarity(mols) if len(mols) > 1 else [
        0.0 for _ in mols
    ]
    return out
