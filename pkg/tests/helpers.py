"""Brute-force oracles and shared fixtures.

Everything here is deliberately naive so it stays independent of the
implementations it checks.
"""

from __future__ import annotations

import itertools
import random
from collections import deque

from molswap.chem import MolGraph, parse_smiles


# Hand-written subset SMILES, all valence-exact under the fixed-valence model.
FIXTURE_SMILES = [
    "C",
    "CC",
    "CCO",
    "OCC",
    "COC",
    "C=C",
    "C#C",
    "CC(C)C",
    "CC(C)(C)C",
    "CCCCCC",
    "C1CC1",
    "C1CCC1",
    "C1CCCCC1",
    "C1=CCCCC1",
    "C1=CC=CC=C1",
    "CC1=CC=CC=C1",
    "OC1=CC=CC=C1",
    "NC1=CC=CC=C1",
    "O=CC1=CC=CC=C1",
    "C1=CC=CC=N1",
    "C1=CC=CN1",
    "C1=CC=CO1",
    "C1=CC=CS1",
    "C1CCNCC1",
    "O1CCNCC1",
    "C1CCCO1",
    "C1CO1",
    "C1CN1",
    "CC(=O)O",
    "CC(C)=O",
    "CC(N)=O",
    "CCOC(C)=O",
    "NC(N)=O",
    "CC#N",
    "N#CC1=CC=CC=C1",
    "CCN",
    "CN(C)C",
    "CCCl",
    "BrC1=CC=CC=C1",
    "FC(F)(F)C1=CC=CC=C1",
    "IC(I)I",
    "CS",
    "CSC",
    "CP(C)C",
    "CB(C)C",
    "[Na]O",
    "C[Mg]C",
    "OCCO",
    "OCC(O)CO",
    "CCOCC",
    "C=CC=C",
    "CC(=C)C=C",
    "OCC#C",
    "COC(C)(C)C",
    "C=CC1=CC=CC=C1",
    "[H][H]",
]


def fixture_molecules() -> list[MolGraph]:
    return [parse_smiles(s) for s in FIXTURE_SMILES]


def permuted(g: MolGraph, perm: list[int]) -> MolGraph:
    """Relabel so that new index perm[i] holds old atom i."""
    return MolGraph.create(
        [g.elements[perm.index(k)] for k in range(g.n)],
        [(perm[a], perm[b], m) for a, b, m in g.bonds],
    )


def random_permuted(g: MolGraph, rng: random.Random) -> MolGraph:
    perm = list(range(g.n))
    rng.shuffle(perm)
    return permuted(g, perm)


def simple_adj(g: MolGraph) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {i: set() for i in range(g.n)}
    for a, b, _ in g.bonds:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def oracle_connected(g: MolGraph) -> bool:
    if g.n == 0:
        return False
    adj = simple_adj(g)
    seen = {0}
    q = deque([0])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                q.append(w)
    return len(seen) == g.n


def oracle_bridges(g: MolGraph) -> set[tuple[int, int]]:
    """Bonded pairs whose whole-entity removal disconnects the graph."""
    out = set()
    for a, b, _ in g.bonds:
        elems = list(g.elements)
        rest = [(x, y, m) for x, y, m in g.bonds if (x, y) != (a, b)]
        adj: dict[int, set[int]] = {i: set() for i in range(g.n)}
        for x, y, _ in rest:
            adj[x].add(y)
            adj[y].add(x)
        seen = {0}
        q = deque([0])
        while q:
            v = q.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    q.append(w)
        if len(seen) != g.n:
            out.add((a, b))
    return out


def oracle_all_cycles(g: MolGraph, max_len: int = 20) -> set[frozenset[tuple[int, int]]]:
    """Every simple cycle of the simplified graph, as a frozenset of edges."""
    adj = simple_adj(g)
    cycles: set[frozenset[tuple[int, int]]] = set()

    def edge(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def walk(start: int, v: int, path: list[int], on_path: set[int]):
        for w in adj[v]:
            if w == start and len(path) >= 3:
                cycles.add(frozenset(edge(path[k], path[k + 1]) for k in range(len(path) - 1)) | {edge(v, start)})
            elif w not in on_path and w > start and len(path) < max_len:
                path.append(w)
                on_path.add(w)
                walk(start, w, path, on_path)
                on_path.remove(w)
                path.pop()

    for s in range(g.n):
        walk(s, s, [s], {s})
    return cycles


def oracle_min_cycle_basis_sizes(g: MolGraph) -> list[int]:
    """Sizes of a minimum cycle basis, via exhaustive cycle enumeration and
    greedy GF(2) selection."""
    edges = sorted((min(a, b), max(a, b)) for a, b, _ in g.bonds)
    eid = {e: k for k, e in enumerate(edges)}
    target = len(edges) - g.n + 1
    if target <= 0:
        return []
    cycles = sorted(oracle_all_cycles(g), key=lambda c: (len(c), sorted(c)))
    basis_masks: list[int] = []
    sizes: list[int] = []
    for cyc in cycles:
        mask = 0
        for e in cyc:
            mask ^= 1 << eid[e]
        m = mask
        for b in basis_masks:
            m = min(m, m ^ b)
        if m:
            basis_masks.append(mask)
            sizes.append(len(cyc))
            if len(sizes) == target:
                break
    return sorted(sizes)


def oracle_is_planar(g: MolGraph) -> bool:
    """Exhaustive rotation-system search; only viable for tiny graphs."""
    adj = {i: sorted(ns) for i, ns in simple_adj(g).items()}
    nodes = [i for i in range(g.n) if adj[i]]
    m = sum(len(adj[i]) for i in nodes) // 2
    n = len(nodes)
    if m == 0 or n == 0:
        return True

    rotation_choices = []
    for v in nodes:
        ns = adj[v]
        if len(ns) <= 2:
            rotation_choices.append([tuple(ns)])
        else:
            first = ns[0]
            rotation_choices.append(
                [(first,) + p for p in itertools.permutations(ns[1:])]
            )

    darts = [(v, w) for v in nodes for w in adj[v]]
    for rotations in itertools.product(*rotation_choices):
        rot = {v: list(r) for v, r in zip(nodes, rotations)}
        succ = {}
        for v in nodes:
            r = rot[v]
            for k, w in enumerate(r):
                # next dart after arriving (w -> v): rotate at v
                succ[(w, v)] = (v, r[(r.index(w) + 1) % len(r)])
        faces = 0
        seen = set()
        for d in darts:
            if d in seen:
                continue
            faces += 1
            cur = d
            while cur not in seen:
                seen.add(cur)
                cur = succ[cur]
        if faces == m - n + 2:
            return True
    return False


def oracle_edge_disjoint_paths(g: MolGraph, a: int, b: int) -> int:
    """Max number of pairwise edge-disjoint a-b paths in the simplified graph."""
    adj = simple_adj(g)

    def all_paths() -> list[frozenset[tuple[int, int]]]:
        out = []

        def walk(v, path_edges, on_path):
            if v == b:
                out.append(frozenset(path_edges))
                return
            for w in adj[v]:
                e = (min(v, w), max(v, w))
                if w not in on_path:
                    walk(w, path_edges + [e], on_path | {w})

        walk(a, [], {a})
        return out

    paths = all_paths()

    best = 0

    def search(idx: int, used: set, count: int):
        nonlocal best
        best = max(best, count)
        for k in range(idx, len(paths)):
            if not (paths[k] & used):
                search(k + 1, used | paths[k], count + 1)

    search(0, set(), 0)
    return best


def oracle_isomorphic(g1: MolGraph, g2: MolGraph) -> bool:
    """Exact isomorphism of element-labeled multigraphs by backtracking."""
    if g1.n != g2.n or len(g1.bonds) != len(g2.bonds):
        return False
    if sorted(g1.elements) != sorted(g2.elements):
        return False
    if g1.degree_sequence != g2.degree_sequence:
        return False

    def profile(g, i):
        return (g.elements[i], g.degree(i), tuple(sorted(g.adjacency[i].values())))

    cands = {
        i: [j for j in range(g2.n) if profile(g1, i) == profile(g2, j)]
        for i in range(g1.n)
    }
    order = sorted(range(g1.n), key=lambda i: len(cands[i]))
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(k: int) -> bool:
        if k == len(order):
            return True
        i = order[k]
        for j in cands[i]:
            if j in used:
                continue
            # multiplicities (including zero) must agree with every mapped atom
            if any(
                g1.multiplicity(i, u) != g2.multiplicity(j, v)
                for u, v in mapping.items()
            ):
                continue
            mapping[i] = j
            used.add(j)
            if extend(k + 1):
                return True
            del mapping[i]
            used.remove(j)
        return False

    return extend(0)


def raw_graph(elements: list[str], edges: list[tuple[int, int]]) -> MolGraph:
    """Plain test graph (not necessarily a valid molecule)."""
    return MolGraph.create(elements, [(a, b, 1) for a, b in edges])


def oracle_feasible_quads(g: MolGraph) -> list[tuple[int, int, int, int]]:
    """All ordered quadruples (i,j,k,l) passing the feasibility conditions."""
    out = []
    for i, j, k, l in itertools.product(range(g.n), repeat=4):
        if len({i, j, k, l}) != 4:
            continue
        if g.multiplicity(i, j) < 1 or g.multiplicity(k, l) < 1:
            continue
        if g.multiplicity(i, k) >= 3 or g.multiplicity(j, l) >= 3:
            continue
        mult = {(min(a, b), max(a, b)): m for a, b, m in g.bonds}
        for a, b in [(i, j), (k, l)]:
            mult[(min(a, b), max(a, b))] -= 1
        for a, b in [(i, k), (j, l)]:
            key = (min(a, b), max(a, b))
            mult[key] = mult.get(key, 0) + 1
        h = MolGraph.create(
            g.elements, [(a, b, m) for (a, b), m in mult.items() if m > 0]
        )
        if oracle_connected(h):
            out.append((i, j, k, l))
    return out
