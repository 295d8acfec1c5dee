"""Graph-algorithm services over molecular multigraphs.

All algorithms operate on the simplified graph (parallel multiplicity
collapsed to one edge) unless stated otherwise. Everything is a pure
function of the input graph.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .chem import MolGraph, signature_seed
from .errors import NotBonded, NotConnected


Edge = tuple[int, int]


def _edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


def _simple_adj(g: MolGraph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(g.n)]
    for a, b, _ in g.bonds:
        adj[a].append(b)
        adj[b].append(a)
    return adj


def is_connected(g: MolGraph) -> bool:
    if g.n == 0:
        return False
    adj = _simple_adj(g)
    seen = bytearray(g.n)
    seen[0] = 1
    stack = [0]
    count = 1
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = 1
                count += 1
                stack.append(w)
    return count == g.n


def connected_components(g: MolGraph) -> int:
    adj = _simple_adj(g)
    seen = bytearray(g.n)
    comps = 0
    for s in range(g.n):
        if seen[s]:
            continue
        comps += 1
        seen[s] = 1
        stack = [s]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = 1
                    stack.append(w)
    return comps


def _require_connected(g: MolGraph) -> None:
    if not is_connected(g):
        raise NotConnected("operation requires a connected graph")


def bridges(g: MolGraph) -> tuple[set[Edge], set[Edge]]:
    """(multigraph_bridges, simplified_bridges).

    simplified_bridges are the bridges of the collapsed simple graph, i.e.
    bonds whose whole-entity removal disconnects the molecule. A bond is a
    multigraph bridge only if removing a single multiplicity unit already
    disconnects, which restricts the set to multiplicity-1 bonds.
    """
    _require_connected(g)
    adj = _simple_adj(g)
    disc = [-1] * g.n
    low = [0] * g.n
    simplified: set[Edge] = set()
    timer = 0

    # iterative Tarjan; parent tracked per stack frame
    stack: list[tuple[int, int, int]] = [(0, -1, 0)]
    parent_edge_used: dict[int, int] = {}
    while stack:
        v, parent, idx = stack.pop()
        if idx == 0:
            disc[v] = low[v] = timer
            timer += 1
            parent_edge_used[v] = 0
        advanced = False
        while idx < len(adj[v]):
            w = adj[v][idx]
            idx += 1
            if w == parent and parent_edge_used[v] == 0:
                parent_edge_used[v] = 1
                continue
            if disc[w] == -1:
                stack.append((v, parent, idx))
                stack.append((w, v, 0))
                advanced = True
                break
            low[v] = min(low[v], disc[w])
        if not advanced and parent != -1:
            low[parent] = min(low[parent], low[v])
            if low[v] > disc[parent]:
                simplified.add(_edge(parent, v))

    multigraph = {
        _edge(a, b) for a, b, m in g.bonds if m == 1 and _edge(a, b) in simplified
    }
    return multigraph, simplified


@dataclass(frozen=True)
class CycleSet:
    """Minimum cycle basis of the simplified graph plus membership maps."""

    cycles: tuple[tuple[Edge, ...], ...]
    per_node_membership: dict[int, tuple[int, ...]]
    per_edge_membership: dict[Edge, tuple[int, ...]]

    def size_histogram(self) -> list[int]:
        """Counts for cycle sizes 3..14 plus a final 15+ bucket (13 slots)."""
        hist = [0] * 13
        for cyc in self.cycles:
            size = len(cyc)
            hist[min(size, 15) - 3] += 1
        return hist


def min_cycle_basis(g: MolGraph) -> CycleSet:
    """Horton-style minimum cycle basis: candidate cycles through shortest
    paths, greedy GF(2)-independent selection in length order."""
    _require_connected(g)
    adj = _simple_adj(g)
    edges = sorted(_edge(a, b) for a, b, _ in g.bonds)
    eid = {e: k for k, e in enumerate(edges)}
    nu = len(edges) - g.n + 1
    if nu <= 0:
        return CycleSet(
            (),
            {i: () for i in range(g.n)},
            {e: () for e in edges},
        )

    # BFS shortest-path trees from every vertex
    parent_all: list[list[int]] = []
    dist_all: list[list[int]] = []
    for s in range(g.n):
        parent = [-1] * g.n
        dist = [-1] * g.n
        dist[s] = 0
        q = deque([s])
        while q:
            v = q.popleft()
            for w in adj[v]:
                if dist[w] == -1:
                    dist[w] = dist[v] + 1
                    parent[w] = v
                    q.append(w)
        parent_all.append(parent)
        dist_all.append(dist)

    def path_edges(s: int, v: int) -> list[Edge] | None:
        out = []
        while v != s:
            p = parent_all[s][v]
            out.append(_edge(p, v))
            v = p
        return out

    candidates: dict[frozenset[Edge], tuple[Edge, ...]] = {}
    for s in range(g.n):
        for x, y in edges:
            if dist_all[s][x] < 0 or dist_all[s][y] < 0:
                continue
            px = path_edges(s, x)
            py = path_edges(s, y)
            cyc = set(px) ^ set(py)
            cyc.add(_edge(x, y))
            # valid Horton candidate: the symmetric difference is the cycle
            # itself only when the two paths share no edge and (x,y) is not
            # a tree edge of either path
            if _edge(x, y) in px or _edge(x, y) in py:
                continue
            if len(cyc) != len(px) + len(py) + 1:
                continue
            if not _is_simple_cycle(cyc):
                continue
            key = frozenset(cyc)
            if key not in candidates:
                candidates[key] = tuple(sorted(cyc))

    ordered = sorted(candidates.values(), key=lambda c: (len(c), c))
    basis: list[tuple[Edge, ...]] = []
    reduced: list[int] = []
    for cyc in ordered:
        mask = 0
        for e in cyc:
            mask ^= 1 << eid[e]
        m = mask
        for b in reduced:
            m = min(m, m ^ b)
        if m:
            reduced.append(m)
            basis.append(cyc)
            if len(basis) == nu:
                break

    node_sizes: dict[int, list[int]] = {i: [] for i in range(g.n)}
    edge_sizes: dict[Edge, list[int]] = {e: [] for e in edges}
    for cyc in basis:
        size = len(cyc)
        nodes = {v for e in cyc for v in e}
        for v in nodes:
            node_sizes[v].append(size)
        for e in cyc:
            edge_sizes[e].append(size)
    return CycleSet(
        tuple(basis),
        {i: tuple(sorted(s)) for i, s in node_sizes.items()},
        {e: tuple(sorted(s)) for e, s in edge_sizes.items()},
    )


def _is_simple_cycle(cyc: set[Edge]) -> bool:
    deg: Counter[int] = Counter()
    for a, b in cyc:
        deg[a] += 1
        deg[b] += 1
    if any(d != 2 for d in deg.values()):
        return False
    # single connected component over the cycle's own edges
    nodes = list(deg)
    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for a, b in cyc:
        adj[a].append(b)
        adj[b].append(a)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(nodes)


# ---------------------------------------------------------------------------
# Left-right planarity test
# ---------------------------------------------------------------------------

class _Interval:
    __slots__ = ("low", "high")

    def __init__(self, low=None, high=None):
        self.low = low
        self.high = high

    def empty(self) -> bool:
        return self.low is None and self.high is None

    def copy(self) -> "_Interval":
        return _Interval(self.low, self.high)


class _ConflictPair:
    __slots__ = ("L", "R")

    def __init__(self, left=None, right=None):
        self.L = left if left is not None else _Interval()
        self.R = right if right is not None else _Interval()

    def swap(self) -> None:
        self.L, self.R = self.R, self.L


class _LRPlanarity:
    """Brandes' left-right planarity test (boolean variant)."""

    def __init__(self, n: int, adj: list[list[int]]):
        self.n = n
        self.adj = adj
        self.height = [None] * n
        self.lowpt: dict[Edge2, int] = {}
        self.lowpt2: dict[Edge2, int] = {}
        self.nesting_depth: dict[Edge2, int] = {}
        self.parent_edge: list = [None] * n
        self.oriented: set[frozenset[int]] = set()
        self.ordered_adjs: list[list[int]] = [[] for _ in range(n)]
        self.ref: dict = {}
        self.S: list[_ConflictPair] = []
        self.stack_bottom: dict = {}
        self.lowpt_edge: dict = {}

    def run(self) -> bool:
        m = sum(len(a) for a in self.adj) // 2
        if self.n > 2 and m > 3 * self.n - 6:
            return False
        roots = []
        for s in range(self.n):
            if self.height[s] is None:
                self.height[s] = 0
                roots.append(s)
                self._dfs_orient(s)
        for v in range(self.n):
            self.ordered_adjs[v] = sorted(
                (w for w in self.adj[v] if (v, w) in self.nesting_depth),
                key=lambda w: self.nesting_depth[(v, w)],
            )
        for s in roots:
            if not self._dfs_test(s):
                return False
        return True

    def _dfs_orient(self, root: int) -> None:
        stack = [(root, iter(self.adj[root]))]
        while stack:
            v, it = stack[-1]
            e = self.parent_edge[v]
            advanced = False
            for w in it:
                pair = frozenset((v, w))
                if pair in self.oriented:
                    continue
                self.oriented.add(pair)
                vw = (v, w)
                self.lowpt[vw] = self.height[v]
                self.lowpt2[vw] = self.height[v]
                if self.height[w] is None:  # tree edge
                    self.parent_edge[w] = vw
                    self.height[w] = self.height[v] + 1
                    stack.append((w, iter(self.adj[w])))
                    advanced = True
                    break
                else:  # back edge
                    self.lowpt[vw] = self.height[w]
                    self._finish_edge(vw, e, v)
            if not advanced:
                stack.pop()
                if e is not None:
                    self._finish_edge(e, self.parent_edge[e[0]], e[0], tree=True)

    def _finish_edge(self, vw, e, v, tree=False) -> None:
        # nesting depth and lowpt propagation to the parent edge
        self.nesting_depth[vw] = 2 * self.lowpt[vw]
        if self.lowpt2[vw] < self.height[v]:  # chordal
            self.nesting_depth[vw] += 1
        if e is not None:
            if self.lowpt[vw] < self.lowpt[e]:
                self.lowpt2[e] = min(self.lowpt[e], self.lowpt2[vw])
                self.lowpt[e] = self.lowpt[vw]
            elif self.lowpt[vw] > self.lowpt[e]:
                self.lowpt2[e] = min(self.lowpt2[e], self.lowpt[vw])
            else:
                self.lowpt2[e] = min(self.lowpt2[e], self.lowpt2[vw])

    def _lowest(self, P: _ConflictPair) -> int:
        if P.L.empty():
            return self.lowpt[P.R.low]
        if P.R.empty():
            return self.lowpt[P.L.low]
        return min(self.lowpt[P.L.low], self.lowpt[P.R.low])

    def _top(self):
        return self.S[-1] if self.S else None

    def _dfs_test(self, root: int) -> bool:
        stack = [(root, 0, False)]
        while stack:
            v, idx, returning = stack.pop()
            e = self.parent_edge[v]
            kids = self.ordered_adjs[v]
            if returning:
                # just returned from tree-edge child kids[idx]
                ei = (v, kids[idx])
                if not self._after_child(v, e, ei, idx == 0):
                    return False
                idx += 1
            ok = True
            while idx < len(kids):
                w = kids[idx]
                ei = (v, w)
                self.stack_bottom[ei] = self._top()
                if ei == self.parent_edge[w]:  # tree edge
                    stack.append((v, idx, True))
                    stack.append((w, 0, False))
                    ok = False
                    break
                # back edge
                self.lowpt_edge[ei] = ei
                self.S.append(_ConflictPair(right=_Interval(ei, ei)))
                if not self._after_child(v, e, ei, idx == 0):
                    return False
                idx += 1
            if not ok:
                continue
            if e is not None:
                if not self._leave_vertex(v, e):
                    return False
        return True

    def _after_child(self, v, e, ei, is_first: bool) -> bool:
        if self.lowpt[ei] < self.height[v]:  # ei has a return edge
            if is_first:
                self.lowpt_edge[e] = self.lowpt_edge[ei]
            else:
                if not self._add_constraints(ei, e):
                    return False
        return True

    def _add_constraints(self, ei, e) -> bool:
        P = _ConflictPair()
        # merge return edges of ei into P.R
        while True:
            Q = self.S.pop()
            if not Q.L.empty():
                Q.swap()
            if not Q.L.empty():
                return False
            if self.lowpt[Q.R.low] > self.lowpt[e]:
                if P.R.empty():
                    P.R.high = Q.R.high
                else:
                    self.ref[P.R.low] = Q.R.high
                P.R.low = Q.R.low
            else:
                self.ref[Q.R.low] = self.lowpt_edge[e]
            if self._top() is self.stack_bottom[ei]:
                break
        # merge conflicting return edges of previous siblings into P.L
        while self._conflicting(self._top().L, ei) or self._conflicting(
            self._top().R, ei
        ):
            Q = self.S.pop()
            if self._conflicting(Q.R, ei):
                Q.swap()
            if self._conflicting(Q.R, ei):
                return False
            self.ref[P.R.low] = Q.R.high
            if Q.R.low is not None:
                P.R.low = Q.R.low
            if P.L.empty():
                P.L.high = Q.L.high
            else:
                self.ref[P.L.low] = Q.L.high
            P.L.low = Q.L.low
        if not (P.L.empty() and P.R.empty()):
            self.S.append(P)
        return True

    def _conflicting(self, I: _Interval, b) -> bool:
        return not I.empty() and self.lowpt[I.high] > self.lowpt[b]

    def _leave_vertex(self, v, e) -> bool:
        u = e[0]
        # trim back edges returning to the parent u
        while self.S and self._lowest(self.S[-1]) == self.height[u]:
            self.S.pop()
        if self.S:
            P = self.S.pop()
            while P.L.high is not None and P.L.high[1] == u:
                P.L.high = self.ref.get(P.L.high)
            if P.L.high is None and P.L.low is not None:
                self.ref[P.L.low] = P.R.low
                P.L.low = None
            while P.R.high is not None and P.R.high[1] == u:
                P.R.high = self.ref.get(P.R.high)
            if P.R.high is None and P.R.low is not None:
                self.ref[P.R.low] = P.L.low
                P.R.low = None
            self.S.append(P)
        if self.lowpt[e] < self.height[u]:  # e has a return edge
            top = self.S[-1]
            hl = top.L.high
            hr = top.R.high
            if hl is not None and (hr is None or self.lowpt[hl] > self.lowpt[hr]):
                self.ref[e] = hl
            else:
                self.ref[e] = hr
        return True


Edge2 = tuple[int, int]


def is_planar(g: MolGraph) -> bool:
    """Exact planarity of the simplified graph."""
    adj = _simple_adj(g)
    return _LRPlanarity(g.n, adj).run()


def local_edge_connectivity(g: MolGraph, a: int, b: int, cap: int = 8) -> int:
    """Edge-disjoint a-b paths in the simplified graph (capped max-flow)."""
    if g.multiplicity(a, b) == 0:
        raise NotBonded(f"atoms {a} and {b} are not bonded")
    # residual capacities: one unit per simplified edge per direction
    residual: dict[int, dict[int, int]] = {i: {} for i in range(g.n)}
    for x, y, _ in g.bonds:
        residual[x][y] = 1
        residual[y][x] = 1
    flow = 0
    while flow < cap:
        prev = {a: a}
        q = deque([a])
        while q and b not in prev:
            v = q.popleft()
            for w, c in residual[v].items():
                if c > 0 and w not in prev:
                    prev[w] = v
                    q.append(w)
        if b not in prev:
            break
        v = b
        while v != a:
            p = prev[v]
            residual[p][v] -= 1
            residual[v][p] = residual[v].get(p, 0) + 1
            v = p
        flow += 1
    return flow


@dataclass(frozen=True)
class Layout2D:
    """Deterministic 2D coordinates with median bond length 1."""

    positions: tuple[tuple[float, float], ...]

    def distance(self, a: int, b: int) -> float:
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return math.hypot(xa - xb, ya - yb)


def _fruchterman_reingold(
    n: int, edges: list[Edge], seed: int, iterations: int = 200
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1.0, 1.0, size=(n, 2))
    if n == 1:
        return pos
    k = 1.0 / math.sqrt(n)
    src = np.array([e[0] for e in edges], dtype=int)
    dst = np.array([e[1] for e in edges], dtype=int)
    t0 = 0.1
    for it in range(iterations):
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((delta**2).sum(axis=-1))
        np.fill_diagonal(dist, 1.0)
        dist = np.maximum(dist, 1e-9)
        # repulsion k^2/d between all pairs
        disp = (delta / dist[..., None] * (k * k / dist**2)[..., None]).sum(axis=1)
        if len(edges):
            # attraction d^2/k along bonds
            evec = pos[src] - pos[dst]
            edist = np.maximum(np.sqrt((evec**2).sum(axis=-1)), 1e-9)
            pull = evec / edist[:, None] * (edist**2 / k)[:, None]
            np.add.at(disp, src, -pull)
            np.add.at(disp, dst, pull)
        length = np.maximum(np.sqrt((disp**2).sum(axis=-1)), 1e-9)
        temp = t0 * (1.0 - it / iterations)
        pos += disp / length[:, None] * np.minimum(length, temp)[:, None]
    return pos


def layout_2d(g: MolGraph, iterations: int = 200) -> Layout2D:
    """Force-directed layout seeded from the canonical signature, rescaled so
    the median bond length is 1. Same graph (same atom order) in, bitwise
    identical coordinates out."""
    _require_connected(g)
    edges = [_edge(a, b) for a, b, _ in g.bonds]
    pos = _fruchterman_reingold(g.n, edges, signature_seed(g), iterations)
    lengths = sorted(
        math.hypot(pos[a][0] - pos[b][0], pos[a][1] - pos[b][1]) for a, b in edges
    )
    if lengths:
        median = lengths[len(lengths) // 2]
        if len(lengths) % 2 == 0:
            median = 0.5 * (lengths[len(lengths) // 2 - 1] + median)
        if median > 1e-12:
            pos = pos / median
    return Layout2D(tuple((float(x), float(y)) for x, y in pos))
