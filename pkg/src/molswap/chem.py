"""Molecular multigraph core.

Atoms are fixed-valence elements, bonds carry a multiplicity in {1,2,3}, and
hydrogens are explicit. Every valid molecule is exactly valence-saturated,
which is what makes the double-edge-swap chain degree-preserving.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property

from .errors import (
    NotConnected,
    SmilesSyntaxError,
    UnsupportedFeature,
    ValenceError,
)


@dataclass(frozen=True)
class Element:
    symbol: str
    atomic_number: int
    standard_valence: int
    atomic_mass: float
    monoisotopic_mass: float
    valence_electrons: int


ELEMENTS: dict[str, Element] = {
    e.symbol: e
    for e in [
        Element("H", 1, 1, 1.008, 1.007825, 1),
        Element("B", 5, 3, 10.811, 11.009305, 3),
        Element("C", 6, 4, 12.011, 12.000000, 4),
        Element("N", 7, 3, 14.007, 14.003074, 5),
        Element("O", 8, 2, 15.999, 15.994915, 6),
        Element("F", 9, 1, 18.998, 18.998403, 7),
        Element("Na", 11, 1, 22.990, 22.989770, 1),
        Element("Mg", 12, 2, 24.305, 23.985042, 2),
        Element("P", 15, 3, 30.974, 30.973762, 5),
        Element("S", 16, 2, 32.065, 31.972071, 6),
        Element("Cl", 17, 1, 35.453, 34.968853, 7),
        Element("K", 19, 1, 39.098, 38.963707, 1),
        Element("Ca", 20, 2, 40.078, 39.962591, 2),
        Element("Br", 35, 1, 79.904, 78.918338, 7),
        Element("I", 53, 1, 126.904, 126.904473, 7),
    ]
}

# Atoms writable without brackets; two-letter symbols first for tokenizing.
ORGANIC_SYMBOLS = ("Cl", "Br", "B", "C", "N", "O", "F", "P", "S", "I")
BRACKET_SYMBOLS = ("Na", "K", "Ca", "Mg", "H")

_AROMATIC_CHARS = set("bcnops")
_BOND_CHAR = {"-": 1, "=": 2, "#": 3}
_BOND_SYMBOL = {1: "", 2: "=", 3: "#"}


def valence_of(symbol: str) -> int:
    return ELEMENTS[symbol].standard_valence


@dataclass(frozen=True)
class MolGraph:
    """Immutable labeled multigraph of atoms and bonds.

    ``bonds`` holds one record per bonded unordered pair, ``(a, b, mult)``
    with a < b, sorted; parallel edges are expressed through ``mult``.
    """

    elements: tuple[str, ...]
    bonds: tuple[tuple[int, int, int], ...]
    provenance: str | None = field(default=None, compare=False)

    @staticmethod
    def create(
        elements: list[str] | tuple[str, ...],
        bonds,
        provenance: str | None = None,
    ) -> "MolGraph":
        """Normalize and validate raw atom/bond data into a MolGraph."""
        elements = tuple(elements)
        for sym in elements:
            if sym not in ELEMENTS:
                raise UnsupportedFeature(f"unsupported element {sym!r}")
        n = len(elements)
        merged: dict[tuple[int, int], int] = {}
        for a, b, m in bonds:
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"bond ({a},{b}) references missing atom")
            if a == b:
                raise ValueError(f"self-loop on atom {a}")
            key = (a, b) if a < b else (b, a)
            merged[key] = merged.get(key, 0) + m
        for (a, b), m in merged.items():
            if not 1 <= m <= 3:
                raise ValueError(f"bond ({a},{b}) multiplicity {m} outside 1..3")
        return MolGraph(
            elements,
            tuple(sorted((a, b, m) for (a, b), m in merged.items())),
            provenance,
        )

    @property
    def n(self) -> int:
        return len(self.elements)

    @cached_property
    def adjacency(self) -> tuple[dict[int, int], ...]:
        """Per-atom map neighbor -> bond multiplicity."""
        adj: list[dict[int, int]] = [dict() for _ in range(self.n)]
        for a, b, m in self.bonds:
            adj[a][b] = m
            adj[b][a] = m
        return tuple(adj)

    @cached_property
    def bond_count(self) -> int:
        """Total bond multiplicity (multigraph edge count)."""
        return sum(m for _, _, m in self.bonds)

    def degree(self, i: int) -> int:
        return sum(self.adjacency[i].values())

    def multiplicity(self, a: int, b: int) -> int:
        return self.adjacency[a].get(b, 0)

    def neighbors(self, i: int):
        return self.adjacency[i].keys()

    def h_neighbor_count(self, i: int) -> int:
        return sum(
            m for j, m in self.adjacency[i].items() if self.elements[j] == "H"
        )

    def heavy_neighbor_count(self, i: int) -> int:
        return sum(1 for j in self.adjacency[i] if self.elements[j] != "H")

    @cached_property
    def degree_sequence(self) -> tuple[int, ...]:
        return tuple(sorted(self.degree(i) for i in range(self.n)))

    def is_saturated(self) -> bool:
        return all(
            self.degree(i) == valence_of(self.elements[i]) for i in range(self.n)
        )

    def check_saturated(self) -> None:
        for i in range(self.n):
            want = valence_of(self.elements[i])
            have = self.degree(i)
            if have != want:
                raise ValenceError(
                    f"atom {i} ({self.elements[i]}) has degree {have},"
                    f" expected {want}"
                )

    def __getstate__(self):
        return (self.elements, self.bonds, self.provenance)

    def __setstate__(self, state):
        object.__setattr__(self, "elements", state[0])
        object.__setattr__(self, "bonds", state[1])
        object.__setattr__(self, "provenance", state[2])


@dataclass(frozen=True)
class CanonicalSignature:
    """Exact identifier of a MolGraph's element-labeled isomorphism class."""

    text: str


@dataclass(frozen=True)
class MolFormula:
    counts: tuple[tuple[str, int], ...]

    @staticmethod
    def create(counts: dict[str, int]) -> "MolFormula":
        for sym, c in counts.items():
            if sym not in ELEMENTS:
                raise UnsupportedFeature(f"unsupported element {sym!r}")
            if c < 0:
                raise ValueError("negative element count")
        cleaned = {s: c for s, c in counts.items() if c > 0}
        if sum(cleaned.values()) < 2:
            raise ValueError("formula needs at least 2 atoms")
        return MolFormula(tuple(sorted(cleaned.items())))

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)

    @property
    def atom_count(self) -> int:
        return sum(c for _, c in self.counts)

    def text(self) -> str:
        """Hill-order style formula string (C, H, then alphabetical)."""
        d = self.as_dict()
        parts = []
        for sym in ["C", "H"] + sorted(k for k in d if k not in ("C", "H")):
            if sym in d:
                parts.append(sym + (str(d[sym]) if d[sym] > 1 else ""))
        return "".join(parts)

    @staticmethod
    def parse(text: str) -> "MolFormula":
        counts: dict[str, int] = {}
        i = 0
        while i < len(text):
            if not text[i].isalpha() or not text[i].isupper():
                raise ValueError(f"bad formula {text!r}")
            sym = text[i]
            i += 1
            if i < len(text) and text[i].islower():
                sym += text[i]
                i += 1
            num = 0
            while i < len(text) and text[i].isdigit():
                num = num * 10 + int(text[i])
                i += 1
            counts[sym] = counts.get(sym, 0) + max(num, 1)
        return MolFormula.create(counts)


def formula_of(g: MolGraph) -> MolFormula:
    counts: dict[str, int] = {}
    for sym in g.elements:
        counts[sym] = counts.get(sym, 0) + 1
    return MolFormula.create(counts)


# ---------------------------------------------------------------------------
# SMILES subset parsing
# ---------------------------------------------------------------------------

def _tokenize(text: str):
    """Yield (kind, value, position) for the subset grammar."""
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            end = text.find("]", i)
            if end < 0:
                raise SmilesSyntaxError("unterminated bracket atom", i)
            content = text[i + 1 : end]
            _check_bracket(content, i)
            yield ("atom", content, i)
            i = end + 1
        elif text[i : i + 2] in ("Cl", "Br"):
            yield ("atom", text[i : i + 2], i)
            i += 2
        elif ch in "BCNOFPSI":
            yield ("atom", ch, i)
            i += 1
        elif ch in _AROMATIC_CHARS:
            raise UnsupportedFeature(
                f"aromatic atom {ch!r} at position {i}: input must be kekulized"
            )
        elif ch in "-=#":
            yield ("bond", _BOND_CHAR[ch], i)
            i += 1
        elif ch == "(":
            yield ("open", None, i)
            i += 1
        elif ch == ")":
            yield ("close", None, i)
            i += 1
        elif ch.isdigit():
            yield ("ring", int(ch), i)
            i += 1
        elif ch == "%":
            if i + 2 >= n or not text[i + 1 : i + 3].isdigit():
                raise SmilesSyntaxError("'%' needs two digits", i)
            yield ("ring", int(text[i + 1 : i + 3]), i)
            i += 3
        elif ch == ".":
            raise UnsupportedFeature(
                f"dot at position {i}: disconnected inputs are rejected"
            )
        elif ch in "@/\\":
            raise UnsupportedFeature(
                f"stereochemistry mark {ch!r} at position {i} is not supported"
            )
        elif ch in "+":
            raise UnsupportedFeature(
                f"charge mark at position {i} is not supported"
            )
        else:
            raise SmilesSyntaxError(f"unexpected character {ch!r}", i)


def _check_bracket(content: str, pos: int) -> None:
    if content in BRACKET_SYMBOLS:
        return
    if any(c.isdigit() for c in content[:1]):
        raise UnsupportedFeature(f"isotope in bracket atom at position {pos}")
    if "+" in content or "-" in content:
        raise UnsupportedFeature(f"charge in bracket atom at position {pos}")
    if "@" in content:
        raise UnsupportedFeature(f"stereochemistry in bracket atom at position {pos}")
    if len(content) > 1 and content[1] == "H" or content.endswith(tuple("0123456789")):
        raise UnsupportedFeature(
            f"explicit hydrogen count in bracket atom at position {pos}"
        )
    raise UnsupportedFeature(
        f"bracket atom [{content}] at position {pos}: only {BRACKET_SYMBOLS} allowed"
    )


def parse_smiles(text: str, provenance: str | None = None) -> MolGraph:
    """Parse subset SMILES into a valence-saturated explicit-hydrogen graph.

    Grammar: organic atoms C N O B F P S Cl Br I, bracket atoms
    [Na] [K] [Ca] [Mg] [H], bonds - = # (single default), branches, ring
    closures (digit or %dd). Aromatic, charge, stereo, isotope and dot
    notation raise UnsupportedFeature.
    """
    text = text.strip()
    if not text:
        raise SmilesSyntaxError("empty input", 0)

    elements: list[str] = []
    bonds: list[tuple[int, int, int]] = []
    bonded_pairs: set[tuple[int, int]] = set()
    prev: int | None = None
    pending_bond: int | None = None
    pending_pos = 0
    branch_stack: list[int] = []
    open_rings: dict[int, tuple[int, int | None, int]] = {}  # num -> (atom, bond, pos)

    def add_bond(a: int, b: int, mult: int, pos: int) -> None:
        key = (a, b) if a < b else (b, a)
        if a == b:
            raise SmilesSyntaxError("ring closure forms a self-loop", pos)
        if key in bonded_pairs:
            raise SmilesSyntaxError(
                "duplicate bond between the same atom pair", pos
            )
        bonded_pairs.add(key)
        bonds.append((key[0], key[1], mult))

    for kind, value, pos in _tokenize(text):
        if kind == "atom":
            idx = len(elements)
            elements.append(value)
            if prev is not None:
                add_bond(prev, idx, pending_bond or 1, pos)
            elif pending_bond is not None:
                raise SmilesSyntaxError("bond with no preceding atom", pending_pos)
            pending_bond = None
            prev = idx
        elif kind == "bond":
            if pending_bond is not None:
                raise SmilesSyntaxError("two bond symbols in a row", pos)
            if prev is None:
                raise SmilesSyntaxError("bond with no preceding atom", pos)
            pending_bond = value
            pending_pos = pos
        elif kind == "open":
            if prev is None:
                raise SmilesSyntaxError("branch with no preceding atom", pos)
            if pending_bond is not None:
                raise SmilesSyntaxError("dangling bond before branch", pos)
            branch_stack.append(prev)
        elif kind == "close":
            if not branch_stack:
                raise SmilesSyntaxError("unmatched ')'", pos)
            if pending_bond is not None:
                raise SmilesSyntaxError("dangling bond before ')'", pos)
            prev = branch_stack.pop()
        elif kind == "ring":
            if prev is None:
                raise SmilesSyntaxError("ring closure with no preceding atom", pos)
            if value in open_rings:
                other, other_bond, other_pos = open_rings.pop(value)
                mult = pending_bond if pending_bond is not None else other_bond
                if (
                    pending_bond is not None
                    and other_bond is not None
                    and pending_bond != other_bond
                ):
                    raise SmilesSyntaxError(
                        f"conflicting bond orders for ring closure {value}", pos
                    )
                add_bond(other, prev, mult or 1, pos)
            else:
                open_rings[value] = (prev, pending_bond, pos)
            pending_bond = None

    if branch_stack:
        raise SmilesSyntaxError("unmatched '('", len(text))
    if pending_bond is not None:
        raise SmilesSyntaxError("dangling bond at end of input", pending_pos)
    if open_rings:
        num, (_, _, pos) = next(iter(open_rings.items()))
        raise SmilesSyntaxError(f"unclosed ring closure {num}", pos)

    # Expand implicit hydrogens so every atom is exactly valence-saturated.
    explicit_degree = [0] * len(elements)
    for a, b, m in bonds:
        explicit_degree[a] += m
        explicit_degree[b] += m
    full_elements = list(elements)
    full_bonds = list(bonds)
    for i, sym in enumerate(elements):
        missing = valence_of(sym) - explicit_degree[i]
        if missing < 0:
            raise ValenceError(
                f"atom {i} ({sym}) has explicit bond order {explicit_degree[i]}"
                f" exceeding standard valence {valence_of(sym)}"
            )
        for _ in range(missing):
            h = len(full_elements)
            full_elements.append("H")
            full_bonds.append((i, h, 1))

    g = MolGraph.create(full_elements, full_bonds, provenance)
    if len(g.elements) < 2:
        raise ValenceError("a molecule needs at least two atoms")
    g.check_saturated()
    return g


# ---------------------------------------------------------------------------
# Canonical labeling (refinement + backtracking on the heavy skeleton)
# ---------------------------------------------------------------------------

def _heavy_initial_colors(g: MolGraph, heavy: list[int]) -> dict[int, int]:
    keys = {}
    hset = set(heavy)
    for i in heavy:
        heavy_mults = tuple(
            sorted(m for j, m in g.adjacency[i].items() if j in hset)
        )
        keys[i] = (
            g.elements[i],
            g.degree(i),
            heavy_mults,
            g.h_neighbor_count(i),
        )
    return _rank(keys)


def _rank(keys: dict[int, object]) -> dict[int, int]:
    """Dense ranks of key tuples under natural ordering.

    Keys within one call are structurally homogeneous tuples, so Python's
    tuple comparison applies. Natural order makes iterated refinement
    monotone (a stable partition keeps stable ranks), which is what
    guarantees termination.
    """
    order = sorted(set(keys.values()))
    pos = {k: r for r, k in enumerate(order)}
    return {i: pos[k] for i, k in keys.items()}


def _refine(g: MolGraph, heavy: list[int], colors: dict[int, int]) -> dict[int, int]:
    hset = set(heavy)
    while True:
        keys = {
            i: (
                colors[i],
                tuple(
                    sorted(
                        (colors[j], m)
                        for j, m in g.adjacency[i].items()
                        if j in hset
                    )
                ),
            )
            for i in heavy
        }
        new = _rank(keys)
        if new == colors:
            return colors
        colors = new


def _code_for(g: MolGraph, heavy_order: list[int]) -> tuple:
    pos = {atom: p for p, atom in enumerate(heavy_order)}
    hset = set(heavy_order)
    elems = tuple(g.elements[i] for i in heavy_order)
    hcounts = tuple(g.h_neighbor_count(i) for i in heavy_order)
    edges = tuple(
        sorted(
            (min(pos[a], pos[b]), max(pos[a], pos[b]), m)
            for a, b, m in g.bonds
            if a in hset and b in hset
        )
    )
    return (elems, hcounts, edges)


def _search_canonical(g: MolGraph, heavy: list[int]) -> list[int]:
    """Backtrack over refinement ties; return the heavy order whose code is
    lexicographically least.

    Automorphism pruning keeps symmetric molecules tractable: whenever two
    leaves produce the same code, the permutation between their orders is a
    graph automorphism, and siblings in a known orbit of an already-explored
    atom cannot yield a new code.
    """
    best: list = [None, None]  # [code, order]
    orbit_parent: dict[int, int] = {i: i for i in heavy}

    def find(i: int) -> int:
        while orbit_parent[i] != i:
            orbit_parent[i] = orbit_parent[orbit_parent[i]]
            i = orbit_parent[i]
        return i

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            orbit_parent[ra] = rb

    def recurse(colors: dict[int, int]) -> None:
        cells: dict[int, list[int]] = {}
        for i in heavy:
            cells.setdefault(colors[i], []).append(i)
        split = None
        for c in sorted(cells):
            if len(cells[c]) > 1:
                split = cells[c]
                break
        if split is None:
            order = sorted(heavy, key=lambda i: colors[i])
            code = _code_for(g, order)
            if best[0] is None or code < best[0]:
                best[0], best[1] = code, order
            elif code == best[0]:
                # two orders with equal codes differ by an automorphism
                for a, b in zip(best[1], order):
                    union(a, b)
            return
        tried: list[int] = []
        for atom in split:
            if any(find(atom) == find(t) for t in tried):
                continue  # orbit-equivalent to an explored sibling
            tried.append(atom)
            branched = dict(colors)
            branched[atom] = -1  # individualize below every existing color
            recurse(_refine(g, heavy, _rank({i: (branched[i],) for i in heavy})))

    recurse(_refine(g, heavy, _heavy_initial_colors(g, heavy)))
    return best[1]


def _is_leaf_h(g: MolGraph, i: int) -> bool:
    """Hydrogen hanging off a non-H atom by a single bond.

    Leaf hydrogens on one atom are interchangeable, so the canonical search
    only has to backtrack over the remaining skeleton.
    """
    if g.elements[i] != "H":
        return False
    adj = g.adjacency[i]
    if len(adj) != 1:
        return False
    (j, m), = adj.items()
    return m == 1 and g.elements[j] != "H"


def canonical_order(g: MolGraph) -> tuple[int, ...]:
    """Permutation-invariant atom order: canonical skeleton order with each
    atom's leaf hydrogens inserted right after it."""
    heavy = [i for i in range(g.n) if not _is_leaf_h(g, i)]
    heavy_order = _search_canonical(g, heavy)
    order: list[int] = []
    for atom in heavy_order:
        order.append(atom)
        order.extend(
            sorted(j for j in g.adjacency[atom] if _is_leaf_h(g, j))
        )
    return tuple(order)


def relabel(g: MolGraph, order: tuple[int, ...]) -> MolGraph:
    """Return the graph with atom ``order[k]`` renamed to ``k``."""
    pos = {atom: k for k, atom in enumerate(order)}
    return MolGraph.create(
        [g.elements[a] for a in order],
        [(pos[a], pos[b], m) for a, b, m in g.bonds],
        g.provenance,
    )


def canonical_signature(g: MolGraph) -> CanonicalSignature:
    gc = relabel(g, canonical_order(g))
    atoms = ",".join(gc.elements)
    edges = ";".join(f"{a}-{b}:{m}" for a, b, m in gc.bonds)
    return CanonicalSignature(f"{atoms}|{edges}")


def signature_seed(g: MolGraph) -> int:
    """Stable 63-bit seed derived from the canonical signature."""
    digest = hashlib.blake2b(
        canonical_signature(g).text.encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") >> 1


def stable_atom_classes(g: MolGraph) -> dict[int, int]:
    """Refinement color per atom, invariant under relabeling.

    Atoms in the same class are indistinguishable by iterated neighborhood
    refinement (automorphic atoms always share a class). Leaf hydrogens are
    classed by their parent's color.
    """
    heavy = [i for i in range(g.n) if not _is_leaf_h(g, i)]
    colors = _refine(g, heavy, _heavy_initial_colors(g, heavy))
    keys: dict[int, object] = {}
    for i in range(g.n):
        if i in colors:
            keys[i] = ("skeleton", colors[i])
        else:
            (parent,) = g.adjacency[i].keys()
            keys[i] = ("leaf-h", colors[parent])
    return _rank(keys)


# ---------------------------------------------------------------------------
# SMILES writing
# ---------------------------------------------------------------------------

def _is_connected_simple(g: MolGraph) -> bool:
    if g.n == 0:
        return False
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in g.adjacency[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.n


def write_smiles(g: MolGraph) -> str:
    """Emit subset SMILES in canonical atom order; hydrogens re-implicitized.

    parse_smiles(write_smiles(g)) is isomorphic to g for any valid connected
    molecule.
    """
    if not _is_connected_simple(g):
        raise NotConnected("cannot write a disconnected molecule")
    heavy = [i for i in range(g.n) if g.elements[i] != "H"]
    if not heavy:
        return "[H][H]"

    gc = relabel(g, canonical_order(g))
    heavy_c = [i for i in range(gc.n) if gc.elements[i] != "H"]
    hset = set(heavy_c)
    adj = {
        i: sorted(j for j in gc.adjacency[i] if j in hset) for i in heavy_c
    }

    # Assign ring-closure digits to the non-tree edges of a canonical DFS.
    visited: set[int] = set()
    tree_children: dict[int, list[int]] = {i: [] for i in heavy_c}
    ring_bonds: list[tuple[int, int]] = []
    seen_edges: set[tuple[int, int]] = set()

    def dfs(v: int) -> None:
        visited.add(v)
        for w in adj[v]:
            edge = (min(v, w), max(v, w))
            if edge in seen_edges:
                continue
            seen_edges.add(edge)
            if w in visited:
                ring_bonds.append((v, w))
            else:
                tree_children[v].append(w)
                dfs(w)

    root = heavy_c[0]
    dfs(root)

    ring_num: dict[tuple[int, int], int] = {}
    ring_at: dict[int, list[tuple[int, int]]] = {}
    for k, (v, w) in enumerate(ring_bonds):
        num = k + 1
        edge = (min(v, w), max(v, w))
        ring_num[edge] = num
        ring_at.setdefault(v, []).append(edge)
        ring_at.setdefault(w, []).append(edge)

    def ring_token(num: int) -> str:
        return str(num) if num < 10 else f"%{num:02d}"

    def atom_token(v: int) -> str:
        sym = gc.elements[v]
        return sym if sym in ORGANIC_SYMBOLS else f"[{sym}]"

    def emit(v: int) -> str:
        out = [atom_token(v)]
        for edge in ring_at.get(v, ()):
            a, b = edge
            out.append(_BOND_SYMBOL[gc.multiplicity(a, b)] + ring_token(ring_num[edge]))
        kids = tree_children[v]
        for idx, w in enumerate(kids):
            body = _BOND_SYMBOL[gc.multiplicity(v, w)] + emit(w)
            out.append(body if idx == len(kids) - 1 else f"({body})")
        return "".join(out)

    return emit(root)
