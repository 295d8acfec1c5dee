"""Pair pool for the molecular discrimination test.

Each generated molecule is joined to a real molecule with the same formula
(its seed original); the payload rendering carries heavy atoms with 2D
positions and per-atom hydrogen counts, and never any provenance."""

from __future__ import annotations

from dataclasses import dataclass

from ..chem import MolGraph, formula_of, parse_smiles
from ..errors import MolswapError
from ..io_utils import read_dataset_lines, stable_hash
from ..topo import layout_2d


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    formula: str
    real_smiles: str
    generated_smiles: str


def render_molecule(g: MolGraph) -> dict:
    """Payload half: heavy atoms with positions and hydrogen counts."""
    layout = layout_2d(g)
    heavy = [i for i in range(g.n) if g.elements[i] != "H"]
    pos = {a: k for k, a in enumerate(heavy)}
    atoms = [
        {
            "symbol": g.elements[a],
            "x": round(layout.positions[a][0], 4),
            "y": round(layout.positions[a][1], 4),
            "h_count": g.h_neighbor_count(a),
        }
        for a in heavy
    ]
    bonds = [
        {"a": pos[a], "b": pos[b], "multiplicity": m}
        for a, b, m in g.bonds
        if a in pos and b in pos
    ]
    return {"atoms": atoms, "bonds": bonds}


def build_pair_pool(
    real_mols: list[MolGraph], generated_mols: list[MolGraph]
) -> list[PairRecord]:
    """Round-robin join by formula; generated molecules without a matching
    real counterpart are dropped."""
    from ..chem import write_smiles

    by_formula: dict[str, list[MolGraph]] = {}
    for g in real_mols:
        by_formula.setdefault(formula_of(g).text(), []).append(g)
    cursor: dict[str, int] = {}
    pool: list[PairRecord] = []
    for g in generated_mols:
        formula = formula_of(g).text()
        reals = by_formula.get(formula)
        if not reals:
            continue
        k = cursor.get(formula, 0)
        real = reals[k % len(reals)]
        cursor[formula] = k + 1
        pool.append(
            PairRecord(
                pair_id=f"pair-{stable_hash(formula, len(pool)):016x}",
                formula=formula,
                real_smiles=write_smiles(real),
                generated_smiles=write_smiles(g),
            )
        )
    return pool


def load_pair_pool(real_path, generated_path) -> list[PairRecord]:
    def read(path):
        out = []
        for lineno, line in read_dataset_lines(path):
            try:
                out.append(parse_smiles(line, provenance=f"{path}:{lineno}"))
            except MolswapError:
                continue
        return out

    return build_pair_pool(read(real_path), read(generated_path))
