"""Valence-preserving molecular graph generation by double-edge-swap diffusion."""

__version__ = "0.1.0"

from .chem import (
    ELEMENTS,
    CanonicalSignature,
    Element,
    MolFormula,
    MolGraph,
    canonical_signature,
    formula_of,
    parse_smiles,
    write_smiles,
)

__all__ = [
    "ELEMENTS",
    "CanonicalSignature",
    "Element",
    "MolFormula",
    "MolGraph",
    "canonical_signature",
    "formula_of",
    "parse_smiles",
    "write_smiles",
    "__version__",
]
