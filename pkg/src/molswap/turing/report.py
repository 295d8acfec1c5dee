"""Accuracy analysis of the response log with bootstrap confidence
intervals over participants, stratified by expertise and by structural
classes of the generated molecule of each pair."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np

from ..chem import parse_smiles
from ..descriptors import descriptors
from ..errors import EmptyLog
from ..io_utils import read_ldjson

BOOTSTRAP_ITERATIONS = 1_000


def _size_bucket(atoms: int) -> str:
    if atoms <= 20:
        return "small (<=20 atoms)"
    if atoms <= 40:
        return "medium (21-40 atoms)"
    return "large (41+ atoms)"


def _ring_class(ring_count: float) -> str:
    if ring_count == 0:
        return "acyclic"
    if ring_count == 1:
        return "monocyclic"
    return "polycyclic"


def _flexibility_bucket(rotatable: float) -> str:
    if rotatable <= 2:
        return "rigid (0-2 rotatable)"
    if rotatable <= 5:
        return "moderate (3-5 rotatable)"
    return "flexible (6+ rotatable)"


def _bond_character(g, desc) -> str:
    if desc["aromatic_rings"] >= 1:
        return "predominantly aromatic"
    unsaturations = sum(
        1
        for a, b, m in g.bonds
        if m >= 2 and g.elements[a] != "H" and g.elements[b] != "H"
    )
    if unsaturations >= 2:
        return "multiple unsaturations"
    return "predominantly aliphatic"


def _functional_groups(g, desc) -> list[str]:
    groups = []
    if any(
        g.elements[i] == "O" and g.h_neighbor_count(i) > 0 for i in range(g.n)
    ):
        groups.append("hydroxyl")
    if any(
        g.elements[i] == "N" and g.h_neighbor_count(i) > 0 for i in range(g.n)
    ):
        groups.append("amine")
    if any(
        m == 2 and {"C", "O"} == {g.elements[a], g.elements[b]}
        for a, b, m in g.bonds
    ):
        groups.append("carbonyl")
    if any(s in ("F", "Cl", "Br", "I") for s in g.elements):
        groups.append("halogen")
    return groups or ["none of the tracked groups"]


@lru_cache(maxsize=100_000)
def _classify(smiles: str) -> dict:
    g = parse_smiles(smiles)
    desc = descriptors(g)
    return {
        "size": _size_bucket(g.n),
        "ring_class": _ring_class(desc["ring_count"]),
        "bond_character": _bond_character(g, desc),
        "flexibility": _flexibility_bucket(desc["rotatable_bonds"]),
        "functional_groups": tuple(_functional_groups(g, desc)),
    }


def _bootstrap_ci(
    per_session: dict[str, tuple[int, int]],
    iterations: int,
    rng: np.random.Generator,
) -> tuple[float | None, float | None]:
    """95 percent interval of pooled accuracy under resampling participants."""
    sessions = sorted(per_session)
    counts = np.array([per_session[s][0] for s in sessions], dtype=float)
    corrects = np.array([per_session[s][1] for s in sessions], dtype=float)
    if not len(sessions):
        return None, None
    idx = rng.integers(0, len(sessions), size=(iterations, len(sessions)))
    totals = counts[idx].sum(axis=1)
    hits = corrects[idx].sum(axis=1)
    valid = totals > 0
    if not valid.any():
        return None, None
    acc = hits[valid] / totals[valid]
    return float(np.percentile(acc, 2.5)), float(np.percentile(acc, 97.5))


def _stratum_stats(rows, iterations, rng) -> dict:
    per_session: dict[str, tuple[int, int]] = {}
    for session_id, correct in rows:
        n, c = per_session.get(session_id, (0, 0))
        per_session[session_id] = (n + 1, c + int(correct))
    total = sum(n for n, _ in per_session.values())
    hits = sum(c for _, c in per_session.values())
    lo, hi = _bootstrap_ci(per_session, iterations, rng)
    return {
        "rounds": total,
        "participants": len(per_session),
        "accuracy": hits / total if total else None,
        "ci_low": lo,
        "ci_high": hi,
    }


def turing_report(
    log: str | Path | list[dict],
    bootstrap_iterations: int = BOOTSTRAP_ITERATIONS,
    seed: int = 0,
) -> dict:
    """Analysis document for a response log (path or already-read events)."""
    events = read_ldjson(log) if isinstance(log, (str, Path)) else list(log)
    sessions: dict[str, dict] = {}
    for event in events:
        if event["type"] == "session":
            sessions[event["session_id"]] = {
                "expertise": event["expertise"],
                "rounds": {
                    k + 1: r for k, r in enumerate(event["rounds"])
                },
                "answers": {},
            }
        elif event["type"] == "answer":
            sessions[event["session_id"]]["answers"][event["round"]] = event

    answered = []  # (session_id, expertise, round_info, correct)
    for session_id, s in sessions.items():
        for round_no, answer in s["answers"].items():
            info = s["rounds"][round_no]
            correct = answer["choice"] == info["real_position"]
            answered.append((session_id, s["expertise"], info, correct))
    if not answered:
        raise EmptyLog("no answered rounds in the log")

    rng = np.random.default_rng(seed)

    def stratify(key_fn) -> dict:
        strata: dict[str, list] = {}
        for session_id, expertise, info, correct in answered:
            for key in key_fn(session_id, expertise, info):
                strata.setdefault(key, []).append((session_id, correct))
        return {
            key: _stratum_stats(rows, bootstrap_iterations, rng)
            for key, rows in sorted(strata.items())
        }

    overall = _stratum_stats(
        [(sid, c) for sid, _, _, c in answered], bootstrap_iterations, rng
    )
    report = {
        "participants": len(sessions),
        "answered_rounds": len(answered),
        "bootstrap_iterations": bootstrap_iterations,
        "overall": overall,
        "by_expertise": stratify(lambda sid, e, info: [e]),
        "by_size": stratify(
            lambda sid, e, info: [
                _classify(info["generated_smiles"])["size"]
            ]
        ),
        "by_ring_class": stratify(
            lambda sid, e, info: [
                _classify(info["generated_smiles"])["ring_class"]
            ]
        ),
        "by_bond_character": stratify(
            lambda sid, e, info: [
                _classify(info["generated_smiles"])["bond_character"]
            ]
        ),
        "by_flexibility": stratify(
            lambda sid, e, info: [
                _classify(info["generated_smiles"])["flexibility"]
            ]
        ),
        "by_functional_group": stratify(
            lambda sid, e, info: list(
                _classify(info["generated_smiles"])["functional_groups"]
            )
        ),
    }
    return report
