"""Distribution-matching evaluation: histogram KL score, Jensen-Shannon
distances, validity/uniqueness/novelty, and the full comparison report."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chem import MolGraph, canonical_signature, parse_smiles
from .descriptors import DESCRIPTOR_IDS, INTEGER_DESCRIPTORS, descriptor_samples
from .errors import EmptySample, MolswapError
from .topo import is_connected

SMOOTHING = 1e-10
REPORT_SCHEMA_VERSION = 1


def _shared_edges(
    p: np.ndarray, q: np.ndarray, integer_valued: bool, min_bins: int = 10
) -> np.ndarray:
    """Histogram edges over the pooled support: unit bins for integer-valued
    descriptors, Freedman-Diaconis width (with a 10-bin floor) otherwise."""
    pooled = np.concatenate([p, q])
    lo, hi = float(pooled.min()), float(pooled.max())
    if integer_valued:
        return np.arange(math.floor(lo) - 0.5, math.ceil(hi) + 1.5, 1.0)
    if hi == lo:
        return np.array([lo - 0.5, hi + 0.5])
    iqr = float(np.percentile(pooled, 75) - np.percentile(pooled, 25))
    width = 2.0 * iqr / len(pooled) ** (1.0 / 3.0)
    if width <= 0:
        nbins = min_bins
    else:
        nbins = max(min_bins, min(200, math.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, nbins + 1)


def _histogram_pair(p_vals, q_vals, integer_valued: bool):
    p_vals = np.asarray(p_vals, dtype=float)
    q_vals = np.asarray(q_vals, dtype=float)
    if p_vals.size == 0 or q_vals.size == 0:
        raise EmptySample("histogram comparison needs nonempty samples")
    edges = _shared_edges(p_vals, q_vals, integer_valued)
    p_hist, _ = np.histogram(p_vals, bins=edges)
    q_hist, _ = np.histogram(q_vals, bins=edges)
    p = p_hist / p_hist.sum()
    q = q_hist / q_hist.sum()
    return p, q, edges


def _smooth(p: np.ndarray) -> np.ndarray:
    p = p + SMOOTHING
    return p / p.sum()


def kl_divergence_hist(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats over aligned histograms, Laplace-smoothed."""
    p = _smooth(np.asarray(p, dtype=float))
    q = _smooth(np.asarray(q, dtype=float))
    return float(np.sum(p * np.log(p / q)))


def kl_divergence(reference, generated, integer_valued: bool = False) -> float:
    p, q, _ = _histogram_pair(reference, generated, integer_valued)
    return kl_divergence_hist(p, q)


def kl_score_from_divergences(kls) -> float:
    """Aggregate benchmark score: 100 x mean over descriptors of exp(-KL)."""
    kls = list(kls)
    if not kls:
        raise EmptySample("no divergences to aggregate")
    return 100.0 * float(np.mean([math.exp(-k) for k in kls]))


def kl_score(
    reference: dict[str, list[float]], generated: dict[str, list[float]]
) -> float:
    """reference/generated map descriptor id -> per-molecule values."""
    if not reference or not generated:
        raise EmptySample("descriptor samples are empty")
    kls = []
    for key in sorted(reference):
        if key not in generated:
            continue
        kls.append(
            kl_divergence(
                reference[key], generated[key], key in INTEGER_DESCRIPTORS
            )
        )
    return kl_score_from_divergences(kls)


def js_distance_hist(p: np.ndarray, q: np.ndarray) -> float:
    """sqrt of the Jensen-Shannon divergence with base-2 logarithm."""
    p = _smooth(np.asarray(p, dtype=float))
    q = _smooth(np.asarray(q, dtype=float))
    m = 0.5 * (p + q)
    div = 0.5 * np.sum(p * np.log2(p / m)) + 0.5 * np.sum(q * np.log2(q / m))
    return float(math.sqrt(max(div, 0.0)))


def js_distance(p_vals, q_vals, integer_valued: bool = False) -> float:
    p, q, _ = _histogram_pair(p_vals, q_vals, integer_valued)
    return js_distance_hist(p, q)


def vun_metrics(generated, training_signatures: set[str]) -> dict[str, float]:
    """Validity / uniqueness / novelty percentages.

    generated: SMILES strings or MolGraph values. Validity counts items that
    parse and pass the valence, connectivity and multiplicity audits.
    """
    items = list(generated)
    valid: list[MolGraph] = []
    for item in items:
        try:
            g = parse_smiles(item) if isinstance(item, str) else item
            g.check_saturated()
            if not is_connected(g):
                continue
            if any(m > 3 or m < 1 for _, _, m in g.bonds):
                continue
            valid.append(g)
        except MolswapError:
            continue
    validity = 100.0 * len(valid) / len(items) if items else 0.0
    sigs = [canonical_signature(g).text for g in valid]
    unique = set(sigs)
    uniqueness = 100.0 * len(unique) / len(sigs) if sigs else 0.0
    novel = unique - set(training_signatures)
    novelty = 100.0 * len(novel) / len(unique) if unique else 0.0
    return {"validity": validity, "uniqueness": uniqueness, "novelty": novelty}


@dataclass
class EvalReport:
    descriptors: dict[str, dict]
    aggregate: dict[str, float]
    sample_sizes: dict[str, int]
    binning: dict[str, str]
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "sample_sizes": self.sample_sizes,
            "binning": self.binning,
            "descriptors": self.descriptors,
            "aggregate": self.aggregate,
        }


def compare_report(
    reference: list[MolGraph],
    generated: list[MolGraph],
    training_signatures: set[str] | None = None,
    baseline: list[MolGraph] | None = None,
    plot_data: bool = False,
) -> EvalReport:
    """Per-descriptor histograms/KL/JS plus aggregate score and VUN metrics.

    With a baseline set, adds log2(js_baseline / js_generated) per
    descriptor (positive means the generated set matches better).
    """
    if not reference or not generated:
        raise EmptySample("reference and generated sets must be nonempty")
    ref_samples = descriptor_samples(reference)
    gen_samples = descriptor_samples(generated)
    base_samples = descriptor_samples(baseline) if baseline else None

    per_descriptor: dict[str, dict] = {}
    kls = []
    for key in DESCRIPTOR_IDS:
        integer_valued = key in INTEGER_DESCRIPTORS
        p, q, edges = _histogram_pair(
            ref_samples[key], gen_samples[key], integer_valued
        )
        kl = kl_divergence_hist(p, q)
        js = js_distance_hist(p, q)
        kls.append(kl)
        entry = {"kl": kl, "js_distance": js}
        if base_samples is not None:
            js_base = js_distance(
                ref_samples[key], base_samples[key], integer_valued
            )
            entry["js_baseline"] = js_base
            entry["log2_js_ratio"] = (
                math.log2(js_base / js) if js > 0 and js_base > 0 else 0.0
            )
        if plot_data:
            entry["histogram"] = {
                "edges": [float(x) for x in edges],
                "reference": [float(x) for x in p],
                "generated": [float(x) for x in q],
            }
        else:
            entry["histogram"] = {"bins": len(p)}
        per_descriptor[key] = entry

    aggregate = {"kl_score": kl_score_from_divergences(kls)}
    aggregate.update(vun_metrics(generated, training_signatures or set()))
    return EvalReport(
        descriptors=per_descriptor,
        aggregate=aggregate,
        sample_sizes={"reference": len(reference), "generated": len(generated)},
        binning={"continuous": "freedman-diaconis, floor 10 bins",
                 "integer": "unit bins"},
    )
