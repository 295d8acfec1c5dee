"""Unified command-line entry point and pipeline orchestration.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Configuration comes from an INI file (--config or the MOLSWAP_CONFIG
environment variable) with flags taking precedence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import traceback
from importlib import resources
from pathlib import Path

from . import __version__
from .chem import (
    MolFormula,
    MolGraph,
    canonical_signature,
    formula_of,
    parse_smiles,
    write_smiles,
)
from .diffusion import noise_trajectory
from .errors import (
    DataError,
    MolswapError,
    SmilesSyntaxError,
    UnsupportedFeature,
    ValenceError,
)
from .features import featurize, fingerprint
from .io_utils import read_dataset_lines, write_dataset, write_ldjson
from .metrics import compare_report
from .neural import load_weights, save_weights
from .sampling import SampleConfig, generate_batch
from .training import TrainConfig, finetune_fps, train_diffusion, train_time

CONFIG_ENV = "MOLSWAP_CONFIG"
DEFAULT_ATOM_RANGE = (5, 70)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit with code 1, not 2
        raise UsageError(message)


def load_config(path: str | None) -> dict[str, dict[str, str]]:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    if not Path(path).exists():
        raise DataError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    cp.read(path)
    return {section: dict(cp[section]) for section in cp.sections()}


def _cfg_get(config: dict, section: str, key: str, cast, fallback):
    value = config.get(section, {}).get(key)
    return cast(value) if value is not None else fallback


def read_molecules(path) -> list[tuple[int, str]]:
    try:
        return list(read_dataset_lines(path))
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc


def _admit(g: MolGraph, atom_min: int, atom_max: int) -> str | None:
    if not atom_min <= g.n <= atom_max:
        return "size"
    return None


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def cmd_ingest(args, config) -> int:
    atom_min = _cfg_get(config, "admission", "atom_min", int, args.atom_min)
    atom_max = _cfg_get(config, "admission", "atom_max", int, args.atom_max)
    if not (2 <= atom_min <= atom_max <= 200):
        raise UsageError("atom range must sit within [2, 200]")
    accepted: list[str] = []
    seen: set[str] = set()
    counts = {"read": 0, "accepted": 0, "parse": 0, "unsupported": 0,
              "valence": 0, "size": 0, "duplicate": 0}
    for lineno, line in read_molecules(args.input):
        counts["read"] += 1
        try:
            g = parse_smiles(line, provenance=f"{args.input}:{lineno}")
        except SmilesSyntaxError:
            counts["parse"] += 1
            continue
        except UnsupportedFeature:
            counts["unsupported"] += 1
            continue
        except ValenceError:
            counts["valence"] += 1
            continue
        reason = _admit(g, atom_min, atom_max)
        if reason:
            counts[reason] += 1
            continue
        sig = canonical_signature(g).text
        if sig in seen:
            counts["duplicate"] += 1
            continue
        seen.add(sig)
        accepted.append(write_smiles(g))
        counts["accepted"] += 1
    write_dataset(args.output, accepted)
    report = json.dumps(counts, sort_keys=True)
    if args.report:
        Path(args.report).write_text(report + "\n")
    print(report)
    return 0


def _load_dataset(path, atom_min=2, atom_max=200) -> list[MolGraph]:
    mols = []
    for lineno, line in read_molecules(path):
        try:
            g = parse_smiles(line, provenance=f"{path}:{lineno}")
        except MolswapError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        mols.append(g)
    if not mols:
        raise DataError(f"dataset {path} holds no molecules")
    return mols


def cmd_noise(args, config) -> int:
    mols = _load_dataset(args.input)
    rows = []
    for index, g in enumerate(mols):
        traj = noise_trajectory(
            g, rng_seed=args.seed + index, steps_factor=args.steps_factor
        )
        rows.append(
            {
                "index": index,
                "states": [write_smiles(s) for s in traj.states],
                "moves": [
                    {"removed": list(map(list, m.removed)),
                     "added": list(map(list, m.added))}
                    for m in traj.moves
                ],
                "times": list(traj.times),
                "truncated": traj.truncated,
            }
        )
    write_ldjson(args.output, rows)
    print(f"wrote {len(rows)} trajectories to {args.output}")
    return 0


def cmd_featurize(args, config) -> int:
    mols = _load_dataset(args.input)
    rows = []
    for index, g in enumerate(mols):
        bundle = featurize(g, args.time)
        bonded = {
            f"{a}-{b}": [round(float(x), 6) for x in bundle.E[a, b]]
            for a, b, _ in g.bonds
        }
        rows.append(
            {
                "index": index,
                "X": [[round(float(x), 6) for x in row] for row in bundle.X],
                "E_bonded": bonded,
                "g": [round(float(x), 6) for x in bundle.g],
                "t": bundle.t,
            }
        )
    write_ldjson(args.output, rows)
    print(f"wrote features for {len(rows)} molecules to {args.output}")
    return 0


def cmd_canon(args, config) -> int:
    lines = []
    for lineno, line in read_molecules(args.input):
        try:
            g = parse_smiles(line)
            if args.signatures:
                lines.append(canonical_signature(g).text)
            else:
                lines.append(write_smiles(g))
        except MolswapError as exc:
            raise DataError(f"{args.input}:{lineno}: {exc}") from exc
    write_dataset(args.output, lines)
    print(f"wrote {len(lines)} lines to {args.output}")
    return 0


def cmd_fingerprint(args, config) -> int:
    lines = []
    for lineno, line in read_molecules(args.input):
        try:
            fp = fingerprint(parse_smiles(line))
        except MolswapError as exc:
            raise DataError(f"{args.input}:{lineno}: {exc}") from exc
        lines.append(fp.bits.tobytes().hex())
    write_dataset(args.output, lines)
    print(f"wrote {len(lines)} fingerprints to {args.output}")
    return 0


def _train_config(args, config) -> TrainConfig:
    sec = "train"
    return TrainConfig(
        slice_size=_cfg_get(config, sec, "slice_size", int, args.slice_size),
        batch_size=_cfg_get(config, sec, "batch_size", int, args.batch_size),
        epochs=_cfg_get(config, sec, "epochs", int, args.epochs),
        lr=_cfg_get(config, sec, "lr", float, args.lr),
        lr_schedule=_cfg_get(config, sec, "lr_schedule", str, args.lr_schedule),
        lr_end=_cfg_get(config, sec, "lr_end", float, args.lr_end),
        lr_pretrained=_cfg_get(
            config, sec, "lr_pretrained", float, args.lr_pretrained
        ),
        checkpoint_interval=_cfg_get(
            config, sec, "checkpoint_interval", int, args.checkpoint_interval
        ),
        worker_count=_cfg_get(config, sec, "worker_count", int, args.workers),
        seed=args.seed,
        variant=args.variant,
        checkpoint_dir=args.checkpoint_dir,
    )


def _finish_training(args, weights, metrics) -> int:
    save_weights(weights, args.output)
    if args.metrics:
        write_ldjson(args.metrics, metrics)
    batches = sum(1 for m in metrics if m.get("kind") == "batch")
    print(f"saved {weights.variant} weights to {args.output} ({batches} batches)")
    return 0


def cmd_train_diffusion(args, config) -> int:
    cfg = _train_config(args, config)
    mols = _load_dataset(args.input)
    weights, metrics = train_diffusion(mols, cfg, resume_from=args.resume)
    return _finish_training(args, weights, metrics)


def cmd_train_time(args, config) -> int:
    cfg = _train_config(args, config)
    mols = _load_dataset(args.input)
    weights, metrics = train_time(mols, cfg, resume_from=args.resume)
    return _finish_training(args, weights, metrics)


def cmd_finetune_fps(args, config) -> int:
    cfg = _train_config(args, config)
    base = load_weights(args.base, expect_variant="base")
    mols = _load_dataset(args.input)
    weights, metrics = finetune_fps(base, mols, cfg)
    return _finish_training(args, weights, metrics)


def cmd_sample(args, config) -> int:
    sec = "sample"
    cfg = SampleConfig(
        steps_factor=_cfg_get(config, sec, "steps_factor", float, args.steps_factor),
        threshold_start=_cfg_get(
            config, sec, "threshold_start", float, args.threshold_start
        ),
        threshold_decrement=_cfg_get(
            config, sec, "threshold_decrement", float, args.threshold_decrement
        ),
        randomization_factor=_cfg_get(
            config, sec, "randomization_factor", float, args.randomization_factor
        ),
        seed=args.seed,
    )
    diffusion_w = load_weights(args.weights)
    time_w = load_weights(args.time_weights)
    formulas: list[MolFormula] = []
    for lineno, line in read_molecules(args.formulas):
        try:
            formulas.append(MolFormula.parse(line))
        except (ValueError, MolswapError):
            try:
                formulas.append(formula_of(parse_smiles(line)))
            except MolswapError as exc:
                raise DataError(f"{args.formulas}:{lineno}: {exc}") from exc
    if args.count is not None:
        if not formulas:
            raise DataError("no formulas available to sample from")
        formulas = [formulas[i % len(formulas)] for i in range(args.count)]
    mols, rows = generate_batch(formulas, diffusion_w, time_w, cfg)
    write_dataset(args.output, [write_smiles(g) for g in mols])
    if args.report:
        write_ldjson(args.report, rows)
    summary = rows[-1]
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_eval(args, config) -> int:
    reference = _load_dataset(args.reference)
    generated = _load_dataset(args.generated)
    training_sigs: set[str] = set()
    if args.training_signatures:
        training_sigs = {
            line for _, line in read_molecules(args.training_signatures)
        }
    report = compare_report(
        reference, generated, training_sigs, plot_data=bool(args.plot_data)
    )
    doc = report.to_dict()
    if args.plot_data:
        plot = {k: v["histogram"] for k, v in doc["descriptors"].items()}
        Path(args.plot_data).write_text(json.dumps(plot, sort_keys=True))
        for entry in doc["descriptors"].values():
            entry["histogram"] = {"bins": len(entry["histogram"]["reference"])}
    text = json.dumps(doc, sort_keys=True, indent=1)
    Path(args.out).write_text(text + "\n")
    print(f"kl_score={doc['aggregate']['kl_score']:.3f} "
          f"validity={doc['aggregate']['validity']:.1f}")
    return 0


def cmd_serve(args, config) -> int:
    import uvicorn

    from .turing import SessionStore, create_app, load_pair_pool

    pool = load_pair_pool(args.pairs_real, args.pairs_generated)
    if len(pool) < 20:
        raise DataError(f"pair pool too small ({len(pool)} pairs; 20 needed)")
    store = SessionStore(pool, args.log, seed=args.seed)
    app = create_app(store, ui_dir=args.ui_dir, allowed_origin=args.origin)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_turing_report(args, config) -> int:
    from .turing import turing_report

    report = turing_report(args.log, bootstrap_iterations=args.bootstrap,
                           seed=args.seed)
    text = json.dumps(report, sort_keys=True, indent=1)
    Path(args.out).write_text(text + "\n")
    overall = report["overall"]
    print(f"overall accuracy {overall['accuracy']:.3f} "
          f"[{overall['ci_low']:.3f}, {overall['ci_high']:.3f}]")
    return 0


def bundled_corpus_path() -> Path:
    return Path(resources.files("molswap") / "data" / "smoke_corpus.smi")


def end_to_end_smoke(workdir: str | Path, seed: int = 0) -> Path:
    """ingest -> noise -> 2-epoch train (both models) -> sample 20 -> eval.

    Returns the eval report path; raises DataError naming the failed stage.
    Deterministic: same seed gives a byte-identical report.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    stage = "ingest"
    try:
        corpus = bundled_corpus_path()
        dataset = workdir / "dataset.smi"
        ns = argparse.Namespace(
            input=str(corpus), output=str(dataset), report=None,
            atom_min=DEFAULT_ATOM_RANGE[0], atom_max=DEFAULT_ATOM_RANGE[1],
        )
        cmd_ingest(ns, {})
        mols = _load_dataset(dataset)

        stage = "noise"
        ns = argparse.Namespace(
            input=str(dataset), output=str(workdir / "trajectories.ldjson"),
            seed=seed, steps_factor=0.25,
        )
        cmd_noise(ns, {})

        stage = "train-diffusion"
        cfg = TrainConfig(epochs=2, batch_size=12, lr=1e-3, seed=seed,
                          worker_count=1, validate=False)
        dweights, _ = train_diffusion(mols, cfg)
        save_weights(dweights, workdir / "diffusion.json")

        stage = "train-time"
        tweights, _ = train_time(mols, cfg)
        save_weights(tweights, workdir / "time.json")

        stage = "sample"
        formulas = [formula_of(g) for g in mols[:20]]
        sample_cfg = SampleConfig(seed=seed)
        samples, rows = generate_batch(formulas, dweights, tweights, sample_cfg)
        write_dataset(workdir / "generated.smi",
                      [write_smiles(g) for g in samples])
        write_ldjson(workdir / "generation-report.ldjson", rows)
        if len(samples) != len(formulas):
            raise DataError("sampling failed for some formulas")
        for g in samples:
            g.check_saturated()

        stage = "eval"
        training_sigs = {canonical_signature(g).text for g in mols}
        report = compare_report(mols, samples, training_sigs)
        doc = report.to_dict()
        if doc["aggregate"]["validity"] != 100.0:
            raise DataError("generated set failed the validity audit")
        report_path = workdir / "eval-report.json"
        report_path.write_text(
            json.dumps(doc, sort_keys=True, indent=1) + "\n"
        )
        return report_path
    except MolswapError as exc:
        raise DataError(f"smoke stage {stage!r} failed: {exc}") from exc


def cmd_smoke(args, config) -> int:
    report_path = end_to_end_smoke(args.workdir, seed=args.seed)
    print(f"smoke pipeline complete; eval report at {report_path}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="molswap", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="INI config file path")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("ingest", cmd_ingest, help="parse, canonicalize, dedupe, filter")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--report")
    p.add_argument("--atom-min", type=int, default=DEFAULT_ATOM_RANGE[0])
    p.add_argument("--atom-max", type=int, default=DEFAULT_ATOM_RANGE[1])

    p = add("noise", cmd_noise, help="emit noising trajectories")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--steps-factor", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)

    p = add("featurize", cmd_featurize, help="emit model input tensors")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--time", type=float, default=0.0)

    p = add("canon", cmd_canon, help="canonical SMILES or signatures")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--signatures", action="store_true")

    p = add("fingerprint", cmd_fingerprint, help="hex fingerprints")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)

    for name, fn in (
        ("train-diffusion", cmd_train_diffusion),
        ("train-time", cmd_train_time),
        ("finetune-fps", cmd_finetune_fps),
    ):
        p = add(name, fn, help=f"{name.replace('-', ' ')}")
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out", dest="output", required=True)
        p.add_argument("--epochs", type=int, default=3)
        p.add_argument("--batch-size", type=int, default=12)
        p.add_argument("--slice-size", type=int, default=100_000)
        p.add_argument("--lr", type=float, default=1e-4)
        p.add_argument("--lr-schedule", choices=["constant", "cosine"],
                       default="constant")
        p.add_argument("--lr-end", type=float, default=1e-5)
        p.add_argument("--lr-pretrained", type=float, default=1e-5)
        p.add_argument("--checkpoint-interval", type=int, default=1000)
        p.add_argument("--checkpoint-dir")
        p.add_argument("--workers", type=int, default=24)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--variant", choices=["base", "fps"], default="base")
        p.add_argument("--metrics")
        p.add_argument("--resume")
        if name == "finetune-fps":
            p.add_argument("--base", required=True)

    p = add("sample", cmd_sample, help="generate molecules")
    p.add_argument("--formulas", required=True,
                   help="formula file or SMILES dataset")
    p.add_argument("--count", type=int)
    p.add_argument("--weights", required=True)
    p.add_argument("--time-weights", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--report")
    p.add_argument("--steps-factor", type=float, default=0.3)
    p.add_argument("--threshold-start", type=float, default=0.95)
    p.add_argument("--threshold-decrement", type=float, default=0.05)
    p.add_argument("--randomization-factor", type=float, default=2.0)

    p = add("eval", cmd_eval, help="distribution-matching report")
    p.add_argument("--reference", required=True)
    p.add_argument("--generated", required=True)
    p.add_argument("--training-signatures")
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data")

    p = add("serve", cmd_serve, help="run the discrimination-test service")
    p.add_argument("--pairs-real", required=True)
    p.add_argument("--pairs-generated", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir")
    p.add_argument("--origin")
    p.add_argument("--seed", type=int)

    p = add("turing-report", cmd_turing_report, help="analyze the response log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = add("smoke", cmd_smoke, help="end-to-end pipeline on the bundled corpus")
    p.add_argument("--workdir", required=True)
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config)
        return args.fn(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except MolswapError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 3
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
