"""Command line: generate instances, estimate subspaces, run benchmark grids, check identifiability.

Exit codes: 0 success, 1 I/O failure, 2 usage or malformed input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import bench
from .cumulants import WhiteningError, estimate_epoch
from .ssa import SSAConfig
from .subspace import RadicalError
from .synthgen import ProblemInstance, generate

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
INSTANCE_VERSION = 1


class UsageError(Exception):
    pass


def _float_out(x: float):
    return float(x) if math.isfinite(x) else repr(float(x))


def instance_to_json(inst: ProblemInstance) -> str:
    """JSON text of an instance; floats use shortest round-trip decimals so reading back is bit-exact."""
    doc = {
        "version": INSTANCE_VERSION,
        "D": inst.D,
        "d": inst.d,
        "m": inst.m,
        "sigma": _float_out(inst.sigma),
        "seed": inst.seed,
        "covariances": inst.covariances.tolist(),
        "means": inst.means.tolist(),
        "true_basis": inst.true_basis.tolist(),
    }
    return json.dumps(doc)


def instance_from_json(text: str) -> ProblemInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"instance file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("version") != INSTANCE_VERSION:
        raise UsageError(f"instance file must carry version {INSTANCE_VERSION}")
    try:
        D, d, m = int(doc["D"]), int(doc["d"]), int(doc["m"])
        covs = np.array(doc["covariances"], dtype=float)
        means = np.array(doc["means"], dtype=float) if doc.get("means") is not None else np.zeros((m, D))
        basis = doc.get("true_basis")
        basis = np.array(basis, dtype=float) if basis is not None else None
        sigma = float(doc.get("sigma", "nan"))
        seed = doc.get("seed")
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed instance file: {exc}") from None
    if covs.shape != (m, D, D) or means.shape != (m, D):
        raise UsageError(
            f"array shapes {covs.shape} / {means.shape} do not match D={D}, m={m}"
        )
    if basis is not None and basis.shape != (D, d):
        raise UsageError(f"true_basis shape {basis.shape} does not match D={D}, d={d}")
    return ProblemInstance(D, d, m, sigma, covs, means, basis, seed)


def read_samples(path: Path) -> list[np.ndarray]:
    """Samples grouped by the ``epoch`` column, in order of first appearance."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError("samples file is empty") from None
        if not header or header[0].strip() != "epoch" or len(header) < 2:
            raise UsageError("samples file header must be 'epoch,x1,...,xD'")
        width = len(header)
        groups: dict[int, list[list[float]]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise UsageError(f"line {lineno}: expected {width} fields, got {len(row)}")
            try:
                label = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise UsageError(f"line {lineno}: {exc}") from None
            groups.setdefault(label, []).append(values)
    if len(groups) < 2:
        raise UsageError("samples file needs at least two epochs")
    small = [k for k, rows in groups.items() if len(rows) < 2]
    if small:
        raise UsageError(f"epochs {small} have fewer than 2 samples")
    return [np.array(rows) for rows in groups.values()]


def write_samples(path: Path, epochs: list[np.ndarray]) -> None:
    D = epochs[0].shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch"] + [f"x{k + 1}" for k in range(D)])
        for label, X in enumerate(epochs, start=1):
            for row in X:
                writer.writerow([label] + [repr(float(v)) for v in row])


def _looks_like_json(path: Path) -> bool:
    with open(path) as fh:
        head = fh.read(64).lstrip()
    return head.startswith("{")


def _write_text(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text + "\n")
    else:
        Path(out).write_text(text + "\n")


def cmd_generate(args) -> int:
    if not 0 < args.subdim < args.dim:
        raise UsageError(f"--subdim must satisfy 0 < d < D (got d={args.subdim}, D={args.dim})")
    if args.epochs < 2:
        raise UsageError("--epochs must be at least 2")
    inst = generate(
        args.dim, args.subdim, args.epochs, args.sigma, args.seed,
        disturb=not args.no_disturb, mean_shift=args.mean_shift,
    )
    _write_text(args.out, instance_to_json(inst))
    rep = bench.identifiability(args.dim, args.subdim, args.epochs)
    print(
        f"identifiability: {rep.verdict} (m={rep.requested_m}, needs m >= {rep.min_m_identifiable}; "
        f"algebraic estimators need m - 1 >= {rep.min_quadrics_exact_alg})",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_estimate(args) -> int:
    path = Path(args.inp)
    truth = None
    if _looks_like_json(path):
        inst = instance_from_json(path.read_text())
        epochs = inst.epochs()
        truth = inst.true_basis
        d = args.subdim if args.subdim is not None else inst.d
        reference = args.reference or "last"
        use_means = not args.ignore_means
    else:
        epochs = [estimate_epoch(X) for X in read_samples(path)]
        if args.subdim is None:
            raise UsageError("--subdim is required for samples input")
        d = args.subdim
        reference = args.reference or "average"
        use_means = args.use_means
    dim = epochs[0].dim
    if not 0 < d < dim:
        raise UsageError(f"--subdim must satisfy 0 < d < D (got d={d}, D={dim})")
    cfg = SSAConfig(restarts=args.restarts)
    t0 = time.perf_counter()
    est = bench.recover_subspace(
        epochs, d, args.method, args.mode, reference, use_means, cfg, args.seed
    )
    runtime = time.perf_counter() - t0
    result = {
        "method": args.method,
        "mode": args.mode,
        "reference": reference,
        "D": dim,
        "d": d,
        "generators": est.generator_matrix().tolist(),
        "basis": est.basis.tolist(),
        "angle_rad": bench.principal_angle(est.basis, truth) if truth is not None else None,
        "runtime_s": runtime,
    }
    _write_text(args.out, json.dumps(result, indent=2))
    return EXIT_OK


def _parse_int_list(text: str) -> tuple[int, ...]:
    out = []
    for part in text.replace(";", " ").split():
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def parse_grid(text_or_path: str) -> bench.GridConfig:
    """``benchmark``, a JSON file, inline JSON, or ``key=value`` pairs separated by commas.

    In the ``key=value`` form lists use ``;`` (``sigmas=-8;-2;0``) and ``d``
    accepts ranges (``d=1-9``).
    """
    spec = text_or_path.strip()
    if spec == "benchmark":
        return bench.benchmark_grid()
    text = None
    if spec.startswith("{"):
        text = spec
    elif Path(spec).is_file():
        text = Path(spec).read_text()
    try:
        if text is not None:
            return bench.GridConfig.from_dict(json.loads(text))
        data: dict = {}
        for item in filter(None, (p.strip() for p in spec.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got {item!r}")
            key = key.strip()
            if key in ("d", "d_list"):
                data["d_list"] = _parse_int_list(value)
            elif key in ("sigma", "sigmas"):
                data["sigmas"] = tuple(float(v) for v in value.split(";"))
            elif key == "methods":
                data["methods"] = tuple(v.strip() for v in value.split(";"))
            elif key in ("D", "m", "trials", "master_seed", "seed"):
                data["master_seed" if key == "seed" else key] = int(value)
            elif key in ("algebraic_estimator", "estimator"):
                data["algebraic_estimator"] = value.strip()
            elif key == "restarts":
                data["ssa"] = SSAConfig(restarts=int(value))
            else:
                raise ValueError(f"unknown grid key {key!r}")
        return bench.GridConfig.from_dict(data)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse grid {spec!r}: {exc}") from None


def cmd_benchmark(args) -> int:
    config = parse_grid(args.grid)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.no_timing:
        overrides["timing"] = False
    if overrides:
        config = bench.GridConfig.from_dict({**config.to_dict(), **overrides})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        run = bench.run_grid(config, jobs=args.jobs)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    (out / "results.csv").write_text(run.csv_text())
    (out / "summary.json").write_text(run.summary_json() + "\n")
    for cell in run.cell_summaries():
        med = cell["angle_median"]
        med_txt = f"{med:.3e}" if med is not None else "n/a"
        print(
            f"{cell['method']:>9} D={cell['D']} d={cell['d']} m={cell['m']} "
            f"sigma={cell['sigma']} median_angle={med_txt} failed={cell['failed']}/{cell['trials']}"
        )
    return EXIT_OK


def cmd_identifiability(args) -> int:
    if not 0 < args.subdim < args.dim:
        raise UsageError(f"--subdim must satisfy 0 < d < D (got d={args.subdim}, D={args.dim})")
    if args.epochs < 1:
        raise UsageError("--epochs must be at least 1")
    rep = bench.identifiability(args.dim, args.subdim, args.epochs)
    print(json.dumps(rep.__dict__, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cumalg", description="Common-subspace recovery from means and covariances."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic problem instance")
    g.add_argument("--dim", type=int, required=True)
    g.add_argument("--subdim", type=int, required=True)
    g.add_argument("--epochs", type=int, required=True)
    g.add_argument("--sigma", type=float, default=float("-inf"),
                   help="mean log-eigenvalue of the disturbance (-inf: none)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--no-disturb", action="store_true")
    g.add_argument("--mean-shift", action="store_true",
                   help="give epochs nonzero means outside the common subspace")
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="estimate the common subspace of an instance or samples file")
    e.add_argument("--in", dest="inp", required=True, help="instance JSON or samples CSV")
    e.add_argument("--subdim", type=int, default=None)
    e.add_argument("--method", choices=bench.ESTIMATORS, default="approx")
    e.add_argument("--mode", choices=("reference", "pairwise"), default="reference")
    e.add_argument("--reference", choices=("last", "average"), default=None,
                   help="whitening reference (default: last for instances, average for samples)")
    e.add_argument("--use-means", action="store_true",
                   help="use epoch means of a samples file as linear constraints")
    e.add_argument("--ignore-means", action="store_true",
                   help="drop the means of an instance file")
    e.add_argument("--restarts", type=int, default=SSAConfig().restarts)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("benchmark", help="run an experiment grid")
    b.add_argument("--grid", required=True,
                   help="'benchmark', a JSON file, inline JSON or key=value list")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--trials", type=int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--no-timing", action="store_true",
                   help="record runtime as 0 so repeated runs produce identical files")
    b.set_defaults(func=cmd_benchmark)

    i = sub.add_parser("identifiability", help="report epoch-count bounds")
    i.add_argument("--dim", type=int, required=True)
    i.add_argument("--subdim", type=int, required=True)
    i.add_argument("--epochs", type=int, required=True)
    i.set_defaults(func=cmd_identifiability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RadicalError, WhiteningError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
