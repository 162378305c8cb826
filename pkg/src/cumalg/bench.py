"""Subspace error metric, identifiability bounds and the seeded trial runner."""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import subspace_angles

from . import approx, exact
from .cumulants import EpochCumulants, PolynomialSystem, build_system, center_whiten
from .polyspace import triangular
from .ssa import SSAConfig, ssa_optimize
from .subspace import SubspaceEstimate
from .synthgen import generate, trial_seed

METHODS = ("algebraic", "ssa")
ESTIMATORS = ("exact", "approx", "ssa")
CSV_HEADER = ("method", "D", "d", "m", "sigma", "seed", "angle_rad", "runtime_s", "converged")


def principal_angle(A, B, tol: float = 1e-6) -> float:
    """Largest principal angle (radians) between the column spans of orthonormal ``A`` and ``B``.

    For spans of different dimension the largest of the ``min(p, q)``
    principal angles is returned.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"ambient dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    for name, X in (("A", A), ("B", B)):
        if X.shape[1] < 1:
            raise ValueError(f"{name} has no columns")
        if np.abs(X.T @ X - np.eye(X.shape[1])).max() > tol:
            raise ValueError(f"columns of {name} are not orthonormal")
    # subspace_angles stays accurate for tiny angles where arccos of a cosine does not
    return float(np.max(subspace_angles(A, B)))


@dataclass(frozen=True)
class IdentifiabilityReport:
    D: int
    d: int
    requested_m: int
    min_m_identifiable: int
    min_quadrics_exact_alg: int
    algebraic_regime: bool
    verdict: str


def min_epochs_identifiable(D: int, d: int) -> int:
    """Smallest ``m`` with ``m >= (D - d + 1)/2 + 1``, i.e. ``ceil((D - d + 1)/2) + 1``."""
    return (D - d + 2) // 2 + 1


def identifiability(D: int, d: int, m: int) -> IdentifiabilityReport:
    """Epoch-count bounds for a ``d``-dim common subspace in ``R^D`` from ``m`` epochs.

    ``algebraic_regime`` says whether the ``m - 1`` reference quadrics reach
    the ``Δ(D) - Δ(d)`` needed by the exact and approximate estimators.
    """
    if not 0 < d < D:
        raise ValueError(f"need 0 < d < D, got d={d}, D={D}")
    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    min_m = min_epochs_identifiable(D, d)
    needed = triangular(D) - triangular(d)
    return IdentifiabilityReport(
        D=D,
        d=d,
        requested_m=m,
        min_m_identifiable=min_m,
        min_quadrics_exact_alg=needed,
        algebraic_regime=m - 1 >= needed,
        verdict="identifiable" if m >= min_m else "not_guaranteed",
    )


def recover_subspace(
    epochs: Sequence[EpochCumulants],
    d: int,
    method: str = "approx",
    mode: str = "reference",
    reference: str | None = None,
    use_means: bool = True,
    ssa_config: SSAConfig | None = None,
    seed=None,
) -> SubspaceEstimate:
    """Whiten, build the polynomial system (or the SSA objective) and estimate in original coordinates.

    ``reference`` defaults to ``"last"`` for the algebraic estimators and
    ``"average"`` for SSA.
    """
    if method not in ESTIMATORS:
        raise ValueError(f"unknown method {method!r}; choose from {ESTIMATORS}")
    if reference is None:
        reference = "average" if method == "ssa" else "last"
    white, W, _ = center_whiten(list(epochs), reference)
    if method == "ssa":
        if not use_means:
            white = [EpochCumulants(np.zeros_like(e.mean), e.cov) for e in white]
        res = ssa_optimize(white, d, ssa_config, seed)
        return SubspaceEstimate.from_basis(W @ res.P.T)
    system = build_system(white, mode)
    if not use_means:
        system = PolynomialSystem(system.dim, system.quadrics)
    if method == "exact":
        est = exact.solve_exact(system, d)
    else:
        est = approx.estimate(system, d)
    return est.transformed(W)


@dataclass(frozen=True)
class TrialResult:
    """One estimator run. Failed runs carry ``converged=False`` and angle ``pi/2``."""

    method: str
    D: int
    d: int
    m: int
    sigma: float
    seed: int
    angle: float
    runtime: float
    converged: bool
    message: str = ""

    def csv_row(self) -> list[str]:
        return [
            self.method,
            str(self.D),
            str(self.d),
            str(self.m),
            repr(float(self.sigma)),
            str(self.seed),
            repr(float(self.angle)),
            repr(float(self.runtime)),
            "true" if self.converged else "false",
        ]


@dataclass(frozen=True)
class GridConfig:
    """Experiment grid. ``sigma = -inf`` means noise-free instances."""

    D: int = 10
    d_list: tuple[int, ...] = tuple(range(1, 10))
    m: int = 110
    sigmas: tuple[float, ...] = (-8.0, -2.0, 0.0)
    trials: int = 50
    methods: tuple[str, ...] = METHODS
    master_seed: int = 0
    algebraic_estimator: str = "approx"
    ssa: SSAConfig = field(default_factory=SSAConfig)
    timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "d_list", tuple(int(v) for v in self.d_list))
        object.__setattr__(self, "sigmas", tuple(float(v) for v in self.sigmas))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        bad = [mth for mth in self.methods if mth not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.algebraic_estimator not in ("exact", "approx"):
            raise ValueError("algebraic_estimator must be 'exact' or 'approx'")
        if not self.d_list or not self.sigmas:
            raise ValueError("grid needs at least one d and one sigma")
        for d in self.d_list:
            if not 0 < d < self.D:
                raise ValueError(f"need 0 < d < D, got d={d}, D={self.D}")
        if self.m < 2:
            raise ValueError("m must be at least 2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sigmas"] = [_json_float(s) for s in self.sigmas]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GridConfig":
        data = dict(data)
        if "ssa" in data and isinstance(data["ssa"], dict):
            data["ssa"] = SSAConfig(**data["ssa"])
        if "sigmas" in data:
            data["sigmas"] = tuple(float(s) for s in data["sigmas"])
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown grid fields {sorted(unknown)}")
        return cls(**data)


def _json_float(x: float):
    return x if math.isfinite(x) else str(x)


def run_trial(config: GridConfig, d: int, sigma: float, trial: int) -> list[TrialResult]:
    """Generate the instance for ``trial`` and run every configured method on it.

    The instance seed depends only on the master seed and the trial index, so
    cells at different noise levels share their underlying draws.
    """
    seed = trial_seed(config.master_seed, trial)
    inst = generate(config.D, d, config.m, sigma, seed)
    out = []
    for method in config.methods:
        estimator = config.algebraic_estimator if method == "algebraic" else "ssa"
        t0 = time.perf_counter()
        try:
            est = recover_subspace(
                inst.epochs(), d, estimator, ssa_config=config.ssa, seed=seed
            )
            runtime = time.perf_counter() - t0
            angle = principal_angle(est.basis, inst.true_basis)
            ok, msg = True, ""
        except (ValueError, np.linalg.LinAlgError) as exc:
            runtime = time.perf_counter() - t0
            angle, ok, msg = math.pi / 2, False, f"{type(exc).__name__}: {exc}"
        out.append(
            TrialResult(
                method, config.D, d, config.m, sigma, seed, angle,
                runtime if config.timing else 0.0, ok, msg,
            )
        )
    return out


def _run_task(args):
    return run_trial(*args)


@dataclass
class GridRun:
    config: GridConfig
    results: list[TrialResult]
    skipped: list[dict]

    def cell_summaries(self) -> list[dict]:
        cells = []
        for d in self.config.d_list:
            for sigma in self.config.sigmas:
                for method in self.config.methods:
                    rows = [
                        r for r in self.results
                        if r.d == d and r.sigma == sigma and r.method == method
                    ]
                    if not rows:
                        continue
                    good = [r for r in rows if r.converged]
                    angles = np.array([r.angle for r in good])
                    times = np.array([r.runtime for r in good])
                    q = (np.percentile(angles, [25, 50, 75]).tolist() if good else [None] * 3)
                    cells.append(
                        {
                            "method": method,
                            "D": self.config.D,
                            "d": d,
                            "m": self.config.m,
                            "sigma": _json_float(sigma),
                            "trials": len(rows),
                            "failed": len(rows) - len(good),
                            "angle_q25": q[0],
                            "angle_median": q[1],
                            "angle_q75": q[2],
                            "runtime_median": float(np.median(times)) if good else None,
                        }
                    )
        return cells

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "cells": self.cell_summaries(),
            "skipped": self.skipped,
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.results:
            writer.writerow(r.csv_row())
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def run_grid(config: GridConfig, jobs: int = 1) -> GridRun:
    """Run every identifiable ``(d, sigma)`` cell for ``config.trials`` trials.

    Cells whose ``m`` is below the identifiability bound are skipped with a
    warning. Results come back in grid order whatever ``jobs`` is.
    """
    tasks = []
    skipped = []
    for d in config.d_list:
        report = identifiability(config.D, d, config.m)
        if report.verdict != "identifiable":
            msg = (
                f"skipping D={config.D} d={d} m={config.m}: "
                f"needs m >= {report.min_m_identifiable} for identifiability"
            )
            warnings.warn(msg, stacklevel=2)
            skipped.extend(
                {"D": config.D, "d": d, "m": config.m, "sigma": _json_float(s), "reason": msg}
                for s in config.sigmas
            )
            continue
        for sigma in config.sigmas:
            tasks.extend((config, d, sigma, t) for t in range(config.trials))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        chunks = [_run_task(t) for t in tasks]
    results = [r for chunk in chunks for r in chunk]
    return GridRun(config, results, skipped)


def benchmark_grid(trials: int = 50, **overrides) -> GridConfig:
    """D = 10, m = 110, d = 1..9, sigma in {-8, -2, 0}."""
    return GridConfig(trials=trials, **overrides)
