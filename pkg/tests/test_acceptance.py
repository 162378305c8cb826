"""End-to-end acceptance checks. Each test records one PASS/FAIL line."""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from cumalg.bench import GridConfig, identifiability, principal_angle, recover_subspace, run_grid
from cumalg.cumulants import WhiteningError, build_system, center_whiten, estimate_epoch
from cumalg.exact import exact_generators
from cumalg.polyspace import QuadraticForm, triangular
from cumalg.subspace import RadicalError
from cumalg.synthgen import generate, sample_epochs, trial_seed

from conftest import ACCEPTANCE_LINES, MASTER_SEED

SWEEP_DIMS = (4, 6, 8, 10)
SWEEP_TRIALS = 100


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def rank_gap(Q: np.ndarray, r: int) -> float:
    sv = np.linalg.svd(Q, compute_uv=False)
    below = sv[r] if sv.size > r else 0.0
    return math.inf if below == 0.0 else sv[r - 1] / below


@pytest.fixture(scope="module")
def sweep():
    """Noise-free instances with exactly Δ(D) - Δ(d) quadrics, one record per instance."""
    records = []
    exact_time = 0.0
    for D in SWEEP_DIMS:
        for d in range(1, D):
            r = triangular(D) - triangular(d)
            for t in range(SWEEP_TRIALS):
                seed = trial_seed(MASTER_SEED, t)
                rec = {"D": D, "d": d, "seed": seed}
                inst = generate(D, d, r + 1, -math.inf, seed)
                t0 = time.perf_counter()
                try:
                    est = recover_subspace(inst.epochs(), d, "exact")
                    rec["exact"] = principal_angle(est.basis, inst.true_basis)
                except (RadicalError, WhiteningError, np.linalg.LinAlgError) as exc:
                    est, rec["exact"], rec["error"] = None, math.pi / 2, repr(exc)
                exact_time += time.perf_counter() - t0
                try:
                    app = recover_subspace(inst.epochs(), d, "approx")
                    rec["cross"] = principal_angle(app.basis, est.basis) if est else math.pi / 2
                    white, _, _ = center_whiten(inst.epochs(), "last")
                    rec["gap"] = rank_gap(build_system(white).quadric_matrix(), r)
                except (RadicalError, WhiteningError, np.linalg.LinAlgError) as exc:
                    rec["cross"], rec["gap"], rec["error"] = math.pi / 2, 0.0, repr(exc)
                # with extra quadrics the gap is no longer guaranteed by the matrix shape
                over = generate(D, d, r + D + 1, -math.inf, seed)
                try:
                    white, _, _ = center_whiten(over.epochs(), "last")
                    rec["gap_over"] = rank_gap(build_system(white).quadric_matrix(), r)
                except WhiteningError:
                    rec["gap_over"] = math.nan
                rec["cond_over"] = float(np.linalg.cond(over.covariances[-1]))
                records.append(rec)
    return records, exact_time


def test_golden_two_variable_example():
    q = [QuadraticForm(2, [1.0, 2.0, 0.0]), QuadraticForm(2, [0.0, 1.0, 2.0])]
    exact_generators(q, 1)  # warm-up
    times = []
    for _ in range(20):
        t0 = time.perf_counter()
        est = exact_generators(q, 1)
        times.append(time.perf_counter() - t0)
    target = np.array([[2.0], [-1.0]]) / math.sqrt(5)
    ang = principal_angle(est.basis, target)
    gen = est.generator_matrix()[0]
    cos = abs(gen @ np.array([1.0, 2.0])) / (np.linalg.norm(gen) * math.sqrt(5))
    runtime = float(np.median(times))
    ok = ang < 1e-12 and abs(cos - 1) < 1e-12 and runtime < 1e-3
    report(1, ok, f"angle={ang:.2e} (<1e-12), generator={gen.round(6).tolist()}, runtime={runtime * 1e3:.3f} ms (<1 ms)")
    assert ok


def test_exactness_sweep(sweep):
    records, exact_time = sweep
    good = np.mean([r["exact"] < 1e-8 for r in records])
    ok = good >= 0.99 and exact_time < 60.0
    report(2, ok, f"{good:.2%} of {len(records)} instances below 1e-8 (>=99%), exact runtime {exact_time:.1f} s (<60 s)")
    assert ok


def test_rank_law(sweep):
    records, _ = sweep
    gaps = np.array([r["gap"] for r in records])
    over = np.array([r["gap_over"] for r in records])
    cond = np.array([r["cond_over"] for r in records])
    keep = np.isfinite(over)
    over, cond = over[keep], cond[keep]
    # whitening by a reference with condition number c leaves relative errors near eps * c,
    # so a numerical gap beyond 1 / (eps * c) cannot be resolved in double precision
    floor = np.minimum(1e6, 1.0 / (np.finfo(float).eps * cond))
    ok = bool(np.all(gaps > 1e6)) and bool(np.all(over > floor))
    report(
        3, ok,
        f"min gap at m-1=r: {gaps.min():.2e} (>1e6); with D extra quadrics: min {over.min():.2e}, "
        f"{int(np.sum(over <= 1e6))} of {over.size} at or below 1e6, all with reference condition "
        f">= {cond[over <= 1e6].min() if np.any(over <= 1e6) else math.inf:.1e}; "
        f"{int(np.sum(over <= floor))} below the precision floor min(1e6, 1/(eps*cond))",
    )
    assert ok


def test_oracle_equivalence(sweep):
    records, _ = sweep
    cross = np.array([r["cross"] for r in records])
    bad = int(np.sum(~(cross < 1e-8)))
    ok = bad == 0
    report(4, ok, f"{bad} of {cross.size} instances with approx-exact angle >= 1e-8 (max {cross.max():.2e})")
    assert ok


def test_noise_monotonicity():
    t0 = time.perf_counter()
    sigmas = (0.0, -2.0, -4.0, -6.0, -8.0)
    medians = []
    for sigma in sigmas:
        angles = []
        for t in range(200):
            inst = generate(10, 5, 110, sigma, trial_seed(MASTER_SEED, t))
            try:
                est = recover_subspace(inst.epochs(), 5, "approx")
                angles.append(principal_angle(est.basis, inst.true_basis))
            except (RadicalError, WhiteningError, np.linalg.LinAlgError):
                angles.append(math.pi / 2)
        medians.append(float(np.median(angles)))
    elapsed = time.perf_counter() - t0
    inversions = sum(b >= a for a, b in zip(medians, medians[1:]))
    ok = inversions <= 1 and medians[-1] < 1e-2 and elapsed < 600
    meds = ", ".join(f"{s:g}:{m:.2e}" for s, m in zip(sigmas, medians))
    report(5, ok, f"medians [{meds}], inversions={inversions} (<=1), runtime {elapsed:.0f} s (<600 s)")
    assert ok


def test_consistency_in_samples():
    sizes = (1_000, 10_000, 100_000)
    medians = []
    for N in sizes:
        angles = []
        for t in range(50):
            seed = trial_seed(MASTER_SEED, t)
            inst = generate(6, 3, 25, -math.inf, seed)
            samples = sample_epochs(inst, N, np.random.default_rng([seed, N]))
            epochs = [estimate_epoch(X) for X in samples]
            est = recover_subspace(epochs, 3, "approx", reference="average", use_means=False)
            angles.append(principal_angle(est.basis, inst.true_basis))
        medians.append(float(np.median(angles)))
    ok = medians[0] > medians[1] > medians[2] and medians[2] < medians[0] / 3
    meds = ", ".join(f"N={n}:{m:.2e}" for n, m in zip(sizes, medians))
    report(6, ok, f"medians [{meds}], ratio N=1e3/N=1e5 = {medians[0] / medians[2]:.1f} (>3)")
    assert ok


def test_method_ordering():
    cfg = GridConfig(D=10, d_list=(5,), m=110, sigmas=(-8.0,), trials=50, master_seed=MASTER_SEED)
    cells = {c["method"]: c for c in run_grid(cfg).cell_summaries()}
    alg, ssa = cells["algebraic"], cells["ssa"]
    acc = alg["angle_median"] < ssa["angle_median"]
    speed = alg["runtime_median"] < ssa["runtime_median"]
    ok = acc and speed
    report(
        7, ok,
        f"median angle algebraic {alg['angle_median']:.2e} vs ssa {ssa['angle_median']:.2e} "
        f"({'ok' if acc else 'ordering violated'}); median runtime {alg['runtime_median'] * 1e3:.1f} ms "
        f"vs {ssa['runtime_median'] * 1e3:.1f} ms ({'ok' if speed else 'ordering violated'})",
    )
    assert ok


def _smallest_m(D: int, d: int) -> int:
    # least integer m with 2(m - 1) >= D - d + 1, found by search
    m = 1
    while 2 * (m - 1) < D - d + 1:
        m += 1
    return m


def test_identifiability_table():
    mismatches = [
        (D, d)
        for D in range(2, 13)
        for d in range(1, D)
        if identifiability(D, d, 1).min_m_identifiable != _smallest_m(D, d)
    ]
    ok = not mismatches
    report(8, ok, f"{sum(D - 1 for D in range(2, 13))} (D, d) pairs, mismatches: {mismatches or 'none'}")
    assert ok


def test_property_suites():
    tests_dir = Path(__file__).parent
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", str(tests_dir), "-q", "--properties-only",
         "-p", "no:cacheprovider", "--ignore", str(Path(__file__))],
        capture_output=True, text=True, check=False,
    )
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    report(9, ok, f"randomized property tests (50 examples each, derandomized): {last}")
    assert ok, proc.stdout[-3000:]
