"""Median recovery error and runtime of the algebraic estimator across disturbance levels."""
import argparse
import csv
import math
import sys
import time

import numpy as np

from cumalg.bench import principal_angle, recover_subspace
from cumalg.subspace import RadicalError
from cumalg.synthgen import generate, trial_seed


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--subdim", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=110)
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0, -2, -4, -6, -8])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--method", choices=("approx", "exact", "ssa"), default="approx")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["sigma", "angle_q25", "angle_median", "angle_q75", "runtime_median_s", "failed"])
    for sigma in args.sigmas:
        angles, times, failed = [], [], 0
        for t in range(args.trials):
            seed = trial_seed(args.seed, t)
            inst = generate(args.dim, args.subdim, args.epochs, sigma, seed)
            t0 = time.perf_counter()
            try:
                est = recover_subspace(inst.epochs(), args.subdim, args.method, seed=seed)
            except (RadicalError, ValueError, np.linalg.LinAlgError):
                failed += 1
                continue
            times.append(time.perf_counter() - t0)
            angles.append(principal_angle(est.basis, inst.true_basis))
        q = np.percentile(angles, [25, 50, 75]) if angles else [math.nan] * 3
        out.writerow([sigma, *(f"{v:.4e}" for v in q), f"{np.median(times) if times else math.nan:.4e}", failed])


if __name__ == "__main__":
    main()
