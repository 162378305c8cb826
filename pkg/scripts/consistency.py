"""Recovery error from sampled data as the number of samples per epoch grows."""
import argparse

import numpy as np

from cumalg.bench import principal_angle, recover_subspace
from cumalg.cumulants import estimate_epoch
from cumalg.synthgen import generate, sample_epochs, trial_seed


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=6)
    ap.add_argument("--subdim", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=25)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    print("samples_per_epoch,angle_q25,angle_median,angle_q75")
    for n in args.sizes:
        angles = []
        for t in range(args.trials):
            seed = trial_seed(args.seed, t)
            inst = generate(args.dim, args.subdim, args.epochs, float("-inf"), seed)
            X = sample_epochs(inst, n, np.random.default_rng([seed, n]))
            est = recover_subspace(
                [estimate_epoch(x) for x in X], args.subdim, "approx",
                reference="average", use_means=False,
            )
            angles.append(principal_angle(est.basis, inst.true_basis))
        q = np.percentile(angles, [25, 50, 75])
        print(f"{n},{q[0]:.4e},{q[1]:.4e},{q[2]:.4e}")


if __name__ == "__main__":
    main()
