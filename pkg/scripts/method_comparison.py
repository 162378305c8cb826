"""Algebraic estimator against the optimization baseline on a benchmark grid.

Writes results.csv and summary.json to --out and prints one line per cell.
"""
import argparse
from pathlib import Path

from cumalg.bench import benchmark_grid, run_grid
from cumalg.ssa import SSAConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--d", type=int, nargs="+", default=list(range(1, 10)))
    ap.add_argument("--sigmas", type=float, nargs="+", default=[-8, -2, 0])
    ap.add_argument("--restarts", type=int, default=SSAConfig().restarts)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("comparison"))
    args = ap.parse_args(argv)

    cfg = benchmark_grid(
        trials=args.trials, d_list=tuple(args.d), sigmas=tuple(args.sigmas),
        master_seed=args.seed, ssa=SSAConfig(restarts=args.restarts),
    )
    run = run_grid(cfg, jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "results.csv").write_text(run.csv_text())
    (args.out / "summary.json").write_text(run.summary_json() + "\n")

    cells = {(c["d"], c["sigma"], c["method"]): c for c in run.cell_summaries()}
    print(f"{'d':>2} {'sigma':>6} {'alg median':>11} {'ssa median':>11} {'alg ms':>8} {'ssa ms':>8}")
    for d in cfg.d_list:
        for s in cfg.sigmas:
            a, b = cells.get((d, s, "algebraic")), cells.get((d, s, "ssa"))
            if a is None or b is None:
                continue
            print(
                f"{d:>2} {s:>6g} {a['angle_median']:>11.3e} {b['angle_median']:>11.3e} "
                f"{a['runtime_median'] * 1e3:>8.1f} {b['runtime_median'] * 1e3:>8.1f}"
            )


if __name__ == "__main__":
    main()
