"""Median stability across fold counts and balancing-weight penalty multipliers."""
import argparse

import numpy as np

from complier_dml.simlab import MCConfig, run_monte_carlo


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    settings = {f"L={L}": dict(folds=L) for L in (2, 5, 10)}
    settings.update({f"mult={m:g}": dict(lambda_multiplier=m) for m in (0.5, 2.0)})
    meds = {}
    for label, kw in settings.items():
        mc = run_monte_carlo(MCConfig(reps=args.reps, seed=args.seed, threads=args.threads, **kw))
        meds[label] = np.concatenate([mc.medians("auto", "beta"), mc.medians("auto", "delta")])
        print(label, np.round(meds[label], 4))
    by_folds = np.array([meds[k] for k in ("L=2", "L=5", "L=10")])
    by_mult = np.array([meds[k] for k in ("mult=0.5", "L=5", "mult=2")])
    print(f"max spread across folds: {np.ptp(by_folds, axis=0).max():.4f}")
    print(f"max spread across multipliers: {np.ptp(by_mult, axis=0).max():.4f}")


if __name__ == "__main__":
    main()
