"""Size and power of the instrument-equality Wald test on the two-instrument designs."""
import argparse

import numpy as np

from complier_dml.crossfit import EstimatorConfig
from complier_dml.dictionary import DictionarySpec
from complier_dml.inference import instrument_equality_test
from complier_dml.moments import TargetSpec
from complier_dml.simlab import TwoInstrumentDesign, generate_two_instruments


def rejection_rate(shifted, reps, n, seed, alpha):
    target = TargetSpec("characteristics", (0,))
    spec = DictionarySpec(k=1, degree=3)
    hits = 0
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(reps)):
        data, z2 = generate_two_instruments(TwoInstrumentDesign(n, shifted),
                                            np.random.default_rng(child))
        hits += instrument_equality_test(data, z2, target, spec, EstimatorConfig(seed=r),
                                         alpha).reject
    return hits / reps


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=400)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=8)
    args = ap.parse_args()
    for shifted in (False, True):
        rate = rejection_rate(shifted, args.reps, args.n, args.seed, args.alpha)
        print(f"{'shifted' if shifted else 'null':<8} rejection rate {rate:.4f}")


if __name__ == "__main__":
    main()
