"""Active learning of the N2-style LJ dimer force for every scaling x weight pair.

Seeds at r = 1.0 and 6.0, greedy max-variance acquisition, stop when twice
the largest posterior std drops below 0.1. Prints a summary CSV, and with
--trace the per-iteration uncertainty of every run.
"""

import argparse
import csv
import sys

import numpy as np

from decaf.fingerprint import Featurizer
from decaf.io.config import RunConfig
from decaf.oracles import LennardJones, dimer
from decaf.regress import HyperSearch, StopCriterion, active_learn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epsilon", type=float, default=0.1)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--pool", type=int, default=256)
    ap.add_argument("--threshold", type=float, default=0.1)
    ap.add_argument("--trace", action="store_true")
    args = ap.parse_args()

    lj = LennardJones(args.epsilon, args.sigma)
    rs = np.unique(np.concatenate([np.linspace(0.9, 6.0, args.pool), [1.0, 6.0]]))
    pool = [dimer("N", r) for r in rs]
    seeds = [int(np.argmin(np.abs(rs - 1.0))), int(np.argmin(np.abs(rs - 6.0)))]

    out = csv.writer(sys.stdout)
    out.writerow(["scaling", "weight", "acquired", "final_uncertainty", "max_error"] + (["trace"] if args.trace else []))
    for scaling in ("tent", "bell"):
        for weight in ("bell", "tent", "laplacian", "constant"):
            cfg = RunConfig()
            cfg.scaling.kind, cfg.weight.kind = scaling, weight
            fz = Featurizer.from_config(cfg)
            res = active_learn(
                lambda s: lj(s)["forces"][0],
                pool,
                lambda s: fz.fingerprints(s, 0),
                seeds,
                StopCriterion(args.threshold, 60),
                HyperSearch(),
                vector_labels=True,
            )
            err = 0.0
            for s in pool:
                f = fz.fingerprints(s, 0)[0]
                pred = np.array([m.predict_values(f.values[None])[0][0] for m in res.components])
                err = max(err, float(np.max(np.abs(f.frame.unproject(pred) - lj(s)["forces"][0]))))
            row = [scaling, weight, len(res.train_indices) - 2, f"{res.final_uncertainty:.4f}", f"{err:.4f}"]
            if args.trace:
                row.append(" ".join(f"{t.max_uncertainty:.4g}" for t in res.trace))
            out.writerow(row)


if __name__ == "__main__":
    main()
