"""Train on one quarter of the torsion range, test on the whole range.

Uses the analytic symmetric dimer surrogate. Prints the active-learning
trace, then RMSE on random test points inside the training quadrant and
over the full torsion circle, and optionally a prediction grid.
"""

import argparse
import math

import numpy as np

from decaf.fingerprint import Featurizer
from decaf.io.config import RunConfig
from decaf.oracles import SymmetricDimerSurrogate
from decaf.regress import StopCriterion, active_learn, predict_set


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tests", type=int, default=150)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--grid", action="store_true", help="also print r,phi,true,predicted on a full grid")
    args = ap.parse_args()

    pes = SymmetricDimerSurrogate()
    fz = Featurizer.from_config(RunConfig())
    pool = [(r, p) for r in np.linspace(2.2, 2.8, 7) for p in np.linspace(0, math.pi / 2, 9)]
    seeds = [i for i, (r, p) in enumerate(pool) if p in (pool[0][1], pool[8][1]) and round(r, 6) in (2.2, 2.4, 2.6, 2.8)]
    E = np.array([pes.energy(*c) for c in pool])

    def feat(c):
        return fz.fingerprints(pes.geometry(*c), "com")

    res = active_learn(lambda c: pes.energy(*c), pool, feat, seeds, StopCriterion(0.02 * E.std(), 40))
    print("iteration,n_train,acquired_r,acquired_phi,max_uncertainty")
    for t in res.trace:
        r, p = pool[t.acquired] if t.acquired is not None else ("", "")
        print(f"{t.iteration},{t.n_train},{r},{p},{t.max_uncertainty:.5g}")

    model = res.components[0]
    rng = np.random.default_rng(args.seed)

    def rmse(points):
        return math.sqrt(np.mean([(predict_set(model, feat(c))[0] - pes.energy(*c)) ** 2 for c in points]))

    quad = rmse([(rng.uniform(2.2, 2.8), rng.uniform(0, math.pi / 2)) for _ in range(args.tests)])
    full = rmse([(rng.uniform(2.2, 2.8), rng.uniform(-math.pi, math.pi)) for _ in range(args.tests)])
    print()
    print("domain,rmse")
    print(f"quadrant,{quad:.6f}")
    print(f"full,{full:.6f}")
    print(f"# ratio {full / quad:.3f}")
    if args.grid:
        print()
        print("r,phi,true,predicted")
        for r in np.linspace(2.2, 2.8, 4):
            for p in np.linspace(-math.pi, math.pi, 25):
                print(f"{r:.3f},{p:.4f},{pes.energy(r, p):.6f},{predict_set(model, feat((r, p)))[0]:.6f}")


if __name__ == "__main__":
    main()
