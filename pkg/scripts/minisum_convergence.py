"""Mean minisum iterations per guess for each configuration class, both kernels.

Prints CSV: class, kernel, reps, success rate, mean iterations, mean
guesses, reference value, ratio.
"""

import argparse
import csv
import sys

from decaf.benchmarks import CONVERGENCE_CASES, convergence_run
from decaf.frame import Kernel, SolverSettings


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tolerance", type=float, default=1e-14)
    ap.add_argument("--bootstrap-step", type=float, default=0.01)
    args = ap.parse_args()
    settings = SolverSettings(tolerance=args.tolerance, bootstrap_step=args.bootstrap_step)

    out = csv.writer(sys.stdout)
    out.writerow(["class", "kernel", "reps", "success", "mean_iterations", "mean_guesses", "reference", "ratio"])
    for cls in CONVERGENCE_CASES:
        for kernel in (Kernel.SA, Kernel.EC):
            st = convergence_run(cls, kernel, args.reps, args.seed, settings)
            out.writerow(
                [cls, kernel.value, st.reps, f"{st.success_rate:.3f}", f"{st.mean_iterations:.2f}",
                 f"{st.mean_guesses:.3f}", st.reference_value, f"{st.mean_iterations / st.reference_value:.2f}"]
            )


if __name__ == "__main__":
    main()
