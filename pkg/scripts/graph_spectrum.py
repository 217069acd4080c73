"""Smallest normalized-Laplacian eigenvalues of the atom-node graph (experimental).

For random clusters, prints the eigenvalues, the largest change under an
atom permutation and the relative change under a random rotation of the
atoms against the fixed nodes.
"""

import argparse
import csv
import sys

import numpy as np

from decaf.benchmarks import random_rotation, random_structure
from decaf.fingerprint import Featurizer
from decaf.graphspec import GaussianKernel, incidence, laplacian_spectrum, rotation_perturbation
from decaf.io.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--structures", type=int, default=20)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    kernel = GaussianKernel(1.0, args.sigma)
    nodes = np.vstack([Featurizer.from_config(RunConfig()).grid.nodes, np.zeros(3)])
    out = csv.writer(sys.stdout)
    out.writerow(["structure", "atoms", "permutation_diff", "rotation_rel_change"] + [f"ev{k}" for k in range(args.count)])
    for i in range(args.structures):
        x = random_structure(rng, int(rng.integers(3, 20))).positions
        x -= x.mean(axis=0)
        ev = laplacian_spectrum(incidence(x, nodes, kernel), args.count).values
        perm = laplacian_spectrum(incidence(x[rng.permutation(len(x))], nodes, kernel), args.count).values
        rot = rotation_perturbation(x, nodes, random_rotation(rng), args.count, kernel)
        out.writerow([i, len(x), f"{np.max(np.abs(ev - perm)):.2e}", f"{rot:.4f}"] + [f"{v:.6f}" for v in ev])


if __name__ == "__main__":
    main()
