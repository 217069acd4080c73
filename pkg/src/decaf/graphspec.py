"""Spectra of the atom-bridged node graph (experimental).

Atoms and a fixed set of nodes form a bipartite incidence matrix
``E[i, j] = k(x_i, z_j)``. The node graph has adjacency ``A = E^T E``; its
symmetric normalized Laplacian has a spectrum that is unchanged by
permuting atoms and only mildly perturbed by rotating them against the
fixed nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from decaf.errors import AllDisconnected, DomainError

#: nodes whose degree falls below this are treated as disconnected
ZERO_DEGREE = 1e-300


@dataclass(frozen=True)
class GaussianKernel:
    amplitude: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.amplitude > 0 and self.sigma > 0):
            raise DomainError("kernel amplitude and width must be positive")

    def __call__(self, d2):
        return self.amplitude / self.sigma * np.exp(-0.5 * d2 / self.sigma**2)


def incidence(positions, nodes, kernel=GaussianKernel()) -> np.ndarray:
    """``(N_atoms, N_nodes)`` matrix of kernel values between atoms and nodes."""
    x = np.asarray(positions, dtype=float).reshape(-1, 3)
    z = np.asarray(nodes, dtype=float).reshape(-1, 3)
    d2 = np.sum((x[:, None, :] - z[None, :, :]) ** 2, axis=-1)
    return kernel(d2)


@dataclass(frozen=True)
class Spectrum:
    values: np.ndarray
    #: indices of nodes dropped for having zero degree
    dropped: tuple[int, ...]


def normalized_laplacian(E) -> tuple[np.ndarray, tuple[int, ...]]:
    E = np.asarray(E, dtype=float)
    A = E.T @ E
    deg = A.sum(axis=1)
    keep = deg > ZERO_DEGREE
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    if not keep.any():
        raise AllDisconnected("every node has zero degree")
    A = A[np.ix_(keep, keep)]
    s = 1.0 / np.sqrt(deg[keep])
    L = np.eye(len(A)) - s[:, None] * A * s[None, :]
    return 0.5 * (L + L.T), dropped


def laplacian_spectrum(E, count: int | None = None) -> Spectrum:
    """Smallest ``count`` eigenvalues, ascending, with the trivial zero removed."""
    L, dropped = normalized_laplacian(E)
    ev = linalg.eigvalsh(L)
    ev = ev[1:]  # the constant-degree vector is always in the null space
    if count is not None:
        if count < 0:
            raise DomainError("count must be nonnegative")
        ev = ev[:count]
    return Spectrum(ev, dropped)


def rotation_perturbation(positions, nodes, R, count, kernel=GaussianKernel()) -> float:
    """Largest relative change of the smallest ``count`` eigenvalues when atoms are rotated."""
    x = np.asarray(positions, dtype=float)
    a = laplacian_spectrum(incidence(x, nodes, kernel), count).values
    b = laplacian_spectrum(incidence(x @ np.asarray(R).T, nodes, kernel), count).values
    n = min(len(a), len(b))
    return float(np.max(np.abs(a[:n] - b[:n]) / np.maximum(np.abs(a[:n]), 1e-300)))
