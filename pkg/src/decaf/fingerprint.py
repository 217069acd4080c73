"""Density-field fingerprints sampled on a composite quadrature grid.

The density around a center is a sum of species Gaussians placed at the
neighbor positions expressed in a canonical frame, each scaled by the
density scaling function of the neighbor's distance from the center::

    rho(r) = sum_i W_c(|x_i|) W_d(|x_i|; R^T x_i - r)

A fingerprint is that density sampled at the grid nodes. Distances are the
weighted L2 norm of the pointwise difference, with the grid's node weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from decaf.errors import DomainError, EmptyNeighborhood, GridMismatch, UnknownSpecies, ZeroFingerprint
from decaf.frame import CanonicalFrame, Kernel, MinisumProblem, SolverSettings, canonical_frame
from decaf.quadrature import QuadratureGrid, composite_grid
from decaf.weights import (
    BellScaling,
    BellWeight,
    ConstantWeight,
    LaplacianWeight,
    SpeciesKernel,
    TentScaling,
    TentWeight,
    UnitScaling,
)

#: relative distance below which fingerprints from different frames are duplicates
DEDUPE_TOLERANCE = 1e-8


@dataclass(frozen=True)
class AtomicNeighborhood:
    """Neighbors of a center, as center-relative displacements inside the cutoff."""

    center: np.ndarray
    species: tuple[str, ...]
    displacements: np.ndarray
    cutoff: float

    def __post_init__(self):
        x = np.asarray(self.displacements, dtype=float).reshape(-1, 3)
        object.__setattr__(self, "displacements", x)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "species", tuple(self.species))
        if len(self.species) != len(x):
            raise DomainError("one species label per neighbor required")
        if not self.cutoff > 0:
            raise DomainError("cutoff must be positive")
        if np.any(np.linalg.norm(x, axis=1) >= self.cutoff):
            raise DomainError("neighbor outside the cutoff")

    @classmethod
    def build(cls, symbols, positions, center, cutoff, exclude=()) -> "AtomicNeighborhood":
        """Keep atoms strictly inside ``cutoff`` of ``center``, minus ``exclude`` indices."""
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        center = np.asarray(center, dtype=float)
        x = positions - center
        keep = np.linalg.norm(x, axis=1) < cutoff
        if len(exclude):
            keep[np.asarray(list(exclude), dtype=int)] = False
        idx = np.flatnonzero(keep)
        return cls(center, tuple(symbols[i] for i in idx), x[idx], float(cutoff))

    def __len__(self):
        return len(self.species)

    @property
    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.displacements, axis=1)

    def transformed(self, R=None, perm=None) -> "AtomicNeighborhood":
        R = np.eye(3) if R is None else np.asarray(R, float)
        idx = np.arange(len(self)) if perm is None else np.asarray(perm)
        return AtomicNeighborhood(
            self.center, tuple(self.species[i] for i in idx), self.displacements[idx] @ R.T, self.cutoff
        )


@dataclass(frozen=True)
class AutoFrame:
    """Frames from kernel minisum; ``weighting`` picks g(r): the density scaling or 1."""

    settings: SolverSettings = SolverSettings()
    kernel: Kernel = Kernel.SA
    weighting: str = "scaling"


@dataclass(frozen=True)
class FixedFrame:
    frame: CanonicalFrame


@dataclass(frozen=True, eq=False)
class Fingerprint:
    values: np.ndarray
    weights: np.ndarray = field(repr=False)
    grid_hash: str
    frame: CanonicalFrame
    center: np.ndarray
    provenance: str = ""

    def __len__(self):
        return len(self.values)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights * self.values**2)))


def minisum_problem(neigh: AtomicNeighborhood, scaling, kernel=Kernel.SA, weighting="scaling") -> MinisumProblem:
    if len(neigh) == 0:
        raise EmptyNeighborhood("no atoms within the cutoff")
    g = scaling if weighting == "scaling" else None
    return MinisumProblem.from_displacements(neigh.displacements, kernel, g)


def neighborhood_frames(neigh: AtomicNeighborhood, scaling, source=AutoFrame()) -> list[CanonicalFrame]:
    if isinstance(source, FixedFrame):
        return [source.frame]
    problem = minisum_problem(neigh, scaling, source.kernel, source.weighting)
    return canonical_frame(problem, source.settings)


def _species_params(neigh, model):
    try:
        kernels = [model[s] for s in neigh.species]
    except KeyError as exc:
        raise UnknownSpecies(f"no density kernel for species {exc.args[0]!r}") from None
    return kernels


def _atom_terms(neigh, model, scaling):
    """Per-atom prefactor ``W_c * c * sigma^-p`` and width ``sigma``."""
    r = neigh.radii
    kernels = _species_params(neigh, model)
    amp = np.array([k.amplitude for k in kernels])
    sigma = np.array([k.width(ri) for k, ri in zip(kernels, r)])
    expo = np.array([k.exponent for k in kernels])
    return scaling(r) * amp * sigma**-expo, sigma


def density_contributions(neigh, frame: CanonicalFrame, model, scaling, points) -> np.ndarray:
    """``(N_atoms, N_points)`` matrix of single-atom density contributions."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(neigh) == 0:
        return np.zeros((0, len(points)))
    pref, sigma = _atom_terms(neigh, model, scaling)
    projected = frame.project(neigh.displacements)
    d2 = np.sum((projected[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    return pref[:, None] * np.exp(-0.5 * d2 / sigma[:, None] ** 2)


def evaluate_density(neigh, frame: CanonicalFrame, model, scaling, r) -> float | np.ndarray:
    """Density at point(s) ``r`` given in the canonical frame."""
    r = np.asarray(r, dtype=float)
    rho = density_contributions(neigh, frame, model, scaling, r.reshape(-1, 3)).sum(axis=0)
    return float(rho[0]) if r.ndim == 1 else rho


def sample_density(neigh, frame, model, scaling, nodes, channels: Sequence[str] | None = None) -> np.ndarray:
    contrib = density_contributions(neigh, frame, model, scaling, nodes)
    if channels is None:
        return contrib.sum(axis=0) if len(contrib) else np.zeros(len(nodes))
    species = np.array(neigh.species, dtype=object)
    parts = []
    for ch in channels:
        mask = species == ch
        parts.append(contrib[mask].sum(axis=0) if mask.any() else np.zeros(len(nodes)))
    return np.concatenate(parts)


def _dedupe(fps: list[Fingerprint]) -> list[Fingerprint]:
    out: list[Fingerprint] = []
    for fp in fps:
        scale = fp.norm
        if not any(fingerprint_distance(fp, o) <= DEDUPE_TOLERANCE * scale for o in out):
            out.append(fp)
    return out


def extract_fingerprint(
    neigh: AtomicNeighborhood,
    model: Mapping[str, SpeciesKernel],
    scaling,
    grid: QuadratureGrid,
    frame_source=AutoFrame(),
    channels: Sequence[str] | None = None,
    provenance: str = "",
) -> list[Fingerprint]:
    """One fingerprint per canonical frame, symmetry duplicates removed.

    With ``channels`` each listed species gets its own density block and
    the blocks are concatenated.
    """
    _species_params(neigh, model)
    frames = neighborhood_frames(neigh, scaling, frame_source)
    weights, ident = grid.weights, grid.identity
    if channels is not None:
        weights = np.tile(grid.weights, len(channels))
        ident = f"{grid.identity}:{','.join(channels)}"
    fps = [
        Fingerprint(
            sample_density(neigh, f, model, scaling, grid.nodes, channels),
            weights,
            ident,
            f,
            neigh.center,
            provenance,
        )
        for f in frames
    ]
    return _dedupe(fps)


def _check_grid(a: Fingerprint, b: Fingerprint):
    if a.grid_hash != b.grid_hash or len(a) != len(b):
        raise GridMismatch(f"fingerprints sampled on different grids ({a.grid_hash} vs {b.grid_hash})")


def fingerprint_distance(a: Fingerprint, b: Fingerprint) -> float:
    _check_grid(a, b)
    diff = a.values - b.values
    return float(np.sqrt(np.sum(a.weights * diff * diff)))


def fingerprint_similarity(a: Fingerprint, b: Fingerprint) -> float:
    """Normalized weighted inner product."""
    _check_grid(a, b)
    na, nb = a.norm, b.norm
    if na == 0 or nb == 0:
        raise ZeroFingerprint("similarity undefined for an all-zero fingerprint")
    s = float(np.sum(a.weights * a.values * b.values)) / (na * nb)
    return min(1.0, max(-1.0, s))


def project_vector(frame: CanonicalFrame, y) -> np.ndarray:
    return frame.project(y)


def unproject_vector(frame: CanonicalFrame, y) -> np.ndarray:
    return frame.unproject(y)


def set_mismatch(A: Sequence[Fingerprint], B: Sequence[Fingerprint]) -> float:
    """Worst relative distance when matching each fingerprint to its nearest partner in the other set."""
    if not A or not B:
        return 0.0 if not A and not B else np.inf
    scale = max(max(f.norm for f in A), max(f.norm for f in B), 1e-300)
    worst = 0.0
    for X, Y in ((A, B), (B, A)):
        for x in X:
            worst = max(worst, min(fingerprint_distance(x, y) for y in Y) / scale)
    return worst


# configured pipeline ----------------------------------------------------------


def build_scaling(kind: str, cutoff: float, t=3.0, a=6.0, b=4.0):
    if kind == "tent":
        return TentScaling(t, cutoff)
    if kind == "bell":
        return BellScaling(a, b, cutoff)
    if kind == "unit":
        return UnitScaling(cutoff)
    raise DomainError(f"unknown scaling kind {kind!r}")


def build_weight(kind: str, cutoff: float, a=6.0, b=4.0, t=3.0, length=1.0):
    if kind == "bell":
        return BellWeight(a, b, cutoff)
    if kind == "tent":
        return TentWeight(t, cutoff)
    if kind == "laplacian":
        return LaplacianWeight(length)
    if kind == "constant":
        return ConstantWeight(cutoff)
    raise DomainError(f"unknown integral weight kind {kind!r}")


@dataclass
class Featurizer:
    """Everything needed to turn a structure and a center into fingerprints."""

    grid: QuadratureGrid
    model: dict[str, SpeciesKernel]
    scaling: Callable
    cutoff: float
    frame_source: AutoFrame = AutoFrame()
    channels: tuple[str, ...] | None = None
    #: "zero" gives an all-zero fingerprint for an empty neighborhood, "raise" raises
    empty: str = "zero"
    #: the RunConfig this featurizer was built from, if any
    config: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_config(cls, cfg) -> "Featurizer":
        sc, wc, mc = cfg.scaling, cfg.weight, cfg.minisum
        scaling = build_scaling(sc.kind, cfg.cutoff, sc.t, sc.a, sc.b)
        weight = build_weight(wc.kind, cfg.cutoff, wc.a, wc.b, wc.t, wc.length)
        grid = composite_grid(
            cfg.grid.radial_order,
            cfg.grid.angular_counts,
            cfg.outer_radius,
            weight,
            cfg.grid.keep_scale_factor,
            weight.spec,
        )
        model = {
            el: SpeciesKernel(p.amplitude, p.sigma0, p.slope, cfg.species_exponent) for el, p in cfg.species.items()
        }
        settings = SolverSettings(
            mc.tolerance, mc.max_iterations, mc.bootstrap_step, mc.max_restarts, mc.pole_clip, mc.n_starts, mc.n_circle_starts
        )
        channels = tuple(sorted(model)) if cfg.channels == "per-species" else None
        return cls(grid, model, scaling, cfg.cutoff, AutoFrame(settings, Kernel(mc.kernel), mc.weighting), channels, config=cfg)

    def neighborhood(self, structure, center) -> AtomicNeighborhood:
        """``center`` is an atom index (that atom is left out), ``"com"``, or a point."""
        exclude = ()
        if isinstance(center, (int, np.integer)):
            point = structure.positions[center]
            exclude = (int(center),)
        elif isinstance(center, str):
            if center != "com":
                raise DomainError(f"unknown center selector {center!r}")
            point = structure.center_of_mass()
        else:
            point = np.asarray(center, dtype=float)
        return AtomicNeighborhood.build(structure.symbols, structure.positions, point, self.cutoff, exclude)

    def fingerprints(self, structure, center, provenance: str = "") -> list[Fingerprint]:
        neigh = self.neighborhood(structure, center)
        return self.from_neighborhood(neigh, provenance)

    def from_neighborhood(self, neigh: AtomicNeighborhood, provenance: str = "") -> list[Fingerprint]:
        try:
            return extract_fingerprint(
                neigh, self.model, self.scaling, self.grid, self.frame_source, self.channels, provenance
            )
        except EmptyNeighborhood:
            if self.empty != "zero":
                raise
        n = len(self.grid) * (1 if self.channels is None else len(self.channels))
        weights = self.grid.weights if self.channels is None else np.tile(self.grid.weights, len(self.channels))
        ident = self.grid.identity if self.channels is None else f"{self.grid.identity}:{','.join(self.channels)}"
        eye = CanonicalFrame(np.eye(3)[0], np.eye(3)[1], np.eye(3)[2])
        return [Fingerprint(np.zeros(n), weights, ident, eye, neigh.center, provenance)]

    @property
    def grid_hash(self) -> str:
        if self.channels is None:
            return self.grid.identity
        return f"{self.grid.identity}:{','.join(self.channels)}"
