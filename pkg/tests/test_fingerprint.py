import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decaf.benchmarks import random_rotation, random_structure
from decaf.errors import DomainError, EmptyNeighborhood, GridMismatch, UnknownSpecies, ZeroFingerprint
from decaf.fingerprint import (
    AtomicNeighborhood,
    Featurizer,
    Fingerprint,
    FixedFrame,
    evaluate_density,
    extract_fingerprint,
    fingerprint_distance,
    fingerprint_similarity,
    project_vector,
    set_mismatch,
    unproject_vector,
)
from decaf.frame import CanonicalFrame
from decaf.io.config import RunConfig
from decaf.io.structure import Structure
from decaf.weights import SpeciesKernel, TentScaling

IDENTITY = CanonicalFrame(*np.eye(3))


def density_by_hand(neigh, frame, model, scaling, r):
    """Direct sum over atoms, written independently of the library code."""
    total = 0.0
    for sp, x in zip(neigh.species, neigh.displacements):
        k = model[sp]
        dist = np.linalg.norm(x)
        sigma = k.sigma0 + k.slope * dist
        local = frame.matrix.T @ x
        total += float(scaling(dist)) * k.amplitude * sigma**-k.exponent * math.exp(
            -0.5 * np.sum((local - r) ** 2) / sigma**2
        )
    return total


def test_density_matches_direct_sum():
    rng = np.random.default_rng(0)
    model = {"C": SpeciesKernel(1.0, 1.2, 0.2), "H": SpeciesKernel(0.75, 0.9, 0.15, 2.0)}
    neigh = AtomicNeighborhood(np.zeros(3), ("C", "H", "H"), rng.uniform(-2, 2, (3, 3)), 6.0)
    frame = CanonicalFrame.from_matrix(random_rotation(rng))
    sc = TentScaling(3, 6.0)
    for r in rng.normal(size=(10, 3)):
        assert evaluate_density(neigh, frame, model, sc, r) == pytest.approx(density_by_hand(neigh, frame, model, sc, r), rel=1e-12)


def test_single_atom_density_value():
    model = {"C": SpeciesKernel(2.0, 0.5, 0.0)}
    neigh = AtomicNeighborhood(np.zeros(3), ("C",), [[1.0, 0, 0]], 4.0)
    sc = TentScaling(3, 4.0)
    # W_c(1) = 0.75^3, peak value c / sigma
    assert evaluate_density(neigh, IDENTITY, model, sc, [1.0, 0, 0]) == pytest.approx(0.75**3 * 4.0)


def test_neighborhood_validation():
    with pytest.raises(DomainError):
        AtomicNeighborhood(np.zeros(3), ("C",), [[7.0, 0, 0]], 6.0)
    with pytest.raises(DomainError):
        AtomicNeighborhood(np.zeros(3), ("C", "H"), [[1.0, 0, 0]], 6.0)


def test_build_applies_cutoff_and_exclusion():
    pos = np.array([[0, 0, 0], [1, 0, 0], [0, 5.9, 0], [0, 0, 6.0]], float)
    n = AtomicNeighborhood.build(["C", "H", "O", "N"], pos, pos[0], 6.0, exclude=(0,))
    assert n.species == ("H", "O")


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1), st.booleans())
def test_rotation_invariance(n, seed, improper):
    fz = Featurizer.from_config(RunConfig())
    rng = np.random.default_rng(seed)
    s = random_structure(rng, n)
    R = random_rotation(rng)
    if improper:
        R = -R
    a = fz.fingerprints(s, "com")
    b = fz.fingerprints(s.transformed(R), "com")
    assert set_mismatch(a, b) < 1e-6


def test_translation_bit_identical(featurizer):
    s = random_structure(np.random.default_rng(1), 12)
    a = featurizer.fingerprints(s, 3)
    b = featurizer.fingerprints(s.transformed(shift=[2.0, -3.0, 0.5]), 3)
    # displacements change only through rounding of x - c
    assert set_mismatch(a, b) < 1e-12


def test_permutation_invariance(featurizer):
    rng = np.random.default_rng(2)
    s = random_structure(rng, 15)
    perm = rng.permutation(15)
    a = featurizer.fingerprints(s, "com")
    b = featurizer.fingerprints(s.transformed(perm=perm), "com")
    assert set_mismatch(a, b) < 1e-12


def test_cutoff_continuity(featurizer):
    # an atom crossing the cutoff changes the fingerprint by O(delta^t)
    base = np.array([[1.0, 0.2, 0.0], [-0.4, 1.1, 0.3], [0.2, -0.5, 1.2]])
    fixed = FixedFrame(IDENTITY)
    rc = featurizer.cutoff
    ref = extract_fingerprint(AtomicNeighborhood(np.zeros(3), ("C",) * 3, base, rc), featurizer.model, featurizer.scaling, featurizer.grid, fixed)[0]
    for delta in (1e-2, 1e-3):
        x = np.vstack([base, [rc - delta, 0, 0]])
        fp = extract_fingerprint(AtomicNeighborhood(np.zeros(3), ("C",) * 4, x, rc), featurizer.model, featurizer.scaling, featurizer.grid, fixed)[0]
        assert fingerprint_distance(fp, ref) < 10 * (delta / rc) ** 3


def test_empty_neighborhood_zero_or_raise(featurizer):
    lone = Structure(["C"], [[0.0, 0, 0]])
    (fp,) = featurizer.fingerprints(lone, 0)
    assert fp.norm == 0.0 and len(fp) == len(featurizer.grid)
    strict = Featurizer(featurizer.grid, featurizer.model, featurizer.scaling, featurizer.cutoff, empty="raise")
    with pytest.raises(EmptyNeighborhood):
        strict.fingerprints(lone, 0)


def test_unknown_species(featurizer):
    s = Structure(["C", "Fe"], [[0, 0, 0], [1.5, 0, 0]])
    with pytest.raises(UnknownSpecies):
        featurizer.fingerprints(s, 0)


def test_symmetric_neighborhood_dedupes_to_one(featurizer):
    x = np.vstack([np.eye(3), -np.eye(3)]) * 1.5
    fps = featurizer.fingerprints(Structure(["C"] * 6, x), np.zeros(3))
    assert len(fps) == 1


def test_distance_and_similarity(featurizer):
    rng = np.random.default_rng(3)
    a = featurizer.fingerprints(random_structure(rng, 8), "com")[0]
    b = featurizer.fingerprints(random_structure(rng, 8), "com")[0]
    d = fingerprint_distance(a, b)
    ref = math.sqrt(np.sum(a.weights * (a.values - b.values) ** 2))
    assert d == pytest.approx(ref, rel=1e-12)
    assert fingerprint_distance(a, a) == 0.0
    assert fingerprint_similarity(a, a) == pytest.approx(1.0)
    assert 0.0 <= fingerprint_similarity(a, b) <= 1.0


def test_zero_fingerprint_similarity(featurizer):
    zero = featurizer.fingerprints(Structure(["C"], [[0.0, 0, 0]]), 0)[0]
    other = featurizer.fingerprints(Structure(["C", "C"], [[0.0, 0, 0], [1.2, 0, 0]]), 0)[0]
    with pytest.raises(ZeroFingerprint):
        fingerprint_similarity(zero, other)
    assert fingerprint_distance(zero, other) == pytest.approx(other.norm)


def test_grid_mismatch(featurizer):
    cfg = RunConfig()
    cfg.grid.angular_counts = [6, 14, 26]
    other = Featurizer.from_config(cfg)
    s = Structure(["C", "C"], [[0.0, 0, 0], [1.2, 0, 0]])
    with pytest.raises(GridMismatch):
        fingerprint_distance(featurizer.fingerprints(s, 0)[0], other.fingerprints(s, 0)[0])


def test_per_species_channels():
    cfg = RunConfig()
    cfg.channels = "per-species"
    fz = Featurizer.from_config(cfg)
    s = Structure(["C", "H", "O"], [[0.0, 0, 0], [1.0, 0, 0], [0, 1.3, 0.2]])
    (fp,) = fz.fingerprints(s, 0)
    n = len(fz.grid)
    assert len(fp) == n * len(cfg.species)
    blocks = dict(zip(sorted(cfg.species), fp.values.reshape(-1, n)))
    assert np.all(blocks["C"] == 0) and np.all(blocks["N"] == 0)
    assert blocks["H"].max() > 0 and blocks["O"].max() > 0


def test_vector_projection_roundtrip():
    f = CanonicalFrame.from_matrix(random_rotation(np.random.default_rng(4)) @ np.diag([1, 1, -1.0]))
    y = np.array([0.3, -1.2, 2.0])
    assert np.allclose(unproject_vector(f, project_vector(f, y)), y)


def test_biatomic_distance_grows_with_separation(featurizer):
    ref = featurizer.fingerprints(Structure(["N", "N"], [[0, 0, 0], [1.0, 0, 0]]), 0)[0]
    d = [
        fingerprint_distance(ref, featurizer.fingerprints(Structure(["N", "N"], [[0, 0, 0], [r, 0, 0]]), 0)[0])
        for r in np.linspace(1.0, 3.0, 9)
    ]
    assert d[0] == 0.0
    assert np.all(np.diff(d) > 0)


def test_fingerprint_norm():
    fp = Fingerprint(np.array([1.0, 2.0]), np.array([0.5, 0.25]), "h", IDENTITY, np.zeros(3))
    assert fp.norm == pytest.approx(math.sqrt(1.5))
