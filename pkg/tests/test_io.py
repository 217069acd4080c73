import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decaf.benchmarks import random_structure
from decaf.errors import ParseError, SchemaError, UnknownElement
from decaf.fingerprint import Featurizer, fingerprint_distance
from decaf.io.config import RunConfig, load_config, write_config
from decaf.io.containers import (
    ContainerError,
    dump_fingerprints,
    dump_model,
    fingerprints_csv,
    load_fingerprints,
    load_model,
    read_model,
    write_model,
)
from decaf.io.structure import ELEMENTS, Structure
from decaf.io.xyz import format_xyz, parse_xyz, read_xyz, write_xyz
from decaf.oracles import LennardJones
from decaf.regress import fit_property

# xyz ---------------------------------------------------------------------------

finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def structures(draw):
    n = draw(st.integers(1, 6))
    symbols = draw(st.lists(st.sampled_from(["H", "C", "N", "O", "Fe"]), min_size=n, max_size=n))
    pos = np.array(draw(st.lists(st.tuples(finite, finite, finite), min_size=n, max_size=n)))
    forces = np.array(draw(st.lists(st.tuples(finite, finite, finite), min_size=n, max_size=n))) if draw(st.booleans()) else None
    energy = draw(st.one_of(st.none(), finite))
    dipole = np.array(draw(st.tuples(finite, finite, finite))) if draw(st.booleans()) else None
    tag = draw(st.text("ab =\"'\\", max_size=6))
    return Structure(symbols, pos, forces, energy, dipole, "src name", {"tag": tag} if tag else {})


@settings(max_examples=60, deadline=None)
@given(st.lists(structures(), min_size=1, max_size=3))
def test_xyz_roundtrip(frames):
    back = parse_xyz(format_xyz(frames))
    assert len(back) == len(frames)
    for a, b in zip(frames, back):
        assert a.symbols == b.symbols
        assert np.array_equal(a.positions, b.positions)
        assert (a.forces is None) == (b.forces is None)
        if a.forces is not None:
            assert np.array_equal(a.forces, b.forces)
        assert a.energy == b.energy
        if a.dipole is not None:
            assert np.array_equal(a.dipole, b.dipole)
        assert a.source == b.source
        assert a.info == b.info


def test_plain_xyz_and_file(tmp_path):
    text = "2\nwater fragment\nO 0 0 0\nH 0.96 0 0\n\n1\n\nC 1 2 3\n"
    frames = parse_xyz(text)
    assert [len(f) for f in frames] == [2, 1]
    assert frames[0].forces is None and frames[0].energy is None
    p = tmp_path / "a.xyz"
    write_xyz(p, frames)
    assert [f.symbols for f in read_xyz(p)] == [["O", "H"], ["C"]]


@pytest.mark.parametrize(
    "text,line",
    [
        ("x\n\n", 1),
        ("2\n\nH 0 0 0\n", 4),
        ("1\n\nH 0 0\n", 3),
        ("1\n\nH 0 0 zz\n", 3),
        ("1\n\nH 0 0 nan\n", 3),
        ("2\n\nH 0 0 0 1 1 1\nH 1 0 0\n", 3),
        ('1\ndipole="1 2"\nH 0 0 0\n', 2),
        ("0\n\n", 1),
    ],
)
def test_xyz_errors_carry_line(text, line):
    with pytest.raises(ParseError) as err:
        parse_xyz(text)
    assert err.value.line == line


def test_unknown_element():
    with pytest.raises(UnknownElement):
        parse_xyz("1\n\nXx 0 0 0\n")
    assert "Og" in ELEMENTS


def test_center_of_mass():
    s = Structure(["O", "H", "H"], [[0, 0, 0], [1, 0, 0], [-1, 0, 0]])
    assert np.allclose(s.center_of_mass(), 0)


# config ----------------------------------------------------------------------------


def test_config_defaults_and_roundtrip():
    cfg = load_config("")
    assert cfg == RunConfig()
    assert cfg.outer_radius == pytest.approx(4.8)
    again = load_config(write_config(cfg))
    assert again == cfg
    assert write_config(again) == write_config(cfg)


def test_config_partial_override():
    cfg = load_config('{"cutoff": 5.0, "grid": {"angular_counts": [6, 14, 26]}, "minisum": {"kernel": "ec"}}')
    assert cfg.cutoff == 5.0 and cfg.grid.angular_counts == [6, 14, 26] and cfg.minisum.kernel == "ec"
    assert cfg.weight.kind == "bell"


@pytest.mark.parametrize(
    "doc,path",
    [
        ('{"cutof": 5}', "cutof"),
        ('{"grid": {"radial_order": "3"}}', "grid.radial_order"),
        ('{"minisum": {"kernel": "xx"}}', "minisum.kernel"),
        ('{"grid": {"angular_counts": [14, 26]}}', "grid.angular_counts"),
        ('{"grid": {"outer_radius": 9.0}}', "grid.outer_radius"),
        ('{"gp": {"sigma_bounds": [2, 1]}}', "gp.sigma_bounds"),
        ('{"species": {"C": {"sigma0": "a"}}}', "species.C.sigma0"),
        ('{"version": 2}', "version"),
        ("[1]", "<root>"),
        ("{", "<line 1>"),
    ],
)
def test_config_errors_name_path(doc, path):
    with pytest.raises(SchemaError) as err:
        load_config(doc)
    assert err.value.path == path


# containers ------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def records():
    fz = Featurizer.from_config(RunConfig())
    s = random_structure(np.random.default_rng(0), 8)
    return [(i, fp) for i in range(3) for fp in fz.fingerprints(s, i)]


def test_fingerprint_container_roundtrip(records):
    data = dump_fingerprints(records)
    assert data[:4] == b"DCFP"
    assert struct.unpack("<I", data[4:8]) == (1,)
    back = load_fingerprints(data)
    assert [c for c, _ in back] == [c for c, _ in records]
    for (_, a), (_, b) in zip(records, back):
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.weights, b.weights)
        assert a.grid_hash == b.grid_hash
        assert np.array_equal(a.frame.matrix, b.frame.matrix)
        assert fingerprint_distance(a, b) == 0.0


def test_fingerprint_container_size(records):
    n = len(records[0][1])
    ghash = records[0][1].grid_hash
    expected = 4 + 4 + 2 + len(ghash) + 16 + 8 * n + len(records) * (8 + 8 * (3 + 9 + n))
    assert len(dump_fingerprints(records)) == expected


def test_container_errors(records):
    data = dump_fingerprints(records)
    with pytest.raises(ContainerError):
        load_fingerprints(b"XXXX" + data[4:])
    with pytest.raises(ContainerError):
        load_fingerprints(data[:-5])
    with pytest.raises(ContainerError):
        load_fingerprints(data[:4] + struct.pack("<I", 9) + data[8:])
    with pytest.raises(ContainerError):
        dump_fingerprints([])


def test_fingerprint_csv(records):
    lines = fingerprints_csv(records).splitlines()
    head = lines[0].split(",")
    assert head[:4] == ["center", "bax", "bay", "baz"]
    assert len(head) == 10 + len(records[0][1])
    row = lines[1].split(",")
    assert int(row[0]) == records[0][0]
    assert np.array_equal(np.array(row[10:], float), records[0][1].values)


def test_model_roundtrip(tmp_path):
    fz = Featurizer.from_config(RunConfig())
    rng = np.random.default_rng(3)
    lj = LennardJones(0.1, 1.5)
    train = [random_structure(rng, 3, ("C",), radius=2.0, min_separation=1.2) for _ in range(5)]
    model = fit_property(fz, train, [lj(s)["energy"] for s in train])
    p = tmp_path / "m.dcgp"
    write_model(p, model)
    assert p.read_bytes()[:4] == b"DCGP"
    back = read_model(p)
    q = random_structure(rng, 3, ("C",), radius=2.0, min_separation=1.2)
    assert back.predict(q) == pytest.approx(model.predict(q), rel=1e-12)
    assert back.mode == model.mode
    with pytest.raises(ContainerError):
        load_model(dump_model(model)[:40])


def test_model_needs_config():
    fz = Featurizer.from_config(RunConfig())
    bare = Featurizer(fz.grid, fz.model, fz.scaling, fz.cutoff)
    rng = np.random.default_rng(4)
    train = [random_structure(rng, 3, ("C",), radius=2.0, min_separation=1.2) for _ in range(3)]
    model = fit_property(bare, train, [0.0, 1.0, 2.0])
    with pytest.raises(ContainerError):
        dump_model(model)
