"""Analytic and external label oracles for desk-scale experiments.

Every oracle maps a Structure to ``{"energy": float, "forces": (N, 3)}``.
The analytic ones are sums of pair potentials, so they are exactly
invariant under rotations, reflections, translations and permutations of
like atoms.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass, field

import numpy as np

from decaf.errors import DomainError, OracleFailure
from decaf.io.structure import Structure
from decaf.io.xyz import format_xyz, parse_xyz


def _pair_terms(structure: Structure, pair_fn):
    x = structure.positions
    n = len(x)
    energy = 0.0
    forces = np.zeros_like(x)
    for i in range(n):
        for j in range(i + 1, n):
            d = x[j] - x[i]
            r = float(np.linalg.norm(d))
            if r == 0.0:
                raise DomainError(f"atoms {i} and {j} coincide")
            v, dv = pair_fn(structure.symbols[i], structure.symbols[j], r)
            energy += v
            f = dv * d / r  # force on i is +dV/dr * unit(j - i)
            forces[i] += f
            forces[j] -= f
    return {"energy": energy, "forces": forces}


@dataclass(frozen=True)
class LennardJones:
    epsilon: float = 1.0
    sigma: float = 1.0

    def pair(self, a, b, r):
        sr6 = (self.sigma / r) ** 6
        v = 4.0 * self.epsilon * (sr6 * sr6 - sr6)
        dv = 4.0 * self.epsilon * (-12.0 * sr6 * sr6 + 6.0 * sr6) / r
        return v, dv

    def __call__(self, structure):
        return _pair_terms(structure, self.pair)


@dataclass(frozen=True)
class Morse:
    depth: float = 1.0
    a: float = 1.0
    r0: float = 1.0

    def pair(self, a, b, r):
        e = math.exp(-self.a * (r - self.r0))
        v = self.depth * (1.0 - e) ** 2 - self.depth
        dv = 2.0 * self.depth * self.a * e * (1.0 - e)
        return v, dv

    def __call__(self, structure):
        return _pair_terms(structure, self.pair)


def _default_dimer_pairs():
    return {
        ("O", "O"): Morse(0.6, 1.6, 2.45),
        ("H", "O"): Morse(0.25, 2.2, 1.6),
        ("H", "H"): Morse(0.05, 1.8, 2.2),
    }


@dataclass(frozen=True)
class SymmetricDimerSurrogate:
    """Analytic stand-in for a head-to-head protonated water dimer.

    ``geometry(r, phi)`` places the oxygens at ``(+-r/2, 0, 0)``, a shared
    proton at the origin and each water's two outer hydrogens in a plane
    containing the O-O axis; ``phi`` is the dihedral between those planes.
    The energy is a sum of intermolecular Morse pairs (pairs inside one
    water are rigid and skipped) plus a torsion term
    ``torsion * sin(phi)^2 * exp(-decay * (r - 2.2))`` with ``phi`` measured
    from the hydrogen positions. Both parts are unchanged under
    ``phi -> -phi`` (a mirror image) and ``phi -> phi + pi`` (swapping the
    hydrogens of one water), so ``[0, pi/2]`` is a fundamental domain.
    Forces are central differences of the energy.
    """

    oh_length: float = 0.97
    half_angle: float = math.radians(56.0)
    torsion: float = 0.6
    decay: float = 2.0
    pairs: dict = field(default_factory=_default_dimer_pairs)
    fd_step: float = 1e-5

    def geometry(self, r: float, phi: float) -> Structure:
        b, a = self.oh_length, self.half_angle
        o1 = np.array([-r / 2, 0.0, 0.0])
        o2 = np.array([r / 2, 0.0, 0.0])
        n1 = np.array([0.0, 1.0, 0.0])
        n2 = np.array([0.0, math.cos(phi), math.sin(phi)])
        ax = np.array([1.0, 0.0, 0.0])
        hs = [
            o1 + b * (-math.cos(a) * ax + math.sin(a) * n1),
            o1 + b * (-math.cos(a) * ax - math.sin(a) * n1),
            o2 + b * (math.cos(a) * ax + math.sin(a) * n2),
            o2 + b * (math.cos(a) * ax - math.sin(a) * n2),
        ]
        pos = np.vstack([o1, o2, np.zeros(3), hs])
        s = Structure(["O", "O", "H", "H", "H", "H", "H"], pos, source=f"r={r:.6g},phi={phi:.6g}")
        s.info["molecule"] = "1 2 0 1 1 2 2"
        return s

    def pair(self, a, b, r):
        return self.pairs[tuple(sorted((a, b)))].pair(a, b, r)

    @staticmethod
    def _tags(structure):
        mol = structure.info.get("molecule")
        if mol is None:
            raise DomainError("dimer surrogate needs the 'molecule' tags written by geometry()")
        tags = [int(t) for t in str(mol).split()]
        if len(tags) != len(structure):
            raise DomainError("one molecule tag per atom required")
        return tags

    def _energy(self, symbols, x, tags) -> float:
        energy = 0.0
        for i in range(len(x)):
            for j in range(i + 1, len(x)):
                if tags[i] == tags[j] and tags[i] != 0:
                    continue
                energy += self.pair(symbols[i], symbols[j], float(np.linalg.norm(x[j] - x[i])))[0]
        ox = [i for i, t in enumerate(tags) if symbols[i] == "O"]
        o1, o2 = (ox[0], ox[1]) if tags[ox[0]] == 1 else (ox[1], ox[0])
        axis = x[o2] - x[o1]
        r = float(np.linalg.norm(axis))
        axis /= r
        u = []
        for m in (1, 2):
            h = [i for i, t in enumerate(tags) if t == m and symbols[i] == "H"]
            v = x[h[0]] - x[h[1]]
            v = v - (v @ axis) * axis
            u.append(v / np.linalg.norm(v))
        cos_phi = float(u[0] @ u[1])
        return energy + self.torsion * (1.0 - cos_phi**2) * math.exp(-self.decay * (r - 2.2))

    def __call__(self, structure):
        tags = self._tags(structure)
        x = np.array(structure.positions, dtype=float)
        energy = self._energy(structure.symbols, x, tags)
        forces = np.zeros_like(x)
        h = self.fd_step
        for i in range(len(x)):
            for k in range(3):
                x[i, k] += h
                up = self._energy(structure.symbols, x, tags)
                x[i, k] -= 2 * h
                down = self._energy(structure.symbols, x, tags)
                x[i, k] += h
                forces[i, k] = -(up - down) / (2 * h)
        return {"energy": energy, "forces": forces}

    def energy(self, r, phi) -> float:
        s = self.geometry(r, phi)
        return self._energy(s.symbols, s.positions, self._tags(s))


@dataclass(frozen=True)
class ExternalCommand:
    """Child process reads one extended-XYZ frame on stdin and prints one labeled frame."""

    command: tuple[str, ...]
    timeout: float = 600.0

    def __call__(self, structure):
        try:
            proc = subprocess.run(
                list(self.command),
                input=format_xyz([structure]),
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise OracleFailure(structure.source, exc) from exc
        if proc.returncode != 0:
            raise OracleFailure(structure.source, f"exit {proc.returncode}: {proc.stderr.strip()}")
        frames = parse_xyz(proc.stdout)
        if len(frames) != 1:
            raise OracleFailure(structure.source, f"expected one frame on stdout, got {len(frames)}")
        out = frames[0]
        return {"energy": out.energy, "forces": out.forces, "dipole": out.dipole}


def dimer(symbol: str, r: float) -> Structure:
    return Structure([symbol, symbol], np.array([[0.0, 0.0, 0.0], [r, 0.0, 0.0]]), source=f"r={r:.6g}")


def make_oracle(spec: str):
    """Parse ``lj[:eps,sigma]``, ``morse[:D,a,r0]``, ``dimer`` or ``external:CMD ...``."""
    kind, _, rest = spec.partition(":")
    if kind == "external":
        if not rest.strip():
            raise DomainError("external oracle needs a command")
        return ExternalCommand(tuple(rest.split()))
    params = [float(p) for p in rest.split(",")] if rest else []
    if kind == "lj":
        return LennardJones(*params)
    if kind == "morse":
        return Morse(*params)
    if kind == "dimer":
        return SymmetricDimerSurrogate()
    raise DomainError(f"unknown oracle {spec!r}")
