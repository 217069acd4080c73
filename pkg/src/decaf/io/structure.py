"""Molecular structures and element data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from decaf.errors import DomainError, UnknownElement

ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce "
    "Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn "
    "Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl "
    "Mc Lv Ts Og"
).split()
_ELEMENT_SET = frozenset(ELEMENTS)

# standard atomic weights (u), H through Xe
_MASSES = [
    1.008, 4.0026, 6.94, 9.0122, 10.81, 12.011, 14.007, 15.999, 18.998, 20.180,
    22.990, 24.305, 26.982, 28.085, 30.974, 32.06, 35.45, 39.948, 39.098, 40.078,
    44.956, 47.867, 50.942, 51.996, 54.938, 55.845, 58.933, 58.693, 63.546, 65.38,
    69.723, 72.630, 74.922, 78.971, 79.904, 83.798, 85.468, 87.62, 88.906, 91.224,
    92.906, 95.95, 97.0, 101.07, 102.91, 106.42, 107.87, 112.41, 114.82, 118.71,
    121.76, 127.60, 126.90, 131.29,
]
ATOMIC_MASS = dict(zip(ELEMENTS, _MASSES))


def check_element(symbol: str, line: int | None = None) -> str:
    if symbol not in _ELEMENT_SET:
        raise UnknownElement(line, f"unknown element symbol {symbol!r}")
    return symbol


@dataclass
class Structure:
    """Atoms with absolute positions (Angstrom) and optional labels."""

    symbols: list[str]
    positions: np.ndarray
    forces: np.ndarray | None = None
    energy: float | None = None
    dipole: np.ndarray | None = None
    source: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.symbols = [check_element(s) for s in self.symbols]
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(self.symbols) == 0:
            raise DomainError("structure has no atoms")
        if len(self.positions) != len(self.symbols):
            raise DomainError("one position per atom required")
        if not np.all(np.isfinite(self.positions)):
            raise DomainError("positions must be finite")
        if self.forces is not None:
            self.forces = np.asarray(self.forces, dtype=float).reshape(-1, 3)
            if self.forces.shape != self.positions.shape:
                raise DomainError("one force per atom required")
        if self.dipole is not None:
            self.dipole = np.asarray(self.dipole, dtype=float).reshape(3)

    def __len__(self):
        return len(self.symbols)

    @property
    def masses(self) -> np.ndarray:
        try:
            return np.array([ATOMIC_MASS[s] for s in self.symbols])
        except KeyError as exc:
            raise DomainError(f"no tabulated mass for {exc.args[0]}") from None

    def center_of_mass(self) -> np.ndarray:
        m = self.masses
        return m @ self.positions / m.sum()

    def transformed(self, R=None, shift=None, perm=None) -> "Structure":
        """Copy after ``x -> R x + shift`` and reordering atoms by ``perm``.

        Vector labels are rotated along with the positions.
        """
        R = np.eye(3) if R is None else np.asarray(R, float)
        shift = np.zeros(3) if shift is None else np.asarray(shift, float)
        idx = np.arange(len(self)) if perm is None else np.asarray(perm)
        return Structure(
            [self.symbols[i] for i in idx],
            self.positions[idx] @ R.T + shift,
            None if self.forces is None else self.forces[idx] @ R.T,
            self.energy,
            None if self.dipole is None else R @ self.dipole,
            self.source,
            dict(self.info),
        )
