"""Reference point configurations and their symmetry groups.

Used by the acceptance suite and the experiment scripts: the minisum
convergence classes, closed symmetry groups for the symmetric shapes, and
a random-structure generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from decaf.errors import NotConverged
from decaf.frame import Kernel, MinisumProblem, SolverSettings, solve_minisum
from decaf.io.structure import Structure

#: mean iterations per guess reported for each class, (square angle, exp. cosine)
CONVERGENCE_CASES = {
    "single": (8.8, 7.9),
    "two-acute": (7.1, 7.7),
    "two-obtuse": (6.1, 6.3),
    "two-antipodal": (6.0, 5.6),
    "c3": (6.2, 6.3),
    "c4": (5.6, 6.9),
    "tetrahedron": (10.6, 7.7),
    "octahedron": (11.7, 9.4),
    "s4": (17.9, 23.1),
    "s6": (14.7, 18.0),
    "random-2d-10": (7.2, 8.9),
    "random-3d-50": (16.9, 14.4),
}

# polar angle of the improper-rotation shapes; away from the cubic values
# so that S4 and S6 are the full symmetry, not a subgroup of Td or Oh
_IMPROPER_POLAR = math.radians(70.0)


def _rz(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


_MIRROR_Z = np.diag([1.0, 1.0, -1.0])
_MIRROR_Y = np.diag([1.0, -1.0, 1.0])
_CYCLE = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def _ring(n, polar=math.pi / 2, alternate=False):
    k = np.arange(n)
    theta = 2 * math.pi * k / n
    z = math.cos(polar) * (np.where(k % 2 == 0, 1.0, -1.0) if alternate else 1.0)
    r = math.sin(polar)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), np.broadcast_to(z, n)])


SHAPES = {
    "c3": (_ring(3), [_rz(2 * math.pi / 3), _MIRROR_Z, np.diag([1.0, -1.0, -1.0])]),
    "c4": (_ring(4), [_rz(math.pi / 2), _MIRROR_Z, np.diag([1.0, -1.0, -1.0])]),
    "tetrahedron": (
        np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3.0),
        [_CYCLE, np.diag([-1.0, -1.0, 1.0]), _MIRROR_Z @ _rz(math.pi / 2)],
    ),
    "octahedron": (np.vstack([np.eye(3), -np.eye(3)]), [_rz(math.pi / 2), _CYCLE, -np.eye(3)]),
    "s4": (_ring(4, _IMPROPER_POLAR, alternate=True), [_MIRROR_Z @ _rz(math.pi / 2), _MIRROR_Y]),
    "s6": (_ring(6, _IMPROPER_POLAR, alternate=True), [_MIRROR_Z @ _rz(math.pi / 3), _MIRROR_Y]),
}


def shape(name: str) -> np.ndarray:
    return SHAPES[name][0].copy()


def symmetry_group(name: str) -> list[np.ndarray]:
    """Closure of the shape's generators under multiplication."""
    group = [np.eye(3)]
    frontier = [np.eye(3)]
    gens = SHAPES[name][1]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                m = g @ a
                if not any(np.allclose(m, b, atol=1e-9) for b in group):
                    group.append(m)
                    nxt.append(m)
        frontier = nxt
    return group


def random_rotation(rng) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def random_unit(rng, n=None) -> np.ndarray:
    v = rng.standard_normal((1 if n is None else n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v[0] if n is None else v


def convergence_problem(cls: str, kernel: Kernel, rng) -> MinisumProblem:
    """One randomly oriented instance of a convergence class.

    Symmetric shapes carry unit weights; random classes draw radii
    uniformly in [0.5, 1] and use them as weights.
    """
    R = random_rotation(rng)
    if cls in SHAPES:
        E = shape(cls) @ R.T
        return MinisumProblem(E, np.ones(len(E)), kernel)
    if cls == "single":
        E = random_unit(rng, 1)
    elif cls in ("two-acute", "two-obtuse", "two-antipodal"):
        lo, hi = {"two-acute": (0.0, math.pi / 2), "two-obtuse": (math.pi / 2, math.pi)}.get(cls, (math.pi, math.pi))
        t = rng.uniform(lo, hi) if hi > lo else math.pi
        E = np.array([[1.0, 0.0, 0.0], [math.cos(t), math.sin(t), 0.0]]) @ R.T
    elif cls == "random-2d-10":
        t = rng.uniform(0.0, 2 * math.pi, 10)
        E = np.column_stack([np.cos(t), np.sin(t), np.zeros(10)]) @ R.T
    elif cls == "random-3d-50":
        E = random_unit(rng, 50)
    else:
        raise KeyError(cls)
    g = rng.uniform(0.5, 1.0, len(E))
    return MinisumProblem(E, g, kernel)


@dataclass
class ConvergenceStats:
    cls: str
    kernel: Kernel
    reps: int
    successes: int
    mean_iterations: float
    mean_guesses: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.reps

    @property
    def reference_value(self) -> float:
        return CONVERGENCE_CASES[self.cls][0 if self.kernel is Kernel.SA else 1]


def convergence_run(cls: str, kernel: Kernel, reps: int = 500, seed: int = 0, settings=SolverSettings()):
    """Random orientation and random first guess per repetition; a failed
    guess (no convergence in ``max_iterations``) is replaced by a fresh
    random guess, up to ``max_restarts`` guesses."""
    rng = np.random.default_rng(seed)
    iters = guesses = successes = 0
    for _ in range(reps):
        problem = convergence_problem(cls, kernel, rng)
        for k in range(settings.max_restarts):
            w0 = random_unit(rng)
            guesses += 1
            try:
                res = solve_minisum(problem, settings, w0)
            except NotConverged:
                iters += settings.max_iterations
                continue
            iters += res.iterations
            successes += 1
            break
    return ConvergenceStats(cls, kernel, reps, successes, iters / guesses, guesses / reps)


def random_structure(rng, n: int, species=("H", "C", "N", "O"), radius: float = 4.0, min_separation: float = 0.7):
    """Random cluster around the origin with no two atoms closer than ``min_separation``."""
    pts: list[np.ndarray] = []
    while len(pts) < n:
        p = random_unit(rng) * radius * rng.uniform(0.15, 1.0) ** (1 / 3)
        if all(np.linalg.norm(p - q) >= min_separation for q in pts):
            pts.append(p)
    symbols = [species[i] for i in rng.integers(0, len(species), n)]
    return Structure(symbols, np.array(pts))


def shape_structure(name: str, radius: float = 1.5, symbol: str = "C") -> Structure:
    x = shape(name) * radius
    return Structure([symbol] * len(x), x, source=name)


__all__ = [
    "CONVERGENCE_CASES",
    "SHAPES",
    "ConvergenceStats",
    "convergence_problem",
    "convergence_run",
    "random_rotation",
    "random_structure",
    "random_unit",
    "shape",
    "shape_structure",
    "symmetry_group",
]
