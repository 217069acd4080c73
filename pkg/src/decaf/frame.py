"""Kernel minisum optimization on the unit sphere and canonical frames.

A minisum problem seeks the unit vector ``w`` minimizing
``sum_i g_i * kappa(w, e_i)`` for neighbor directions ``e_i`` and
nonnegative weights ``g_i``. Two kernels are supported:

* square angle (SA):          ``kappa = 0.5 * arccos(w.e)**2``
* exponentiated cosine (EC):  ``kappa = exp(-w.e)``

Local minima are found with projected gradient descent using
Barzilai-Borwein step sizes. All starts of a multi-start search are
advanced together as one vectorized batch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from decaf.errors import DegenerateInPlane, DomainError, EmptyNeighborhood, NotConverged

#: angular radius below which two minisum solutions are the same minimum
CLUSTER_ANGLE = 1e-4
#: objectives closer than this are co-global minima
TIE_TOLERANCE = 1e-9
#: in-plane component norm below which a direction counts as on the axis
AXIS_DEGENERACY = 1e-8


class Kernel(str, enum.Enum):
    SA = "sa"
    EC = "ec"


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise DomainError(f"cannot normalize vector {v!r}")
    return v / n


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-14
    max_iterations: int = 64
    bootstrap_step: float = 0.01
    max_restarts: int = 8
    pole_clip: float = 1e-12
    n_starts: int = 32
    n_circle_starts: int = 16

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if not self.bootstrap_step > 0:
            raise DomainError("bootstrap_step must be positive")
        if self.max_restarts < 1 or self.n_starts < 1 or self.n_circle_starts < 1:
            raise DomainError("restart and start counts must be >= 1")
        if not self.pole_clip > 0:
            raise DomainError("pole_clip must be positive")


@dataclass(frozen=True)
class MinisumProblem:
    """Neighbor directions, their weights and the kernel to minimize."""

    directions: np.ndarray
    weights: np.ndarray
    kernel: Kernel = Kernel.SA

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.directions, dtype=float))
        g = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if e.size == 0 or e.shape[1] != 3:
            raise DomainError("directions must be a nonempty (N, 3) array")
        if g.shape != (len(e),):
            raise DomainError("weights must have one entry per direction")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise DomainError("weights must be finite and nonnegative")
        if not np.any(g > 0):
            raise DomainError("at least one weight must be positive")
        norms = np.linalg.norm(e, axis=1)
        if np.any(norms == 0) or not np.all(np.isfinite(norms)):
            raise DomainError("directions must be finite and nonzero")
        object.__setattr__(self, "directions", e / norms[:, None])
        object.__setattr__(self, "weights", g)
        object.__setattr__(self, "kernel", Kernel(self.kernel))

    def __len__(self):
        return len(self.weights)

    def pruned(self) -> "MinisumProblem":
        keep = self.weights > 0
        if keep.all():
            return self
        return MinisumProblem(self.directions[keep], self.weights[keep], self.kernel)

    @classmethod
    def from_displacements(
        cls,
        displacements,
        kernel: Kernel | str = Kernel.SA,
        g: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> "MinisumProblem":
        """Build a problem from center-relative displacements.

        Atoms sitting on the center carry no direction and are skipped, as
        are atoms whose weight ``g(r)`` is zero.
        """
        x = np.asarray(displacements, dtype=float).reshape(-1, 3)
        r = np.linalg.norm(x, axis=1)
        weights = np.ones_like(r) if g is None else np.asarray(g(r), dtype=float)
        keep = (r > 1e-12) & (weights > 0)
        if not keep.any():
            raise EmptyNeighborhood("no atom carries a direction and a positive weight")
        return cls(x[keep] / r[keep, None], weights[keep], kernel)


class MinisumResult(NamedTuple):
    w: np.ndarray
    objective: float
    iterations: int


# kernel evaluation --------------------------------------------------------


def _kernel_values(c, kernel):
    if kernel is Kernel.SA:
        return 0.5 * np.arccos(np.clip(c, -1.0, 1.0)) ** 2
    return np.exp(-c)


def _gradient_factor(c, kernel, pole_clip):
    """Scalar ``f_i`` with ``grad = -sum g_i f_i e_i``."""
    if kernel is Kernel.EC:
        return np.exp(-c)
    c = np.clip(c, -1.0, 1.0)
    s2 = (1.0 - c) * (1.0 + c)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.arccos(c) / np.sqrt(np.maximum(s2, pole_clip))
    # removable singularity at w.e = 1 has limit 1
    return np.where((c > 0) & (s2 < pole_clip), 1.0, f)


def _objective(E, g, W, kernel):
    c = np.einsum("...nk,...k->...n", E, W)
    return np.sum(g * _kernel_values(c, kernel), axis=-1)


def _gradient(E, g, W, kernel, pole_clip):
    c = np.einsum("...nk,...k->...n", E, W)
    f = g * _gradient_factor(c, kernel, pole_clip)
    return -np.einsum("...n,...nk->...k", f, E)


def objective(problem: MinisumProblem, w) -> float:
    return float(_objective(problem.directions, problem.weights, np.asarray(w, float), problem.kernel))


def gradient(problem: MinisumProblem, w, pole_clip: float = 1e-12) -> np.ndarray:
    return _gradient(problem.directions, problem.weights, np.asarray(w, float), problem.kernel, pole_clip)


def sa_objective(problem: MinisumProblem, w) -> float:
    if problem.kernel is not Kernel.SA:
        raise DomainError("problem does not use the square angle kernel")
    return objective(problem, w)


def sa_gradient(problem: MinisumProblem, w, pole_clip: float = 1e-12) -> np.ndarray:
    if problem.kernel is not Kernel.SA:
        raise DomainError("problem does not use the square angle kernel")
    return gradient(problem, w, pole_clip)


def ec_objective(problem: MinisumProblem, w) -> float:
    if problem.kernel is not Kernel.EC:
        raise DomainError("problem does not use the exponentiated cosine kernel")
    return objective(problem, w)


def ec_gradient(problem: MinisumProblem, w) -> np.ndarray:
    if problem.kernel is not Kernel.EC:
        raise DomainError("problem does not use the exponentiated cosine kernel")
    return gradient(problem, w)


# batched Barzilai-Borwein descent -----------------------------------------


def _tangent(G, W, axis):
    G = G - np.sum(G * W, axis=-1, keepdims=True) * W
    if axis is not None:
        G = G - np.sum(G * axis, axis=-1, keepdims=True) * axis
    return G


def descend(E, g, kernel, W0, settings: SolverSettings, axis=None):
    """Run projected BB descent from every row of ``W0`` simultaneously.

    ``E`` is ``(N, 3)`` shared by all starts or ``(S, N, 3)`` per start; ``g``
    matches with ``(N,)`` or ``(S, N)``. With ``axis`` given, iterates stay on
    the great circle orthogonal to it.

    Returns ``(W, iterations, converged)``.
    """
    kernel = Kernel(kernel)
    W = np.array(W0, dtype=float, copy=True)
    S = len(W)
    if axis is not None:
        axis = np.broadcast_to(np.asarray(axis, float), W.shape)
        W = W - np.sum(W * axis, axis=-1, keepdims=True) * axis
    W /= np.linalg.norm(W, axis=-1, keepdims=True)

    done = np.zeros(S, dtype=bool)
    iters = np.zeros(S, dtype=int)
    prev_W = prev_G = None
    for it in range(1, settings.max_iterations + 1):
        G = _tangent(_gradient(E, g, W, kernel, settings.pole_clip), W, axis)
        if prev_W is None:
            alpha = np.full(S, settings.bootstrap_step)
        else:
            dW = W - prev_W
            dG = G - prev_G
            den = np.sum(dG * dG, axis=-1)
            num = np.sum(dW * dG, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                alpha = np.where(den > 0, num / den, settings.bootstrap_step)
            if kernel is Kernel.EC:
                alpha = np.abs(alpha)
        prev_W, prev_G = W, G
        W_new = W - alpha[:, None] * G
        if axis is not None:
            W_new = W_new - np.sum(W_new * axis, axis=-1, keepdims=True) * axis
        norm = np.linalg.norm(W_new, axis=-1, keepdims=True)
        ok = (norm[:, 0] > 0) & np.isfinite(norm[:, 0])
        W_new = np.where(ok[:, None], W_new / np.where(ok[:, None], norm, 1.0), W)

        active = ~done
        W = np.where(active[:, None], W_new, W)
        iters[active] = it
        step = np.linalg.norm(W - prev_W, axis=-1)
        done |= active & (step < settings.tolerance)
        if done.all():
            break
    return W, iters, done


# start directions ---------------------------------------------------------

_PHI = (1.0 + math.sqrt(5.0)) / 2.0


def _rodrigues(rotvec) -> np.ndarray:
    rotvec = np.asarray(rotvec, float)
    theta = np.linalg.norm(rotvec)
    k = rotvec / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * K @ K


# generic orientation so no start coincides with common symmetry elements
_START_ROTATION = _rodrigues([0.3183098861837907, 0.5772156649015329, 0.2718281828459045])


def _icosahedral_directions() -> np.ndarray:
    p, q = _PHI, 1.0 / _PHI
    verts = []
    for a in (-1, 1):
        for b in (-1, 1):
            verts += [(0, a, b * p), (a, b * p, 0), (a * p, 0, b)]
    faces = [(a, b, c) for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)]
    for a in (-1, 1):
        for b in (-1, 1):
            faces += [(0, a * q, b * p), (a * q, b * p, 0), (a * p, 0, b * q)]
    d = np.array(verts + faces, dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _fibonacci_directions(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def start_directions(n: int = 32) -> np.ndarray:
    """Deterministic, fixed-order initial guesses on the sphere.

    Up to 32 guesses are icosahedron vertices followed by face centers;
    larger sets use a Fibonacci lattice. Both are rotated into a generic
    orientation.
    """
    d = _icosahedral_directions()[:n] if n <= 32 else _fibonacci_directions(n)
    return d @ _START_ROTATION.T


def _circle_basis(axis):
    axis = unit(axis)
    helper = np.eye(3)[np.argmin(np.abs(axis))]
    u = unit(np.cross(axis, helper))
    return u, np.cross(axis, u)


def circle_start_directions(axis, n: int = 16) -> np.ndarray:
    u, v = _circle_basis(axis)
    theta = 2.0 * math.pi * (np.arange(n) + 0.1234567) / n
    return np.cos(theta)[:, None] * u + np.sin(theta)[:, None] * v


# public solvers -------------------------------------------------------------


def solve_minisum(problem: MinisumProblem, settings: SolverSettings, initial) -> MinisumResult:
    """Local minimum from one initial guess; raises NotConverged."""
    W, iters, ok = descend(
        problem.directions, problem.weights, problem.kernel, unit(initial)[None, :], settings
    )
    if not ok[0]:
        raise NotConverged(f"no convergence within {settings.max_iterations} iterations")
    return MinisumResult(W[0], objective(problem, W[0]), int(iters[0]))


def solve_with_restarts(problem: MinisumProblem, settings: SolverSettings, guesses) -> tuple[MinisumResult, int]:
    """Advance through ``guesses`` until one converges.

    Returns the result and the number of guesses used, capped at
    ``settings.max_restarts``.
    """
    for k, w0 in enumerate(guesses):
        if k >= settings.max_restarts:
            break
        try:
            return solve_minisum(problem, settings, w0), k + 1
        except NotConverged:
            continue
    raise NotConverged(f"no convergence after {settings.max_restarts} guesses")


def _cluster(W, objs, iters) -> list[MinisumResult]:
    order = np.lexsort((np.arange(len(objs)), objs))
    reps: list[MinisumResult] = []
    cos_tol = math.cos(CLUSTER_ANGLE)
    for i in order:
        if any(float(W[i] @ r.w) > cos_tol for r in reps):
            continue
        reps.append(MinisumResult(W[i], float(objs[i]), int(iters[i])))
    return reps


def co_global(results: Sequence[MinisumResult], tol: float = TIE_TOLERANCE) -> list[MinisumResult]:
    """Every result whose objective ties the best one."""
    best = min(r.objective for r in results)
    return [r for r in results if r.objective - best <= tol]


def solve_minisum_global(problem: MinisumProblem, settings: SolverSettings = SolverSettings()) -> list[MinisumResult]:
    """Distinct local minima from the deterministic multi-start set, best first."""
    W0 = start_directions(settings.n_starts)
    W, iters, ok = descend(problem.directions, problem.weights, problem.kernel, W0, settings)
    if not ok.any():
        raise NotConverged("all starts failed to converge")
    W, iters = W[ok], iters[ok]
    objs = _objective(problem.directions, problem.weights, W, problem.kernel)
    return _cluster(W, objs, iters)


def _check_in_plane(problem, axis):
    e = problem.directions[problem.weights > 0]
    inplane = e - np.outer(e @ axis, axis)
    if np.all(np.linalg.norm(inplane, axis=1) < AXIS_DEGENERACY):
        raise DegenerateInPlane("all directions lie on the constraint axis")


def solve_minisum_constrained(
    problem: MinisumProblem, settings: SolverSettings, axis, initial
) -> MinisumResult:
    """Local minimum on the great circle orthogonal to ``axis``."""
    axis = unit(axis)
    w0 = unit(initial)
    if abs(w0 @ axis) > 1e-10:
        raise DomainError("initial guess must be orthogonal to the axis")
    _check_in_plane(problem, axis)
    W, iters, ok = descend(
        problem.directions, problem.weights, problem.kernel, w0[None, :], settings, axis=axis
    )
    if not ok[0]:
        raise NotConverged(f"no convergence within {settings.max_iterations} iterations")
    return MinisumResult(W[0], objective(problem, W[0]), int(iters[0]))


def solve_minisum_constrained_global(
    problem: MinisumProblem, settings: SolverSettings, axis
) -> list[MinisumResult]:
    axis = unit(axis)
    _check_in_plane(problem, axis)
    W0 = circle_start_directions(axis, settings.n_circle_starts)
    W, iters, ok = descend(problem.directions, problem.weights, problem.kernel, W0, settings, axis=axis)
    if not ok.any():
        raise NotConverged("all constrained starts failed to converge")
    W, iters = W[ok], iters[ok]
    objs = _objective(problem.directions, problem.weights, W, problem.kernel)
    return _cluster(W, objs, iters)


# canonical frames -------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalFrame:
    """Orthonormal, possibly improper, triple of projection axes."""

    b_alpha: np.ndarray
    b_beta: np.ndarray
    b_gamma: np.ndarray
    objectives: tuple[float, float] = field(default=(math.nan, math.nan), compare=False)

    def __post_init__(self):
        for name in ("b_alpha", "b_beta", "b_gamma"):
            v = np.asarray(getattr(self, name), dtype=float)
            # leave already-unit axes untouched so stored frames reload bit for bit
            if abs(float(np.linalg.norm(v)) - 1.0) > 4e-16:
                v = unit(v)
            object.__setattr__(self, name, v)

    @property
    def matrix(self) -> np.ndarray:
        """``R = [b_alpha, b_beta, b_gamma]`` with the axes as columns."""
        return np.column_stack([self.b_alpha, self.b_beta, self.b_gamma])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def project(self, y) -> np.ndarray:
        return np.asarray(y, float) @ self.matrix

    def unproject(self, y) -> np.ndarray:
        return np.asarray(y, float) @ self.matrix.T

    def rotated(self, R) -> "CanonicalFrame":
        R = np.asarray(R, float)
        return CanonicalFrame(R @ self.b_alpha, R @ self.b_beta, R @ self.b_gamma, self.objectives)

    @classmethod
    def from_matrix(cls, M) -> "CanonicalFrame":
        M = np.asarray(M, float)
        return cls(M[:, 0], M[:, 1], M[:, 2])


def fallback_beta(b_alpha) -> np.ndarray:
    """Deterministic axis orthogonal to ``b_alpha`` for one-point neighborhoods."""
    b_alpha = unit(b_alpha)
    ref = np.array([0.0, 0.0, 1.0])
    if abs(b_alpha @ ref) > 1.0 - 1e-8:
        ref = np.array([0.0, 1.0, 0.0])
    return unit(ref - (ref @ b_alpha) * b_alpha)


def _gammas_by_halfspace(problem: MinisumProblem, b_alpha, b_beta) -> list[np.ndarray]:
    """Normal(s) to the alpha-beta plane pointing into the lighter half-space.

    A tie between the two half-spaces (e.g. a mirror plane) keeps both
    orientations, so the frame set stays closed under the reflection.
    """
    n = np.cross(b_alpha, b_beta)
    d = (b_alpha + b_beta) / math.sqrt(2.0)
    e, g = problem.directions, problem.weights
    k = g * _kernel_values(e @ d, problem.kernel)
    h = e @ n
    up, down = k[h > AXIS_DEGENERACY].sum(), k[h < -AXIS_DEGENERACY].sum()
    if abs(up - down) <= TIE_TOLERANCE * max(1.0, k.sum()):
        return [n, -n]
    return [n] if up < down else [-n]


def canonical_frame(problem: MinisumProblem, settings: SolverSettings = SolverSettings()) -> list[CanonicalFrame]:
    """All canonical frames of a neighborhood, one per co-global axis pair."""
    try:
        problem = problem.pruned()
    except DomainError as exc:
        raise EmptyNeighborhood(str(exc)) from exc
    frames: list[CanonicalFrame] = []
    for a in co_global(solve_minisum_global(problem, settings)):
        b_alpha = a.w
        betas = None
        if len(problem) > 1:
            try:
                betas = co_global(solve_minisum_constrained_global(problem, settings, b_alpha))
            except DegenerateInPlane:
                betas = None
        if betas is None:
            b_beta = fallback_beta(b_alpha)
            frames.append(
                CanonicalFrame(b_alpha, b_beta, np.cross(b_alpha, b_beta), (a.objective, objective(problem, b_beta)))
            )
            continue
        for b in betas:
            b_beta = unit(b.w - (b.w @ b_alpha) * b_alpha)
            for b_gamma in _gammas_by_halfspace(problem, b_alpha, b_beta):
                frames.append(CanonicalFrame(b_alpha, b_beta, b_gamma, (a.objective, b.objective)))
    return dedupe_frames(frames)


def dedupe_frames(frames: Sequence[CanonicalFrame], tol: float = 1e-8) -> list[CanonicalFrame]:
    out: list[CanonicalFrame] = []
    for f in frames:
        if not any(np.max(np.abs(f.matrix - o.matrix)) < tol for o in out):
            out.append(f)
    return out


def frame_distance(a: CanonicalFrame, b: CanonicalFrame) -> float:
    """Largest angle (radians) between corresponding axes."""
    cos = np.sum(a.matrix * b.matrix, axis=0)
    return float(np.max(np.arccos(np.clip(cos, -1.0, 1.0))))
