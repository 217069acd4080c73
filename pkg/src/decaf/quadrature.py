"""Laguerre radial rules, Lebedev angular rules and composite 3D grids.

The radial rule integrates ``f(r) r^2 exp(-r)`` on ``[0, inf)``; the angular
rules integrate over the unit sphere with weights normalized to one. A
composite grid places one Lebedev shell at every (scaled) Laguerre radius
and bakes the integral weight function into the node weights, so that

    integral of w(r) f(r) dV  ~=  sum_k weights[k] * f(nodes[k])
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from decaf.errors import DomainError, UnsupportedOrder

LAGUERRE_ALPHA = 2.0
MAX_RADIAL_ORDER = 20
LEBEDEV_COUNTS = (6, 14, 26, 38, 50)


@dataclass(frozen=True)
class RadialRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class AngularRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def count(self) -> int:
        return len(self.nodes)


def laguerre_rule(order: int) -> RadialRule:
    """Gauss rule for the weight ``r^2 exp(-r)`` via Golub-Welsch.

    Orders 2-6 are the tabulated ones; orders up to 20 are also accepted.
    """
    if not isinstance(order, (int, np.integer)) or not 2 <= order <= MAX_RADIAL_ORDER:
        raise UnsupportedOrder(f"radial order must be in [2, {MAX_RADIAL_ORDER}], got {order!r}")
    a = LAGUERRE_ALPHA
    k = np.arange(order, dtype=float)
    diag = 2.0 * k + a + 1.0
    off = np.sqrt(k[1:] * (k[1:] + a))
    J = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(J)
    weights = math.gamma(a + 1.0) * vecs[0] ** 2
    return RadialRule(nodes, weights)


def _oh_orbit(kind: str, p: float = 0.0, q: float = 0.0) -> np.ndarray:
    """Octahedral orbit of one Lebedev symmetry class generator."""
    s = (-1.0, 1.0)
    if kind == "a1":
        pts = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    elif kind == "a2":
        v = math.sqrt(0.5)
        pts = [(0, a * v, b * v) for a in s for b in s]
        pts += [(a * v, 0, b * v) for a in s for b in s]
        pts += [(a * v, b * v, 0) for a in s for b in s]
    elif kind == "a3":
        v = math.sqrt(1.0 / 3.0)
        pts = [(a * v, b * v, c * v) for a in s for b in s for c in s]
    elif kind == "b":
        # (p, p, q) with 2p^2 + q^2 = 1
        pts = [(a * p, b * p, c * q) for a in s for b in s for c in s]
        pts += [(a * p, b * q, c * p) for a in s for b in s for c in s]
        pts += [(a * q, b * p, c * p) for a in s for b in s for c in s]
    elif kind == "c":
        # (p, q, 0) with p^2 + q^2 = 1
        pts = [(a * p, b * q, 0) for a in s for b in s]
        pts += [(a * q, b * p, 0) for a in s for b in s]
        pts += [(a * p, 0, b * q) for a in s for b in s]
        pts += [(a * q, 0, b * p) for a in s for b in s]
        pts += [(0, a * p, b * q) for a in s for b in s]
        pts += [(0, a * q, b * p) for a in s for b in s]
    else:
        raise ValueError(kind)
    return np.array(pts, dtype=float)


def _lebedev_classes(count):
    if count == 6:
        return [("a1", 1.0 / 6.0, ())]
    if count == 14:
        return [("a1", 1.0 / 15.0, ()), ("a3", 3.0 / 40.0, ())]
    if count == 26:
        return [("a1", 1.0 / 21.0, ()), ("a2", 4.0 / 105.0, ()), ("a3", 9.0 / 280.0, ())]
    if count == 38:
        p = math.sqrt((1.0 - 1.0 / math.sqrt(3.0)) / 2.0)
        q = math.sqrt((1.0 + 1.0 / math.sqrt(3.0)) / 2.0)
        return [("a1", 1.0 / 105.0, ()), ("a3", 9.0 / 280.0, ()), ("c", 1.0 / 35.0, (p, q))]
    if count == 50:
        p = 3.0 / math.sqrt(11.0)
        q = 1.0 / math.sqrt(11.0)
        return [
            ("a1", 4.0 / 315.0, ()),
            ("a2", 64.0 / 2835.0, ()),
            ("a3", 27.0 / 1280.0, ()),
            ("b", 14641.0 / 725760.0, (q, p)),
        ]
    raise UnsupportedOrder(f"Lebedev rule with {count!r} nodes is not supported; use one of {LEBEDEV_COUNTS}")


def lebedev_rule(count: int) -> AngularRule:
    """Lebedev rule on the unit sphere; weights sum to one."""
    nodes, weights = [], []
    for kind, weight, gen in _lebedev_classes(count):
        pts = _oh_orbit(kind, *gen)
        nodes.append(pts)
        weights.append(np.full(len(pts), weight))
    nodes = np.vstack(nodes)
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    return AngularRule(nodes, np.concatenate(weights))


@dataclass(frozen=True)
class Layer:
    radius: float
    radial_weight: float
    angular: AngularRule


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Laguerre x Lebedev grid with baked-in node weights.

    Immutable after construction; ``identity`` hashes the node positions
    and weights and is what fingerprints use to check compatibility.
    """

    layers: tuple[Layer, ...]
    scale: float
    outer_radius: float
    nodes: np.ndarray
    weights: np.ndarray
    layer_index: np.ndarray
    radial_order: int
    angular_counts: tuple[int, ...]
    weight_spec: str = ""
    keep_scale_factor: bool = True
    identity: str = field(default="", compare=False)

    def __post_init__(self):
        for arr in (self.nodes, self.weights, self.layer_index):
            arr.setflags(write=False)
        if not self.identity:
            object.__setattr__(self, "identity", grid_hash(self.nodes, self.weights))

    def __len__(self):
        return len(self.weights)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Approximate ``integral of w(r) f(r) dV``."""
        return float(np.sum(self.weights * f(self.nodes)))


def grid_hash(nodes, weights) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(nodes, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(weights, dtype="<f8").tobytes())
    return h.hexdigest()[:32]


def composite_grid(
    radial_order: int,
    angular_counts: Sequence[int],
    outer_radius: float,
    weight_fn: Callable[[np.ndarray], np.ndarray],
    keep_scale_factor: bool = True,
    weight_spec: str = "",
) -> QuadratureGrid:
    """Composite grid with the outermost shell at ``outer_radius``.

    ``weight_fn`` maps radii to the integral weight ``w(r)``; it is
    evaluated at the physical (scaled) node radii. ``keep_scale_factor``
    controls the constant ``tau**3`` factor, which does not matter when
    only relative distances are needed.
    """
    if not outer_radius > 0:
        raise DomainError("outer radius must be positive")
    counts = tuple(int(c) for c in angular_counts)
    if len(counts) != radial_order:
        raise DomainError(f"need {radial_order} angular counts, got {len(counts)}")
    radial = laguerre_rule(radial_order)
    tau = outer_radius / radial.nodes.max()
    cube = tau**3 if keep_scale_factor else 1.0

    layers, nodes, weights, index = [], [], [], []
    for n, (r, alpha, count) in enumerate(zip(radial.nodes, radial.weights, counts)):
        ang = lebedev_rule(count)
        radius = tau * r
        pts = radius * ang.nodes
        w_r = np.asarray(weight_fn(np.full(len(pts), radius)), dtype=float)
        layers.append(Layer(float(radius), float(alpha), ang))
        nodes.append(pts)
        weights.append(4.0 * math.pi * alpha * ang.weights * w_r * math.exp(r) * cube)
        index.append(np.full(len(pts), n))
    weights = np.concatenate(weights)
    if not np.all(weights > 0):
        raise DomainError("integral weight vanishes at some grid node; shrink the outer radius")
    return QuadratureGrid(
        layers=tuple(layers),
        scale=float(tau),
        outer_radius=float(outer_radius),
        nodes=np.vstack(nodes),
        weights=weights,
        layer_index=np.concatenate(index),
        radial_order=radial_order,
        angular_counts=counts,
        weight_spec=weight_spec,
        keep_scale_factor=keep_scale_factor,
    )
