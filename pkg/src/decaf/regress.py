"""Gaussian-process regression over fingerprints.

Covariance is the squared exponential of the fingerprint distance,
``k(a, b) = sigma^2 exp(-d(a, b)^2 / (2 l^2))``, with a zero-mean prior on
centered targets and a small diagonal jitter relative to ``sigma^2``.
Vector targets are modeled one component at a time, in the canonical frame
of the fingerprint they belong to.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize

from decaf.errors import DecafError, DomainError, GridMismatch, OracleFailure, SingularCovariance
from decaf.fingerprint import Featurizer, Fingerprint, fingerprint_distance

log = logging.getLogger(__name__)

JITTER_LADDER = (1e-8, 1e-6, 1e-4)


@dataclass(frozen=True)
class GPHyperparameters:
    output_scale: float
    length_scale: float
    jitter: float = 1e-8

    def __post_init__(self):
        if not (self.output_scale > 0 and self.length_scale > 0 and self.jitter > 0):
            raise DomainError("GP hyperparameters must be strictly positive")


@dataclass(frozen=True)
class HyperSearch:
    """Bounds are multiples of the target std and of the median pairwise distance."""

    n_starts: int = 8
    sigma_bounds: tuple[float, float] = (1e-3, 1e3)
    length_bounds: tuple[float, float] = (1e-2, 1e2)
    jitter: float = 1e-8
    seed: int = 0

    @classmethod
    def from_config(cls, gp, seed=0) -> "HyperSearch":
        return cls(gp.n_starts, tuple(gp.sigma_bounds), tuple(gp.length_bounds), gp.jitter, seed)


# distances ----------------------------------------------------------------


def _stack(fps: Sequence[Fingerprint]):
    if not fps:
        raise DomainError("no fingerprints")
    h = fps[0].grid_hash
    for f in fps:
        if f.grid_hash != h or len(f) != len(fps[0]):
            raise GridMismatch("training fingerprints come from different grids")
    return np.vstack([f.values for f in fps]), fps[0].weights, h


def weighted_sqdist(A, B, w) -> np.ndarray:
    sw = np.sqrt(w)
    A, B = A * sw, B * sw
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def se_kernel(a: Fingerprint, b: Fingerprint, hp: GPHyperparameters) -> float:
    d = fingerprint_distance(a, b)
    return hp.output_scale**2 * math.exp(-0.5 * d * d / hp.length_scale**2)


def _cholesky(C, sigma2, jitters):
    n = len(C)
    for j in jitters:
        try:
            L = linalg.cholesky(sigma2 * (C + j * np.eye(n)), lower=True)
            return L, j
        except linalg.LinAlgError:
            continue
    raise SingularCovariance(f"covariance not positive definite even with jitter {jitters[-1]:g}")


def _ladder(jitter):
    return tuple([jitter] + [j for j in JITTER_LADDER if j > jitter])


def log_marginal_likelihood(D2, y, sigma, length, jitter=1e-8, grad=False):
    """LML of centered targets; with ``grad`` also d/dlog(sigma), d/dlog(l)."""
    n = len(y)
    C = np.exp(-0.5 * D2 / length**2)
    L, j = _cholesky(C, sigma**2, _ladder(jitter))
    alpha = linalg.cho_solve((L, True), y)
    lml = -0.5 * y @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi)
    if not grad:
        return lml
    Kinv = linalg.cho_solve((L, True), np.eye(n))
    g_sigma = y @ alpha - n
    dK = sigma**2 * C * D2 / length**2
    g_length = 0.5 * (alpha @ dK @ alpha - np.sum(Kinv * dK))
    return lml, np.array([g_sigma, g_length])


# scalar GP ----------------------------------------------------------------


@dataclass
class GPModel:
    """Trained scalar GP. ``X`` rows are fingerprint values on one grid."""

    X: np.ndarray
    weights: np.ndarray
    grid_hash: str
    y: np.ndarray
    hyper: GPHyperparameters
    mean: float = 0.0
    log_likelihood: float = math.nan
    start_log_likelihoods: list = field(default_factory=list)
    _L: np.ndarray = field(default=None, repr=False)
    _alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._L is None:
            self.refactor()

    def refactor(self):
        D2 = weighted_sqdist(self.X, self.X, self.weights)
        C = np.exp(-0.5 * D2 / self.hyper.length_scale**2)
        L, j = _cholesky(C, self.hyper.output_scale**2, _ladder(self.hyper.jitter))
        if j != self.hyper.jitter:
            log.info("jitter escalated to %g", j)
            self.hyper = GPHyperparameters(self.hyper.output_scale, self.hyper.length_scale, j)
        self._L = L
        self._alpha = linalg.cho_solve((L, True), self.y - self.mean)

    def __len__(self):
        return len(self.y)

    def _kstar(self, Q):
        D2 = weighted_sqdist(np.atleast_2d(Q), self.X, self.weights)
        return self.hyper.output_scale**2 * np.exp(-0.5 * D2 / self.hyper.length_scale**2)

    def predict_values(self, Q) -> tuple[np.ndarray, np.ndarray]:
        Ks = self._kstar(Q)
        mean = self.mean + Ks @ self._alpha
        v = linalg.solve_triangular(self._L, Ks.T, lower=True)
        var = self.hyper.output_scale**2 - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def predict(self, query: Fingerprint) -> tuple[float, float]:
        if query.grid_hash != self.grid_hash:
            raise GridMismatch("query fingerprint comes from a different grid")
        m, v = self.predict_values(query.values[None, :])
        return float(m[0]), float(v[0])

    def with_targets(self, y) -> "GPModel":
        """Same inputs and hyperparameters, new targets; no refit."""
        return GPModel(self.X, self.weights, self.grid_hash, np.asarray(y, float), self.hyper, self.mean)


def fit_fixed(fps: Sequence[Fingerprint], y, hyper: GPHyperparameters, center: bool = True) -> GPModel:
    X, w, h = _stack(fps)
    y = np.asarray(y, dtype=float)
    return GPModel(X, w, h, y, hyper, float(y.mean()) if center else 0.0)


def _reference_scales(X, w, yc):
    s = float(np.std(yc))
    if not s > 0:
        s = 1.0
    D = np.sqrt(weighted_sqdist(X, X, w)[np.triu_indices(len(X), 1)])
    D = D[D > 0]
    med = float(np.median(D)) if len(D) else 1.0
    return s, med


def fit(train: Sequence[tuple[Fingerprint, float]], search: HyperSearch = HyperSearch()) -> GPModel:
    """Maximum-likelihood fit of ``(sigma, l)`` with bounded multi-start L-BFGS-B."""
    if len(train) < 2:
        raise DomainError("need at least two training points")
    fps = [t[0] for t in train]
    X, w, h = _stack(fps)
    y = np.array([t[1] for t in train], dtype=float)
    mean = float(y.mean())
    yc = y - mean
    D2 = weighted_sqdist(X, X, w)
    s_ref, d_ref = _reference_scales(X, w, yc)
    lo = np.log([search.sigma_bounds[0] * s_ref, search.length_bounds[0] * d_ref])
    hi = np.log([search.sigma_bounds[1] * s_ref, search.length_bounds[1] * d_ref])

    rng = np.random.default_rng(search.seed)
    starts = [np.array([math.log(s_ref), math.log(d_ref)])]
    starts += list(rng.uniform(lo, hi, size=(max(search.n_starts - 1, 0), 2)))

    def negative(theta):
        try:
            lml, g = log_marginal_likelihood(D2, yc, math.exp(theta[0]), math.exp(theta[1]), search.jitter, grad=True)
        except SingularCovariance:
            return 1e300, np.zeros(2)
        return -lml, -g

    best_theta, best_val, start_vals = None, np.inf, []
    for theta0 in starts:
        f0 = negative(theta0)[0]
        start_vals.append(-f0)
        res = optimize.minimize(negative, theta0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)))
        theta, val = (res.x, res.fun) if res.fun <= f0 else (theta0, f0)
        if val < best_val:
            best_theta, best_val = theta, val
    if not np.isfinite(best_val) or best_val >= 1e300:
        raise SingularCovariance("no hyperparameters gave a positive definite covariance")
    hyper = GPHyperparameters(math.exp(best_theta[0]), math.exp(best_theta[1]), search.jitter)
    model = GPModel(X, w, h, y, hyper, mean, -best_val, start_vals)
    return model


def predict(model: GPModel, query: Fingerprint) -> tuple[float, float]:
    return model.predict(query)


def predict_set(model: GPModel, fps: Sequence[Fingerprint]) -> tuple[float, float]:
    """Mean averaged and variance maximized over symmetry-distinct fingerprints."""
    Q = np.vstack([f.values for f in fps])
    for f in fps:
        if f.grid_hash != model.grid_hash:
            raise GridMismatch("query fingerprint comes from a different grid")
    m, v = model.predict_values(Q)
    return float(m.mean()), float(v.max())


# multi-component models ------------------------------------------------------

MODES = ("scalar", "molecular-vector", "per-atom-vector")


def _fit_components(fps, Y, search, hypers=None):
    Y = np.asarray(Y, dtype=float).reshape(len(fps), -1)
    models = []
    for c in range(Y.shape[1]):
        if hypers is not None:
            models.append(fit_fixed(fps, Y[:, c], hypers[c]))
        else:
            models.append(fit(list(zip(fps, Y[:, c])), search))
    return models


@dataclass
class PropertyModel:
    """Per-structure or per-atom property model built on a featurizer.

    ``mode`` is ``scalar`` (one value per structure, fingerprint at the
    center of mass), ``molecular-vector`` (e.g. dipole) or
    ``per-atom-vector`` (e.g. forces). Vector components are learned in the
    canonical frame and rotated back to world coordinates at prediction.
    """

    featurizer: Featurizer
    components: list[GPModel]
    mode: str = "scalar"

    def _centers(self, structure):
        if self.mode == "per-atom-vector":
            return list(range(len(structure)))
        return ["com"]

    def predict(self, structure):
        out = []
        for c in self._centers(structure):
            fps = self.featurizer.fingerprints(structure, c)
            Q = np.vstack([f.values for f in fps])
            means = np.column_stack([m.predict_values(Q)[0] for m in self.components])
            if self.mode == "scalar":
                out.append(means[:, 0].mean())
            else:
                world = [f.frame.unproject(mu) for f, mu in zip(fps, means)]
                out.append(np.mean(world, axis=0))
        if self.mode == "scalar":
            return float(out[0])
        return out[0] if self.mode == "molecular-vector" else np.array(out)

    def predict_with_uncertainty(self, structure):
        """Mean as in ``predict`` plus the largest component posterior std."""
        std = 0.0
        for c in self._centers(structure):
            fps = self.featurizer.fingerprints(structure, c)
            Q = np.vstack([f.values for f in fps])
            for m in self.components:
                std = max(std, float(np.sqrt(m.predict_values(Q)[1].max())))
        return self.predict(structure), std


def training_rows(featurizer: Featurizer, structures, targets, mode: str):
    """Fingerprints and frame-projected targets for every center of every structure."""
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    fps, Y = [], []
    for s, t in zip(structures, targets):
        t = np.asarray(t, dtype=float)
        if mode == "per-atom-vector":
            t = t.reshape(len(s), 3)
            for i in range(len(s)):
                for f in featurizer.fingerprints(s, i):
                    fps.append(f)
                    Y.append(f.frame.project(t[i]))
        else:
            for f in featurizer.fingerprints(s, "com"):
                fps.append(f)
                Y.append(np.atleast_1d(t) if mode == "scalar" else f.frame.project(t.reshape(3)))
    return fps, np.array(Y)


def fit_property(featurizer, structures, targets, mode="scalar", search=HyperSearch(), hypers=None) -> PropertyModel:
    fps, Y = training_rows(featurizer, structures, targets, mode)
    return PropertyModel(featurizer, _fit_components(fps, Y, search, hypers), mode)


def fit_vector(featurizer, structures, targets, mode="per-atom", search=HyperSearch(), hypers=None) -> PropertyModel:
    """Three independent scalar GPs on frame-projected vector targets.

    ``mode`` is ``per-atom`` (targets shaped like positions) or ``molecular``.
    """
    full = {"per-atom": "per-atom-vector", "molecular": "molecular-vector"}.get(mode, mode)
    return fit_property(featurizer, structures, targets, full, search, hypers)


# active learning ----------------------------------------------------------------


@dataclass(frozen=True)
class StopCriterion:
    max_uncertainty: float = 0.1
    max_samples: int = 50


@dataclass
class TraceEntry:
    iteration: int
    n_train: int
    max_uncertainty: float
    acquired: int | None


@dataclass
class ActiveLearningResult:
    components: list[GPModel]
    train_indices: list[int]
    labels: dict
    trace: list[TraceEntry]

    @property
    def final_uncertainty(self) -> float:
        return self.trace[-1].max_uncertainty


def active_learn(
    oracle: Callable,
    candidates: Sequence,
    featurize: Callable,
    seed_indices: Sequence[int],
    stop: StopCriterion = StopCriterion(),
    search: HyperSearch = HyperSearch(),
    acquisition: str = "variance",
    reference: Callable | None = None,
    vector_labels: bool = False,
) -> ActiveLearningResult:
    """Greedy max-variance acquisition over a candidate pool.

    ``oracle(candidate)`` returns the label (scalar or vector) and
    ``featurize(candidate)`` a list of fingerprints. Uncertainty is twice the
    largest posterior standard deviation over components and fingerprints.
    With ``acquisition="variance+error"``, ``reference(candidate)`` must give
    the label without counting as an acquisition; the score is the sum of
    variance and absolute prediction error. With ``vector_labels`` the
    labels are world-frame 3-vectors, projected into each fingerprint's
    canonical frame before fitting.
    """
    if not seed_indices:
        raise DomainError("active learning needs a nonempty seed set")
    if acquisition not in ("variance", "variance+error"):
        raise DomainError(f"unknown acquisition {acquisition!r}")
    if acquisition == "variance+error" and reference is None:
        raise DomainError("variance+error acquisition needs reference labels for the pool")

    feats = [None] * len(candidates)

    def features(i):
        if feats[i] is None:
            feats[i] = featurize(candidates[i])
        return feats[i]

    labels: dict[int, np.ndarray] = {}

    def label(i):
        if i not in labels:
            try:
                labels[i] = np.atleast_1d(np.asarray(oracle(candidates[i]), dtype=float))
            except DecafError:
                raise
            except Exception as exc:
                raise OracleFailure(i, exc) from exc
        return labels[i]

    train = []
    for i in seed_indices:
        if i not in train:
            train.append(int(i))
            label(i)
    trace: list[TraceEntry] = []
    it = 0
    while True:
        fps, Y = [], []
        for i in train:
            for f in features(i):
                fps.append(f)
                Y.append(f.frame.project(labels[i]) if vector_labels else labels[i])
        models = _fit_components(fps, np.array(Y), search)

        rest = [i for i in range(len(candidates)) if i not in train]
        if not rest:
            trace.append(TraceEntry(it, len(train), 0.0, None))
            break
        owners = np.concatenate([[i] * len(features(i)) for i in rest])
        Q = np.vstack([f.values for i in rest for f in features(i)])
        std = np.zeros(len(rest))
        mean_err = np.zeros(len(rest))
        for c, m in enumerate(models):
            mu, var = m.predict_values(Q)
            s_all = np.sqrt(var)
            for k, i in enumerate(rest):
                sel = owners == i
                std[k] = max(std[k], s_all[sel].max())
                if acquisition == "variance+error":
                    ref = np.atleast_1d(np.asarray(reference(candidates[i]), dtype=float))
                    f0 = features(i)[0]
                    ref = f0.frame.project(ref)[c] if vector_labels else ref[c]
                    mean_err[k] = max(mean_err[k], abs(mu[sel][0] - ref))
        u = 2.0 * float(std.max())
        score = std**2 + mean_err if acquisition == "variance+error" else std
        pick = rest[int(np.argmax(score))]
        if u < stop.max_uncertainty or len(train) >= stop.max_samples:
            trace.append(TraceEntry(it, len(train), u, None))
            break
        trace.append(TraceEntry(it, len(train), u, pick))
        label(pick)
        train.append(pick)
        it += 1
    return ActiveLearningResult(models, train, labels, trace)
