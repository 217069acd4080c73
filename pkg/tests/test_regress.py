import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from decaf.benchmarks import random_rotation, random_structure
from decaf.errors import DomainError, GridMismatch, OracleFailure
from decaf.fingerprint import Fingerprint
from decaf.frame import CanonicalFrame
from decaf.oracles import LennardJones, dimer
from decaf.regress import (
    GPHyperparameters,
    HyperSearch,
    StopCriterion,
    active_learn,
    fit,
    fit_fixed,
    fit_property,
    fit_vector,
    log_marginal_likelihood,
    predict,
    predict_set,
    se_kernel,
    weighted_sqdist,
)

EYE = CanonicalFrame(*np.eye(3))


def fp(values, weights=None, grid="g"):
    values = np.asarray(values, float)
    w = np.ones_like(values) if weights is None else np.asarray(weights, float)
    return Fingerprint(values, w, grid, EYE, np.zeros(3))


def toy_set(n=12, dim=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    w = rng.uniform(0.5, 2.0, dim)
    y = np.sin(X[:, 0]) + 0.5 * X[:, 1]
    return [fp(x, w) for x in X], y, X, w


def test_weighted_sqdist_matches_loop():
    _, _, X, w = toy_set()
    D2 = weighted_sqdist(X, X, w)
    for i in range(len(X)):
        for j in range(len(X)):
            assert D2[i, j] == pytest.approx(np.sum(w * (X[i] - X[j]) ** 2), abs=1e-10)


def test_se_kernel_value():
    a, b = fp([0.0, 0.0]), fp([3.0, 4.0])
    assert se_kernel(a, b, GPHyperparameters(2.0, 5.0)) == pytest.approx(4.0 * math.exp(-0.5))
    assert se_kernel(a, a, GPHyperparameters(2.0, 5.0)) == 4.0


def test_lml_matches_multivariate_normal():
    _, y, X, w = toy_set()
    D2 = weighted_sqdist(X, X, w)
    sigma, length, jitter = 1.3, 2.1, 1e-6
    K = sigma**2 * (np.exp(-0.5 * D2 / length**2) + jitter * np.eye(len(y)))
    ref = stats.multivariate_normal(np.zeros(len(y)), K).logpdf(y - y.mean())
    assert log_marginal_likelihood(D2, y - y.mean(), sigma, length, jitter) == pytest.approx(ref, rel=1e-10)


def test_lml_gradient_finite_differences():
    _, y, X, w = toy_set()
    D2 = weighted_sqdist(X, X, w)
    yc = y - y.mean()
    s, l = 0.9, 1.7
    _, g = log_marginal_likelihood(D2, yc, s, l, 1e-8, grad=True)
    h = 1e-6
    fd_s = (log_marginal_likelihood(D2, yc, s * math.exp(h), l) - log_marginal_likelihood(D2, yc, s * math.exp(-h), l)) / (2 * h)
    fd_l = (log_marginal_likelihood(D2, yc, s, l * math.exp(h)) - log_marginal_likelihood(D2, yc, s, l * math.exp(-h))) / (2 * h)
    assert g == pytest.approx([fd_s, fd_l], rel=1e-5)


def test_prediction_matches_closed_form():
    fps, y, X, w = toy_set()
    hp = GPHyperparameters(1.1, 2.3, 1e-8)
    m = fit_fixed(fps, y, hp)
    Q = np.random.default_rng(1).normal(size=(4, X.shape[1]))
    K = hp.output_scale**2 * (np.exp(-0.5 * weighted_sqdist(X, X, w) / hp.length_scale**2) + hp.jitter * np.eye(len(y)))
    Ks = hp.output_scale**2 * np.exp(-0.5 * weighted_sqdist(Q, X, w) / hp.length_scale**2)
    mean = y.mean() + Ks @ np.linalg.solve(K, y - y.mean())
    var = hp.output_scale**2 - np.einsum("ij,ji->i", Ks, np.linalg.solve(K, Ks.T))
    got_m, got_v = m.predict_values(Q)
    assert np.allclose(got_m, mean, atol=1e-8)
    assert np.allclose(got_v, var, atol=1e-8)


def test_fit_improves_on_starts_and_interpolates():
    fps, y, _, _ = toy_set(20)
    m = fit(list(zip(fps, y)), HyperSearch(n_starts=4))
    assert m.log_likelihood >= max(m.start_log_likelihoods) - 1e-9
    for f, yi in zip(fps, y):
        assert predict(m, f)[0] == pytest.approx(yi, abs=1e-2)


def test_fit_needs_two_points():
    fps, y, _, _ = toy_set(1)
    with pytest.raises(DomainError):
        fit(list(zip(fps, y)))


def test_constant_targets():
    fps, _, _, _ = toy_set(6)
    m = fit(list(zip(fps, np.full(6, 3.5))))
    assert predict(m, fp(np.zeros(5), fps[0].weights))[0] == pytest.approx(3.5)


def test_far_field_variance():
    fps, y, _, w = toy_set()
    m = fit_fixed(fps, y, GPHyperparameters(0.7, 1.0))
    mean, var = predict(m, fp(np.full(5, 1e3), w))
    assert var == pytest.approx(0.49, abs=1e-12)
    assert mean == pytest.approx(y.mean())


def test_duplicate_inputs_escalate_jitter():
    a = fp([1.0, 2.0])
    m = fit_fixed([a, a, a], [1.0, 1.0, 1.0], GPHyperparameters(1.0, 1.0, 1e-12))
    assert m.hyper.jitter >= 1e-12


def test_predict_grid_mismatch():
    fps, y, _, _ = toy_set()
    m = fit_fixed(fps, y, GPHyperparameters(1.0, 1.0))
    with pytest.raises(GridMismatch):
        m.predict(fp(np.zeros(5), grid="other"))
    with pytest.raises(GridMismatch):
        fit_fixed([fps[0], fp(np.zeros(5), grid="other")], [0.0, 1.0], GPHyperparameters(1.0, 1.0))


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_posterior_mean_linear_in_targets(a, b):
    fps, y, _, _ = toy_set()
    y2 = np.cos(np.arange(len(y)))
    hp = GPHyperparameters(1.0, 1.5)
    q = fp(np.linspace(-1, 1, 5), fps[0].weights)
    m1 = fit_fixed(fps, y, hp, center=False).predict(q)[0]
    m2 = fit_fixed(fps, y2, hp, center=False).predict(q)[0]
    m3 = fit_fixed(fps, a * y + b * y2, hp, center=False).predict(q)[0]
    assert m3 == pytest.approx(a * m1 + b * m2, abs=1e-8)


def test_adding_point_never_raises_variance():
    fps, y, _, w = toy_set()
    hp = GPHyperparameters(1.0, 1.5)
    q = fp(np.linspace(-1, 1, 5), w)
    v = [fit_fixed(fps[:k], y[:k], hp).predict(q)[1] for k in range(2, len(fps) + 1)]
    assert np.all(np.diff(v) <= 1e-12)


def test_predict_set_averages_mean_and_maxes_variance():
    fps, y, _, w = toy_set()
    m = fit_fixed(fps, y, GPHyperparameters(1.0, 1.5))
    qs = [fp(np.full(5, t), w) for t in (0.1, 0.5)]
    mean, var = predict_set(m, qs)
    single = [m.predict(q) for q in qs]
    assert mean == pytest.approx(np.mean([s[0] for s in single]))
    assert var == pytest.approx(max(s[1] for s in single))


def test_vector_model_equivariant_and_balanced(featurizer):
    rng = np.random.default_rng(0)
    lj = LennardJones(0.1, 1.5)
    train = [random_structure(rng, 3, ("C",), radius=2.0, min_separation=1.2) for _ in range(5)]
    # length scale below the typical training distance (~0.05) keeps the Gram well conditioned
    hp = GPHyperparameters(10.0, 0.02)
    model = fit_vector(featurizer, train, [lj(s)["forces"] for s in train], hypers=[hp] * 3)
    s = random_structure(rng, 3, ("C",), radius=2.0, min_separation=1.2)
    R = random_rotation(rng)
    assert np.allclose(model.predict(s.transformed(R)), model.predict(s) @ R.T, atol=1e-8)
    # a training structure is reproduced
    assert np.allclose(model.predict(train[0]), lj(train[0])["forces"], atol=1e-3)


def test_scalar_property_model(featurizer):
    rng = np.random.default_rng(1)
    lj = LennardJones(0.1, 1.5)
    train = [random_structure(rng, 3, ("C",), radius=2.0, min_separation=1.2) for _ in range(6)]
    model = fit_property(featurizer, train, [lj(s)["energy"] for s in train])
    pred, std = model.predict_with_uncertainty(train[2])
    assert pred == pytest.approx(lj(train[2])["energy"], abs=1e-3)
    assert std >= 0


def lj_pool():
    lj = LennardJones(0.1, 1.0)
    rs = np.linspace(0.95, 3.0, 40)
    return lj, rs, [dimer("N", r) for r in rs]


def test_active_learning_stop_predicate(featurizer):
    lj, rs, pool = lj_pool()
    stop = StopCriterion(0.5, 15)
    res = active_learn(lambda s: lj(s)["energy"], pool, lambda s: featurizer.fingerprints(s, 0), [0, 39], stop)
    last = res.trace[-1]
    assert last.acquired is None
    assert last.max_uncertainty < stop.max_uncertainty or last.n_train >= stop.max_samples
    for t in res.trace[:-1]:
        assert t.max_uncertainty >= stop.max_uncertainty
    assert len(set(res.train_indices)) == len(res.train_indices)
    assert [t.n_train for t in res.trace] == list(range(2, 2 + len(res.trace)))


def test_active_learning_budget(featurizer):
    lj, rs, pool = lj_pool()
    res = active_learn(lambda s: lj(s)["energy"], pool, lambda s: featurizer.fingerprints(s, 0), [0, 39], StopCriterion(1e-9, 4))
    assert len(res.train_indices) == 4


def test_active_learning_variance_plus_error(featurizer):
    lj, rs, pool = lj_pool()
    res = active_learn(
        lambda s: lj(s)["energy"],
        pool,
        lambda s: featurizer.fingerprints(s, 0),
        [0, 39],
        StopCriterion(1e-9, 5),
        acquisition="variance+error",
        reference=lambda s: lj(s)["energy"],
    )
    assert len(res.train_indices) == 5
    with pytest.raises(DomainError):
        active_learn(lambda s: 0.0, pool, lambda s: featurizer.fingerprints(s, 0), [0], acquisition="variance+error")


def test_active_learning_oracle_failure(featurizer):
    _, _, pool = lj_pool()

    def broken(s):
        raise RuntimeError("boom")

    with pytest.raises(OracleFailure):
        active_learn(broken, pool, lambda s: featurizer.fingerprints(s, 0), [0, 1])


def test_active_learning_needs_seeds(featurizer):
    _, _, pool = lj_pool()
    with pytest.raises(DomainError):
        active_learn(lambda s: 0.0, pool, lambda s: featurizer.fingerprints(s, 0), [])


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0, 0.0)])
def test_hyperparameter_validation(bad):
    with pytest.raises(DomainError):
        GPHyperparameters(*bad)
