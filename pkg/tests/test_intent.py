import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from finpersona.exceptions import ConfigurationError, DataError
from finpersona.intent import (
    IMSKHMM,
    HmmModel,
    KalmanParams,
    align_and_score,
    baum_welch,
    decoded_frame,
    fit_imsk_hmm,
    forward_backward,
    hungarian_alignment,
    kalman_smooth,
    mean_shift_recenter,
    path_log_prob,
    viterbi,
    viterbi_batch,
)


def random_model(rng, S, F=1):
    A = rng.dirichlet(np.ones(S), size=S)
    return HmmModel(
        initial=rng.dirichlet(np.ones(S)),
        transitions=A,
        emission_means=rng.normal(0, 2, size=(S, F)),
        emission_vars=rng.uniform(0.5, 2.0, size=(S, F)),
    )


def enumerate_paths(model, obs):
    K, S = len(obs), model.n_states
    return {p: path_log_prob(model, obs, np.array(p)) for p in itertools.product(range(S), repeat=K)}


def test_kalman_constant_series_fixed_point():
    assert np.allclose(kalman_smooth(np.full(6, 3.5), KalmanParams(0.7)), 3.5)


def test_kalman_huge_ratio_returns_input(rng):
    y = rng.normal(size=(20, 6))
    assert np.abs(kalman_smooth(y, KalmanParams(1e9)) - y).max() < 1e-3


def test_kalman_tiny_ratio_returns_mean(rng):
    y = rng.normal(size=6)
    assert np.allclose(kalman_smooth(y, KalmanParams(1e-12)), y.mean(), atol=1e-6)


def test_kalman_matches_scalar_recursion(rng):
    y = rng.normal(size=4)
    q, r = 1.0, 1.0
    # diffuse start: the first filtered state equals the first observation
    xf, pf, xp, pp = [y[0]], [r], [None], [None]
    for t in range(1, 4):
        pred_p = pf[-1] + q
        k = pred_p / (pred_p + r)
        xp.append(xf[-1])
        pp.append(pred_p)
        xf.append(xf[-1] + k * (y[t] - xf[-1]))
        pf.append((1 - k) * pred_p)
    xs = [0.0] * 4
    xs[3] = xf[3]
    for t in range(2, -1, -1):
        c = pf[t] / pp[t + 1]
        xs[t] = xf[t] + c * (xs[t + 1] - xp[t + 1])
    assert np.allclose(kalman_smooth(y, KalmanParams(1.0)), xs, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_kalman_commutes_with_shift(series, c, ratio):
    y = np.array(series)
    lhs = kalman_smooth(y + c, KalmanParams(ratio))
    rhs = kalman_smooth(y, KalmanParams(ratio)) + c
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(c) + np.abs(y).max()))


def test_kalman_errors():
    with pytest.raises(DataError):
        kalman_smooth(np.array([1.0, np.nan]))
    with pytest.raises(ConfigurationError):
        KalmanParams(0.0)


def test_single_state_collapse(rng):
    obs = rng.normal(size=(5, 1))
    m = HmmModel(np.ones(1), np.ones((1, 1)), np.zeros((1, 1)), np.ones((1, 1)))
    fb = forward_backward(m, obs)
    assert fb["log_likelihood"] == pytest.approx(norm.logpdf(obs).sum(), rel=1e-12)
    assert np.allclose(fb["gamma"], 1.0)
    assert (viterbi(m, obs)["states"] == 0).all()


def test_forward_backward_matches_enumeration(rng):
    for S, K in ((2, 3), (3, 4), (3, 5), (2, 5)):
        m = random_model(rng, S)
        obs = rng.normal(size=(K, 1))
        brute = np.logaddexp.reduce(list(enumerate_paths(m, obs).values()))
        got = forward_backward(m, obs)["log_likelihood"]
        assert abs(got - brute) <= 1e-9 * abs(brute)


def test_gamma_rows_normalized(rng):
    m = random_model(rng, 4, 2)
    fb = forward_backward(m, rng.normal(size=(30, 2)))
    assert np.allclose(fb["gamma"].sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(fb["xi"].sum(axis=(1, 2)), 1.0, atol=1e-9)


def test_no_underflow_long_sequence(rng):
    m = random_model(rng, 3)
    fb = forward_backward(m, rng.normal(size=(10000, 1)))
    assert np.isfinite(fb["log_likelihood"])


def test_forced_path_concentrates():
    S = 3
    perm = np.roll(np.eye(S), 1, axis=1)
    m = HmmModel(np.array([1.0, 0.0, 0.0]), perm, np.array([[0.0], [10.0], [20.0]]), np.full((S, 1), 1e-4))
    obs = np.array([[0.0], [10.0], [20.0], [0.0]])
    gamma = forward_backward(m, obs)["gamma"]
    assert np.all(gamma[np.arange(4), [0, 1, 2, 0]] >= 0.999)


def test_viterbi_matches_enumeration(rng):
    for _ in range(10):
        m = random_model(rng, 3)
        obs = rng.normal(size=(4, 1))
        scores = enumerate_paths(m, obs)
        best = max(scores, key=scores.get)
        got = viterbi(m, obs)
        assert tuple(got["states"]) == best
        assert got["log_likelihood"] == pytest.approx(scores[best], abs=1e-12)


def test_viterbi_dominant_emissions(rng):
    S = 4
    m = HmmModel(np.full(S, 1 / S), np.full((S, S), 1 / S), np.arange(S)[:, None] * 10.0, np.full((S, 1), 0.1))
    truth = rng.integers(0, S, size=12)
    assert np.array_equal(viterbi(m, truth[:, None] * 10.0)["states"], truth)


def test_viterbi_beats_random_paths(rng):
    m = random_model(rng, 5, 2)
    obs = rng.normal(size=(8, 2))
    best = viterbi(m, obs)["log_likelihood"]
    for _ in range(1000):
        assert best >= path_log_prob(m, obs, rng.integers(0, 5, size=8)) - 1e-12


def test_viterbi_batch_agrees(rng):
    m = random_model(rng, 3, 2)
    obs = rng.normal(size=(7, 6, 2))
    paths, lps = viterbi_batch(m, obs)
    for i in range(7):
        one = viterbi(m, obs[i])
        assert np.array_equal(paths[i], one["states"])
        assert lps[i] == pytest.approx(one["log_likelihood"])


def test_mean_shift_flat_kernel_limit(rng):
    X = rng.normal(size=(50, 2))
    G = rng.dirichlet(np.ones(3), size=50)
    means = rng.normal(size=(3, 2))
    want = (G.T @ X) / G.sum(0)[:, None]
    assert np.allclose(mean_shift_recenter(means, X, G, np.inf), want, atol=1e-12)
    assert np.allclose(mean_shift_recenter(means, X, G, 1e8), want, atol=1e-6)


def test_mean_shift_fixed_point():
    X = np.array([[-1.0], [1.0], [-2.0], [2.0]])
    got = mean_shift_recenter(np.zeros((1, 1)), X, np.ones((4, 1)), 0.7)
    assert abs(got[0, 0]) < 1e-9


def test_mean_shift_moves_toward_heavier_cluster():
    X = np.r_[np.full(30, -2.0), np.full(10, 2.0)][:, None]
    G = np.ones((40, 1))
    m0 = np.array([[0.5]])
    h = 1.5
    w = np.exp(-0.5 * (X[:, 0] - 0.5) ** 2 / h**2)
    want = (w @ X[:, 0]) / w.sum()
    got = mean_shift_recenter(m0, X, G, h)
    assert got[0, 0] == pytest.approx(want, abs=1e-12)
    assert got[0, 0] < 0.5


def test_mean_shift_vanishing_weights_keep_mean():
    with pytest.warns(RuntimeWarning):
        got = mean_shift_recenter(np.array([[1e6]]), np.zeros((3, 1)), np.ones((3, 1)), 1e-3)
    assert got[0, 0] == 1e6


def sample_hmm(rng, model, n, K):
    S = model.n_states
    states = np.empty((n, K), dtype=np.int64)
    states[:, 0] = [rng.choice(S, p=model.initial) for _ in range(n)]
    for t in range(1, K):
        u = rng.random(n)[:, None]
        states[:, t] = (u > np.cumsum(model.transitions[states[:, t - 1]], axis=1)).sum(1)
    obs = model.emission_means[states] + np.sqrt(model.emission_vars[states]) * rng.normal(size=(n, K, model.emission_means.shape[1]))
    return states, obs


def _known_model():
    A = 0.5 * np.eye(5) + 0.1
    means = np.array([[-4.0, -4.0], [-2.0, -2.0], [0.0, 0.0], [2.0, 2.0], [4.0, 4.0]])
    return HmmModel(np.full(5, 0.2), A, means, np.full((5, 2), 0.25)).validate()


def test_baum_welch_recovers_transitions(rng):
    true = _known_model()
    _, obs = sample_hmm(rng, true, 3000, 6)
    from finpersona.intent import initialize_hmm

    init = initialize_hmm(obs, ("a", "b"), 5, 0)
    fitted, history = baum_welch(obs, init, ("a", "b"), max_iter=50, tol=0.0, bandwidth=np.inf)
    order = np.argsort(fitted.emission_means[:, 0])
    A = fitted.transitions[np.ix_(order, order)]
    assert np.abs(A - true.transitions).max() <= 0.05
    assert all(b >= a - 1e-8 * abs(a) for a, b in zip(history, history[1:]))


def test_flat_kernel_em_is_monotone(rng):
    _, obs = sample_hmm(rng, _known_model(), 400, 6)
    from finpersona.intent import initialize_hmm

    init = initialize_hmm(obs, ("a", "b"), 5, 1)
    _, history = baum_welch(obs, init, ("a", "b"), max_iter=30, tol=-np.inf, bandwidth=np.inf)
    diffs = np.diff(history)
    assert np.all(diffs >= -1e-8 * np.abs(history[1:]))


def test_estimator_zero_iterations_returns_init(small_data):
    _, _, months = small_data
    est = IMSKHMM(max_iter=0).fit(months)
    for a, b in zip(vars(est.model_).values(), vars(est.init_model_).values()):
        assert np.array_equal(a, b)


def test_estimator_deterministic(small_data):
    _, _, months = small_data
    a = fit_imsk_hmm(months, max_iter=20)
    b = fit_imsk_hmm(months, max_iter=20)
    assert a.to_dict() == b.to_dict()


def test_estimator_empty_rejected():
    empty = pd.DataFrame({"customer_id": [], "month_index": [], "logins": [], "sessions": []})
    with pytest.raises(DataError):
        IMSKHMM(features=("logins", "sessions")).fit(empty)


def test_estimator_decodes_generator_intent(small_data):
    _, _, months = small_data
    est = IMSKHMM().fit(months)
    dec = est.decode(months)
    r = align_and_score(dec, months)
    assert r["accuracy"] >= 0.6
    est.model_.validate()
    assert est.get_params()["n_states"] == 5
    assert np.isfinite(est.score(months))


def test_align_permutation_invariant(rng):
    truth = rng.integers(0, 5, size=200)
    perm = rng.permutation(5)
    ids = np.arange(40)
    tframe = decoded_frame(ids, truth.reshape(40, 5)).rename(columns={"decoded_state": "true_intent"})
    dframe = decoded_frame(ids, perm[truth].reshape(40, 5))
    assert align_and_score(dframe, tframe)["accuracy"] == 1.0


def test_align_chance_level(rng):
    n = 50000
    truth = rng.integers(0, 5, size=n)
    pred = rng.integers(0, 5, size=n)
    ids = np.arange(n // 5)
    tframe = decoded_frame(ids, truth.reshape(-1, 5)).rename(columns={"decoded_state": "true_intent"})
    acc = align_and_score(decoded_frame(ids, pred.reshape(-1, 5)), tframe)["accuracy"]
    assert abs(acc - 0.2) <= 0.02


def test_hungarian_matches_exhaustive(rng):
    for _ in range(20):
        pred, truth = rng.integers(0, 3, size=30), rng.integers(0, 3, size=30)
        mapping, conf = hungarian_alignment(pred, truth, 3)
        best = max(sum(conf[p[j], j] for j in range(3)) for p in itertools.permutations(range(3)))
        assert np.sum(mapping[pred] == truth) == best


def test_align_coverage_mismatch(rng):
    d = decoded_frame(np.arange(3), np.zeros((3, 2), dtype=int))
    t = d.rename(columns={"decoded_state": "true_intent"}).iloc[:-1]
    with pytest.raises(DataError):
        align_and_score(d, t)
