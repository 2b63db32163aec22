import numpy as np
import pytest
from scipy.stats import binom

from longimpute.basis import TimeGrid, make_bspline_basis
from longimpute.errors import ValidationError
from longimpute.simulation import (
    SimulationSpec,
    decay_spectrum,
    gen_cohort,
    gen_covariance,
    r1,
    r2,
    simulate_study,
)


def test_reference_spectra():
    tail = [0.1 * np.exp(-3), 0.1 * np.exp(-4), 0.1 * np.exp(-5), 0.1 * np.exp(-6)]
    np.testing.assert_allclose(r1(), [1, 0.4, 0.005] + tail, rtol=0, atol=1e-15)
    np.testing.assert_allclose(r2(), [1.3, 0.2, 0.005] + tail, rtol=0, atol=1e-15)
    assert decay_spectrum(2, [5, 4, 3]).tolist() == [5, 4]


def test_covariance_spectrum_r1():
    Q = gen_covariance(r1(), np.random.default_rng(0))
    ev = np.sort(np.linalg.eigvalsh(Q))[::-1]
    np.testing.assert_allclose(ev, r1(), atol=1e-10)


def test_covariance_rank_one_and_identity():
    rng = np.random.default_rng(1)
    Q = gen_covariance([1, 0, 0, 0, 0], rng)
    assert np.trace(Q) == pytest.approx(1.0)
    assert np.linalg.matrix_rank(Q, tol=1e-10) == 1
    np.testing.assert_allclose(np.linalg.eigvalsh(gen_covariance(np.ones(6), rng)), 1.0, atol=1e-10)


@pytest.mark.parametrize("seed", range(10))
def test_covariance_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    r = rng.exponential(size=7)
    Q = gen_covariance(r, rng)
    assert np.max(np.abs(Q - Q.T)) <= 1e-12
    assert np.linalg.eigvalsh(Q).min() >= -1e-10


def test_covariance_rejects_negative():
    with pytest.raises(ValidationError):
        gen_covariance([1.0, -0.1], np.random.default_rng(0))


def test_cohort_degenerate_groups():
    X = gen_cohort(np.zeros(4), np.zeros(4), 4, 9, np.random.default_rng(2))
    top, bottom = X[:3], X[3:]
    assert np.all(top == top[0]) and np.all(bottom == bottom[0])
    # 2 mu - (-mu) = 3 mu, with mu = -bottom
    np.testing.assert_allclose(top[0] - bottom[0], -3 * bottom[0], atol=1e-14)


def test_cohort_floor_rule():
    X = gen_cohort(np.zeros(3), np.zeros(3), 3, 3, np.random.default_rng(0))
    assert (X == X[0]).all(axis=1).sum() == 1


def test_cohort_rejects_small_n():
    with pytest.raises(ValidationError):
        gen_cohort(np.ones(3), np.ones(3), 3, 2, np.random.default_rng(0))


def test_cohort_group_means_monte_carlo():
    X = gen_cohort(r1(), r2(), 7, 30000, np.random.default_rng(3))
    g1, g2 = X[:10000], X[10000:]
    est1, est2 = g1.mean(0), -2 * g2.mean(0)
    se = np.sqrt(g1.var(0) / len(g1) + 4 * g2.var(0) / len(g2))
    assert np.all(np.abs(est1 - est2) <= 5 * se)


def test_noiseless_full_observation_matches_truth():
    sim = simulate_study(SimulationSpec(N=12, T_gen=51, T_fit=51, obs_fraction=1.0, noise_sd=0.0, seed=4))
    for var in ("X1", "X2", "Y"):
        Y = sim.matrices[var]
        assert Y.nnz == 12 * 51
        np.testing.assert_allclose(Y.to_dense(), sim.truth[var], rtol=0, atol=1e-12)


def test_observed_counts_within_binomial_interval():
    lo, hi = binom.interval(0.99, 100 * 31, 0.10)
    for seed in range(20):
        sim = simulate_study(SimulationSpec(seed=seed))
        for var in ("X1", "X2", "Y"):
            assert lo <= sim.matrices[var].nnz <= hi


def test_reproducible():
    a = simulate_study(SimulationSpec(seed=9))
    b = simulate_study(SimulationSpec(seed=9))
    for var in ("X1", "X2", "Y"):
        np.testing.assert_array_equal(a.matrices[var].values, b.matrices[var].values)
        np.testing.assert_array_equal(a.matrices[var].rows, b.matrices[var].rows)
        np.testing.assert_array_equal(a.truth[var], b.truth[var])
    assert a.records == b.records


def test_response_is_sum_of_cohorts():
    sim = simulate_study(SimulationSpec(seed=1))
    c = sim.coefficients
    np.testing.assert_allclose(sim.truth["Y"] - sim.truth["X1"] - sim.truth["X2"], (c["Y"] - c["X1"] - c["X2"]) @ make_bspline_basis(sim.grid).values.T)


def test_truth_in_spline_span():
    sim = simulate_study(SimulationSpec(seed=2))
    B = make_bspline_basis(sim.grid, 7).values
    P = B @ np.linalg.pinv(B)
    for var in ("X1", "X2", "Y"):
        T = sim.truth[var]
        assert np.max(np.abs(T - T @ P.T)) <= 1e-10


def test_shared_mask():
    sim = simulate_study(SimulationSpec(seed=3, shared_mask=True))
    assert set(sim.X1.entries) == set(sim.Y.entries)


@pytest.mark.parametrize(
    "kw", [dict(obs_fraction=0.0), dict(obs_fraction=1.2), dict(noise_sd=-1.0), dict(N=2), dict(K=40)]
)
def test_spec_validation(kw):
    with pytest.raises(ValidationError):
        SimulationSpec(**kw)


def test_rows_follow_subject_ids():
    sim = simulate_study(SimulationSpec(seed=5, N=30))
    assert sim.subject_ids == [f"s{i:04d}" for i in range(30)]
    grid = sim.grid
    for r in sim.records[:50]:
        i = int(r.subject_id[1:])
        j = int(np.argmin(np.abs(grid.points - r.time)))
        assert sim.matrices[r.variable].entries[(i, j)] == r.value
