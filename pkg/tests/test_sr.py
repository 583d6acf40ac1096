import math
import warnings

import numpy as np
import pytest

from rbmscramble.drivers import DriverSpec, dense_hamiltonian
from rbmscramble.oracle import ground_state
from rbmscramble.rbm import RbmParams, log_derivatives, log_psi
from rbmscramble.sampler import SamplerConfig, sample
from rbmscramble.spins import all_configs, spins_to_index
from rbmscramble.sr import (
    SrConfig,
    estimate_F_S,
    exact_energy,
    fisher_largest_eig,
    local_energies,
    local_energy,
    sr_update,
    train,
)


def psi2_weights(X):
    lp = 2 * log_psi(X, all_configs(X.n))
    return np.exp(lp - lp.max())


def test_local_energy_vectorised_matches_reference():
    rng = np.random.default_rng(0)
    for spec in (DriverSpec.from_g("TFIM", 5, 0.8), DriverSpec("YZ", 5, B=0.4, gamma_yz=0.3), DriverSpec("SK", 5, seed=1)):
        X = RbmParams.random(5, 4, seed=2, std=0.6)
        V = (1 - 2 * rng.integers(0, 2, (30, 5))).astype(np.int8)
        ref = [local_energy(X, v, spec) for v in V]
        assert np.allclose(local_energies(X, V, spec), ref, atol=1e-12)


def test_local_energy_is_H_psi_over_psi():
    spec = DriverSpec("YZ", 4, B=0.7, gamma_yz=-0.2)
    X = RbmParams.random(4, 3, seed=5, std=0.5)
    V = all_configs(4)
    psi = np.exp(log_psi(X, V))
    assert np.allclose(local_energies(X, V, spec), dense_hamiltonian(spec) @ psi / psi, atol=1e-12)


def test_zero_variance_on_exact_eigenstate():
    spec = DriverSpec.from_g("TFIM", 4, 1.3)
    gs = ground_state(spec)
    table = np.log(gs.amplitudes)

    def lookup(v):
        return table[spins_to_index(np.asarray(v, dtype=np.int8))]

    e = np.array([local_energy(None, v, spec, lookup) for v in all_configs(4)])
    assert np.var(e) <= 1e-20
    assert np.allclose(e, gs.energy, atol=1e-10)


def test_ferromagnetic_basin_and_classical_limit():
    N = 5
    X = RbmParams(-3.0 * np.ones(N), np.zeros(2), np.zeros((N, 2)))
    spec = DriverSpec.from_g("TFIM", N, 0.0)
    assert local_energy(X, np.ones(N, np.int8), spec) == pytest.approx(-(N - 1))
    Y = RbmParams.random(N, 3, seed=1, std=1.0)
    v = np.array([1, -1, -1, 1, 1], np.int8)
    assert local_energy(Y, v, spec) == pytest.approx(-(-1 + 1 - 1 + 1))


def test_F_S_identical_configs_vanish():
    X = RbmParams.random(3, 2, seed=0, std=0.4)
    F, S = estimate_F_S(np.tile([1, -1, 1], (20, 1)), X, DriverSpec("TFIM", 3))
    assert np.abs(F).max() <= 1e-28 and np.abs(S).max() <= 1e-28


def test_F_S_empty_batch():
    X = RbmParams.random(3, 2, seed=0)
    with pytest.raises(ValueError):
        estimate_F_S(np.zeros((0, 3)), X, DriverSpec("TFIM", 3))


def test_F_exact_weights_match_reference():
    for n, p in [(2, 2), (3, 3)]:
        X = RbmParams.random(n, p, seed=n, std=0.7)
        spec = DriverSpec.from_g("TFIM", n, 0.9)
        V = all_configs(n)
        w = psi2_weights(X)
        F, S = estimate_F_S(V, X, spec, weights=w)
        # independent reference: explicit 2^n sums of centred products
        P = w / w.sum()
        D = np.array([log_derivatives(X, v) for v in V])
        E = np.array([local_energy(X, v, spec) for v in V])
        Fref = np.zeros((X.n_params, X.n_params))
        mean = sum(P[s] * D[s] for s in range(len(V)))
        for s in range(len(V)):
            Fref += P[s] * np.outer(D[s] - mean, D[s] - mean)
        Sref = sum(P[s] * (E[s] - P @ E) * (D[s] - mean) for s in range(len(V)))
        assert np.allclose(F, Fref, atol=1e-12) and np.allclose(S, Sref, atol=1e-12)
        assert np.all(np.linalg.eigvalsh(F) >= -1e-12)


def test_F_symmetric_on_batch():
    X = RbmParams.random(5, 5, seed=3, std=0.6)
    batch = sample(X, SamplerConfig(n_chains=300, n_sweeps_per_sample=2, seed=0))
    F, _ = estimate_F_S(batch, X, DriverSpec("TFIM", 5))
    assert np.array_equal(F, F.T)


def test_sr_update_examples():
    X = RbmParams.random(1, 1, seed=0, std=0.3)
    cfg = SrConfig(learning_rate=0.1, shift=0.01)
    assert np.array_equal(sr_update(X, np.eye(3), np.zeros(3), cfg).flatten(), X.flatten())
    S = np.array([0.2, -0.1, 0.05])
    Y = sr_update(X, np.zeros((3, 3)), S, cfg)
    assert np.allclose(X.flatten() - Y.flatten(), 0.1 * S / 0.01, atol=1e-15)
    # hand-solved system: (F + 0.01 I) delta = S with delta = (1, -2, 0.5)
    F = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]]) - 0.01 * np.eye(3)
    delta = np.array([1.0, -2.0, 0.5])
    S = np.array([0.0, -4.5, 0.0])
    Z = sr_update(X, F, S, SrConfig(learning_rate=1.0, shift=0.01))
    assert np.allclose(X.flatten() - Z.flatten(), delta, atol=1e-12)
    with pytest.raises(ValueError):
        sr_update(X, np.full((3, 3), np.nan), S, cfg)


def test_sr_update_singular_falls_back():
    X = RbmParams.zeros(1, 1)
    F = -np.eye(3) * 0.01  # F + shift I = 0: Cholesky fails, least squares gives 0
    Y = sr_update(X, F, np.ones(3), SrConfig())
    assert np.all(np.isfinite(Y.flatten()))


def test_fisher_power_iteration():
    assert fisher_largest_eig(np.eye(5)) == pytest.approx(1.0, rel=1e-12)
    assert fisher_largest_eig(np.diag([1.0, 2.0, 7.0])) == pytest.approx(7.0, rel=1e-10)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((50, 80))
    F = A @ A.T / 80
    assert abs(fisher_largest_eig(F) - np.linalg.eigvalsh(F)[-1]) <= 1e-6 * np.linalg.eigvalsh(F)[-1]
    with pytest.raises(ValueError):
        fisher_largest_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_fisher_nonconvergence_warns():
    F = np.diag([1.0, -1.0])  # equal magnitudes of opposite sign never settle
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fisher_largest_eig(F, max_iter=50)
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_energy_estimate_respects_variational_bound():
    spec = DriverSpec.from_g("TFIM", 4, 1.0)
    e0 = ground_state(spec).energy
    X = RbmParams.random(4, 4, seed=1, std=0.3)
    batch = sample(X, SamplerConfig(n_chains=2000, n_sweeps_per_sample=4, seed=2))
    E = local_energies(X, batch.configs, spec, batch.theta)
    assert E.mean() >= e0 - 3 * E.std() / math.sqrt(E.size)
    assert abs(E.mean() - exact_energy(X, spec)) <= 4 * E.std() / math.sqrt(E.size)


def test_train_zero_iterations():
    X0 = RbmParams.random(4, 4, seed=0)
    X, hist = train(DriverSpec("TFIM", 4), SrConfig(max_iterations=0), X0=X0)
    assert X is X0 and len(hist) == 0


def test_train_tfim_converges_and_replays():
    spec = DriverSpec.from_g("TFIM", 4, 1.0)
    cfg = SamplerConfig(n_chains=500, seed=4)
    X1, h1 = train(spec, SrConfig(), cfg, init_seed=3)
    X2, h2 = train(spec, SrConfig(), cfg, init_seed=3)
    assert h1.converged and h1.best_rel_error() <= 1e-3
    assert len(h1) <= 200
    assert np.array_equal(X1.flatten(), X2.flatten())
    assert [(r.energy, r.variance, r.rel_error) for r in h1.records] == [(r.energy, r.variance, r.rel_error) for r in h2.records]
    assert np.array_equal(h1.snapshot(h1.best_iteration).flatten(), X1.flatten())


def test_train_pure_field_gives_zero_magnetisation():
    spec = DriverSpec("TFIM", 4, B=1.0, J0=0.0)
    X, hist = train(spec, SrConfig(), SamplerConfig(n_chains=1000, seed=1), init_seed=2)
    assert hist.best_rel_error() <= 1e-3
    V = all_configs(4)
    w = psi2_weights(X)
    m_exact = (w / w.sum()) @ V
    # an energy error of 1e-3 relative leaves little room for net polarisation
    assert np.all(np.abs(m_exact) <= 0.1)
    batch = sample(X, SamplerConfig(n_chains=4000, seed=9))
    m = batch.configs.astype(float).mean(axis=0)
    se = batch.configs.astype(float).std(axis=0) / math.sqrt(len(batch))
    assert np.all(np.abs(m - m_exact) <= 4 * se)


def test_train_variance_rule_beyond_oracle(monkeypatch):
    import rbmscramble.sr as sr

    monkeypatch.setattr(sr, "ORACLE_CAP", 2)
    X, hist = sr.train(DriverSpec.from_g("TFIM", 4, 2.0), SrConfig(max_iterations=60), SamplerConfig(n_chains=300), init_seed=1)
    assert all(r.rel_error is None for r in hist.records)
    if hist.converged:
        tail = hist.records[-10:]
        assert all(r.variance / 4 < 1e-3 for r in tail)
