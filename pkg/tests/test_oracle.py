import math

import numpy as np
import pytest

from rbmscramble.drivers import DriverSpec, OracleSizeError, dense_hamiltonian
from rbmscramble.oracle import (
    brute_force_otoc,
    commutator_strings,
    entanglement_entropy,
    ground_state,
    thermal_distribution,
    thermal_means,
    thermal_zz,
)
from rbmscramble.rbm import RbmParams

# Two-site TFIM with B = J0 = 1: ground energy -sqrt(5) (hand diagonalisation)
E0_TFIM2 = -2.23606797749979
# Ground state of -g(X1 + X2) - Z1 Z2 at g = 0.5: entanglement of one pair, bits
S_PAIR_G05 = 0.6008760366928565


def test_single_spin_ground_state():
    gs = ground_state(DriverSpec("TFIM", 1, B=1.0, J0=0.0))
    assert gs.energy == pytest.approx(-1.0, abs=1e-12)
    assert np.allclose(gs.amplitudes, [2**-0.5, 2**-0.5], atol=1e-12)


def test_two_site_ground_energy():
    assert ground_state(DriverSpec("TFIM", 2)).energy == pytest.approx(E0_TFIM2, abs=1e-12)


def test_classical_limit_degenerate():
    gs = ground_state(DriverSpec.from_g("TFIM", 4, 0.0))
    assert gs.energy == pytest.approx(-3.0, abs=1e-12)
    assert gs.degeneracy == 2
    weight = gs.amplitudes[0] ** 2 + gs.amplitudes[-1] ** 2
    assert weight == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("spec", [DriverSpec.from_g("TFIM", 6, 0.7), DriverSpec.from_g("cTFIM", 8, 1.3), DriverSpec.from_g("TFIM", 11, 1.0)])
def test_residual_and_perron_frobenius(spec):
    gs = ground_state(spec)
    from rbmscramble.drivers import sparse_hamiltonian

    H = sparse_hamiltonian(spec)
    assert np.linalg.norm(H @ gs.amplitudes - gs.energy * gs.amplitudes) <= 1e-9
    assert np.linalg.norm(gs.amplitudes) == pytest.approx(1.0, abs=1e-12)
    assert gs.positive and np.all(gs.amplitudes > -1e-12)


def test_energy_below_rayleigh_quotients():
    spec = DriverSpec("SK", 6, seed=2)
    gs = ground_state(spec)
    H = dense_hamiltonian(spec)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.standard_normal(64)
        assert gs.energy <= x @ H @ x / (x @ x) + 1e-12


def test_oracle_cap():
    with pytest.raises(OracleSizeError):
        ground_state(DriverSpec("TFIM", 15))


def test_entropy_examples():
    prod = np.zeros(16)
    prod[0] = 1.0
    assert entanglement_entropy(prod, 2) == 0.0
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert entanglement_entropy(bell, 1) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        entanglement_entropy(2 * bell, 1)
    with pytest.raises(ValueError):
        entanglement_entropy(bell, 0)


def test_ctfim_entropy_volume_law_values():
    for N in (4, 6, 8, 10):
        gs = ground_state(DriverSpec.from_g("cTFIM", N, 0.5))
        assert entanglement_entropy(gs.amplitudes, N // 2) == pytest.approx(N // 2 * S_PAIR_G05, abs=1e-9)


def test_entropy_reversal_symmetry():
    gs = ground_state(DriverSpec("SK", 7, seed=5))
    N = 7
    rev = gs.amplitudes.reshape([2] * N).transpose(list(range(N))[::-1]).reshape(-1)
    for c in range(1, N):
        assert entanglement_entropy(gs.amplitudes, c) == pytest.approx(entanglement_entropy(rev, N - c), abs=1e-10)


def test_thermal_zz_examples():
    w = 0.83
    X = RbmParams([0.0], [0.0], [[w]])
    assert thermal_zz(X, 0, 0) == pytest.approx(-math.tanh(w), abs=1e-14)
    X0 = RbmParams([0.3, -0.2], [0.5], [[0.0], [0.0]])
    zv, zh, zz = thermal_means(X0, 0, 0)
    assert zz == pytest.approx(zv * zh, abs=1e-14)
    assert zv == pytest.approx(-math.tanh(0.3)) and zh == pytest.approx(-math.tanh(0.5))


@pytest.mark.parametrize("seed", range(4))
def test_thermal_means_match_full_enumeration(seed):
    X = RbmParams.random(5, 5, seed=seed, std=0.8)
    joint, w = thermal_distribution(X)
    for k, m in [(0, 0), (2, 4), (4, 1)]:
        zv, zh, zz = thermal_means(X, k, m)
        assert zz == pytest.approx(w @ (joint[:, k] * joint[:, 5 + m]), abs=1e-12)
        assert zv == pytest.approx(w @ joint[:, k], abs=1e-12)
        assert zh == pytest.approx(w @ joint[:, 5 + m], abs=1e-12)
        assert -1 <= zz <= 1


def test_otoc_initial_value():
    X = RbmParams.random(3, 3, seed=1, std=0.5)
    s = brute_force_otoc(X, (1, 2), "x", "x", 0, 0, 0.0)
    assert abs(s.value - 1.0) <= 1e-12


def test_otoc_generator_sign_conjugates():
    X = RbmParams.random(2, 2, seed=3, std=0.6)
    a = brute_force_otoc(X, (0, 1), "x", "y", t=0.4).value
    b = brute_force_otoc(X, (0, 1), "x", "y", t=0.4, generator_sign=+1).value
    assert abs(a - b.conjugate()) <= 1e-12


def test_commutator_norm_follows_sin_squared():
    X = RbmParams.random(2, 2, seed=4, std=0.7)
    w = X.W[1, 0]
    for t in (0.0, 0.2, 0.9, 1.7):
        theta, phi = commutator_strings(X, (1, 0), "x", "x", t)
        D = theta.shape[0]
        fro2 = np.sum(np.abs(theta.toarray()) ** 2)
        assert fro2 == pytest.approx(4 * D * math.sin(2 * w * t) ** 2, abs=1e-10)
        # Theta and Phi split the unit operator norm between them
        assert fro2 + np.sum(np.abs(phi.toarray()) ** 2) == pytest.approx(4 * D, abs=1e-10)
