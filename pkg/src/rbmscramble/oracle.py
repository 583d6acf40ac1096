"""Exact reference computations.

* ground states of the drivers by dense or sparse eigensolves,
* Von Neumann entropy across a cut,
* thermal expectations of the learner by enumeration,
* brute-force OTOCs on the joint visible+hidden register.

The learner's generator E(v, h) is diagonal in the computational basis, so
time evolution of an operator is an elementwise phase rescaling:
``(e^{-iEt} A e^{iEt})_{rc} = e^{-i(E_r - E_c)t} A_{rc}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .drivers import DriverSpec, OracleSizeError, sparse_hamiltonian
from .rbm import RbmParams, log_psi, theta
from .spins import all_configs, index_to_spins, site_bit

ORACLE_CAP = 14
DENSE_EIGH_DIM = 1024
THERMAL_CAP = 20
OTOC_CAP = 12


class EigensolverError(RuntimeError):
    """Eigensolver failed to converge or produced an inaccurate pair."""


@dataclass
class GroundStateResult:
    energy: float
    amplitudes: np.ndarray
    positive: bool
    degeneracy: int = 1


def ground_state(spec: DriverSpec, cap: int = ORACLE_CAP, residual_tol: float = 1e-9) -> GroundStateResult:
    """Lowest eigenpair of the driver; sign fixed so the largest-magnitude amplitude is positive."""
    if spec.N > cap:
        raise OracleSizeError(f"N={spec.N} exceeds oracle cap {cap}")
    H = sparse_hamiltonian(spec, cap=cap)
    dim = H.shape[0]
    if dim <= DENSE_EIGH_DIM:
        vals, vecs = np.linalg.eigh(H.toarray())
        e0, psi = float(vals[0]), vecs[:, 0]
        gap_vals = vals[:2]
    else:
        try:
            vals, vecs = spla.eigsh(H, k=2, which="SA", tol=1e-13, v0=np.ones(dim), maxiter=100000)
        except spla.ArpackNoConvergence as exc:
            raise EigensolverError(str(exc)) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        e0, psi = float(vals[0]), vecs[:, 0]
        gap_vals = vals
    psi = psi / np.linalg.norm(psi)
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    resid = np.linalg.norm(H @ psi - e0 * psi)
    if resid > residual_tol:
        raise EigensolverError(f"eigen-residual {resid:.3e} exceeds {residual_tol:.1e}")
    degeneracy = 1 + int(len(gap_vals) > 1 and abs(gap_vals[1] - gap_vals[0]) <= 1e-9 * max(1.0, abs(e0)))
    tol = 1e-12
    positive = bool(np.all(psi >= -tol) or np.all(psi <= tol))
    return GroundStateResult(e0, psi, positive, degeneracy)


def entanglement_entropy(state, cut: int, norm_tol: float = 1e-10) -> float:
    """Von Neumann entropy (bits) of sites [0, cut) versus [cut, N)."""
    state = np.asarray(state)
    N = int(round(np.log2(state.size)))
    if 2**N != state.size:
        raise ValueError("state length is not a power of two")
    if not 1 <= cut <= N - 1:
        raise ValueError(f"cut must lie in [1, {N - 1}]")
    if abs(np.linalg.norm(state) - 1.0) > norm_tol:
        raise ValueError("state is not normalised")
    s = np.linalg.svd(state.reshape(2**cut, 2 ** (N - cut)), compute_uv=False)
    p = s**2
    p = p[p > 1e-300]
    return float(max(0.0, -(p * np.log2(p)).sum()))


# ------------------------------------------------------------ thermal averages


def thermal_means(X: RbmParams, k: int, m: int, cap: int = THERMAL_CAP, chunk: int = 1 << 16):
    """(<z_v_k>, <z_h_m>, <z_v_k z_h_m>) over the learner's thermal state.

    Visible configurations are weighted by psi(v) (the visible marginal);
    the hidden spin is integrated analytically, <h_m | v> = -tanh(theta_m).
    """
    n = X.n
    if n > cap:
        raise OracleSizeError(f"n={n} exceeds thermal enumeration cap {cap}")
    total = 2**n
    shift = None
    acc = np.zeros(4)
    for start in range(0, total, chunk):
        v = index_to_spins(np.arange(start, min(total, start + chunk)), n).astype(float)
        lp = log_psi(X, v)
        if shift is None:
            shift = float(lp.max())
        elif lp.max() > shift:
            acc *= np.exp(shift - lp.max())
            shift = float(lp.max())
        w = np.exp(lp - shift)
        hm = -np.tanh(theta(X, v)[:, m])
        acc += [w.sum(), w @ v[:, k], w @ hm, w @ (v[:, k] * hm)]
    return acc[1] / acc[0], acc[2] / acc[0], acc[3] / acc[0]


def thermal_zz(X: RbmParams, k: int, m: int, cap: int = THERMAL_CAP) -> float:
    """<sigma^z(v_k) sigma^z(h_m)> over the learner's thermal state."""
    return float(thermal_means(X, k, m, cap)[2])


def learner_energy(X: RbmParams, joint) -> np.ndarray:
    """Ising energy E(v, h) for joint configurations ``(..., n + p)``."""
    joint = np.asarray(joint, dtype=float)
    v, h = joint[..., : X.n], joint[..., X.n :]
    return v @ X.a + h @ X.b + np.einsum("...i,ij,...j->...", v, X.W, h)


def thermal_distribution(X: RbmParams, cap: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Joint configurations (visible first) and normalised Boltzmann weights."""
    L = X.n + X.p
    if L > cap:
        raise OracleSizeError(f"n+p={L} exceeds cap {cap}")
    joint = all_configs(L)
    E = learner_energy(X, joint)
    w = np.exp(-(E - E.min()))
    return joint, w / w.sum()


# ------------------------------------------------------------------ OTOC oracle


def pauli_operator(site: int, kind: str, L: int) -> sp.csr_matrix:
    """Sparse single-site Pauli on an L-site register (sigma^y|0> = i|1>)."""
    D = 2**L
    idx = np.arange(D)
    mask = site_bit(site, L)
    bit = (idx & mask) != 0
    if kind == "x":
        vals = np.ones(D, complex)
        rows = idx ^ mask
    elif kind == "y":
        vals = np.where(bit, -1j, 1j)
        rows = idx ^ mask
    elif kind == "z":
        vals = np.where(bit, -1.0, 1.0).astype(complex)
        rows = idx
    else:
        raise ValueError(f"unknown Pauli label {kind!r}")
    return sp.csr_matrix((vals, (rows, idx)), shape=(D, D))


def evolve(op: sp.spmatrix, energies: np.ndarray, t: float, generator_sign: int = -1) -> sp.csr_matrix:
    """e^{s i E t} op e^{-s i E t} with s = ``generator_sign`` and diagonal E."""
    coo = sp.coo_matrix(op)
    phase = np.exp(generator_sign * 1j * t * (energies[coo.row] - energies[coo.col]))
    return sp.csr_matrix((coo.data * phase, (coo.row, coo.col)), shape=op.shape)


@dataclass
class OtocSample:
    value: complex
    t: float
    kappa1: complex
    kappa2: complex
    alpha: str
    beta: str
    pair: tuple[int, int]


@dataclass
class _OtocSetup:
    weights: np.ndarray
    energies: np.ndarray
    U1: sp.csr_matrix
    S2: sp.csr_matrix


def _setup(X: RbmParams, pair, alpha, beta, cap=OTOC_CAP) -> _OtocSetup:
    L = X.n + X.p
    if L > cap:
        raise OracleSizeError(f"n+p={L} exceeds OTOC cap {cap}")
    k, m = pair
    joint, w = thermal_distribution(X)
    return _OtocSetup(w, learner_energy(X, joint), pauli_operator(k, alpha, L), pauli_operator(X.n + m, beta, L))


def _expect(w, op) -> complex:
    return complex(w @ op.diagonal())


def brute_force_otoc(
    X: RbmParams,
    pair,
    alpha: str = "x",
    beta: str = "x",
    kappa1: complex = 0.0,
    kappa2: complex = 0.0,
    t: float = 0.0,
    generator_sign: int = -1,
    cap: int = OTOC_CAP,
) -> OtocSample:
    """<U1^dag U2^dag(t) U1 U2(t)> with U = sigma - kappa I over the thermal state.

    ``generator_sign=-1`` evolves sigma(t) = e^{-iEt} sigma e^{iEt}; the
    opposite sign returns the complex conjugate.
    """
    s = _setup(X, pair, alpha, beta, cap)
    I = sp.identity(s.U1.shape[0], dtype=complex, format="csr")
    A = s.U1 - kappa1 * I
    B = evolve(s.S2, s.energies, t, generator_sign) - kappa2 * I
    val = _expect(s.weights, A.conj().T @ B.conj().T @ A @ B)
    return OtocSample(val, t, complex(kappa1), complex(kappa2), alpha, beta, tuple(pair))


def commutator_strings(X: RbmParams, pair, alpha="x", beta="x", t=0.0, generator_sign=-1, cap=OTOC_CAP):
    """(Theta, Phi) = ([U1, U2(t)], {U1, U2(t)}) as sparse matrices."""
    s = _setup(X, pair, alpha, beta, cap)
    U2 = evolve(s.S2, s.energies, t, generator_sign)
    return (s.U1 @ U2 - U2 @ s.U1).tocsr(), (s.U1 @ U2 + U2 @ s.U1).tocsr()


def otoc_decomposition(X: RbmParams, pair, t: float, alpha="x", beta="x", generator_sign=-1, cap=10) -> dict:
    """Expectations behind the positive-semidefinite split of the OTOC.

    With A = {U1, U2}, B = [U1, U2] and L(l1, l2) = l1 A + i l2 B:
    Re C = 1 - <B^dag B>/2 and
    Im C = (<L01^dag L01> + <L10^dag L10> - <L11^dag L11>)/4.
    """
    s = _setup(X, pair, alpha, beta, cap)
    U2 = evolve(s.S2, s.energies, t, generator_sign)
    A = s.U1 @ U2 + U2 @ s.U1
    B = s.U1 @ U2 - U2 @ s.U1

    def ll(l1, l2):
        L = l1 * A + 1j * l2 * B
        return _expect(s.weights, L.conj().T @ L)

    C = _expect(s.weights, s.U1 @ U2 @ s.U1 @ U2)
    return {
        "C": C,
        "BdB": _expect(s.weights, B.conj().T @ B),
        "L01": ll(0, 1),
        "L10": ll(1, 0),
        "L11": ll(1, 1),
    }
