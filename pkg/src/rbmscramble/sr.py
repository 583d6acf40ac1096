"""Stochastic reconfiguration for the RBM ansatz.

With O_k(v) = d log psi / dX_k and E_loc(v) = <v|H|psi>/psi(v), the update is

    F_kl = <O_k O_l> - <O_k><O_l>
    S_k  = <E_loc O_k> - <E_loc><O_k>
    X   <- X - l (F + shift I)^{-1} S

with all averages over psi^2 samples.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .drivers import DriverSpec, DriverTerms, connected_elements, driver_terms, sparse_hamiltonian
from .oracle import ORACLE_CAP, ground_state
from .rbm import RbmParams, ln2cosh, log_derivatives, log_psi, theta
from .sampler import SampleBatch, SamplerConfig, sample
from .spins import all_configs

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised when the energy estimate becomes non-finite."""


@dataclass(frozen=True)
class SrConfig:
    learning_rate: float = 0.1
    shift: float = 0.01
    max_iterations: int = 200
    convergence_threshold: float = 1e-3
    target: str = "ground_energy"
    variance_window: int = 10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.shift < 0:
            raise ValueError("shift must be non-negative")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.target != "ground_energy":
            raise ValueError(f"unknown target {self.target!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "shift": self.shift,
            "max_iterations": self.max_iterations,
            "convergence_threshold": self.convergence_threshold,
            "target": self.target,
            "variance_window": self.variance_window,
        }


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    variance: float
    rel_error: float | None
    fisher_max_eig: float
    acceptance_rate: float
    wall_ms: float


@dataclass
class TrainingHistory:
    records: list[IterationRecord] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    n: int = 0
    p: int = 0
    exact_energy: float | None = None
    converged: bool = False
    best_iteration: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def snapshot(self, i: int) -> RbmParams:
        return RbmParams.from_flat(self.snapshots[i], self.n, self.p)

    def best_rel_error(self) -> float | None:
        errs = [r.rel_error for r in self.records if r.rel_error is not None]
        return min(errs) if errs else None


# ---------------------------------------------------------------- local energy


def local_energy(X: RbmParams, v, spec: DriverSpec, log_psi_fn: Callable | None = None) -> float:
    """Reference E_loc for one configuration by explicit connected-element sum."""
    f = log_psi_fn or (lambda c: log_psi(X, c))
    lv = f(v)
    return float(sum(el.amplitude * np.exp(f(el.config) - lv) for el in connected_elements(spec, v)))


def local_energies(X: RbmParams, configs, spec: DriverSpec, th=None, terms: DriverTerms | None = None) -> np.ndarray:
    """Vectorised E_loc over a batch ``(S, n)``."""
    terms = terms or driver_terms(spec)
    v = np.asarray(configs, dtype=float)
    if v.shape[0] == 0:
        return np.zeros(0)
    th = theta(X, v) if th is None else th
    e = terms.diagonal(v)
    base = ln2cosh(th).sum(axis=-1)
    if terms.field != 0.0:
        # shifted[s, i, j] = theta_j after flipping site i
        shifted = th[:, None, :] - 2.0 * v[:, :, None] * X.W[None, :, :]
        ratios = 2.0 * X.a * v + ln2cosh(shifted).sum(axis=-1) - base[:, None]
        e = e - terms.field * np.exp(ratios).sum(axis=-1)
    for i, j, c in terms.yy:
        th2 = th - 2.0 * v[:, i, None] * X.W[i] - 2.0 * v[:, j, None] * X.W[j]
        r = 2.0 * (X.a[i] * v[:, i] + X.a[j] * v[:, j]) + ln2cosh(th2).sum(axis=-1) - base
        e = e + c * v[:, i] * v[:, j] * np.exp(r)
    return e


# ------------------------------------------------------------ F and S estimates


def estimate_F_S(batch, X: RbmParams, spec: DriverSpec, weights=None, e_loc=None):
    """Covariance estimates of F and S from a batch or from weighted configurations.

    ``batch`` may be a :class:`SampleBatch` or a plain ``(S, n)`` array. When
    ``weights`` is given it must be non-negative; it is normalised internally
    (exact-enumeration mode uses weights proportional to psi^2).
    """
    if isinstance(batch, SampleBatch):
        configs, th = batch.configs, batch.theta
    else:
        configs = np.asarray(batch)
        th = None
    if configs.shape[0] == 0:
        raise ValueError("empty batch")
    th = theta(X, configs) if th is None else th
    D = log_derivatives(X, configs, th)
    E = local_energies(X, configs, spec, th) if e_loc is None else np.asarray(e_loc)
    if weights is None:
        w = np.full(configs.shape[0], 1.0 / configs.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    Dc = D - w @ D
    Ec = E - w @ E
    F = (Dc * w[:, None]).T @ Dc
    F = 0.5 * (F + F.T)
    S = (w * Ec) @ Dc
    return F, S


def sr_update(X: RbmParams, F, S, cfg: SrConfig) -> RbmParams:
    """Solve (F + shift I) delta = S and return X - l * delta."""
    F = np.asarray(F, dtype=float)
    S = np.asarray(S, dtype=float)
    if F.shape != (X.n_params, X.n_params) or S.shape != (X.n_params,):
        raise ValueError("F/S dimensions do not match the parameter vector")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(S))):
        raise ValueError("non-finite entries in F or S")
    A = F + cfg.shift * np.eye(F.shape[0])
    try:
        delta = sla.cho_solve(sla.cho_factor(A), S)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        delta = np.linalg.lstsq(A, S, rcond=None)[0]
    return RbmParams.from_flat(X.flatten() - cfg.learning_rate * delta, X.n, X.p)


def fisher_largest_eig(F, rtol: float = 1e-8, max_iter: int = 10000, seed: int = 12345) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("F must be square")
    if not np.allclose(F, F.T, rtol=0, atol=1e-12 * max(1.0, np.abs(F).max(initial=0.0))):
        raise ValueError("F must be symmetric")
    x = np.random.default_rng(seed).standard_normal(F.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = F @ x
        lam = float(x @ y)
        resid = np.linalg.norm(y - lam * x)
        if resid <= rtol * abs(lam) or not np.any(y):
            return lam
        x = y / np.linalg.norm(y)
    warnings.warn(f"power iteration did not converge; last estimate {lam}", RuntimeWarning)
    return lam


# -------------------------------------------------------------------- training


def exact_energy(X: RbmParams, spec: DriverSpec, H=None, configs=None) -> float:
    """Variational energy <psi|H|psi>/<psi|psi> by full enumeration."""
    H = sparse_hamiltonian(spec, cap=ORACLE_CAP) if H is None else H
    configs = all_configs(spec.N) if configs is None else configs
    lp = log_psi(X, configs)
    psi = np.exp(lp - lp.max())
    return float(psi @ (H @ psi) / (psi @ psi))


def iteration_seed(base: int, init_seed: int, it: int) -> int:
    return int(np.random.SeedSequence([base, init_seed, it]).generate_state(1)[0])


def train(
    spec: DriverSpec,
    cfg: SrConfig = SrConfig(),
    sampler_cfg: SamplerConfig = SamplerConfig(),
    init_seed: int = 0,
    alpha: float = 1.0,
    X0: RbmParams | None = None,
) -> tuple[RbmParams, TrainingHistory]:
    """Train an RBM on the ground state of ``spec``; returns the best snapshot.

    With the oracle available (N <= ORACLE_CAP) the stopping rule is the
    relative error of the exact variational energy; otherwise it is the
    energy variance per spin staying below the threshold for
    ``cfg.variance_window`` consecutive iterations.
    """
    n = spec.N
    p = max(1, int(round(alpha * n)))
    X = X0 if X0 is not None else RbmParams.random(n, p, seed=init_seed)
    hist = TrainingHistory(n=X.n, p=X.p)
    if cfg.max_iterations == 0:
        return X, hist

    use_oracle = n <= ORACLE_CAP
    terms = driver_terms(spec)
    if use_oracle:
        H = sparse_hamiltonian(spec, cap=ORACLE_CAP)
        configs = all_configs(n)
        hist.exact_energy = ground_state(spec).energy
        e0 = hist.exact_energy
    best_X, best_score = X, np.inf
    low_var_streak = 0
    for it in range(cfg.max_iterations):
        t0 = time.perf_counter()
        batch = sample(X, sampler_cfg.with_seed(iteration_seed(sampler_cfg.seed, init_seed, it)))
        E = local_energies(X, batch.configs, spec, batch.theta, terms)
        energy, var = float(E.mean()), float(E.var())
        if not np.isfinite(energy):
            raise TrainingDiverged(f"non-finite energy at iteration {it} (init_seed={init_seed})")
        rel = None
        if use_oracle:
            rel = abs(exact_energy(X, spec, H, configs) - e0) / max(abs(e0), 1e-300)
        F, S = estimate_F_S(batch, X, spec, e_loc=E)
        lam = fisher_largest_eig(F)
        hist.snapshots.append(X.flatten())
        hist.records.append(
            IterationRecord(it, energy, var, rel, lam, batch.acceptance_rate, 1e3 * (time.perf_counter() - t0))
        )
        score = rel if use_oracle else energy
        if score < best_score:
            best_score, best_X, hist.best_iteration = score, X, it
        if use_oracle:
            if rel <= cfg.convergence_threshold:
                hist.converged = True
                break
        else:
            low_var_streak = low_var_streak + 1 if var / n < cfg.convergence_threshold else 0
            if low_var_streak >= cfg.variance_window:
                hist.converged = True
                break
        X = sr_update(X, F, S, cfg)
    log.debug("train %s seed=%d: %d iterations, converged=%s", spec.kind.value, init_seed, len(hist), hist.converged)
    return best_X, hist
