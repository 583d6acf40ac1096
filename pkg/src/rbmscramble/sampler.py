"""Metropolis-Hastings sampling of visible configurations from psi(v)^2.

Each chain owns a private random stream derived from
``SeedSequence(seed, spawn_key=(chain,))`` and a private theta cache, so a
chain's trajectory depends only on (seed, chain index, schedule). The
random numbers for a call are drawn up front per chain and the flip loop
runs in a compiled kernel.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numba
import numpy as np

from .rbm import RbmParams, theta

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence(seed, spawn_key=(chain,))"


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 1000
    n_sweeps_per_sample: int = 60
    burn_in_sweeps: int | None = None  # None -> 10 * n
    seed: int = 0
    samples_per_chain: int = 1

    def __post_init__(self):
        if self.n_chains < 1 or self.n_sweeps_per_sample < 1:
            raise ValueError("n_chains and n_sweeps_per_sample must be >= 1")
        if self.samples_per_chain < 0:
            raise ValueError("samples_per_chain must be >= 0")
        if self.burn_in_sweeps is not None and self.burn_in_sweeps < 0:
            raise ValueError("burn_in_sweeps must be >= 0")

    def burn_in(self, n: int) -> int:
        return 10 * n if self.burn_in_sweeps is None else self.burn_in_sweeps

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(self.n_chains, self.n_sweeps_per_sample, self.burn_in_sweeps, seed, self.samples_per_chain)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SampleBatch:
    """Samples already distributed as psi^2 (uniform weights)."""

    configs: np.ndarray  # (S, n) int8
    theta: np.ndarray  # (S, p)
    acceptance: np.ndarray  # (n_chains,)

    def __len__(self) -> int:
        return self.configs.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.acceptance.mean()) if self.acceptance.size else float("nan")


@numba.njit(cache=True, inline="always")
def _ln2cosh(x):
    ax = abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax))


@numba.njit(cache=True)
def _flip_log_ratio(a, W, v, th, k):
    vk = v[k]
    r = 2.0 * a[k] * vk
    for j in range(th.shape[0]):
        r += _ln2cosh(th[j] - 2.0 * W[k, j] * vk) - _ln2cosh(th[j])
    return r


@numba.njit(cache=True)
def _run_chains(a, W, v0, th0, sites, logu, burn, every, n_keep, out_v, out_th, acc):
    n_chains, n = v0.shape
    p = th0.shape[1]
    v = np.empty(n, np.float64)
    th = np.empty(p, np.float64)
    for c in range(n_chains):
        for i in range(n):
            v[i] = v0[c, i]
        for j in range(p):
            th[j] = th0[c, j]
        accepted = 0
        step = 0
        total_sweeps = burn + every * n_keep
        kept = 0
        for sweep in range(total_sweeps):
            for _ in range(n):
                k = sites[c, step]
                r = _flip_log_ratio(a, W, v, th, k)
                if logu[c, step] < 2.0 * r:
                    vk = v[k]
                    for j in range(p):
                        th[j] -= 2.0 * W[k, j] * vk
                    v[k] = -vk
                    accepted += 1
                step += 1
            if sweep >= burn and (sweep - burn + 1) % every == 0:
                row = c * n_keep + kept
                for i in range(n):
                    out_v[row, i] = v[i]
                for j in range(p):
                    out_th[row, j] = th[j]
                kept += 1
        acc[c] = accepted / step if step > 0 else 0.0


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain,)))


def sample(X: RbmParams, cfg: SamplerConfig) -> SampleBatch:
    """Run ``cfg.n_chains`` independent chains from fresh random starts."""
    n, p = X.n, X.p
    burn = cfg.burn_in(n)
    keep = cfg.samples_per_chain
    if keep == 0:
        return SampleBatch(np.zeros((0, n), np.int8), np.zeros((0, p)), np.zeros(0))
    n_steps = (burn + cfg.n_sweeps_per_sample * keep) * n
    v0 = np.empty((cfg.n_chains, n))
    sites = np.empty((cfg.n_chains, n_steps), np.int64)
    logu = np.empty((cfg.n_chains, n_steps))
    for c in range(cfg.n_chains):
        rng = chain_rng(cfg.seed, c)
        v0[c] = 1.0 - 2.0 * rng.integers(0, 2, n)
        sites[c] = rng.integers(0, n, n_steps)
        logu[c] = np.log(rng.random(n_steps))
    th0 = theta(X, v0)
    out_v = np.empty((cfg.n_chains * keep, n))
    out_th = np.empty((cfg.n_chains * keep, p))
    acc = np.empty(cfg.n_chains)
    _run_chains(
        np.ascontiguousarray(X.a), np.ascontiguousarray(X.W), v0, np.ascontiguousarray(th0),
        sites, logu, burn, cfg.n_sweeps_per_sample, keep, out_v, out_th, acc,
    )
    return SampleBatch(out_v.astype(np.int8), out_th, acc)


@dataclass
class ChainState:
    """Single-chain state for the step-by-step Python API."""

    v: np.ndarray
    theta: np.ndarray

    @classmethod
    def start(cls, X: RbmParams, v) -> "ChainState":
        v = np.array(v, dtype=np.int8)
        return cls(v, theta(X, v))


def metropolis_step(X: RbmParams, state: ChainState, rng: np.random.Generator) -> bool:
    """Propose one uniformly random flip; update ``state`` in place. Returns acceptance."""
    k = int(rng.integers(0, X.n))
    r = _flip_log_ratio(X.a, X.W, state.v.astype(float), state.theta, k)
    if np.log(rng.random()) < 2.0 * r:
        vk = float(state.v[k])
        state.theta = state.theta - 2.0 * X.W[k] * vk
        state.v[k] = -state.v[k]
        return True
    return False


@numba.njit(cache=True)
def _trajectory(a, W, v, th, sites, logu, out):
    p = th.shape[0]
    out[0] = v
    for t in range(sites.shape[0]):
        k = sites[t]
        if logu[t] < 2.0 * _flip_log_ratio(a, W, v, th, k):
            vk = v[k]
            for j in range(p):
                th[j] -= 2.0 * W[k, j] * vk
            v[k] = -vk
        out[t + 1] = v


def run_chain(X: RbmParams, n_steps: int, seed: int, v0=None) -> np.ndarray:
    """Trajectory of configurations visited by a single chain (one row per step)."""
    rng = np.random.default_rng(seed)
    if v0 is None:
        v0 = 1 - 2 * rng.integers(0, 2, X.n)
    v = np.array(v0, dtype=float)
    th = theta(X, v)
    sites = rng.integers(0, X.n, n_steps)
    logu = np.log(rng.random(n_steps))
    out = np.empty((n_steps + 1, X.n))
    _trajectory(np.ascontiguousarray(X.a), np.ascontiguousarray(X.W), v, th, sites, logu, out)
    return out.astype(np.int8)
