"""Restricted Boltzmann machine ansatz.

The learner carries the Ising energy

    E(v, h) = sum_i a_i v_i + sum_j b_j h_j + sum_ij W_ij v_i h_j

and its thermal state exp(-E). Tracing out the hidden register gives the
(unnormalised) amplitude used as the variational wavefunction

    psi(v) = exp(-sum_i a_i v_i) * prod_j 2 cosh(theta_j),
    theta_j = b_j + sum_i W_ij v_i.

Log-derivatives of log psi:

    d/da_i  = -v_i
    d/db_j  = tanh(theta_j)
    d/dW_ij = v_i tanh(theta_j)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


def ln2cosh(x):
    """Overflow-safe ln(2 cosh x) = |x| + ln(1 + exp(-2|x|))."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax))


@dataclass(frozen=True, eq=False)
class RbmParams:
    """Parameter vector X = (a, b, W) of the learner."""

    a: np.ndarray
    b: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        W = np.array(self.W, dtype=float)
        if a.size < 1 or b.size < 1:
            raise ValueError("n and p must be at least 1")
        if W.shape != (a.size, b.size):
            raise ValueError(f"W has shape {W.shape}, expected {(a.size, b.size)}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(W))):
            raise ValueError("parameters must be finite")
        for arr in (a, b, W):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def p(self) -> int:
        return self.b.size

    @property
    def n_params(self) -> int:
        return self.n + self.p + self.n * self.p

    @property
    def alpha(self) -> float:
        return self.p / self.n

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.W.reshape(-1)])

    @classmethod
    def from_flat(cls, flat, n: int, p: int) -> "RbmParams":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (n + p + n * p,):
            raise ValueError(f"flat vector has shape {flat.shape}, expected ({n + p + n * p},)")
        return cls(flat[:n], flat[n : n + p], flat[n + p :].reshape(n, p))

    @classmethod
    def zeros(cls, n: int, p: int) -> "RbmParams":
        return cls(np.zeros(n), np.zeros(p), np.zeros((n, p)))

    @classmethod
    def random(cls, n: int, p: int, seed=None, std: float = 0.01) -> "RbmParams":
        rng = np.random.default_rng(seed)
        return cls.from_flat(rng.normal(0.0, std, n + p + n * p), n, p)

    def scaled(self, factor: float) -> "RbmParams":
        return RbmParams(self.a * factor, self.b * factor, self.W * factor)


def theta(X: RbmParams, v) -> np.ndarray:
    """Hidden pre-activations for a configuration or a batch ``(..., n)``."""
    return X.b + np.asarray(v, dtype=float) @ X.W


def log_psi(X: RbmParams, v) -> np.ndarray | float:
    """log psi(v) with the partition function dropped; batched over leading axes."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != X.n:
        raise ValueError(f"configuration length {v.shape[-1]} does not match n={X.n}")
    out = -(v @ X.a) + ln2cosh(theta(X, v)).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def log_psi_ratio(X: RbmParams, v, k: int, th: np.ndarray | None = None) -> float:
    """log psi(v') - log psi(v) where v' flips site ``k``; O(p) given ``th``."""
    v = np.asarray(v)
    th = theta(X, v) if th is None else th
    vk = float(v[k])
    return 2.0 * X.a[k] * vk + float(np.sum(ln2cosh(th - 2.0 * X.W[k] * vk) - ln2cosh(th)))


def log_derivatives(X: RbmParams, v, th: np.ndarray | None = None) -> np.ndarray:
    """O_k(v) = d log psi / dX_k in (a, b, W) order; batched over leading axes."""
    v = np.asarray(v, dtype=float)
    th = theta(X, v) if th is None else np.asarray(th)
    t = np.tanh(th)
    dW = v[..., :, None] * t[..., None, :]
    return np.concatenate([-v, t, dW.reshape(*v.shape[:-1], X.n * X.p)], axis=-1)


class ThetaCache:
    """Incrementally maintained theta for one chain."""

    def __init__(self, X: RbmParams, v):
        self.X = X
        self.v = np.array(v, dtype=np.int8)
        self.theta = theta(X, self.v)

    def ratio(self, k: int) -> float:
        return log_psi_ratio(self.X, self.v, k, self.theta)

    def flip(self, k: int) -> None:
        self.theta = self.theta - 2.0 * self.X.W[k] * float(self.v[k])
        self.v[k] = -self.v[k]

    def check(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.theta, theta(self.X, self.v), rtol=0.0, atol=atol))


def save_checkpoint(path, X: RbmParams) -> None:
    """CSV checkpoint: header ``n,p`` then one parameter per line (repr floats)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([X.n, X.p])
        for x in X.flatten():
            w.writerow([repr(float(x))])


def load_checkpoint(path) -> RbmParams:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    n, p = int(rows[0][0]), int(rows[0][1])
    return RbmParams.from_flat([float(r[0]) for r in rows[1:]], n, p)
