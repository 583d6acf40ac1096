"""Two-body reduced density matrices of the learner and the I-eta bound space.

For a visible spin v_k and a hidden spin h_m the two-body RDM of the
thermal state is diagonal with eigenvalues ordered

    lambda = (P(++), P(+-), P(-+), P(--))    # (v_k, h_m)

Marginalising the remaining hidden spins analytically gives

    lambda(x, y) ~ exp(-a_k x - b_m y - W_km x y)
                   * sum_{v_i, i != k} exp(-sum_i (a_i + W_im y) v_i)
                       * prod_{j != m} 2 cosh(b_j + sum_{i != k} W_ij v_i + W_kj x)

and the visible sum factorises for fixed y, which is what the Gibbs
estimator exploits. Entropies default to bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .drivers import OracleSizeError
from .oracle import THERMAL_CAP, thermal_means
from .rbm import RbmParams, ln2cosh
from .spins import all_configs

BRANCHES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass
class TwoBodySpectrum:
    lambdas: np.ndarray
    pair: tuple[int, int] = (0, 0)
    stderr: np.ndarray | None = None
    chunks: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (4,):
            raise ValueError("a two-body spectrum has four eigenvalues")
        if np.any(lam < -1e-12) or abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError(f"invalid spectrum {lam}")
        self.lambdas = np.clip(lam, 0.0, None)


@dataclass
class IEtaPoint:
    eta: float
    mi: float
    lb: float
    ub: float
    pair: tuple[int, int]
    g: float
    stderr_eta: float | None = None
    stderr_mi: float | None = None

    @property
    def lb_gap(self) -> float:
        return self.mi - self.lb


@dataclass
class IEtaScan:
    points: list[IEtaPoint]

    @property
    def median_lb_gap(self) -> float:
        return float(np.median([p.lb_gap for p in self.points])) if self.points else float("nan")

    @property
    def max_lb_gap(self) -> float:
        return float(np.max([p.lb_gap for p in self.points])) if self.points else float("nan")

    def contained(self, tol: float = 1e-9) -> bool:
        return all(p.lb - tol <= p.mi <= p.ub + tol for p in self.points)


# ----------------------------------------------------------------- spectra


def _log_branch_terms(X: RbmParams, k: int, m: int, v_rest: np.ndarray, x: int, y: int) -> np.ndarray:
    """Per-configuration log weights for branch (x, y) over rows of ``v_rest`` (sites != k)."""
    keep_i = np.arange(X.n) != k
    keep_j = np.arange(X.p) != m
    a, Wr = X.a[keep_i], X.W[keep_i]
    pre = -X.a[k] * x - X.b[m] * y - X.W[k, m] * x * y
    th = X.b[keep_j] + v_rest @ Wr[:, keep_j] + X.W[k, keep_j] * x
    return pre - v_rest @ (a + Wr[:, m] * y) + ln2cosh(th).sum(axis=-1) + (X.p - 1) * math.log(2.0)


def exact_rdm_spectrum(X: RbmParams, k: int, m: int, cap: int = THERMAL_CAP) -> TwoBodySpectrum:
    """Eigenvalues by exact summation over the other visible spins."""
    if X.n > cap:
        raise OracleSizeError(f"n={X.n} exceeds enumeration cap {cap}")
    v_rest = all_configs(X.n - 1).astype(float)
    logs = np.array([logsumexp(_log_branch_terms(X, k, m, v_rest, x, y)) for x, y in BRANCHES])
    lam = np.exp(logs - logsumexp(logs))
    return TwoBodySpectrum(lam / lam.sum(), (k, m))


def gibbs_rdm_spectrum(X: RbmParams, k: int, m: int, n_samples: int, seed=0, n_chunks: int = 20) -> TwoBodySpectrum:
    """Sampling estimate using the exact product form of P(v_rest | h_m).

    For each h_m = y the other visible spins are drawn independently with
    P(v_i = +1) = (1 - tanh c_i)/2, c_i = a_i + W_im y. The same draws feed
    both v_k branches. Standard errors come from the spread across
    ``n_chunks`` equal batches.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    n_chunks = max(1, min(n_chunks, n_samples))
    keep_i = np.arange(X.n) != k
    keep_j = np.arange(X.p) != m
    a, Wr = X.a[keep_i], X.W[keep_i]
    bounds = np.linspace(0, n_samples, n_chunks + 1).astype(int)
    # log of unnormalised lambda, per chunk and in total
    log_chunk = np.empty((n_chunks, 4))
    log_total = np.empty(4)
    for y in (1, -1):
        c = a + Wr[:, m] * y
        log_norm = ln2cosh(c).sum()
        p_up = 0.5 * (1.0 - np.tanh(c))
        v = np.where(rng.random((n_samples, X.n - 1)) < p_up, 1.0, -1.0)
        base = X.b[keep_j] + v @ Wr[:, keep_j]
        for x in (1, -1):
            b_idx = BRANCHES.index((x, y))
            obs = ln2cosh(base + X.W[k, keep_j] * x).sum(axis=-1) + (X.p - 1) * math.log(2.0)
            pre = -X.a[k] * x - X.b[m] * y - X.W[k, m] * x * y + log_norm
            log_total[b_idx] = pre + logsumexp(obs) - math.log(n_samples)
            for ci in range(n_chunks):
                seg = obs[bounds[ci] : bounds[ci + 1]]
                log_chunk[ci, b_idx] = pre + logsumexp(seg) - math.log(seg.size)
    lam = np.exp(log_total - logsumexp(log_total))
    chunks = np.exp(log_chunk - logsumexp(log_chunk, axis=1, keepdims=True))
    stderr = chunks.std(axis=0, ddof=1) / math.sqrt(n_chunks) if n_chunks > 1 else np.full(4, np.nan)
    return TwoBodySpectrum(lam / lam.sum(), (k, m), stderr, chunks)


def full_enumeration_spectrum(X: RbmParams, k: int, m: int, cap: int = 16) -> TwoBodySpectrum:
    """Contract the full 2^(n+p) Boltzmann distribution (reference path)."""
    from .oracle import thermal_distribution

    joint, w = thermal_distribution(X, cap=cap)
    vk, hm = joint[:, k], joint[:, X.n + m]
    lam = np.array([w[(vk == x) & (hm == y)].sum() for x, y in BRANCHES])
    return TwoBodySpectrum(lam / lam.sum(), (k, m))


# ------------------------------------------------------------ MI and bounds


def _lam(spec) -> np.ndarray:
    return spec.lambdas if isinstance(spec, TwoBodySpectrum) else np.asarray(spec, dtype=float)


def _log(base: str):
    if base == "bits":
        return np.log2
    if base == "nats":
        return np.log
    raise ValueError(f"unknown base {base!r}")


def _entropy(p, base: str = "bits") -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-(p * _log(base)(p)).sum())


def one_rdm(spec) -> tuple[tuple[float, float], tuple[float, float]]:
    """((P(v_k=+1), P(v_k=-1)), (P(h_m=+1), P(h_m=-1)))."""
    l1, l2, l3, l4 = _lam(spec)
    return (l1 + l2, l3 + l4), (l1 + l3, l2 + l4)


def mutual_information(spec, base: str = "bits") -> float:
    vis, hid = one_rdm(spec)
    mi = _entropy(vis, base) + _entropy(hid, base) - _entropy(_lam(spec), base)
    return max(0.0, mi)


def eta(spec) -> float:
    """Covariance <z_v z_h> - <z_v><z_h>."""
    l1, l2, l3, l4 = _lam(spec)
    return float((l1 - l2 - l3 + l4) - (l1 + l2 - l3 - l4) * (l1 + l3 - l2 - l4))


def _check_eta(e: float, tol: float = 1e-12) -> float:
    e = float(e)
    if not -1.0 - tol <= e <= 1.0 + tol:
        raise ValueError(f"eta={e} outside [-1, 1]")
    return min(1.0, max(-1.0, e))


def _xlogx(x: float, log) -> float:
    return 0.0 if x <= 0.0 else x * float(log(x))


def lower_bound(e: float, base: str = "bits") -> float:
    """MI of the uniform-marginal two-spin distribution with covariance eta."""
    e = _check_eta(e)
    log = _log(base)
    q1, q2 = (1 + e) / 4, (1 - e) / 4
    # 2 log 2 + 2 q1 log q1 + 2 q2 log q2, with 0 log 0 = 0
    val = 2 * float(log(2.0)) + 2 * _xlogx(q1, log) + 2 * _xlogx(q2, log)
    return max(0.0, val)


def upper_bound(e: float, base: str = "bits") -> float:
    """Binary entropy of (1 + sqrt(1 - |eta|))/2."""
    e = _check_eta(e)
    log = _log(base)
    s = (1.0 + math.sqrt(max(0.0, 1.0 - abs(e)))) / 2.0
    return max(0.0, -_xlogx(s, log) - _xlogx(1.0 - s, log))


def conventional_lb(e: float) -> float:
    e = _check_eta(e)
    return e * e / 2.0


# ------------------------------------------------------------------- scans


def _point(spec: TwoBodySpectrum, g: float, base: str) -> IEtaPoint:
    e = eta(spec)
    mi = mutual_information(spec, base)
    se_eta = se_mi = None
    if spec.chunks is not None and spec.chunks.shape[0] > 1:
        ce = np.array([eta(c) for c in spec.chunks])
        cm = np.array([mutual_information(c, base) for c in spec.chunks])
        r = math.sqrt(spec.chunks.shape[0])
        se_eta, se_mi = float(ce.std(ddof=1) / r), float(cm.std(ddof=1) / r)
    return IEtaPoint(e, mi, lower_bound(e, base), upper_bound(e, base), spec.pair, g, se_eta, se_mi)


def ieta_scan(
    X: RbmParams,
    g_label: float = float("nan"),
    mode: str = "exact",
    n_samples: int = 100_000,
    seed: int = 0,
    base: str = "bits",
) -> IEtaScan:
    """One I-eta point per (k, m) pair, ordered by (k, m)."""
    points = []
    for k in range(X.n):
        for m in range(X.p):
            if mode == "exact":
                spec = exact_rdm_spectrum(X, k, m)
            elif mode == "gibbs":
                spec = gibbs_rdm_spectrum(X, k, m, n_samples, seed=(seed, k, m))
            else:
                raise ValueError(f"unknown rdm mode {mode!r}")
            points.append(_point(spec, g_label, base))
    return IEtaScan(points)


def bound_curve(n_points: int = 401, base: str = "bits") -> np.ndarray:
    """Columns (eta, lb, ub, conventional_lb) on a uniform eta grid."""
    grid = np.linspace(-1.0, 1.0, n_points)
    return np.array([[e, lower_bound(e, base), upper_bound(e, base), conventional_lb(e)] for e in grid])


def eta_from_otoc(X: RbmParams, k: int, m: int, source: str = "analytic") -> float:
    """Covariance read off the translated OTOC at tau = pi/2.

    With t1 = pi/(8 W_km), kappa1 = sqrt(i<z_v>) and kappa2 = sqrt(i<z_h>),
    the combination C(k1,0) + C(0,k2) - C(k1,k2) equals C(0,0) - |<z_v>||<z_h>|,
    and C(0,0) at tau = pi/2 is i<z_v z_h>. The imaginary part is the
    correlator, from which the product of means is subtracted.
    """
    w = float(X.W[k, m])
    if w == 0.0:
        raise ValueError("eta_from_otoc requires a nonzero W_km")
    t1 = math.pi / (8.0 * w)
    zv, zh, zz = thermal_means(X, k, m)
    k1, k2 = np.sqrt(1j * zv), np.sqrt(1j * zh)
    if source == "analytic":
        from .otoc import translated_otoc

        c00 = complex(math.cos(4 * w * t1), zz * math.sin(4 * w * t1))
        combo = translated_otoc(c00, k1, 0) + translated_otoc(c00, 0, k2) - translated_otoc(c00, k1, k2)
    elif source == "brute":
        from .oracle import brute_force_otoc

        def C(a, b):
            return brute_force_otoc(X, (k, m), "x", "x", a, b, t1).value

        combo = C(k1, 0) + C(0, k2) - C(k1, k2)
    else:
        raise ValueError(f"unknown source {source!r}")
    return float(combo.imag - zv * zh)
