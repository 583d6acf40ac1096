"""Closed-form OTOC traces of the learner and their invariants of motion.

For a visible/hidden pair (k, m) and tau = 4 W_km t,

    C(0, 0, tau) = cos(tau) + i zz sin(tau),   zz = <z_v_k z_h_m>,

independently of the Pauli labels in {x, y}. Each component xi(tau)
satisfies xi'' + xi = 0, so

    I1 = -2 xi' cos(tau) - 2 xi sin(tau)
    I2 = -2 xi' sin(tau) + 2 xi cos(tau)

are constant along the trajectory. Mean translations add a real offset
|k1|^2 |k2|^2 + |k1|^2 + |k2|^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .oracle import OTOC_CAP, otoc_decomposition, thermal_zz
from .rbm import RbmParams

DEFAULT_GRID_POINTS = 1024


class Part(str, Enum):
    REAL = "real"
    IMAG = "imag"


def default_grid(n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform periodic grid over one period [0, 2 pi)."""
    return np.linspace(0.0, 2.0 * math.pi, n_points, endpoint=False)


@dataclass
class OtocTrace:
    tau: np.ndarray
    c_real: np.ndarray
    c_imag: np.ndarray
    zz: float
    pair: tuple[int, int]
    w_km: float
    zz_source: str = "exact"

    def t(self) -> np.ndarray:
        """Physical times corresponding to the tau grid."""
        return self.tau / (4.0 * self.w_km) if self.w_km else np.full_like(self.tau, np.nan)


@dataclass
class InvariantSet:
    i1: float
    i2: float
    part: Part
    constancy_std: float

    @property
    def compound_sum(self) -> float:
        return (self.i1**2 + self.i2**2) / 4.0

    @property
    def compound_prod(self) -> float:
        return self.i1 * self.i2 / 2.0


def analytic_trace(X: RbmParams, k: int, m: int, zz: float | None = None, tau_grid=None) -> OtocTrace:
    """cos(tau) and zz sin(tau) on ``tau_grid`` (default: 1024 periodic points)."""
    tau = default_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if tau.size == 0:
        raise ValueError("empty tau grid")
    source = "supplied"
    if zz is None:
        zz, source = thermal_zz(X, k, m), "exact"
    return OtocTrace(tau, np.cos(tau), zz * np.sin(tau), float(zz), (k, m), float(X.W[k, m]), source)


def _is_periodic_uniform(tau: np.ndarray) -> bool:
    d = np.diff(tau)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=0)) and abs(tau[-1] + d[0] - tau[0] - 2 * math.pi) < 1e-9


def _derivative(xi: np.ndarray, tau: np.ndarray) -> np.ndarray:
    if _is_periodic_uniform(tau):
        h = tau[1] - tau[0]
        return (np.roll(xi, -1) - np.roll(xi, 1)) / (2.0 * h)
    return np.gradient(xi, tau, edge_order=2)


def invariant_series(xi: np.ndarray, dxi: np.ndarray, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(tau), np.sin(tau)
    return -2 * dxi * c - 2 * xi * s, -2 * dxi * s + 2 * xi * c


def invariants(trace: OtocTrace, part: Part | str = Part.REAL, mode: str = "finite_difference") -> InvariantSet:
    """Invariants of one component of ``trace``.

    ``mode="analytic"`` uses the exact derivative of the closed form;
    ``mode="finite_difference"`` differentiates the sampled values
    (central differences, periodic wrap on a full-period grid).
    """
    part = Part(part)
    tau = trace.tau
    if part is Part.REAL:
        xi, exact_d = trace.c_real, -np.sin(tau)
    else:
        xi, exact_d = trace.c_imag, trace.zz * np.cos(tau)
    if mode == "analytic":
        dxi = exact_d
    elif mode == "finite_difference":
        if tau.size < 3:
            raise ValueError("finite differencing needs at least 3 grid points")
        dxi = _derivative(xi, tau)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    i1, i2 = invariant_series(xi, dxi, tau)
    std = float(max(i1.std(), i2.std()))
    return InvariantSet(float(i1.mean()), float(i2.mean()), part, std)


def closed_form_invariants(zz: float, part: Part | str) -> tuple[float, float, float, float]:
    """(I1, I2, compound_sum, compound_prod) of the closed-form trace."""
    if Part(part) is Part.REAL:
        return 0.0, 2.0, 1.0, 0.0
    return -2.0 * zz, 0.0, zz * zz, 0.0


def translated_otoc(c00: complex, kappa1: complex, kappa2: complex) -> complex:
    a, b = abs(kappa1) ** 2, abs(kappa2) ** 2
    return complex(c00) + a * b + a + b


def lie_transform(xi, tau, phi: float, generator: str = "cos") -> np.ndarray:
    """Shift along the cos generator (keeps I1) or the sin generator (keeps I2)."""
    tau = np.asarray(tau, dtype=float)
    if generator == "cos":
        return np.asarray(xi) + phi * np.cos(tau)
    if generator == "sin":
        return np.asarray(xi) + phi * np.sin(tau)
    raise ValueError(f"unknown generator {generator!r}")


def phase_space_radius(trace: OtocTrace, part: Part | str = Part.IMAG) -> np.ndarray:
    """sqrt(xi^2 + xi'^2) with the analytic derivative."""
    if Part(part) is Part.REAL:
        return np.hypot(trace.c_real, -np.sin(trace.tau))
    return np.hypot(trace.c_imag, trace.zz * np.cos(trace.tau))


@dataclass
class DecompositionReport:
    value: complex
    re_residual: float
    im_residual: float
    min_ltl: float

    def ok(self, tol: float = 1e-10) -> bool:
        return self.re_residual <= tol and self.im_residual <= tol and self.min_ltl >= -1e-12


def otoc_decomposition_check(X: RbmParams, pair, t: float, alpha="x", beta="x") -> DecompositionReport:
    """Check Re/Im of the OTOC against their L^dag L expressions."""
    d = otoc_decomposition(X, pair, t, alpha, beta, cap=min(10, OTOC_CAP))
    C = d["C"]
    re = 1.0 - d["BdB"].real / 2.0
    im = (d["L01"] + d["L10"] - d["L11"]).real / 4.0
    min_ltl = min(d[key].real for key in ("BdB", "L01", "L10", "L11"))
    return DecompositionReport(C, abs(C.real - re), abs(C.imag - im), min_ltl)


@dataclass
class InvariantRow:
    epoch: int
    zz: float
    i1_imag: float
    i2_imag: float
    compound_imag: float
    i1_real: float
    i2_real: float
    compound_real: float


def invariant_training_profile(history, pair) -> list[InvariantRow]:
    """Closed-form invariants per epoch from the history's parameter snapshots."""
    if not getattr(history, "snapshots", None):
        if len(history) > 0:
            raise ValueError("training history carries no parameter snapshots")
        return []
    k, m = pair
    rows = []
    for epoch in range(len(history.snapshots)):
        zz = thermal_zz(history.snapshot(epoch), k, m)
        i1i, i2i, ci, _ = closed_form_invariants(zz, Part.IMAG)
        i1r, i2r, cr, _ = closed_form_invariants(zz, Part.REAL)
        rows.append(InvariantRow(epoch, zz, i1i, i2i, ci, i1r, i2r, cr))
    return rows


def write_trace_csv(path, trace: OtocTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "c_real", "c_imag"])
        for row in zip(trace.tau, trace.c_real, trace.c_imag):
            w.writerow([repr(float(x)) for x in row])


def write_profile_csv(path, rows: list[InvariantRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "zz", "i1_imag", "compound_imag"])
        for r in rows:
            w.writerow([r.epoch, repr(r.zz), repr(r.i1_imag), repr(r.compound_imag)])
