"""Driver Hamiltonians: TFIM, concentric TFIM, Sherrington-Kirkpatrick and YZ chains.

All drivers share the form

    H = -B sum_i X_i - sum_{i<j} Jzz_ij Z_i Z_j - sum_{i<j} Jyy_ij Y_i Y_j

with ``Jyy`` nonzero only for the YZ model. Every matrix element in the
computational basis is real: ``<v'|Y_i Y_j|v> = -v_i v_j`` on the double
flip, so no complex arithmetic is needed anywhere.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .spins import all_configs, site_bit, spins_to_index

DENSE_CAP = 14


class DriverKind(str, Enum):
    TFIM = "TFIM"
    CTFIM = "cTFIM"
    SK = "SK"
    YZ = "YZ"


class DriverError(ValueError):
    """Invalid driver specification."""


class OracleSizeError(ValueError):
    """Requested system exceeds an exact-enumeration cap."""


@dataclass(frozen=True)
class DriverSpec:
    """Description of a driver Hamiltonian.

    ``J0`` is the coupling scale (the ``J`` of the YZ model), ``B`` the
    transverse field. An explicit ``J`` matrix overrides the generated
    couplings for the ZZ part.
    """

    kind: DriverKind
    N: int
    B: float = 1.0
    J0: float = 1.0
    gamma_yz: float = 0.0
    seed: int = 0
    J: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", DriverKind(self.kind))
        if int(self.N) != self.N or self.N < 1:
            raise DriverError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if self.kind is DriverKind.CTFIM and self.N % 2:
            raise DriverError("cTFIM requires an even number of spins")
        if self.J is not None:
            J = np.array(self.J, dtype=float)
            if J.shape != (self.N, self.N):
                raise DriverError(f"J must be {self.N}x{self.N}, got {J.shape}")
            if not np.array_equal(J, J.T):
                raise DriverError("J must be symmetric")
            if np.any(np.diag(J) != 0):
                raise DriverError("J must have zero diagonal")
            J.setflags(write=False)
            object.__setattr__(self, "J", J)

    @property
    def g(self) -> float:
        return self.B / self.J0 if self.J0 != 0 else math.inf

    @classmethod
    def from_g(cls, kind, N: int, g: float, J0: float = 1.0, **kw) -> "DriverSpec":
        return cls(kind=kind, N=N, B=g * J0, J0=J0, **kw)

    def with_g(self, g: float) -> "DriverSpec":
        return DriverSpec(self.kind, self.N, g * self.J0, self.J0, self.gamma_yz, self.seed, self.J)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "N": self.N,
            "B": self.B,
            "J0": self.J0,
            "gamma_yz": self.gamma_yz,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriverSpec":
        d = dict(d)
        unknown = set(d) - {"kind", "N", "B", "J0", "gamma_yz", "seed", "g", "J_csv"}
        if unknown:
            raise DriverError(f"unknown driver keys: {sorted(unknown)}")
        J = load_couplings_csv(d.pop("J_csv")) if "J_csv" in d else None
        if "g" in d:
            g = d.pop("g")
            d["B"] = g * d.get("J0", 1.0)
        return cls(J=J, **d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def load_couplings_csv(path) -> np.ndarray:
    """Read an explicit coupling matrix, one row per site."""
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=float)


def save_couplings_csv(path, J: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.asarray(J, dtype=float):
            w.writerow([repr(float(x)) for x in row])


def build_couplings(spec: DriverSpec) -> np.ndarray:
    """ZZ coupling matrix of the driver (symmetric, zero diagonal)."""
    N = spec.N
    if spec.J is not None:
        return np.array(spec.J, dtype=float)
    J = np.zeros((N, N))
    if spec.kind in (DriverKind.TFIM, DriverKind.YZ):
        scale = spec.J0 * (1.0 + spec.gamma_yz) if spec.kind is DriverKind.YZ else spec.J0
        for i in range(N - 1):
            J[i, i + 1] = J[i + 1, i] = scale
    elif spec.kind is DriverKind.CTFIM:
        half = N // 2
        for q in range(1, half + 1):
            # 1-based sites (N/2 - (q-1), N/2 + q)
            i, j = half - (q - 1) - 1, half + q - 1
            J[i, j] = J[j, i] = spec.J0
    elif spec.kind is DriverKind.SK:
        rng = np.random.default_rng(spec.seed)
        upper = np.triu(rng.standard_normal((N, N)), k=1)
        J = spec.J0 * (upper + upper.T)
    return J


def yy_couplings(spec: DriverSpec) -> np.ndarray:
    """YY coupling matrix; nonzero only for the YZ driver."""
    N = spec.N
    Jyy = np.zeros((N, N))
    if spec.kind is DriverKind.YZ:
        for i in range(N - 1):
            Jyy[i, i + 1] = Jyy[i + 1, i] = spec.J0 * (1.0 - spec.gamma_yz)
    return Jyy


def _pairs(J: np.ndarray) -> list[tuple[int, int, float]]:
    i, j = np.nonzero(np.triu(J, k=1))
    return [(int(a), int(b), float(J[a, b])) for a, b in zip(i, j)]


@dataclass(frozen=True)
class DriverTerms:
    """Flattened term list used by the local-energy kernels."""

    N: int
    field: float
    zz: list[tuple[int, int, float]]
    yy: list[tuple[int, int, float]]

    def diagonal(self, v: np.ndarray) -> np.ndarray:
        """-sum Jzz v_i v_j for a batch ``(..., N)`` of configurations."""
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1])
        for i, j, c in self.zz:
            out -= c * v[..., i] * v[..., j]
        return out


def driver_terms(spec: DriverSpec) -> DriverTerms:
    return DriverTerms(spec.N, float(spec.B), _pairs(build_couplings(spec)), _pairs(yy_couplings(spec)))


@dataclass(frozen=True)
class ConnectedElement:
    config: np.ndarray
    amplitude: float


def connected_elements(spec: DriverSpec, v, terms: DriverTerms | None = None) -> list[ConnectedElement]:
    """Nonzero elements ``<v'|H|v>`` reachable from configuration ``v``.

    The diagonal element comes first, then one single flip per site (if the
    field is nonzero), then one double flip per YY-coupled pair.
    """
    v = np.asarray(v, dtype=np.int8)
    if v.shape != (spec.N,):
        raise DriverError(f"configuration has shape {v.shape}, expected ({spec.N},)")
    terms = terms or driver_terms(spec)
    out = [ConnectedElement(v.copy(), float(terms.diagonal(v)))]
    if terms.field != 0.0:
        for i in range(spec.N):
            w = v.copy()
            w[i] = -w[i]
            out.append(ConnectedElement(w, -terms.field))
    for i, j, c in terms.yy:
        w = v.copy()
        w[i] = -w[i]
        w[j] = -w[j]
        out.append(ConnectedElement(w, c * float(v[i]) * float(v[j])))
    return out


def sparse_hamiltonian(spec: DriverSpec, cap: int = 24) -> sp.csr_matrix:
    """Driver Hamiltonian as a sparse real symmetric matrix."""
    if spec.N > cap:
        raise OracleSizeError(f"N={spec.N} exceeds cap {cap}")
    N = spec.N
    D = 2**N
    terms = driver_terms(spec)
    configs = all_configs(N)
    idx = np.arange(D, dtype=np.int64)
    rows = [idx]
    cols = [idx]
    vals = [terms.diagonal(configs)]
    if terms.field != 0.0:
        for i in range(N):
            rows.append(idx ^ site_bit(i, N))
            cols.append(idx)
            vals.append(np.full(D, -terms.field))
    for i, j, c in terms.yy:
        rows.append(idx ^ site_bit(i, N) ^ site_bit(j, N))
        cols.append(idx)
        vals.append(c * configs[:, i].astype(float) * configs[:, j])
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(D, D)
    )
    return H.tocsr()


def dense_hamiltonian(spec: DriverSpec, cap: int = DENSE_CAP) -> np.ndarray:
    """Driver Hamiltonian as a dense ``2**N x 2**N`` array."""
    if spec.N > cap:
        raise OracleSizeError(f"N={spec.N} exceeds dense cap {cap}")
    return sparse_hamiltonian(spec, cap=cap).toarray()


def config_index(v) -> int:
    return int(spins_to_index(np.asarray(v, dtype=np.int8)))
