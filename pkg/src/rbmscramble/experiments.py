"""Named experiments: training, g scans, I-eta scans, OTOC traces, entropy and Fisher curves.

Every command is a pure function of (config, master seed). Per-run seeds are
derived from ``SeedSequence([seed, g_index, init])`` and results are merged
in (g, init) order, so output files do not depend on the worker count.
Wall-clock timings are kept out of CSV files and written to the JSON
sidecar instead.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .drivers import DriverKind, DriverSpec, OracleSizeError
from .oracle import ORACLE_CAP, entanglement_entropy, ground_state
from .otoc import Part, analytic_trace, invariants, write_trace_csv
from .rbm import RbmParams, load_checkpoint, save_checkpoint
from .rdm import bound_curve, ieta_scan
from .sampler import SamplerConfig
from .sr import SrConfig, TrainingDiverged, TrainingHistory, train


class ConfigError(ValueError):
    """Malformed experiment configuration."""


DEFAULT_G_LIST = (0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0)


@dataclass
class ExperimentConfig:
    driver: DriverSpec = field(default_factory=lambda: DriverSpec(DriverKind.TFIM, 4))
    sr: SrConfig = field(default_factory=SrConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    g_list: list[float] = field(default_factory=lambda: list(DEFAULT_G_LIST))
    n_inits: int = 10
    keep_best: int = 5
    alpha: float = 1.0
    rdm_mode: str = "exact"
    gibbs_samples: int = 100_000
    output_dir: str = "runs"
    seed: int = 0
    sizes: list[int] = field(default_factory=lambda: [4, 6, 8, 10, 12])
    alpha_list: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    g_scale: str = "unit"
    workers: int = 1

    def __post_init__(self):
        if self.n_inits < 0 or self.keep_best < 1:
            raise ConfigError("n_inits must be >= 0 and keep_best >= 1")
        if max(1, round(self.alpha * self.driver.N)) < 1 or self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.rdm_mode not in ("exact", "gibbs"):
            raise ConfigError(f"rdm_mode must be 'exact' or 'gibbs', got {self.rdm_mode!r}")
        if self.g_scale not in ("unit", "J0"):
            raise ConfigError(f"g_scale must be 'unit' or 'J0', got {self.g_scale!r}")
        if any(g < 0 for g in self.g_list):
            raise ConfigError("g values must be non-negative")

    @property
    def p(self) -> int:
        return max(1, int(round(self.alpha * self.driver.N)))

    def driver_at(self, g: float) -> DriverSpec:
        """Driver at ratio g.

        ``g_scale="unit"`` keeps the larger of (B, J0) equal to one so the
        Hamiltonian norm, and hence the SR step size, stays bounded across a
        scan; ``"J0"`` keeps the configured J0 and sets B = g J0.
        """
        d = self.driver
        if self.g_scale == "J0":
            return d.with_g(g)
        J0, B = (1.0, g) if g <= 1.0 else (1.0 / g, 1.0)
        return DriverSpec(d.kind, d.N, B, J0, d.gamma_yz, d.seed, d.J)

    def to_dict(self) -> dict:
        return {
            "driver": self.driver.to_dict(),
            "sr": self.sr.to_dict(),
            "sampler": self.sampler.to_dict(),
            "g_list": list(self.g_list),
            "n_inits": self.n_inits,
            "keep_best": self.keep_best,
            "alpha": self.alpha,
            "rdm_mode": self.rdm_mode,
            "gibbs_samples": self.gibbs_samples,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "sizes": list(self.sizes),
            "alpha_list": list(self.alpha_list),
            "g_scale": self.g_scale,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "driver" in d:
                d["driver"] = DriverSpec.from_dict(d["driver"])
            if "sr" in d:
                d["sr"] = SrConfig(**d["sr"])
            if "sampler" in d:
                d["sampler"] = SamplerConfig(**d["sampler"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


# ----------------------------------------------------------------- plumbing


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def write_sidecar(csv_path, cfg: ExperimentConfig, command: str, wall_s: float, extra: dict | None = None) -> Path:
    import numba
    import scipy

    meta = {
        "command": command,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "versions": {
            "rbmscramble": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "rng": "numpy PCG64 seeded by SeedSequence",
        "wall_time_s": wall_s,
    }
    if extra:
        meta.update(extra)
    path = Path(str(csv_path) + ".json")
    path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def run_seeds(master: int, g_index: int, init: int) -> tuple[int, int]:
    """(init_seed, sampler_seed) for one run."""
    s = np.random.SeedSequence([master, g_index, init]).generate_state(2)
    return int(s[0]), int(s[1])


@dataclass
class RunResult:
    g: float
    g_index: int
    init: int
    init_seed: int
    X: RbmParams | None
    history: TrainingHistory | None
    diverged: str | None = None

    @property
    def best_rel_error(self) -> float | None:
        return None if self.history is None else self.history.best_rel_error()

    @property
    def fisher_max_eig(self) -> float | None:
        h = self.history
        if h is None or h.best_iteration is None:
            return None
        return h.records[h.best_iteration].fisher_max_eig

    def score(self) -> float:
        """Ranking key for keep-best: relative error, else final energy."""
        if self.history is None or not self.history.records:
            return math.inf
        if self.best_rel_error is not None:
            return self.best_rel_error
        return self.history.records[self.history.best_iteration].energy


def _train_task(args) -> RunResult:
    spec, sr_cfg, sampler_cfg, alpha, g, gi, init, master = args
    init_seed, sampler_seed = run_seeds(master, gi, init)
    try:
        X, hist = train(spec, sr_cfg, sampler_cfg.with_seed(sampler_seed), init_seed=init_seed, alpha=alpha)
        return RunResult(g, gi, init, init_seed, X, hist)
    except TrainingDiverged as exc:
        return RunResult(g, gi, init, init_seed, None, None, str(exc))


def _run_all(cfg: ExperimentConfig, tasks: list) -> list[RunResult]:
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_train_task, tasks))
    else:
        results = [_train_task(t) for t in tasks]
    return sorted(results, key=lambda r: (r.g_index, r.init))


def _log_rows(hist: TrainingHistory):
    for r in hist.records:
        yield [r.iteration, r.energy, r.variance, r.rel_error, r.fisher_max_eig, r.acceptance_rate]


LOG_HEADER = ["iter", "energy", "variance", "rel_error", "fisher_max_eig", "acceptance_rate"]


def _write_run(out: Path, r: RunResult) -> None:
    run_dir = out / f"g{r.g_index:02d}_run{r.init:03d}"
    run_dir.mkdir(parents=True, exist_ok=True)
    if r.history is not None:
        write_csv(run_dir / "train_log.csv", LOG_HEADER, _log_rows(r.history))
        (run_dir / "timings.json").write_text(json.dumps([rec.wall_ms for rec in r.history.records]))
    if r.X is not None:
        save_checkpoint(run_dir / "checkpoint.csv", r.X)


# ---------------------------------------------------------------- commands


SUMMARY_HEADER = ["g", "run", "init_seed", "iterations", "converged", "best_rel_error", "best_energy", "fisher_max_eig", "diverged"]


def _summary_row(r: RunResult):
    h = r.history
    if h is None:
        return [r.g, r.init, r.init_seed, 0, False, None, None, None, r.diverged]
    best_e = h.records[h.best_iteration].energy if h.best_iteration is not None else None
    return [r.g, r.init, r.init_seed, len(h), h.converged, r.best_rel_error, best_e, r.fisher_max_eig, ""]


def cmd_train(cfg: ExperimentConfig, out=None) -> Path:
    """Train ``n_inits`` networks on the configured driver."""
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    g = cfg.driver.g
    tasks = [(cfg.driver, cfg.sr, cfg.sampler, cfg.alpha, g, 0, i, cfg.seed) for i in range(cfg.n_inits)]
    results = _run_all(cfg, tasks)
    for r in results:
        _write_run(out, r)
    path = write_csv(out / "train_summary.csv", SUMMARY_HEADER, (_summary_row(r) for r in results))
    write_sidecar(path, cfg, "train", time.perf_counter() - t0)
    return out


@dataclass
class ScanRecord:
    g: float
    runs: int
    pairs: int
    mean_mi: float
    mean_eta: float
    std_mi: float | None
    std_eta: float | None
    sem_mi: float | None
    sem_eta: float | None
    pair_std_mi: float
    pair_std_eta: float
    median_lb_gap: float
    max_lb_gap: float
    fisher_max_eig: float | None
    n_converged: int


SCAN_HEADER = [
    "g", "runs", "pairs", "mean_mi", "mean_eta", "std_mi", "std_eta", "sem_mi", "sem_eta",
    "pair_std_mi", "pair_std_eta", "median_lb_gap", "max_lb_gap", "fisher_max_eig", "n_converged",
]
POINT_HEADER = ["g", "run", "k", "m", "eta", "mi", "lb", "ub", "lb_gap", "stderr_eta", "stderr_mi"]


def _run_stats(values: list[float]):
    """(mean, std, sem) over runs; std and sem are None for a single run."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, None, None
    if arr.size == 1:
        return float(arr[0]), None, None
    std = float(arr.std(ddof=1))
    return float(arr.mean()), std, std / math.sqrt(arr.size)


def scan_g(cfg: ExperimentConfig, out=None) -> list[ScanRecord]:
    """Train, keep the best runs per g, and aggregate I-eta statistics."""
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    tasks = [
        (cfg.driver_at(g), cfg.sr, cfg.sampler, cfg.alpha, g, gi, i, cfg.seed)
        for gi, g in enumerate(cfg.g_list)
        for i in range(cfg.n_inits)
    ]
    results = _run_all(cfg, tasks)
    for r in results:
        _write_run(out, r)
    records, fisher_rows, summary_rows = [], [], []
    for gi, g in enumerate(cfg.g_list):
        runs = [r for r in results if r.g_index == gi]
        summary_rows.extend(_summary_row(r) for r in runs)
        ok = sorted((r for r in runs if r.X is not None), key=lambda r: (r.score(), r.init))[: cfg.keep_best]
        ok.sort(key=lambda r: r.init)
        point_rows, run_mi, run_eta, all_mi, all_eta, gaps, fishers = [], [], [], [], [], [], []
        for r in ok:
            scan = ieta_scan(r.X, g, cfg.rdm_mode, cfg.gibbs_samples, seed=r.init_seed)
            mi = [p.mi for p in scan.points]
            et = [abs(p.eta) for p in scan.points]
            run_mi.append(float(np.mean(mi)))
            run_eta.append(float(np.mean(et)))
            all_mi += mi
            all_eta += et
            gaps += [p.lb_gap for p in scan.points]
            for p in scan.points:
                point_rows.append([g, r.init, p.pair[0], p.pair[1], p.eta, p.mi, p.lb, p.ub, p.lb_gap, p.stderr_eta, p.stderr_mi])
            fe = r.fisher_max_eig
            fishers.append(fe)
            fisher_rows.append([g, r.init, fe, r.history.converged, r.best_rel_error])
        write_csv(out / f"ieta_g{gi:02d}.csv", POINT_HEADER, point_rows)
        m_mi, s_mi, e_mi = _run_stats(run_mi)
        m_eta, s_eta, e_eta = _run_stats(run_eta)
        finite_f = [f for f in fishers if f is not None]
        records.append(
            ScanRecord(
                g, len(ok), len(all_mi), m_mi, m_eta, s_mi, s_eta, e_mi, e_eta,
                float(np.std(all_mi)) if all_mi else math.nan,
                float(np.std(all_eta)) if all_eta else math.nan,
                float(np.median(gaps)) if gaps else math.nan,
                float(np.max(gaps)) if gaps else math.nan,
                float(np.mean(finite_f)) if finite_f else None,
                sum(1 for r in ok if r.history.converged),
            )
        )
    write_csv(out / "train_summary.csv", SUMMARY_HEADER, summary_rows)
    path = write_csv(
        out / "scan_summary.csv", SCAN_HEADER,
        ([getattr(rec, h) for h in SCAN_HEADER] for rec in records),
    )
    write_csv(out / "fisher_curve.csv", ["g", "run", "fisher_max_eig", "converged", "best_rel_error"], fisher_rows)
    write_sidecar(path, cfg, "scan-g", time.perf_counter() - t0)
    return records


def cmd_scan_g(cfg: ExperimentConfig, out=None) -> Path:
    out = Path(out or cfg.output_dir)
    scan_g(cfg, out)
    return out


VARIABILITY_HEADER = ["g", "pair_std_mi_TFIM", "pair_std_mi_cTFIM", "ratio_mi", "pair_std_eta_TFIM", "pair_std_eta_cTFIM", "ratio_eta"]


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def cmd_variability(cfg: ExperimentConfig, out=None) -> Path:
    """Spread of MI and |eta| over pairs and runs, cTFIM relative to TFIM.

    Scans both drivers at the configured N over ``g_list`` (each into its
    own subdirectory) and writes one ratio row per g.
    """
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    recs = {}
    for kind in (DriverKind.TFIM, DriverKind.CTFIM):
        d = cfg.driver
        sub = replace(cfg, driver=DriverSpec(kind, d.N, d.B, d.J0, d.gamma_yz, d.seed))
        recs[kind] = scan_g(sub, out / kind.value)
    rows = []
    for area, volume in zip(recs[DriverKind.TFIM], recs[DriverKind.CTFIM]):
        rows.append([
            area.g, area.pair_std_mi, volume.pair_std_mi, _ratio(volume.pair_std_mi, area.pair_std_mi),
            area.pair_std_eta, volume.pair_std_eta, _ratio(volume.pair_std_eta, area.pair_std_eta),
        ])
    path = write_csv(out / "variability.csv", VARIABILITY_HEADER, rows)
    write_sidecar(path, cfg, "variability", time.perf_counter() - t0)
    return path


def cmd_fisher(cfg: ExperimentConfig, out=None) -> Path:
    """Largest Fisher eigenvalue versus g (runs the scan and keeps its Fisher curve)."""
    out = Path(out or cfg.output_dir)
    scan_g(cfg, out)
    return out / "fisher_curve.csv"


def cmd_ieta(cfg: ExperimentConfig, checkpoint, out=None) -> Path:
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    X = load_checkpoint(checkpoint)
    scan = ieta_scan(X, cfg.driver.g, cfg.rdm_mode, cfg.gibbs_samples, seed=cfg.seed)
    rows = [[p.g, 0, p.pair[0], p.pair[1], p.eta, p.mi, p.lb, p.ub, p.lb_gap, p.stderr_eta, p.stderr_mi] for p in scan.points]
    path = write_csv(out / "ieta.csv", POINT_HEADER, rows)
    write_csv(out / "bounds.csv", ["eta", "lb", "ub", "conventional_lb"], bound_curve())
    write_sidecar(path, cfg, "ieta", time.perf_counter() - t0,
                  {"median_lb_gap": scan.median_lb_gap, "max_lb_gap": scan.max_lb_gap})
    return path


def cmd_otoc(cfg: ExperimentConfig, checkpoint, pair=(0, 0), out=None) -> Path:
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    X = load_checkpoint(checkpoint)
    k, m = pair
    if not (0 <= k < X.n and 0 <= m < X.p):
        raise ConfigError(f"pair {pair} out of range for n={X.n}, p={X.p}")
    trace = analytic_trace(X, k, m)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "otoc_trace.csv"
    write_trace_csv(path, trace)
    rows = []
    for part in (Part.REAL, Part.IMAG):
        for mode in ("analytic", "finite_difference"):
            inv = invariants(trace, part, mode)
            rows.append([part.value, mode, inv.i1, inv.i2, inv.compound_sum, inv.compound_prod, inv.constancy_std])
    write_csv(out / "otoc_invariants.csv", ["part", "mode", "i1", "i2", "compound_sum", "compound_prod", "constancy_std"], rows)
    write_sidecar(path, cfg, "otoc", time.perf_counter() - t0, {"pair": [k, m], "zz": trace.zz, "w_km": trace.w_km})
    return path


def entropy_rows(cfg: ExperimentConfig, g: float | None = None):
    g = cfg.driver.g if g is None else g
    rows = []
    for N in cfg.sizes:
        if N > ORACLE_CAP:
            raise OracleSizeError(f"N={N} exceeds oracle cap {ORACLE_CAP}")
        d = cfg.driver
        spec = DriverSpec(d.kind, N, g * d.J0, d.J0, d.gamma_yz, d.seed)
        gs = ground_state(spec)
        rows.append([d.kind.value, N, g, N // 2, entanglement_entropy(gs.amplitudes, N // 2)])
    return rows


def cmd_entropy(cfg: ExperimentConfig, out=None) -> Path:
    """Central-cut entropy of the exact ground state versus N."""
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    path = write_csv(out / "entropy.csv", ["kind", "N", "g", "cut", "S"], entropy_rows(cfg))
    write_sidecar(path, cfg, "entropy", time.perf_counter() - t0)
    return path


def cmd_hidden_density(cfg: ExperimentConfig, out=None) -> Path:
    """Training quality and mean MI versus the hidden-node density alpha."""
    t0 = time.perf_counter()
    out = Path(out or cfg.output_dir)
    rows = []
    for ai, alpha in enumerate(cfg.alpha_list):
        tasks = [(cfg.driver, cfg.sr, cfg.sampler, alpha, cfg.driver.g, ai, i, cfg.seed) for i in range(cfg.n_inits)]
        for r in _run_all(cfg, tasks):
            if r.X is None:
                rows.append([alpha, None, r.init, None, None, None, None, r.diverged])
                continue
            h = r.history
            scan = ieta_scan(r.X, cfg.driver.g, cfg.rdm_mode, cfg.gibbs_samples, seed=r.init_seed)
            best = h.records[h.best_iteration]
            rows.append([
                alpha, r.X.p, r.init, r.best_rel_error, best.variance / cfg.driver.N,
                float(np.mean([p.mi for p in scan.points])), scan.median_lb_gap, "",
            ])
    path = write_csv(
        out / "hidden_density.csv",
        ["alpha", "p", "run", "best_rel_error", "variance_per_spin", "mean_mi", "median_lb_gap", "diverged"],
        rows,
    )
    write_sidecar(path, cfg, "hidden-density", time.perf_counter() - t0)
    return path
