"""Collapse experiment: per-fiber flows along a shrinking sequence of scales.

For each scale ``t_i`` the fiber connection ``e^{s*}_dagger A0(b)`` (one seeded
Hermitian field ``s*``) is flowed for rescaled time ``t_ref / t_i``: the fiber
metric at scale ``t`` is ``t g0``, which speeds the flow clock by ``1 / t``.
Rows are independent jobs executed on a thread pool (``HYMLAB_THREADS`` caps
the worker count) and merged in input order, so outputs do not depend on
scheduling.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .base import make_potential, tau_at
from .errors import HymLabError
from .fiber import FiberGrid, c0_norm, random_hermitian
from .flows import FlowOptions, kempf_ness_flow
from .gauge import apply_hermitian_gauge, curvature, expm_herm
from .semiflat import X1, X2, Y1, Y2
from .spectral import SpectralData, holonomy, linear_section, reference_connection, theta_jacobian
from .testbed import TestbedConnection, curvature4d

DEFAULT_SAMPLES = ((0.0, 0.0), (0.2, 0.0), (0.0, 0.2), (-0.2, 0.0), (0.0, -0.2))


@dataclass
class Scenario:
    name: str = "scenario"
    potential: str = "identity"
    potential_params: dict = field(default_factory=dict)
    base_point: tuple = (0.0, 0.0)
    base_samples: tuple = DEFAULT_SAMPLES
    lifts: tuple = (0.25, -0.25)
    slope: tuple | None = None          # linear-in-w section coefficients, one per sheet
    N: int = 64
    t0: float = 1.0
    count: int = 8
    seed: int = 0
    amplitude: float = 0.3
    kmax: int = 2
    t_ref: float = 0.1
    flow: FlowOptions = field(default_factory=FlowOptions)
    out: str = "out"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if self.t0 <= 0 or self.count < 1:
            raise ValueError("t-sequence must be positive and nonempty")
        if self.t_ref <= 0:
            raise ValueError("t_ref must be positive")

    @property
    def n(self):
        return len(self.lifts)

    @property
    def t_sequence(self):
        return [self.t0 * 2.0 ** (-i) for i in range(1, self.count + 1)]

    def potential_obj(self):
        return make_potential(self.potential, **self.potential_params)

    def section(self):
        phi = self.potential_obj()
        c = np.zeros(self.n) if self.slope is None else self.slope
        return linear_section(phi, self.lifts, c, self.base_point)

    def fiber(self, b):
        """Fiber grid, spectral data and reference connection over the base point ``b``."""
        phi = self.potential_obj()
        tau = tau_at(phi, b)
        grid = FiberGrid(self.N, tau)
        sd = SpectralData(self.section()(b), tau, self.section())
        return grid, sd, reference_connection(sd, grid)


@dataclass
class ReportRow:
    t: float
    dist_l2: float
    dist_l21: float
    f_c0: float
    holonomy_distance: float
    steps: int
    flow_time: float
    status: str = "ok"


@dataclass
class MonitorRecord:
    t: float
    sample: int
    f_b: float
    f_a_scaled: float     # (1/t) ||F_A||_C0
    kappa_sq: float
    m: float
    tm: float


@dataclass
class ConvergenceReport:
    scenario: str
    rows: list
    rate: float | None
    failed: list

    def monotone(self, rel=1e-3):
        """Soft check; changes within ``rel`` count as ties (rows at the solver floor jitter)."""
        d = [r.dist_l21 for r in self.rows if r.status == "ok"]
        return all(b <= a * (1 + rel) for a, b in zip(d, d[1:]))


def monitor_record(t, sample, f_b, f_a, kappa_sq):
    scaled = f_a / t
    m = f_b + scaled + kappa_sq
    return MonitorRecord(t, sample, f_b, scaled, kappa_sq, m, t * m)


def holonomy_distance(A, A0):
    """Largest angular mismatch of the sorted holonomy spectra around both cycles."""
    worst = 0.0
    for cyc in ("y1", "y2"):
        a = np.sort(np.angle(np.linalg.eigvals(holonomy(A, cyc))))
        b = np.sort(np.angle(np.linalg.eigvals(holonomy(A0, cyc))))
        worst = max(worst, float(np.max(np.abs(np.angle(np.exp(1j * (a - b)))))))
    return worst


def kappa_sq(sc: Scenario, b):
    """``|kappa|^2`` of the reference curvature ``2 pi i Theta_ij dx^i ^ dy^j`` in the s = 1 semi-flat metric."""
    if sc.slope is None or not np.any(np.asarray(sc.slope) != 0):
        return 0.0
    phi = sc.potential_obj()
    theta = theta_jacobian(phi, sc.section(), np.asarray(b, dtype=float))   # (n, 2, 2)
    hinv = np.linalg.inv(phi.hess(np.asarray(b, dtype=float)))
    k = 2 * np.pi * np.asarray(theta)
    return float(sum(np.trace(hinv @ kj @ hinv @ kj.T) for kj in k))


def _seed_field(sc: Scenario, grid: FiberGrid):
    rng = np.random.default_rng(sc.seed)
    s = random_hermitian(grid, sc.n, rng, kmax=sc.kmax, amplitude=1.0)
    return sc.amplitude * s


def _row_job(sc: Scenario, t, b):
    grid, sd, A0 = sc.fiber(b)
    s = _seed_field(sc, grid)
    A = apply_hermitian_gauge(s, A0)
    opts = FlowOptions(**{**asdict(sc.flow), "t_end": sc.t_ref / t})
    try:
        res = kempf_ness_flow(A, A0, opts, g_init=expm_herm(s))
    except HymLabError as exc:
        return ReportRow(t, np.nan, np.nan, np.nan, np.nan, 0, 0.0, f"failed: {exc}"), np.nan
    rec = res.records[-1]
    F = c0_norm(curvature(res.A).F)
    dl2 = 0.0 if np.isnan(rec.dist_l2) else rec.dist_l2
    dl21 = 0.0 if np.isnan(rec.dist_l21) else rec.dist_l21
    row = ReportRow(t, dl2, dl21, F, holonomy_distance(res.A, A0), res.steps, res.time)
    return row, F


def thread_count(jobs):
    cap = os.environ.get("HYMLAB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))


def run_collapse_experiment(sc: Scenario, threads=None):
    """Return ``(ConvergenceReport, list[MonitorRecord])``; rows ordered by decreasing ``t``."""
    ts = sc.t_sequence
    samples = [tuple(map(float, b)) for b in sc.base_samples]
    # identical fibers (constant sections) share one job
    keys = []
    for b in samples:
        grid, sd, _ = sc.fiber(b)
        keys.append((grid.tau, tuple(np.round(sd.lifts, 14))))
    unique = list(dict.fromkeys(keys))
    jobs = [(t, samples[keys.index(k)]) for t in ts for k in unique]
    workers = threads or thread_count(len(jobs))
    if workers == 1:
        results = [_row_job(sc, t, b) for t, b in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _row_job(sc, *job), jobs))
    table = {}
    for (t, _), res, k in zip(jobs, results, [k for _ in ts for k in unique]):
        table[(t, k)] = res
    rows = [table[(t, keys[0])][0] for t in ts]
    monitor = []
    for t in ts:
        for i, b in enumerate(samples):
            monitor.append(monitor_record(t, i, 0.0, table[(t, keys[i])][1], kappa_sq(sc, b)))
    failed = [r.t for r in rows if r.status != "ok"]
    report = ConvergenceReport(sc.name, rows, fit_rate(rows), failed)
    if not report.monotone():
        warnings.warn("L21 distance is not monotone along the sweep", RuntimeWarning, stacklevel=2)
    return report, monitor


def fit_rate(rows, floor=1e-6):
    """Slope of ``log ||A_i - A0||_L21`` against ``log ||F_{A_i}||_C0``.

    Rows with curvature below ``floor`` sit at the solver's accuracy floor and
    carry no rate information; they are left out.
    """
    pts = [(np.log(r.f_c0), np.log(r.dist_l21)) for r in rows
           if r.status == "ok" and r.f_c0 > floor and r.dist_l21 > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    if np.ptp(x) == 0:
        return None
    return float(np.polyfit(x, y, 1)[0])


def bubbling_monitor(A: TestbedConnection, base_indices, t):
    """Split the testbed curvature into base, fiber and mixed parts at each base sample.

    Norms use the testbed metric; the fiber part is the sup over the fiber.
    """
    g = A.grid
    gi = np.diag(g.ginv)
    F = curvature4d(A)

    def part(pairs, i1, i2):
        tot = 0.0
        for mu, nu in pairs:
            tot = tot + gi[mu] * gi[nu] * np.sum(np.abs(F[mu, nu][i1, i2]) ** 2, axis=(-2, -1))
        return float(np.sqrt(np.max(tot)))

    out = []
    for k, (i1, i2) in enumerate(base_indices):
        fb = part([(X1, X2)], i1, i2)
        fa = part([(Y1, Y2)], i1, i2)
        kap = part([(X1, Y1), (X1, Y2), (X2, Y1), (X2, Y2)], i1, i2)
        out.append(monitor_record(t, k, fb, fa, kap * kap))
    return out


REPORT_COLUMNS = ("t", "dist_l2", "dist_l21", "f_c0", "holonomy_distance", "steps", "flow_time", "status")
MONITOR_COLUMNS = ("t", "sample", "f_b", "f_a_scaled", "kappa_sq", "m", "tm")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_report(report: ConvergenceReport, monitor, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in REPORT_COLUMNS])
        w.writerow(["fitted_rate", _fmt(report.rate)])
    with open(out / "monitor.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MONITOR_COLUMNS)
        for m in monitor:
            w.writerow([_fmt(getattr(m, c)) for c in MONITOR_COLUMNS])
    summary = {"scenario": report.scenario, "rate": report.rate, "failed_rows": report.failed,
               "monotone_l21": report.monotone(), "rows": [asdict(r) for r in report.rows],
               "monitor": [asdict(m) for m in monitor]}
    (out / "report.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return None
    if isinstance(x, np.generic):
        return x.item()
    return x


__all__ = ["Scenario", "ReportRow", "MonitorRecord", "ConvergenceReport", "run_collapse_experiment",
           "bubbling_monitor", "monitor_record", "holonomy_distance", "fit_rate", "write_report", "kappa_sq",
           "thread_count"]
