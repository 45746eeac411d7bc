"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible without ``-s``) and then
asserts the same verdict. Criterion 10 runs the full eight-row sweep twice and
dominates the runtime (several minutes on one core).
"""

import time
from pathlib import Path

import numpy as np
import pytest

from hymlab import checks
from hymlab.config import load_config
from hymlab.fiber import FiberGrid, c0_norm, random_hermitian
from hymlab.flows import kempf_ness_flow
from hymlab.gauge import apply_hermitian_gauge, curvature_identity_residual, expm_herm
from hymlab.gaugefix import c0_bound, normalize_gauge
from hymlab.lab import holonomy_distance, run_collapse_experiment, write_report
from hymlab.poincare import (dense_poincare, holomorphic_frame_identity, moser_constant, poincare_constant,
                             poincare_violations)
from hymlab.spectral import SpectralData, reference_connection
from hymlab.testbed import (TestbedGrid, apply_hermitian_gauge4d, energy_bookkeeping, linear_section_connection,
                            random_hermitian4d)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})")
        assert ok, detail
    return report


def suite_detail(results):
    worst = [r for r in results if not r.passed]
    return f"{len(results) - len(worst)}/{len(results)} checks" + (f"; failing: {worst[0].name}" if worst else "")


@pytest.fixture(scope="module")
def connection_results():
    start = time.perf_counter()
    res = checks.connection_suite()
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def ref64():
    g = FiberGrid(64, 1j)
    return g, reference_connection(SpectralData([0.25, -0.25], 1j), g)


def test_criterion_01_geometry_suite(verdict):
    start = time.perf_counter()
    res = checks.geometry_suite()
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in res) and elapsed < 10
    verdict(1, "geometry suite", ok, f"{suite_detail(res)}, {elapsed:.1f} s")


def test_criterion_02_degeneration_identity(verdict):
    start = time.perf_counter()
    res = checks.degeneration_suite((1.0, 0.5, 0.1, 0.01))
    elapsed = time.perf_counter() - start
    worst = max(r.value for r in res)
    ok = all(r.passed for r in res) and elapsed < 1
    verdict(2, "degeneration identity", ok, f"max residual {worst:.2e}, {elapsed:.2f} s")


def test_criterion_03_reference_connection(verdict, connection_results):
    res, elapsed = connection_results
    picked = [r for r in res if r.name.startswith(("reference", "triple"))]
    ok = len(picked) == 4 and all(r.passed for r in picked) and elapsed < 30
    values = ", ".join(f"{r.value:.1e}" for r in picked)
    verdict(3, "reference connection and triple HYM", ok, f"{values}; {elapsed:.1f} s")


def test_criterion_04_lift_gauges(verdict, connection_results):
    res, _ = connection_results
    picked = [r for r in res if r.name.startswith("lift gauge")]
    ok = len(picked) == 3 and all(r.passed for r in picked)
    verdict(4, "lattice-lift gauge equivalence", ok, f"max residual {max(r.value for r in picked):.1e}")


def test_criterion_05_poincare(verdict):
    start = time.perf_counter()
    mismatch = 0.0
    for q in ([0.2 + 0.15j, -0.2 - 0.15j], [0.25, -0.25], [0.1 + 0.3j, -0.1 - 0.3j]):
        sd = SpectralData(q, 1j)
        g16 = FiberGrid(16, 1j)
        mismatch = max(mismatch, abs(poincare_constant(sd, g16).lambda_min - dense_poincare(sd, g16)))
    sd = SpectralData([0.2 + 0.15j, -0.2 - 0.15j], 1j)
    g = FiberGrid(64, 1j)
    rng = np.random.default_rng(0)
    samples = (random_hermitian(g, 2, rng, kmax=int(rng.integers(1, 6))) for _ in range(1000))
    bad, worst = poincare_violations(sd, g, samples)
    elapsed = time.perf_counter() - start
    ok = mismatch < 1e-8 and bad == 0 and elapsed < 120
    verdict(5, "Poincare constant", ok,
            f"dense mismatch {mismatch:.1e}, {bad}/1000 violations, worst ratio {worst:.3f}, {elapsed:.1f} s")


def test_criterion_06_curvature_identity(verdict, ref64):
    g, A0 = ref64
    g32 = FiberGrid(32, 1j)
    A32 = reference_connection(SpectralData([0.25, -0.25], 1j), g32)
    rng = np.random.default_rng(6)
    worst64, decreasing = 0.0, 0
    for _ in range(20):
        amp = rng.uniform(0.2, 1.0)
        s = random_hermitian(g, 2, rng, kmax=2, amplitude=amp)
        r64 = curvature_identity_residual(s, A0)
        # the same band-limited field sampled on the coarser grid
        r32 = curvature_identity_residual(np.ascontiguousarray(s[::2, ::2]), A32)
        worst64 = max(worst64, r64)
        decreasing += r64 < r32
    ok = worst64 < 1e-6 and decreasing == 20
    verdict(6, "curvature identity", ok, f"max residual {worst64:.1e} at N=64, decreases on {decreasing}/20")


def test_criterion_07_kempf_ness_flow(verdict, ref64):
    g, A0 = ref64
    start = time.perf_counter()
    s = random_hermitian(g, 2, np.random.default_rng(7), kmax=2, amplitude=0.5)
    res = kempf_ness_flow(apply_hermitian_gauge(s, A0), A0, g_init=expm_herm(s))
    elapsed = time.perf_counter() - start
    final = res.records[-1].hym_residual
    monotone = bool(np.all(np.diff(res.energies) <= 0))
    hol = holonomy_distance(res.A, A0)
    ok = res.converged and final < 1e-8 and monotone and hol < 1e-6 and elapsed < 300
    verdict(7, "Kempf-Ness flow", ok, f"residual {final:.1e} after {res.steps} steps, monotone={monotone}, "
                                      f"holonomy {hol:.1e}, {elapsed:.1f} s")


def test_criterion_08_normalize_gauge(verdict, ref64):
    g, A0 = ref64
    rng = np.random.default_rng(8)
    small = random_hermitian(g, 2, rng, kmax=1) * np.eye(2)
    small *= 1e-4 / c0_norm(small)
    s = small + np.diag([10.0, -10.0])
    sp, info = normalize_gauge(s, A0, return_info=True)
    samples = [random_hermitian(g, 2, rng, kmax=1, amplitude=1e-4) for _ in range(8)] + [sp]
    C0 = c0_bound(moser_constant(samples, g, A0, 1e-2, form="homogeneous"), info.lambda0)
    idem = float(np.max(np.abs(normalize_gauge(sp, A0) - sp)))
    ok = info.residual < 1e-8 and info.c0_s_prime <= C0 < 5 and idem < 1e-8
    verdict(8, "normalize_gauge", ok, f"||s'||_C0 {info.c0_s_prime:.1e} <= C0 {C0:.3f}, "
                                      f"residual {info.residual:.1e}, idempotence {idem:.1e}")


def test_criterion_09_holomorphic_frame_identity(verdict, ref64):
    g, A0 = ref64
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(10):
        s = random_hermitian(g, 2, rng, kmax=2, amplitude=rng.uniform(0.1, 1.0))
        grad, _, curv = holomorphic_frame_identity(s, A0)
        worst = max(worst, abs(grad - curv) / curv)
    verdict(9, "gradient/curvature energy identity", worst < 1e-8, f"max relative defect {worst:.1e}")


@pytest.mark.slow
def test_criterion_10_collapse_sweep(verdict, tmp_path):
    cfg = load_config(CONFIGS / "collapse8.toml")
    sc = cfg.scenario
    start = time.perf_counter()
    report, monitor = run_collapse_experiment(sc, threads=2)
    elapsed = time.perf_counter() - start
    again, monitor2 = run_collapse_experiment(sc, threads=1)
    a = write_report(report, monitor, tmp_path / "a")
    b = write_report(again, monitor2, tmp_path / "b")
    identical = all((a / f).read_bytes() == (b / f).read_bytes() for f in ("report.csv", "monitor.csv", "report.json"))
    d = [r.dist_l21 for r in report.rows]
    tm_ok = True
    for k in range(len(sc.base_samples)):
        tm = [m.tm for m in monitor if m.sample == k]
        tm_ok &= all(y <= x for x, y in zip(tm, tm[1:])) and tm[-1] < 1e-3
    ok = (len(report.rows) == 8 and not report.failed and report.monotone() and d[-1] < 1e-4 and tm_ok
          and identical and elapsed < 1200)
    verdict(10, "collapse sweep", ok, f"final L21 {d[-1]:.2e}, t*m ok={tm_ok}, rate {report.rate:.3f}, "
                                      f"bit-identical={identical}, {elapsed:.0f} s per sweep")


def test_criterion_11_energy_bookkeeping(verdict):
    g = TestbedGrid(12, 0.5)
    A0 = linear_section_connection(g, [0.2 + 0.1j, -0.2 - 0.1j], [1, -1])
    s = random_hermitian4d(g, 2, np.random.default_rng(11), kmax=1, amplitude=0.3, diagonal=True)
    e0 = energy_bookkeeping(A0)
    e1 = energy_bookkeeping(apply_hermitian_gauge4d(s, A0))
    ok = e0.relative_defect < 1e-6 and e1.relative_defect < 1e-6 and e1.norm_f2 != e0.norm_f2
    verdict(11, "4d energy bookkeeping", ok,
            f"relative defects {e0.relative_defect:.1e} (linear section), {e1.relative_defect:.1e} (perturbed)")
