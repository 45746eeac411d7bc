import csv

import numpy as np
import pytest

from hymlab.errors import MaxStepsExceeded
from hymlab.fiber import FiberGrid, l2_norm, random_hermitian
from hymlab.flows import CSV_COLUMNS, FlowOptions, kempf_ness_flow, ym_heat_flow
from hymlab.gauge import apply_hermitian_gauge, connection_distance, curvature, expm_herm
from hymlab.lab import holonomy_distance
from hymlab.spectral import FiberConnection, SpectralData, reference_connection


@pytest.fixture(scope="module")
def orbit():
    g = FiberGrid(16, 1j)
    A0 = reference_connection(SpectralData([0.25, -0.25], 1j), g)
    s = random_hermitian(g, 2, np.random.default_rng(0), kmax=1, amplitude=0.5)
    return g, A0, s, apply_hermitian_gauge(s, A0)


def test_flat_data_is_stationary(orbit):
    g, A0, _, _ = orbit
    for res in (kempf_ness_flow(A0, A0), ym_heat_flow(A0)):
        assert res.converged and res.steps == 0
        assert connection_distance(res.A, A0) == 0


def test_abelian_heat_decay_rate():
    # a2 = 2 pi i eps sin(2 pi y1): F12 = d1 a2 solves the scalar heat equation
    g = FiberGrid(16, 1j)
    eps = 1e-3
    y1, _ = g.coords
    a2 = (2j * np.pi * eps * np.sin(2 * np.pi * y1))[..., None, None]
    A = FiberConnection(np.zeros_like(a2), a2, g)
    t = 0.02
    res = ym_heat_flow(A, FlowOptions(t_end=t, tol=0.0))
    f0 = l2_norm(curvature(A).F, g)
    f1 = l2_norm(curvature(res.A).F, g)
    rate = -np.log(f1 / f0) / t
    assert res.time == pytest.approx(t)
    assert rate == pytest.approx((2 * np.pi) ** 2, rel=1e-2)


def test_kempf_ness_reaches_flat_orbit_point(orbit):
    g, A0, s, A = orbit
    res = kempf_ness_flow(A, A0, g_init=expm_herm(s))
    assert res.converged and res.records[-1].hym_residual < 1e-8
    e = res.energies
    assert np.all(np.diff(e) <= 0)
    assert holonomy_distance(res.A, A0) < 1e-6
    assert max(d for _, d in res.consistency) < 1e-6


def test_kn_and_ym_energies_agree_at_matched_times(orbit):
    g, A0, _, A = orbit
    for t in (0.01, 0.05):
        opts = FlowOptions(t_end=t, tol=0.0, track_gauge=False)
        kn = kempf_ness_flow(A, A0, opts)
        ym = ym_heat_flow(A, opts)
        assert kn.time == pytest.approx(t) and ym.time == pytest.approx(t)
        assert abs(kn.energies[-1] - ym.energies[-1]) < 1e-6


def test_etdrk4_and_lawson_agree(orbit):
    g, A0, _, A = orbit
    base = dict(t_end=0.03, tol=0.0, track_gauge=False, rtol=1e-9)
    a = kempf_ness_flow(A, A0, FlowOptions(scheme="etdrk4", **base))
    b = kempf_ness_flow(A, A0, FlowOptions(scheme="lawson", **base))
    assert connection_distance(a.A, b.A) < 1e-7


def test_without_gauge_fix_energy_is_unchanged(orbit):
    # the gauge generator is unitary, so gauge-invariant quantities do not see it
    g, A0, _, A = orbit
    opts = dict(t_end=0.02, tol=0.0, track_gauge=False, rtol=1e-9)
    a = kempf_ness_flow(A, A0, FlowOptions(**opts))
    b = kempf_ness_flow(A, A0, FlowOptions(gauge_fix=False, **opts))
    assert a.energies[-1] == pytest.approx(b.energies[-1], rel=1e-8)


def test_step_budget(orbit):
    g, A0, _, A = orbit
    with pytest.raises(MaxStepsExceeded):
        kempf_ness_flow(A, A0, FlowOptions(max_steps=2))


def test_trajectory_csv(orbit, tmp_path):
    g, A0, s, A = orbit
    res = kempf_ness_flow(A, A0, FlowOptions(t_end=0.05, tol=0.0), g_init=expm_herm(s))
    path = tmp_path / "traj.csv"
    res.write_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == len(res.records) + 1
    first = dict(zip(CSV_COLUMNS, map(float, rows[1])))
    assert first["step"] == 0 and first["c0_s"] == pytest.approx(0.5, rel=1e-12)
    assert float(rows[-1][1]) == res.time
