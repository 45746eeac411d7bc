import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from hymlab.errors import CurvatureTooLarge, DegenerateSpectralGap, OutsideNeighborhood
from hymlab.fiber import FiberGrid, c0_norm, l2_norm, plane_wave, random_hermitian
from hymlab.gauge import apply_hermitian_gauge, d_A, dbar_A
from hymlab.poincare import (dense_poincare, fourier_matrix_derivative, moser_constant, moser_ratio,
                             poincare_constant, poincare_violations, recover_hermitian)
from hymlab.spectral import SpectralData, reference_connection


def data(t1, t2, tau=1j):
    return SpectralData.from_theta([t1, -t1], [t2, -t2], tau)


def test_fourier_derivative_matrix_on_trig_polynomial():
    N = 16
    y = np.arange(N) / N
    f = np.sin(2 * np.pi * 3 * y) + np.cos(2 * np.pi * y)
    df = 6 * np.pi * np.cos(2 * np.pi * 3 * y) - 2 * np.pi * np.sin(2 * np.pi * y)
    np.testing.assert_allclose(fourier_matrix_derivative(N) @ f, df, atol=1e-11)


@settings(max_examples=5, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(-0.45, 0.45), st.builds(complex, st.floats(-0.3, 0.3), st.floats(0.7, 1.5)))
def test_mode_formula_matches_dense_oracle(t1, t2, tau):
    sd = data(t1, t2, tau)
    g = FiberGrid(16, tau)
    est = poincare_constant(sd, g)
    assert est.lambda_min == pytest.approx(dense_poincare(sd, g), rel=1e-9)


def test_constant_is_unitary_conjugation_invariant():
    sd = data(0.25, 0.1)
    g = FiberGrid(16, 1j)
    u = unitary_group.rvs(2, random_state=3)
    assert dense_poincare(sd, g, u) == pytest.approx(dense_poincare(sd, g), rel=1e-9)


def test_certificate_mode_attains_the_bound():
    sd = data(0.2, 0.15)
    g = FiberGrid(32, 1j)
    est = poincare_constant(sd, g)
    A0 = reference_connection(sd, g)
    j, k = est.entry
    m, kk = est.mode
    s = np.zeros((32, 32, 2, 2), dtype=complex)
    e = plane_wave(g, m, kk)
    s[..., j, k] = e
    s[..., k, j] = np.conj(e)
    ratio = l2_norm(s, g) / (g.dzbar_norm * l2_norm(dbar_A(A0, s), g))
    assert ratio == pytest.approx(est.c_p, rel=1e-12)


def test_degenerate_gap_rejected():
    with pytest.raises(DegenerateSpectralGap):
        poincare_constant(data(0.5, 0.0), FiberGrid(16, 1j))


def test_no_violations_on_random_samples():
    sd = data(0.25, 0.0)
    g = FiberGrid(32, 1j)
    rng = np.random.default_rng(0)
    samples = [random_hermitian(g, 2, rng, kmax=k % 5 + 1) for k in range(100)]
    bad, worst = poincare_violations(sd, g, samples)
    assert bad == 0 and worst <= 1 + 1e-12


def test_dbar_and_d_norms_agree_on_hermitian_fields():
    sd = data(0.2, 0.1, 0.3 + 1.2j)
    g = FiberGrid(32, sd.tau)
    A0 = reference_connection(sd, g)
    s = random_hermitian(g, 2, np.random.default_rng(1), kmax=3)
    assert abs(l2_norm(dbar_A(A0, s), g) - l2_norm(d_A(A0, s), g)) < 1e-10


def test_moser_ratio_closed_forms():
    g = FiberGrid(16)
    s = np.broadcast_to(np.diag([2.0, -2.0]), (16, 16, 2, 2))
    c0, l2 = np.sqrt(8), np.sqrt(8)
    assert moser_ratio(s, g, 0.01) == pytest.approx(c0**2 / (l2 * 1.01))
    assert moser_ratio(s, g, 0.01, "homogeneous") == pytest.approx(1 / 1.01)
    # a single mode has C0 / L2 = sqrt(2), so the literal ratio grows linearly in a
    wave = np.zeros((16, 16, 2, 2), dtype=complex)
    wave[..., 0, 1] = plane_wave(g, 2, 1)
    wave[..., 1, 0] = np.conj(wave[..., 0, 1])
    r = [moser_ratio(a * wave, g, 0.0) for a in (2.0, 4.0, 8.0)]
    np.testing.assert_allclose(np.diff(np.log(r)) / np.log(2), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        moser_ratio(s, g, 0.01, "other")


def test_moser_constant_gate():
    g = FiberGrid(32, 1j)
    A0 = reference_connection(data(0.25, 0.0), g)
    big = random_hermitian(g, 2, np.random.default_rng(0), amplitude=1.0)
    with pytest.raises(CurvatureTooLarge):
        moser_constant([big], g, A0, 1e-2)
    small = [random_hermitian(g, 2, np.random.default_rng(k), kmax=1, amplitude=1e-4) for k in range(4)]
    assert 0 < moser_constant(small, g, A0, 1e-2, "homogeneous") < 10


def test_recover_hermitian_inverts_gauge_action():
    sd = data(0.25, 0.0)
    g = FiberGrid(32, 1j)
    A0 = reference_connection(sd, g)
    s = random_hermitian(g, 2, np.random.default_rng(2), kmax=2, amplitude=0.05)
    A = apply_hermitian_gauge(s, A0)
    r, info = recover_hermitian(A, A0, return_info=True)
    assert c0_norm(r - s) < 1e-9 and info.residual < 1e-11
    far = apply_hermitian_gauge(20 * s, A0)
    with pytest.raises(OutsideNeighborhood):
        recover_hermitian(far, A0)
