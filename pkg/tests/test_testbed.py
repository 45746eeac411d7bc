import numpy as np
import pytest

from hymlab.fiber import FiberGrid
from hymlab.gauge import curvature
from hymlab.spectral import theta_from_holonomy
from hymlab.testbed import (TestbedConnection, TestbedGrid, apply_hermitian_gauge4d, curvature4d,
                            energy_bookkeeping, linear_section_connection, random_hermitian4d,
                            restrict_to_fiber)

Q0 = [0.2 + 0.1j, -0.2 - 0.1j]


@pytest.mark.parametrize("s", [1.0, 0.5])
def test_constant_section_is_flat(s):
    A = linear_section_connection(TestbedGrid(8, s), Q0, [0, 0])
    e = energy_bookkeeping(A)
    assert e.norm_f2 == 0 and e.trace_ff == 0 and e.defect == 0


@pytest.mark.parametrize("s", [1.0, 0.5, 0.1])
def test_linear_section_energy_closed_form(s):
    # curvature 2 pi i Theta dx ^ dy; the metric factors s and 1/s cancel
    c = np.array([1 + 2j, -1 - 2j])
    e = energy_bookkeeping(linear_section_connection(TestbedGrid(8, s), Q0, c))
    assert e.norm_f2 == pytest.approx(8 * np.pi**2 * np.sum(np.abs(c) ** 2), rel=1e-12)
    assert e.relative_defect < 1e-12 and e.f02_c0 < 1e-12


@pytest.mark.parametrize("sloped", [False, True])
def test_bookkeeping_for_gauged_connection(sloped):
    g = TestbedGrid(8, 0.7)
    c = [1, -1] if sloped else [0, 0]
    A0 = linear_section_connection(g, Q0, c)
    s = random_hermitian4d(g, 2, np.random.default_rng(0), kmax=1, amplitude=0.3, diagonal=sloped)
    e = energy_bookkeeping(apply_hermitian_gauge4d(s, A0))
    assert e.norm_f2 > 1e-2
    assert e.relative_defect < 1e-6


def test_gauged_connection_has_no_02_part_up_to_aliasing():
    # e^s is not band limited; the (0,2) residue decays spectrally with N
    f02 = []
    for N in (8, 12):
        g = TestbedGrid(N, 0.7)
        A0 = linear_section_connection(g, Q0, [0, 0])
        s = random_hermitian4d(g, 2, np.random.default_rng(0), kmax=1, amplitude=0.3)
        f02.append(energy_bookkeeping(apply_hermitian_gauge4d(s, A0)).f02_c0)
    assert f02[1] < 1e-5 and f02[1] < 1e-2 * f02[0]


def test_non_integrable_perturbation_breaks_identity():
    g = TestbedGrid(8, 1.0)
    A0 = linear_section_connection(g, Q0, [0, 0])
    rng = np.random.default_rng(1)
    b = np.stack([1j * random_hermitian4d(g, 2, rng, kmax=1, amplitude=0.3) for _ in range(4)])
    e = energy_bookkeeping(TestbedConnection(b, A0.theta0, A0.slope, g))
    assert e.f02_c0 > 1e-2 and e.relative_defect > 1e-3


def test_sloped_background_rejects_offdiagonal_gauge():
    g = TestbedGrid(8)
    A0 = linear_section_connection(g, Q0, [1, -1])
    s = random_hermitian4d(g, 2, np.random.default_rng(2))
    with pytest.raises(ValueError):
        apply_hermitian_gauge4d(s, A0)
    with pytest.raises(ValueError):
        linear_section_connection(g, Q0, [1, -1], tau=2j)
    with pytest.raises(ValueError):
        TestbedGrid(5)


def test_curvature_is_antisymmetric():
    g = TestbedGrid(8)
    A0 = linear_section_connection(g, Q0, [1, -1])
    s = random_hermitian4d(g, 2, np.random.default_rng(3), diagonal=True)
    F = curvature4d(apply_hermitian_gauge4d(s, A0))
    assert np.max(np.abs(F + np.swapaxes(F, 0, 1))) == 0


def test_fiber_restriction_reads_the_section():
    g = TestbedGrid(8)
    A = linear_section_connection(g, Q0, [1, -1])
    fg = FiberGrid(8, 1j)
    # grid point (2, 0) sits at x = (1/4, 0), where q = q0 + c/4
    Af = restrict_to_fiber(A, 2, 0, fg)
    assert np.max(np.abs(curvature(Af).F)) == 0
    t1, t2 = theta_from_holonomy(Af)
    q = np.array(Q0) + np.array([1, -1]) / 4
    np.testing.assert_allclose(sorted(t1), sorted(q.real), atol=1e-12)
    np.testing.assert_allclose(sorted(t2), sorted(-q.imag), atol=1e-12)
