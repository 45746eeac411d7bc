import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hymlab.base import (GridPotential, ModulusPotential, QuadraticPotential, cr_residual, d_w, dbar_w,
                         holomorphic_coords, interior_grid, load_grid_potential, make_potential,
                         monge_ampere_residual, save_grid_potential, tau_at, tau_field)
from hymlab.errors import DegenerateHessian, DomainError, StepTooLarge

coord = st.floats(-0.45, 0.45, allow_nan=False)


def fd_hess(phi, x, h=1e-4):
    """Central differences of the analytic gradient."""
    out = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        out[:, i] = (phi.grad(x + e) - phi.grad(x - e)) / (2 * h)
    return out


def test_identity_potential_is_exact():
    phi = make_potential("identity")
    x = np.array([[0.3, -0.2], [0.0, 0.9]])
    assert np.all(monge_ampere_residual(phi, x) == 0)
    assert tau_at(phi, (0.1, 0.2)) == 1j


def test_diagonal_hessian():
    phi = make_potential("diagonal", a=3.0)
    np.testing.assert_allclose(phi.hess(np.array([0.2, 0.1])), np.diag([3.0, 1 / 3]))
    assert tau_at(phi, (0.0, 0.0)) == pytest.approx(3j)


@settings(max_examples=40, deadline=None)
@given(coord, coord)
def test_modulus_derivatives_match_finite_differences(x1, x2):
    phi = make_potential("modulus")
    x = np.array([x1, x2])
    np.testing.assert_allclose(phi.hess(x), fd_hess(phi, x), atol=1e-7)
    h = 1e-4
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (phi.hess(x + e) - phi.hess(x - e)) / (2 * h)
        np.testing.assert_allclose(phi.third(x)[..., i], fd, atol=1e-6)
    ge = np.array([(phi.eval(x + e) - phi.eval(x - e)) / (2 * h) for e in (np.array([h, 0]), np.array([0, h]))])
    np.testing.assert_allclose(phi.grad(x), ge, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(coord, coord)
def test_modulus_tau_is_affine_in_w(x1, x2):
    # the potential is built so that tau(w) = i + eps w
    phi = ModulusPotential(eps=0.1)
    x = np.array([x1, x2])
    w, _ = holomorphic_coords(phi, x)
    assert abs(tau_field(phi, x) - (1j + 0.1 * w)) < 1e-13
    assert monge_ampere_residual(phi, x) < 1e-13


def test_holomorphic_coordinates_satisfy_cauchy_riemann():
    phi = make_potential("modulus")
    w = lambda x: holomorphic_coords(phi, x)[0]  # noqa: E731
    xi = lambda x: holomorphic_coords(phi, x)[1]  # noqa: E731
    r = [cr_residual(phi, w, h) for h in (0.02, 0.01)]
    assert r[1] < 1e-5 and r[1] < r[0] / 3.5
    assert cr_residual(phi, xi, 0.01) < 1e-5
    # d xi / d w = tau
    x = interior_grid(phi.domain, 0.05)
    np.testing.assert_allclose(d_w(phi, xi, x, 1e-4), tau_field(phi, x), atol=1e-7)
    np.testing.assert_allclose(d_w(phi, w, x, 1e-4), 1.0, atol=1e-7)


def test_antiholomorphic_function_has_large_dbar():
    phi = make_potential("identity")
    f = lambda x: np.conj(holomorphic_coords(phi, x)[0])  # noqa: E731
    x = interior_grid(phi.domain, 0.1)
    np.testing.assert_allclose(dbar_w(phi, f, x, 1e-3), 1.0, atol=1e-9)


def test_domain_and_argument_errors():
    phi = make_potential("modulus")
    with pytest.raises(DomainError):
        phi.hess(np.array([0.9, 0.0]))
    with pytest.raises(ValueError):
        make_potential("nope")
    with pytest.raises(ValueError):
        QuadraticPotential(-1.0)
    with pytest.raises(StepTooLarge):
        interior_grid(phi.domain, 0.6)


def test_tau_gate_rejects_non_monge_ampere_hessian():
    x1 = np.linspace(-1, 1, 33)
    X = np.stack(np.meshgrid(x1, x1, indexing="ij"), axis=-1)
    bad = GridPotential(x1, x1, X[..., 0] ** 2 + X[..., 1] ** 2)  # det hess = 4
    with pytest.raises(DegenerateHessian):
        tau_at(bad, (0.0, 0.0))


def test_grid_potential_tracks_analytic(tmp_path):
    phi = make_potential("modulus")
    grid = make_potential("modulus_grid")
    x = interior_grid(phi.domain, 0.05)
    assert np.max(np.abs(grid.hess(x) - phi.hess(x))) < 1e-6
    assert np.max(monge_ampere_residual(grid, x)) < 1e-5
    path = save_grid_potential(tmp_path / "phi.bin", phi)
    loaded = load_grid_potential(path)
    np.testing.assert_allclose(loaded.hess(x), grid.hess(x), atol=1e-12)
    via_name = make_potential("grid", path=str(path))
    assert abs(tau_at(via_name, (0.1, 0.1)) - tau_at(phi, (0.1, 0.1))) < 1e-6
