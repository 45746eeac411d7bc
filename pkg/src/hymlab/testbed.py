"""Doubly periodic four-dimensional testbed ``T^2_x x T^2_y``.

The chart carries the identity-Hessian semi-flat structure at scale ``s``:
``g = diag(1/s, 1/s, s, s)``, ``omega = dx1^dx2 / s - s dy1^dy2`` and the
complex coordinates ``w = x1 + i x2``, ``z = y2 + i y1`` (fiber modulus
``tau = i``). A connection is ``d + a_bg + b`` where ``b`` is periodic and the
background is the diagonal connection of a linear spectral section

    a_bg = 2 pi i diag(theta1_j(x) dy1 + theta2_j(x) dy2),   theta(x) = theta0 + Theta^T x,

whose curvature ``2 pi i Theta_ij dx^i ^ dy^j`` is constant. For a nonzero
slope only diagonal ``b`` (and diagonal gauge transformations) keep the
fields periodic; this is enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .base import QuadraticPotential
from .fiber import dagger
from .gauge import expm_herm
from .semiflat import X1, X2, Y1, Y2, triple_at, wedge_top

AXES = (0, 1, 2, 3)


@dataclass(frozen=True)
class TestbedGrid:
    __test__ = False  # not a pytest class

    N: int = 16
    s: float = 1.0
    volume: float = field(default=1.0, init=False)

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise ValueError(f"N must be even and >= 4, got {self.N}")

    @cached_property
    def triple(self):
        return triple_at(QuadraticPotential(1.0), (0.0, 0.0), self.s)

    @cached_property
    def ginv(self):
        return np.diag(1.0 / np.diag(self.triple.g))

    @cached_property
    def orientation(self):
        """Sign of ``omega^2 / 2`` against ``e^1234``."""
        om = self.triple.omega_I
        return float(np.sign(wedge_top(om, om)))

    @cached_property
    def coords(self):
        y = np.arange(self.N) / self.N
        return np.meshgrid(y, y, y, y, indexing="ij")

    @cached_property
    def symbols(self):
        k = np.fft.fftfreq(self.N, 1.0 / self.N)
        k = np.where(np.abs(k) == self.N // 2, 0.0, k)
        out = []
        for ax in AXES:
            shape = [1, 1, 1, 1]
            shape[ax] = self.N
            out.append((2j * np.pi * k).reshape(shape))
        return out

    def deriv(self, f, ax):
        sym = self.symbols[ax].reshape(self.symbols[ax].shape + (1,) * (f.ndim - 4))
        return np.fft.ifftn(np.fft.fftn(f, axes=AXES) * sym, axes=AXES)

    def integrate(self, f):
        return np.mean(f, axis=AXES) * self.volume


@dataclass
class TestbedConnection:
    __test__ = False

    b: np.ndarray            # (4, N, N, N, N, n, n) periodic anti-Hermitian part
    theta0: np.ndarray       # (n, 2)
    slope: np.ndarray        # (n, 2, 2): slope[j, i, l] = d theta_l^j / d x^i
    grid: TestbedGrid

    @property
    def n(self):
        return self.b.shape[-1]

    @property
    def has_slope(self):
        return bool(np.any(self.slope != 0))

    def background(self):
        """Pointwise background components ``(4, N, N, N, N, n, n)``."""
        g = self.grid
        x1, x2 = g.coords[0], g.coords[1]
        out = np.zeros_like(self.b)
        idx = np.arange(self.n)
        for l, ax in enumerate((Y1, Y2)):
            th = self.theta0[:, l] + x1[..., None] * self.slope[:, 0, l] + x2[..., None] * self.slope[:, 1, l]
            out[ax][..., idx, idx] = 2j * np.pi * th
        return out

    def background_derivative(self, mu, nu):
        """Constant ``d_mu (a_bg)_nu`` as an ``(n, n)`` matrix."""
        d = np.zeros((self.n, self.n), dtype=complex)
        if mu in (X1, X2) and nu in (Y1, Y2):
            d[np.diag_indices(self.n)] = 2j * np.pi * self.slope[:, mu - X1, nu - Y1]
        return d

    def total(self):
        return self.background() + self.b


def linear_section_connection(grid: TestbedGrid, q0, c, tau=1j):
    """Reference connection of ``q_j(w) = q0_j + c_j w`` with ``w = x1 + i x2``.

    ``q = theta1 - tau theta2`` gives ``theta1 = Re q``, ``theta2 = -Im q`` for
    ``tau = i``. The slope is symmetric and trace free, so the (0,2)
    curvature vanishes; integer ``c_j`` make it a connection on a bundle over
    the four-torus.
    """
    if tau != 1j:
        raise ValueError("the testbed uses tau = i")
    q0 = np.asarray(q0, dtype=complex)
    c = np.asarray(c, dtype=complex)
    n = q0.size
    theta0 = np.stack([q0.real, -q0.imag], axis=-1)
    slope = np.zeros((n, 2, 2))
    slope[:, 0, 0], slope[:, 1, 0] = c.real, -c.imag
    slope[:, 0, 1], slope[:, 1, 1] = -c.imag, -c.real
    N = grid.N
    b = np.zeros((4, N, N, N, N, n, n), dtype=complex)
    return TestbedConnection(b, theta0, slope, grid)


def curvature4d(A: TestbedConnection):
    """``F[mu, nu]`` with ``F = sum_{mu<nu} F[mu, nu] e^mu ^ e^nu``."""
    g = A.grid
    a = A.total()
    db = [[None] * 4 for _ in range(4)]
    for mu in AXES:
        for nu in AXES:
            if mu != nu:
                db[mu][nu] = g.deriv(A.b[nu], mu) + A.background_derivative(mu, nu)
    F = np.zeros((4, 4) + A.b.shape[1:], dtype=complex)
    for mu in AXES:
        for nu in range(mu + 1, 4):
            F[mu, nu] = db[mu][nu] - db[nu][mu] + a[mu] @ a[nu] - a[nu] @ a[mu]
            F[nu, mu] = -F[mu, nu]
    return F


def _pair_norm2(F, ginv, pairs):
    tot = 0.0
    for mu, nu in pairs:
        tot = tot + ginv[mu, mu] * ginv[nu, nu] * np.sum(np.abs(F[mu, nu]) ** 2, axis=(-2, -1))
    return tot


def pointwise_norm2(F, grid: TestbedGrid):
    return _pair_norm2(F, grid.ginv, [(m, n) for m in AXES for n in range(m + 1, 4)])


def lambda_f(F, grid: TestbedGrid):
    """``Lambda F = <F, omega>_g``; ``i Lambda F`` is its product with ``i``."""
    om = grid.triple.omega_I
    gi = grid.ginv
    out = 0
    for mu in AXES:
        for nu in range(mu + 1, 4):
            w = om[mu, nu] * gi[mu, mu] * gi[nu, nu]
            if w != 0:
                out = out + w * F[mu, nu]
    return out


def trace_f_wedge_f(F, grid: TestbedGrid):
    """Density of ``Tr(F ^ F)`` against the complex orientation ``omega^2 / 2``."""
    ff = (F[0, 1] @ F[2, 3] - F[0, 2] @ F[1, 3] + F[0, 3] @ F[1, 2]
          + F[2, 3] @ F[0, 1] - F[1, 3] @ F[0, 2] + F[1, 2] @ F[0, 3])
    dens = np.trace(ff, axis1=-2, axis2=-1)
    vol = np.sqrt(np.linalg.det(grid.triple.g))
    return grid.orientation * dens / vol


def f02(F):
    """``F(d/dwbar, d/dzbar)``: the (0,2) coefficient."""
    wb = {X1: 0.5, X2: 0.5j}
    zb = {Y1: 0.5j, Y2: 0.5}
    out = 0
    for i, ci in wb.items():
        for j, cj in zb.items():
            out = out + ci * cj * F[i, j]
    return out


@dataclass
class EnergyBookkeeping:
    norm_f2: float
    norm_lambda_f2: float
    trace_ff: float
    defect: float
    relative_defect: float
    f02_c0: float


def energy_bookkeeping(A: TestbedConnection) -> EnergyBookkeeping:
    """``||F||^2 - ||i Lambda F||^2 - int Tr(F ^ F)`` and its ingredients."""
    g = A.grid
    F = curvature4d(A)
    nf = float(g.integrate(pointwise_norm2(F, g)))
    LF = lambda_f(F, g)
    nl = float(g.integrate(np.sum(np.abs(LF) ** 2, axis=(-2, -1))))
    tr = float(np.real(g.integrate(trace_f_wedge_f(F, g))))
    defect = nf - nl - tr
    scale = max(nf, 1e-300)
    f2 = float(np.sqrt(np.max(np.sum(np.abs(f02(F)) ** 2, axis=(-2, -1)))))
    return EnergyBookkeeping(nf, nl, tr, defect, abs(defect) / scale, f2)


def _alpha(a):
    """(0,1) coefficients ``(alpha_wbar, alpha_zbar)`` of anti-Hermitian components."""
    return 0.5 * (a[X1] + 1j * a[X2]), 0.5 * (1j * a[Y1] + a[Y2])


def _from_alpha(aw, az):
    out = np.empty((4,) + aw.shape, dtype=complex)
    out[X1] = aw - dagger(aw)
    out[X2] = -1j * (aw + dagger(aw))
    out[Y1] = -1j * (az + dagger(az))
    out[Y2] = az - dagger(az)
    return out


def apply_complex_gauge4d(sigma, A: TestbedConnection) -> TestbedConnection:
    """``sigma_dagger A``; the result is unitary, so only the (0,1) part is transformed."""
    g = A.grid
    offdiag = sigma - np.einsum("...ii->...i", sigma)[..., None] * np.eye(A.n)
    if A.has_slope and np.max(np.abs(offdiag)) > 0:
        raise ValueError("a sloped background only admits diagonal gauge transformations")
    si = np.linalg.inv(sigma)
    bg = A.background()
    aw_bg, az_bg = _alpha(bg)
    aw, az = _alpha(A.total())
    dw = 0.5 * (g.deriv(sigma, X1) + 1j * g.deriv(sigma, X2))
    dz = 0.5 * (1j * g.deriv(sigma, Y1) + g.deriv(sigma, Y2))
    new_w = sigma @ aw @ si - dw @ si - aw_bg
    new_z = sigma @ az @ si - dz @ si - az_bg
    return TestbedConnection(_from_alpha(new_w, new_z), A.theta0, A.slope, g)


def apply_hermitian_gauge4d(s, A: TestbedConnection) -> TestbedConnection:
    return apply_complex_gauge4d(expm_herm(s), A)


def random_hermitian4d(grid: TestbedGrid, n, rng, kmax=1, amplitude=0.3, diagonal=False):
    """Smooth trace-free Hermitian field on the four-torus from modes ``|k| <= kmax``."""
    N = grid.N
    spec = np.zeros((N,) * 4 + (n, n), dtype=complex)
    ks = range(-kmax, kmax + 1)
    for k1 in ks:
        for k2 in ks:
            for k3 in ks:
                for k4 in ks:
                    c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
                    spec[k1 % N, k2 % N, k3 % N, k4 % N] = c / (1 + k1 * k1 + k2 * k2 + k3 * k3 + k4 * k4)
    f = np.fft.ifftn(spec, axes=AXES) * N**4
    f = 0.5 * (f + dagger(f))
    if diagonal:
        f = np.einsum("...ii->...i", f)[..., None] * np.eye(n)
    f = f - np.trace(f, axis1=-2, axis2=-1)[..., None, None] * np.eye(n) / n
    scale = np.sqrt(np.max(np.sum(np.abs(f) ** 2, axis=(-2, -1))))
    return f * (amplitude / scale) if scale > 0 else f


def restrict_to_fiber(A: TestbedConnection, i1, i2, fiber_grid):
    """Fiber connection ``(a_y1, a_y2)`` at the base grid point ``(i1, i2)``."""
    from .spectral import FiberConnection
    a = A.total()
    return FiberConnection(a[Y1][i1, i2].copy(), a[Y2][i1, i2].copy(), fiber_grid)


__all__ = ["TestbedGrid", "TestbedConnection", "linear_section_connection", "curvature4d", "pointwise_norm2",
           "lambda_f", "trace_f_wedge_f", "f02", "EnergyBookkeeping", "energy_bookkeeping",
           "apply_complex_gauge4d", "apply_hermitian_gauge4d", "random_hermitian4d", "restrict_to_fiber"]
