"""Hessian potentials on an affine base chart.

A potential ``phi(x1, x2)`` whose Hessian has unit determinant defines the
special Kähler structure of the base: the complex structure ``I``, the fiber
modulus ``tau`` and the holomorphic coordinates ``(w, xi)``.

All evaluation routines accept points of shape ``(..., 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DegenerateHessian, DomainError, StepTooLarge
from .fiber import load_snapshot, save_snapshot


@dataclass(frozen=True)
class Rectangle:
    x1min: float
    x1max: float
    x2min: float
    x2max: float

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(np.all((x[..., 0] >= self.x1min - tol) & (x[..., 0] <= self.x1max + tol)
                           & (x[..., 1] >= self.x2min - tol) & (x[..., 1] <= self.x2max + tol)))

    def sample(self, rng, size):
        lo = np.array([self.x1min, self.x2min])
        hi = np.array([self.x1max, self.x2max])
        return lo + (hi - lo) * rng.random((size, 2))


class HessianPotential:
    """Interface for a convex potential with unit-determinant Hessian.

    Subclasses implement ``_eval``, ``_grad``, ``_hess`` and ``_third`` on
    arrays of shape ``(..., 2)``; the public methods add the domain check.
    """

    name = "potential"
    #: tolerance on |det(hess) - 1| used by tau_at
    ma_tol = 1e-8

    def __init__(self, domain: Rectangle):
        self.domain = domain

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2:
            raise DomainError(f"base points must have trailing dimension 2, got {x.shape}")
        if not self.domain.contains(x):
            raise DomainError(f"point(s) outside domain {self.domain}")
        return x

    def eval(self, x):
        return self._eval(self._check(x))

    def grad(self, x):
        return self._grad(self._check(x))

    def hess(self, x):
        return self._hess(self._check(x))

    def third(self, x):
        return self._third(self._check(x))

    def _eval(self, x):
        raise NotImplementedError

    def _grad(self, x):
        raise NotImplementedError

    def _hess(self, x):
        raise NotImplementedError

    def _third(self, x):
        raise NotImplementedError


class QuadraticPotential(HessianPotential):
    """``phi = a x1^2 / 2 + x2^2 / (2a)``; ``a = 1`` is the identity Hessian."""

    def __init__(self, a=1.0, domain=None):
        if a <= 0:
            raise ValueError("a must be positive")
        super().__init__(domain or Rectangle(-1.0, 1.0, -1.0, 1.0))
        self.a = float(a)
        self.name = "identity" if a == 1.0 else "diagonal"

    def _eval(self, x):
        return 0.5 * self.a * x[..., 0] ** 2 + 0.5 * x[..., 1] ** 2 / self.a

    def _grad(self, x):
        return np.stack([self.a * x[..., 0], x[..., 1] / self.a], axis=-1)

    def _hess(self, x):
        h = np.zeros(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = self.a
        h[..., 1, 1] = 1.0 / self.a
        return h

    def _third(self, x):
        return np.zeros(x.shape[:-1] + (2, 2, 2))


class ModulusPotential(HessianPotential):
    """Potential whose modulus is ``tau(w) = i + eps * w``.

    Integrating ``d xi / d w = tau`` with ``xi = i w + eps w^2 / 2`` and
    solving ``Re xi(x1 + i phi_2) = -x2`` gives the closed form

        phi = R^3 / (3 eps^2) - x2 / eps,   R = sqrt(1 + eps^2 x1^2 + 2 eps x2),

    so that ``tau = eps x1 + i R``.
    """

    name = "modulus"

    def __init__(self, eps=0.1, radius=0.5):
        if eps <= 0:
            raise ValueError("eps must be positive")
        # closed rectangle inscribed in the requested working disk
        r = float(radius)
        super().__init__(Rectangle(-r, r, -r, r))
        self.eps = float(eps)
        if 1 - 2 * eps * r <= 0:
            raise ValueError("radius too large for eps: R^2 would vanish")

    def _R(self, x):
        e = self.eps
        return np.sqrt(1 + e**2 * x[..., 0] ** 2 + 2 * e * x[..., 1])

    def _eval(self, x):
        e = self.eps
        R = self._R(x)
        return (R**3 - 1) / (3 * e**2) - x[..., 1] / e

    def _grad(self, x):
        e = self.eps
        R = self._R(x)
        return np.stack([x[..., 0] * R, (R - 1) / e], axis=-1)

    def _hess(self, x):
        e = self.eps
        x1 = x[..., 0]
        R = self._R(x)
        h = np.empty(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = R + e**2 * x1**2 / R
        h[..., 0, 1] = h[..., 1, 0] = e * x1 / R
        h[..., 1, 1] = 1 / R
        return h

    def _third(self, x):
        e = self.eps
        x1 = x[..., 0]
        R = self._R(x)
        R3 = R**3
        t = np.empty(x.shape[:-1] + (2, 2, 2))
        t111 = 3 * e**2 * x1 / R - e**4 * x1**3 / R3
        t112 = e / R - e**3 * x1**2 / R3
        t122 = -(e**2) * x1 / R3
        t222 = -e / R3
        for idx, val in {(0, 0, 0): t111, (0, 0, 1): t112, (0, 1, 1): t122, (1, 1, 1): t222}.items():
            for perm in {idx, (idx[0], idx[2], idx[1]), (idx[1], idx[0], idx[2]),
                         (idx[1], idx[2], idx[0]), (idx[2], idx[0], idx[1]), (idx[2], idx[1], idx[0])}:
                t[(...,) + perm] = val
        return t


class GridPotential(HessianPotential):
    """Potential sampled on a tensor grid, differentiated through a quintic spline."""

    name = "grid"
    ma_tol = 1e-5

    def __init__(self, x1, x2, values):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (x1.size, x2.size):
            raise ValueError("values must have shape (len(x1), len(x2))")
        super().__init__(Rectangle(x1[0], x1[-1], x2[0], x2[-1]))
        self._spline = RectBivariateSpline(x1, x2, values, kx=5, ky=5, s=0)

    @classmethod
    def from_potential(cls, phi: HessianPotential, n=129):
        d = phi.domain
        x1 = np.linspace(d.x1min, d.x1max, n)
        x2 = np.linspace(d.x2min, d.x2max, n)
        X = np.stack(np.meshgrid(x1, x2, indexing="ij"), axis=-1)
        return cls(x1, x2, phi.eval(X))

    def _ev(self, x, d1, d2):
        return self._spline.ev(x[..., 0], x[..., 1], dx=d1, dy=d2)

    def _eval(self, x):
        return self._ev(x, 0, 0)

    def _grad(self, x):
        return np.stack([self._ev(x, 1, 0), self._ev(x, 0, 1)], axis=-1)

    def _hess(self, x):
        h = np.empty(x.shape[:-1] + (2, 2))
        h[..., 0, 0] = self._ev(x, 2, 0)
        h[..., 0, 1] = h[..., 1, 0] = self._ev(x, 1, 1)
        h[..., 1, 1] = self._ev(x, 0, 2)
        return h

    def _third(self, x):
        t = np.empty(x.shape[:-1] + (2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    n1 = (i == 0) + (j == 0) + (k == 0)
                    t[..., i, j, k] = self._ev(x, n1, 3 - n1)
        return t


def make_potential(name, **params) -> HessianPotential:
    """Built-in potentials by name: ``identity``, ``diagonal``, ``modulus``, ``modulus_grid``.

    ``grid`` loads sampled values from a binary snapshot (``path=...``).
    """
    if name == "identity":
        return QuadraticPotential(1.0, _rect(params.get("domain")))
    if name == "diagonal":
        return QuadraticPotential(float(params.get("a", 2.0)), _rect(params.get("domain")))
    if name == "modulus":
        return ModulusPotential(float(params.get("eps", 0.1)), float(params.get("radius", 0.5)))
    if name == "modulus_grid":
        base = ModulusPotential(float(params.get("eps", 0.1)), float(params.get("radius", 0.5)))
        return GridPotential.from_potential(base, int(params.get("samples", 129)))
    if name == "grid":
        return load_grid_potential(params["path"])
    raise ValueError(f"unknown potential {name!r}")


def save_grid_potential(path, phi: GridPotential | HessianPotential, n=129):
    """Store potential samples as a one-field snapshot; the sidecar carries the domain."""
    d = phi.domain
    x1 = np.linspace(d.x1min, d.x1max, n)
    x2 = np.linspace(d.x2min, d.x2max, n)
    vals = phi.eval(np.stack(np.meshgrid(x1, x2, indexing="ij"), axis=-1))
    grid = SimpleNamespace(N=n, tau=complex(0, 1))
    meta = {"kind": "potential", "domain": [d.x1min, d.x1max, d.x2min, d.x2max]}
    return save_snapshot(path, [vals.reshape(n, n, 1, 1).astype(complex)], grid, meta)


def load_grid_potential(path) -> GridPotential:
    fields, meta = load_snapshot(path)
    if meta.get("kind") != "potential" or "domain" not in meta:
        raise ValueError(f"{path}: sidecar does not describe a potential grid")
    vals = fields[0][..., 0, 0].real
    a, b, c, d = meta["domain"]
    return GridPotential(np.linspace(a, b, vals.shape[0]), np.linspace(c, d, vals.shape[1]), vals)


def _rect(spec):
    if spec is None:
        return None
    return Rectangle(*map(float, spec))


def monge_ampere_residual(phi: HessianPotential, x):
    """Pointwise ``|det(hess) - 1|``."""
    return np.abs(np.linalg.det(phi.hess(x)) - 1.0)


def tau_at(phi: HessianPotential, b) -> complex:
    """Fiber modulus ``tau = (phi_12 + i) / phi_22`` at a base point."""
    b = np.asarray(b, dtype=float)
    h = phi.hess(b)
    if h[1, 1] <= 0:
        raise DegenerateHessian(f"phi_22 = {h[1, 1]} is not positive")
    det = h[0, 0] * h[1, 1] - h[0, 1] ** 2
    if abs(det - 1.0) > phi.ma_tol:
        raise DegenerateHessian(f"|det(hess) - 1| = {abs(det - 1):.3e} exceeds {phi.ma_tol}")
    return complex(h[0, 1], 1.0) / h[1, 1]


def tau_field(phi: HessianPotential, x):
    """Vectorized ``tau`` without the Monge-Ampère gate."""
    h = phi.hess(x)
    return (h[..., 0, 1] + 1j) / h[..., 1, 1]


def holomorphic_coords(phi: HessianPotential, b):
    """Return ``(w, xi) = (x1 + i phi_2, -x2 + i phi_1)``."""
    b = np.asarray(b, dtype=float)
    g = phi.grad(b)
    w = b[..., 0] + 1j * g[..., 1]
    xi = -b[..., 1] + 1j * g[..., 0]
    return w, xi


def dbar_w(phi: HessianPotential, f, x, h):
    """Central-difference ``d f / d wbar = (d_1 f - conj(tau) d_2 f) / 2`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    d1 = (f(x + e1) - f(x - e1)) / (2 * h)
    d2 = (f(x + e2) - f(x - e2)) / (2 * h)
    return 0.5 * (d1 - np.conj(tau_field(phi, x)) * d2)


def d_w(phi: HessianPotential, f, x, h):
    """Central-difference ``d f / d w = (d_1 f - tau d_2 f) / 2``."""
    x = np.asarray(x, dtype=float)
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    d1 = (f(x + e1) - f(x - e1)) / (2 * h)
    d2 = (f(x + e2) - f(x - e2)) / (2 * h)
    return 0.5 * (d1 - tau_field(phi, x) * d2)


def interior_grid(domain: Rectangle, h):
    """Grid points with spacing ``h`` whose 3-point stencils stay inside ``domain``."""
    a1 = np.arange(domain.x1min + h, domain.x1max - h * (1 - 1e-9), h)
    a2 = np.arange(domain.x2min + h, domain.x2max - h * (1 - 1e-9), h)
    if a1.size < 3 or a2.size < 3:
        raise StepTooLarge(f"step {h} leaves fewer than 3 interior points")
    return np.stack(np.meshgrid(a1, a2, indexing="ij"), axis=-1)


def cr_residual(phi: HessianPotential, f, h) -> float:
    """Max magnitude of the (0,1)-derivative of ``f`` over an interior ``h``-grid.

    ``f`` maps arrays of base points ``(..., 2)`` to complex arrays. The
    residual is O(h^2) for functions holomorphic with respect to ``I``.
    """
    x = interior_grid(phi.domain, h)
    return float(np.max(np.abs(dbar_w(phi, f, x, h))))
