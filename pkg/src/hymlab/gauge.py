"""Complexified gauge action, curvature and the scalar curvature identity.

Orientation convention: the complex orientation of the fiber is
``(i/2) dz ^ dzbar = -Im(tau) dy1 ^ dy2``, i.e. ``-dy1 ^ dy2`` for the unit
area form. Hence the contraction with ``omega0`` is ``i Lambda F = -i F12``,
where ``F = F12 dy1 ^ dy2``.

With ``alpha, beta`` the dzbar and dz coefficients of a connection, the
action of an invertible field ``sigma`` is

    alpha' = sigma alpha sigma^-1 - (dzbar sigma) sigma^-1,
    beta'  = sigma*^-1 beta sigma* + sigma*^-1 dz sigma*.

For unitary ``u`` this is the pullback by ``u^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, NotFlat
from .fiber import FiberGrid, apply_symbol, d1, d2, dagger, l2_norm
from .spectral import FiberConnection

COND_GUARD = 1e8
TAYLOR_CUTOFF = 1e-6


@dataclass
class CurvatureField:
    F: np.ndarray    # dy1 ^ dy2 coefficient
    lam: np.ndarray  # i Lambda F, Hermitian for unitary connections


def curvature(A: FiberConnection) -> CurvatureField:
    g = A.grid
    F = d1(A.a2, g) - d2(A.a1, g) + A.a1 @ A.a2 - A.a2 @ A.a1
    return CurvatureField(F, -1j * F)


def ym_energy(A: FiberConnection) -> float:
    """``int |F|^2`` in the flat unit-area metric."""
    return l2_norm(curvature(A).F, A.grid) ** 2


def fiber_degree(A: FiberConnection) -> float:
    """``(i / 2 pi) int tr F``: an integer for a unitary connection on a closed fiber."""
    F = curvature(A).F
    return float(np.real(1j / (2 * np.pi) * np.mean(np.trace(F, axis1=-2, axis2=-1))))


# --- Hermitian functional calculus ------------------------------------------

def herm_eig(s):
    return np.linalg.eigh(s)


def herm_fun(s, f):
    w, V = np.linalg.eigh(s)
    return V @ (f(w)[..., None] * dagger(V))


def expm_herm(s):
    return herm_fun(s, np.exp)


def logm_posdef(P):
    return herm_fun(0.5 * (P + dagger(P)), np.log)


def _phi1(x):
    """``(e^x - 1) / x`` with a Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 + x / 2 + x * x / 6, np.expm1(safe) / safe)


def upsilon(s, Y):
    """``Upsilon(s) Y = ((e^{ad_s} - 1) / ad_s) Y`` via the eigenbasis of Hermitian ``s``."""
    w, V = np.linalg.eigh(s)
    Yt = dagger(V) @ Y @ V
    gaps = w[..., :, None] - w[..., None, :]
    return V @ (_phi1(gaps) * Yt) @ dagger(V)


# --- coupled derivatives on endomorphisms --------------------------------------

def dbar_A(A: FiberConnection, f):
    """dzbar coefficient of ``dbar_A f = dbar f + [alpha, f]``."""
    al = A.alpha
    return apply_symbol(f, A.grid.dzbar_symbol) + al @ f - f @ al


def d_A(A: FiberConnection, f):
    be = A.beta
    return apply_symbol(f, A.grid.dz_symbol) + be @ f - f @ be


# --- gauge actions -------------------------------------------------------------

def _checked_inverse(sigma):
    cond = np.linalg.cond(sigma)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > COND_GUARD:
        raise IllConditioned(f"pointwise condition number {worst:.3e} exceeds {COND_GUARD:.0e}")
    return np.linalg.inv(sigma)


def apply_complex_gauge(sigma, A: FiberConnection) -> FiberConnection:
    """``sigma_dagger A`` for an invertible matrix field ``sigma`` of shape ``(N, N, n, n)``."""
    g = A.grid
    sigma = np.broadcast_to(sigma, A.a1.shape)
    si = _checked_inverse(sigma)
    sh = dagger(sigma)
    shi = dagger(si)
    alpha = sigma @ A.alpha @ si - apply_symbol(sigma, g.dzbar_symbol) @ si
    beta = shi @ A.beta @ sh + shi @ apply_symbol(sh, g.dz_symbol)
    return FiberConnection.from_complex(alpha, beta, g)


def apply_hermitian_gauge(s, A0: FiberConnection) -> FiberConnection:
    """``e^s_dagger A0 = A0 + Upsilon(-s) d_A0 s - Upsilon(s) dbar_A0 s`` for Hermitian ``s``."""
    alpha = A0.alpha - upsilon(s, dbar_A(A0, s))
    beta = A0.beta + upsilon(-s, d_A(A0, s))
    return FiberConnection.from_complex(alpha, beta, A0.grid)


def linearization(s, A0: FiberConnection) -> FiberConnection:
    """``L(s) = d_A0 s - dbar_A0 s`` as real components ``(a1, a2)`` packed in a FiberConnection."""
    return FiberConnection.from_complex(-dbar_A(A0, s), d_A(A0, s), A0.grid)


def connection_difference(A: FiberConnection, B: FiberConnection):
    return (A.a1 - B.a1, A.a2 - B.a2)


def connection_distance(A: FiberConnection, B: FiberConnection) -> float:
    return l2_norm(connection_difference(A, B), A.grid)


def hermitian_part_of_gauge(sigma):
    """``h = log(sigma^* sigma) / 2``: the Hermitian representative of the orbit point ``sigma_dagger A``.

    ``sigma = u e^h`` with unitary ``u``; ``sigma_dagger A`` and
    ``(e^h)_dagger A`` differ by the unitary ``u``.
    """
    return 0.5 * logm_posdef(dagger(sigma) @ sigma)


# --- curvature identity ------------------------------------------------------------

def curvature_identity_sides(s, A: FiberConnection):
    """Both sides of ``-Delta Tr P + |e^{-s} d_A P|^2 = Tr(P i Lambda F')`` with ``P = e^{2s}``.

    ``Delta = 2 Im(tau) d_z d_zbar`` is the Kähler Laplacian of the unit
    area flat metric, ``|X|^2 = 2 Im(tau) |X_z|^2`` for a (1,0)-form with
    dz-coefficient ``X_z``, and ``F'`` is the curvature of ``e^s_dagger A``.
    """
    g: FiberGrid = A.grid
    T = g.tau.imag
    P = expm_herm(2 * s)
    em = expm_herm(-s)
    trP = np.trace(P, axis1=-2, axis2=-1)
    lap = 2 * T * apply_symbol(apply_symbol(trP, g.dz_symbol), g.dzbar_symbol)
    grad = em @ d_A(A, P)
    lhs = -lap + 2 * T * np.sum(np.abs(grad) ** 2, axis=(-2, -1))
    Fp = curvature(apply_hermitian_gauge(s, A))
    rhs = np.trace(P @ Fp.lam, axis1=-2, axis2=-1)
    return lhs, rhs


def curvature_identity_residual(s, A: FiberConnection, flat_tol=1e-8) -> float:
    F = curvature(A).F
    if l2_norm(F, A.grid) > flat_tol:
        raise NotFlat(f"||F_A|| = {l2_norm(F, A.grid):.3e} exceeds {flat_tol}")
    lhs, rhs = curvature_identity_sides(s, A)
    return float(np.max(np.abs(lhs - rhs)))
