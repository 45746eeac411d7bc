"""Semi-flat hyperkähler triple on the chart times torus model.

Everything is stored in the ordered basis ``(x1, x2, y1, y2)``. A 2-form is an
antisymmetric 4x4 matrix ``W`` with ``omega = sum_{a<b} W[a, b] e^a ^ e^b``; an
endomorphism ``X`` acts on column vectors; ``omega_X = X^T g`` encodes
``omega_X(u, v) = g(X u, v)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import HessianPotential, d_w, tau_at, tau_field, interior_grid
from .errors import NonpositiveScale

X1, X2, Y1, Y2 = range(4)


@dataclass(frozen=True)
class SemiFlatTriple:
    s: float
    omega_I: np.ndarray
    omega_J: np.ndarray
    omega_K: np.ndarray
    g: np.ndarray
    I: np.ndarray
    J: np.ndarray
    K: np.ndarray


@dataclass(frozen=True)
class DegenerationParams:
    t: float

    @property
    def s(self):
        return float(np.sqrt(self.t / (1.0 + self.t)))


def wedge_top(a, b):
    """Coefficient of ``e^1234`` in ``alpha ^ beta`` for 4x4 antisymmetric coefficient arrays.

    Works on stacked arrays ``(..., 4, 4)``; entries may be matrices if the
    caller arranges the product beforehand.
    """
    return (a[..., 0, 1] * b[..., 2, 3] - a[..., 0, 2] * b[..., 1, 3] + a[..., 0, 3] * b[..., 1, 2]
            + a[..., 2, 3] * b[..., 0, 1] - a[..., 1, 3] * b[..., 0, 2] + a[..., 1, 2] * b[..., 0, 3])


def two_form(entries):
    """Antisymmetric 4x4 matrix from ``{(a, b): value}`` with ``a < b``."""
    w = np.zeros((4, 4))
    for (a, b), v in entries.items():
        w[a, b] = v
        w[b, a] = -v
    return w


def complex_structure_I(hess):
    p11, p12, p22 = hess[0, 0], hess[0, 1], hess[1, 1]
    I = np.zeros((4, 4))
    # I(d/dx^k) = -phi_k2 d/dx^1 + phi_k1 d/dx^2 (column k)
    I[X1, X1], I[X2, X1] = -p12, p11
    I[X1, X2], I[X2, X2] = -p22, p12
    # I(d/dy^k) = phi_k2 d/dy^1 - phi_k1 d/dy^2
    I[Y1, Y1], I[Y2, Y1] = p12, -p11
    I[Y1, Y2], I[Y2, Y2] = p22, -p12
    return I


def triple_at(phi: HessianPotential, b, s) -> SemiFlatTriple:
    if not s > 0:
        raise NonpositiveScale(f"s must be positive, got {s}")
    h = phi.hess(np.asarray(b, dtype=float))
    # unimodular part: equal to h for exact solutions, and keeps the triple
    # algebraically hyperkahler when det h = 1 holds only to grid accuracy
    h = h / np.sqrt(np.linalg.det(h))
    g = np.zeros((4, 4))
    g[:2, :2] = h / s
    g[2:, 2:] = s * h
    I = complex_structure_I(h)
    J = np.zeros((4, 4))
    J[2:, :2] = np.eye(2) / s
    J[:2, 2:] = -s * np.eye(2)
    K = I @ J
    omega_I = two_form({(X1, X2): 1 / s, (Y1, Y2): -s})
    omega_J = np.zeros((4, 4))
    omega_J[:2, 2:] = h
    omega_J[2:, :2] = -h.T
    omega_K = two_form({(X1, Y2): -1.0, (X2, Y1): 1.0})
    return SemiFlatTriple(float(s), omega_I, omega_J, omega_K, g, I, J, K)


def hyperkahler_defects(tr: SemiFlatTriple):
    """Largest violations of the quaternion and compatibility identities."""
    eye = np.eye(4)
    quat = max(np.abs(tr.I @ tr.I + eye).max(), np.abs(tr.J @ tr.J + eye).max(),
               np.abs(tr.K @ tr.K + eye).max(), np.abs(tr.I @ tr.J - tr.K).max())
    compat = max(np.abs(X.T @ tr.g - w).max()
                 for X, w in ((tr.I, tr.omega_I), (tr.J, tr.omega_J), (tr.K, tr.omega_K)))
    return {"quaternion": float(quat), "compatibility": float(compat)}


def closedness_residual(phi: HessianPotential, s, h) -> float:
    """Max coefficient of the discrete exterior derivative of the three Kähler forms.

    Coefficients do not depend on ``y``, so only ``d/dx^1, d/dx^2`` enter:
    ``(d omega)_{x1 x2 c} = d_1 omega_{2c} - d_2 omega_{1c}``.
    """
    if not s > 0:
        raise NonpositiveScale(f"s must be positive, got {s}")
    x = interior_grid(phi.domain, h)
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])

    def coeffs(pts):
        hs = phi.hess(pts)
        n = pts.shape[:-1]
        om_I = np.broadcast_to(two_form({(X1, X2): 1 / s, (Y1, Y2): -s}), n + (4, 4))
        om_J = np.zeros(n + (4, 4))
        om_J[..., :2, 2:] = hs
        om_J[..., 2:, :2] = -np.swapaxes(hs, -1, -2)
        om_K = np.broadcast_to(two_form({(X1, Y2): -1.0, (X2, Y1): 1.0}), n + (4, 4))
        return om_I, om_J, om_K

    plus1, minus1 = coeffs(x + e1), coeffs(x - e1)
    plus2, minus2 = coeffs(x + e2), coeffs(x - e2)
    worst = 0.0
    for k in range(3):
        d1 = (plus1[k] - minus1[k]) / (2 * h)
        d2 = (plus2[k] - minus2[k]) / (2 * h)
        # x^1 ^ x^2 ^ e^c with c in (y1, y2): d_1 W[x2, c] - d_2 W[x1, c]
        dw = d1[..., X2, 2:] - d2[..., X1, 2:]
        worst = max(worst, float(np.max(np.abs(dw))))
    return worst


def degeneration_form(phi: HessianPotential, b, params: DegenerationParams) -> np.ndarray:
    """``(1 + t) s omega_{I,s}`` for ``s^2 = t / (1 + t)``."""
    t = params.t
    tr = triple_at(phi, b, params.s)
    return (1 + t) * params.s * tr.omega_I


def base_form():
    return two_form({(X1, X2): 1.0})


def semiflat_form():
    """``omega_SF = omega_{I,1}``."""
    return two_form({(X1, X2): 1.0, (Y1, Y2): -1.0})


def dtau_dw(phi: HessianPotential, b, h=1e-4) -> complex:
    """``d tau / d w`` by central differences; ``tau`` is holomorphic so ``(d_1 - tau d_2)/2`` suffices."""
    b = np.asarray(b, dtype=float)
    return complex(d_w(phi, lambda x: tau_field(phi, x), b, h))


def dz_frame(phi: HessianPotential, b, y1, h=1e-4) -> np.ndarray:
    """Coefficients of ``dz = dy2 + tau dy1 + y1 (d tau/d w) dw`` in ``(dx1, dx2, dy1, dy2)``.

    ``dw = (1 + i phi_12) dx1 + i phi_22 dx2``.
    """
    b = np.asarray(b, dtype=float)
    tau = tau_at(phi, b)
    hs = phi.hess(b)
    tw = dtau_dw(phi, b, h)
    dw = np.array([1 + 1j * hs[0, 1], 1j * hs[1, 1]])
    out = np.zeros(4, dtype=complex)
    out[:2] = y1 * tw * dw
    out[Y1] = tau
    out[Y2] = 1.0
    return out
