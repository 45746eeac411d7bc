"""Flat reference connections built from spectral data.

A point ``q`` of the fiber ``C / (Z + tau Z)`` is recorded through a lift
``q~ = theta1 - tau theta2`` with real ``theta1, theta2``. The rank-n data
``q~_1, ..., q~_n`` (summing to zero) define the constant diagonal connection

    A0 = d + 2 pi i (Theta1 dy1 + Theta2 dy2),   Theta_k = diag(theta_k).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .base import HessianPotential, holomorphic_coords, tau_at
from .errors import NonDistinctPoints, NonIntegerShift, SectionNotDifferentiable
from .fiber import FiberGrid, d1, d2, dagger
from .semiflat import X1, X2, Y1, Y2, triple_at, wedge_top

GAP_TOL = 1e-8


def split_lift(q, tau):
    """Solve ``q = theta1 - tau theta2`` for real ``(theta1, theta2)``."""
    q = np.asarray(q, dtype=complex)
    tau = complex(tau)
    theta2 = -q.imag / tau.imag
    theta1 = q.real + tau.real * theta2
    return theta1, theta2


def join_lift(theta1, theta2, tau):
    return np.asarray(theta1, dtype=float) - complex(tau) * np.asarray(theta2, dtype=float)


def canonical_lifts(q, tau):
    """Fundamental-domain lifts whose sum is exactly zero.

    Each ``(theta1, theta2)`` is reduced into ``[-1/2, 1/2)``; the integer
    excess of the sums is then removed from the last entry.
    """
    t1, t2 = split_lift(q, tau)
    t1 = t1 - np.floor(t1 + 0.5)
    t2 = t2 - np.floor(t2 + 0.5)
    e1, e2 = np.round(t1.sum()), np.round(t2.sum())
    if abs(t1.sum() - e1) > 1e-9 or abs(t2.sum() - e2) > 1e-9:
        raise ValueError("points do not sum to zero in the fiber")
    t1[-1] -= e1
    t2[-1] -= e2
    return join_lift(t1, t2, tau)


@dataclass
class SpectralData:
    """Lifts ``q~_i`` at the working base point plus optional base dependence.

    ``section`` maps a base point ``(2,)`` to the lift vector; ``None`` means
    constant. A raw array or dict stands for an uninterpolated point set.
    """

    lifts: np.ndarray
    tau: complex
    section: Optional[Callable] = None

    def __post_init__(self):
        self.lifts = np.atleast_1d(np.asarray(self.lifts, dtype=complex))
        self.tau = complex(self.tau)

    @property
    def n(self):
        return self.lifts.size

    @property
    def theta(self):
        return split_lift(self.lifts, self.tau)

    @classmethod
    def from_theta(cls, theta1, theta2, tau, section=None):
        return cls(join_lift(theta1, theta2, tau), tau, section)

    def min_gap(self):
        """Smallest lattice distance between two distinct indices (``inf`` for n = 1)."""
        if self.n < 2:
            return np.inf
        t1, t2 = split_lift(lift_differences(self.lifts), self.tau)
        t1 = t1 - np.round(t1)
        t2 = t2 - np.round(t2)
        dist = np.abs(join_lift(t1, t2, self.tau))
        off = ~np.eye(self.n, dtype=bool)
        return float(dist[off].min())

    def trace_defect(self):
        return float(abs(self.lifts.sum()))


def lift_differences(q):
    q = np.asarray(q, dtype=complex)
    return q[:, None] - q[None, :]


def linear_section(phi: HessianPotential, q0, c, b0=None):
    """Holomorphic section ``q~(w) = q0 + c (w(x) - w(b0))`` in the chart coordinate ``w``."""
    q0 = np.asarray(q0, dtype=complex)
    c = np.broadcast_to(np.asarray(c, dtype=complex), q0.shape)
    w0 = 0.0 if b0 is None else holomorphic_coords(phi, b0)[0]

    def section(x):
        w, _ = holomorphic_coords(phi, np.asarray(x, dtype=float))
        return q0 + c * (w - w0)

    return section


@dataclass
class FiberConnection:
    """Anti-Hermitian components ``a = a1 dy1 + a2 dy2`` on a fiber grid."""

    a1: np.ndarray
    a2: np.ndarray
    grid: FiberGrid

    @property
    def n(self):
        return self.a1.shape[-1]

    @property
    def alpha(self):
        """dzbar-coefficient of the (0,1) part: ``i (a1 - tau a2) / (2 Im tau)``."""
        t = self.grid.tau
        return 1j * (self.a1 - t * self.a2) / (2 * t.imag)

    @property
    def beta(self):
        """dz-coefficient of the (1,0) part; equals ``-alpha^*`` for unitary connections."""
        t = self.grid.tau
        return -1j * (self.a1 - np.conj(t) * self.a2) / (2 * t.imag)

    @classmethod
    def from_complex(cls, alpha, beta, grid):
        t = grid.tau
        return cls(t * beta + np.conj(t) * alpha, beta + alpha, grid)

    def __sub__(self, other):
        return (self.a1 - other.a1, self.a2 - other.a2)

    def unitarity_defect(self):
        return float(max(np.abs(self.a1 + dagger(self.a1)).max(), np.abs(self.a2 + dagger(self.a2)).max()))

    def trace_defect(self):
        return float(max(np.abs(np.trace(self.a1, axis1=-2, axis2=-1)).max(),
                         np.abs(np.trace(self.a2, axis1=-2, axis2=-1)).max()))


def reference_connection(sd: SpectralData, grid: FiberGrid, allow_degenerate=False) -> FiberConnection:
    if abs(sd.tau - grid.tau) > 1e-12:
        raise ValueError(f"spectral data tau {sd.tau} differs from grid tau {grid.tau}")
    # rank one is a U(1) line bundle: no trace condition
    if sd.n > 1 and sd.trace_defect() > 1e-12:
        raise ValueError(f"lifts must sum to zero, sum = {sd.lifts.sum()}")
    if not allow_degenerate and sd.min_gap() <= GAP_TOL:
        raise NonDistinctPoints(f"lifts are not distinct modulo the lattice (gap {sd.min_gap():.2e})")
    t1, t2 = sd.theta
    shape = (grid.N, grid.N, sd.n, sd.n)
    a1 = np.broadcast_to(np.diag(2j * np.pi * t1), shape).copy()
    a2 = np.broadcast_to(np.diag(2j * np.pi * t2), shape).copy()
    return FiberConnection(a1, a2, grid)


def _cycle_samples(conn: FiberConnection, cycle):
    if cycle in ("y1", 1):
        return conn.a1[:, 0]
    if cycle in ("y2", 2):
        return conn.a2[0, :]
    raise ValueError(f"cycle must be 'y1' or 'y2', got {cycle!r}")


def _trig_interp(samples, t):
    """Evaluate the trigonometric interpolant of periodic ``samples`` (axis 0) at ``t``."""
    N = samples.shape[0]
    c = np.fft.fft(samples, axis=0) / N
    k = np.fft.fftfreq(N, 1.0 / N)
    # split the Nyquist mode symmetrically so real data stay real
    c = c.copy()
    c[N // 2] *= 0.5
    basis = np.exp(2j * np.pi * np.outer(t, k))
    out = np.tensordot(basis, c, axes=(1, 0))
    out += np.tensordot(np.exp(-1j * np.pi * N * t), c[N // 2], axes=0)
    return out


def holonomy(conn: FiberConnection, cycle="y1", steps=256):
    """Path-ordered exponential of ``Phi' = Phi a`` around a cycle through the origin.

    Fourth-order Magnus on ``steps`` intervals with Gauss-Legendre nodes;
    exact for constant connections.
    """
    samples = _cycle_samples(conn, cycle)
    h = 1.0 / steps
    left = np.arange(steps) * h
    c1, c2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    A1 = _trig_interp(samples, left + c1 * h)
    A2 = _trig_interp(samples, left + c2 * h)
    phi = np.eye(conn.n, dtype=complex)
    k = np.sqrt(3) / 12 * h * h
    for p, q in zip(A1, A2):
        omega = 0.5 * h * (p + q) + k * (p @ q - q @ p)
        phi = phi @ expm(omega)
    return phi


def theta_from_holonomy(conn: FiberConnection, steps=256):
    """Recover ``(theta1, theta2)`` mod 1 from commuting holonomies.

    The y1-holonomy is diagonalized; the y2-holonomy is read off in that
    eigenbasis. Returns values in ``[-1/2, 1/2)``.
    """
    h1 = holonomy(conn, "y1", steps)
    h2 = holonomy(conn, "y2", steps)
    ev, V = np.linalg.eig(h1)
    d2_ = np.diag(np.linalg.solve(V, h2 @ V))
    t1 = np.angle(ev) / (2 * np.pi)
    t2 = np.angle(d2_) / (2 * np.pi)
    wrap = lambda t: t - np.floor(t + 0.5)  # noqa: E731
    return wrap(t1), wrap(t2)


def lift_equivalence_gauge(sd: SpectralData, shifts, grid: FiberGrid):
    """Unitary ``u = diag(exp(2 pi i (alpha_i y1 + beta_i y2)))``.

    Pulling back ``A0(sd)`` by ``u`` yields the reference connection of the
    data with ``theta`` shifted by ``(alpha, beta)``.
    """
    shifts = np.asarray(shifts, dtype=float).reshape(sd.n, 2)
    if np.any(np.abs(shifts - np.round(shifts)) > 0):
        raise NonIntegerShift(f"shifts must be integers, got {shifts.tolist()}")
    y1, y2 = grid.coords
    phase = np.exp(2j * np.pi * (shifts[:, 0] * y1[..., None] + shifts[:, 1] * y2[..., None]))
    u = np.zeros((grid.N, grid.N, sd.n, sd.n), dtype=complex)
    idx = np.arange(sd.n)
    u[..., idx, idx] = phase
    return u


def shifted(sd: SpectralData, shifts) -> SpectralData:
    shifts = np.asarray(shifts, dtype=float).reshape(sd.n, 2)
    t1, t2 = sd.theta
    return SpectralData.from_theta(t1 + shifts[:, 0], t2 + shifts[:, 1], sd.tau, sd.section)


def unitary_pullback(u, conn: FiberConnection) -> FiberConnection:
    """``u^* A = u^{-1} a u + u^{-1} du`` for a unitary field ``u``."""
    ui = dagger(u)
    g = conn.grid
    return FiberConnection(ui @ conn.a1 @ u + ui @ d1(u, g), ui @ conn.a2 @ u + ui @ d2(u, g), g)


def theta_jacobian(phi: HessianPotential, section, b, h=1e-4):
    """``Theta_ij = d theta_j / d x^i`` per eigenvalue, shape ``(n, 2, 2)``, by central differences."""
    if section is None:
        return None
    if not callable(section):
        raise SectionNotDifferentiable("base dependence is a raw point set; supply an interpolating callable")
    b = np.asarray(b, dtype=float)

    def thetas(x):
        return np.stack(split_lift(section(x), tau_at(phi, x)), axis=-1)  # (n, 2)

    jac = []
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        jac.append((thetas(b + e) - thetas(b - e)) / (2 * h))
    return np.stack(jac, axis=1)  # (n, i, j)


def hym_residual_triple(phi: HessianPotential, b, sd: SpectralData, s, h=1e-4):
    """Top-form coefficients of ``F ^ omega_I``, ``F ^ omega_J``, ``F ^ omega_K`` at ``b``.

    ``F = 2 pi i Theta_ij dx^i ^ dy^j`` on each eigenline; the returned values
    are Euclidean norms over the ``n`` eigenlines.
    """
    tr = triple_at(phi, b, s)
    jac = theta_jacobian(phi, sd.section, b, h)
    if jac is None:
        return 0.0, 0.0, 0.0
    out = []
    for om in (tr.omega_I, tr.omega_J, tr.omega_K):
        vals = []
        for th in jac:
            F = np.zeros((4, 4), dtype=complex)
            for i, xi in enumerate((X1, X2)):
                for j, yj in enumerate((Y1, Y2)):
                    F[xi, yj] = 2j * np.pi * th[i, j]
                    F[yj, xi] = -F[xi, yj]
            vals.append(wedge_top(F, om))
        out.append(float(np.linalg.norm(vals)))
    return tuple(out)


def mode_symbol(grid: FiberGrid, lifts, m, k):
    """Symbol of the coupled dbar on entry ``(j, k)`` and mode ``(m, k)``: ``pi (tau k - m - q~_jk) / Im tau``."""
    return np.pi * (grid.tau * k - m - lift_differences(lifts)) / grid.tau.imag


__all__ = [
    "SpectralData", "FiberConnection", "split_lift", "join_lift", "canonical_lifts", "linear_section",
    "reference_connection", "holonomy", "theta_from_holonomy", "lift_equivalence_gauge", "shifted",
    "unitary_pullback", "theta_jacobian", "hym_residual_triple", "mode_symbol",
]
