"""Kempf-Ness and Yang-Mills heat flows on the fiber.

Both flows are integrated with an integrating-factor (Lawson) RK4 scheme on
``b = a - a0``, where ``a0`` is the constant diagonal background. About ``a0``
the linearized flow is, per Fourier mode and matrix entry, the rank-one map

    b -> -(1/T) w (v . b),   v = (-k2, k1),

with ``k_l = 2 pi (mode_l + theta_l,j - theta_l,k)``. Its exponential is
available in closed form, so the stiff diffusive part is propagated exactly
and the step size is limited only by the nonlinearity.

Kempf-Ness: ``g' g^-1 = H`` with ``H = -i Lambda F = i F12``; the induced
connection moves by ``alpha' = -dbar_A H``, ``beta' = d_A H``.
Yang-Mills heat flow in ``g0``: ``a1' = -nabla_2 F12``, ``a2' = nabla_1 F12``.
The two coincide for ``tau = i``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EnergyIncrease, MaxStepsExceeded
from .fiber import FiberGrid, c0_norm, d1, d2, dagger, fft, ifft, l2_norm, l21_norm
from .gauge import (apply_complex_gauge, apply_hermitian_gauge, curvature, d_A, dbar_A,
                    hermitian_part_of_gauge)
from .spectral import FiberConnection

CSV_COLUMNS = ("step", "time", "dt", "ym_energy", "hym_residual", "dist_l2", "dist_l21", "c0_s")


@dataclass
class FlowOptions:
    tol: float = 1e-8
    max_steps: int = 20000
    t_max: float = 1e4
    t_end: float | None = None   # planned stop time; reaching it is not an error
    dt0: float | None = None
    dt_max: float = 0.25
    dt_min: float = 1e-12
    growth: float = 1.5
    record_every: int = 1
    check_every: int = 50
    fixed_dt: float | None = None
    track_gauge: bool = True
    gauge_fix: bool = True      # add the unitary generator that diagonalizes the linear part
    scheme: str = "etdrk4"      # or "lawson"
    rtol: float | None = 1e-7   # local error tolerance for step doubling; None keeps energy control only


@dataclass
class FlowRecord:
    step: int
    time: float
    dt: float
    ym_energy: float
    hym_residual: float
    dist_l2: float
    dist_l21: float
    c0_s: float


@dataclass
class FlowResult:
    A: FiberConnection
    X: np.ndarray | None
    g: np.ndarray | None
    records: list = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    time: float = 0.0
    rejected: int = 0
    consistency: list = field(default_factory=list)

    @property
    def energies(self):
        return np.array([r.ym_energy for r in self.records])

    def write_csv(self, path):
        write_trajectory_csv(self.records, path)


def write_trajectory_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r.step, repr(r.time), repr(r.dt)] + [repr(getattr(r, c)) for c in CSV_COLUMNS[3:]])


# --- linear part ----------------------------------------------------------------------

class _LinearPart:
    """Linearization about the constant diagonal background.

    With ``gauge_fix`` a unitary gauge generator ``xi = i (p . b)`` (Fourier
    multiplier) is added so that the linear part becomes the scalar
    ``-mu = -|k1 - tau k2|^2 / T`` on every mode; without it the linear part
    is the rank-one map ``-(1/T) w v^T``.
    """

    def __init__(self, grid: FiberGrid, theta1, theta2, kind, gauge_fix=True):
        s1, s2 = grid.ik
        d1_ = np.subtract.outer(theta1, theta1)
        d2_ = np.subtract.outer(theta2, theta2)
        k1 = np.real(s1 / 1j)[..., None, None] + 2 * np.pi * d1_
        k2 = np.real(s2 / 1j)[..., None, None] + 2 * np.pi * d2_
        self.v = (-k2, k1)
        tau = grid.tau
        if kind == "kn":
            T = tau.imag
            self.w = ((tau.real * k1 - abs(tau) ** 2 * k2) / T, (k1 - tau.real * k2) / T)
        elif kind == "ym":
            self.w = self.v
        else:
            raise ValueError(kind)
        self.vw = self.v[0] * self.w[0] + self.v[1] * self.w[1]
        self.lam = -self.vw
        self.gauge_fix = gauge_fix
        kk = k1 * k1 + k2 * k2
        ok = kk > 1e-14
        wk = self.w[0] * k1 + self.w[1] * k2
        mu = self.vw
        inv = np.where(ok, 1.0 / np.where(ok, kk, 1.0), 0.0)
        # p . k = -mu and p . v = w . k make  -w v^T + k p^T = -mu Id
        self.p = (inv * (-mu * k1 + wk * self.v[0]), inv * (-mu * k2 + wk * self.v[1]))

    def xi_hat(self, b):
        return 1j * (self.p[0] * b[0] + self.p[1] * b[1])

    def apply(self, b):
        if self.gauge_fix:
            return (-self.vw * b[0], -self.vw * b[1])
        p = self.v[0] * b[0] + self.v[1] * b[1]
        return (-self.w[0] * p, -self.w[1] * p)

    def expo(self, t, b):
        if self.gauge_fix:
            e = np.exp(self.lam * t)
            return (e * b[0], e * b[1])
        ok = np.abs(self.vw) > 1e-14
        c = np.where(ok, np.expm1(self.lam * t) / np.where(ok, self.vw, 1.0), 0.0)
        p = c * (self.v[0] * b[0] + self.v[1] * b[1])
        return (b[0] + self.w[0] * p, b[1] + self.w[1] * p)


def _etd_coefficients(lam, h, points=32):
    """Cox-Matthews ETDRK4 weights for the scalar symbol ``lam``, by contour averaging."""
    r = np.exp(1j * np.pi * (np.arange(1, points + 1) - 0.5) / points)
    z = h * lam[..., None] + r
    ez = np.exp(z)
    mean = lambda f: np.real(np.mean(f, axis=-1))  # noqa: E731
    q = h * mean((np.exp(z / 2) - 1) / z)
    f1 = h * mean((-4 - z + ez * (4 - 3 * z + z * z)) / z**3)
    f2 = h * mean((2 + z + ez * (z - 2)) / z**3)
    f3 = h * mean((-4 - 3 * z - z * z + ez * (4 - z)) / z**3)
    return np.exp(lam * h), np.exp(lam * h / 2), q, f1, f2, f3


def _background(A: FiberConnection):
    a1 = A.a1.mean(axis=(0, 1))
    a2 = A.a2.mean(axis=(0, 1))
    t1 = np.real(np.diag(a1) / (2j * np.pi))
    t2 = np.real(np.diag(a2) / (2j * np.pi))
    shape = A.a1.shape
    b1 = np.broadcast_to(np.diag(2j * np.pi * t1), shape)
    b2 = np.broadcast_to(np.diag(2j * np.pi * t2), shape)
    return t1, t2, b1, b2


# --- right-hand sides -----------------------------------------------------------------

def kn_velocity(A: FiberConnection):
    """``(a1', a2', H)`` for the Kempf-Ness flow, ``H = i F12``."""
    H = 1j * curvature(A).F
    H = 0.5 * (H + dagger(H))
    v = FiberConnection.from_complex(-dbar_A(A, H), d_A(A, H), A.grid)
    return v.a1, v.a2, H


def ym_velocity(A: FiberConnection):
    g = A.grid
    F = curvature(A).F
    n1 = d1(F, g) + A.a1 @ F - F @ A.a1
    n2 = d2(F, g) + A.a2 @ F - F @ A.a2
    return -n2, n1, 1j * F


# --- integrator -------------------------------------------------------------------------

def _diagnostics(A, X, g_init, A0, step, t, dt):
    grid = A.grid
    F = curvature(A).F
    res = l2_norm(F, grid)
    rec = FlowRecord(step, t, dt, res * res, res, np.nan, np.nan, np.nan)
    if A0 is None:
        return rec
    if X is not None and g_init is not None:
        h = hermitian_part_of_gauge(X @ g_init)
        rep = apply_hermitian_gauge(h, A0)
        rec.c0_s = c0_norm(h)
    else:
        rep = A
    diff = (rep.a1 - A0.a1, rep.a2 - A0.a2)
    rec.dist_l2 = l2_norm(diff, grid)
    rec.dist_l21 = l21_norm(diff, A0)
    return rec


def _lawson_step(stage, lin, bh, h):
    k1, H1 = stage(bh)
    half = lambda z: lin.expo(h / 2, z)  # noqa: E731
    k2, H2 = stage(half((bh[0] + h / 2 * k1[0], bh[1] + h / 2 * k1[1])))
    eb = half(bh)
    k3, H3 = stage((eb[0] + h / 2 * k2[0], eb[1] + h / 2 * k2[1]))
    full_b = lin.expo(h, bh)
    ek3 = half(k3)
    k4, H4 = stage((full_b[0] + h * ek3[0], full_b[1] + h * ek3[1]))
    ek1 = lin.expo(h, k1)
    ek23 = half((k2[0] + k3[0], k2[1] + k3[1]))
    new = tuple(full_b[i] + h / 6 * (ek1[i] + 2 * ek23[i] + k4[i]) for i in range(2))
    return new, (H1, H2, H3, H4)


def _etdrk4_step(stage, u, c):
    E, E2, q, f1, f2, f3 = c
    Nu, H1 = stage(u)
    a = tuple(E2 * u[i] + q * Nu[i] for i in range(2))
    Na, H2 = stage(a)
    b = tuple(E2 * u[i] + q * Na[i] for i in range(2))
    Nb, H3 = stage(b)
    cc = tuple(E2 * a[i] + q * (2 * Nb[i] - Nu[i]) for i in range(2))
    Nc, H4 = stage(cc)
    new = tuple(E * u[i] + f1 * Nu[i] + 2 * f2 * (Na[i] + Nb[i]) + f3 * Nc[i] for i in range(2))
    return new, (H1, H2, H3, H4)


def _gauge_step(X, Hs, h):
    """Classical RK4 for ``X' = H(t) X`` with stage generators ``Hs``."""
    H1, H2, H3, H4 = Hs
    X2 = X + h / 2 * H1 @ X
    X3 = X + h / 2 * H2 @ X2
    X4 = X + h * H3 @ X3
    return X + h / 6 * (H1 @ X + 2 * H2 @ X2 + 2 * H3 @ X3 + H4 @ X4)


def _relative_change(u, v, grid):
    num = np.sqrt(sum(np.sum(np.abs(u[i] - v[i]) ** 2) for i in range(2)))
    den = np.sqrt(sum(np.sum(np.abs(v[i]) ** 2) for i in range(2)))
    return float(num / max(den, grid.N**2 * 1e-3))


def _flow(A_init: FiberConnection, kind, opts: FlowOptions, A0=None, g_init=None):
    opts = opts or FlowOptions()
    grid = A_init.grid
    velocity = kn_velocity if kind == "kn" else ym_velocity
    bg = A0 if A0 is not None else A_init
    t1, t2, a01, a02 = _background(bg)
    lin = _LinearPart(grid, t1, t2, kind, opts.gauge_fix)
    track = opts.track_gauge and kind == "kn"
    n = A_init.n
    X = np.broadcast_to(np.eye(n, dtype=complex), A_init.a1.shape).copy() if track else None

    def conn(b):
        return FiberConnection(a01 + b[0], a02 + b[1], grid)

    def stage(bh):
        """Nonlinear remainder in Fourier space and H in position space for state ``bh``."""
        b = (ifft(bh[0]), ifft(bh[1]))
        A = conn(b)
        v1, v2, H = velocity(A)
        if lin.gauge_fix:
            xi = ifft(lin.xi_hat(bh))
            xi = 0.5 * (xi - dagger(xi))
            v1 = v1 - (d1(xi, grid) + A.a1 @ xi - xi @ A.a1)
            v2 = v2 - (d2(xi, grid) + A.a2 @ xi - xi @ A.a2)
            H = H + xi
        v1, v2 = grid.filter(v1), grid.filter(v2)
        L = lin.apply(bh)
        return (fft(v1) - L[0], fft(v2) - L[1]), H

    b = (A_init.a1 - a01, A_init.a2 - a02)
    bh = (fft(b[0]), fft(b[1]))
    A = conn(b)
    t = 0.0
    F0 = curvature(A)
    energy = l2_norm(F0.F, grid) ** 2
    result = FlowResult(A, X, None)
    result.records.append(_diagnostics(A, X, g_init, A0, 0, t, 0.0))
    if opts.fixed_dt is not None:
        dt = opts.fixed_dt
    elif opts.dt0 is not None:
        dt = opts.dt0
    else:
        c0 = c0_norm(F0.lam)
        dt = min(opts.dt_max, 0.5 / c0) if c0 > 0 else opts.dt_max
    step = 0
    rejected = 0
    etd = opts.scheme == "etdrk4" and lin.gauge_fix
    coeffs = {}

    def done(res):
        return res < opts.tol

    def advance(u, X, h):
        if etd:
            if h not in coeffs:
                if len(coeffs) > 8:
                    coeffs.clear()
                coeffs[h] = _etd_coefficients(lin.lam, h)
            out, Hs = _etdrk4_step(stage, u, coeffs[h])
        else:
            out, Hs = _lawson_step(stage, lin, u, h)
        return out, (None if X is None else _gauge_step(X, Hs, h))

    res = np.sqrt(energy)
    while not done(res):
        if opts.t_end is not None and t >= opts.t_end * (1 - 1e-14):
            break
        if step >= opts.max_steps:
            raise MaxStepsExceeded(f"{step} steps without reaching tolerance (residual {res:.3e})")
        if t > opts.t_max:
            raise MaxStepsExceeded(f"time {t:.3e} exceeds t_max without reaching tolerance")
        h = dt if opts.t_end is None else min(dt, opts.t_end - t)
        if opts.rtol is None or opts.fixed_dt is not None:
            new, Xn = advance(bh, X, h)
            err = 0.0
        else:
            coarse, _ = advance(bh, None, h)
            mid, Xm = advance(bh, X, h / 2)
            new, Xn = advance(mid, Xm, h / 2)
            err = _relative_change(coarse, new, grid) / 15.0
        bnew = (ifft(new[0]), ifft(new[1]))
        Anew = conn(bnew)
        e_new = l2_norm(curvature(Anew).F, grid) ** 2
        bad_energy = not np.isfinite(e_new) or e_new > energy
        if opts.fixed_dt is None and (bad_energy or err > opts.rtol):
            rejected += 1
            dt = h / 2 if bad_energy else h * max(0.2, 0.9 * (opts.rtol / err) ** 0.2)
            if dt < opts.dt_min:
                raise EnergyIncrease(f"step size fell below {opts.dt_min} at t = {t:.3e}")
            continue
        X = Xn
        bh, A, energy = new, Anew, e_new
        t += h
        step += 1
        res = np.sqrt(energy)
        if opts.fixed_dt is None and h == dt:
            grow = opts.growth if err == 0 else min(opts.growth, 0.9 * (opts.rtol / err) ** 0.2)
            dt = min(h * max(grow, 1.0), opts.dt_max)
        if step % opts.record_every == 0 or done(res):
            result.records.append(_diagnostics(A, X, g_init, A0, step, t, h))
        if X is not None and opts.check_every and step % opts.check_every == 0:
            result.consistency.append((step, consistency_defect(X, A_init, A)))
    if result.records[-1].step != step:
        result.records.append(_diagnostics(A, X, g_init, A0, step, t, h if step else 0.0))
    result.A = A
    result.X = X
    result.g = None if (X is None or g_init is None) else X @ g_init
    result.converged = bool(done(res))
    result.steps = step
    result.time = t
    result.rejected = rejected
    if X is not None:
        result.consistency.append((step, consistency_defect(X, A_init, A)))
    return result


def consistency_defect(X, A_init: FiberConnection, A: FiberConnection) -> float:
    """``||X_dagger A_init - A||_L2``: drift between the tracked gauge and the connection."""
    B = apply_complex_gauge(X, A_init)
    return l2_norm((B.a1 - A.a1, B.a2 - A.a2), A.grid)


def kempf_ness_flow(A_init: FiberConnection, A0: FiberConnection, opts: FlowOptions = None, g_init=None):
    """Flow ``g' g^-1 = -i Lambda F`` starting from ``A_init = g_init_dagger A0``.

    The tracked gauge ``X`` starts at the identity with ``A = X_dagger A_init``;
    when ``g_init`` is supplied, diagnostics use the Hermitian
    representative ``h = log(g^* g) / 2`` of ``g = X g_init``.
    """
    return _flow(A_init, "kn", opts or FlowOptions(), A0=A0, g_init=g_init)


def ym_heat_flow(A_init: FiberConnection, opts: FlowOptions = None, A0: FiberConnection = None):
    """Direct flow ``A' = -d_A^* F_A`` in the flat unit-area metric."""
    return _flow(A_init, "ym", opts or FlowOptions(), A0=A0, g_init=None)


__all__ = ["FlowOptions", "FlowRecord", "FlowResult", "kempf_ness_flow", "ym_heat_flow", "kn_velocity",
           "ym_velocity", "consistency_defect", "write_trajectory_csv", "CSV_COLUMNS"]
