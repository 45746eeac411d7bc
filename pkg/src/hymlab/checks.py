"""Invariant suites shared by the command line and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import holomorphic_coords, make_potential, monge_ampere_residual, tau_at
from .fiber import FiberGrid, c0_norm, l2_norm, random_hermitian
from .gauge import apply_complex_gauge, apply_hermitian_gauge, curvature, curvature_identity_residual, expm_herm
from .semiflat import (DegenerationParams, base_form, closedness_residual, degeneration_form,
                       hyperkahler_defects, semiflat_form, triple_at)
from .spectral import (SpectralData, holonomy, hym_residual_triple, lift_equivalence_gauge, linear_section,
                       reference_connection, shifted, unitary_pullback)

ANALYTIC = ("identity", "diagonal", "modulus")
INTEGRATED = ("modulus_grid",)


@dataclass
class CheckResult:
    name: str
    value: float
    bound: float
    relation: str = "<"      # "<" (value below bound) or ">" (value above bound)

    @property
    def passed(self):
        if np.isnan(self.value):
            return False
        return self.value < self.bound if self.relation == "<" else self.value > self.bound

    def as_dict(self):
        return {"name": self.name, "value": float(self.value), "bound": self.bound,
                "relation": self.relation, "passed": self.passed}


def _sample_points(phi, count=64, seed=0, margin=0.9):
    d = phi.domain
    c1, c2 = 0.5 * (d.x1min + d.x1max), 0.5 * (d.x2min + d.x2max)
    r1, r2 = 0.5 * margin * (d.x1max - d.x1min), 0.5 * margin * (d.x2max - d.x2min)
    u = np.random.default_rng(seed).uniform(-1, 1, size=(count, 2))
    pts = np.stack([c1 + r1 * u[:, 0], c2 + r2 * u[:, 1]], axis=-1)
    return np.array([p for p in pts if d.contains(p)])


def closedness_order(phi, s=1.0, steps=(0.04, 0.02, 0.01), floor=1e-12):
    """Observed order of the closedness residual; ``inf`` when it sits at roundoff."""
    r = [closedness_residual(phi, s, h) for h in steps]
    if max(r) < floor:
        return np.inf, r
    orders = [np.log(a / b) / np.log(ha / hb) for a, b, ha, hb in zip(r, r[1:], steps, steps[1:]) if b > floor]
    return (min(orders) if orders else np.inf), r


def geometry_suite(potentials=ANALYTIC + INTEGRATED, scales=(1.0, 0.5, 0.1)):
    """Entries of ``potentials`` are built-in names or ``(name, params)`` pairs."""
    out = []
    for entry in potentials:
        name, params = (entry, {}) if isinstance(entry, str) else entry
        phi = make_potential(name, **params)
        pts = _sample_points(phi)
        bound = 1e-8 if name in ANALYTIC else 1e-5
        out.append(CheckResult(f"{name}: Monge-Ampere residual", float(np.max(monge_ampere_residual(phi, pts))),
                               bound))
        hk = 0.0
        for s in scales:
            for b in pts[:16]:
                d = hyperkahler_defects(triple_at(phi, b, s))
                hk = max(hk, d["quaternion"], d["compatibility"])
        out.append(CheckResult(f"{name}: hyperkahler identities", hk, 1e-12))
        if name in ANALYTIC:
            order, _ = closedness_order(phi)
            out.append(CheckResult(f"{name}: closedness order", order, 1.9, ">"))
    return out


def degeneration_suite(ts=(1.0, 0.5, 0.1, 0.01)):
    phi = make_potential("identity")
    out = []
    for t in ts:
        lhs = degeneration_form(phi, (0.1, -0.2), DegenerationParams(t))
        res = float(np.max(np.abs(lhs - base_form() - t * semiflat_form())))
        out.append(CheckResult(f"degeneration identity t={t}", res, 1e-14))
    return out


SHIFT_PATTERNS = (((1, 0), (-1, 0)), ((0, 1), (0, -1)), ((2, -1), (-2, 1)))


def connection_suite(lifts=(0.25, -0.25), N=64, potential="identity", b=(0.1, 0.05), seed=0, curvature_samples=1,
                     potential_params=None):
    """Reference-connection, lift, triple-HYM and gauge-path checks."""
    phi = make_potential(potential, **(potential_params or {}))
    tau = tau_at(phi, b)
    grid = FiberGrid(N, tau)
    sd = SpectralData(np.asarray(lifts, dtype=complex), tau)
    A0 = reference_connection(sd, grid)
    out = [CheckResult("reference curvature C0", c0_norm(curvature(A0).F), 1e-14)]
    t1, t2 = sd.theta
    hol = max(np.max(np.abs(holonomy(A0, "y1") - np.diag(np.exp(2j * np.pi * t1)))),
              np.max(np.abs(holonomy(A0, "y2") - np.diag(np.exp(2j * np.pi * t2)))))
    out.append(CheckResult("reference holonomy", float(hol), 1e-12))
    for shifts in SHIFT_PATTERNS[: 3 if sd.n == 2 else 0]:
        u = lift_equivalence_gauge(sd, shifts, grid)
        B = reference_connection(shifted(sd, shifts), grid, allow_degenerate=True)
        C = unitary_pullback(u, A0)
        out.append(CheckResult(f"lift gauge {shifts}", l2_norm((C.a1 - B.a1, C.a2 - B.a2), grid), 1e-10))
    c = np.zeros(sd.n, dtype=complex)
    c[0], c[-1] = 0.3 + 0.1j, -(0.3 + 0.1j)
    hol_sec = linear_section(phi, sd.lifts, c, b)
    sd_h = SpectralData(sd.lifts, tau, hol_sec)
    out.append(CheckResult("triple HYM residual, holomorphic section",
                           max(hym_residual_triple(phi, b, sd_h, 1.0)), 1e-8))

    w0 = holomorphic_coords(phi, np.asarray(b, dtype=float))[0]
    sign = np.zeros(sd.n)
    sign[0], sign[-1] = 1.0, -1.0

    def non_holomorphic(x):
        # depends on Re w only, so it is not holomorphic in w
        w = holomorphic_coords(phi, np.asarray(x, dtype=float))[0]
        return sd.lifts + 0.3 * np.real(w - w0) * sign

    sd_n = SpectralData(sd.lifts, tau, non_holomorphic)
    out.append(CheckResult("triple HYM residual, non-holomorphic section",
                           max(hym_residual_triple(phi, b, sd_n, 1.0)), 1e-3, ">"))
    rng = np.random.default_rng(seed)
    s = random_hermitian(grid, sd.n, rng, amplitude=1.0)
    P = apply_hermitian_gauge(s, A0)
    Q = apply_complex_gauge(expm_herm(s), A0)
    out.append(CheckResult("hermitian vs complex gauge paths", l2_norm((P.a1 - Q.a1, P.a2 - Q.a2), grid), 1e-10))
    worst = curvature_identity_residual(s, A0)
    for _ in range(curvature_samples - 1):
        worst = max(worst, curvature_identity_residual(random_hermitian(grid, sd.n, rng, amplitude=1.0), A0))
    out.append(CheckResult(f"curvature identity ({curvature_samples} fields)", worst, 1e-6))
    return out


__all__ = ["CheckResult", "geometry_suite", "degeneration_suite", "connection_suite", "closedness_order",
           "SHIFT_PATTERNS"]
