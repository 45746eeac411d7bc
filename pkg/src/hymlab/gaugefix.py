"""Gauge normalization of a Hermitian field with small curvature.

Given ``A = e^s_dagger A0`` with nearly flat curvature, :func:`normalize_gauge`
produces ``s'`` with the same connection and a controlled sup norm:

1. flow ``A`` to a flat ``A_inf`` with the Kempf-Ness flow;
2. build a unitary field ``u`` with ``u^* A0 = A_inf`` from the parallel frame
   of ``A_inf`` (holonomy alignment);
3. recover a complex gauge ``K`` near the identity with ``K_dagger (u^* A0) = A``
   (chord iteration in the diagonal frame);
4. ``G = K u^-1`` satisfies ``G_dagger A0 = A``; it is corrected by a constant
   diagonal element ``D`` of the stabilizer of ``A0`` so that ``G D`` is
   positive Hermitian, and ``s' = log(G D)``.

The recovery in step 3 is over the full complex gauge group: the Hermitian
orbit of ``u^* A0`` has half the dimension of the complex orbit, and ``A``
generally lies only in the latter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components

from .errors import AlignmentFailed, CurvatureTooLarge, FlowFailed, HymLabError, OutsideNeighborhood
from .fiber import c0_norm, dagger, diag_average, fft, ifft, l2_norm
from .flows import FlowOptions, kempf_ness_flow
from .gauge import apply_complex_gauge, apply_hermitian_gauge, curvature, logm_posdef
from .poincare import _diag_reference, poincare_constant
from .spectral import (FiberConnection, _trig_interp, holonomy, lift_differences,
                       unitary_pullback)

ALIGN_TOL = 1e-6


@dataclass
class NormalizeInfo:
    residual: float          # ||e^{s'}_dagger A0 - A||_L2
    alignment_residual: float
    flow_steps: int
    lambda0: float           # ||log K||_L2 / ||A - u^* A0||_L2 from the recovery
    c0_s: float
    c0_s_prime: float


def _expm_skew(omega):
    """``exp`` of anti-Hermitian matrices via the eigenbasis of ``-i omega``."""
    K = -1j * omega
    K = 0.5 * (K + dagger(K))
    w, V = np.linalg.eigh(K)
    return V @ (np.exp(1j * w)[..., None] * dagger(V))


def _transport(samples, sub=4):
    """Parallel frame ``Phi' = Phi a`` along axis 0 of periodic ``samples``.

    ``samples`` has shape ``(N, ...)`` with trailing ``(n, n)``; returns ``Phi``
    at the grid points ``j / N`` with ``Phi(0) = Id``, using fourth-order
    Magnus on ``sub`` substeps per grid interval.
    """
    N = samples.shape[0]
    n = samples.shape[-1]
    h = 1.0 / (N * sub)
    left = np.arange(N * sub) * h
    g1, g2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    P = _trig_interp(samples, left + g1 * h)
    Q = _trig_interp(samples, left + g2 * h)
    omega = 0.5 * h * (P + Q) + np.sqrt(3) / 12 * h * h * (P @ Q - Q @ P)
    steps = _expm_skew(omega)
    phi = np.broadcast_to(np.eye(n, dtype=complex), samples.shape[1:]).copy()
    out = np.empty(samples.shape, dtype=complex)
    for j in range(N * sub):
        if j % sub == 0:
            out[j // sub] = phi
        phi = phi @ steps[j]
    return out


def parallel_frame(conn: FiberConnection, sub=4):
    """``Psi(y)`` with ``Psi^-1 dPsi = a`` on the fundamental domain, ``Psi(0) = Id``.

    Integrated along ``y1`` from the origin, then along ``y2``; for a flat
    connection the result is path independent.
    """
    base = _transport(conn.a1[:, 0], sub)                      # (N, n, n) along y1
    lines = _transport(np.swapaxes(conn.a2, 0, 1), sub)         # (N_y2, N_y1, n, n)
    return base[:, None] @ np.swapaxes(lines, 0, 1)


def _joint_eigenbasis(H1, H2):
    """Orthonormal joint eigenvectors of two commuting normal matrices."""
    M = H1 + (0.6180339887 + 0.2718281828j) * H2
    _, V = np.linalg.eig(M)
    # polar orthonormalization removes rounding from the non-unitary eig output
    U, _, Wh = np.linalg.svd(V)
    return U @ Wh


def align_unitary(A_inf: FiberConnection, A0: FiberConnection, tol=ALIGN_TOL, sub=4):
    """Unitary field ``u`` with ``u^* A0 = A_inf`` for flat ``A_inf``.

    ``u = exp(-a0 . y) C Psi(y)``, where ``Psi`` is the parallel frame of
    ``A_inf`` and the constant unitary ``C`` conjugates the holonomies of
    ``A_inf`` to ``diag(exp(2 pi i theta))``; eigenvalues are matched by
    minimal angular distance (ties broken by index order).
    Returns ``(u, residual)``.
    """
    n = A0.n
    grid = A0.grid
    e1 = np.diag(A0.a1[0, 0])
    e2 = np.diag(A0.a2[0, 0])
    H1 = holonomy(A_inf, "y1")
    H2 = holonomy(A_inf, "y2")
    V = _joint_eigenbasis(H1, H2)
    l1 = np.einsum("ij,jk,ki->i", dagger(V), H1, V)
    l2 = np.einsum("ij,jk,ki->i", dagger(V), H2, V)
    cost = (np.abs(np.angle(l1[:, None] * np.exp(-e1)[None, :]))
            + np.abs(np.angle(l2[:, None] * np.exp(-e2)[None, :])))
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(n, dtype=int)
    order[cols] = rows
    C = dagger(V[:, order])
    psi = parallel_frame(A_inf, sub)
    y1, y2 = grid.coords
    phase = np.exp(-(e1 * y1[..., None] + e2 * y2[..., None]))
    u = phase[..., :, None] * (C @ psi)
    B = unitary_pullback(u, A0)
    res = l2_norm((B.a1 - A_inf.a1, B.a2 - A_inf.a2), grid)
    if not np.isfinite(res) or res > tol:
        raise AlignmentFailed(f"no unitary aligns the holonomies (residual {res:.3e}); "
                              "holonomy spectra may be degenerate")
    return u, res


def recover_complex(A: FiberConnection, A0: FiberConnection, u=None, tol=1e-11, max_iter=60):
    """Complex gauge ``K`` with ``K_dagger (u^* A0) = A`` for ``A`` near ``u^* A0``.

    Works in the diagonal frame with target ``u_dagger A``: the update solves
    ``-dbar_A0 delta = alpha_target - alpha_K`` mode by mode, leaving the
    constant diagonal (stabilizer) modes untouched. Only the dzbar part is
    matched; for unitary connections it determines the connection.
    Returns ``(K, lambda0)`` with ``lambda0 = ||sum delta|| / ||A - u^* A0||``.
    """
    grid = A0.grid
    sd = _diag_reference(A0)
    target = A if u is None else unitary_pullback(dagger(u), A)
    dist = l2_norm((target.a1 - A0.a1, target.a2 - A0.a2), grid)
    delta0 = 1.0 / (4.0 * poincare_constant(sd, grid).c_p)
    if dist > delta0:
        raise OutsideNeighborhood(f"||A - u^* A0|| = {dist:.3e} exceeds delta0 = {delta0:.3e}")
    sym = grid.dzbar_symbol[..., None, None] - np.pi / grid.tau.imag * lift_differences(sd.lifts)
    ok = np.abs(sym) > 1e-12
    inv = np.where(ok, -1.0 / np.where(ok, sym, 1.0), 0.0)
    K = np.broadcast_to(np.eye(A0.n, dtype=complex), A0.a1.shape).copy()
    total = np.zeros_like(K)
    history = []
    for _ in range(max_iter):
        cur = apply_complex_gauge(K, A0)
        res = l2_norm((cur.a1 - target.a1, cur.a2 - target.a2), grid)
        history.append(res)
        if res < tol:
            break
        if not np.isfinite(res) or (len(history) > 4 and res > 0.5 * history[-5]):
            raise OutsideNeighborhood(f"complex recovery stalled at residual {res:.3e}")
        delta = ifft(fft(target.alpha - cur.alpha) * inv)
        total += delta
        K = expm(delta) @ K
    else:
        raise OutsideNeighborhood(f"complex recovery did not converge (residual {history[-1]:.3e})")
    if u is not None:
        K = dagger(u) @ K @ u
    lam0 = l2_norm(total, grid) / dist if dist > 0 else 0.0
    return K, lam0


def _blocks(G, rel=1e-10):
    mag = np.max(np.abs(G), axis=(0, 1))
    adj = (mag > rel * mag.max()) | (mag.T > rel * mag.max())
    _, labels = connected_components(adj, directed=False)
    return [np.flatnonzero(labels == b) for b in range(labels.max() + 1)]


def stabilizer_correction(G, rel=1e-10):
    """Constant diagonal ``D`` making ``G D`` positive Hermitian, one scale per coupled block.

    ``D`` ranges over the stabilizer of a constant diagonal connection with
    distinct points, so ``(G D)_dagger A0 = G_dagger A0``.
    """
    n = G.shape[-1]
    d = np.zeros(n, dtype=complex)
    for blk in _blocks(G, rel):
        Gb = G[..., blk[:, None], blk[None, :]].reshape(-1, len(blk), len(blk))
        m = len(blk)
        # real unknowns x = (Re d, Im d); equations G_jk d_k - conj(G_kj d_j) = 0
        rows = []
        for j in range(m):
            for k in range(m):
                cjk = Gb[:, j, k]
                ckj = np.conj(Gb[:, k, j])
                re = np.zeros((cjk.size, 2 * m), dtype=complex)
                re[:, k] += cjk
                re[:, m + k] += 1j * cjk
                re[:, j] -= ckj
                re[:, m + j] -= -1j * ckj
                rows.append(re)
        Mc = np.concatenate(rows)
        M = np.concatenate([Mc.real, Mc.imag])
        _, sv, Vt = np.linalg.svd(M, full_matrices=False)
        if m > 1 and sv[-2] < 1e-6 * sv[0]:
            raise AlignmentFailed("stabilizer correction is not unique")
        x = Vt[-1]
        db = x[:m] + 1j * x[m:]
        GD = Gb * db[None, None, :]
        if np.mean(np.real(np.trace(GD, axis1=-2, axis2=-1))) < 0:
            db = -db
        d[blk] = db
    return np.diag(d), _blocks(G, rel)


def normalize_gauge(s, A0: FiberConnection, eps0=1e-2, opts: FlowOptions = None, return_info=False):
    """Return ``s'`` with ``e^{s'}_dagger A0 = e^s_dagger A0`` and controlled sup norm."""
    grid = A0.grid
    A = apply_hermitian_gauge(s, A0)
    Fc0 = c0_norm(curvature(A).F)
    if Fc0 > eps0:
        raise CurvatureTooLarge(f"||F||_C0 = {Fc0:.3e} exceeds eps0 = {eps0:.3e}")
    try:
        flow = kempf_ness_flow(A, A0, opts or FlowOptions(track_gauge=False))
    except HymLabError as exc:
        raise FlowFailed(f"Kempf-Ness flow failed: {exc}") from exc
    if not flow.converged:
        raise FlowFailed("Kempf-Ness flow stopped before reaching tolerance")
    u, align_res = align_unitary(flow.A, A0)
    try:
        K, lam0 = recover_complex(A, A0, u=u)
    except HymLabError as exc:
        raise FlowFailed(f"recovery against the aligned reference failed: {exc}") from exc
    G = K @ dagger(u)
    D, blocks = stabilizer_correction(G)
    GD = G @ D
    if np.max(np.abs(GD - dagger(GD))) > 1e-8 * np.max(np.abs(GD)):
        raise AlignmentFailed("no stabilizer element makes the gauge Hermitian")
    sp = logm_posdef(GD)
    avg = np.real(diag_average(sp))
    shift = np.zeros(A0.n)
    for blk in blocks:
        shift[blk] = avg[blk].mean()
    sp = sp - np.diag(shift)
    B = apply_hermitian_gauge(sp, A0)
    res = l2_norm((B.a1 - A.a1, B.a2 - A.a2), grid)
    if res > 1e-8:
        raise FlowFailed(f"normalized field changes the connection (residual {res:.3e})")
    if not return_info:
        return sp
    info = NormalizeInfo(res, align_res, flow.steps, lam0, c0_norm(s), c0_norm(sp))
    return sp, info


def c0_bound(moser_c1, lambda0):
    """``C0 = 2 C1 Lambda0``."""
    return 2.0 * moser_c1 * lambda0


__all__ = ["normalize_gauge", "recover_complex", "align_unitary", "parallel_frame", "stabilizer_correction", "NormalizeInfo",
           "c0_bound"]
