"""Poincaré constant of the coupled dbar operator, Hermitian recovery and related estimates.

On a Fourier mode ``(m, k)`` of entry ``(j, k')`` the operator ``dbar_A0`` is
multiplication by ``pi (tau k - m - q~_jk') / Im tau``; with the dzbar norm
``|dzbar|_{g0} = sqrt(1 + |tau|^2)`` this gives the L2 operator norm per mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectralGap, OutsideNeighborhood
from .fiber import FiberGrid, c0_norm, dagger, fft, ifft, l2_norm, project_herm_perp
from .gauge import apply_hermitian_gauge, d_A, dbar_A
from .spectral import FiberConnection, SpectralData, lift_differences, reference_connection, unitary_pullback


@dataclass
class PoincareEstimate:
    c_p: float
    lambda_min: float
    entry: tuple
    mode: tuple

    @property
    def certificate(self):
        return {"entry": list(self.entry), "mode": list(self.mode)}


def _symbols(grid: FiberGrid, lifts):
    """Full symbol array ``(N, N, n, n)`` of the coupled dbar, Nyquist derivatives dropped."""
    qd = lift_differences(lifts)
    return grid.dzbar_symbol[..., None, None] - np.pi * qd / grid.tau.imag


def poincare_constant(sd: SpectralData, grid: FiberGrid) -> PoincareEstimate:
    qd = lift_differences(sd.lifts)
    n = sd.n
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            d1_, d2_ = _split(qd[j, k], grid.tau)
            if abs(d1_ - round(d1_)) < 1e-12 and abs(d2_ - round(d2_)) < 1e-12:
                raise DegenerateSpectralGap(f"q~_{j}{k} lies in the period lattice")
    sym = np.abs(_symbols(grid, sd.lifts)) * grid.dzbar_norm
    m, kk = grid.modes
    half = grid.N // 2
    admissible = np.broadcast_to(((np.abs(m) < half) & (np.abs(kk) < half))[..., None, None], sym.shape).copy()
    diag = np.arange(n)
    admissible[0, 0, diag, diag] = False
    vals = np.where(admissible, sym, np.inf)
    idx = np.unravel_index(np.argmin(vals), vals.shape)
    lam = float(vals[idx])
    mode = (int(m[idx[0], 0]), int(kk[0, idx[1]]))
    return PoincareEstimate(1.0 / lam, lam, (int(idx[2]), int(idx[3])), mode)


def _split(q, tau):
    theta2 = -q.imag / tau.imag
    return q.real + tau.real * theta2, theta2


def fourier_matrix_derivative(N):
    """Periodic spectral differentiation matrix (cotangent formula), exact below Nyquist."""
    h = 2 * np.pi / N
    i = np.arange(N)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        D = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2)
    D[np.arange(N), np.arange(N)] = 0.0
    return D * 2 * np.pi  # d/dy on the unit period


def dense_poincare(sd: SpectralData, grid: FiberGrid, u=None) -> float:
    """Brute-force ``lambda_min`` of ``dbar_A0`` on ``Herm0_perp`` by a generalized eigenproblem.

    Independent of FFTs: derivatives use the cotangent differentiation
    matrix; fields are restricted to the Nyquist-free subspace. With a
    constant unitary ``u`` the conjugated operator ``s -> u dbar_A0(u^* s u) u^*``
    is measured on the conjugated slice instead.
    """
    N, n, tau = grid.N, sd.n, grid.tau
    T = tau.imag
    D = fourier_matrix_derivative(N)
    eye = np.eye(N)
    alt = (-1.0) ** np.arange(N)
    P1 = eye - np.outer(alt, alt) / N
    P2 = np.kron(P1, P1) - np.full((N * N, N * N), 1.0 / (N * N))
    w, V = np.linalg.eigh(np.kron(P1, P1))
    B_all = V[:, w > 0.5]  # Nyquist-free scalars
    w0, V0 = np.linalg.eigh(P2)
    B_zero = V0[:, w0 > 0.5]  # Nyquist-free and zero mean
    Dzb = 1j / (2 * T) * (np.kron(D, eye) - tau * np.kron(eye, D))
    qd = lift_differences(sd.lifts)
    uu = np.eye(n) if u is None else np.asarray(u)
    # real parametrization: traceless diagonal (zero-mean fields) and upper entries (complex fields)
    hel = scipy.linalg.null_space(np.ones((1, n))) if n > 1 else np.ones((1, 1))
    cols, grams = [], []
    pieces = []
    for c in range(hel.shape[1]):
        pieces.append(("diag", c, B_zero))
    for j in range(n):
        for k in range(j + 1, n):
            pieces.append(("re", (j, k), B_all))
            pieces.append(("im", (j, k), B_all))
    fields = []
    for kind, key, basis in pieces:
        for v in basis.T:
            S = np.zeros((N * N, n, n), dtype=complex)
            if kind == "diag":
                S[:, np.arange(n), np.arange(n)] = np.outer(v, hel[:, key])
            else:
                j, k = key
                z = v if kind == "re" else 1j * v
                S[:, j, k] = z
                S[:, k, j] = np.conj(z)
            fields.append(S)
    for S in fields:
        S = uu @ S @ dagger(uu)
        grams.append(S.reshape(-1))
        out = np.einsum("ab,bjk->ajk", Dzb, S)
        # coupling in the conjugated frame: entrywise -pi q_jk / T in the diagonal frame
        Sd = dagger(uu) @ S @ uu
        out = out + uu @ (-np.pi * qd / T * Sd) @ dagger(uu)
        cols.append(out.reshape(-1))
    M = np.array(cols).T
    G = np.array(grams).T
    A = np.real(M.conj().T @ M)
    Gm = np.real(G.conj().T @ G)
    ev = scipy.linalg.eigh(A, Gm, eigvals_only=True, subset_by_index=[0, 0])
    return float(np.sqrt(max(ev[0], 0.0)) * grid.dzbar_norm)


def poincare_violations(sd: SpectralData, grid: FiberGrid, samples, c_p=None):
    """Count samples with ``||s|| > C_p ||dbar_A0 s||`` (operator norm including ``|dzbar|``)."""
    A0 = reference_connection(sd, grid)
    c_p = poincare_constant(sd, grid).c_p if c_p is None else c_p
    bad = 0
    worst = 0.0
    for s in samples:
        lhs = l2_norm(s, grid)
        rhs = c_p * grid.dzbar_norm * l2_norm(dbar_A(A0, s), grid)
        worst = max(worst, lhs / rhs if rhs > 0 else np.inf)
        bad += lhs > rhs * (1 + 1e-12)
    return int(bad), float(worst)


# --- recovery of s from a nearby connection ----------------------------------------------

def _neg_index(N):
    return (-np.arange(N)) % N


def hermitian_lsq_inverse(R, grid: FiberGrid, lifts):
    """Hermitian ``X`` minimizing ``||dbar_A0 X - R||`` mode by mode; zero on the kernel."""
    sig = _symbols(grid, lifts)
    Rh = fft(R)
    idx = _neg_index(grid.N)
    Rneg = np.swapaxes(Rh[idx][:, idx], -1, -2)
    ok = np.abs(sig) > 1e-13
    safe = np.where(ok, sig, 1.0)
    Xh = np.where(ok, 0.5 * (Rh / safe - np.conj(Rneg) / np.conj(safe)), 0.0)
    X = ifft(Xh)
    return 0.5 * (X + dagger(X))


@dataclass
class RecoveryInfo:
    iterations: int
    residual: float
    distance: float
    lambda0: float
    delta0: float
    history: list = field(default_factory=list)


def _diag_reference(A_ref: FiberConnection):
    a1 = A_ref.a1.mean(axis=(0, 1))
    a2 = A_ref.a2.mean(axis=(0, 1))
    off = np.abs(a1 - np.diag(np.diag(a1))).max() + np.abs(a2 - np.diag(np.diag(a2))).max()
    var = np.abs(A_ref.a1 - a1).max() + np.abs(A_ref.a2 - a2).max()
    if off > 1e-10 or var > 1e-10:
        raise ValueError("reference must be a constant diagonal connection; pass u for u^* A0 references")
    t1 = np.real(np.diag(a1) / (2j * np.pi))
    t2 = np.real(np.diag(a2) / (2j * np.pi))
    return SpectralData.from_theta(t1, t2, A_ref.grid.tau)


def recover_hermitian(A: FiberConnection, A_ref: FiberConnection, u=None, delta0=None, tol=1e-11,
                      max_iter=60, return_info=False):
    """Solve ``e^s_dagger A_ref = A`` for Hermitian ``s`` by a chord iteration.

    ``A_ref`` is a constant diagonal connection; with a unitary field ``u``
    the reference is ``u^* A_ref`` instead. The iteration works in the
    diagonal frame, where ``eta = u s u^-1`` lies in ``Herm0_perp`` and the
    linearization ``-dbar_A0`` is inverted exactly mode by mode.
    """
    grid = A.grid
    sd = _diag_reference(A_ref)
    A0 = reference_connection(sd, grid, allow_degenerate=True)
    target = A if u is None else unitary_pullback(dagger(u), A)
    ref = A0 if u is None else unitary_pullback(u, A0)
    dist = l2_norm((A.a1 - ref.a1, A.a2 - ref.a2), grid)
    if delta0 is None:
        delta0 = 1.0 / (4.0 * poincare_constant(sd, grid).c_p)
    if dist > delta0:
        raise OutsideNeighborhood(f"||A - A_ref|| = {dist:.3e} exceeds delta0 = {delta0:.3e}")
    alpha_t = target.alpha
    eta = np.zeros_like(A.a1)
    history = []
    res = np.inf
    best = np.inf
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        cur = apply_hermitian_gauge(eta, A0)
        R = cur.alpha - alpha_t
        res = l2_norm((cur.a1 - target.a1, cur.a2 - target.a2), grid)
        history.append(res)
        if res < tol:
            break
        if not np.isfinite(res) or res > 10 * max(history[0], 1e-300) + 1e-3:
            raise OutsideNeighborhood(f"iteration diverged (residual {res:.3e})")
        if res < 0.5 * best:
            best = res
            stall = 0
        else:
            stall += 1
            if stall >= 4:
                raise OutsideNeighborhood(f"residual plateau at {res:.3e}; A is not in the Hermitian orbit")
        eta = project_herm_perp(eta + hermitian_lsq_inverse(R, grid, sd.lifts))
    else:
        if res >= tol:
            raise OutsideNeighborhood(f"no convergence in {max_iter} iterations (residual {res:.3e})")
    s = eta if u is None else dagger(u) @ eta @ u
    lam0 = l2_norm(eta, grid) / dist if dist > 0 else 0.0
    info = RecoveryInfo(it, float(res), float(dist), float(lam0), float(delta0), history)
    return (s, info) if return_info else s


# --- Moser-type constant -------------------------------------------------------------

def moser_ratio(s, grid: FiberGrid, eps0=1e-2, form="literal"):
    """``max(|s|_C0^2, 1) / (|s|_L2 (1 + eps0))`` or its homogeneous variant ``|s|_C0 / (|s|_L2 (1 + eps0))``."""
    c0 = c0_norm(s)
    l2 = l2_norm(s, grid)
    if l2 == 0:
        return 0.0 if form != "literal" else np.inf
    if form == "literal":
        return max(c0 * c0, 1.0) / (l2 * (1 + eps0))
    if form == "homogeneous":
        return c0 / (l2 * (1 + eps0))
    raise ValueError(f"unknown form {form!r}")


def moser_constant(samples, grid: FiberGrid, A0: FiberConnection = None, eps0=1e-2, form="literal"):
    """Empirical maximum of :func:`moser_ratio` over samples.

    When ``A0`` is given each sample must satisfy the curvature gate
    ``||F_{e^s A0}||_C0 <= eps0``; violators raise ``CurvatureTooLarge``.
    """
    from .errors import CurvatureTooLarge
    from .gauge import curvature

    best = 0.0
    for s in samples:
        if A0 is not None:
            f = c0_norm(curvature(apply_hermitian_gauge(s, A0)).F)
            if f > eps0:
                raise CurvatureTooLarge(f"sample curvature {f:.3e} exceeds eps0 = {eps0}")
        best = max(best, moser_ratio(s, grid, eps0, form))
    return float(best)


# --- integration by parts on the fiber --------------------------------------------------------

def holomorphic_frame_identity(s, A0: FiberConnection):
    """Norms in the chain ``||d_A0 b||^2 = ||dbar_A0 b||^2 = ||F_H||^2`` for ``b = e^{-2s} d_A0 e^{2s}``.

    ``b dz`` is the difference between the Chern connection of ``H = e^{2s}``
    (holomorphic frame) and ``A0``; ``F_H = dbar_A0(b dz)``. Norms use the
    flat unit-area Kähler metric of modulus ``tau`` with ``|dz|^2 = 2 Im tau``
    (the metric ``g0`` when ``tau = i``). Returns ``(grad_sq, dbar_sq, curv_sq)``.
    """
    from .gauge import expm_herm

    g = A0.grid
    w = 2 * g.tau.imag
    P = expm_herm(2 * s)
    Pi = expm_herm(-2 * s)
    b = Pi @ d_A(A0, P)
    grad_sq = w * w * l2_norm(d_A(A0, b), g) ** 2
    db = dbar_A(A0, b)
    dbar_sq = w * w * l2_norm(db, g) ** 2
    # dzbar ^ dz = 2 i Im(tau) dy1 ^ dy2 (up to orientation sign); form norm of F_H
    curv_sq = l2_norm(2 * g.tau.imag * db, g) ** 2
    return grad_sq, dbar_sq, curv_sq
