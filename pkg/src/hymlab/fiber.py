"""Spectral calculus on the torus fiber ``E = R^2 / Z^2``.

Matrix fields are complex arrays of shape ``(N, N, n, n)``; axis 0 samples
``y1 = i / N`` and axis 1 samples ``y2 = j / N``. The complex coordinate is
``z = y2 + tau y1`` so that

    d/dzbar = i (d_1 - tau d_2) / (2 Im tau),   d/dz = -i (d_1 - conj(tau) d_2) / (2 Im tau),

and the plane wave ``exp(2 pi i (m y1 + k y2))`` is an eigenfunction of
``d/dzbar`` with eigenvalue ``pi (tau k - m) / Im tau``. First derivatives
drop the Nyquist mode. Integrals use the plain grid average times the unit
area, which is exact below Nyquist.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

MAGIC = b"HYMLAB1"


@dataclass(frozen=True)
class FiberGrid:
    N: int = 64
    tau: complex = 1j
    dealias: bool = False
    area: float = field(default=1.0, init=False)

    def __post_init__(self):
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if complex(self.tau).imag <= 0:
            raise ValueError("Im(tau) must be positive")
        object.__setattr__(self, "tau", complex(self.tau))

    @cached_property
    def modes(self):
        """Integer wavenumbers ``(m, k)`` as broadcastable ``(N, 1)`` and ``(1, N)`` arrays."""
        w = np.fft.fftfreq(self.N, 1.0 / self.N)
        return w[:, None], w[None, :]

    @cached_property
    def nyquist_free(self):
        m, k = self.modes
        half = self.N // 2
        return (np.abs(m) != half).astype(float), (np.abs(k) != half).astype(float)

    @cached_property
    def ik(self):
        """Symbols of ``d_1`` and ``d_2`` with the Nyquist column zeroed, shape ``(N, N)``."""
        m, k = self.modes
        f1, f2 = self.nyquist_free
        s1 = 2j * np.pi * m * f1 * np.ones((1, self.N))
        s2 = 2j * np.pi * k * f2 * np.ones((self.N, 1))
        return s1, s2

    @cached_property
    def dzbar_symbol(self):
        s1, s2 = self.ik
        t = self.tau
        return 1j * (s1 - t * s2) / (2 * t.imag)

    @cached_property
    def dz_symbol(self):
        s1, s2 = self.ik
        t = self.tau
        return -1j * (s1 - np.conj(t) * s2) / (2 * t.imag)

    @cached_property
    def coords(self):
        y = np.arange(self.N) / self.N
        return np.meshgrid(y, y, indexing="ij")

    @property
    def dzbar_norm(self):
        """``|dzbar|`` measured in ``g0 = dy1^2 + dy2^2``."""
        return float(np.sqrt(1.0 + abs(self.tau) ** 2))

    def filter(self, f):
        """2/3-rule truncation when ``dealias`` is set; identity otherwise."""
        if not self.dealias:
            return f
        m, k = self.modes
        keep = (np.abs(m) <= self.N // 3) & (np.abs(k) <= self.N // 3)
        return ifft(fft(f) * _expand(keep, f))


def _expand(sym, f):
    return sym.reshape(sym.shape + (1,) * (f.ndim - 2))


def fft(f):
    return np.fft.fft2(f, axes=(0, 1))


def ifft(f):
    return np.fft.ifft2(f, axes=(0, 1))


def apply_symbol(f, sym):
    return ifft(fft(f) * _expand(sym, f))


def d1(f, grid: FiberGrid):
    return apply_symbol(f, grid.ik[0])


def d2(f, grid: FiberGrid):
    return apply_symbol(f, grid.ik[1])


def lift_differences(lifts):
    q = np.asarray(lifts, dtype=complex)
    return q[:, None] - q[None, :]


def dbar(f, grid: FiberGrid, lifts=None):
    """dzbar-coefficient of the coupled operator ``dbar - pi Q / Im(tau) dzbar``.

    Entry ``(j, k)`` is acted on by ``d/dzbar - pi (q_j - q_k) / Im(tau)``.
    ``f`` is ``(N, N)`` for scalars or ``(N, N, n, n)`` for endomorphisms.
    """
    out = apply_symbol(f, grid.dzbar_symbol)
    if lifts is not None:
        out = out - np.pi / grid.tau.imag * lift_differences(lifts) * f
    return out


def dz(f, grid: FiberGrid, lifts=None):
    """dz-coefficient of the (1,0) partner ``d + pi conj(Q) / Im(tau) dz`` acting on endomorphisms."""
    out = apply_symbol(f, grid.dz_symbol)
    if lifts is not None:
        out = out + np.pi / grid.tau.imag * np.conj(lift_differences(lifts)) * f
    return out


def plane_wave(grid: FiberGrid, m, k):
    y1, y2 = grid.coords
    return np.exp(2j * np.pi * (m * y1 + k * y2))


def l2_inner(f, g, grid: FiberGrid):
    """Real part of ``int tr(f g^*)``; the L2 inner product on real-linear spaces of fields."""
    return float(np.real(np.sum(f * np.conj(g))) / (grid.N**2) * grid.area)


def l2_norm(f, grid: FiberGrid):
    if isinstance(f, (tuple, list)):
        return float(np.sqrt(sum(l2_norm(c, grid) ** 2 for c in f)))
    return float(np.sqrt(np.sum(np.abs(f) ** 2) / grid.N**2 * grid.area))


def c0_norm(f):
    """Max over the grid of the pointwise Frobenius norm."""
    if isinstance(f, (tuple, list)):
        return float(np.max(np.sqrt(sum(_frob2(c) for c in f))))
    return float(np.sqrt(np.max(_frob2(f))))


def _frob2(f):
    if f.ndim == 2:
        return np.abs(f) ** 2
    return np.sum(np.abs(f) ** 2, axis=(-2, -1))


def covariant_gradient(f, conn):
    """``(nabla_1 f, nabla_2 f)`` for an endomorphism field in the adjoint action of ``conn``."""
    grid = conn.grid
    return (d1(f, grid) + conn.a1 @ f - f @ conn.a1,
            d2(f, grid) + conn.a2 @ f - f @ conn.a2)


def l21_norm(f, conn):
    """``sqrt(||f||^2 + ||nabla f||^2)``; ``f`` may be one field or a tuple of components."""
    comps = f if isinstance(f, (tuple, list)) else (f,)
    grid = conn.grid
    total = 0.0
    for c in comps:
        g1, g2 = covariant_gradient(c, conn)
        total += l2_norm(c, grid) ** 2 + l2_norm(g1, grid) ** 2 + l2_norm(g2, grid) ** 2
    return float(np.sqrt(total))


def diag_average(f):
    return np.mean(np.diagonal(f, axis1=-2, axis2=-1), axis=(0, 1))


def project_herm_perp(s):
    """Remove the grid average of every diagonal entry."""
    avg = diag_average(s)
    return s - np.diag(avg)


def hermitian_defect(s):
    return float(np.max(np.abs(s - np.conj(np.swapaxes(s, -1, -2))))) if s.size else 0.0


def hermitian_part(f):
    return 0.5 * (f + np.conj(np.swapaxes(f, -1, -2)))


def dagger(f):
    return np.conj(np.swapaxes(f, -1, -2))


def random_hermitian(grid: FiberGrid, n, rng, kmax=2, amplitude=1.0, traceless=True, perp=True,
                     norm="c0"):
    """Smooth random Hermitian field built from modes ``|m|, |k| <= kmax``.

    The result is scaled so that its C0 norm (``norm="c0"``) or L2 norm
    (``norm="l2"``) equals ``amplitude``.
    """
    N = grid.N
    spec = np.zeros((N, N, n, n), dtype=complex)
    ks = list(range(-kmax, kmax + 1))
    for m in ks:
        for k in ks:
            c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            spec[m % N, k % N] = c / (1 + m * m + k * k)
    f = hermitian_part(ifft(spec) * N * N)
    if traceless:
        f = f - np.trace(f, axis1=-2, axis2=-1)[..., None, None] * np.eye(n) / n
    if perp:
        f = project_herm_perp(f)
    scale = c0_norm(f) if norm == "c0" else l2_norm(f, grid)
    if scale == 0:
        return f
    return f * (amplitude / scale)


def save_snapshot(path, fields, grid: FiberGrid, meta=None):
    """Write ``HYMLAB1`` binary grid snapshot plus JSON sidecar ``<path>.json``.

    Header: 7-byte magic, then little-endian uint32 ``N``, ``n``, field count;
    then each field as row-major complex128 ``(N, N, n, n)``.
    """
    path = Path(path)
    fields = [np.ascontiguousarray(f, dtype="<c16") for f in fields]
    if not fields:
        raise ValueError("need at least one field")
    n = fields[0].shape[-1] if fields[0].ndim == 4 else 1
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", grid.N, n, len(fields)))
        for f in fields:
            if f.reshape(grid.N, grid.N, n, n).shape != (grid.N, grid.N, n, n):
                raise ValueError("field shape mismatch")
            fh.write(f.tobytes(order="C"))
    sidecar = {"tau": [grid.tau.real, grid.tau.imag], "N": grid.N, "n": n, "fields": len(fields)}
    sidecar.update(meta or {})
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_snapshot(path):
    """Return ``(fields, sidecar)``; the sidecar is ``{}`` when absent."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:7] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:7]!r}")
    N, n, count = struct.unpack("<III", raw[7:19])
    size = N * N * n * n
    data = np.frombuffer(raw[19:], dtype="<c16")
    if data.size != size * count:
        raise ValueError(f"{path}: expected {size * count} entries, found {data.size}")
    fields = [data[i * size:(i + 1) * size].reshape(N, N, n, n).copy() for i in range(count)]
    side = Path(str(path) + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return fields, meta
