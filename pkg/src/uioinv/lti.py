"""Discrete-time state-space substrate.

Representation, simulation, transmission zeros, the stacked output/impulse
block matrices, an SVD pseudo-inverse and a frequency-grid H-infinity norm.
Everything downstream is built from these pieces.

Conventions
-----------
Signals are ``SignalTrace`` objects: a start index plus an ``(N, d)`` array of
samples. Matrices are plain 2-D ``float64`` numpy arrays that are made
read-only once they are stored in one of the dataclasses below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import signal

from .errors import (
    DimensionError,
    NonMinimalError,
    NormUndefinedError,
    UnsupportedSystemError,
)

RANK_TOL = 1e-10
UC_TOL = 1e-6
INF_TOL = 1e-10
GRID_POINTS = 4096


def _frozen(a, ndim=2):
    arr = np.array(a, dtype=float)
    if ndim == 2 and arr.ndim < 2:
        arr = np.atleast_2d(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """The quadruple ``(A, B, C, D)`` of ``x+ = Ax + Bu``, ``y = Cx + Du``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A, B, C, D = (_frozen(M) for M in (self.A, self.B, self.C, self.D))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D must be {(C.shape[0], B.shape[1])}, got {D.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.C.shape[0]

    @property
    def is_square(self):
        return self.m == self.l

    def poles(self):
        return np.linalg.eigvals(self.A)

    def controllability_matrix(self):
        blocks = [self.B]
        for _ in range(self.n - 1):
            blocks.append(self.A @ blocks[-1])
        return np.hstack(blocks)

    def observability_matrix(self):
        blocks = [self.C]
        for _ in range(self.n - 1):
            blocks.append(blocks[-1] @ self.A)
        return np.vstack(blocks)

    def is_minimal(self, rank_tol=RANK_TOL):
        return (column_rank(self.controllability_matrix().T, rank_tol) == self.n
                and column_rank(self.observability_matrix(), rank_tol) == self.n)

    def require_square(self):
        if not self.is_square:
            raise UnsupportedSystemError(
                f"system must be square, got m={self.m}, l={self.l}")

    def require_minimal(self, rank_tol=RANK_TOL):
        if not self.is_minimal(rank_tol):
            raise NonMinimalError("system realization is not minimal")

    def transfer(self, z):
        """Evaluate ``C (zI - A)^-1 B + D`` at one point or an array of points.

        Returns an array of shape ``z.shape + (l, m)``.
        """
        return freqresp(self, z)

    def similarity(self, T):
        """Realization in the coordinates ``x' = T x``."""
        T = np.asarray(T, dtype=float)
        Ti = np.linalg.inv(T)
        return StateSpace(T @ self.A @ Ti, T @ self.B, self.C @ Ti, self.D)

    @classmethod
    def from_tf(cls, num, den):
        """SISO realization in controllable canonical form.

        ``num`` and ``den`` hold coefficients, highest power of z first.
        """
        num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(den, dtype=float)), "f")
        if len(num) > len(den):
            raise UnsupportedSystemError("improper transfer function")
        if len(den) == 1:
            return cls(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)),
                       [[num[0] / den[0] if len(num) else 0.0]])
        A, B, C, D = signal.tf2ss(num, den)
        return cls(A, B, C, D)

    @classmethod
    def from_zpk(cls, zeros, poles, gain):
        num = np.real_if_close(gain * np.poly(zeros)) if len(zeros) else [gain]
        den = np.real_if_close(np.poly(poles)) if len(poles) else [1.0]
        return cls.from_tf(np.real(num), np.real(den))


@dataclass(frozen=True, eq=False)
class SignalTrace:
    """Time-indexed samples: row ``i`` holds the value at ``start_index + i``."""

    start_index: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1) if s.size else s.reshape(0, 0)
        if s.ndim != 2:
            raise DimensionError("samples must be a 2-D array (time x dim)")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "start_index", int(self.start_index))

    @classmethod
    def from_array(cls, values, start_index=0):
        return cls(start_index, values)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def stop_index(self):
        """One past the last index."""
        return self.start_index + len(self)

    @property
    def indices(self):
        return np.arange(self.start_index, self.stop_index)

    def at(self, k):
        i = k - self.start_index
        if not 0 <= i < len(self):
            raise IndexError(f"index {k} outside [{self.start_index}, {self.stop_index})")
        return self.samples[i]

    def window(self, k0, k1):
        """Samples for indices ``k0 <= k < k1`` as a new trace."""
        if k0 < self.start_index or k1 > self.stop_index or k1 < k0:
            raise IndexError(f"window [{k0}, {k1}) outside "
                             f"[{self.start_index}, {self.stop_index})")
        i0 = k0 - self.start_index
        return SignalTrace(k0, self.samples[i0:i0 + (k1 - k0)])

    def __sub__(self, other):
        k0 = max(self.start_index, other.start_index)
        k1 = min(self.stop_index, other.stop_index)
        return SignalTrace(k0, self.window(k0, k1).samples
                           - other.window(k0, k1).samples)


@dataclass(frozen=True)
class ZeroClassification:
    """Finite transmission zeros split by modulus, repeated by multiplicity."""

    mp_zeros: np.ndarray
    nmp_zeros: np.ndarray
    unit_circle_zeros: np.ndarray
    padding_count: int
    tol: float = UC_TOL

    @property
    def all_zeros(self):
        return np.concatenate([self.mp_zeros, self.nmp_zeros, self.unit_circle_zeros])

    @property
    def alpha(self):
        return len(self.mp_zeros)

    @property
    def beta(self):
        return len(self.nmp_zeros)


@dataclass(frozen=True)
class BlockMatrices:
    Cn: np.ndarray
    Dn: np.ndarray
    In_selector: np.ndarray


def _as_trace(u, dim=None):
    if isinstance(u, SignalTrace):
        return u
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1 if dim is None else dim)
    return SignalTrace(0, arr)


def simulate(sys, x0, u):
    """Run the system forward from ``x0`` under the input trace ``u``.

    Returns ``(states, outputs)``. ``states`` has one more sample than ``u``
    (it ends with the state after the last input); ``outputs`` is aligned
    with ``u``.
    """
    u = _as_trace(u, sys.m)
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != sys.n:
        raise DimensionError(f"x0 has dimension {x.shape[0]}, expected {sys.n}")
    if len(u) and u.dim != sys.m:
        raise DimensionError(f"input dimension {u.dim}, expected {sys.m}")
    N = len(u)
    X = np.empty((N + 1, sys.n))
    X[0] = x
    U = u.samples.reshape(N, sys.m)
    for k in range(N):
        X[k + 1] = sys.A @ X[k] + sys.B @ U[k]
    Y = X[:N] @ sys.C.T + U @ sys.D.T
    return SignalTrace(u.start_index, X), SignalTrace(u.start_index, Y)


def column_rank(M, rank_tol=RANK_TOL):
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rank_tol * max(s[0], 1e-300))) if s[0] > 0 else 0


def has_full_column_rank(M, rank_tol=RANK_TOL):
    M = np.asarray(M)
    return M.shape[1] == 0 or column_rank(M, rank_tol) == M.shape[1]


def pinv(Mx, rank_tol=RANK_TOL):
    """Moore-Penrose pseudo-inverse through the SVD.

    Singular values above ``rank_tol * sigma_max`` are reciprocated, the rest
    are treated as zero. Values whose reciprocal would overflow count as zero
    as well.
    """
    Mx = np.asarray(Mx, dtype=float)
    if Mx.size == 0:
        return np.zeros(Mx.shape[::-1])
    U, s, Vt = np.linalg.svd(Mx, full_matrices=False)
    if s[0] == 0:
        return np.zeros(Mx.shape[::-1])
    keep = s > max(rank_tol * s[0], 1.0 / np.finfo(float).max)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def left_null_space(M, rank_tol=RANK_TOL, scale=0.0):
    """Orthonormal rows spanning ``{v : v M = 0}``.

    Singular values below ``rank_tol * max(s_max, scale)`` count as zero; a
    positive ``scale`` keeps a numerically zero ``M`` from looking full rank.
    """
    M = np.asarray(M)
    r = M.shape[0]
    if M.size == 0:
        return np.eye(r, dtype=M.dtype)
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    ref = max(s[0], scale) if len(s) else 0.0
    rank = int(np.sum(s > rank_tol * ref)) if ref > 0 else 0
    return U[:, rank:].conj().T


def spectral_radius(A):
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _clean_conjugates(z, tol=1e-9):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z.imag) <= tol * np.maximum(1.0, np.abs(z))
    z = z.copy()
    z[small] = z[small].real
    return z


def _sort_zeros(z):
    z = np.asarray(z, dtype=complex)
    order = np.lexsort((z.imag, z.real, -np.abs(z)))
    return z[order]


def transmission_zeros(sys, tol=UC_TOL):
    """Finite zeros of the Rosenbrock pencil, classified against the unit circle.

    The pencil ``z [I 0; 0 0] - [A B; -C -D]`` is solved by QZ; eigenvalue
    pairs whose beta component is below ``INF_TOL`` (after normalising the
    pair) are infinite and discarded.
    """
    sys.require_square()
    n = sys.n
    if n == 0:
        return ZeroClassification(np.zeros(0, complex), np.zeros(0, complex),
                                  np.zeros(0, complex), 0, tol)
    M0 = np.block([[sys.A, sys.B], [-sys.C, -sys.D]])
    E = np.zeros_like(M0)
    E[:n, :n] = np.eye(n)
    w = sla.eig(M0, E, right=False, homogeneous_eigvals=True)
    alpha, beta = w
    scale = np.hypot(np.abs(alpha), np.abs(beta))
    if np.any(scale <= INF_TOL * max(1.0, np.abs(M0).max())):
        raise UnsupportedSystemError(
            "Rosenbrock pencil is singular (transfer matrix not of full normal rank)")
    finite = np.abs(beta) / scale > INF_TOL
    z = _clean_conjugates(alpha[finite] / beta[finite])
    mod = np.abs(z)
    mp = _sort_zeros(z[mod < 1 - tol])
    nmp = _sort_zeros(z[mod > 1 + tol])
    uc = _sort_zeros(z[np.abs(mod - 1) <= tol])
    return ZeroClassification(mp, nmp, uc, n - len(z), tol)


def stack_block_matrices(sys):
    """Stacked observability ``Cn``, lower block-Toeplitz ``Dn`` and ``[I 0]``.

    The horizon is the state dimension ``n``.
    """
    sys.require_square()
    n, m, l = sys.n, sys.m, sys.l
    markov = [sys.D]
    CAk = sys.C
    Cn_blocks = []
    for i in range(n):
        Cn_blocks.append(CAk)
        if i < n - 1:
            markov.append(CAk @ sys.B)
        CAk = CAk @ sys.A
    Cn = np.vstack(Cn_blocks) if n else np.zeros((0, 0))
    Dn = np.zeros((n * l, n * m))
    for i in range(n):
        for j in range(i + 1):
            Dn[i * l:(i + 1) * l, j * m:(j + 1) * m] = markov[i - j]
    In = np.hstack([np.eye(m), np.zeros((m, (n - 1) * m))]) if n else np.zeros((m, 0))
    return BlockMatrices(_frozen(Cn), _frozen(Dn), _frozen(In))


def freqresp(sys, z):
    """``C (zI - A)^-1 B + D`` for every point of ``z`` (any shape)."""
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.empty((flat.size, sys.l, sys.m), dtype=complex)
    n = sys.n
    if n == 0:
        out[:] = sys.D
        return out.reshape(z.shape + (sys.l, sys.m))
    eye = np.eye(n)
    chunk = 65536
    for s in range(0, flat.size, chunk):
        zz = flat[s:s + chunk]
        R = zz[:, None, None] * eye - sys.A
        X = np.linalg.solve(R, np.broadcast_to(sys.B, (zz.size, n, sys.m)))
        out[s:s + chunk] = sys.C @ X + sys.D
    return out.reshape(z.shape + (sys.l, sys.m))


def unit_circle_grid(grid_points):
    """Half grid ``theta_j = 2 pi j / N`` for ``0 <= j <= N/2``.

    Real systems have conjugate-symmetric responses, so the upper half adds
    nothing. Refining ``N`` by an integer factor keeps every old point.
    """
    j = np.arange(grid_points // 2 + 1)
    return np.exp(2j * np.pi * j / grid_points)


def max_singular_values(G):
    """Largest singular value of each matrix in a stack ``(..., l, m)``."""
    if G.shape[-1] == 1 or G.shape[-2] == 1:
        return np.sqrt(np.sum(np.abs(G) ** 2, axis=(-2, -1)))
    return np.linalg.svd(G, compute_uv=False)[..., 0]


def hinf_norm_grid(sys, grid_points=GRID_POINTS, tol=UC_TOL):
    """Grid estimate of the H-infinity norm.

    This is the maximum of ``sigma_max(G(e^{i theta}))`` over a uniform grid,
    which is a lower bound on the true norm. The gap closes as the grid is
    refined.
    """
    if sys.n and np.any(np.abs(np.abs(sys.poles()) - 1.0) <= tol):
        raise NormUndefinedError("pole on the unit circle")
    if sys.m == 0 or sys.l == 0:
        return 0.0
    G = freqresp(sys, unit_circle_grid(grid_points))
    return float(np.max(max_singular_values(G)))


def state_path(sys):
    """The map ``u -> x``, i.e. ``(zI - A)^-1 B`` as a StateSpace."""
    return StateSpace(sys.A, sys.B, np.eye(sys.n), np.zeros((sys.n, sys.m)))
