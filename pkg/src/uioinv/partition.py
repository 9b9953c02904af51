"""MP/NMP state split and the zero dynamics of the NMP states.

``M = L T1`` with ``T1`` orthogonal and ``L = [Mq 0]`` lower triangular. In
the coordinates ``x1 = T1 x`` the first ``q`` states are recovered by the
observer. The remaining ``n - q`` states obey an unstable recursion driven by
the MP states (B1 path) or by the MP states and the output (D path).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotReconstructibleError, RankLossError, SingularZeroDynamicsError
from .lti import RANK_TOL, StateSpace, _frozen, column_rank, has_full_column_rank, pinv

B1_PATH = "B1"
D_PATH = "D"


@dataclass(frozen=True)
class PartitionedRealization:
    """The plant in MP/NMP coordinates ``x1 = T1 x``.

    Attributes
    ----------
    T1 : ndarray, shape (n, n)
        Orthogonal similarity.
    L : ndarray, shape (q, n)
        ``[Mq 0]``.
    Mq : ndarray, shape (q, q)
        Invertible lower-triangular factor, ``eta = Mq x1_mp``.
    A11, A12, A21, A22, B1, B2, C1, C2, D : ndarray
        Blocks of the transformed realization.
    """

    T1: np.ndarray
    L: np.ndarray
    Mq: np.ndarray
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def q(self):
        return self.Mq.shape[0]

    @property
    def n(self):
        return self.T1.shape[0]

    @property
    def A(self):
        return np.block([[self.A11, self.A12], [self.A21, self.A22]])

    @property
    def B(self):
        return np.vstack([self.B1, self.B2])

    @property
    def C(self):
        return np.hstack([self.C1, self.C2])

    def system(self):
        """``(A1, B1, C1, D)`` as a StateSpace."""
        return StateSpace(self.A, self.B, self.C, self.D)


@dataclass(frozen=True)
class ZeroDynamics:
    """Backward-stable form of the NMP-state recursion.

    ``x2(j+1) = Az x2(j) + Bz Theta(j)`` and, inverted,
    ``x2(j) = Az_inv x2(j+1) - Bz_tilde Theta(j)``, where
    ``Theta(j) = [x1(j+1); x1(j)]`` on the B1 path and ``[x1(j); y(j)]`` on
    the D path.
    """

    path: str
    Az: np.ndarray
    Bz: np.ndarray
    Az_inv: np.ndarray
    Bz_tilde: np.ndarray
    Cz1: np.ndarray = None
    Cz2: np.ndarray = None

    def __post_init__(self):
        for name in ("Az", "Bz", "Az_inv", "Bz_tilde"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("Cz1", "Cz2"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def order(self):
        return self.Az.shape[0]

    @property
    def is_empty(self):
        return self.order == 0

    @classmethod
    def empty(cls, q, l, path=B1_PATH):
        width = 2 * q if path == B1_PATH else q + l
        z = np.zeros((0, 0))
        return cls(path, z, np.zeros((0, width)), z, np.zeros((0, width)))


@dataclass(frozen=True)
class ZeroDynamicsReport:
    eigenvalue_distance: float
    cz2_norm: float = None


def partition_states(g, sys, rank_tol=RANK_TOL):
    """Split the state with a complete QR factorization of ``M^T``.

    ``M^T = Q R`` gives ``M = R^T Q^T``, so ``T1 = Q^T`` and ``L = R^T``.
    Signs are fixed so that ``diag(Mq) > 0`` and each NMP direction has its
    largest-magnitude entry positive.
    """
    M = np.asarray(g.M, dtype=float)
    q, n = M.shape
    Q, R = sla.qr(M.T, mode="full")
    T1 = Q.T
    L = R.T
    signs = np.ones(n)
    d = np.diag(L[:, :q])
    signs[:q] = np.where(d < 0, -1.0, 1.0)
    for i in range(q, n):
        row = T1[i]
        signs[i] = 1.0 if row[np.argmax(np.abs(row))] > 0 else -1.0
    T1 = signs[:, None] * T1
    L = L * signs[None, :]
    Mq = L[:, :q]
    if q == 0 or column_rank(Mq, rank_tol) < q:
        raise RankLossError("Mq is numerically singular; M is not full row rank")

    A1 = T1 @ sys.A @ T1.T
    B1 = T1 @ sys.B
    C1 = sys.C @ T1.T
    return PartitionedRealization(
        T1=T1, L=L, Mq=Mq,
        A11=A1[:q, :q], A12=A1[:q, q:], A21=A1[q:, :q], A22=A1[q:, q:],
        B1=B1[:q], B2=B1[q:], C1=C1[:, :q], C2=C1[:, q:], D=sys.D,
    )


def choose_path(pr, rank_tol=RANK_TOL):
    if has_full_column_rank(pr.B1, rank_tol):
        return B1_PATH
    if has_full_column_rank(pr.D, rank_tol):
        return D_PATH
    raise NotReconstructibleError(
        "neither B1 nor D has full column rank; NMP states and input cannot be recovered")


def zero_dynamics(pr, zc=None, rank_tol=RANK_TOL, path=None):
    """NMP-state recursion on the B1 path or the D path.

    Parameters
    ----------
    pr : PartitionedRealization
    zc : ZeroClassification, optional
        Only used for a sanity check on the order of the dynamics.
    rank_tol : float
    path : {"B1", "D", None}
        Force a path. ``None`` picks B1 when it has full column rank and
        falls back to D.

    Returns
    -------
    ZeroDynamics
        Empty when ``q = n``.
    """
    q, n, l = pr.q, pr.n, pr.D.shape[0]
    if path is None:
        path = choose_path(pr, rank_tol)
    elif path == B1_PATH and not has_full_column_rank(pr.B1, rank_tol):
        raise NotReconstructibleError("B1 is not full column rank")
    elif path == D_PATH and not has_full_column_rank(pr.D, rank_tol):
        raise NotReconstructibleError("D is not full column rank")
    elif path not in (B1_PATH, D_PATH):
        raise ValueError(f"unknown path {path!r}")
    if q == n:
        return ZeroDynamics.empty(q, l, path)
    if zc is not None and zc.beta != n - q:
        raise RankLossError(f"{zc.beta} NMP zeros but {n - q} NMP states")

    Cz1 = Cz2 = None
    if path == B1_PATH:
        B1p = pinv(pr.B1, rank_tol)
        Az = pr.A22 - pr.B2 @ B1p @ pr.A12
        Bz = np.hstack([pr.B2 @ B1p, pr.A21 - pr.B2 @ B1p @ pr.A11])
        Cz2 = pr.C2 - pr.D @ B1p @ pr.A12
        Cz1 = np.hstack([pr.D @ B1p, pr.C1 - pr.D @ B1p @ pr.A11])
    else:
        Dp = pinv(pr.D, rank_tol)
        Az = pr.A22 - pr.B2 @ Dp @ pr.C2
        Bz = np.hstack([pr.A21 - pr.B2 @ Dp @ pr.C1, pr.B2 @ Dp])

    if column_rank(Az, rank_tol) < Az.shape[0]:
        raise SingularZeroDynamicsError(
            "zero dynamics matrix is singular; a zero at the origin leaked into the NMP block")
    Az_inv = np.linalg.inv(Az)
    return ZeroDynamics(path, Az, Bz, Az_inv, Az_inv @ Bz, Cz1, Cz2)


def _multiset_distance(a, b):
    """Greedy matching distance between two multisets of complex numbers."""
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    if len(a) != len(b):
        return np.inf
    worst = 0.0
    for v in a:
        j = int(np.argmin([abs(v - w) for w in b]))
        worst = max(worst, abs(v - b[j]))
        b.pop(j)
    return worst


def verify_zero_dynamics(zd, zc):
    """Distance between ``eig(Az)`` and the NMP zeros, plus ``||Cz2||``."""
    eig = np.linalg.eigvals(zd.Az) if zd.order else np.zeros(0)
    dist = _multiset_distance(eig, zc.nmp_zeros)
    cz2 = None if zd.Cz2 is None else float(np.linalg.norm(zd.Cz2))
    return ZeroDynamicsReport(float(dist), cz2)
