"""Unknown-input observer synthesis.

The observer runs on stacked output windows,

    eta(j+1) = A_hat eta(j) + F Y(j),   Y(j) = [y(j); ...; y(j+n-1)],

and tracks ``M x(j)`` for any input when

    (i)   A_hat is Schur stable,
    (ii)  A_hat M - M A + F Cn = 0,
    (iii) F Dn - M B In = 0.

Rows of ``M`` are built one target eigenvalue at a time. For a target
``lam`` a row ``m`` is admissible when ``m (Gamma - lam I)`` lies in the row
space of ``P = (I - Dn Dn^+) Cn`` and ``m B In`` lies in the row space of
``Dn``. The targets are the minimum-phase zeros plus ``n - p`` copies of the
origin, which are exactly the stable eigenvalues of ``Gamma``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AllNmpError, DegenerateZerosError, UnitCircleZeroError
from .lti import (
    RANK_TOL,
    _frozen,
    column_rank,
    left_null_space,
    pinv,
    spectral_radius,
    stack_block_matrices,
    transmission_zeros,
)

NULL_TOL = 1e-9
GROUP_TOL = 1e-6


@dataclass(frozen=True)
class ObserverGains:
    """Observer matrices ``(M, A_hat, F)``.

    Attributes
    ----------
    M : ndarray, shape (q, n)
        Observed combination of the state, unit-norm rows.
    A_hat : ndarray, shape (q, q)
        Observer dynamics; block diagonal in the target eigenvalues.
    F : ndarray, shape (q, n*l)
        Gain on the stacked output window.
    stable_eigs : ndarray
        Target eigenvalues used, one entry per row of ``M`` (complex pairs
        appear as both members).
    """

    M: np.ndarray
    A_hat: np.ndarray
    F: np.ndarray
    stable_eigs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", _frozen(self.M))
        object.__setattr__(self, "A_hat", _frozen(self.A_hat))
        object.__setattr__(self, "F", _frozen(self.F))
        eigs = np.array(self.stable_eigs, dtype=complex)
        eigs.setflags(write=False)
        object.__setattr__(self, "stable_eigs", eigs)

    @property
    def q(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class UioResiduals:
    spectral_radius: float
    sylvester: float
    decoupling: float

    def within(self, eps):
        return self.spectral_radius < 1 and self.sylvester <= eps and self.decoupling <= eps


def gamma_matrix(sys, rank_tol=RANK_TOL):
    """``Gamma = A - B In Dn^+ Cn``."""
    bm = stack_block_matrices(sys)
    return sys.A - sys.B @ bm.In_selector @ pinv(bm.Dn, rank_tol) @ bm.Cn


def verify_uio_conditions(g, sys):
    """Return ``(rho(A_hat), ||A_hat M - M A + F Cn||_F, ||F Dn - M B In||_F)``."""
    bm = stack_block_matrices(sys)
    r1 = spectral_radius(g.A_hat)
    r2 = np.linalg.norm(g.A_hat @ g.M - g.M @ sys.A + g.F @ bm.Cn)
    r3 = np.linalg.norm(g.F @ bm.Dn - g.M @ sys.B @ bm.In_selector)
    return UioResiduals(float(r1), float(r2), float(r3))


def _group_targets(values):
    """Cluster equal target values; returns ``[(value, multiplicity)]``.

    Only one member of each conjugate pair is kept (the one with positive
    imaginary part); its multiplicity counts pairs.
    """
    groups = []
    for v in values:
        if v.imag < 0:
            continue
        for i, (c, k) in enumerate(groups):
            if abs(c - v) <= GROUP_TOL * max(1.0, abs(v)):
                groups[i] = ((c * k + v) / (k + 1), k + 1)
                break
        else:
            groups.append((complex(v), 1))
    return groups


def _admissible_rows(Gm, BIn_ND, NP, lam):
    """Candidate rows for ``lam``, eigenvector-type rows first."""
    n = Gm.shape[0]
    shifted = Gm - lam * np.eye(n)
    # Gamma can vanish exactly, e.g. when C or D is invertible
    scale = max(1.0, np.linalg.norm(Gm, 2), abs(lam))
    direct = left_null_space(np.hstack([shifted, BIn_ND]), NULL_TOL, scale)
    general = left_null_space(np.hstack([shifted @ NP, BIn_ND]), NULL_TOL, scale)
    return list(direct) + list(general)


def _row_order_key(lam):
    return (-abs(lam), -lam.real, -lam.imag)


def synthesize_uio(sys, zc=None, eps=1e-8, rank_tol=RANK_TOL):
    """Build observer gains with ``rank(M) = n - beta``.

    Parameters
    ----------
    sys : StateSpace
        Square, minimal plant.
    zc : ZeroClassification, optional
        Zeros of ``sys``; computed when omitted.
    eps : float
        Tolerance on the residuals of conditions (ii) and (iii).
    rank_tol : float
        Relative tolerance for the pseudo-inverses.

    Returns
    -------
    ObserverGains

    Raises
    ------
    UnitCircleZeroError
        If any zero lies on the unit circle.
    AllNmpError
        If there is no stable target eigenvalue.
    DegenerateZerosError
        If ``n - beta`` independent rows cannot be found, typically because
        of a repeated minimum-phase zero.
    """
    sys.require_square()
    sys.require_minimal(rank_tol)
    if zc is None:
        zc = transmission_zeros(sys)
    if len(zc.unit_circle_zeros):
        raise UnitCircleZeroError(
            f"zeros on the unit circle: {zc.unit_circle_zeros}; factor them out first")
    n = sys.n
    targets = np.concatenate([zc.mp_zeros, np.zeros(zc.padding_count, complex)])
    if len(targets) == 0:
        raise AllNmpError("every transmission zero is non-minimum phase")
    q_target = n - zc.beta

    bm = stack_block_matrices(sys)
    Dp = pinv(bm.Dn, rank_tol)
    Gm = sys.A - sys.B @ bm.In_selector @ Dp @ bm.Cn
    P = (np.eye(bm.Dn.shape[0]) - bm.Dn @ Dp) @ bm.Cn
    NP = np.eye(n) - pinv(P, rank_tol) @ P
    BIn_ND = sys.B @ bm.In_selector @ (np.eye(bm.Dn.shape[1]) - Dp @ bm.Dn)

    rows, blocks, eigs = [], [], []

    def fits(new_rows):
        trial = np.array(rows + new_rows)
        return column_rank(trial.T, NULL_TOL) == len(trial)

    for lam, mult in sorted(_group_targets(targets), key=lambda t: _row_order_key(t[0])):
        real = abs(lam.imag) <= GROUP_TOL * max(1.0, abs(lam))
        lam = lam.real if real else lam
        taken = 0
        for v in _admissible_rows(Gm, BIn_ND, NP, lam):
            if taken == mult:
                break
            if real:
                if fits([v]):
                    rows.append(v)
                    blocks.append(np.array([[lam]]))
                    eigs.append(lam)
                    taken += 1
            else:
                pair = [v.real.copy(), v.imag.copy()]
                if fits(pair):
                    rows.extend(pair)
                    a, b = lam.real, lam.imag
                    blocks.append(np.array([[a, -b], [b, a]]))
                    eigs.extend([lam, lam.conjugate()])
                    taken += 1

    if len(rows) != q_target:
        raise DegenerateZerosError(
            f"reached rank {len(rows)} instead of n - beta = {q_target}; "
            "repeated minimum-phase zeros can be handled with repeated_mp_prefilter")

    M = np.array(rows)
    A_hat = _block_diag(blocks)
    K = (M @ Gm - A_hat @ M) @ pinv(P, rank_tol)
    F = M @ sys.B @ bm.In_selector @ Dp + K @ (np.eye(bm.Dn.shape[0]) - bm.Dn @ Dp)

    S = np.diag([_row_scale(r) for r in M])
    Si = np.diag(1.0 / np.diag(S))
    g = ObserverGains(S @ M, S @ A_hat @ Si, S @ F, np.array(eigs))

    res = verify_uio_conditions(g, sys)
    if not res.within(eps):
        raise DegenerateZerosError(
            f"observer residuals too large: {res}; the zero set is ill-conditioned")
    return g


def _row_scale(r):
    """Factor giving unit 2-norm with the largest-magnitude entry positive."""
    s = 1.0 / np.linalg.norm(r)
    return s if r[np.argmax(np.abs(r))] > 0 else -s


def normalize_rows(Mx):
    """Unit-norm rows, sign fixed so the largest-magnitude entry is positive."""
    Mx = np.asarray(Mx, dtype=float)
    return np.array([_row_scale(r) * r for r in Mx])


def _block_diag(blocks):
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out
