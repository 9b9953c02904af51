"""Runtime state and input reconstruction.

Index conventions, for measurements ``y(s), ..., y(K)``:

* ``run_uio`` gives ``x1_hat(j)`` for ``s <= j <= K - n + 2``, since
  ``x1_hat(j+1)`` needs the window ``Y(j) = [y(j); ...; y(j+n-1)]``;
* ``run_fir_nmp`` gives ``x2_hat(j)`` for ``s <= j <= K - n + 2 - n_d``;
* ``reconstruct_input`` gives ``u_hat(j)`` on the indices of ``x2_hat``.

Every trace carries its own time index, so a delayed estimate is compared
with the truth at the same index.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, InsufficientDataError
from .lti import (
    GRID_POINTS,
    RANK_TOL,
    SignalTrace,
    hinf_norm_grid,
    pinv,
    state_path,
    transmission_zeros,
)
from .observer import synthesize_uio
from .partition import B1_PATH, partition_states, zero_dynamics

ZERO = "zero"
WARM_START = "warm"


@dataclass(frozen=True)
class FirConfig:
    """Delay and initialisation policy of the NMP-state filter.

    ``init_policy`` is ``"zero"`` (the unknown future NMP state is replaced
    by 0) or ``"warm"`` (replaced by the previous estimate; the first window
    falls back to 0).
    """

    n_d: int
    init_policy: str = ZERO

    def __post_init__(self):
        if int(self.n_d) < 1:
            raise ValueError("n_d must be at least 1")
        if self.init_policy not in (ZERO, WARM_START):
            raise ValueError(f"unknown init policy {self.init_policy!r}")
        object.__setattr__(self, "n_d", int(self.n_d))


@dataclass(frozen=True)
class InverseDesign:
    """Steps 1 to 6 of the inversion procedure, done once per plant."""

    sys: object
    zeros: object
    gains: object
    partition: object
    zero_dyn: object

    @property
    def n(self):
        return self.sys.n


def design_inverse(sys, path=None, eps=1e-8, rank_tol=RANK_TOL):
    """Zeros, observer gains, partition and zero dynamics for ``sys``."""
    zc = transmission_zeros(sys)
    g = synthesize_uio(sys, zc, eps=eps, rank_tol=rank_tol)
    pr = partition_states(g, sys, rank_tol)
    zd = zero_dynamics(pr, zc, rank_tol, path=path)
    return InverseDesign(sys, zc, g, pr, zd)


@dataclass(frozen=True)
class ErrorReport:
    e_x2_bound: float
    e_u_gain: np.ndarray
    e_x2_trace: SignalTrace = None
    e_u_trace: SignalTrace = None


# -- online filters ---------------------------------------------------------

class UioFilter:
    """``eta(j+1) = A_hat eta(j) + F Y(j)`` with ``x1_hat = Mq^-1 eta``.

    Feed one stacked window ``Y(j)`` per call to ``step``.
    """

    def __init__(self, g, pr, eta0=None):
        self.A_hat = g.A_hat
        self.F = g.F
        self.Mq_inv = np.linalg.inv(pr.Mq)
        self.eta = np.zeros(g.q) if eta0 is None else np.array(eta0, dtype=float).reshape(-1)

    @property
    def x1_hat(self):
        return self.Mq_inv @ self.eta

    def step(self, Y):
        self.eta = self.A_hat @ self.eta + self.F @ np.asarray(Y, dtype=float).reshape(-1)
        return self.x1_hat


class FirNmpFilter:
    """Sliding-window version of the anticausal NMP-state filter.

    Push ``Theta(j)`` in index order; once ``Theta(j), ..., Theta(j+n_d-1)``
    are buffered, ``push`` returns ``x2_hat(j)``.
    """

    def __init__(self, zd, cfg):
        self.cfg = cfg
        self.Apow = np.linalg.matrix_power(zd.Az_inv, cfg.n_d) if zd.order else zd.Az_inv
        self.gains = _fir_taps(zd, cfg.n_d)
        self.buffer = deque(maxlen=cfg.n_d)
        self.last = None

    def push(self, theta):
        self.buffer.append(np.asarray(theta, dtype=float))
        if len(self.buffer) < self.cfg.n_d:
            return None
        x_bar = self.last if (self.cfg.init_policy == WARM_START and self.last is not None) \
            else np.zeros(self.Apow.shape[0])
        acc = self.Apow @ x_bar
        for G, th in zip(self.gains, self.buffer):
            acc = acc - G @ th
        self.last = acc
        return acc


def _fir_taps(zd, n_d):
    """``[Az_inv^i Bz_tilde for i in range(n_d)]``."""
    taps = []
    G = zd.Bz_tilde
    for _ in range(n_d):
        taps.append(G)
        G = zd.Az_inv @ G
    return taps


# -- batch operations -------------------------------------------------------

def stacked_windows(y, n):
    """Rows ``Y(j) = [y(j); ...; y(j+n-1)]`` for every full window."""
    Y = y.samples
    count = len(y) - n + 1
    if count <= 0:
        return np.zeros((0, n * y.dim))
    return np.hstack([Y[i:i + count] for i in range(n)])


def run_uio(g, pr, y, eta0=None):
    """MP-state estimates from measured outputs.

    Parameters
    ----------
    g : ObserverGains
    pr : PartitionedRealization
    y : SignalTrace
        Outputs ``y(s), ..., y(K)``.
    eta0 : array_like, optional
        Observer state at index ``s``; zero by default.

    Returns
    -------
    SignalTrace
        ``x1_hat(j)`` for ``s <= j <= K - n + 2``.
    """
    n = pr.n
    if len(y) < n + 1:
        raise InsufficientDataError(f"need at least n + 1 = {n + 1} samples, got {len(y)}")
    if y.dim * n != g.F.shape[1]:
        raise AlignmentError(f"output dimension {y.dim} does not match the gains")
    windows = stacked_windows(y, n)
    filt = UioFilter(g, pr, eta0)
    out = np.empty((len(windows) + 1, g.q))
    out[0] = filt.x1_hat
    for i, w in enumerate(windows):
        out[i + 1] = filt.step(w)
    return SignalTrace(y.start_index, out)


def theta_trace(zd, x1_hat, y=None):
    """``Theta(j)`` for every index where it can be formed.

    B1 path: ``[x1(j+1); x1(j)]``. D path: ``[x1(j); y(j)]``.
    """
    if zd.path == B1_PATH:
        X = x1_hat.samples
        return SignalTrace(x1_hat.start_index, np.hstack([X[1:], X[:-1]]))
    if y is None:
        raise AlignmentError("the D path needs the measured output")
    k0 = max(x1_hat.start_index, y.start_index)
    k1 = min(x1_hat.stop_index, y.stop_index)
    if k1 <= k0:
        raise AlignmentError("MP-state and output traces do not overlap")
    return SignalTrace(k0, np.hstack([x1_hat.window(k0, k1).samples,
                                      y.window(k0, k1).samples]))


def fir_from_theta(zd, theta, cfg, x_bar=None, last=None):
    """Telescoped filter ``x2_hat(j) = Az_inv^nd x_bar(j) - sum_i Az_inv^i Bz_tilde Theta(j+i)``.

    ``x_bar`` may be a SignalTrace whose entry at ``j`` stands in for
    ``x2(j + n_d)``; it overrides the init policy. ``last`` forces the last emitted index.
    """
    nd = cfg.n_d
    if last is None:
        last = theta.stop_index - nd
    first = theta.start_index
    count = last - first + 1
    if count <= 0 or last + nd > theta.stop_index:
        raise InsufficientDataError(
            f"n_d = {nd} needs more data than the {len(theta)} available windows")
    T = theta.samples
    acc = np.zeros((count, zd.order))
    for i, G in enumerate(_fir_taps(zd, nd)):
        acc -= T[i:i + count] @ G.T
    Apow = np.linalg.matrix_power(zd.Az_inv, nd)
    if x_bar is not None:
        acc += x_bar.window(first, last + 1).samples @ Apow.T
    elif cfg.init_policy == WARM_START:
        for i in range(1, count):
            acc[i] += Apow @ acc[i - 1]
    return SignalTrace(first, acc)


def run_fir_nmp(zd, x1_hat, y, cfg, x_bar=None):
    """NMP-state estimates, ``n + n_d - 2`` samples behind the newest measurement.

    Parameters
    ----------
    zd : ZeroDynamics
    x1_hat : SignalTrace
        Output of ``run_uio``.
    y : SignalTrace
        The measurements ``x1_hat`` was computed from (used on the D path).
    cfg : FirConfig
    x_bar : SignalTrace, optional
        Explicit stand-ins for the unknown ``x2(j + n_d)``, indexed by ``j``.

    Returns
    -------
    SignalTrace
        ``x2_hat(j)`` for ``s <= j <= K - n + 2 - n_d``.
    """
    last = x1_hat.stop_index - 1 - cfg.n_d
    if last < x1_hat.start_index:
        raise InsufficientDataError(
            f"n_d = {cfg.n_d} exceeds the available trace of {len(y)} samples")
    if zd.is_empty:
        return SignalTrace(x1_hat.start_index, np.zeros((last - x1_hat.start_index + 1, 0)))
    theta = theta_trace(zd, x1_hat, y)
    return fir_from_theta(zd, theta, cfg, x_bar=x_bar, last=last)


def reconstruct_input(pr, zd, x1_hat, x2_hat, y=None, rank_tol=RANK_TOL):
    """Input estimates on the indices of ``x2_hat``.

    B1 path: ``u = B1^+ (x1(j+1) - A11 x1(j) - A12 x2(j))``.
    D path: ``u = D^+ (y(j) - C1 x1(j) - C2 x2(j))``.
    """
    j0, j1 = x2_hat.start_index, x2_hat.stop_index
    if zd.path == B1_PATH:
        if j0 < x1_hat.start_index or j1 + 1 > x1_hat.stop_index:
            raise AlignmentError("x1_hat must cover the x2_hat indices plus one")
        X1 = x1_hat.window(j0, j1 + 1).samples
        rhs = X1[1:] - X1[:-1] @ pr.A11.T - x2_hat.samples @ pr.A12.T
        return SignalTrace(j0, rhs @ pinv(pr.B1, rank_tol).T)
    if y is None:
        raise AlignmentError("the D path needs the measured output")
    if j0 < max(x1_hat.start_index, y.start_index) or \
            j1 > min(x1_hat.stop_index, y.stop_index):
        raise AlignmentError("x1_hat and y must cover the x2_hat indices")
    rhs = (y.window(j0, j1).samples - x1_hat.window(j0, j1).samples @ pr.C1.T
           - x2_hat.samples @ pr.C2.T)
    return SignalTrace(j0, rhs @ pinv(pr.D, rank_tol).T)


def nmp_error_bound(zd, sys1, n_d, grid_points=GRID_POINTS):
    """``sigma_max(Az_inv^n_d) * ||(zI - A1)^-1 B1||_inf``.

    Valid for the zero init policy, zero initial state and unit-energy input.
    ``sys1`` may be the plant in either coordinate system; the state-path
    norm is invariant under the orthogonal change of basis.
    """
    if zd.is_empty:
        return 0.0
    return decay_factor(zd, n_d) * hinf_norm_grid(state_path(sys1), grid_points)


def decay_factor(zd, n_d):
    """``sigma_max(Az_inv^n_d)``."""
    if zd.is_empty:
        return 0.0
    return float(np.linalg.norm(np.linalg.matrix_power(zd.Az_inv, n_d), 2))


def input_error_gain(pr, zd, rank_tol=RANK_TOL):
    """Gain ``-B1^+ A12`` (B1 path) or ``-D^+ C2`` (D path).

    The returned matrix maps the NMP-state error ``x2 - x2_hat`` to the input
    error ``u - u_hat`` (equivalently ``x2_hat - x2`` to ``u_hat - u``).
    """
    if zd.path == B1_PATH:
        return -pinv(pr.B1, rank_tol) @ pr.A12
    return -pinv(pr.D, rank_tol) @ pr.C2


@dataclass(frozen=True)
class Reconstruction:
    x1_hat: SignalTrace
    x2_hat: SignalTrace
    u_hat: SignalTrace

    def state_estimate(self, pr):
        """Full state estimate ``T1^T [x1_hat; x2_hat]`` in plant coordinates."""
        j0, j1 = self.x2_hat.start_index, self.x2_hat.stop_index
        X = np.hstack([self.x1_hat.window(j0, j1).samples, self.x2_hat.samples])
        return SignalTrace(j0, X @ pr.T1)


def reconstruct(design, y, cfg, eta0=None):
    """Full pipeline on measured outputs: MP states, NMP states, input."""
    x1 = run_uio(design.gains, design.partition, y, eta0)
    x2 = run_fir_nmp(design.zero_dyn, x1, y, cfg)
    u = reconstruct_input(design.partition, design.zero_dyn, x1, x2, y)
    return Reconstruction(x1, x2, u)


def error_report(design, cfg, truth_x=None, truth_u=None, recon=None,
                 grid_points=GRID_POINTS):
    """Bound and gain, plus measured error traces when the truth is known.

    ``truth_x`` holds plant-coordinate states. Errors follow the usual sign
    conventions: ``e_x2 = x2 - x2_hat`` and ``e_u = u_hat - u``.
    """
    bound = nmp_error_bound(design.zero_dyn, design.sys, cfg.n_d, grid_points)
    gain = input_error_gain(design.partition, design.zero_dyn)
    ex2 = eu = None
    if recon is not None and truth_x is not None:
        q = design.partition.q
        X1 = SignalTrace(truth_x.start_index, truth_x.samples @ design.partition.T1.T)
        x2 = SignalTrace(X1.start_index, X1.samples[:, q:])
        ex2 = x2 - recon.x2_hat
    if recon is not None and truth_u is not None:
        eu = recon.u_hat - truth_u
    return ErrorReport(bound, gain, ex2, eu)
