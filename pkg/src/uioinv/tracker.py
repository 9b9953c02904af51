"""Preview-based inversion for output tracking.

The desired trajectory plays the role of the measurement: the observer and
the NMP-state filter run on ``y_d`` and the reconstructed input is applied
to the plant. With ``n + n_d`` samples of preview the input at step ``k``
only needs ``y_d(k), ..., y_d(k + n + n_d)``.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, PreviewExhaustedError
from .estimator import WARM_START, ZERO, FirConfig, FirNmpFilter, UioFilter, decay_factor, input_error_gain
from .lti import GRID_POINTS, RANK_TOL, SignalTrace, hinf_norm_grid, pinv, simulate, state_path
from .partition import B1_PATH


@dataclass(frozen=True)
class TrackingConfig:
    """Settings of a tracking run.

    Attributes
    ----------
    n_d : int
        Delay of the NMP-state filter.
    init_policy : {"zero", "warm"}
    x0_plant : array_like, optional
        Plant initial state; zero when omitted.
    preview : int, optional
        Samples of look-ahead available; defaults to ``n + n_d`` and must not
        be smaller.
    """

    n_d: int
    init_policy: str = ZERO
    x0_plant: tuple = None
    preview: int = None

    def __post_init__(self):
        FirConfig(self.n_d, self.init_policy)
        if self.x0_plant is not None:
            object.__setattr__(self, "x0_plant", tuple(np.ravel(self.x0_plant).astype(float)))

    def fir(self):
        return FirConfig(self.n_d, self.init_policy)

    def preview_for(self, n):
        p = n + self.n_d if self.preview is None else int(self.preview)
        if p < n + self.n_d:
            raise PreviewExhaustedError(f"preview {p} is shorter than n + n_d = {n + self.n_d}")
        return p


class OutputTracker:
    """Online tracking loop.

    Call ``push`` with one desired-output sample at a time. Whenever enough
    look-ahead has accumulated, ``push`` returns ``(k, u_hat(k))``;
    otherwise it returns ``None``.
    """

    def __init__(self, g, pr, zd, cfg, start_index=0, rank_tol=RANK_TOL):
        self.pr, self.zd, self.cfg = pr, zd, cfg
        self.n = pr.n
        self.uio = UioFilter(g, pr)
        self.fir = FirNmpFilter(zd, cfg.fir()) if not zd.is_empty else None
        self.path = zd.path
        self.Bp = pinv(pr.B1, rank_tol) if self.path == B1_PATH else pinv(pr.D, rank_tol)
        self.window = deque(maxlen=self.n)
        self.x1 = {start_index: self.uio.x1_hat}
        self.yd = {}
        self.next_window = start_index
        self.next_theta = start_index
        self.next_out = start_index
        self.received = start_index

    def push(self, y_sample):
        k = self.received
        self.received += 1
        y_sample = np.asarray(y_sample, dtype=float).reshape(-1)
        self.yd[k] = y_sample
        self.window.append(y_sample)
        if len(self.window) == self.n:
            j = self.next_window
            self.x1[j + 1] = self.uio.step(np.concatenate(self.window))
            self.next_window += 1
        return self._advance()

    def _theta_ready(self, j):
        if self.path == B1_PATH:
            return j + 1 in self.x1
        return j in self.x1 and j in self.yd

    def _theta(self, j):
        if self.path == B1_PATH:
            return np.concatenate([self.x1[j + 1], self.x1[j]])
        return np.concatenate([self.x1[j], self.yd[j]])

    def _advance(self):
        x2 = None
        if self.fir is None:
            ready = self._theta_ready(self.next_out)
            if not ready:
                return None
            x2 = np.zeros(0)
        else:
            while self._theta_ready(self.next_theta):
                x2_new = self.fir.push(self._theta(self.next_theta))
                self.next_theta += 1
                if x2_new is not None:
                    x2 = x2_new
                    break
            if x2 is None:
                return None
        k = self.next_out
        self.next_out += 1
        u = self._input(k, x2)
        self._forget(k)
        return k, u

    def _input(self, k, x2):
        pr = self.pr
        if self.path == B1_PATH:
            rhs = self.x1[k + 1] - pr.A11 @ self.x1[k] - pr.A12 @ x2
        else:
            rhs = self.yd[k] - pr.C1 @ self.x1[k] - pr.C2 @ x2
        return self.Bp @ rhs

    def _forget(self, k):
        self.x1.pop(k - 1, None)
        self.yd.pop(k - 1, None)


@dataclass(frozen=True)
class TrackingResult:
    u_hat: SignalTrace
    y_actual: SignalTrace
    e_y: SignalTrace


def track(sys, g, pr, zd, y_d, cfg):
    """Run the tracking loop over a whole desired trajectory.

    Parameters
    ----------
    sys : StateSpace
        The plant, used for the closing simulation.
    g, pr, zd : ObserverGains, PartitionedRealization, ZeroDynamics
    y_d : SignalTrace
        Desired output ``y_d(s), ..., y_d(N-1)``.
    cfg : TrackingConfig

    Returns
    -------
    TrackingResult
        ``u_hat(k)`` for ``s <= k <= N - 1 - preview``, the plant output under
        that input and ``e_y = y - y_d``.
    """
    if y_d.dim != sys.l:
        raise AlignmentError(f"desired output has dimension {y_d.dim}, expected {sys.l}")
    preview = cfg.preview_for(sys.n)
    last = y_d.stop_index - 1 - preview
    if last < y_d.start_index:
        raise PreviewExhaustedError(
            f"{len(y_d)} samples cannot cover a preview of {preview} steps")
    tracker = OutputTracker(g, pr, zd, cfg, y_d.start_index)
    u = []
    for sample in y_d.samples:
        out = tracker.push(sample)
        if out is not None and out[0] <= last:
            u.append(out[1])
    u_hat = SignalTrace(y_d.start_index, np.array(u).reshape(len(u), sys.m))
    x0 = np.zeros(sys.n) if cfg.x0_plant is None else np.array(cfg.x0_plant)
    _, y = simulate(sys, x0, u_hat)
    return TrackingResult(u_hat, y, y - y_d)


def track_design(design, y_d, cfg):
    return track(design.sys, design.gains, design.partition, design.zero_dyn, y_d, cfg)


def tracking_error_bound(sys, pr, zd, n_d, grid_points=GRID_POINTS):
    """``sigma_max(Az_inv^n_d) ||G||_inf ||gain||_2 ||(zI - A1)^-1 B1||_inf``."""
    if zd.is_empty:
        return 0.0
    gain = np.linalg.norm(input_error_gain(pr, zd), 2)
    return (decay_factor(zd, n_d) * hinf_norm_grid(sys, grid_points) * gain
            * hinf_norm_grid(state_path(sys), grid_points))


__all__ = ["TrackingConfig", "OutputTracker", "TrackingResult", "track", "track_design",
           "tracking_error_bound", "WARM_START", "ZERO"]
