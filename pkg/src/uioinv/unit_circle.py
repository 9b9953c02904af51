"""Tracking for SISO plants with zeros on the unit circle.

The unit-circle factors are split off the plant, ``G(z) = f(z) G'(z)``, and
the inversion pipeline is designed for ``G'``. Its inverse would need the
pole ``1/f(z)``, which never decays, so a controller ``H(z) = f(z) H'(z)``
cancels it and only the stable ``H'(z)`` is ever simulated. The price is the
tracking error ``E_c = G' T (1 - H) Y_d``, where ``T`` is the inversion
pipeline of ``G'``.

Polynomials are coefficient arrays, highest power of ``z`` first.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import (
    ImproperFilterError,
    InvalidControllerError,
    NotMinimumPhaseFactorError,
    UnsupportedSystemError,
)
from .estimator import design_inverse
from .lti import GRID_POINTS, UC_TOL, SignalTrace, StateSpace, simulate, transmission_zeros, unit_circle_grid
from .partition import B1_PATH
from .tracker import track_design

CANCEL_TOL = 1e-8


@dataclass(frozen=True)
class SisoFactorization:
    """``G(z) = prod(uc_factors) * G'(z)``.

    Attributes
    ----------
    original : StateSpace
    reduced : StateSpace
        Realization of ``G'`` in controllable canonical form.
    uc_factors : tuple of ndarray
        Real factors: ``[1, -z0]`` for a real zero, ``[1, -2 cos w, 1]`` for
        a conjugate pair.
    gain : float
        Leading coefficient of ``G``, i.e. its first nonzero Markov parameter.
    """

    original: StateSpace
    reduced: StateSpace
    uc_factors: tuple
    gain: float

    @property
    def uc_polynomial(self):
        p = np.array([1.0])
        for f in self.uc_factors:
            p = np.polymul(p, f)
        return p


@dataclass(frozen=True)
class Controller:
    """SISO controller ``H(z) = numerator(z) / denominator(z)``."""

    numerator: tuple
    denominator: tuple = field(default=(1.0,))

    def __post_init__(self):
        num = np.trim_zeros(np.atleast_1d(np.asarray(self.numerator, dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(self.denominator, dtype=float)), "f")
        if len(den) == 0:
            raise InvalidControllerError("controller denominator is zero")
        object.__setattr__(self, "numerator", tuple(num))
        object.__setattr__(self, "denominator", tuple(den))

    @property
    def n_c(self):
        return len(self.denominator) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.polyval(self.numerator, z) / np.polyval(self.denominator, z)

    def reduced(self, uc_poly):
        """``H'(z) = H(z) / uc_poly(z)`` as a new Controller."""
        quot, rem = np.polydiv(np.array(self.numerator), np.asarray(uc_poly, dtype=float))
        scale = max(1.0, np.abs(self.numerator).max())
        if rem.size and np.abs(rem).max() > CANCEL_TOL * scale:
            raise InvalidControllerError(
                f"controller numerator is not divisible by {np.asarray(uc_poly)}; remainder {rem}")
        return Controller(quot if quot.size else [0.0], self.denominator)

    def is_proper(self):
        return len(self.numerator) <= len(self.denominator)

    def poles(self):
        return np.roots(self.denominator)


DEFAULT_CONTROLLER = Controller([1.0, 1.0], [2.0, 0.0])
IDENTITY = Controller([1.0], [1.0])


def _markov_gain(sys):
    """First nonzero Markov parameter ``D, CB, CAB, ...``."""
    scale = max(1.0, np.abs(sys.A).max(), np.abs(sys.B).max(), np.abs(sys.C).max())
    h = sys.D[0, 0]
    if abs(h) > 1e-12 * scale:
        return float(h)
    v = sys.B
    for _ in range(sys.n):
        h = (sys.C @ v)[0, 0]
        if abs(h) > 1e-12 * scale:
            return float(h)
        v = sys.A @ v
    raise UnsupportedSystemError("transfer function is identically zero")


def _real_factors(zs):
    """Group unit-circle zeros into real polynomial factors."""
    factors = []
    for z in zs:
        if abs(z.imag) <= 1e-9:
            factors.append(np.array([1.0, -z.real]))
        elif z.imag > 0:
            factors.append(np.array([1.0, -2.0 * z.real, abs(z) ** 2]))
    return tuple(factors)


def _cancel_common(zeros, poles, tol):
    zeros, poles = list(zeros), list(poles)
    kept = []
    for z in zeros:
        d = [abs(z - p) for p in poles]
        if d and min(d) <= tol * max(1.0, abs(z)):
            poles.pop(int(np.argmin(d)))
        else:
            kept.append(z)
    return np.array(kept, dtype=complex), np.array(poles, dtype=complex)


def factor_unit_circle_zeros(sys, tol=UC_TOL):
    """Split the unit-circle zeros off a SISO plant.

    The reduced plant keeps every pole of ``G``; removing the factors only
    lowers the numerator degree, so ``G'`` is strictly proper of the same
    order whenever a factor is removed.
    """
    if sys.m != 1 or sys.l != 1:
        raise UnsupportedSystemError("unit-circle factoring is SISO only")
    zc = transmission_zeros(sys, tol)
    if len(zc.unit_circle_zeros) == 0:
        return SisoFactorization(sys, sys, (), _markov_gain(sys))
    gain = _markov_gain(sys)
    keep = np.concatenate([zc.mp_zeros, zc.nmp_zeros])
    zeros, poles = _cancel_common(keep, sys.poles(), 1e-6)
    num = np.real(gain * np.poly(zeros)) if len(zeros) else np.array([gain])
    den = np.real(np.poly(poles)) if len(poles) else np.array([1.0])
    reduced = StateSpace.from_tf(num, den)
    reduced.require_minimal()
    return SisoFactorization(sys, reduced, _real_factors(zc.unit_circle_zeros), gain)


def prefilter_desired(y_d, ctl, uc_factors=((1.0, 1.0),)):
    """Filter ``y_d`` through ``H'(z) = H(z) / prod(uc_factors)``.

    Zero initial conditions; the output keeps the indices of ``y_d``.
    """
    uc = np.array([1.0])
    for f in uc_factors:
        uc = np.polymul(uc, f)
    h = ctl.reduced(uc)
    if not h.is_proper():
        raise ImproperFilterError(
            f"H'(z) has numerator degree {len(h.numerator) - 1} above its "
            f"denominator degree {h.n_c}")
    a = np.array(h.denominator)
    b = np.concatenate([np.zeros(len(a) - len(h.numerator)), h.numerator])
    out = signal.lfilter(b, a, y_d.samples, axis=0)
    return SignalTrace(y_d.start_index, out)


@dataclass(frozen=True)
class UnitCircleResult:
    """Outputs of a unit-circle tracking run.

    ``u_tilde`` is applied to the original plant, giving ``y_actual``.
    ``e_c = y_hat - y_tilde`` compares the reduced plant under the
    uncompensated inverse with the original plant under ``u_tilde``.
    """

    u_tilde: SignalTrace
    y_actual: SignalTrace
    e_c: SignalTrace
    e_y: SignalTrace
    u_hat: SignalTrace


def track_with_unit_circle(fact, ctl, y_d, cfg, design=None):
    """Inversion-based tracking through the unit-circle controller."""
    if design is None:
        design = design_inverse(fact.reduced)
    filtered = prefilter_desired(y_d, ctl, fact.uc_factors)
    u_tilde = track_design(design, filtered, cfg).u_hat
    x0 = np.zeros(fact.original.n) if cfg.x0_plant is None else np.array(cfg.x0_plant)
    _, y_actual = simulate(fact.original, x0, u_tilde)

    u_hat = track_design(design, y_d, cfg).u_hat
    _, y_hat = simulate(fact.reduced, np.zeros(fact.reduced.n), u_hat)
    _, y_tilde = simulate(fact.original, np.zeros(fact.original.n), u_tilde)
    return UnitCircleResult(u_tilde, y_actual, y_hat - y_tilde, y_actual - y_d, u_hat)


def controller_mismatch_norm(ctl, grid_points=GRID_POINTS):
    """``max |1 - H(e^{i theta})|`` over the unit-circle grid."""
    z = unit_circle_grid(grid_points)
    return float(np.max(np.abs(1.0 - ctl(z))))


def repeated_mp_prefilter(y_d, p, y0=0.0):
    """``y'(k+1) = p y'(k) + y_d(k)`` with ``y'(s) = y0``.

    Realizes ``Y'_d(z) = Y_d(z) / (z - p)`` for a repeated stable factor; the
    output has the indices of ``y_d``.
    """
    if abs(p) >= 1:
        raise NotMinimumPhaseFactorError(f"|p| = {abs(p)} is not inside the unit circle")
    Y = y_d.samples
    out = np.empty_like(Y)
    out[0] = y0
    if len(Y) > 1:
        zi = np.atleast_1d(p * np.asarray(y0, dtype=float) * np.ones(Y.shape[1]))
        rest = signal.lfilter([1.0], [1.0, -p], Y[:-1], axis=0, zi=zi[None, :])[0]
        out[1:] = rest
    return SignalTrace(y_d.start_index, out)


# -- frequency-domain description of the pipeline --------------------------

def tracker_response(design, z, n_d):
    """Frequency response of the zero-policy inversion pipeline ``y_d -> u_hat``.

    Returns an array of shape ``z.shape + (m, l)``. The pipeline is
    noncausal, so positive powers of ``z`` appear.
    """
    g, pr, zd = design.gains, design.partition, design.zero_dyn
    n, l = design.n, design.sys.l
    z = np.asarray(z, dtype=complex).reshape(-1)
    Mq_inv = np.linalg.inv(pr.Mq)
    q = g.q
    out = np.empty((z.size, design.sys.m, l), dtype=complex)
    for idx, zz in enumerate(z):
        ZM = np.vstack([zz ** i * np.eye(l) for i in range(n)])
        X1 = Mq_inv @ np.linalg.solve(zz * np.eye(q) - g.A_hat, g.F @ ZM)
        if zd.path == B1_PATH:
            theta = np.vstack([zz * X1, X1])
        else:
            theta = np.vstack([X1, np.eye(l)])
        X2 = np.zeros((zd.order, l), dtype=complex)
        if zd.order:
            G = zd.Bz_tilde.astype(complex)
            for i in range(n_d):
                X2 -= (zz ** i) * (G @ theta)
                G = zd.Az_inv @ G
        if zd.path == B1_PATH:
            rhs = zz * X1 - pr.A11 @ X1 - pr.A12 @ X2
            out[idx] = np.linalg.pinv(pr.B1) @ rhs
        else:
            rhs = np.eye(l) - pr.C1 @ X1 - pr.C2 @ X2
            out[idx] = np.linalg.pinv(pr.D) @ rhs
    return out


def error_chain_response(fact, design, ctl, z, n_d):
    """``G'(z) T(z) (1 - H(z))``, the map from ``y_d`` to ``e_c``."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    Gp = fact.reduced.transfer(z)[:, 0, 0]
    T = tracker_response(design, z, n_d)[:, 0, 0]
    return Gp * T * (1.0 - ctl(z))


def error_chain_poles(fact, design, ctl):
    """Poles of the realized error chain: ``G'``, the observer and ``H'``."""
    h = ctl.reduced(fact.uc_polynomial)
    return np.concatenate([fact.reduced.poles(), np.linalg.eigvals(design.gains.A_hat),
                           h.poles()])


def chain_bound(fact, design, ctl, y_d, n_d, grid_points=GRID_POINTS):
    """``||G' T||_inf * ||1 - H||_inf * ||y_d||_2``, a bound on ``sup |e_c|``."""
    z = unit_circle_grid(grid_points)
    Gp = fact.reduced.transfer(z)[:, 0, 0]
    T = tracker_response(design, z, n_d)[:, 0, 0]
    return float(np.max(np.abs(Gp * T)) * controller_mismatch_norm(ctl, grid_points)
                 * np.linalg.norm(y_d.samples))
