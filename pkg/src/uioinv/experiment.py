"""Config-driven experiment runner.

An ``ExperimentConfig`` names a plant, a mode and its parameters;
``run_experiment`` runs it, writes CSV traces and gain files into the output
directory and returns a ``RunReport`` that lists every file written. A run
passes when every check in the report passes.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import cases
from .errors import ConfigError, UioInvError
from .estimator import (
    WARM_START,
    ZERO,
    FirConfig,
    design_inverse,
    input_error_gain,
    nmp_error_bound,
    reconstruct,
)
from .fileio import emit_bound_curve, emit_csv, ensure_dir, write_matrix
from .lti import GRID_POINTS, RANK_TOL, UC_TOL, SignalTrace, StateSpace, simulate
from .observer import verify_uio_conditions
from .partition import B1_PATH, verify_zero_dynamics
from .tracker import TrackingConfig, track_design, tracking_error_bound
from .unit_circle import (
    DEFAULT_CONTROLLER,
    Controller,
    chain_bound,
    error_chain_poles,
    error_chain_response,
    factor_unit_circle_zeros,
    track_with_unit_circle,
)

MODES = ("synthesize", "reconstruct", "track", "track_uc", "bound_curve")
INPUTS = ("impulse", "step", "harmonic", "random_seeded")
TRAJECTORIES = ("square_wave", "smooth", "harmonic", "step", "random_seeded")
UC_PERIOD = 250
ORACLE_PAD = 256


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment. Keys of the config file map one-to-one onto fields."""

    mode: str
    A: list = None
    B: list = None
    C: list = None
    D: list = None
    zeros: list = None
    poles: list = None
    gain: float = None
    n_d: int = 10
    n_c: int = 1
    init_policy: str = ZERO
    input: str = "random_seeded"
    trajectory: str = None
    seed: int = None
    steps: int = 400
    x0: list = None
    path: str = None
    ts: float = 1e-4
    unit_energy: bool = True
    controller_num: list = None
    controller_den: list = None
    nd_max: int = 30
    output_dir: str = "out"
    eps: float = 1e-8
    rank_tol: float = RANK_TOL
    uc_tol: float = UC_TOL
    mp_tol: float = 1e-6
    rel_tol: float = None
    grid_points: int = GRID_POINTS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        has_ss = any(getattr(self, k) is not None for k in "ABCD")
        has_tf = any(getattr(self, k) is not None for k in ("zeros", "poles", "gain"))
        if has_ss == has_tf:
            raise ConfigError("give exactly one system source: A, B, C, D or zeros, poles, gain")
        if has_ss and any(getattr(self, k) is None for k in "ABCD"):
            raise ConfigError("matrix system source needs all of A, B, C, D")
        if has_tf and (self.poles is None or self.gain is None):
            raise ConfigError("transfer-function source needs zeros, poles and gain")
        if self.init_policy not in (ZERO, WARM_START):
            raise ConfigError(f"init_policy must be '{ZERO}' or '{WARM_START}'")
        if self.input not in INPUTS:
            raise ConfigError(f"input must be one of {INPUTS}")
        if self.trajectory is not None and self.trajectory not in TRAJECTORIES:
            raise ConfigError(f"trajectory must be one of {TRAJECTORIES}")
        needs_seed = (self.mode == "reconstruct" and self.input == "random_seeded") or \
            (self.mode in ("track", "track_uc") and self.trajectory == "random_seeded")
        if needs_seed and self.seed is None:
            raise ConfigError("seed is mandatory for random_seeded signals")
        if self.path not in (None, "B1", "D"):
            raise ConfigError("path must be B1 or D")
        if int(self.n_d) < 1 or int(self.steps) < 1 or int(self.nd_max) < 1:
            raise ConfigError("n_d, steps and nd_max must be positive")
        if (self.controller_num is None) != (self.controller_den is None):
            raise ConfigError("controller_num and controller_den go together")

    @classmethod
    def from_mapping(cls, mapping):
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "mode" not in mapping:
            raise ConfigError("config needs a mode")
        return cls(**mapping)

    def to_mapping(self):
        defaults = {f.name: f.default for f in fields(self)}
        return {k: v for k, v in asdict(self).items() if k == "mode" or v != defaults[k]}

    def plant(self):
        if self.A is not None:
            return StateSpace(self.A, self.B, self.C, self.D)
        return StateSpace.from_zpk(list(self.zeros or []), list(self.poles), float(self.gain))

    def controller(self):
        if self.controller_num is not None:
            ctl = Controller(self.controller_num, self.controller_den)
            if ctl.n_c != self.n_c:
                raise ConfigError(f"controller order {ctl.n_c} does not match n_c = {self.n_c}")
            return ctl
        if self.n_c < 1:
            raise ConfigError("the default controller needs n_c >= 1")
        return Controller(DEFAULT_CONTROLLER.numerator, [2.0] + [0.0] * self.n_c)


@dataclass
class RunReport:
    mode: str
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)

    @property
    def passed(self):
        return bool(all(self.checks.values()))

    def to_json(self):
        checks = {k: bool(v) for k, v in self.checks.items()}
        payload = {"mode": self.mode, "passed": self.passed, "checks": checks,
                   "metrics": _plain(self.metrics), "manifest": sorted(self.manifest)}
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Writer:
    """Tracks written files so a failed run can be rolled back."""

    def __init__(self, out_dir):
        self.created = not os.path.isdir(out_dir)
        self.out_dir = ensure_dir(out_dir)
        self.written = []

    def _path(self, name):
        p = os.path.join(self.out_dir, name)
        self.written.append(p)
        return p

    def csv(self, name, trace):
        emit_csv(trace, self._path(name))

    def matrix(self, name, M):
        write_matrix(M, self._path(name))

    def curve(self, name, rows, columns):
        emit_bound_curve(rows, self._path(name), columns)

    def text(self, name, text):
        with open(self._path(name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)

    def rollback(self):
        for p in self.written:
            if os.path.exists(p):
                os.remove(p)
        self.written = []
        if self.created and not os.listdir(self.out_dir):
            os.rmdir(self.out_dir)

    @property
    def manifest(self):
        return [os.path.basename(p) for p in self.written]


def make_input(cfg, m):
    N = int(cfg.steps)
    if cfg.input == "impulse":
        u = np.zeros((N, m))
        u[0] = 1.0
    elif cfg.input == "step":
        u = np.ones((N, m))
    elif cfg.input == "harmonic":
        k = np.arange(N)[:, None]
        u = np.sin(2 * np.pi * k / 40 + np.arange(m)[None, :])
    else:
        u = cases.random_input(N, m, cfg.seed)
        if cfg.unit_energy:
            u = u / np.linalg.norm(u)
    return SignalTrace(0, u)


def make_trajectory(cfg, sys, default="square_wave"):
    """Desired output; for ``random_seeded`` also return the generating input."""
    kind = cfg.trajectory or default
    N, l = int(cfg.steps), sys.l
    k = np.arange(N)
    if kind == "square_wave":
        yd = np.tile(cases.square_wave_mix(N)[:, None], (1, l))
    elif kind == "smooth":
        yd = np.tile(cases.smooth_trajectory(N, cfg.ts)[:, None], (1, l))
    elif kind == "harmonic":
        yd = np.sin(2 * np.pi * k[:, None] / 40 + np.arange(l)[None, :])
    elif kind == "step":
        yd = np.ones((N, l))
    else:
        u = cases.random_input(N, sys.m, cfg.seed)
        if cfg.unit_energy:
            u = u / np.linalg.norm(u)
        u = SignalTrace(0, u)
        _, y = simulate(sys, np.zeros(sys.n), u)
        return y, u
    return SignalTrace(0, yd), None


def _steady(trace, start):
    """Row-wise 2-norms of the trace from index ``start`` on."""
    k0 = max(start, trace.start_index)
    if k0 >= trace.stop_index:
        return np.zeros(0)
    return np.linalg.norm(trace.window(k0, trace.stop_index).samples, axis=1)


def _max(a):
    return float(np.max(a)) if len(a) else 0.0


def _to_mp_nmp(design, X):
    T1, q = design.partition.T1, design.partition.q
    Xc = X.samples @ T1.T
    return SignalTrace(X.start_index, Xc[:, :q]), SignalTrace(X.start_index, Xc[:, q:])


def _run_synthesize(cfg, w, rep):
    sys = cfg.plant()
    d = design_inverse(sys, cfg.path, cfg.eps, cfg.rank_tol)
    res = verify_uio_conditions(d.gains, sys)
    zrep = verify_zero_dynamics(d.zero_dyn, d.zeros)
    for name, M in (("M.txt", d.gains.M), ("A_hat.txt", d.gains.A_hat), ("F.txt", d.gains.F),
                    ("T1.txt", d.partition.T1), ("L.txt", d.partition.L),
                    ("Mq.txt", d.partition.Mq)):
        w.matrix(name, M)
    if not d.zero_dyn.is_empty:
        w.matrix("Az.txt", d.zero_dyn.Az)
        w.matrix("Bz.txt", d.zero_dyn.Bz)
    zs = d.zeros.all_zeros
    w.matrix("zeros.txt", np.column_stack([zs.real, zs.imag]) if len(zs) else np.zeros((0, 2)))
    rep.checks["uio_conditions"] = res.within(cfg.eps)
    rep.checks["zero_dynamics_spectrum"] = zrep.eigenvalue_distance <= 1e-6
    if zrep.cz2_norm is not None:
        rep.checks["cz2_vanishes"] = zrep.cz2_norm <= 1e-8
    rep.metrics.update(
        q=d.gains.q, path=d.zero_dyn.path, zeros=list(zs),
        residuals=[res.spectral_radius, res.sylvester, res.decoupling],
        zero_dynamics_distance=zrep.eigenvalue_distance, cz2_norm=zrep.cz2_norm,
        az_eigenvalues=list(np.linalg.eigvals(d.zero_dyn.Az)) if d.zero_dyn.order else [])
    return d


def _run_reconstruct(cfg, w, rep):
    sys = cfg.plant()
    d = design_inverse(sys, cfg.path, cfg.eps, cfg.rank_tol)
    u = make_input(cfg, sys.m)
    x0 = np.zeros(sys.n) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    X, Y = simulate(sys, x0, u)
    fir = FirConfig(cfg.n_d, cfg.init_policy)
    r = reconstruct(d, Y, fir)
    x1, x2 = _to_mp_nmp(d, X)
    e_x1 = r.x1_hat - x1
    e_x2 = x2 - r.x2_hat
    e_u = r.u_hat - u
    for name, tr in (("u.csv", u), ("y.csv", Y), ("x1_true.csv", x1), ("x2_true.csv", x2),
                     ("x1_hat.csv", r.x1_hat), ("x2_hat.csv", r.x2_hat),
                     ("u_hat.csv", r.u_hat), ("e_x2.csv", e_x2), ("e_u.csv", e_u)):
        w.csv(name, tr)
    burn = cases.burn_in(d)
    energy = float(np.linalg.norm(u.samples))
    bound = nmp_error_bound(d.zero_dyn, sys, cfg.n_d, cfg.grid_points) * energy
    gain = float(np.linalg.norm(input_error_gain(d.partition, d.zero_dyn), 2)) \
        if d.zero_dyn.order else 0.0
    mp_err, nmp_err, u_err = (_max(_steady(e, burn)) for e in (e_x1, e_x2, e_u))
    x1_scale = max(_max(_steady(x1, 0)), 1e-300)
    x2_scale = max(_max(_steady(x2, 0)), 1e-300)
    rep.checks["mp_state_error"] = mp_err <= cfg.mp_tol * max(1.0, x1_scale)
    if cfg.init_policy == ZERO:
        rep.checks["nmp_bound_dominance"] = nmp_err <= bound
        rep.checks["input_bound_dominance"] = u_err <= gain * bound + 1e-12
    if cfg.rel_tol is not None:
        rep.checks["nmp_relative_error"] = nmp_err <= cfg.rel_tol * x2_scale
    rep.metrics.update(
        burn_in=burn, path=d.zero_dyn.path, q=d.gains.q, input_energy=energy,
        max_mp_error=mp_err, max_nmp_error=nmp_err, max_input_error=u_err,
        nmp_bound=bound, input_bound=gain * bound,
        mp_relative_error=mp_err / x1_scale, nmp_relative_error=nmp_err / x2_scale,
        delay=sys.n + cfg.n_d)
    return d


def _run_track(cfg, w, rep):
    sys = cfg.plant()
    d = design_inverse(sys, cfg.path, cfg.eps, cfg.rank_tol)
    yd, u_true = make_trajectory(cfg, sys, default="random_seeded" if cfg.seed is not None
                                 else "square_wave")
    tcfg = TrackingConfig(cfg.n_d, cfg.init_policy, cfg.x0)
    res = track_design(d, yd, tcfg)
    for name, tr in (("y_d.csv", yd), ("u_hat.csv", res.u_hat), ("y.csv", res.y_actual),
                     ("e_y.csv", res.e_y)):
        w.csv(name, tr)
    if u_true is not None:
        w.csv("u_true.csv", u_true)
    burn = cases.burn_in(d)
    err = _max(_steady(res.e_y, burn))
    scale = max(float(np.max(np.abs(yd.samples))), 1e-300)
    unit_bound = tracking_error_bound(sys, d.partition, d.zero_dyn, cfg.n_d, cfg.grid_points)
    rep.metrics.update(burn_in=burn, path=d.zero_dyn.path, max_tracking_error=err,
                       relative_tracking_error=err / scale, unit_energy_bound=unit_bound,
                       preview=sys.n + cfg.n_d)
    rep.checks["finite_error"] = bool(np.isfinite(err))
    if u_true is not None and cfg.init_policy == ZERO and cfg.x0 is None:
        bound = unit_bound * float(np.linalg.norm(u_true.samples))
        rep.metrics["tracking_bound"] = bound
        rep.checks["tracking_bound_dominance"] = err <= bound * 1.01
    if cfg.rel_tol is not None:
        rep.checks["relative_tracking_error"] = err <= cfg.rel_tol * scale
    return d


def _run_track_uc(cfg, w, rep):
    sys = cfg.plant()
    fact = factor_unit_circle_zeros(sys, cfg.uc_tol)
    ctl = cfg.controller()
    d = design_inverse(fact.reduced, cfg.path, cfg.eps, cfg.rank_tol)
    yd, _ = make_trajectory(cfg, sys)
    tcfg = TrackingConfig(cfg.n_d, cfg.init_policy, cfg.x0)
    res = track_with_unit_circle(fact, ctl, yd, tcfg, design=d)
    for name, tr in (("y_d.csv", yd), ("u_tilde.csv", res.u_tilde), ("y.csv", res.y_actual),
                     ("e_y.csv", res.e_y), ("e_c.csv", res.e_c)):
        w.csv(name, tr)

    burn = cases.burn_in(d)
    e = _steady(res.e_y, 0)
    end = len(e)
    rep.metrics.update(uc_factors=[list(f) for f in fact.uc_factors], reduced_order=fact.reduced.n,
                       burn_in=burn, n_c=ctl.n_c, max_tracking_error=_max(e[burn:]))
    if end - UC_PERIOD >= burn + UC_PERIOD:
        first = _max(e[burn:burn + UC_PERIOD])
        last = _max(e[end - UC_PERIOD:end])
        rep.metrics.update(first_period_max=first, last_period_max=last)
        rep.checks["no_growth"] = last <= first * (1 + 1e-6) + 1e-12
    else:
        rep.checks["no_growth"] = bool(np.all(np.isfinite(e)))

    ec_sup = _max(np.abs(res.e_c.samples[:, 0])) if len(res.e_c) else 0.0
    bound = chain_bound(fact, d, ctl, yd, cfg.n_d, cfg.grid_points)
    rep.metrics.update(e_c_sup=ec_sup, chain_bound=bound)
    rep.checks["chain_bound"] = ec_sup <= bound

    pole_gap = float(np.min(np.abs(error_chain_poles(fact, d, ctl) + 1.0)))
    rep.metrics["chain_pole_distance_to_minus_one"] = pole_gap
    rep.checks["no_pole_at_minus_one"] = pole_gap > cfg.uc_tol

    if cfg.init_policy == ZERO:
        diff = oracle_mismatch(fact, d, ctl, yd, cfg.n_d)
        rep.metrics["oracle_max_diff"] = diff
        rep.checks["frequency_oracle"] = diff <= 1e-6
    return d


def oracle_mismatch(fact, design, ctl, yd, n_d, pad=ORACLE_PAD):
    """Max difference between the simulated ``e_c`` and its FFT evaluation.

    ``y_d`` is zero-padded on both sides so that the circular convolution of
    the FFT matches the linear one.
    """
    core = yd.samples[:, 0]
    L = 1 << int(np.ceil(np.log2(len(core) + 2 * pad)))
    padded = np.zeros(L)
    padded[pad:pad + len(core)] = core
    res = track_with_unit_circle(fact, ctl, SignalTrace(0, padded), TrackingConfig(n_d),
                                 design=design)
    ec = res.e_c.samples[:, 0]
    z = np.exp(2j * np.pi * np.arange(L) / L)
    H = error_chain_response(fact, design, ctl, z, n_d)
    ef = np.real(np.fft.ifft(np.fft.fft(padded) * H))
    return float(np.max(np.abs(ec - ef[:len(ec)])))


def _run_bound_curve(cfg, w, rep):
    sys = cfg.plant()
    d = design_inverse(sys, cfg.path, cfg.eps, cfg.rank_tol)
    rows = []
    for nd in range(1, int(cfg.nd_max) + 1):
        rows.append((nd, nmp_error_bound(d.zero_dyn, sys, nd, cfg.grid_points),
                     tracking_error_bound(sys, d.partition, d.zero_dyn, nd, cfg.grid_points)))
    w.curve("bound_curve.csv", rows, ("n_d", "nmp_bound", "tracking_bound"))
    b = np.array([r[1] for r in rows])
    rep.checks["monotone"] = bool(np.all(np.diff(b) <= 1e-15 * max(1.0, b.max())))
    rep.metrics.update(first_bound=float(b[0]), last_bound=float(b[-1]),
                       ratio=float(b[1] / b[0]) if b[0] > 0 and len(b) > 1 else 0.0)
    return d


RUNNERS = {
    "synthesize": _run_synthesize,
    "reconstruct": _run_reconstruct,
    "track": _run_track,
    "track_uc": _run_track_uc,
    "bound_curve": _run_bound_curve,
}


def run_experiment(cfg, plot=False):
    """Run one experiment and write its outputs.

    On any error the files written so far are removed and the error is
    re-raised with its original kind.
    """
    w = _Writer(cfg.output_dir)
    rep = RunReport(cfg.mode)
    try:
        RUNNERS[cfg.mode](cfg, w, rep)
        w.text("config.txt", _config_text(cfg))
        if plot:
            from .plotting import render_directory
            for name in render_directory(w.out_dir, [p for p in w.manifest if p.endswith(".csv")]):
                w.written.append(os.path.join(w.out_dir, name))
        rep.manifest = w.manifest + ["report.json"]
        w.text("report.json", rep.to_json())
    except (UioInvError, OSError, ValueError, np.linalg.LinAlgError):
        w.rollback()
        raise
    return rep


def _config_text(cfg):
    from .fileio import serialize_config
    mapping = cfg.to_mapping()
    mapping.pop("output_dir", None)
    return serialize_config(mapping)


# -- built-in demos ---------------------------------------------------------

def _ss_keys(sys):
    return dict(A=sys.A.tolist(), B=sys.B.tolist(), C=sys.C.tolist(), D=sys.D.tolist())


def demo_configs(name, out_dir):
    """The experiment list of each demo, keyed by subdirectory."""
    c1 = _ss_keys(cases.case1_plant())
    c3 = _ss_keys(cases.case3_plant())
    sub = lambda s: os.path.join(out_dir, s)  # noqa: E731
    if name == "case1":
        return {
            "reconstruct": ExperimentConfig("reconstruct", n_d=15, seed=1, steps=400,
                                            x0=[0.5, -0.3], output_dir=sub("reconstruct"), **c1),
            "warm_step": ExperimentConfig("reconstruct", n_d=2, init_policy=WARM_START,
                                          input="step", steps=200, rel_tol=1e-3,
                                          output_dir=sub("warm_step"), **c1),
            "bound_curve": ExperimentConfig("bound_curve", nd_max=30,
                                            output_dir=sub("bound_curve"), **c1),
        }
    if name == "case2":
        return {
            "nonsmooth": ExperimentConfig("track", n_d=15, trajectory="random_seeded", seed=2,
                                          steps=400, output_dir=sub("nonsmooth"), **c1),
            "smooth": ExperimentConfig("track", n_d=2, init_policy=WARM_START,
                                       trajectory="smooth", ts=1e-4, steps=8000, rel_tol=1e-2,
                                       output_dir=sub("smooth"), **c1),
        }
    if name == "case3":
        return {
            "synthesize": ExperimentConfig("synthesize", output_dir=sub("synthesize"), **c3),
            "reconstruct": ExperimentConfig("reconstruct", n_d=10, seed=3, steps=400,
                                            output_dir=sub("reconstruct"), **c3),
        }
    if name == "case4":
        return {
            "track_uc": ExperimentConfig("track_uc", zeros=list(cases.CASE4_ZEROS),
                                         poles=list(cases.CASE4_POLES), gain=1.0, n_c=1,
                                         n_d=10, steps=600, trajectory="square_wave",
                                         output_dir=sub("track_uc")),
        }
    raise ConfigError(f"unknown demo {name!r}; choose case1, case2, case3 or case4")


def run_demo(name, out_dir, plot=False):
    """Run every experiment of a demo; returns ``{subdir: RunReport}``."""
    reports = {}
    for key, cfg in demo_configs(name, out_dir).items():
        reports[key] = run_experiment(cfg, plot=plot)
    summary = {"demo": name, "passed": all(r.passed for r in reports.values()),
               "experiments": {k: r.passed for k, r in reports.items()}}
    ensure_dir(out_dir)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return reports
