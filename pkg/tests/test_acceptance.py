"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed even
when output capture is on.
"""

import time

import numpy as np
import pytest

from systems import draw_systems
from uioinv import cases
from uioinv.errors import AllNmpError
from uioinv.estimator import (
    WARM_START,
    FirConfig,
    decay_factor,
    design_inverse,
    fir_from_theta,
    input_error_gain,
    nmp_error_bound,
    reconstruct,
    theta_trace,
)
from uioinv.experiment import oracle_mismatch, run_demo
from uioinv.lti import SignalTrace, simulate, transmission_zeros
from uioinv.observer import gamma_matrix, synthesize_uio
from uioinv.partition import B1_PATH, D_PATH, _multiset_distance, verify_zero_dynamics
from uioinv.tracker import TrackingConfig, track_design, tracking_error_bound
from uioinv.unit_circle import (
    DEFAULT_CONTROLLER,
    chain_bound,
    error_chain_poles,
    factor_unit_circle_zeros,
    track_with_unit_circle,
)

CASE3_M = np.array([[0.0488, 0.9650, 0.2063, -0.1547],
                    [0.2523, 0.0953, 0.6205, 0.7364],
                    [0.2013, 0.3012, 0.5700, 0.7375]])
CASE3_F = np.array([[0, 0, -0.0662, 0.0184],
                    [0, 0, -0.0206, 0.1365],
                    [0, 0, 0.1337, 0.0338]])
CASE3_T1 = np.array([[-0.0488, -0.9650, -0.2063, 0.1547],
                     [0.2483, -0.0190, 0.6003, 0.7600],
                     [-0.4645, 0.2474, -0.5833, 0.6187],
                     [-0.8487, -0.0855, 0.5067, -0.1252]])
CASE3_BZ = np.array([-0.2463, -2.0822, 2.4171, 5.3035, -0.0678, -2.3507])


@pytest.fixture
def report(capsys):
    def emit(name, checks):
        ok = all(v for _, v in checks)
        detail = "; ".join(f"{label}: {'ok' if v else 'FAILED'}" for label, v in checks)
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name} | {detail}")
        return ok
    return emit


def _unit_input(n_steps, m, seed):
    u = cases.random_input(n_steps, m, seed)
    return SignalTrace(0, u / np.linalg.norm(u))


def _split_truth(design, X):
    Xc = X.samples @ design.partition.T1.T
    q = design.partition.q
    return SignalTrace(X.start_index, Xc[:, :q]), SignalTrace(X.start_index, Xc[:, q:])


def _designs_with_nmp(seed, count):
    out, stream = [], 0
    while len(out) < count:
        for sys in draw_systems(seed + stream, count, need_nmp=True, need_mp=True):
            try:
                out.append(design_inverse(sys))
            except AllNmpError:
                continue
            if len(out) == count:
                break
        stream += 1000
    return out


def test_case1_gains(report):
    t0 = time.perf_counter()
    g = synthesize_uio(cases.case1_plant())
    elapsed = time.perf_counter() - t0
    eig = np.linalg.eigvals(g.A_hat)
    checks = [
        ("A_hat eigenvalue 0.5", abs(eig[0] - 0.5) <= 1e-12),
        ("M = [-0.5547, 0.8321] to 1e-3",
         np.allclose(g.M, [[-0.5547, 0.8321]], atol=1e-3)),
        ("F = [-0.5547, 0] to 1e-3", np.allclose(g.F, [[-0.5547, 0.0]], atol=1e-3)),
        (f"runtime {elapsed:.3f}s < 1s", elapsed < 1.0),
    ]
    assert report("Case I gains", checks)


def test_gamma_spectrum_200_systems(report):
    t0 = time.perf_counter()
    systems = draw_systems(2024, 200)
    worst = 0.0
    for sys in systems:
        zc = transmission_zeros(sys)
        target = np.concatenate([zc.all_zeros, np.zeros(zc.padding_count)])
        d = _multiset_distance(np.linalg.eigvals(gamma_matrix(sys)), target)
        worst = max(worst, d / max(1.0, np.abs(target).max(initial=0)))
    elapsed = time.perf_counter() - t0
    checks = [
        (f"{len(systems)} systems, n <= 6", len(systems) == 200 and max(s.n for s in systems) <= 6),
        (f"max eig(Gamma) mismatch {worst:.1e} <= 1e-6", worst <= 1e-6),
        (f"runtime {elapsed:.2f}s < 30s", elapsed < 30.0),
    ]
    assert report("Gamma spectrum = zeros plus padding at the origin", checks)


def test_zero_dynamics_spectra(report):
    d1 = design_inverse(cases.case1_plant(), path=D_PATH)
    d1b = design_inverse(cases.case1_plant())
    d3 = design_inverse(cases.case3_plant())
    d4 = design_inverse(factor_unit_circle_zeros(cases.case4_plant()).reduced)
    b1_designs = [d for d in (d1b, d3, d4) if d.zero_dyn.path == B1_PATH]
    b1_designs += [d for d in _designs_with_nmp(3030, 30) if d.zero_dyn.path == B1_PATH]
    cz2 = max(verify_zero_dynamics(d.zero_dyn, d.zeros).cz2_norm for d in b1_designs)
    checks = [
        ("Case I A_zd = 1.5", abs(d1.zero_dyn.Az[0, 0] - 1.5) <= 1e-12),
        ("Case III A_z = 1.9928 +- 1e-3", abs(d3.zero_dyn.Az[0, 0] - 1.9928) <= 1e-3),
        (f"max ||C_z2|| = {cz2:.1e} <= 1e-8 over {len(b1_designs)} B1-path designs", cz2 <= 1e-8),
    ]
    assert report("Zero-dynamics spectra", checks)


def test_fir_error_identity_and_bound(report):
    # exact MP states give e_x2(j) = Az_inv^nd x2(j + nd) under the zero policy
    d, nd = design_inverse(cases.case3_plant()), 7
    u = _unit_input(150, 2, 9)
    X, Y = simulate(d.sys, np.array([0.2, -0.4, 0.1, 0.3]), u)
    x1, x2 = _split_truth(d, X)
    x2_hat = fir_from_theta(d.zero_dyn, theta_trace(d.zero_dyn, x1, Y), FirConfig(nd))
    P = np.linalg.matrix_power(d.zero_dyn.Az_inv, nd)
    ident = max(np.abs(x2.at(j) - x2_hat.at(j) - P @ x2.at(j + nd)).max()
                for j in x2_hat.indices)

    designs = _designs_with_nmp(4040, 100)
    worst_ratio = 0.0
    for k, dd in enumerate(designs):
        u = _unit_input(150, dd.sys.m, k)
        X, Y = simulate(dd.sys, np.zeros(dd.n), u)
        _, x2 = _split_truth(dd, X)
        r = reconstruct(dd, Y, FirConfig(8))
        measured = np.linalg.norm((x2 - r.x2_hat).samples, axis=1).max()
        worst_ratio = max(worst_ratio, measured / nmp_error_bound(dd.zero_dyn, dd.sys, 8))

    d1 = design_inverse(cases.case1_plant())
    b = np.array([nmp_error_bound(d1.zero_dyn, d1.sys, k) for k in range(1, 31)])
    slope_err = np.abs(np.diff(np.log(b)) - np.log(1 / 1.5)).max()
    checks = [
        (f"e_x2 identity residual {ident:.1e} <= 1e-10", ident <= 1e-10),
        (f"{len(designs)} random NMP plants, max measured/bound = {worst_ratio:.3f} <= 1",
         len(designs) == 100 and worst_ratio <= 1.0),
        (f"log-slope error {slope_err:.1e} <= 1e-6 (ratio 1/1.5 per step)", slope_err <= 1e-6),
    ]
    assert report("FIR error identity and NMP bound", checks)


def test_case1_reconstruction(report):
    t0 = time.perf_counter()
    d = design_inverse(cases.case1_plant())
    burn = cases.burn_in(d)
    u = _unit_input(400, 1, 1)

    X, Y = simulate(d.sys, np.array([0.5, -0.3]), u)
    x1, _ = _split_truth(d, X)
    r = reconstruct(d, Y, FirConfig(15))
    mp_err = np.abs((r.x1_hat - x1).samples[burn:]).max()

    X, Y = simulate(d.sys, np.zeros(2), u)
    _, x2 = _split_truth(d, X)
    r = reconstruct(d, Y, FirConfig(15))
    bound = nmp_error_bound(d.zero_dyn, d.sys, 15)
    gain = np.linalg.norm(input_error_gain(d.partition, d.zero_dyn), 2)
    nmp_err = np.abs((x2 - r.x2_hat).samples[burn:]).max()
    u_err = np.abs((r.u_hat - u).samples[burn:]).max()

    step = SignalTrace(0, np.ones((200, 1)))
    X, Y = simulate(d.sys, np.zeros(2), step)
    _, x2s = _split_truth(d, X)
    rw = reconstruct(d, Y, FirConfig(2, WARM_START))
    warm_rel = np.abs((x2s - rw.x2_hat).samples[burn:]).max() / np.abs(x2s.samples).max()
    elapsed = time.perf_counter() - t0
    checks = [
        (f"MP error after burn-in {mp_err:.1e} <= 1e-6", mp_err <= 1e-6),
        (f"NMP error {nmp_err:.1e} <= bound {bound:.1e}", nmp_err <= bound),
        (f"input error {u_err:.1e} <= {gain * bound:.1e}", u_err <= gain * bound),
        (f"WarmStart n_d=2 step relative error {warm_rel:.1e} <= 1e-3", warm_rel <= 1e-3),
        (f"runtime {elapsed:.2f}s < 5s", elapsed < 5.0),
    ]
    assert report("Case I reconstruction at n_d = 15", checks)


def test_case2_tracking(report):
    d = design_inverse(cases.case1_plant())
    u = _unit_input(400, 1, 2)
    _, yd = simulate(d.sys, np.zeros(2), u)
    res = track_design(d, yd, TrackingConfig(15))
    err = np.abs(res.e_y.samples[cases.burn_in(d):]).max()
    bound = tracking_error_bound(d.sys, d.partition, d.zero_dyn, 15)

    designs = _designs_with_nmp(5050, 50)
    worst = 0.0
    for k, dd in enumerate(designs):
        u = _unit_input(200, dd.sys.m, k)
        _, yd = simulate(dd.sys, np.zeros(dd.n), u)
        e = track_design(dd, yd, TrackingConfig(10)).e_y
        measured = np.linalg.norm(e.samples, axis=1).max()
        worst = max(worst, measured / tracking_error_bound(dd.sys, dd.partition, dd.zero_dyn, 10))
    checks = [
        (f"Case I steady |e_y| {err:.1e} <= bound {bound:.1e}", err <= bound),
        (f"{len(designs)} random NMP plants, max measured/bound = {worst:.3f} <= 1",
         len(designs) == 50 and worst <= 1.0),
    ]
    assert report("Case II tracking", checks)


def test_case3(report):
    d = design_inverse(cases.case3_plant())
    g, pr, zd = d.gains, d.partition, d.zero_dyn
    T = CASE3_M @ np.linalg.pinv(g.M)
    R = CASE3_T1[:3] @ pr.T1[:3].T
    s = np.sign(CASE3_T1[3] @ pr.T1[3])
    bz = s * zd.Bz[0] @ np.kron(np.eye(2), R).T

    burn = cases.burn_in(d)
    u = _unit_input(400, 2, 3)
    X, Y = simulate(d.sys, np.zeros(4), u)
    x1, x2 = _split_truth(d, X)
    r = reconstruct(d, Y, FirConfig(10))
    mp_rel = np.abs((r.x1_hat - x1).samples[burn:]).max() / np.abs(x1.samples).max()
    nmp_err = np.abs((x2 - r.x2_hat).samples[burn:]).max()
    nmp_rel = nmp_err / np.abs(x2.samples).max()
    bound = nmp_error_bound(zd, d.sys, 10)
    same_index = r.x1_hat.start_index == x1.start_index
    checks = [
        ("M row 1 up to sign", np.allclose(g.M[0], CASE3_M[0], atol=1e-3)),
        ("M rows span the reference rows", np.allclose(T @ g.M, CASE3_M, atol=1e-3)),
        ("F in the reference basis", np.allclose((T @ g.F)[:, :4], CASE3_F, atol=1e-3)),
        ("T1 row 1 up to sign", np.allclose(np.abs(pr.T1[0]), np.abs(CASE3_T1[0]), atol=1e-3)),
        ("B_z in the reference basis", np.allclose(bz, CASE3_BZ, atol=1e-2)),
        ("MP estimates indexed like the plant (no structural delay)", same_index),
        (f"MP-state steady error {mp_rel:.1e} <= 1e-4 relative", mp_rel <= 1e-4),
        (f"NMP error {nmp_err:.1e} <= bound {bound:.1e} "
         f"(relative {nmp_rel:.1e}, floor sigma(Az_inv^10) = {decay_factor(zd, 10):.1e})",
         nmp_err <= bound),
    ]
    assert report("Case III gains and reconstruction at n_d = 10", checks)


def test_case4(report):
    fact = factor_unit_circle_zeros(cases.case4_plant())
    d = design_inverse(fact.reduced)
    ctl = DEFAULT_CONTROLLER
    burn = cases.burn_in(d)
    yd = SignalTrace(0, cases.square_wave_mix(500 + burn + 14))
    res = track_with_unit_circle(fact, ctl, yd, TrackingConfig(10), design=d)
    e = np.abs(res.e_y.samples[:, 0])
    tail = e[burn:]
    first, last = tail[:250].max(), tail[-250:].max()
    ec = np.abs(res.e_c.samples).max()
    bound = chain_bound(fact, d, ctl, yd, 10, grid_points=4096)
    oracle = oracle_mismatch(fact, d, ctl, SignalTrace(0, cases.square_wave_mix(500)), 10)
    gap = np.min(np.abs(error_chain_poles(fact, d, ctl) + 1))
    checks = [
        (f"{len(tail)} steady steps, no growth: last period max {last:.4f} <= first {first:.4f}",
         len(tail) >= 500 and last <= first * (1 + 1e-6)),
        (f"sup |e_c| {ec:.3f} <= chain bound {bound:.2f} (4096-point grid)", ec <= bound),
        (f"FFT oracle mismatch {oracle:.1e} <= 1e-6", oracle <= 1e-6),
        (f"error-chain poles at distance {gap:.2f} from -1", gap > 1e-6),
    ]
    assert report("Case IV unit-circle tracking", checks)


def test_demo_determinism(report, tmp_path):
    import os

    def csvs(root):
        out = {}
        for base, _, names in os.walk(root):
            for name in names:
                if name.endswith(".csv"):
                    p = os.path.join(base, name)
                    with open(p, "rb") as fh:
                        out[os.path.relpath(p, root)] = fh.read()
        return out

    checks = []
    for name in ("case1", "case2", "case3", "case4"):
        run_demo(name, str(tmp_path / "a" / name))
        run_demo(name, str(tmp_path / "b" / name))
        a, b = csvs(tmp_path / "a" / name), csvs(tmp_path / "b" / name)
        same = bool(a) and a.keys() == b.keys() and all(a[k] == b[k] for k in a)
        checks.append((f"{name}: {len(a)} CSVs byte-identical", same))
    assert report("Demo determinism", checks)
