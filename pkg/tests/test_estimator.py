import numpy as np
import pytest

from systems import draw_systems
from uioinv import cases
from uioinv.errors import AlignmentError, AllNmpError, InsufficientDataError
from uioinv.estimator import (
    WARM_START,
    FirConfig,
    FirNmpFilter,
    UioFilter,
    decay_factor,
    design_inverse,
    error_report,
    fir_from_theta,
    nmp_error_bound,
    reconstruct,
    reconstruct_input,
    run_fir_nmp,
    run_uio,
    stacked_windows,
    theta_trace,
)
from uioinv.lti import SignalTrace, StateSpace, simulate
from uioinv.partition import D_PATH


def _truth(design, u, x0=None):
    sys = design.sys
    X, Y = simulate(sys, np.zeros(sys.n) if x0 is None else x0, u)
    Xc = X.samples @ design.partition.T1.T
    q = design.partition.q
    return X, Y, SignalTrace(0, Xc[:, :q]), SignalTrace(0, Xc[:, q:])


def _unit_input(n_steps, m, seed):
    u = cases.random_input(n_steps, m, seed)
    return SignalTrace(0, u / np.linalg.norm(u))


def test_index_conventions(case1_design):
    y = SignalTrace(3, np.zeros((40, 1)))
    r = reconstruct(case1_design, y, FirConfig(5))
    n = case1_design.n
    assert (r.x1_hat.start_index, r.x1_hat.stop_index - 1) == (3, 42 - n + 2)
    assert (r.x2_hat.start_index, r.x2_hat.stop_index - 1) == (3, 42 - n + 2 - 5)
    assert r.u_hat.start_index == 3 and len(r.u_hat) == len(r.x2_hat)


def test_stacked_windows():
    y = SignalTrace(0, np.arange(10.0).reshape(5, 2))
    W = stacked_windows(y, 2)
    np.testing.assert_array_equal(W[0], [0, 1, 2, 3])
    assert W.shape == (4, 4)


def test_case1_mp_state_exact_from_zero_state(case1_design):
    u = _unit_input(200, 1, 0)
    _, Y, x1, _ = _truth(case1_design, u)
    x1_hat = run_uio(case1_design.gains, case1_design.partition, Y)
    err = (x1_hat - x1).samples
    assert np.abs(err).max() < 1e-14


def test_mp_error_decays_at_observer_rate(case1_design):
    u = _unit_input(60, 1, 1)
    _, Y, x1, _ = _truth(case1_design, u, x0=np.array([1.0, -2.0]))
    e = (run_uio(case1_design.gains, case1_design.partition, Y) - x1).samples[:, 0]
    ratios = e[1:20] / e[:19]
    np.testing.assert_allclose(ratios, 0.5, atol=1e-9)


@pytest.mark.parametrize("policy", ["zero", "warm"])
def test_fir_error_identity(case3_design, policy):
    """With exact MP states the filter error is ``Az_inv^nd (x2(j+nd) - x_bar)``."""
    d, nd = case3_design, 6
    u = _unit_input(120, 2, 2)
    _, Y, x1, x2 = _truth(d, u, x0=np.array([0.3, -0.1, 0.2, 0.5]))
    theta = theta_trace(d.zero_dyn, x1, Y)
    cfg = FirConfig(nd, policy)
    x2_hat = fir_from_theta(d.zero_dyn, theta, cfg)
    P = np.linalg.matrix_power(d.zero_dyn.Az_inv, nd)
    prev = np.zeros(d.zero_dyn.order)
    for j in x2_hat.indices:
        x_bar = prev if policy == WARM_START else np.zeros_like(prev)
        expected = P @ (x2.at(j + nd) - x_bar)
        np.testing.assert_allclose(x2.at(j) - x2_hat.at(j), expected, atol=1e-10)
        prev = x2_hat.at(j)


def test_fir_exact_with_true_future_state(case1_design):
    d, nd = case1_design, 4
    u = _unit_input(80, 1, 3)
    _, Y, x1, x2 = _truth(d, u)
    x1_hat = run_uio(d.gains, d.partition, Y)
    x_bar = SignalTrace(0, x2.samples[nd:])
    x2_hat = run_fir_nmp(d.zero_dyn, x1_hat, Y, FirConfig(nd), x_bar=x_bar)
    assert np.abs((x2_hat - x2).samples).max() < 1e-12


def test_case1_reconstruction_n15(case1_design):
    d = case1_design
    u = _unit_input(400, 1, 1)
    _, Y, x1, x2 = _truth(d, u)
    cfg = FirConfig(15)
    r = reconstruct(d, Y, cfg)
    rep = error_report(d, cfg, None, u, r)
    e_x2 = np.abs((x2 - r.x2_hat).samples)
    e_u = np.abs(rep.e_u_trace.samples)
    burn = cases.burn_in(d)
    assert np.abs((r.x1_hat - x1).samples).max() < 1e-12
    assert e_x2[burn:].max() <= rep.e_x2_bound
    assert e_u[burn:].max() <= np.linalg.norm(rep.e_u_gain, 2) * rep.e_x2_bound


def test_case1_warm_start_step_is_exact(case1_design):
    d = case1_design
    u = SignalTrace(0, np.ones((100, 1)))
    _, Y, _, x2 = _truth(d, u)
    r = reconstruct(d, Y, FirConfig(2, WARM_START))
    e = np.abs((x2 - r.x2_hat).samples)
    assert e[20:].max() <= 1e-3 * np.abs(x2.samples).max()


def test_d_path_reconstruction(case1):
    d = design_inverse(case1, path=D_PATH)
    u = _unit_input(200, 1, 5)
    _, Y, x1, x2 = _truth(d, u)
    r = reconstruct(d, Y, FirConfig(20))
    assert np.abs((r.u_hat - u).samples)[20:].max() < 1e-3
    assert np.abs((x2 - r.x2_hat).samples)[20:].max() < 1e-3


def test_bound_dominates_on_random_plants():
    checked = 0
    for k, sys in enumerate(draw_systems(41, 40, need_nmp=True, need_mp=True)):
        try:
            d = design_inverse(sys)
        except AllNmpError:
            continue
        nd = 8
        u = _unit_input(150, sys.m, k)
        _, Y, _, x2 = _truth(d, u)
        r = reconstruct(d, Y, FirConfig(nd))
        measured = np.linalg.norm((x2 - r.x2_hat).samples, axis=1).max()
        assert measured <= nmp_error_bound(d.zero_dyn, sys, nd) * (1 + 1e-9)
        checked += 1
    assert checked >= 20


def test_bound_decay_ratio_scalar(case1_design):
    zd, sys = case1_design.zero_dyn, case1_design.sys
    b = np.array([nmp_error_bound(zd, sys, k) for k in range(1, 12)])
    np.testing.assert_allclose(np.diff(np.log(b)), np.log(1 / 1.5), atol=1e-6)
    assert decay_factor(zd, 3) == pytest.approx(1.5 ** -3)


def test_online_filters_match_batch(case3_design):
    d, nd = case3_design, 5
    u = _unit_input(60, 2, 6)
    _, Y, _, _ = _truth(d, u)
    x1_batch = run_uio(d.gains, d.partition, Y)
    W = stacked_windows(Y, d.n)
    filt = UioFilter(d.gains, d.partition)
    online = [filt.x1_hat] + [filt.step(w) for w in W]
    np.testing.assert_allclose(np.array(online), x1_batch.samples, atol=1e-13)

    theta = theta_trace(d.zero_dyn, x1_batch, Y)
    fir = FirNmpFilter(d.zero_dyn, FirConfig(nd, WARM_START))
    out = [v for v in (fir.push(t) for t in theta.samples) if v is not None]
    batch = fir_from_theta(d.zero_dyn, theta, FirConfig(nd, WARM_START))
    np.testing.assert_allclose(np.array(out), batch.samples, atol=1e-12)


def test_minimum_phase_plant_reconstructs_exactly():
    sys = StateSpace.from_zpk([0.5, -0.3], [0.2, 0.1], 1.0)
    d = design_inverse(sys)
    u = _unit_input(50, 1, 7)
    _, Y, _, _ = _truth(d, u)
    r = reconstruct(d, Y, FirConfig(1))
    assert r.x2_hat.dim == 0
    assert np.abs((r.u_hat - u).samples).max() < 1e-12


def test_state_estimate_in_plant_coordinates(case1_design):
    d = case1_design
    u = _unit_input(100, 1, 8)
    X, Y, _, _ = _truth(d, u)
    r = reconstruct(d, Y, FirConfig(25))
    err = (r.state_estimate(d.partition) - X).samples
    assert np.abs(err).max() < 1e-4


def test_insufficient_data(case1_design):
    with pytest.raises(InsufficientDataError):
        run_uio(case1_design.gains, case1_design.partition, SignalTrace(0, np.zeros((2, 1))))
    with pytest.raises(InsufficientDataError):
        reconstruct(case1_design, SignalTrace(0, np.zeros((8, 1))), FirConfig(10))


def test_alignment_errors(case1_design, case3_design):
    with pytest.raises(AlignmentError):
        run_uio(case3_design.gains, case3_design.partition, SignalTrace(0, np.zeros((20, 1))))
    d = case1_design
    x1 = SignalTrace(0, np.zeros((5, 1)))
    x2 = SignalTrace(3, np.zeros((5, 1)))
    with pytest.raises(AlignmentError):
        reconstruct_input(d.partition, d.zero_dyn, x1, x2)


def test_fir_config_validation():
    with pytest.raises(ValueError):
        FirConfig(0)
    with pytest.raises(ValueError):
        FirConfig(3, "cold")
