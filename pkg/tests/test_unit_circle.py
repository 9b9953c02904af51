import numpy as np
import pytest

from uioinv import cases
from uioinv.errors import (
    ImproperFilterError,
    InvalidControllerError,
    NotMinimumPhaseFactorError,
    UnsupportedSystemError,
)
from uioinv.estimator import design_inverse
from uioinv.experiment import oracle_mismatch
from uioinv.lti import SignalTrace, StateSpace, transmission_zeros
from uioinv.partition import _multiset_distance
from uioinv.tracker import TrackingConfig
from uioinv.unit_circle import (
    DEFAULT_CONTROLLER,
    IDENTITY,
    Controller,
    chain_bound,
    controller_mismatch_norm,
    error_chain_poles,
    factor_unit_circle_zeros,
    prefilter_desired,
    repeated_mp_prefilter,
    track_with_unit_circle,
)


@pytest.fixture(scope="module")
def case4_setup(case4):
    fact = factor_unit_circle_zeros(case4)
    return fact, design_inverse(fact.reduced)


def test_case4_factorization(case4_setup):
    fact, _ = case4_setup
    assert len(fact.uc_factors) == 1
    np.testing.assert_allclose(fact.uc_factors[0], [1.0, 1.0])
    z = np.exp(1j * np.linspace(0.2, 2.9, 9)) * 1.3
    lhs = fact.original.transfer(z)[:, 0, 0]
    rhs = (z + 1) * fact.reduced.transfer(z)[:, 0, 0]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)
    zc = transmission_zeros(fact.reduced)
    assert len(zc.unit_circle_zeros) == 0
    assert _multiset_distance(zc.all_zeros, [-3.0, -0.5, 0.5]) < 1e-9
    assert fact.reduced.n == fact.original.n


def test_case4_reduced_design(case4_setup):
    _, d = case4_setup
    assert _multiset_distance(np.linalg.eigvals(d.gains.A_hat), [0.0, 0.5, -0.5]) < 1e-9
    np.testing.assert_allclose(d.zero_dyn.Az, [[-3.0]], atol=1e-9)


def test_conjugate_pair_factor():
    w = np.pi / 3
    zeros = [np.exp(1j * w), np.exp(-1j * w), 0.4]
    sys = StateSpace.from_zpk(zeros, [0.1, 0.2, -0.3], 1.0)
    fact = factor_unit_circle_zeros(sys)
    np.testing.assert_allclose(fact.uc_polynomial, [1.0, -2 * np.cos(w), 1.0], atol=1e-9)


def test_factorization_without_uc_zero_is_identity(case1):
    fact = factor_unit_circle_zeros(case1)
    assert fact.uc_factors == () and fact.reduced is case1


def test_factorization_siso_only(case3):
    with pytest.raises(UnsupportedSystemError):
        factor_unit_circle_zeros(case3)


def test_controller_mismatch_norm():
    # |1 - (z+1)/(2z)| = |z - 1| / 2, largest at z = -1
    assert controller_mismatch_norm(DEFAULT_CONTROLLER) == pytest.approx(1.0, abs=1e-12)
    assert controller_mismatch_norm(IDENTITY) == 0.0


def test_controller_reduction():
    h = DEFAULT_CONTROLLER.reduced([1.0, 1.0])
    np.testing.assert_allclose(h.numerator, [1.0])
    assert h.n_c == 1 and h.is_proper()
    with pytest.raises(InvalidControllerError):
        Controller([1.0, 2.0], [2.0, 0.0]).reduced([1.0, 1.0])
    with pytest.raises(InvalidControllerError):
        Controller([1.0], [0.0])


def test_prefilter_is_half_delay():
    yd = SignalTrace(0, np.arange(1.0, 7.0))
    out = prefilter_desired(yd, DEFAULT_CONTROLLER)
    np.testing.assert_allclose(out.samples[:, 0], [0.0, 0.5, 1.0, 1.5, 2.0, 2.5])


def test_prefilter_rejects_improper():
    with pytest.raises(ImproperFilterError):
        prefilter_desired(SignalTrace(0, np.ones(4)), Controller([1.0, 1.0, 0.0], [1.0]))


def test_repeated_mp_prefilter_oracle():
    yd = SignalTrace(2, np.array([1.0, 0.0, 2.0, -1.0]))
    out = repeated_mp_prefilter(yd, 0.5, y0=1.0)
    np.testing.assert_allclose(out.samples[:, 0], [1.0, 1.5, 0.75, 2.375])
    assert out.start_index == 2
    with pytest.raises(NotMinimumPhaseFactorError):
        repeated_mp_prefilter(yd, 1.2)


def test_case4_tracking_is_bounded(case4_setup):
    fact, d = case4_setup
    yd = SignalTrace(0, cases.square_wave_mix(600))
    res = track_with_unit_circle(fact, DEFAULT_CONTROLLER, yd, TrackingConfig(10), design=d)
    e = np.abs(res.e_y.samples[:, 0])
    burn = cases.burn_in(d)
    first, last = e[burn:burn + 250].max(), e[-250:].max()
    assert np.all(np.isfinite(e))
    assert last <= first * (1 + 1e-6)


def test_case4_chain_bound_and_poles(case4_setup):
    fact, d = case4_setup
    yd = SignalTrace(0, cases.square_wave_mix(600))
    res = track_with_unit_circle(fact, DEFAULT_CONTROLLER, yd, TrackingConfig(10), design=d)
    assert np.abs(res.e_c.samples).max() <= chain_bound(fact, d, DEFAULT_CONTROLLER, yd, 10)
    assert np.min(np.abs(error_chain_poles(fact, d, DEFAULT_CONTROLLER) + 1)) > 1e-6


def test_case4_frequency_oracle(case4_setup):
    fact, d = case4_setup
    yd = SignalTrace(0, cases.square_wave_mix(500))
    assert oracle_mismatch(fact, d, DEFAULT_CONTROLLER, yd, 10) <= 1e-6


def test_controller_must_contain_unit_circle_factor(case4_setup):
    # H = 1 leaves 1/(z+1) in the loop, which never decays
    fact, d = case4_setup
    yd = SignalTrace(0, cases.square_wave_mix(100))
    with pytest.raises(InvalidControllerError):
        track_with_unit_circle(fact, IDENTITY, yd, TrackingConfig(10), design=d)
