import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bodepace.compensators import PidSpec
from bodepace.discretization import (
    DiscreteTransferFunction,
    RecurrenceFilter,
    inverse_tustin,
    step_filter,
    to_recurrence,
    tustin,
)
from bodepace.filters import FilterState, LpfConfig, SmootherConfig, lpf_step, smoother_to_laplace
from bodepace.lti import TransferFunction, lpf_tf


def long_division(num, den, n):
    """First n coefficients of num(w)/den(w) as a power series in w = z**-1."""
    num = list(num) + [0.0] * n
    out = []
    for k in range(n):
        c = num[k] / den[0]
        out.append(c)
        for j, d in enumerate(den):
            if k + j < len(num):
                num[k + j] -= c * d
    return np.array(out)


def test_constant_gain_is_unchanged():
    d = tustin(TransferFunction.constant(3.5), 0.87)
    assert d.num_z == (3.5,) and d.den_z == (1.0,)


def test_lpf_coefficients():
    d = tustin(lpf_tf(1.0), 1.0)
    assert d.num_z == pytest.approx((1 / 3, 1 / 3), abs=1e-15)
    assert d.den_z == pytest.approx((1.0, -1 / 3), abs=1e-15)


def test_pi_has_pole_at_one_and_tracks_continuous_response():
    pi = PidSpec(5e-4, 5e-5).tf()
    d = tustin(pi, 10.0)
    assert sum(d.den_z) == pytest.approx(0.0, abs=1e-15)
    f = 1e-4
    z = cmath.exp(2j * math.pi * f * 10.0)
    cont = complex(pi(2j * math.pi * f))
    assert abs(abs(complex(d(z))) - abs(cont)) / abs(cont) < 0.01


def test_improper_and_bad_period_rejected():
    with pytest.raises(ValueError):
        tustin(TransferFunction.from_coeffs([0, 1], [1]), 1.0)
    with pytest.raises(ValueError):
        tustin(lpf_tf(1.0), 0.0)
    with pytest.raises(ValueError):
        DiscreteTransferFunction((1.0,), (0.0, 1.0), 1.0)


def test_recurrence_signs():
    r = to_recurrence(DiscreteTransferFunction((1 / 3, 1 / 3), (1.0, -1 / 3), 1.0))
    assert r.a == pytest.approx((1 / 3,))
    assert r.b == pytest.approx((1 / 3, 1 / 3))
    g = to_recurrence(DiscreteTransferFunction((2.0,), (1.0,), 1.0))
    assert g.a == () and g.b == (2.0,)


def test_step_filter_gain_and_integrator():
    g = RecurrenceFilter(a=(), b=(2.0,))
    assert step_filter(g, 3.0) == 6.0
    integ = RecurrenceFilter(a=(1.0,), b=(10.0,))
    assert [step_filter(integ, 1.0) for _ in range(4)] == [10.0, 20.0, 30.0, 40.0]


def test_lpf_recurrence_step_response_converges():
    t, t_f = 0.87, 10 / (2 * math.pi)
    r = to_recurrence(tustin(lpf_tf(t_f), t))
    n = int(math.ceil(20 * t_f / t))
    y = r.run(np.ones(n))
    assert abs(y[-1] - 1.0) < 1e-6


stable_poles = st.lists(st.floats(0.05, 20.0), min_size=1, max_size=4)


def _bilinear_rtol(poles, t):
    # z-domain coefficients cancel by roughly 2/(t*p) per pole; widen the 1e-9 floor accordingly
    cond = math.prod(max(1.0, 2.0 / (t * p)) for p in poles)
    return max(1e-9, 64 * np.finfo(float).eps * cond)


def _tf_from_poles(poles, zeros, k):
    den = np.array([1.0])
    for p in poles:
        den = np.convolve(den, [1.0, 1.0 / p])
    num = np.array([k])
    for z in zeros:
        num = np.convolve(num, [1.0, 1.0 / z])
    return TransferFunction.from_coeffs(num, den)


@settings(max_examples=40, deadline=None)
@given(stable_poles, st.lists(st.floats(0.05, 20.0), max_size=3), st.floats(0.1, 10.0), st.floats(0.01, 2.0))
def test_impulse_response_equals_long_division(poles, zeros, k, t):
    zeros = zeros[: len(poles)]
    d = tustin(_tf_from_poles(poles, zeros, k), t)
    r = to_recurrence(d)
    impulse = np.zeros(50)
    impulse[0] = 1.0
    got = r.run(impulse)
    want = long_division(d.num_z, d.den_z, 50)
    assert np.allclose(got, want, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(want))))


@settings(max_examples=40, deadline=None)
@given(stable_poles, st.floats(0.1, 10.0), st.floats(0.01, 2.0))
def test_dc_gain_preserved(poles, k, t):
    h = _tf_from_poles(poles, [], k)
    assert tustin(h, t).dc_gain() == pytest.approx(h.dc_gain(), rel=_bilinear_rtol(poles, t))


@settings(max_examples=40, deadline=None)
@given(stable_poles, st.lists(st.floats(0.05, 20.0), max_size=3), st.floats(0.01, 2.0))
def test_round_trip_is_identity(poles, zeros, t):
    zeros = zeros[: len(poles)]
    h = _tf_from_poles(poles, zeros, 1.0)
    back = inverse_tustin(tustin(h, t))
    rel = _bilinear_rtol(poles, t)
    for f in np.logspace(-3, 0, 10):
        s = 2j * math.pi * f
        assert complex(back(s)) == pytest.approx(complex(h(s)), rel=rel, abs=1e-12)


def test_round_trip_first_order_at_auction_interval():
    h = lpf_tf(1.0)
    back = inverse_tustin(tustin(h, 0.87))
    for f in np.logspace(-3, 1, 10):
        s = 2j * math.pi * f
        assert abs(complex(back(s)) - complex(h(s))) < 1e-9


def test_inverse_of_unit_smoother_is_unity():
    d = DiscreteTransferFunction((1.0,), (1.0,), 1.0)
    h = inverse_tustin(d)
    assert complex(h(0.7j)) == pytest.approx(1.0)


def test_inverse_of_half_smoother():
    d = DiscreteTransferFunction((0.5,), (1.0, -0.5), 1.0)
    h = inverse_tustin(d)
    for w in (0.01, 0.3, 2.0, 50.0):
        s = 1j * w
        want = 0.5 * (1 + 0.5 * s) / (0.75 * s + 0.5)
        assert complex(h(s)) == pytest.approx(want, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.1, 5.0))
def test_smoother_laplace_round_trip(beta, t):
    d = tustin(smoother_to_laplace(SmootherConfig(beta, t)), t)
    # beta / (1 - (1-beta) z^-1), compared after normalising den_z[0] = 1
    want_num = (beta,)
    want_den = (1.0, -(1 - beta))
    assert d.num_z[0] == pytest.approx(want_num[0], rel=1e-9)
    assert all(abs(x) < 1e-12 for x in d.num_z[1:])
    assert d.den_z == pytest.approx(want_den, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.1, 20.0), st.lists(st.floats(0, 100), min_size=1, max_size=60))
def test_lpf_difference_equation_matches_generic_pipeline(t, t_f, u):
    cfg = LpfConfig(t_f, t)
    state = FilterState()
    rec = to_recurrence(tustin(lpf_tf(t_f), t))
    for x in u:
        assert lpf_step(cfg, state, x) == pytest.approx(rec.step(x), rel=0, abs=1e-12 * max(1.0, abs(x)))


def test_json_round_trip():
    r = to_recurrence(tustin(PidSpec(5e-4, 5e-5).tf(), 10.0))
    back = RecurrenceFilter.from_json(r.to_json())
    assert back.a == r.a and back.b == r.b and back.t_z == r.t_z


def test_limits_stop_windup_in_stored_history():
    integ = RecurrenceFilter(a=(1.0,), b=(1.0,))
    for _ in range(10):
        y = integ.step(1.0, limits=(0.0, 2.0))
    assert y == 2.0
    assert integ.step(-1.0, limits=(0.0, 2.0)) == 1.0


def test_non_finite_input_rejected():
    with pytest.raises(ValueError):
        RecurrenceFilter(a=(0.5,), b=(1.0,)).step(math.nan)


def test_preload_gives_steady_state():
    r = to_recurrence(tustin(lpf_tf(2.0), 0.87))
    r.preload(4.0, 4.0)
    assert r.step(4.0) == pytest.approx(4.0, abs=1e-12)
