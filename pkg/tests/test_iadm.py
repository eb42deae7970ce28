import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavsim.errors import ConfigError, DomainError
from cavsim.iadm import (
    Branch,
    IadmInput,
    IadmParams,
    comfortable_accel,
    comfortable_decel,
    next_speed,
    safe_gap,
)
from cavsim.perception import PerceivedLead, Source

P = IadmParams()  # a_max = b_max = 1.5, s0 = 2, k = 1, dt = 0.1, v_ff = 25


def tanh_oracle(x):
    # Independent of math.tanh: exponential form.
    e = math.exp(2 * x)
    return (e - 1) / (e + 1)


def step(v, lead_speed, gap, params=P):
    return next_speed(params, IadmInput(v, PerceivedLead(gap, lead_speed, Source.COMM)))


# safe_gap -------------------------------------------------------------------

def test_safe_gap_equal_speeds():
    assert safe_gap(P, 15, 15) == pytest.approx(2 + 15 * 0.1, rel=1e-12)


def test_safe_gap_closing():
    assert safe_gap(P, 20, 15) == pytest.approx(2 + 2.0 + 0.5, rel=1e-12)


def test_safe_gap_standstill():
    assert safe_gap(P, 0, 0) == 2.0


def test_safe_gap_ignores_opening_speed():
    assert safe_gap(P, 10, 20) == pytest.approx(3.0)


# comfort terms --------------------------------------------------------------

def test_comfort_terms_vanish_at_equilibrium():
    assert comfortable_accel(P, 15, 15, 3.5, 3.5) == 0.0
    assert comfortable_decel(P, 15, 15, 3.5, 3.5) == 0.0


def test_comfortable_accel_relative_speed_four():
    expected = 1.5 * tanh_oracle(4.0)  # 1.49899394960860...
    assert comfortable_accel(P, 10, 14, 50, 3) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(1.4989939496086006, rel=1e-12)


def test_comfortable_accel_saturates_beyond_ten():
    assert comfortable_accel(P, 5, 15, 50, 3) == pytest.approx(1.5, abs=1e-6)


def test_comfortable_decel_mirrors_accel():
    assert comfortable_decel(P, 14, 10, 50, 3) == pytest.approx(-1.5 * tanh_oracle(4.0), rel=1e-9)


def test_comfortable_decel_half_aggressiveness():
    params = IadmParams(k=0.5)
    expected = -1.5 * tanh_oracle(1.0)  # -1.14239123393364...
    assert comfortable_decel(params, 10, 12, 50, 3) == pytest.approx(expected, rel=1e-9)


def test_gap_form_used_only_at_equal_speeds():
    assert comfortable_accel(P, 10, 10, 5.0, 3.0) == pytest.approx(1.5 * tanh_oracle(2.0))
    assert comfortable_accel(P, 10, 10 + 1e-12, 5.0, 3.0) < 1e-11


@given(st.floats(0, 40), st.floats(0, 40), st.floats(0, 300), st.floats(0, 300), st.floats(0.01, 1))
def test_comfort_envelope(v, vl, gap, s_safe, k):
    params = IadmParams(k=k)
    a = comfortable_accel(params, v, vl, gap, s_safe)
    b = comfortable_decel(params, v, vl, gap, s_safe)
    assert 0 <= a <= params.a_max and -params.b_max <= b <= 0
    # strictly inside while tanh has not rounded to 1.0 in double precision
    if k * max(abs(vl - v), abs(gap - s_safe)) < 18:
        assert a < params.a_max and b > -params.b_max


# next_speed -----------------------------------------------------------------

def test_dynamic_equilibrium_example():
    res = step(15.0, 15.0, 3.5)
    assert res.v_next == 15.0 and res.accel == 0.0
    assert res.branch in (Branch.ACCEL, Branch.DECEL)
    assert res.s_safe == pytest.approx(3.5) and res.s_net == pytest.approx(0.0, abs=1e-12)


def test_free_flow_hold():
    res = next_speed(P, IadmInput(25.0, PerceivedLead(300.0, 25.0, Source.FREE_FLOW)))
    assert res.v_next == 25.0 and res.accel == 0.0 and res.branch is Branch.FREE_FLOW


def test_max_brake_fallback():
    # s0 = 10 so that s_net = -5 is reachable with a non-negative gap:
    # s_safe = 10 + 0.5 + 0.5 = 11, gap = 6.
    params = IadmParams(s0=10.0)
    res = step(5.0, 0.0, 6.0, params)
    assert res.s_net == pytest.approx(-5.0)
    radicand = 0.0 - 2 * (-1.5 * tanh_oracle(5.0)) * (-5.0)
    assert radicand < 0
    assert res.branch is Branch.MAX_BRAKE
    assert res.v_next == pytest.approx(5.0 - 1.5 * 0.1, rel=1e-12)
    assert res.accel == pytest.approx(-1.5)


def test_negative_gap_is_a_collision():
    with pytest.raises(DomainError):
        PerceivedLead(-0.5, 0.0, Source.COMM)
    with pytest.raises(DomainError):
        next_speed(P, IadmInput(5.0, SimpleNamespace(gap=-0.5, lead_speed=0.0)))


def test_negative_speed_rejected():
    with pytest.raises(DomainError):
        step(-1.0, 0.0, 5.0)


def test_clamp_limits_hard_braking():
    # lead far slower inside a small positive s_net: Decel candidate demands more than b_max*dt
    res = step(20.0, 5.0, 8.0)
    assert res.branch is Branch.DECEL
    assert res.accel == -1.5
    assert res.v_next == pytest.approx(19.85)


def test_tie_breaking_prefers_accel():
    # v == lead == v_ff with zero spare gap: all three candidates equal 25
    res = step(25.0, 25.0, 2.0 + 2.5)
    assert res.v_next == 25.0 and res.branch is Branch.ACCEL


def test_params_validation():
    with pytest.raises(ConfigError):
        IadmParams(k=1.5)
    with pytest.raises(ConfigError):
        IadmParams(a_max=0)
    with pytest.raises(ConfigError):
        IadmParams(dt=float("nan"))


@settings(max_examples=300)
@given(st.floats(0, 40), st.floats(0, 40), st.floats(0, 400),
       st.floats(0.05, 1), st.floats(0.5, 3), st.floats(0.5, 3))
def test_output_bounds(v, vl, gap, k, a_max, b_max):
    params = IadmParams(a_max=a_max, b_max=b_max, k=k)
    res = step(v, vl, gap, params)
    assert res.v_next >= 0
    assert -b_max - 1e-12 <= res.accel <= a_max + 1e-12


@given(st.floats(0.5, 3), st.floats(0.5, 3), st.floats(0.5, 10), st.floats(0.05, 1))
def test_static_fixed_point(a_max, b_max, s0, k):
    params = IadmParams(a_max=a_max, b_max=b_max, s0=s0, k=k)
    res = step(0.0, 0.0, s0, params)
    assert res.v_next == 0.0 and res.accel == 0.0


@given(st.floats(0, 25), st.floats(0.5, 10), st.floats(0.05, 1), st.sampled_from([0.05, 0.1, 0.2]))
def test_dynamic_fixed_point(c, s0, k, dt):
    params = IadmParams(s0=s0, k=k, dt=dt)
    res = step(c, c, s0 + c * dt, params)
    assert abs(res.v_next - c) <= 1e-9 and abs(res.accel) <= 1e-8


def test_free_flow_convergence():
    v, seq = 15.0, [15.0]
    lead = PerceivedLead(300.0, 25.0, Source.FREE_FLOW)
    for _ in range(10000):
        v = next_speed(P, IadmInput(v, lead)).v_next
        seq.append(v)
        if abs(v - 25.0) < 0.01:
            break
    assert abs(seq[-1] - 25.0) < 0.01
    assert all(b >= a for a, b in zip(seq, seq[1:]))
    assert max(seq) <= 25.0


# monotonicity ---------------------------------------------------------------

H = 1e-3


def _unbounded(res):
    return res.branch not in (Branch.FREE_FLOW, Branch.MAX_BRAKE)


def _fd(v, vl, gap, var):
    base = step(v, vl, gap)
    bumped = step(*(x + H if name == var else x for name, x in (("v", v), ("vl", vl), ("gap", gap))))
    if not (_unbounded(base) and _unbounded(bumped)):
        return None
    return bumped.accel - base.accel


def _monotone_region_samples(n=400, seed=1):
    """States where the follower is not faster than its lead, or already inside its safe gap."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        v, vl, gap = rng.uniform(0, 24), rng.uniform(0, 24), rng.uniform(0.5, 60)
        if v > vl and gap > safe_gap(P, v, vl):
            continue
        out.append((v, vl, gap))
    return out


@pytest.mark.parametrize("var, sign", [("v", -1), ("vl", +1), ("gap", +1)])
def test_monotone_where_follower_is_not_gaining_with_spare_gap(var, sign):
    checked = 0
    for v, vl, gap in _monotone_region_samples():
        d = _fd(v, vl, gap, var)
        if d is None:
            continue
        checked += 1
        assert sign * d >= -1e-9, (v, vl, gap, d)
    assert checked >= 100


def test_accel_grows_with_speed_when_gaining_on_lead_with_spare_gap():
    # Comfortable acceleration uses |lead - v|: a follower already faster
    # than its lead but outside its safe gap keeps accelerating, and does so
    # harder the larger the speed difference.
    d = _fd(16.0, 15.0, 40.0, "v")
    assert step(16.0, 15.0, 40.0).branch is Branch.ACCEL
    assert d > 0
