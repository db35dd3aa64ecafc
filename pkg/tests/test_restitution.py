import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from granular_cooling.errors import DomainError, InvariantViolation
from granular_cooling.restitution import (
    Constant,
    PowerLaw,
    Viscoelastic,
    check_assumptions,
    default_grid,
    describe,
    ell_gamma,
    eval_e,
    eval_theta,
    invert_theta,
    jacobian,
    model_from_dict,
)

speeds = st.floats(1e-6, 1e6, allow_nan=False)
visco_a = st.floats(0.05, 20.0)


def test_constant_values():
    m = Constant(0.7)
    assert eval_e(m, 3.0) == 0.7
    assert eval_theta(m, 2.0) == pytest.approx(1.4)
    assert jacobian(m, 5.0) == pytest.approx(0.7)


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.01])
def test_constant_rejects_out_of_range(bad):
    with pytest.raises(DomainError):
        Constant(bad)


def test_negative_speed_rejected():
    with pytest.raises(DomainError):
        eval_e(Constant(0.5), -1.0)


def test_viscoelastic_small_and_large_speed():
    m = Viscoelastic(1.0)
    assert eval_e(m, 0.0) == 1.0
    # e r^(1/3) -> a^(-5/3)
    r = 1e12
    assert eval_e(m, r) * r ** (1 / 3) == pytest.approx(1.0, rel=2e-3)


@given(visco_a, speeds)
def test_viscoelastic_residual(a, r):
    m = Viscoelastic(a)
    e = eval_e(m, r)
    assert 0 < e <= 1
    assert abs(e + a * r**0.2 * e**0.6 - 1.0) <= 1e-12


@given(visco_a, speeds)
def test_viscoelastic_one_minus_e_consistent(a, r):
    m = Viscoelastic(a)
    assert float(m.one_minus_e(r)) == pytest.approx(1.0 - float(m.e(r)), abs=1e-14)


@given(visco_a, st.floats(1e-4, 1e4))
def test_viscoelastic_derivative_matches_finite_difference(a, r):
    m = Viscoelastic(a)
    h = 1e-5 * r
    fd = (float(m.e(r + h)) - float(m.e(r - h))) / (2 * h)
    assert float(m.de(r)) == pytest.approx(fd, rel=1e-5, abs=1e-12)


@given(visco_a, speeds)
def test_invert_theta_round_trip(a, r):
    m = Viscoelastic(a)
    y = eval_theta(m, r)
    assert invert_theta(m, y) == pytest.approx(r, rel=1e-10)


@given(st.floats(0.01, 5.0), st.floats(0.05, 2.0), st.floats(1e-4, 1e4))
def test_power_law_theta_increasing(alpha, gamma, r):
    m = PowerLaw(alpha, gamma)
    assert jacobian(m, r) > 0
    assert eval_theta(m, r * 1.001) > eval_theta(m, r)


def test_power_law_floor_raised():
    m = PowerLaw(2.0, 1.0)
    assert m.floor == pytest.approx(0.5)
    assert m.clamp_point == pytest.approx(0.25)
    value, kink = jacobian(m, m.clamp_point, return_flag=True)
    assert kink
    assert value == pytest.approx(0.5 - 0.25 * 2.0)


def test_unclamped_power_law_fails_assumptions():
    m = PowerLaw(2.0, 1.0, None)
    rep = check_assumptions(m)
    assert not rep.structure[0][0]
    assert not rep.structure[1][0]
    assert not rep.ok


def test_unclamped_power_law_inversion_raises():
    with pytest.raises(InvariantViolation):
        invert_theta(PowerLaw(2.0, 1.0, None), 1.0)


def test_viscoelastic_assumptions_pass():
    rep = check_assumptions(Viscoelastic(1.0))
    assert rep.ok
    assert rep.gamma == pytest.approx(0.2, abs=0.01)
    assert rep.m == pytest.approx(1.5, abs=0.01)


def test_constant_assumptions():
    rep = check_assumptions(Constant(0.5))
    assert rep.ok
    assert rep.gamma == 0.0
    assert rep.m == 1.0
    assert rep.ell_gamma == pytest.approx(0.5)


def test_ell_gamma():
    assert ell_gamma(Constant(0.8), 0) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        ell_gamma(Viscoelastic(1.0), 0)
    # (1 - e) / r^(1/5) = a e^(3/5) increases to a as r -> 0
    for a in (0.5, 1.0, 2.0):
        assert ell_gamma(Viscoelastic(a), 0.2) == pytest.approx(a, rel=0.05)


def test_model_from_dict_and_describe():
    m = model_from_dict({"kind": "viscoelastic", "a": 2})
    assert m == Viscoelastic(2.0)
    assert describe(m) == "viscoelastic(a=2.0)"
    with pytest.raises(DomainError):
        model_from_dict({"kind": "bogus"})


def test_default_grid():
    g = default_grid()
    assert g[0] == pytest.approx(1e-8) and g[-1] == pytest.approx(1e8) and g.size == 2048
    assert np.all(np.diff(g) > 0)
