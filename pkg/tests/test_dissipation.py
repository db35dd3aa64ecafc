import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from granular_cooling.dissipation import phi, phi_asymptotics, psi, verify_psi_shape
from granular_cooling.errors import DomainError
from granular_cooling.restitution import Constant, PowerLaw, Viscoelastic, check_assumptions, eval_theta, invert_theta


@given(st.floats(0.05, 1.0), st.floats(1e-6, 1e6))
def test_psi_constant_closed_form(e0, r):
    assert psi(Constant(e0), r) == pytest.approx((1 - e0**2) * r**1.5 / 8, rel=1e-14)


def test_psi_elastic_is_zero():
    assert psi(Constant(1.0), 7.0) == 0.0


def test_psi_domain():
    with pytest.raises(DomainError):
        psi(Viscoelastic(1.0), -1.0)
    assert psi(Viscoelastic(1.0), 0.0) == 0.0


def test_psi_power_law_against_direct_formula():
    # unclamped region: 1 - e^2 = 2 alpha s^g - alpha^2 s^(2g), integrate z^3 term by term
    alpha, g = 0.1, 0.5
    m = PowerLaw(alpha, g)
    r = 2.0
    sr = math.sqrt(r)
    assert sr < m.clamp_point
    integral = 2 * alpha * sr**g / (4 + g) - alpha**2 * sr ** (2 * g) / (4 + 2 * g)
    assert psi(m, r) == pytest.approx(0.5 * r**1.5 * integral, rel=1e-12)


@given(st.floats(0.05, 10.0), st.floats(1e-4, 1e4))
def test_psi_viscoelastic_bounded_by_elastic_limit(a, r):
    val = psi(Viscoelastic(a), r)
    assert 0 < val <= r**1.5 / 8 * (1 + 1e-12)


def test_psi_vectorised():
    m = Viscoelastic(1.0)
    r = np.array([0.5, 2.0, 8.0])
    assert np.allclose(psi(m, r), [psi(m, x) for x in r], rtol=0, atol=0)


@given(st.floats(0.05, 1.0), st.floats(1e-3, 1e3))
def test_phi_constant_closed_form(e0, rho):
    assert phi(Constant(e0), rho) == pytest.approx((1 - e0**2) / e0**2, rel=1e-14)


@pytest.mark.parametrize("model", [Viscoelastic(0.5), Viscoelastic(1.0), PowerLaw(0.3, 0.4), PowerLaw(2.0, 1.0)])
@pytest.mark.parametrize("rho", [1e-4, 0.3, 1.0, 7.0, 1e3])
def test_phi_matches_inverse_identity(model, rho):
    # integrating r - theta theta' exactly gives (theta^-1(rho) / rho)^2 - 1,
    # written without cancellation using s - rho = s (1 - e(s))
    s = invert_theta(model, rho)
    exact = s * float(model.one_minus_e(s)) * (s + rho) / rho**2
    assert phi(model, rho) == pytest.approx(exact, rel=1e-9)


def test_phi_domain():
    with pytest.raises(DomainError):
        phi(Viscoelastic(1.0), 0.0)


@pytest.mark.parametrize("model", [Constant(0.5), Viscoelastic(1.0), PowerLaw(0.5, 0.3)])
def test_psi_shape_passes(model):
    rep = verify_psi_shape(model, np.logspace(-6, 6, 200))
    assert rep.monotone and rep.convex


def test_psi_shape_needs_grid():
    with pytest.raises(DomainError):
        verify_psi_shape(Constant(0.5), np.linspace(0.1, 1, 10))


def test_phi_asymptotics_viscoelastic():
    m = Viscoelastic(1.0)
    rep = check_assumptions(m)
    asym = phi_asymptotics(m, rep.alpha, rep.gamma, rep.m)
    assert asym.small_ok and asym.large_ok


def test_phi_asymptotics_constant_skips_small():
    asym = phi_asymptotics(Constant(0.5), 0.0, 0.0, 1.0)
    assert asym.small_ok is None and asym.large_ok
