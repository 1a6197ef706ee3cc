import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from oblimit.constitutive import (
    GibbsModel,
    ThermoPoint,
    alpha,
    beta,
    coefficient_table,
    density,
    entropy,
    gibbs_phi,
    helmholtz_psi,
    legendre_consistency,
    specific_heat_cp,
)
from oblimit.exceptions import DomainError

WATERLIKE = GibbsModel(rho0=1000.0, a=1e-3, b=1e-9, c0_dim=1.0)


def mp_phi(model, p, theta):
    a, b = mpmath.mpf(model.a), mpmath.mpf(model.b)
    rho0, c0 = mpmath.mpf(model.rho0), mpmath.mpf(model.c0_dim)
    p, theta = mpmath.mpf(p), mpmath.mpf(theta)
    return (mpmath.log(1 + b * p - a * theta) - mpmath.log(1 - a * theta)) / (b * rho0) - c0 * theta * (
        mpmath.log(theta) - 1
    )


def halton_points(n=100, p_range=(0.0, 1e7), t_range=(200.0, 600.0)):
    pts = qmc.Halton(d=2, scramble=False).random(n + 1)[1:]
    lo = [p_range[0], t_range[0]]
    hi = [p_range[1], t_range[1]]
    return qmc.scale(pts, lo, hi)


def test_density_example():
    assert density(GibbsModel(1.0, 0.1, 0.1, 1.0), ThermoPoint(1.0, 1.0)) == pytest.approx(1.0, abs=1e-15)


def test_alpha_beta_closed_form_values():
    m = GibbsModel(1.0, 0.1, 0.1, 1.0)
    assert alpha(m, (1.0, 1.0)) == pytest.approx(0.1, rel=1e-15)
    assert beta(m, (1.0, 1.0)) == pytest.approx(0.1, rel=1e-15)


def test_cp_example_value():
    # c0 + a^2/b * ((1)^-2 - (0.9)^-2) = 1 - 0.1 * 0.2345679...
    m = GibbsModel(1.0, 0.1, 0.1, 1.0)
    assert specific_heat_cp(m, (1.0, 1.0)) == pytest.approx(1 - 0.1 * (1 / 0.81 - 1), rel=1e-14)
    assert specific_heat_cp(m, (1.0, 1.0)) == pytest.approx(0.976543, abs=1e-6)


def test_cp_at_zero_pressure_is_c0():
    for c0 in (0.5, 1.0, 4180.0):
        m = GibbsModel(1000.0, 1e-3, 1e-9, c0)
        for theta in (1.0, 273.15, 500.0):
            assert specific_heat_cp(m, (0.0, theta)) == pytest.approx(c0, rel=1e-10)


@pytest.mark.parametrize("pt", [(1e5, 300.0), (0.0, 1.0), (5e6, 550.0)])
def test_phi_matches_high_precision(pt):
    with mpmath.workdps(60):
        ref = mp_phi(WATERLIKE, *pt)
    assert gibbs_phi(WATERLIKE, pt) == pytest.approx(float(ref), rel=1e-13)


def test_cp_and_entropy_match_high_precision():
    m = GibbsModel(1.0, 0.1, 0.1, 2.0)
    with mpmath.workdps(60):
        f = lambda p, t: mp_phi(m, p, t)  # noqa: E731
        cp_ref = -2 * mpmath.diff(lambda t: f(1, t), 2, 2)
        s_ref = -mpmath.diff(lambda t: f(1, t), 2)
    assert specific_heat_cp(m, (1.0, 2.0)) == pytest.approx(float(cp_ref), rel=1e-13)
    assert entropy(m, (1.0, 2.0)) == pytest.approx(float(s_ref), rel=1e-13)


def test_density_domain_violation():
    m = GibbsModel(1.0, 0.5, 0.0, 1.0)
    with pytest.raises(DomainError, match=r"1 \+ b\*p - a\*theta > 0"):
        density(m, (0.0, 3.0))


def test_potential_undefined_for_zero_b():
    m = GibbsModel(1.0, 0.1, 0.0, 1.0)
    assert density(m, (1.0, 1.0)) == pytest.approx(0.9)
    with pytest.raises(DomainError, match="b = 0"):
        gibbs_phi(m, (1.0, 1.0))
    with pytest.raises(DomainError):
        legendre_consistency(m, (1.0, 1.0))


def test_cold_branch_violation():
    with pytest.raises(DomainError, match="1 - a\\*theta"):
        gibbs_phi(GibbsModel(1.0, 0.1, 0.1), (100.0, 11.0))


@pytest.mark.parametrize("bad", [dict(rho0=0.0), dict(a=-1.0), dict(b=-1e-9), dict(c0_dim=0.0)])
def test_invalid_parameters(bad):
    kw = dict(rho0=1.0, a=0.1, b=0.1, c0_dim=1.0) | bad
    with pytest.raises(ValueError):
        GibbsModel(**kw)


def test_unknown_method():
    with pytest.raises(ValueError):
        alpha(WATERLIKE, (0.0, 300.0), method="spline")


@pytest.mark.parametrize("name", ["alpha", "beta", "specific_heat_cp", "entropy"])
def test_finite_differences_agree_with_closed_forms(name):
    fn = {"alpha": alpha, "beta": beta, "specific_heat_cp": specific_heat_cp, "entropy": entropy}[name]
    for p, theta in halton_points():
        exact = fn(WATERLIKE, (p, theta))
        approx = fn(WATERLIKE, (p, theta), method="fd")
        assert abs(approx - exact) <= 1e-6 * abs(exact) + 1e-12, (p, theta)


def test_alpha_over_beta_is_parameter_ratio():
    for p, theta in halton_points(50):
        r = alpha(WATERLIKE, (p, theta)) / beta(WATERLIKE, (p, theta))
        assert abs(r - WATERLIKE.a / WATERLIKE.b) <= 4 * np.spacing(WATERLIKE.a / WATERLIKE.b)


def test_density_times_pressure_derivative():
    for p, theta in halton_points(30):
        with mpmath.workdps(40):
            dphi = mpmath.diff(lambda q: mp_phi(WATERLIKE, q, theta), p)
        assert abs(density(WATERLIKE, (p, theta)) * float(dphi) - 1) < 1e-8


@settings(max_examples=60, deadline=None)
@given(
    p=st.floats(0.0, 1e7),
    theta=st.floats(1.0, 900.0),
    dp=st.floats(1.0, 1e6),
    dt=st.floats(0.1, 50.0),
)
def test_monotonicity(p, theta, dp, dt):
    if theta + dt >= 900.0:
        return
    assert density(WATERLIKE, (p + dp, theta)) > density(WATERLIKE, (p, theta))
    assert density(WATERLIKE, (p, theta + dt)) < density(WATERLIKE, (p, theta))


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0.0, 1e7), theta=st.floats(1.0, 900.0))
def test_specific_heat_does_not_exceed_c0(p, theta):
    # the mechanical correction is nonpositive for p >= 0
    assert specific_heat_cp(WATERLIKE, (p, theta)) <= WATERLIKE.c0_dim * (1 + 1e-15)


def test_legendre_on_grid():
    worst = 0.0
    for p in np.linspace(0.0, 1e7, 10):
        for theta in np.linspace(1.0, 900.0, 10):
            worst = max(worst, legendre_consistency(WATERLIKE, (p, theta)))
    assert worst <= 1e-6


def test_helmholtz_is_legendre_partner_of_gibbs():
    for p, theta in [(0.0, 300.0), (1e5, 300.0), (5e6, 400.0)]:
        rho = density(WATERLIKE, (p, theta))
        psi = helmholtz_psi(WATERLIKE, rho, theta)
        assert psi == pytest.approx(gibbs_phi(WATERLIKE, (p, theta)) - p / rho, rel=1e-12, abs=1e-9)


def test_coefficient_table_shape():
    rows = coefficient_table(WATERLIKE, np.linspace(0, 1e6, 5), np.linspace(280, 320, 5))
    assert len(rows) == 25
    assert all(len(r) == 7 for r in rows)
    assert all(math.isfinite(v) for r in rows for v in r)
