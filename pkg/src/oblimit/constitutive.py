"""A Gibbs free energy with a density linear in pressure and temperature.

The potential is

    phi(p, theta) = (b rho0)^-1 [ln(1 + b p - a theta) - ln(1 - a theta)]
                    - c0 theta (ln theta - 1)

and every thermodynamic coefficient used by the flow solvers is derived from
it.  Each coefficient is available through its closed form and through
central finite differences of ``phi``; ``method="fd"`` selects the latter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "GibbsModel",
    "ThermoPoint",
    "LOG_MARGIN",
    "gibbs_phi",
    "density",
    "alpha",
    "beta",
    "specific_heat_cp",
    "entropy",
    "helmholtz_psi",
    "legendre_consistency",
    "coefficient_table",
]

#: Log arguments below this value are rejected.
LOG_MARGIN = 1e-10

_EPS = np.finfo(float).eps
_H1 = _EPS ** (1.0 / 3.0)
_H2 = _EPS ** (1.0 / 4.0)


@dataclass(frozen=True)
class GibbsModel:
    """Parameters of the example potential.

    Attributes
    ----------
    rho0 : float
        Reference density.
    a : float
        Thermal parameter (1/K).
    b : float
        Compressibility parameter (1/Pa).  ``b == 0`` leaves the density
        closed forms usable but the potential itself undefined.
    c0_dim : float
        Specific-heat constant of the potential.
    """

    rho0: float
    a: float
    b: float
    c0_dim: float = 1.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if not self.a >= 0:
            raise ValueError(f"a must be nonnegative, got {self.a}")
        if not self.b >= 0:
            raise ValueError(f"b must be nonnegative, got {self.b}")
        if not self.c0_dim > 0:
            raise ValueError(f"c0_dim must be positive, got {self.c0_dim}")

    def eos_bracket(self, p, theta):
        """``1 + b p - a theta``, the density divided by ``rho0``."""
        return 1.0 + self.b * p - self.a * theta

    def check_density_domain(self, p, theta):
        bracket = self.eos_bracket(p, theta)
        if np.any(bracket < LOG_MARGIN):
            raise DomainError(
                "1 + b*p - a*theta > 0 violated "
                f"(min value {np.min(bracket):.6g} at b={self.b}, a={self.a})"
            )
        return bracket

    def check_potential_domain(self, p, theta):
        if self.b == 0:
            raise DomainError(
                "the potential has a 1/b prefactor and is undefined for b = 0; "
                "only density-based coefficients are available"
            )
        bracket = self.check_density_domain(p, theta)
        cold = 1.0 - self.a * np.asarray(theta, dtype=float)
        if np.any(cold < LOG_MARGIN):
            raise DomainError(f"1 - a*theta > 0 violated (min value {np.min(cold):.6g})")
        if np.any(np.asarray(theta) < LOG_MARGIN):
            raise DomainError(f"theta > 0 violated (min value {np.min(theta):.6g})")
        return bracket, cold


@dataclass(frozen=True)
class ThermoPoint:
    """Independent variables of the Gibbs picture."""

    p: float
    theta: float


def _unpack(pt):
    if isinstance(pt, ThermoPoint):
        return pt.p, pt.theta
    p, theta = pt
    return p, theta


def _phi(model, p, theta):
    _, cold = model.check_potential_domain(p, theta)
    # log1p form keeps the two nearly equal logarithms from cancelling
    mech = np.log1p(model.b * p / cold) / (model.b * model.rho0)
    return mech - model.c0_dim * theta * (np.log(theta) - 1.0)


def _phi_ext(model, p, theta):
    """``phi`` in extended precision, used only inside difference quotients."""
    model.check_potential_domain(float(p), float(theta))
    ld = np.longdouble
    p, theta = ld(p), ld(theta)
    b, a = ld(model.b), ld(model.a)
    cold = 1 - a * theta
    mech = np.log1p(b * p / cold) / (b * ld(model.rho0))
    return mech - ld(model.c0_dim) * theta * (np.log(theta) - 1)


def gibbs_phi(model: GibbsModel, pt) -> float:
    """Value of the potential at ``pt``."""
    p, theta = _unpack(pt)
    return _phi(model, p, theta)


def density(model: GibbsModel, pt) -> float:
    """``rho0 (1 + b p - a theta)``; reciprocal of the pressure derivative of phi."""
    p, theta = _unpack(pt)
    return model.rho0 * model.check_density_domain(p, theta)


# -- finite-difference kernels ------------------------------------------------


def _step(x, h):
    # exact binary step so that x +- h is representable
    step = h * max(1.0, abs(float(x)))
    return np.longdouble(float(x) + step) - np.longdouble(float(x))


def _dphi_dp(model, p, theta):
    h = _step(p, _H1)
    return (_phi_ext(model, p + h, theta) - _phi_ext(model, p - h, theta)) / (2 * h)


def _dphi_dtheta(model, p, theta):
    h = _step(theta, _H1)
    return (_phi_ext(model, p, theta + h) - _phi_ext(model, p, theta - h)) / (2 * h)


def _d2phi_dp2(model, p, theta):
    h = _step(p, _H2)
    return (
        _phi_ext(model, p + h, theta) - 2 * _phi_ext(model, p, theta) + _phi_ext(model, p - h, theta)
    ) / h**2


def _d2phi_dtheta2(model, p, theta):
    h = _step(theta, _H2)
    return (
        _phi_ext(model, p, theta + h) - 2 * _phi_ext(model, p, theta) + _phi_ext(model, p, theta - h)
    ) / h**2


def _d2phi_dtheta_dp(model, p, theta):
    hp = _step(p, _H2)
    ht = _step(theta, _H2)
    return (
        _phi_ext(model, p + hp, theta + ht)
        - _phi_ext(model, p + hp, theta - ht)
        - _phi_ext(model, p - hp, theta + ht)
        + _phi_ext(model, p - hp, theta - ht)
    ) / (4 * hp * ht)


def _check_method(method):
    if method not in ("analytic", "fd"):
        raise ValueError(f"method must be 'analytic' or 'fd', got {method!r}")


# -- coefficients -------------------------------------------------------------


def alpha(model: GibbsModel, pt, method: str = "analytic") -> float:
    """Thermal expansion coefficient ``phi_thetap / phi_p``.

    Closed form ``a / (1 + b p - a theta)``.
    """
    _check_method(method)
    p, theta = _unpack(pt)
    if method == "analytic":
        return model.a / model.check_density_domain(p, theta)
    return float(_d2phi_dtheta_dp(model, p, theta) / _dphi_dp(model, p, theta))


def beta(model: GibbsModel, pt, method: str = "analytic") -> float:
    """Isothermal compressibility ``-phi_pp / phi_p``.

    Closed form ``b / (1 + b p - a theta)``.
    """
    _check_method(method)
    p, theta = _unpack(pt)
    if method == "analytic":
        return model.b / model.check_density_domain(p, theta)
    return float(-_d2phi_dp2(model, p, theta) / _dphi_dp(model, p, theta))


def specific_heat_cp(model: GibbsModel, pt, method: str = "analytic") -> float:
    """Specific heat at constant pressure ``-theta phi_thetatheta``."""
    _check_method(method)
    p, theta = _unpack(pt)
    if method == "fd":
        return float(-theta * _d2phi_dtheta2(model, p, theta))
    bracket, cold = model.check_potential_domain(p, theta)
    a, b = model.a, model.b
    # bracket^-2 - cold^-2 written without cancellation
    diff = -b * p * (bracket + cold) / (bracket * cold) ** 2
    return model.c0_dim + theta * a**2 / (b * model.rho0) * diff


def entropy(model: GibbsModel, pt, method: str = "analytic") -> float:
    """Specific entropy ``-phi_theta``."""
    _check_method(method)
    p, theta = _unpack(pt)
    if method == "fd":
        return float(-_dphi_dtheta(model, p, theta))
    bracket, cold = model.check_potential_domain(p, theta)
    diff = -model.b * p / (bracket * cold)
    return model.a / (model.b * model.rho0) * diff + model.c0_dim * np.log(theta)


# -- Helmholtz picture --------------------------------------------------------


def _log1p_minus_ratio(y):
    """``log(1 + y) - y / (1 + y)`` without cancellation for small ``y``."""
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.log1p(y) - y / (1.0 + y)
    small = np.abs(y) < 1e-2
    if np.any(small):
        ys = y[small]
        # sum_{n>=2} (-1)^n (n-1) y^n / n
        acc = np.zeros_like(ys)
        for n in range(12, 1, -1):
            acc = acc * ys + (-1) ** n * (n - 1) / n
        out[small] = acc * ys**2
    return float(out[0]) if scalar else out


def pressure_from_density(model: GibbsModel, rho, theta):
    """Invert the linear equation of state for the pressure."""
    if model.b == 0:
        raise DomainError("pressure cannot be recovered from density when b = 0")
    return (rho / model.rho0 - 1.0 + model.a * theta) / model.b


def _psi_mech(model, p, theta):
    _, cold = model.check_potential_domain(p, theta)
    return _log1p_minus_ratio(model.b * p / cold) / (model.b * model.rho0)


def _psi_at(model, p, theta):
    return _psi_mech(model, p, theta) - model.c0_dim * theta * (np.log(theta) - 1.0)


def helmholtz_psi(model: GibbsModel, rho, theta):
    """Helmholtz free energy ``psi(rho, theta) = phi(p, theta) - p / rho``.

    With ``y = b p / (1 - a theta)`` the mechanical part is
    ``(log(1 + y) - y / (1 + y)) / (b rho0)``, which is evaluated directly.
    """
    return _psi_at(model, pressure_from_density(model, rho, theta), theta)


def legendre_consistency(model: GibbsModel, pt, fd_step: float | None = None) -> float:
    """Relative residual of ``p = rho^2 d psi / d rho`` at ``pt``.

    ``fd_step`` is relative to the density; the default is the cube root of
    machine epsilon.  The derivative uses the fourth-order central stencil,
    since ``rho^2`` amplifies the truncation error.  Perturbed pressures are formed as offsets
    ``p + drho / (rho0 b)`` so that the equation-of-state inversion does not
    lose the digits of ``p``.
    """
    p, theta = _unpack(pt)
    rho = density(model, (p, theta))
    if model.b == 0:
        raise DomainError("pressure cannot be recovered from density when b = 0")
    h = (fd_step if fd_step is not None else _H1) * rho
    h = (rho + h) - rho
    dp = h / (model.rho0 * model.b)
    # the theta-only heat term is identical at every stencil point and drops out
    try:
        f = [_psi_mech(model, p + k * dp, theta) for k in (-2, -1, 1, 2)]
    except DomainError as exc:
        raise DomainError(f"density perturbation left the admissible domain: {exc}") from exc
    dpsi = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    return float(abs(rho**2 * dpsi - p) / max(1.0, abs(p)))


def coefficient_table(model: GibbsModel, p_values, theta_values):
    """Rows ``(p, theta, rho, alpha, beta, c_p, eta)`` over a tensor grid."""
    rows = []
    for p in p_values:
        for theta in theta_values:
            pt = ThermoPoint(float(p), float(theta))
            rows.append(
                (
                    pt.p,
                    pt.theta,
                    float(density(model, pt)),
                    float(alpha(model, pt)),
                    float(beta(model, pt)),
                    float(specific_heat_cp(model, pt)),
                    float(entropy(model, pt)),
                )
            )
    return rows
