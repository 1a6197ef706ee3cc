"""Scales, dimensionless groups and the (a, b) <-> (A, B) parameter map.

The reference temperature and pressure scale with the thermal parameter as
``vartheta = vartheta0 (a vartheta0)^(-1/4)`` and ``pi = pi0 (a vartheta0)^(-1/4)``;
the length scale follows ``L = length_coeff * A^(-1/3)`` and the velocity
``V^2 = A g L``.  With these choices the Reynolds and Prandtl numbers and
``gamma = phi0 / (g L)`` stay bounded as ``A, B -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

from .constitutive import GibbsModel, gibbs_phi
from .exceptions import RegimeError

__all__ = [
    "BaseScales",
    "ScaleSet",
    "DimensionlessGroups",
    "ExpansionChecks",
    "RegimeReport",
    "NondimCoefficients",
    "compute_AB",
    "invert_AB",
    "x_AB",
    "scales_from_a",
    "thermal_scales",
    "ThermalScales",
    "dimensionless_groups",
    "physical_groups",
    "limit_groups",
    "k1_model",
    "verify_assumptions",
    "check_regimes",
]


@dataclass(frozen=True)
class BaseScales:
    """Constants that do not depend on the material parameters ``a, b``."""

    vartheta0: float = 1.0
    pi0: float = 1.0
    theta_r: float = 10.0
    g: float = 9.81
    mu: float = 0.1
    lam: float = 0.1
    kappa: float = 0.1
    rho0: float = 1.0
    c0_dim: float = 1.0
    length_coeff: float = 1.0

    def __post_init__(self):
        for name in ("vartheta0", "pi0", "g", "rho0", "c0_dim", "length_coeff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        _check_transport(self.mu, self.lam, self.kappa)


def _check_transport(mu, lam, kappa):
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    if 3 * lam + 2 * mu < 0:
        raise ValueError(f"3*lambda + 2*mu must be nonnegative, got {3 * lam + 2 * mu}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")


@dataclass(frozen=True)
class ScaleSet:
    """Fully populated reference scales for one parameter pair ``(a, b)``."""

    L: float
    T: float
    V: float
    pi: float
    vartheta: float
    theta_r: float
    phi0: float
    g: float
    mu: float
    lam: float
    kappa: float
    vartheta0: float
    pi0: float
    rho0: float = 1.0
    c0_dim: float = 1.0

    def __post_init__(self):
        for name in ("L", "T", "V", "pi", "vartheta", "phi0", "g", "vartheta0", "pi0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"scale {name} must be positive, got {getattr(self, name)}")
        if not math.isclose(self.V * self.T, self.L, rel_tol=1e-12):
            raise ValueError(f"V*T = {self.V * self.T} does not match L = {self.L}")
        _check_transport(self.mu, self.lam, self.kappa)


@dataclass(frozen=True)
class DimensionlessGroups:
    A: float
    B: float
    gamma: float
    re_mu: float
    re_lambda: float
    pr: float
    c0: float
    theta_r: float
    k1: float = 1.0
    in_band: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.A < 0 or self.B < 0:
            raise ValueError(f"A and B must be nonnegative, got A={self.A}, B={self.B}")
        for name in ("gamma", "re_mu", "re_lambda", "pr", "c0"):
            val = getattr(self, name)
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val}")
        for name in ("gamma", "re_mu", "pr", "c0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def is_limit(self):
        return self.A == 0 and self.B == 0

    @property
    def x_AB(self):
        return x_AB(self.A, self.B, self.theta_r)

    def as_dict(self):
        return asdict(self)


# -- parameter map ------------------------------------------------------------


def x_AB(A, B, theta_r):
    """``1 + A (1 + theta_r) - B``."""
    return 1.0 + A * (1.0 + theta_r) - B


def compute_AB(a, b, scales):
    """Nondimensional expansion and compressibility parameters of ``(a, b)``.

    ``scales`` needs ``vartheta``, ``pi`` and ``theta_r``.
    """
    av = a * scales.vartheta
    bp = b * scales.pi
    den = 1.0 + bp - av * (1.0 + scales.theta_r)
    if not den > 0:
        raise RegimeError(
            f"1 + b*pi - a*vartheta*(1 + theta_r) = {den:.6g} must be positive"
        )
    return av / den, bp / den


def invert_AB(A, B, scales):
    """Dimensional ``(a, b)`` mapped to ``(A, B)`` under the default scale choice."""
    x = x_AB(A, B, scales.theta_r)
    if not x > 0:
        raise RegimeError(f"x_AB = 1 + A(1+theta_r) - B = {x:.6g} must be positive")
    if A < 0 or B < 0:
        raise RegimeError(f"A and B must be nonnegative, got A={A}, B={B}")
    a = (A / x) ** (4.0 / 3.0) / scales.vartheta0
    b = B * A ** (1.0 / 3.0) / x ** (4.0 / 3.0) / scales.pi0
    return a, b


def _phi0(a, b, vartheta, pi, base):
    """Gibbs-energy scale ``phi(pi, vartheta b pi0 / (a vartheta0))``."""
    theta_star = vartheta * b * base.pi0 / (a * base.vartheta0)
    if b == 0:
        # limit of the mechanical term; the heat term vanishes with theta_star
        return pi / base.rho0
    model = GibbsModel(base.rho0, a, b, base.c0_dim)
    return float(gibbs_phi(model, (pi, theta_star)))


@dataclass(frozen=True)
class ThermalScales:
    """Temperature and pressure scales alone; enough for ``compute_AB``."""

    vartheta: float
    pi: float
    theta_r: float


def thermal_scales(a, base: BaseScales) -> ThermalScales:
    if not a > 0:
        raise RegimeError(f"a must be positive, got {a}")
    av0 = a * base.vartheta0
    return ThermalScales(base.vartheta0 * av0**-0.25, base.pi0 * av0**-0.25, base.theta_r)


def scales_from_a(a, base: BaseScales, b: float = 0.0) -> ScaleSet:
    """Reference scales for thermal parameter ``a`` (and ``b`` for ``phi0``).

    ``phi0`` is positive only while ``b pi0 / (a vartheta0)^(5/4)`` is
    moderate; otherwise the heat part of the potential dominates and a
    ``RegimeError`` is raised.
    """
    th = thermal_scales(a, base)
    vartheta, pi = th.vartheta, th.pi
    A, _ = compute_AB(a, b, th)
    L = base.length_coeff * A ** (-1.0 / 3.0)
    V = math.sqrt(A * base.g * L)
    phi0 = _phi0(a, b, vartheta, pi, base)
    if not phi0 > 0:
        raise RegimeError(
            f"energy scale phi0 = {phi0:.6g} is not positive; "
            "b*pi0/(a*vartheta0)^(5/4) is too large for these scales"
        )
    return ScaleSet(
        L=L,
        T=L / V,
        V=V,
        pi=pi,
        vartheta=vartheta,
        theta_r=base.theta_r,
        phi0=phi0,
        g=base.g,
        mu=base.mu,
        lam=base.lam,
        kappa=base.kappa,
        vartheta0=base.vartheta0,
        pi0=base.pi0,
        rho0=base.rho0,
        c0_dim=base.c0_dim,
    )


def dimensionless_groups(scales: ScaleSet, A, B, band=(1e-2, 1e2)) -> DimensionlessGroups:
    """Groups multiplying the terms of the nondimensional system.

    A zero bulk viscosity gives ``re_lambda = inf``, which switches off the
    ``tr D`` terms in the solvers.
    """
    s = scales
    if s.mu == 0 or s.kappa == 0:
        raise RegimeError("mu and kappa must be positive for finite Reynolds and Prandtl numbers")
    gamma = s.phi0 / (s.g * s.L)
    re_mu = s.pi * s.V * s.L / (2 * s.mu * s.phi0)
    re_lambda = math.inf if s.lam == 0 else s.pi * s.V * s.L / (s.lam * s.phi0)
    pr = s.phi0 * s.mu / (s.vartheta * s.kappa)
    c0 = s.c0_dim * s.rho0 * s.vartheta0 / s.pi0
    k1 = s.rho0 * s.phi0 / s.pi
    lo, hi = band
    flags = {
        name: bool(lo <= val <= hi)
        for name, val in (("gamma", gamma), ("re_mu", re_mu), ("re_lambda", re_lambda), ("pr", pr))
    }
    return DimensionlessGroups(
        A=float(A),
        B=float(B),
        gamma=gamma,
        re_mu=re_mu,
        re_lambda=re_lambda,
        pr=pr,
        c0=c0,
        theta_r=s.theta_r,
        k1=k1,
        in_band=flags,
    )


def physical_groups(A, B, base: BaseScales = BaseScales(), band=(1e-2, 1e2)):
    """Groups for ``(A, B)`` reached through the physical scale model."""
    if A <= 0:
        raise RegimeError(f"A must be positive for a finite-parameter run, got {A}")
    a, b = invert_AB(A, B, base)
    scales = scales_from_a(a, base, b=b)
    return dimensionless_groups(scales, A, B, band=band)


def limit_groups(base: BaseScales = BaseScales()) -> DimensionlessGroups:
    """Groups of the limit system, i.e. ``physical_groups`` as ``A, B -> 0``.

    In that limit ``phi0 -> pi / rho0`` and ``L V -> length_coeff^(3/2) sqrt(g)``.
    """
    lv = base.length_coeff**1.5 * math.sqrt(base.g)
    re_mu = base.rho0 * lv / (2 * base.mu)
    re_lambda = math.inf if base.lam == 0 else base.rho0 * lv / base.lam
    return DimensionlessGroups(
        A=0.0,
        B=0.0,
        gamma=base.pi0 / (base.rho0 * base.g * base.length_coeff),
        re_mu=re_mu,
        re_lambda=re_lambda,
        pr=base.pi0 * base.mu / (base.rho0 * base.vartheta0 * base.kappa),
        c0=base.c0_dim * base.rho0 * base.vartheta0 / base.pi0,
        theta_r=base.theta_r,
        k1=1.0,
    )


def k1_model(A, B, base: BaseScales = BaseScales()):
    """``rho0 phi0 / pi`` as a closed form in ``(A, B)``.

    Equals ``-(x/B) log(1 - B/x) - c (B/A) (log(vartheta0 x^(1/3) B / A^(4/3)) - 1)``
    with ``c = c0_dim rho0 vartheta0 / pi0``; tends to 1 as ``A, B -> 0``.
    """
    x = x_AB(A, B, base.theta_r)
    c = base.c0_dim * base.rho0 * base.vartheta0 / base.pi0
    r = B / x
    mech = 1.0 if B == 0 else -math.log1p(-r) / r
    if B == 0:
        return mech
    heat = c * (B / A) * (math.log(base.vartheta0 * x ** (1 / 3) * B / A ** (4 / 3)) - 1.0)
    return mech - heat


# -- coefficient provider ------------------------------------------------------


class NondimCoefficients:
    """Coefficients of the nondimensional system for the logarithmic Gibbs model.

    All methods take the nondimensional pressure and temperature and work on
    scalars, arrays or sympy expressions alike.

    ``density``      ``1 / d_p phi``
    ``alpha``        ``d_thetap phi / d_p phi``
    ``beta``         ``-d_pp phi / d_p phi``
    ``heat``         ``-(theta + theta_r) d_thetatheta phi``
    """

    def __init__(self, A, B, theta_r, c0, k1=1.0):
        self.A = A
        self.B = B
        self.theta_r = theta_r
        self.c0 = c0
        self.k1 = k1
        self.x = x_AB(A, B, theta_r)

    @classmethod
    def from_groups(cls, groups: DimensionlessGroups):
        return cls(groups.A, groups.B, groups.theta_r, groups.c0, groups.k1)

    def bracket(self, p, theta):
        """``1 + B (p - 1) - A (theta - 1)``."""
        return 1 + self.B * (p - 1) - self.A * (theta - 1)

    def density(self, p, theta):
        return self.k1 * self.bracket(p, theta) / self.x

    def alpha(self, p, theta):
        return self.A / self.bracket(p, theta)

    def beta(self, p, theta):
        return self.B / self.bracket(p, theta)

    def c1(self, p, theta):
        A, B = self.A, self.B
        n = self.bracket(p, theta)
        m = 1 - B - A * (theta - 1)
        return -self.x * p * (theta + self.theta_r) * (2 + B * (p - 2) - 2 * A * (theta - 1)) / (
            n**2 * m**2
        )

    def heat(self, p, theta):
        return (self.c0 + self.A**2 * self.c1(p, theta)) / self.k1

    def density_heat(self, p, theta):
        """``density * heat``; the ``k1`` factors cancel."""
        return self.bracket(p, theta) / self.x * (self.c0 + self.A**2 * self.c1(p, theta))

    def check_domain(self, p, theta):
        n = self.bracket(p, theta)
        m = 1 - self.B - self.A * (theta - 1)
        if np.any(n <= 0) or np.any(m <= 0):
            raise RegimeError("equation-of-state bracket left the admissible domain")
        if np.any(theta + self.theta_r <= 0):
            raise RegimeError("theta + theta_r must stay positive")


# -- assumption checks ---------------------------------------------------------


@dataclass
class ExpansionChecks:
    """Sup-norm summary of how the Gibbs model realises the expansion assumptions.

    ``k1``, ``rho_r_sup`` and ``c1_sup`` evaluate the asymptotic closed forms;
    the ``*_model`` fields evaluate the same quantities directly from the
    Gibbs model, and ``density_identity_defect`` is the sup of
    ``|1/d_p phi - k1 (1 - A(theta+theta_r) + B p + rho_r)|`` for the closed-form pair.
    """

    A: float
    B: float
    x_AB: float
    k1: float
    k2: float
    k1k2: float
    rho_r_sup: float
    rho_r_ratio: float
    c1_sup: float
    alpha1_sup: float
    alpha2_sup: float
    beta1_sup: float
    beta2_sup: float
    bracket_at_reference: float
    k1_model: float
    rho_r_model_sup: float
    density_identity_defect: float
    sign_structure_defect: float
    grid: tuple = ()

    def as_dict(self):
        return asdict(self)


def _mp_k1_closed(A, B, base):
    mpf = mpmath.mpf
    x = 1 + A * (1 + mpf(base.theta_r)) - B
    c = mpf(base.c0_dim) * mpf(base.rho0) * mpf(base.vartheta0) / mpf(base.pi0)
    if B == 0:
        return mpf(1)
    r13 = B / x ** (mpf(13) / 12)
    mech = (x / B) * (mpmath.log(1 + B / x - r13) - mpmath.log(1 - r13))
    ratio = B / A ** (mpf(4) / 3)
    heat = (
        A ** (mpf(1) / 3)
        * c
        / x ** (mpf(1) / 12)
        * ratio
        * (mpmath.log(mpf(base.vartheta0) * x ** (mpf(1) / 4) * ratio) - 1)
    )
    return mech - heat


def _mp_k1_model(A, B, base):
    """``rho0 phi0 / pi`` through the dimensional potential, in working precision."""
    mpf = mpmath.mpf
    th0, pi0 = mpf(base.vartheta0), mpf(base.pi0)
    rho0, c0 = mpf(base.rho0), mpf(base.c0_dim)
    x = 1 + A * (1 + mpf(base.theta_r)) - B
    a = (A / x) ** (mpf(4) / 3) / th0
    b = B * A ** (mpf(1) / 3) / x ** (mpf(4) / 3) / pi0
    vt = th0 * (a * th0) ** (mpf(-1) / 4)
    pp = pi0 * (a * th0) ** (mpf(-1) / 4)
    if B == 0:
        return mpf(1)
    ts = vt * b * pi0 / (a * th0)
    phi0 = (mpmath.log(1 + b * pp - a * ts) - mpmath.log(1 - a * ts)) / (b * rho0) - c0 * ts * (
        mpmath.log(ts) - 1
    )
    return rho0 * phi0 / pp, a, b, vt, pp


def verify_assumptions(
    A,
    B,
    grid=((0.5, 1.5), (0.5, 1.5)),
    base: BaseScales = BaseScales(),
    n: int = 21,
    dps: int = 50,
) -> ExpansionChecks:
    """Evaluate the model's expansion identities over a ``(p, theta)`` rectangle.

    All arithmetic runs at ``dps`` significant digits; ``k1`` involves
    differences of logarithms that cancel catastrophically in double precision
    once ``B`` drops below about 1e-8.
    """
    (p_lo, p_hi), (t_lo, t_hi) = grid
    if A <= 0 or B < 0:
        raise RegimeError(f"need A > 0 and B >= 0, got A={A}, B={B}")
    with mpmath.workdps(dps):
        mpf = mpmath.mpf
        A_, B_ = mpf(A), mpf(B)
        thr = mpf(base.theta_r)
        x = 1 + A_ * (1 + thr) - B_
        if x <= 0:
            raise RegimeError(f"x_AB = {x} must be positive")
        k1 = _mp_k1_closed(A_, B_, base)
        k2 = 1 / k1
        if B_ == 0:
            k1m, a, b, vt, pp = mpf(1), None, None, None, None
        else:
            k1m, a, b, vt, pp = _mp_k1_model(A_, B_, base)
        ps = [p_lo + (p_hi - p_lo) * mpf(i) / (n - 1) for i in range(n)]
        ts = [t_lo + (t_hi - t_lo) * mpf(j) / (n - 1) for j in range(n)]
        sups = dict.fromkeys(
            ("rho", "rho_m", "c1", "a1", "a2", "defect", "sign"), mpf(0)
        )
        for p in ps:
            for t in ts:
                nb = 1 + B_ * (p - 1) - A_ * (t - 1)
                m = 1 - B_ - A_ * (t - 1)
                if nb <= 0 or m <= 0 or t + thr <= 0:
                    raise RegimeError(f"grid point (p={p}, theta={t}) outside the admissible domain")
                rho_r = (
                    -A_ * B_ * ((p - 1) * (1 + thr) / x + (t - 1) / x)
                    + A_**2 * (t - 1) * (1 + thr) / x
                    + B_**2 * (p - 1) / x
                )
                lin = 1 - A_ * (t + thr) + B_ * p
                dens = k1m * nb / x
                rho_r_m = dens / k1m - lin
                c1 = -x * p * (t + thr) * (2 + B_ * (p - 2) - 2 * A_ * (t - 1)) / (nb**2 * m**2)
                sups["rho"] = max(sups["rho"], abs(rho_r))
                sups["rho_m"] = max(sups["rho_m"], abs(rho_r_m))
                sups["c1"] = max(sups["c1"], abs(c1))
                sups["a1"] = max(sups["a1"], abs((t - 1) / nb))
                sups["a2"] = max(sups["a2"], abs((p - 1) / nb))
                sups["defect"] = max(sups["defect"], abs(dens - k1 * (lin + rho_r)))
                if a is not None:
                    # mass-constraint coefficients through the dimensional model
                    den = 1 + b * pp * p - a * vt * (t + thr)
                    coef_t = vt * a / den
                    coef_p = pp * b / den
                    sups["sign"] = max(
                        sups["sign"], abs(coef_t / A_ - coef_p / B_) / abs(coef_t / A_)
                    )
        bracket_ref = 1 - (B_ * 0 - A_ * 0) / (1 + B_ * 0 - A_ * 0)
        denom = A_**2 + B_**2 + A_ * B_
        return ExpansionChecks(
            A=float(A),
            B=float(B),
            x_AB=float(x),
            k1=float(k1),
            k2=float(k2),
            k1k2=float(k1 * k2),
            rho_r_sup=float(sups["rho"]),
            rho_r_ratio=float(sups["rho"] / denom),
            c1_sup=float(sups["c1"]),
            alpha1_sup=float(sups["a1"]),
            alpha2_sup=float(sups["a2"]),
            # the model shares one bracket between the two coefficients
            beta1_sup=float(sups["a1"]),
            beta2_sup=float(sups["a2"]),
            bracket_at_reference=float(bracket_ref),
            k1_model=float(k1m),
            rho_r_model_sup=float(sups["rho_m"]),
            density_identity_defect=float(sups["defect"]),
            sign_structure_defect=float(sups["sign"]),
            grid=((float(p_lo), float(p_hi)), (float(t_lo), float(t_hi))),
        )


def mass_coefficient(A, B, p, theta):
    """Coefficient of the temperature rate in the mass constraint, ``A * bracket``.

    At ``(p, theta) = (1, 1)`` the bracket is exactly one.
    """
    num = B * (p - 1) - A * (theta - 1)
    return A * (1 - num / (1 + num))


# -- regimes --------------------------------------------------------------------


@dataclass
class RegimeReport:
    A: float
    B: float
    B_over_A: float
    limit_regime: bool
    expansion_regime: bool
    expansion_lower: bool
    expansion_upper: bool
    example_condition: float
    example_regime: bool

    def as_dict(self):
        return asdict(self)


def check_regimes(A, B, theta_r=10.0, example_threshold=0.5, rel_tol=1e-12) -> RegimeReport:
    """Classify ``(A, B)`` against the limit, expansion and small-compressibility regimes.

    The limit regime ``B = o(A)`` is checked along the default family:
    pass when ``B <= A^2``.  The expansion regime needs ``A^2 <= B <= A``.
    The small-compressibility discriminant is ``b pi0 / (a vartheta0)^(5/4)``, which equals
    ``(B / A^(4/3)) x_AB^(1/3)`` under the default scales.
    """
    slack = 1 + rel_tol
    lower = A * A <= B * slack
    upper = B <= A * slack
    if A > 0:
        x = x_AB(A, B, theta_r)
        cond = (B / A ** (4.0 / 3.0)) * x ** (1.0 / 3.0) if x > 0 else math.inf
        ratio = B / A
    else:
        cond = math.inf if B > 0 else 0.0
        ratio = math.inf if B > 0 else 0.0
    return RegimeReport(
        A=A,
        B=B,
        B_over_A=ratio,
        limit_regime=bool(B <= A * A * slack),
        expansion_regime=bool(lower and upper),
        expansion_lower=bool(lower),
        expansion_upper=bool(upper),
        example_condition=cond,
        example_regime=bool(cond <= example_threshold),
    )
