"""Manufactured solutions and their forcing terms for the three systems.

Sources are derived symbolically and compiled with ``sympy.lambdify``.  The
divergence-free systems take their velocity from a stream function, and the
initial velocity is built from stream-function differences so that it is
discretely divergence-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .grid import FieldState, Grid
from .nondim import DimensionlessGroups, NondimCoefficients

x, y, t = sp.symbols("x y t", real=True)

SYSTEMS = ("ob", "expansion", "full")


def default_fields(system: str, lx: float = 1.0, amplitude: float = 1.0):
    """Smooth fields compatible with the walls (no slip, theta = +-1/2).

    Returns a dict of sympy expressions with keys ``psi`` or ``u, v``,
    ``theta`` and ``p`` (limit and expansion) or ``q`` (full).
    """
    k = 2 * sp.pi / lx
    a = sp.Rational(1, 2) * amplitude
    psi = a / sp.pi * (1 + sp.sin(2 * t) / 2) * sp.sin(sp.pi * y) ** 2 * sp.sin(k * x)
    theta = sp.Rational(1, 2) - y + sp.Rational(1, 5) * amplitude * (1 + sp.cos(2 * t) / 2) * sp.sin(
        sp.pi * y
    ) * sp.cos(k * x)
    if system in ("ob", "expansion"):
        p = sp.Rational(3, 10) * amplitude * sp.cos(t) * sp.cos(k * x) * sp.cos(sp.pi * y)
        return {"psi": psi, "theta": theta, "p": p}
    if system == "full":
        u = sp.diff(psi, y) + sp.Rational(1, 10) * amplitude * (1 + sp.sin(t)) * sp.sin(sp.pi * y) ** 2 * sp.cos(k * x)
        v = -sp.diff(psi, x) + sp.Rational(1, 10) * amplitude * sp.cos(t) * sp.sin(sp.pi * y) ** 2 * sp.sin(k * x)
        q = sp.Rational(3, 10) * amplitude * sp.cos(t) * sp.cos(k * x) * sp.cos(sp.pi * y)
        return {"u": u, "v": v, "theta": theta, "q": q}
    raise ValueError(f"unknown system {system!r}")


def _lap(e):
    return sp.diff(e, x, 2) + sp.diff(e, y, 2)


def _velocity(fields):
    if "psi" in fields:
        return sp.diff(fields["psi"], y), -sp.diff(fields["psi"], x)
    return fields["u"], fields["v"]


def symbolic_sources(fields: dict, system: str, groups: DimensionlessGroups, coeffs: NondimCoefficients | None = None):
    """Residuals of the selected system evaluated on ``fields``.

    Keys ``u``, ``v`` (momentum), ``theta`` (energy) and, for the full
    system, ``mass``.  The body-force potential is ``f = -y``.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    u, v = _velocity(fields)
    th = fields["theta"]
    f = -y
    mu1 = sp.Rational(1, 2) / groups.re_mu
    chi = 1 / (groups.pr * groups.re_mu)

    def material(e):
        return sp.diff(e, t) + u * sp.diff(e, x) + v * sp.diff(e, y)

    if system in ("ob", "expansion"):
        p = fields["p"]
        if system == "ob":
            K, s = 1, 1
        else:
            K, s = 1 / sp.Float(groups.A), sp.Float(groups.A)
        su = material(u) - mu1 * _lap(u) + sp.diff(p, x) / s - (K - th) * sp.diff(f, x)
        sv = material(v) - mu1 * _lap(v) + sp.diff(p, y) / s - (K - th) * sp.diff(f, y)
        st = groups.c0 * material(th) - chi * _lap(th)
        return {"u": su, "v": sv, "theta": st}

    co = coeffs or NondimCoefficients.from_groups(groups)
    A = groups.A
    q = fields["q"]
    p = f / groups.gamma + A * q
    rho = co.density(p, th)
    mu2 = mu1 + (0 if np.isinf(groups.re_lambda) else 1 / groups.re_lambda)
    div = sp.diff(u, x) + sp.diff(v, y)
    su = rho * material(u) - mu1 * _lap(u) - mu2 * sp.diff(div, x) + groups.gamma * sp.diff(q, x) - (rho - 1) / A * sp.diff(f, x)
    sv = rho * material(v) - mu1 * _lap(v) - mu2 * sp.diff(div, y) + groups.gamma * sp.diff(q, y) - (rho - 1) / A * sp.diff(f, y)
    pdot = material(p)
    thdot = material(th)
    sm = co.alpha(p, th) * thdot - co.beta(p, th) * pdot - div
    d12 = (sp.diff(u, y) + sp.diff(v, x)) / 2
    dsq = sp.diff(u, x) ** 2 + sp.diff(v, y) ** 2 + 2 * d12**2
    phi = dsq / (groups.gamma * groups.re_mu)
    if not np.isinf(groups.re_lambda):
        phi = phi + div**2 / (groups.gamma * groups.re_lambda)
    se = co.density_heat(p, th) * thdot - (th + groups.theta_r) * co.alpha(p, th) * pdot - chi * _lap(th) - A * phi
    return {"u": su, "v": sv, "theta": se, "mass": sm}


def _compile(expr):
    fn = sp.lambdify((x, y, t), expr, modules="numpy")

    def call(X, Y, T):
        return np.broadcast_to(np.asarray(fn(X, Y, T), dtype=float), np.shape(X)).copy()

    return call


@dataclass
class ManufacturedSolution:
    """Closed-form fields plus compiled forcing for one system."""

    system: str
    groups: DimensionlessGroups
    fields: dict
    coeffs: NondimCoefficients | None = None

    def __post_init__(self):
        u, v = _velocity(self.fields)
        self._check_walls(u, v)
        self._u = _compile(u)
        self._v = _compile(v)
        self._theta = _compile(self.fields["theta"])
        self._psi = _compile(self.fields["psi"]) if "psi" in self.fields else None
        key = "q" if self.system == "full" else "p"
        self._pressure = _compile(self.fields[key])
        self.symbolic = symbolic_sources(self.fields, self.system, self.groups, self.coeffs)
        self._src = {k: _compile(e) for k, e in self.symbolic.items()}

    def _check_walls(self, u, v):
        th = self.fields["theta"]
        xs = [sp.Rational(1, 7), sp.Rational(2, 3)]
        for wall, val in ((0, sp.Rational(1, 2)), (1, -sp.Rational(1, 2))):
            for xv in xs:
                sub = {x: xv, y: wall, t: sp.Rational(1, 3)}
                if abs(float(u.subs(sub))) > 1e-12 or abs(float(v.subs(sub))) > 1e-12:
                    raise ValueError("manufactured velocity must vanish on the walls")
                if abs(float(th.subs(sub)) - float(val)) > 1e-12:
                    raise ValueError("manufactured temperature must match the wall values")

    def source(self, grid: Grid):
        """``t -> dict`` of forcing arrays on the native grid locations."""
        Xu, Yu = grid.u_points()
        Xv, Yv = grid.v_points()
        Xc, Yc = grid.centers()

        def at(tm):
            out = {
                "u": self._src["u"](Xu, Yu, tm),
                "v": self._src["v"](Xv, Yv, tm),
                "theta": self._src["theta"](Xc, Yc, tm),
            }
            out["v"][0] = out["v"][-1] = 0.0
            if "mass" in self._src:
                out["mass"] = self._src["mass"](Xc, Yc, tm)
            return out

        return at

    def exact(self, grid: Grid, tm: float) -> FieldState:
        """Pointwise samples of the fields (full pressure for the full system)."""
        Xu, Yu = grid.u_points()
        Xv, Yv = grid.v_points()
        Xc, Yc = grid.centers()
        u = self._u(Xu, Yu, tm)
        v = self._v(Xv, Yv, tm)
        v[0] = v[-1] = 0.0
        th = self._theta(Xc, Yc, tm)
        pr = self._pressure(Xc, Yc, tm)
        if self.system == "full":
            st = FieldState(u, v, th, -Yc / self.groups.gamma + self.groups.A * pr, tm)
            st.extra["q"] = pr
            return st
        return FieldState(u, v, th, pr, tm)

    def initial(self, grid: Grid, tm: float = 0.0) -> FieldState:
        """Initial state; divergence-free systems get stream-function velocities."""
        st = self.exact(grid, tm)
        if self._psi is not None:
            Xn, Yn = grid.nodes()
            psi = self._psi(Xn, Yn, tm)
            st.u = (psi[1:] - psi[:-1]) / grid.dy
            st.v = -(np.roll(psi, -1, axis=1) - psi) / grid.dx
            st.v[0] = st.v[-1] = 0.0
        return st


def mms_source(fields: dict, system: str, groups: DimensionlessGroups, grid: Grid, coeffs=None):
    """Forcing callable for ``fields``; zero fields give zero forcing."""
    return ManufacturedSolution(system, groups, fields, coeffs).source(grid)
