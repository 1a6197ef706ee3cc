"""Time integrators for the limit, expansion and full systems on the channel.

All three share a staggered grid, a two-pass midpoint predictor-corrector
for the explicit terms and Crank-Nicolson diffusion.  The divergence-free
systems use an incremental pressure-correction projection with a direct
Poisson solve.  The full system advances a reduced pressure ``q`` defined by
``p = f / gamma + A q``; its mass constraint, with the temperature rate
eliminated through the energy balance, becomes a variable-coefficient
Helmholtz problem for the pressure increment solved by preconditioned CG.

Setting ``upwind=True`` switches every system to a single first-order pass:
upwind advection and backward-Euler diffusion, which keeps temperatures
inside the wall values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .exceptions import SolverError
from .grid import (
    FieldState,
    Grid,
    advect_scalar,
    advect_u,
    advect_v,
    center_to_u,
    center_to_v,
    divergence,
    grad_x,
    grad_y,
    kinetic_energy,
    l2_center,
    lap_centered,
    lap_v,
    strain_squares,
    v_to_center,
)
from .nondim import DimensionlessGroups, NondimCoefficients
from .poisson import SpectralSolver

DIV_TOL = 1e-8


@dataclass
class ProblemSetup:
    """Everything a step needs besides the state.

    ``source`` maps a time to a dict with optional keys ``"u"``, ``"v"``,
    ``"theta"`` and ``"mass"`` holding forcing arrays on the native
    locations; manufactured-solution runs use it.
    """

    grid: Grid
    groups: DimensionlessGroups
    dt: float
    t_end: float = 0.0
    coeffs: NondimCoefficients | None = None
    upwind: bool = False
    source: Callable | None = None
    theta_bottom: float = 0.5
    theta_top: float = -0.5
    max_cfl: float = 1.0
    cg_rtol: float = 1e-12
    sweeps: int = 4
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.t_end < 0:
            raise ValueError(f"t_end must be nonnegative, got {self.t_end}")
        if self.dt > self.max_cfl * self.grid.h:
            raise ValueError(
                f"dt = {self.dt:.4g} exceeds the advective bound {self.max_cfl} * h = "
                f"{self.max_cfl * self.grid.h:.4g} for unit velocity"
            )
        lo = min(self.theta_bottom, self.theta_top)
        if lo + self.groups.theta_r <= 0:
            raise ValueError(
                f"theta + theta_r must stay positive; theta_r = {self.groups.theta_r} "
                f"with wall value {lo}"
            )
        if self.sweeps < 1:
            raise ValueError("sweeps must be at least 1")
        if self.coeffs is None:
            self.coeffs = NondimCoefficients.from_groups(self.groups)

    # fixed body-force potential f = -y
    @property
    def f(self):
        _, y = self.grid.centers()
        return -y

    @property
    def grad_f_v(self):
        return self._cached("grad_f_v", lambda: grad_y(self.grid, self.f))

    @property
    def wall_term(self):
        """Wall contribution of the Dirichlet temperature values to the Laplacian."""

        def build():
            g = self.grid
            b = np.zeros((g.ny, g.nx))
            b[0] += 2 * self.theta_bottom / g.dy**2
            b[-1] += 2 * self.theta_top / g.dy**2
            return b

        return self._cached("wall_term", build)

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def spectral(self, kind, shift, coef):
        return self._cached(("spectral", kind, shift, coef), lambda: SpectralSolver(self.grid, kind, shift, coef))

    def source_at(self, t):
        return {} if self.source is None else self.source(t)


def auto_dt(grid: Grid, state: FieldState | None = None, cfl: float = 0.4):
    """``cfl * h / max(|v|_inf, 1)``."""
    vmax = 1.0
    if state is not None:
        vmax = max(vmax, float(np.max(np.abs(state.u))), float(np.max(np.abs(state.v))))
    return cfl * grid.h / vmax


def cfl_number(state: FieldState, setup: ProblemSetup):
    g = setup.grid
    uc = np.abs(0.5 * (state.u + np.roll(state.u, -1, axis=1)))
    vc = np.abs(v_to_center(state.v))
    return float(setup.dt * np.max(uc / g.dx + vc / g.dy))


def _check_runtime(state, setup, step=None):
    bad = state.check_finite()
    if bad is not None:
        raise SolverError(f"non-finite values in {bad}", step)
    c = cfl_number(state, setup)
    if c > setup.max_cfl:
        raise SolverError(f"CFL number {c:.3g} exceeds {setup.max_cfl}", step)


def _weights(setup):
    # (implicit fraction, list of passes)
    return (1.0, 1) if setup.upwind else (0.5, 2)


def _mid(a, b):
    return 0.5 * (a + b)


# -- divergence-free systems ------------------------------------------------------


def _incompressible_step(state: FieldState, setup: ProblemSetup, K: float, s: float):
    """One step of ``v_t + (v.grad)v - mu1 lap v + grad(p)/s = (K - theta) grad f``.

    ``K = s = 1`` is the limit system; ``K = 1/A, s = A`` the expansion system.
    """
    g = setup.grid
    grp = setup.groups
    dt = setup.dt
    w, npass = _weights(setup)
    mu1 = 0.5 / grp.re_mu
    chi = 1.0 / (grp.pr * grp.re_mu)
    c0 = grp.c0
    Hu = setup.spectral("dirichlet", 1.0, w * dt * mu1)
    Hv = setup.spectral("face", 1.0, w * dt * mu1)
    Ht = setup.spectral("dirichlet", c0, w * dt * chi)
    P = setup.spectral("neumann", 0.0, 1.0)
    tb, tt = setup.theta_bottom, setup.theta_top
    gfy = setup.grad_f_v

    n = state
    lap_u0 = lap_centered(g, n.u)
    lap_v0 = lap_v(g, n.v)
    lap_t0 = lap_centered(g, n.theta, tb, tt)
    gpx, gpy = grad_x(g, n.p) / s, grad_y(g, n.p) / s
    ue, ve, te_, tm = n.u, n.v, n.theta, n.t
    out = None
    for k in range(npass):
        if k == 1:
            ue, ve, te_, tm = _mid(n.u, out.u), _mid(n.v, out.v), _mid(n.theta, out.theta), n.t + 0.5 * dt
        src = setup.source_at(tm)
        ex = 1.0 - w
        rhs_u = n.u + dt * (-advect_u(g, ue, ve) - gpx) + ex * dt * mu1 * lap_u0
        rhs_v = n.v + dt * (-advect_v(g, ue, ve) - gpy + (K - center_to_v(g, te_)) * gfy) + ex * dt * mu1 * lap_v0
        if "u" in src:
            rhs_u = rhs_u + dt * src["u"]
        if "v" in src:
            rhs_v = rhs_v + dt * src["v"]
        us = Hu.solve(rhs_u)
        vs = g.zeros_v()
        vs[1:-1] = Hv.solve(rhs_v[1:-1])
        phi = P.solve(-divergence(g, us, vs) / dt)
        u_new = us - dt * grad_x(g, phi)
        v_new = vs - dt * grad_y(g, phi)
        p_new = n.p + s * phi
        p_new -= p_new.mean()

        adv = advect_scalar(g, ue, ve, te_, tb, tt, upwind=setup.upwind)
        rhs_t = c0 * n.theta - dt * c0 * adv + ex * dt * chi * lap_t0 + w * dt * chi * setup.wall_term
        if "theta" in src:
            rhs_t = rhs_t + dt * src["theta"]
        th_new = Ht.solve(rhs_t)
        out = FieldState(u_new, v_new, th_new, p_new, n.t + dt, dict(n.extra))
    return out


def _check_div(state, setup):
    d = l2_center(setup.grid, divergence(setup.grid, state.u, state.v))
    if d > DIV_TOL:
        raise SolverError(f"input state has discrete divergence {d:.3g} > {DIV_TOL}")


def ob_step(state: FieldState, setup: ProblemSetup) -> FieldState:
    """Advance the limit (Oberbeck-Boussinesq) system by one step."""
    _check_div(state, setup)
    out = _incompressible_step(state, setup, 1.0, 1.0)
    _check_runtime(out, setup)
    return out


def expansion_step(state: FieldState, setup: ProblemSetup, A: float) -> FieldState:
    """Advance ``A (v' - mu1 lap v) + grad p = (1 - A theta) grad f`` by one step.

    Dividing by ``A`` gives the limit momentum equation with buoyancy
    ``(1/A - theta) grad f`` and pressure ``p / A``; the scheme is otherwise
    identical to :func:`ob_step`.
    """
    if not A > 0:
        raise ValueError(f"A must be positive, got {A}")
    _check_div(state, setup)
    out = _incompressible_step(state, setup, 1.0 / A, A)
    _check_runtime(out, setup)
    return out


# -- full system ------------------------------------------------------------------


def reduced_pressure(state: FieldState, setup: ProblemSetup):
    """``q`` with ``p = f / gamma + A q``."""
    if "q" in state.extra:
        return state.extra["q"]
    A = setup.groups.A
    return (state.p - setup.f / setup.groups.gamma) / A


def _with_q(state, setup, q):
    state.extra["q"] = q
    state.p = setup.f / setup.groups.gamma + setup.groups.A * q
    return state


def hydrostatic_state(setup: ProblemSetup, theta: np.ndarray, iterations: int = 60) -> FieldState:
    """Resting state of the full system whose reduced pressure balances gravity column by column.

    Solves ``gamma d_y q = ((rho - 1) / A) d_y f`` on interior faces with face
    densities averaged from the cells, and fixes the free constant of each
    column so that ``q`` has zero mean.  For horizontally uniform ``theta``
    that solves the heat equation in steady state this is an exact discrete
    equilibrium.
    """
    g = setup.grid
    grp = setup.groups
    A = grp.A
    co = setup.coeffs
    f = setup.f
    gfy = setup.grad_f_v
    q = np.zeros((g.ny, g.nx))
    for _ in range(iterations):
        q_old = q.copy()
        p = f / grp.gamma + A * q
        rho = co.density(p, theta)
        # march upwards from the bottom cell
        qn = np.zeros_like(q)
        qn[0] = q[0]
        for j in range(1, g.ny):
            qn[j] = qn[j - 1]
            for _inner in range(50):
                rj = co.density(f[j] / grp.gamma + A * qn[j], theta[j])
                rf = 0.5 * (rj + rho[j - 1])
                step = qn[j - 1] + g.dy * (rf - 1.0) / A * gfy[j] / grp.gamma
                done = np.max(np.abs(step - qn[j])) <= 1e-15 * max(1.0, np.max(np.abs(step)))
                qn[j] = step
                if done:
                    break
            rho[j] = co.density(f[j] / grp.gamma + A * qn[j], theta[j])
        qn -= qn.mean(axis=0, keepdims=True)
        q = qn
        if np.max(np.abs(q - q_old)) <= 1e-15 * max(1.0, np.max(np.abs(q))):
            break
    state = FieldState(g.zeros_c(), g.zeros_v(), theta.copy(), np.zeros_like(theta))
    return _with_q(state, setup, q)


def _cg(apply, rhs, precond, rtol, what, x0=None):
    n = rhs.size
    shape = rhs.shape
    op = LinearOperator((n, n), matvec=lambda x: apply(x.reshape(shape)).ravel(), dtype=float)
    M = LinearOperator((n, n), matvec=lambda x: precond(x.reshape(shape)).ravel(), dtype=float)
    x, info = cg(op, rhs.ravel(), x0=None if x0 is None else x0.ravel(), rtol=rtol, atol=0.0, M=M, maxiter=1000)
    if info != 0:
        raise SolverError(f"{what} solve did not converge (info={info})")
    return x.reshape(shape)


class _FullCoefficients:
    """Coefficient fields frozen at the explicit evaluation state of one pass."""

    def __init__(self, setup, p, theta):
        co = setup.coeffs
        grp = setup.groups
        g = setup.grid
        try:
            co.check_domain(p, theta)
        except Exception as exc:
            raise SolverError(str(exc)) from exc
        self.N = co.bracket(p, theta)
        self.rho = co.density(p, theta)
        self.rcp = co.density_heat(p, theta)
        self.alpha = co.alpha(p, theta)
        self.beta = co.beta(p, theta)
        self.Theta = theta + grp.theta_r
        self.beta_s = self.beta - self.Theta * self.alpha**2 / self.rcp
        if np.any(self.beta_s <= 0):
            raise SolverError(
                "effective compressibility beta - (theta+theta_r) alpha^2 / (rho c_p) is not positive "
                f"(min {np.min(self.beta_s):.3g}); the specific heat at constant volume is negative "
                "for these parameters, increase c0"
            )
        self.rho_u = center_to_u(self.rho)
        self.rho_v = center_to_v(g, self.rho)


def _full_pass(n, q_n, ue, ve, te_, qe, tm, setup, theta_guess=None, sweeps=None):
    """One predictor or corrector pass of the full system."""
    g = setup.grid
    grp = setup.groups
    A = grp.A
    dt = setup.dt
    w = 1.0 if setup.upwind else 0.5
    ex = 1.0 - w
    mu1 = 0.5 / grp.re_mu
    mu2 = 0.5 / grp.re_mu + (0.0 if math.isinf(grp.re_lambda) else 1.0 / grp.re_lambda)
    chi = 1.0 / (grp.pr * grp.re_mu)
    gam = grp.gamma
    tb, tt = setup.theta_bottom, setup.theta_top
    gfy = setup.grad_f_v
    rtol = setup.cg_rtol

    pe = setup.f / gam + A * qe
    C = _FullCoefficients(setup, pe, te_)
    src = setup.source_at(tm)

    # momentum predictor with the old reduced pressure
    div_e = divergence(g, ue, ve)
    rhs_u = C.rho_u * n.u / dt - C.rho_u * advect_u(g, ue, ve) + ex * mu1 * lap_centered(g, n.u)
    rhs_u += mu2 * grad_x(g, div_e) - gam * grad_x(g, q_n)
    rhs_v = C.rho_v * n.v / dt - C.rho_v * advect_v(g, ue, ve) + ex * mu1 * lap_v(g, n.v)
    rhs_v += mu2 * grad_y(g, div_e) - gam * grad_y(g, q_n) + (C.rho_v - 1.0) / A * gfy
    if "u" in src:
        rhs_u = rhs_u + src["u"]
    if "v" in src:
        rhs_v = rhs_v + src["v"]

    def apply_u(x):
        return C.rho_u * x / dt - w * mu1 * lap_centered(g, x)

    Pu = SpectralSolver(g, "dirichlet", float(np.mean(C.rho_u)) / dt, w * mu1)
    us = _cg(apply_u, rhs_u, Pu.solve, rtol, "u-momentum", x0=n.u)
    rv = C.rho_v[1:-1]
    Pv = SpectralSolver(g, "face", float(np.mean(rv)) / dt, w * mu1)

    def apply_v(x):
        full = g.zeros_v()
        full[1:-1] = x
        return rv * x / dt - w * mu1 * lap_v(g, full)[1:-1]

    vs = g.zeros_v()
    vs[1:-1] = _cg(apply_v, rhs_v[1:-1], Pv.solve, rtol, "v-momentum", x0=n.v[1:-1])

    # Pressure increment and temperature.  The mass constraint is imposed at
    # the new time level, with the pressure rate from a two-step backward
    # difference and the temperature rate from the energy balance there.  The
    # energy equation itself stays centred.  The coupled solves are repeated
    # a fixed number of times, refreshing the coefficients at the new level.
    inv_ru, inv_rv = 1.0 / C.rho_u, 1.0 / C.rho_v
    inv_rv[0] = inv_rv[-1] = 0.0
    Sp_mid = -v_to_center(ve) / gam + A * advect_scalar(g, ue, ve, qe, neumann=True)
    src_new = setup.source_at(n.t + dt)
    S_e_new = src_new.get("theta", 0.0)
    S_m_new = src_new.get("mass", 0.0)
    lap_t0 = lap_centered(g, n.theta, tb, tt)
    adv_t = advect_scalar(g, ue, ve, te_, tb, tt, upwind=setup.upwind)
    rhs_t0 = (
        C.rcp * n.theta / dt - C.rcp * adv_t + ex * chi * lap_t0 + w * chi * setup.wall_term
        + A * _dissipation(g, grp, ue, ve) + src.get("theta", 0.0)
    )
    Pt = SpectralSolver(g, "dirichlet", float(np.mean(C.rcp)) / dt, w * chi)
    div_star = divergence(g, us, vs)
    q_old = n.extra.get("q_prev")
    if q_old is None or setup.upwind:
        c_new, lag = 1.0, np.zeros_like(q_n)
    else:
        c_new, lag = 1.5, 0.5 * (q_n - q_old)

    def pressure_rate(dq):
        return A * (c_new * dq - lag) / dt

    dq = np.zeros_like(q_n)
    th = te_ if theta_guess is None else theta_guess
    u_new, v_new = us, vs
    for _ in range(sweeps or setup.sweeps):
        q_new = q_n + dq
        C1 = _FullCoefficients(setup, setup.f / gam + A * q_new, th)
        Sp_new = -v_to_center(v_new) / gam + A * advect_scalar(g, u_new, v_new, q_new, neumann=True)
        E = C1.alpha * (
            chi * lap_centered(g, th, tb, tt) + A * _dissipation(g, grp, u_new, v_new) + S_e_new
        ) / C1.rcp
        diag_q = c_new * C1.beta_s * A / dt

        def apply_q(x, diag_q=diag_q):
            return -dt * gam * divergence(g, inv_ru * grad_x(g, x), inv_rv * grad_y(g, x)) + diag_q * x

        Pq = SpectralSolver(g, "neumann", float(np.mean(diag_q)), dt * gam * float(np.mean(1.0 / C.rho)))
        rhs_q = -div_star - C1.beta_s * (Sp_new - A * lag / dt) + E - S_m_new
        dq = _cg(apply_q, rhs_q, Pq.solve, rtol, "pressure", x0=dq)
        u_new = us - dt * gam * inv_ru * grad_x(g, dq)
        v_new = vs - dt * gam * inv_rv * grad_y(g, dq)
        pdot_mid = A * dq / dt + Sp_mid
        rhs_t = rhs_t0 + C.Theta * C.alpha * pdot_mid
        th = _cg(lambda x: C.rcp * x / dt - w * chi * lap_centered(g, x), rhs_t, Pt.solve, rtol, "energy", x0=th)

    q_new = q_n + dq
    out = FieldState(u_new, v_new, th, np.zeros_like(th), n.t + dt, dict(n.extra))
    _with_q(out, setup, q_new)
    out.extra["dpdt"] = pdot_mid
    # residuals of the momentum predictor and of the energy balance, as solved
    mom = np.concatenate([(apply_u(us) - rhs_u).ravel(), (apply_v(vs[1:-1]) - rhs_v[1:-1]).ravel()])
    out.extra["momentum_residual"] = mom * dt
    out.extra["energy_residual"] = C.rcp * th / dt - w * chi * lap_centered(g, th) - rhs_t
    # constraint residual at the new time level with the final fields
    C1 = _FullCoefficients(setup, out.p, th)
    Sp_new = -v_to_center(v_new) / gam + A * advect_scalar(g, u_new, v_new, q_new, neumann=True)
    pdot_new = pressure_rate(dq) + Sp_new
    theta_dot = (
        C1.Theta * C1.alpha * pdot_new + chi * lap_centered(g, th, tb, tt)
        + A * _dissipation(g, grp, u_new, v_new) + S_e_new
    ) / C1.rcp
    out.extra["mass_residual"] = (
        C1.alpha * theta_dot - C1.beta * pdot_new - divergence(g, u_new, v_new) - S_m_new
    )
    return out


def _dissipation(g, grp, u, v):
    ss, tr2 = strain_squares(g, u, v)
    phi = ss / (grp.gamma * grp.re_mu)
    if not math.isinf(grp.re_lambda):
        phi = phi + tr2 / (grp.gamma * grp.re_lambda)
    return phi


def full_step(state: FieldState, setup: ProblemSetup, A: float | None = None, B: float | None = None) -> FieldState:
    """Advance the full system by one step.

    ``A`` and ``B`` default to the values in ``setup.groups`` and must agree
    with them when given.
    """
    grp = setup.groups
    if A is not None and A != grp.A or B is not None and B != grp.B:
        raise ValueError("A and B must match setup.groups")
    if not grp.A > 0:
        raise ValueError("the full system needs A > 0")
    n = state
    q_n = reduced_pressure(n, setup)
    g = setup.grid
    # the predictor only feeds midpoint values, so fewer sweeps suffice there
    first = setup.sweeps if setup.upwind else min(2, setup.sweeps)
    out = _full_pass(n, q_n, n.u, n.v, n.theta, q_n, n.t, setup, sweeps=first)
    if not setup.upwind:
        q1 = out.extra["q"]
        out = _full_pass(
            n, q_n,
            _mid(n.u, out.u), _mid(n.v, out.v), _mid(n.theta, out.theta), _mid(q_n, q1),
            n.t + 0.5 * setup.dt, setup, out.theta,
        )
    out.extra["q_prev"] = q_n
    _check_runtime(out, setup)
    return out


# -- diagnostics and driver ----------------------------------------------------------


def diagnostics(state: FieldState, setup: ProblemSetup) -> dict:
    g = setup.grid
    return {
        "t": float(state.t),
        "div_norm": l2_center(g, divergence(g, state.u, state.v)),
        "kinetic_energy": kinetic_energy(g, state.u, state.v),
        "theta_min": float(np.min(state.theta)),
        "theta_max": float(np.max(state.theta)),
        "p_mean": float(np.mean(state.p)),
    }


def conduction_state(setup: ProblemSetup) -> FieldState:
    """Resting state with the linear wall-to-wall temperature profile."""
    g = setup.grid
    _, y = g.centers()
    theta = setup.theta_bottom + (setup.theta_top - setup.theta_bottom) * y
    return FieldState(g.zeros_c(), g.zeros_v(), theta, g.zeros_c())


def make_stepper(system: str, setup: ProblemSetup):
    """Step function ``state -> state`` for ``"ob"``, ``"expansion"`` or ``"full"``."""
    A = setup.groups.A
    if system == "ob":
        return lambda s: ob_step(s, setup)
    if system == "expansion":
        return lambda s: expansion_step(s, setup, A)
    if system == "full":
        return lambda s: full_step(s, setup)
    raise ValueError(f"unknown system {system!r}")


def integrate(state, setup: ProblemSetup, system: str, n_steps: int | None = None, callback=None):
    """Step ``state`` ``n_steps`` times (default: up to ``setup.t_end``).

    ``callback(step_index, state)`` runs after every step and at step 0.
    """
    step = make_stepper(system, setup)
    if n_steps is None:
        n_steps = int(round(setup.t_end / setup.dt))
    if callback is not None:
        callback(0, state)
    for k in range(1, n_steps + 1):
        try:
            state = step(state)
        except SolverError as exc:
            if exc.step is None:
                raise SolverError(str(exc), k) from exc
            raise
        if callback is not None:
            callback(k, state)
    return state
