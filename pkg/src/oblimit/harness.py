"""Families of runs approaching the constitutive limit, and their reports.

A study integrates the full (or expansion) system for a decreasing sequence
of ``A`` with ``B`` from a power rule, compares every run with one limit
(Oberbeck-Boussinesq) reference on the same grid and step, and fits
``log e`` against ``log A``.  Everything here is deterministic: cases are
assembled in the order of the ``A`` sequence, wall-clock times are left out
of the artifacts unless asked for, and floats are written with ``repr``.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import sympy as sp

from .exceptions import SolverError, StudyError
from .grid import FieldState, Grid, u_to_center, v_to_center
from .mms import ManufacturedSolution, default_fields
from .nondim import (
    BaseScales,
    DimensionlessGroups,
    check_regimes,
    limit_groups,
    physical_groups,
    x_AB,
)
from .solver import ProblemSetup, auto_dt, diagnostics, hydrostatic_state, integrate

# Dimensional constants for flow runs.  The specific heat is large enough
# for the isentropic compressibility to stay positive along B = A^2 up to
# A = 0.2, and unit gravity makes the limit gamma equal to one.
FLOW_BASE = BaseScales(c0_dim=40.0, mu=0.01, lam=0.01, kappa=0.2, g=1.0)

SYSTEMS = ("ob", "expansion", "full")
CSV_COLUMNS = ("A", "B", "e_v_L2", "e_theta_L2", "p_gauge_std", "wall_s")


# -- trajectories ------------------------------------------------------------------


@dataclass
class Trajectory:
    """Snapshots of one run, stacked along the first axis.

    ``p`` is the run's own pressure, ``p_limit`` the same pressure mapped
    into the gauge of the limit system (see :func:`limit_gauge_pressure`).
    """

    grid: Grid
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    p_limit: np.ndarray
    diagnostics: list = field(default_factory=list)
    wall_s: float = math.nan

    def __len__(self):
        return len(self.times)

    def state(self, k) -> FieldState:
        return FieldState(self.u[k], self.v[k], self.theta[k], self.p[k], float(self.times[k]))


def limit_gauge_pressure(state: FieldState, setup: ProblemSetup, system: str):
    """Map a run's pressure into the gauge of the limit system.

    The expansion pressure is related by ``p_exp = A (p - f) + f``.  For the
    full system, dividing momentum by the reference density ``k1 / x`` leaves
    ``(x gamma / k1) grad q`` against a buoyancy whose constant part
    ``(1 - x / k1) / A`` multiplies the gradient of ``f``; that part is moved
    back into the pressure.
    """
    f = setup.f
    if system == "ob":
        return state.p
    grp = setup.groups
    A = grp.A
    if system == "expansion":
        return (state.p - f) / A + f
    q = state.extra["q"]
    r = x_AB(A, grp.B, grp.theta_r) / grp.k1
    return r * grp.gamma * q - (1.0 - r) / A * f


def initial_state(grid: Grid, amplitude: float = 0.5) -> FieldState:
    """Conduction profile with a superposed roll, divergence-free on the grid."""
    ms = ManufacturedSolution("ob", limit_groups(BaseScales()), default_fields("ob", lx=grid.lx, amplitude=amplitude))
    st = ms.initial(grid)
    st.p[:] = 0.0
    return st


def prepare_initial(setup: ProblemSetup, system: str, initial: FieldState | None = None) -> FieldState:
    """Adapt limit-system initial data (default :func:`initial_state`) to ``system``.

    The full system keeps velocity and temperature and starts from the
    hydrostatic reduced pressure; the expansion pressure is mapped into its
    own gauge.
    """
    state = initial_state(setup.grid) if initial is None else initial.copy()
    if system == "full":
        h = hydrostatic_state(setup, state.theta)
        h.u, h.v = state.u.copy(), state.v.copy()
        return h
    if system == "expansion":
        state.p = setup.groups.A * (state.p - setup.f) + setup.f
    return state


def run_case(setup: ProblemSetup, system: str, A: float | None = None, B: float | None = None,
             initial: FieldState | None = None, stride: int = 1, n_steps: int | None = None) -> Trajectory:
    """Integrate one system to ``setup.t_end`` and keep every ``stride``-th state.

    ``A`` and ``B`` are checked against ``setup.groups`` when given.  For the
    full system the initial velocity and temperature are kept and the reduced
    pressure is set to the hydrostatic one.  Solver failures propagate with
    the failing step index.
    """
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    grp = setup.groups
    if A is not None and A != grp.A or B is not None and B != grp.B:
        raise ValueError("A and B must match setup.groups")
    if system != "ob" and not grp.A > 0:
        raise ValueError(f"the {system} system needs A > 0")
    if stride < 1:
        raise ValueError("stride must be positive")
    state = prepare_initial(setup, system, initial)

    keep = []

    def record(k, st):
        if k % stride == 0:
            keep.append((st.t, st.u.copy(), st.v.copy(), st.theta.copy(), st.p.copy(),
                         limit_gauge_pressure(st, setup, system).copy(), diagnostics(st, setup)))

    t0 = time.perf_counter()
    integrate(state, setup, system, n_steps=n_steps, callback=record)
    wall = time.perf_counter() - t0
    times, u, v, th, p, pl, diag = zip(*keep)
    return Trajectory(setup.grid, np.array(times), np.stack(u), np.stack(v), np.stack(th), np.stack(p),
                      np.stack(pl), list(diag), wall)


# -- norms ---------------------------------------------------------------------------


def _time_weights(times):
    if len(times) == 1:
        return np.ones(1)
    w = np.zeros(len(times))
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _check_same(a: Trajectory, b: Trajectory):
    if a.grid != b.grid:
        raise ValueError("trajectories live on different grids")
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times), initial=0.0) > 1e-12:
        raise ValueError("trajectories are sampled at different times")


def difference_norm(a: Trajectory, b: Trajectory, name: str, norm: str = "space-time") -> float:
    """L2 difference of one field over space-time (trapezoid in time) or at the final time.

    ``name`` is ``"v"`` (both velocity components), ``"theta"`` or ``"p"``.
    Pressures are compared in the limit gauge after removing each snapshot's
    spatial mean, and from the first step on: the initial pressure is not
    part of the data of the limit problem.
    """
    _check_same(a, b)
    if name == "p" and len(a) > 2:
        a = replace(a, times=a.times[1:], p_limit=a.p_limit[1:])
        b = replace(b, times=b.times[1:], p_limit=b.p_limit[1:])
    g = a.grid
    if name == "v":
        sq = np.sum((a.u - b.u) ** 2, axis=(1, 2)) + np.sum((a.v - b.v)[:, 1:-1] ** 2, axis=(1, 2))
    elif name == "theta":
        sq = np.sum((a.theta - b.theta) ** 2, axis=(1, 2))
    elif name == "p":
        d = a.p_limit - b.p_limit
        d = d - d.mean(axis=(1, 2), keepdims=True)
        sq = np.sum(d * d, axis=(1, 2))
    else:
        raise ValueError(f"unknown field {name!r}")
    sq = sq * g.cell_area
    if norm == "final":
        return float(np.sqrt(sq[-1]))
    if norm != "space-time":
        raise ValueError(f"unknown norm {norm!r}")
    return float(np.sqrt(np.dot(_time_weights(a.times), sq)))


def gauge_compare(expansion: Trajectory, ob: Trajectory, A: float, f: np.ndarray):
    """Maximum deviations between an expansion run and a limit run.

    Returns ``(|dv|_inf, |dtheta|_inf, s)`` where ``s`` is the standard
    deviation over space-time of ``p_exp - (A (p_ob - f) + f)`` after the
    spatial mean is removed at every time.
    """
    _check_same(expansion, ob)
    dv = max(float(np.max(np.abs(expansion.u - ob.u))), float(np.max(np.abs(expansion.v - ob.v))))
    dth = float(np.max(np.abs(expansion.theta - ob.theta)))
    res = expansion.p - (A * (ob.p - f) + f)
    res = res - res.mean(axis=(1, 2), keepdims=True)
    return dv, dth, float(np.std(res))


# -- weak residuals -------------------------------------------------------------------

_xs, _ys, _ts = sp.symbols("x y t", real=True)


@dataclass(frozen=True)
class _WeakTest:
    """Stream function ``tau(t) b(y) w(x)`` and the compiled derivatives the weak forms need."""

    label: str
    funcs: dict


@functools.lru_cache(maxsize=8)
def _dictionary(lx, t_end, support):
    y0, y1 = support
    s = (_ys - y0) / (y1 - y0)
    tau = sp.sin(sp.pi * _ts / t_end) ** 2
    bumps = [sp.sin(sp.pi * s) ** 4, sp.sin(sp.pi * s) ** 4 * sp.cos(sp.pi * s)]
    out = []
    for m in (1, 2):
        k = 2 * sp.pi * m / lx
        for wname, w in (("cos", sp.cos(k * _xs)), ("sin", sp.sin(k * _xs))):
            for j, b in enumerate(bumps):
                psi = tau * b * w
                phi1, phi2 = sp.diff(psi, _ys), -sp.diff(psi, _xs)
                exprs = {
                    "eta": psi,
                    "eta_t": sp.diff(psi, _ts),
                    "eta_x": sp.diff(psi, _xs),
                    "eta_y": sp.diff(psi, _ys),
                    "eta_lap": sp.diff(psi, _xs, 2) + sp.diff(psi, _ys, 2),
                    "phi1": phi1,
                    "phi2": phi2,
                    "phi1_t": sp.diff(phi1, _ts),
                    "phi2_t": sp.diff(phi2, _ts),
                    "phi1_x": sp.diff(phi1, _xs),
                    "phi1_y": sp.diff(phi1, _ys),
                    "phi2_x": sp.diff(phi2, _xs),
                    "phi2_y": sp.diff(phi2, _ys),
                    "phi1_lap": sp.diff(phi1, _xs, 2) + sp.diff(phi1, _ys, 2),
                    "phi2_lap": sp.diff(phi2, _xs, 2) + sp.diff(phi2, _ys, 2),
                }
                funcs = {key: sp.lambdify((_xs, _ys, _ts), e, modules="numpy") for key, e in exprs.items()}
                out.append(_WeakTest(f"m{m}-{wname}-b{j}", funcs))
    return tuple(out)


def _masked(fn, X, Y, T, inside):
    val = np.broadcast_to(np.asarray(fn(X, Y, T), dtype=float), X.shape)
    return np.where(inside, val, 0.0)


def weak_residual(traj: Trajectory, groups: DimensionlessGroups, support=(0.0, 1.0)) -> dict:
    """Residuals of the limit system's weak forms for sampled fields.

    Eight stream functions, periodic in ``x``, with a ``sin^4`` bump in ``y``
    over ``support`` and the weight ``sin^2(pi t / t_end)`` in time, generate
    divergence-free vector tests for momentum and scalar tests for the heat
    equation and the divergence.  All derivatives are moved onto the tests,
    whose values and first derivatives vanish on the walls and at both ends
    of the time interval.  Quadrature is the midpoint rule at cell centres
    and the trapezoid rule in time.

    Returns the largest residual over the dictionary for ``"div"``,
    ``"momentum"`` and ``"heat"``, each divided by the ``L2(Q)`` norm of
    its test function.
    """
    y0, y1 = support
    if not (0.0 <= y0 < y1 <= 1.0):
        raise ValueError(f"test-function support {support} must lie inside [0, 1]")
    if len(traj) < 3:
        raise ValueError("need at least three snapshots")
    g = traj.grid
    t_start, t_end = float(traj.times[0]), float(traj.times[-1])
    span = t_end - t_start
    tests = _dictionary(float(g.lx), span, (float(y0), float(y1)))
    Xc, Yc = g.centers()
    inside = (Yc >= y0) & (Yc <= y1)
    mu1 = 0.5 / groups.re_mu
    chi = 1.0 / (groups.pr * groups.re_mu)
    c0 = groups.c0
    wt = _time_weights(traj.times)
    dA = g.cell_area
    # fields at cell centres
    uc = np.stack([u_to_center(u) for u in traj.u])
    vc = np.stack([v_to_center(v) for v in traj.v])
    th = traj.theta
    out = {"div": 0.0, "momentum": 0.0, "heat": 0.0}
    for tf in tests:
        acc = {"div": 0.0, "momentum": 0.0, "heat": 0.0}
        nphi = neta = 0.0
        for k, tk in enumerate(traj.times):
            T = np.full_like(Xc, tk - t_start)
            F = {key: _masked(fn, Xc, Yc, T, inside) for key, fn in tf.funcs.items()}
            u, v, s = uc[k], vc[k], th[k]
            div = -np.sum(u * F["eta_x"] + v * F["eta_y"])
            mom = -np.sum(
                u * F["phi1_t"] + v * F["phi2_t"]
                + u * u * F["phi1_x"] + u * v * (F["phi1_y"] + F["phi2_x"]) + v * v * F["phi2_y"]
                + mu1 * (u * F["phi1_lap"] + v * F["phi2_lap"])
                - (1.0 - s) * F["phi2"]
            )
            heat = -np.sum(c0 * s * (F["eta_t"] + u * F["eta_x"] + v * F["eta_y"]) + chi * s * F["eta_lap"])
            acc["div"] += wt[k] * div * dA
            acc["momentum"] += wt[k] * mom * dA
            acc["heat"] += wt[k] * heat * dA
            nphi += wt[k] * np.sum(F["phi1"] ** 2 + F["phi2"] ** 2) * dA
            neta += wt[k] * np.sum(F["eta"] ** 2) * dA
        out["div"] = max(out["div"], abs(acc["div"]) / math.sqrt(neta))
        out["momentum"] = max(out["momentum"], abs(acc["momentum"]) / math.sqrt(nphi))
        out["heat"] = max(out["heat"], abs(acc["heat"]) / math.sqrt(neta))
    return out


# -- studies -------------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    """Parameters of a limit study.  ``B = b_coeff * A ** b_power``."""

    A_sequence: tuple = (0.2, 0.1, 0.05, 0.025)
    b_coeff: float = 1.0
    b_power: float = 2.0
    nx: int = 64
    ny: int = 64
    lx: float = 2.0
    dt: float | None = None
    t_end: float = 0.5
    norm: str = "space-time"
    n_test_functions: int = 8
    system: str = "full"
    amplitude: float = 0.5
    stride: int = 1
    base: BaseScales = FLOW_BASE
    record_wall_time: bool = False

    def __post_init__(self):
        seq = tuple(float(a) for a in self.A_sequence)
        object.__setattr__(self, "A_sequence", seq)
        if not seq:
            raise ValueError("A_sequence is empty")
        if any(not a > 0 for a in seq):
            raise ValueError("A values must be positive")
        if any(a2 >= a1 for a1, a2 in zip(seq, seq[1:])):
            raise ValueError("A_sequence must be strictly decreasing")
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")
        if self.norm not in ("space-time", "final"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.n_test_functions != 8:
            raise ValueError("the test-function dictionary has exactly 8 members")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        for A in seq:
            if not check_regimes(A, self.B(A), self.base.theta_r).limit_regime:
                raise ValueError(f"B rule gives B = {self.B(A):.3g} at A = {A}, outside the limit regime B <= A^2")

    def B(self, A):
        return self.b_coeff * A**self.b_power

    @property
    def grid(self):
        return Grid(self.nx, self.ny, self.lx)

    @property
    def step(self):
        return auto_dt(self.grid) if self.dt is None else self.dt

    def groups(self, A):
        if self.system == "full":
            return physical_groups(A, self.B(A), self.base)
        if self.system == "expansion":
            return replace(limit_groups(self.base), A=A, B=self.B(A))
        return limit_groups(self.base)

    def echo(self):
        d = asdict(self)
        d["A_sequence"] = list(self.A_sequence)
        return d


@dataclass
class CaseSummary:
    A: float
    B: float
    e_v_L2: float
    e_theta_L2: float
    p_gauge_std: float
    wall_s: float = math.nan


@dataclass
class ConvergenceReport:
    cases: list
    slopes: dict
    monotone: dict
    config: dict
    content_hash: str
    reference_wall_s: float = math.nan

    def as_dict(self):
        return {
            "cases": [asdict(c) for c in self.cases],
            "slopes": self.slopes,
            "monotone": self.monotone,
            "config": self.config,
            "content_hash": self.content_hash,
        }


def fit_slope(A, e):
    """Least-squares slope of ``log e`` against ``log A`` and the RMS fit residual."""
    if len(A) < 2 or min(e) <= 0:
        return None
    X, Y = np.log(np.asarray(A, float)), np.log(np.asarray(e, float))
    coef, res, *_ = np.polyfit(X, Y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(X)) if len(res) else 0.0
    return {"slope": float(coef[0]), "intercept": float(coef[1]), "rms_residual": rms}


def config_hash(config: StudyConfig) -> str:
    """SHA-256 of the canonical JSON of the configuration, prefixed like a git object id."""
    blob = json.dumps(config.echo(), sort_keys=True, separators=(",", ":"), default=_jsonable).encode()
    return hashlib.sha256(b"config %d\0" % len(blob) + blob).hexdigest()


def _setup(config: StudyConfig, groups):
    return ProblemSetup(config.grid, groups, dt=config.step, t_end=config.t_end)


def _case(config: StudyConfig, A: float, reference: Trajectory):
    setup = _setup(config, config.groups(A))
    # the limit system carries no (A, B); it is the self-comparison control
    pars = (None, None) if config.system == "ob" else (A, config.B(A))
    traj = run_case(setup, config.system, *pars, initial=initial_state(config.grid, config.amplitude),
                    stride=config.stride)
    return CaseSummary(
        A=A,
        B=config.B(A),
        e_v_L2=difference_norm(traj, reference, "v", config.norm),
        e_theta_L2=difference_norm(traj, reference, "theta", config.norm),
        p_gauge_std=_rms(difference_norm(traj, reference, "p", config.norm), config, traj),
        wall_s=traj.wall_s if config.record_wall_time else math.nan,
    )


def _rms(l2, config, traj):
    # spread about the spatial mean, per unit area (and time for the space-time norm)
    span = float(traj.times[-1] - traj.times[0]) if config.norm == "space-time" else 1.0
    return l2 / math.sqrt(config.lx * (span if span > 0 else 1.0))


def _summarize(config, cases, ref_wall):
    A = [c.A for c in cases]
    slopes = {
        "e_v_L2": fit_slope(A, [c.e_v_L2 for c in cases]),
        "e_theta_L2": fit_slope(A, [c.e_theta_L2 for c in cases]),
    }
    if len(cases) < 2:
        slopes = {}
    monotone = {
        key: all(getattr(c1, key) > getattr(c2, key) for c1, c2 in zip(cases, cases[1:]))
        for key in ("e_v_L2", "e_theta_L2")
    }
    return ConvergenceReport(cases, slopes, monotone, config.echo(), config_hash(config),
                             ref_wall if config.record_wall_time else math.nan)


def reference_run(config: StudyConfig) -> Trajectory:
    """The limit-system run every case is compared with."""
    setup = _setup(config, limit_groups(config.base))
    return run_case(setup, "ob", initial=initial_state(config.grid, config.amplitude), stride=config.stride)


def limit_study(config: StudyConfig, workers: int | None = None) -> ConvergenceReport:
    """Run every case of ``config`` against one limit reference.

    ``workers`` (default: the ``OBLIMIT_THREADS`` environment variable, else
    one) sets the number of processes; results are assembled in sequence
    order either way.  A failing case raises :class:`StudyError` whose
    ``report`` holds the cases that completed before it.
    """
    if workers is None:
        workers = int(os.environ.get("OBLIMIT_THREADS", "1"))
    ref = reference_run(config)
    cases = []
    try:
        if workers <= 1 or len(config.A_sequence) == 1:
            for A in config.A_sequence:
                cases.append(_case(config, A, ref))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_case, config, A, ref) for A in config.A_sequence]
                for fut in futures:
                    cases.append(fut.result())
    except SolverError as exc:
        A = config.A_sequence[len(cases)]
        raise StudyError(f"case A = {A} failed: {exc}", _summarize(config, cases, ref.wall_s)) from exc
    return _summarize(config, cases, ref.wall_s)


# -- output ------------------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, float):
        return obj
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _fmt(x):
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def report_csv(report: ConvergenceReport | None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in (report.cases if report is not None else []):
        w.writerow([_fmt(getattr(c, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def report_json(report: ConvergenceReport, extra: dict | None = None) -> str:
    d = report.as_dict()
    if extra:
        d.update(extra)
    return json.dumps(_nan_to_none(d), sort_keys=True, indent=2, default=_jsonable) + "\n"


def _nan_to_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else repr(obj)
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return _nan_to_none(asdict(obj))
    return obj


def emit_report(report: ConvergenceReport | None, path, stem: str = "limit_study", extra: dict | None = None):
    """Write ``<stem>.csv`` and, for a non-empty report, ``<stem>.json`` into directory ``path``.

    Returns the list of written paths.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(report_csv(report))
    files.append(csv_path)
    if report is not None:
        json_path = out / f"{stem}.json"
        json_path.write_text(report_json(report, extra))
        files.append(json_path)
    return files
