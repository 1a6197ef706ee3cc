"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line with the measured
numbers (also repeated in the terminal summary) and then asserts.  The
runtime budgets are part of the verdicts.
"""

import dataclasses
import hashlib
import math
import time

import numpy as np
from conftest import VERDICTS
from scipy.stats import qmc

from oblimit.cli import main
from oblimit.constitutive import GibbsModel, alpha, beta, legendre_consistency, specific_heat_cp
from oblimit.grid import Grid, l2_center, l2_velocity
from oblimit.harness import FLOW_BASE, StudyConfig, gauge_compare, limit_study, run_case, weak_residual
from oblimit.mms import ManufacturedSolution, default_fields
from oblimit.nondim import (
    BaseScales,
    compute_AB,
    invert_AB,
    limit_groups,
    mass_coefficient,
    physical_groups,
    thermal_scales,
    verify_assumptions,
)
from oblimit.solver import ProblemSetup, integrate

MODEL = GibbsModel(rho0=1000.0, a=1e-3, b=1e-9, c0_dim=1.0)
LIMIT = limit_groups(FLOW_BASE)


def verdict(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def test_criterion_1_coefficients():
    t0 = time.perf_counter()
    pts = qmc.scale(qmc.Halton(d=2, scramble=False).random(101)[1:], [0.0, 200.0], [1e7, 600.0])
    worst = 0.0
    for p, th in pts:
        den = 1 + MODEL.b * p - MODEL.a * th
        worst = max(
            worst,
            abs(alpha(MODEL, (p, th), method="fd") / (MODEL.a / den) - 1),
            abs(beta(MODEL, (p, th), method="fd") / (MODEL.b / den) - 1),
        )
    cp_err = max(abs(specific_heat_cp(MODEL, (0.0, th)) / MODEL.c0_dim - 1) for th in np.linspace(200, 600, 9))
    wall = time.perf_counter() - t0
    ok = worst <= 1e-6 and cp_err <= 1e-10 and wall < 1.0
    verdict(1, ok, f"FD alpha/beta rel err {worst:.2e} (<= 1e-6), c_p(0) rel err {cp_err:.1e}, {wall:.2f}s")


def test_criterion_2_legendre():
    t0 = time.perf_counter()
    worst = max(
        legendre_consistency(MODEL, (p, th))
        for p in np.linspace(0.0, 1e7, 10)
        for th in np.linspace(1.0, 900.0, 10)
    )
    wall = time.perf_counter() - t0
    verdict(2, worst <= 1e-6 and wall < 1.0, f"max residual {worst:.2e} (<= 1e-6), {wall:.2f}s")


def test_criterion_3_roundtrip():
    t0 = time.perf_counter()
    base = BaseScales()
    rng = np.random.default_rng(2024)
    A = 10 ** rng.uniform(-5, -0.5, 1000)
    B = A * 10 ** rng.uniform(-6, 0, 1000)
    worst = 0.0
    for Ai, Bi in zip(A, B):
        a, b = invert_AB(Ai, Bi, base)
        A2, B2 = compute_AB(a, b, thermal_scales(a, base))
        worst = max(worst, abs(A2 / Ai - 1), abs(B2 / Bi - 1))
    exact = all(mass_coefficient(a, a * a, 1.0, 1.0) == a for a in (0.2, 0.05, 1e-3, 1e-6))
    wall = time.perf_counter() - t0
    ok = worst <= 1e-12 and exact and wall < 1.0
    verdict(3, ok, f"roundtrip rel err {worst:.1e} (<= 1e-12), coefficient at (1,1) == A: {exact}, {wall:.2f}s")


def test_criterion_4_assumptions():
    t0 = time.perf_counter()
    As = [1e-1, 1e-2, 1e-3, 1e-4]
    checks = [verify_assumptions(A, A * A, grid=((0.5, 1.5), (0.5, 1.5))) for A in As]
    slope = float(np.polyfit(np.log(As), np.log([c.rho_r_sup for c in checks]), 1)[0])
    dev = [abs(c.k1 - 1) for c in checks]
    monotone = all(d1 > d2 for d1, d2 in zip(dev, dev[1:]))
    unit = all(c.k1k2 == 1.0 for c in checks)
    wall = time.perf_counter() - t0
    ok = slope >= 1.9 and monotone and dev[2] <= 1e-2 and unit and wall < 10
    verdict(4, ok, f"rho_r slope {slope:.3f} (>= 1.9), |k1-1| at 1e-3 = {dev[2]:.2e}, "
                   f"monotone {monotone}, k1k2 == 1 {unit}, {wall:.1f}s")


def _mms_orders(system, groups, sizes=(32, 64, 128), T=0.2):
    ms = ManufacturedSolution(system, groups, default_fields(system))
    errs = []
    for n in sizes:
        g = Grid(n, n)
        su = ProblemSetup(g, groups, dt=T / round(T / (0.5 * g.h)), t_end=T, source=ms.source(g))
        s = integrate(ms.initial(g), su, system)
        ex = ms.exact(g, s.t)
        errs.append((l2_velocity(g, s.u - ex.u, s.v - ex.v), l2_center(g, s.theta - ex.theta)))
    e = np.array(errs)
    return np.log2(e[:-1] / e[1:])


def _fmt(orders):
    return "/".join(f"{x:.2f}" for x in orders.ravel())


def test_criterion_5_mms():
    t0 = time.perf_counter()
    ob = _mms_orders("ob", LIMIT)
    ex = _mms_orders("expansion", dataclasses.replace(LIMIT, A=0.05, B=0.0025))
    full = _mms_orders("full", physical_groups(0.1, 0.01, FLOW_BASE))
    wall = time.perf_counter() - t0
    # observed order over each refinement, velocity and temperature
    ok = (np.all(np.abs(ob - 2) <= 0.2) and np.all(np.abs(ex - 2) <= 0.2)
          and np.all(full >= 1.8) and wall < 180)
    verdict(5, ok, f"orders (v,theta per refinement) OB {_fmt(ob)}, expansion {_fmt(ex)}, full {_fmt(full)}, "
                   f"{wall:.0f}s")


def test_criterion_6_gauge():
    t0 = time.perf_counter()
    A, g = 0.05, Grid(32, 32)
    dt = 0.4 * g.h
    ob = run_case(ProblemSetup(g, LIMIT, dt=dt), "ob", n_steps=100)
    ex = run_case(ProblemSetup(g, dataclasses.replace(LIMIT, A=A, B=A * A), dt=dt), "expansion", n_steps=100)
    dv, dth, std = gauge_compare(ex, ob, A, ProblemSetup(g, LIMIT, dt=dt).f)
    vscale = max(np.max(np.abs(ob.u)), np.max(np.abs(ob.v)))
    rel_v, rel_th = dv / vscale, dth / np.max(np.abs(ob.theta))
    wall = time.perf_counter() - t0
    ok = rel_v <= 1e-10 and rel_th <= 1e-10 and std <= 1e-9 and wall < 60
    verdict(6, ok, f"rel dv {rel_v:.1e}, rel dtheta {rel_th:.1e} (<= 1e-10), gauge std {std:.1e} (<= 1e-9), "
                   f"{wall:.1f}s")


def test_criterion_7_limit():
    t0 = time.perf_counter()
    rep = limit_study(StudyConfig())
    wall = time.perf_counter() - t0
    sv, st = rep.slopes["e_v_L2"]["slope"], rep.slopes["e_theta_L2"]["slope"]
    mono = rep.monotone["e_v_L2"] and rep.monotone["e_theta_L2"]
    ok = mono and sv >= 0.8 and st >= 0.8 and wall < 600
    errs = ", ".join(f"A={c.A}: {c.e_v_L2:.2e}/{c.e_theta_L2:.2e}" for c in rep.cases)
    verdict(7, ok, f"slopes e_v {sv:.3f}, e_theta {st:.3f} (>= 0.8), monotone {mono}; {errs}; {wall:.0f}s")


def test_criterion_8_weak_residual():
    t0 = time.perf_counter()
    res = []
    for n in (32, 64):
        g = Grid(n, n, 2.0)
        su = ProblemSetup(g, LIMIT, dt=0.4 * g.h, t_end=0.5)
        res.append((g.h, weak_residual(run_case(su, "ob"), LIMIT)))
    (h1, r1), (h2, r2) = res
    slopes = {k: math.log(r1[k] / r2[k]) / math.log(h1 / h2) for k in r1}
    wall = time.perf_counter() - t0
    ok = min(slopes.values()) >= 1.8 and wall < 120
    verdict(8, ok, "slopes " + ", ".join(f"{k} {v:.2f}" for k, v in sorted(slopes.items()))
            + f" (>= 1.8), {wall:.1f}s")


DETERMINISM_CONFIG = """\
[solver]
nx = 16
ny = 16
t_end = 0.1

[nondim]
A = 0.1
B = 0.01

[limit_harness]
A_sequence = 0.2, 0.1, 0.05
"""


def _hashes(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir())}


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(DETERMINISM_CONFIG)
    same, count = True, 0
    for command in ("coeffs", "verify", "simulate", "limit-study"):
        runs = []
        for k in range(2):
            out = tmp_path / f"{command}-{k}"
            assert main([command, "--config", str(cfg), "--out", str(out)]) == 0
            runs.append(_hashes(out))
        same = same and runs[0] == runs[1]
        count += sum(1 for name in runs[0] if name.endswith((".csv", ".json")))
    verdict(9, same, f"{count} CSV/JSON artifacts byte-identical across reruns: {same}")

