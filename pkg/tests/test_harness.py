import dataclasses
import hashlib
import json
import math
import time

import numpy as np
import pytest

from oblimit.exceptions import StudyError
from oblimit.grid import Grid
from oblimit.harness import (
    CSV_COLUMNS,
    FLOW_BASE,
    ConvergenceReport,
    StudyConfig,
    difference_norm,
    emit_report,
    gauge_compare,
    initial_state,
    limit_study,
    reference_run,
    report_json,
    run_case,
    weak_residual,
)
from oblimit.nondim import limit_groups, physical_groups
from oblimit.solver import ProblemSetup, conduction_state

LIM = limit_groups(FLOW_BASE)


def small_config(**kw):
    opts = dict(A_sequence=(0.2, 0.1), nx=16, ny=16, lx=2.0, t_end=0.1)
    opts.update(kw)
    return StudyConfig(**opts)


@pytest.fixture(scope="module")
def three_runs():
    g = Grid(16, 16, 2.0)
    su = ProblemSetup(g, LIM, dt=0.4 * g.h, t_end=0.2)
    runs = [run_case(su, "ob", initial=initial_state(g, amp)) for amp in (0.2, 0.5, 0.9)]
    return runs


def test_conduction_run_stays_steady():
    g = Grid(16, 16, 2.0)
    su = ProblemSetup(g, LIM, dt=0.4 * g.h, t_end=0.2)
    c = conduction_state(su)
    tr = run_case(su, "ob", initial=c, stride=2)
    assert len(tr) == 1 + round(0.2 / su.dt) // 2
    assert np.max(np.abs(tr.theta - c.theta[None])) < 1e-13
    assert np.max(np.abs(tr.u)) < 1e-14


def test_full_case_runtime():
    g = Grid(32, 32)
    grp = physical_groups(0.1, 0.01, FLOW_BASE)
    su = ProblemSetup(g, grp, dt=0.4 * g.h, t_end=0.5)
    t0 = time.perf_counter()
    tr = run_case(su, "full", 0.1, 0.01)
    assert time.perf_counter() - t0 < 60
    assert tr.times[-1] == pytest.approx(0.5)


def test_run_case_checks_parameters():
    g = Grid(16, 16)
    su = ProblemSetup(g, physical_groups(0.1, 0.01, FLOW_BASE), dt=0.01, t_end=0.02)
    with pytest.raises(ValueError):
        run_case(su, "full", A=0.2)
    with pytest.raises(ValueError):
        run_case(ProblemSetup(g, LIM, dt=0.01), "expansion")


def test_expansion_and_limit_trajectories_agree():
    A = 0.05
    g = Grid(16, 16, 2.0)
    ob = run_case(ProblemSetup(g, LIM, dt=0.4 * g.h, t_end=0.5), "ob")
    ex = run_case(ProblemSetup(g, dataclasses.replace(LIM, A=A, B=A * A), dt=0.4 * g.h, t_end=0.5), "expansion")
    dv, dth, std = gauge_compare(ex, ob, A, ProblemSetup(g, LIM, dt=0.01).f)
    assert dv <= 1e-10 and dth <= 1e-10 and std <= 1e-10
    assert difference_norm(ex, ob, "p") <= 1e-9


def test_gauge_compare_detects_different_parameters():
    g = Grid(16, 16, 2.0)
    su = ProblemSetup(g, LIM, dt=0.4 * g.h, t_end=0.2)
    ob = run_case(su, "ob")
    ex = run_case(ProblemSetup(g, dataclasses.replace(LIM, A=0.05, re_mu=2 * LIM.re_mu), dt=su.dt, t_end=0.2),
                  "expansion")
    dv, _, std = gauge_compare(ex, ob, 0.05, su.f)
    assert dv > 1e-6 and std > 1e-8


def test_gauge_compare_after_100_steps():
    A = 0.05
    g = Grid(32, 32)
    dt = 0.4 * g.h
    ob = run_case(ProblemSetup(g, LIM, dt=dt), "ob", n_steps=100)
    ex = run_case(ProblemSetup(g, dataclasses.replace(LIM, A=A, B=A * A), dt=dt), "expansion", n_steps=100)
    _, _, std = gauge_compare(ex, ob, A, ProblemSetup(g, LIM, dt=dt).f)
    assert std <= 1e-9


def test_gauge_compare_rejects_mismatched_grids(three_runs):
    other = run_case(ProblemSetup(Grid(16, 16, 1.0), LIM, dt=0.4 / 16, t_end=0.2), "ob")
    with pytest.raises(ValueError, match="grid"):
        gauge_compare(other, three_runs[0], 0.05, np.zeros((16, 16)))


def test_self_comparison_is_zero(three_runs):
    a = three_runs[0]
    for name in ("v", "theta", "p"):
        assert difference_norm(a, a, name) <= 1e-12


def test_norms_symmetric_and_triangle(three_runs):
    a, b, c = three_runs
    for name in ("v", "theta", "p"):
        for norm in ("space-time", "final"):
            ab = difference_norm(a, b, name, norm)
            assert ab == difference_norm(b, a, name, norm)
            assert difference_norm(a, c, name, norm) <= ab + difference_norm(b, c, name, norm) + 1e-15


def test_weak_residual_of_conduction_is_tiny():
    for n in (16, 32):
        g = Grid(n, n, 2.0)
        su = ProblemSetup(g, LIM, dt=0.4 * g.h, t_end=0.2)
        r = weak_residual(run_case(su, "ob", initial=conduction_state(su)), LIM)
        assert max(r.values()) <= g.h**2


def test_weak_residual_noise_is_large(three_runs):
    tr = dataclasses.replace(three_runs[0])
    tr.u = np.random.default_rng(3).standard_normal(tr.u.shape)
    r = weak_residual(tr, LIM)
    assert r["momentum"] > 1e-3 and r["div"] > 1e-3


def test_weak_residual_scales_with_h_squared():
    res = []
    for n in (32, 64):
        g = Grid(n, n, 2.0)
        su = ProblemSetup(g, LIM, dt=0.4 * g.h, t_end=0.5)
        res.append((g.h, weak_residual(run_case(su, "ob"), LIM)))
    (h1, r1), (h2, r2) = res
    for key in ("div", "momentum", "heat"):
        assert math.log(r1[key] / r2[key]) / math.log(h1 / h2) >= 1.8
    assert r2["momentum"] <= 10 * h2**2 and r2["heat"] <= 10 * h2**2


def test_weak_residual_rejects_bad_support(three_runs):
    with pytest.raises(ValueError, match="support"):
        weak_residual(three_runs[0], LIM, support=(-0.1, 1.0))


def test_study_config_validation():
    with pytest.raises(ValueError, match="decreasing"):
        StudyConfig(A_sequence=(0.1, 0.2))
    with pytest.raises(ValueError, match="positive"):
        StudyConfig(A_sequence=(0.1, 0.0))
    with pytest.raises(ValueError, match="limit regime"):
        StudyConfig(A_sequence=(0.1,), b_power=1.0)
    with pytest.raises(ValueError):
        StudyConfig(norm="sup")


def test_single_case_study_has_no_slope():
    rep = limit_study(small_config(A_sequence=(0.1,)))
    assert len(rep.cases) == 1 and rep.slopes == {}


def test_limit_compared_with_itself_is_zero():
    rep = limit_study(small_config(system="ob"))
    assert all(c.e_v_L2 <= 1e-12 and c.e_theta_L2 <= 1e-12 for c in rep.cases)


def test_small_study_structure(tmp_path):
    rep = limit_study(small_config(A_sequence=(0.2, 0.1, 0.05, 0.025)))
    assert len(rep.cases) == 4
    assert set(rep.slopes) == {"e_v_L2", "e_theta_L2"}
    assert all(c.e_v_L2 >= 0 and c.e_theta_L2 >= 0 for c in rep.cases)
    files = emit_report(rep, tmp_path)
    lines = files[0].read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 5
    data = json.loads(files[1].read_text())
    assert len(data["slopes"]) == 2 and "rms_residual" in data["slopes"]["e_v_L2"]
    assert data["config"]["A_sequence"] == [0.2, 0.1, 0.05, 0.025]


def test_empty_report_gives_header_only_csv(tmp_path):
    files = emit_report(None, tmp_path)
    assert files[0].read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_report_bytes_are_reproducible(tmp_path):
    digests = []
    for k in range(2):
        files = emit_report(limit_study(small_config()), tmp_path / str(k))
        digests.append([hashlib.sha256(f.read_bytes()).hexdigest() for f in files])
    assert digests[0] == digests[1]


def test_parallel_study_matches_serial():
    cfg = small_config()
    assert report_json(limit_study(cfg, workers=2)) == report_json(limit_study(cfg, workers=1))


def test_failed_case_keeps_partial_results():
    # with a small specific heat the compressibility turns negative in the first case
    cfg = small_config(base=dataclasses.replace(FLOW_BASE, c0_dim=4.0))
    with pytest.raises(StudyError, match="A = 0.2") as info:
        limit_study(cfg)
    assert isinstance(info.value.report, ConvergenceReport)
    assert info.value.report.cases == []


def test_reference_run_is_limit_system():
    cfg = small_config()
    ref = reference_run(cfg)
    assert ref.times[-1] == pytest.approx(cfg.t_end)
