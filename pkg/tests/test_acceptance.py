"""Acceptance criteria 1-9.

Each test records one line "criterion N: PASS|FAIL ..." that is printed in the
terminal summary (and immediately when run with -s).
"""
import subprocess
import sys
import time

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from splitkit.duhamel import NeumannConfig, neumann_iterate, reference_solution
from splitkit.expaction import ExpActionBackend, expm_dense
from splitkit.harness import StudyConfig, estimate_order, run_convergence_study
from splitkit.models import random_matrix_problem
from splitkit.quadrature import family_rules, kernel_integral, kernel_prediction, quadrature_error_oracle
from splitkit.splittings import build_D, build_F, step

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

H_GLOBAL = [1 / 50, 1 / 100, 1 / 200, 1 / 400, 1 / 800]
TAUS_SCHRODINGER = [0.0, 0.175, 0.21, 0.25, 0.375, 0.5]
TAUS_TRANSPORT = [0.2, 0.4, 0.5, 0.8]


def report(n, ok, detail, seconds=None, limit=None):
    if limit is not None:
        ok = ok and seconds < limit
    timing = "" if seconds is None else f" [{seconds:.2f}s{'' if limit is None else f' / limit {limit:g}s'}]"
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_optimal_tau():
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "splitkit.cli", "kernels", "--family", "F"], capture_output=True, text=True, timeout=60
    )
    secs = time.perf_counter() - t0
    fields = dict(line.split(" = ", 1) for line in proc.stdout.strip().splitlines())
    tau = float(fields["optimal tau"])
    resid = abs(kernel_integral("F", tau))
    ok = proc.returncode == 0 and abs(tau - 0.21132486540518713) <= 1e-14 and resid < 1e-13
    report(1, ok, f"tau*={fields['optimal tau']} (closed form {fields['closed form (3 - sqrt(3))/6']}), |int K|={resid:.1e}",
           secs, 1.0)


def test_criterion_2_kernel_oracle():
    t0 = time.perf_counter()
    worst = {}
    for family, hi in (("F", 0.5), ("D", 1.0)):
        worst[family] = 0.0
        for tau in np.linspace(0.0, hi, 20):
            q1, _ = family_rules(family, tau)
            for k in (2, 3, 4):
                f = Polynomial([0] * k + [1])
                worst[family] = max(worst[family], abs(quadrature_error_oracle(q1, f) - kernel_prediction(family, tau, f)))
    secs = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-13
    report(2, ok, f"max deviation F={worst['F']:.1e} D={worst['D']:.1e} (tol 1e-13)", secs, 1.0)


def _explicit_strang(p, t, h, u):
    half = expm_dense(p.A, h / 2).to_array()
    mid = expm_dense(p.B(t + h / 2), h).to_array()
    return half @ (mid @ (half @ u))


def test_criterion_3_structural_identities():
    t0 = time.perf_counter()
    be = ExpActionBackend("dense")
    worst_strang = worst_comp = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        dim = int(rng.integers(4, 9))
        p = random_matrix_problem(dim, seed=seed, skew=bool(seed % 2))
        t, h = float(rng.uniform(0, 0.5)), float(rng.uniform(0.01, 0.2))
        ref = _explicit_strang(p, t, h, p.u0)
        a = step(build_F(0.5), p, be, t, h, p.u0)
        b = step(build_D(0.5), p, be, t, h, p.u0)
        worst_strang = max(worst_strang, np.linalg.norm(a - ref), np.linalg.norm(b - ref))
        q = step(build_F(0.25), p, be, t, h, p.u0)
        s = step(build_F(0.5), p, be, t + h / 2, h / 2, step(build_F(0.5), p, be, t, h / 2, p.u0))
        worst_comp = max(worst_comp, np.linalg.norm(q - s))
    counts_F = {tau: build_F(tau).n_stages for tau in (0.0, 0.5, 0.21, 0.25)}
    counts_D = {tau: build_D(tau).n_stages for tau in (0.0, 1.0, 0.3, 0.5)}
    counts_ok = counts_F == {0.0: 3, 0.5: 3, 0.21: 5, 0.25: 5} and counts_D == {0.0: 2, 1.0: 2, 0.3: 3, 0.5: 3}
    secs = time.perf_counter() - t0
    ok = worst_strang <= 1e-12 and worst_comp <= 1e-12 and counts_ok
    report(3, ok, f"Strang dev={worst_strang:.1e} composition dev={worst_comp:.1e} stages F={counts_F} D={counts_D}", secs, 5.0)


def test_criterion_4_local_order():
    t0 = time.perf_counter()
    hs = 2.0 ** -np.arange(4, 11)
    be = ExpActionBackend("dense")
    slopes = {}
    for seed in (0, 1):
        p = random_matrix_problem(8, seed=seed, degree=2)
        refs = [neumann_iterate(p, None, h, NeumannConfig(depth=4)) for h in hs]
        for fam, taus in (("F", (0.0, 0.21, 0.25, 0.5)), ("D", (0.0, 0.3, 0.5, 1.0))):
            for tau in taus:
                scheme = build_F(tau) if fam == "F" else build_D(tau)
                errs = [np.linalg.norm(step(scheme, p, be, 0.0, h, p.u0) - r) for h, r in zip(hs, refs)]
                key = (fam, tau)
                slopes[key] = min(slopes.get(key, np.inf), estimate_order(hs, errs))
    secs = time.perf_counter() - t0
    ok = min(slopes.values()) >= 2.9
    detail = " ".join(f"{f}({t:g})={s:.3f}" for (f, t), s in slopes.items())
    report(4, ok, f"min slope {min(slopes.values()):.3f} (>= 2.9): {detail}", secs, 30.0)


@pytest.fixture(scope="module")
def schrodinger_study(tmp_path_factory):
    cfg = StudyConfig(problem="schrodinger", family="F", tau=TAUS_SCHRODINGER, h=H_GLOBAL, t_end=1.0,
                      backend="diagonal-auto", ref="fine-step", out=str(tmp_path_factory.mktemp("schr")), grid_n=128,
                      repeats=3, ref_factor=64, ref_rtol=1e-6)
    t0 = time.perf_counter()
    table = run_convergence_study(cfg)
    return cfg, table, time.perf_counter() - t0


def test_criterion_5_schrodinger_order(schrodinger_study):
    cfg, table, secs = schrodinger_study
    orders = {tau: table.orders[("schrodinger", "F", tau)] for tau in cfg.tau}
    drift = max(r.norm_drift for r in table.rows)
    ok = not table.failed and all(o is not None and 1.85 <= o <= 2.15 for o in orders.values()) and drift <= 1e-8
    detail = " ".join(f"tau={t:g}:{o:.3f}" for t, o in orders.items())
    report(5, ok, f"orders {detail}; max norm drift {drift:.1e}; ref floor {table.reference_floor:.1e}", secs, 300.0)


def test_criterion_6_tau_ordering(schrodinger_study):
    cfg, table, _ = schrodinger_study
    ok = True
    parts = []
    for h in cfg.h[-2:]:
        e21, e25, e5 = (table.error(t, h) for t in (0.21, 0.25, 0.5))
        ok &= e21 < e5 and e25 < e5 and max(e21, e25) / min(e21, e25) <= 2.0
        parts.append(f"h={h:g}: e(.21)={e21:.2e} e(.25)={e25:.2e} e(.5)={e5:.2e}")
    report(6, ok, "; ".join(parts))


def test_criterion_9_cost_ratio(schrodinger_study):
    cfg, table, _ = schrodinger_study
    five = [r.per_step_ms for r in table.rows if 0 < r.tau < 0.5]
    three = [r.per_step_ms for r in table.rows if r.tau in (0.0, 0.5)]
    ratio = np.mean(five) / np.mean(three)
    report(9, 1.3 <= ratio <= 2.1, f"per-step runtime ratio five/three stages = {ratio:.3f} "
                                   f"({np.mean(five) * 1e3:.1f}us vs {np.mean(three) * 1e3:.1f}us)")


def test_criterion_7_transport(tmp_path):
    cfg = StudyConfig(problem="transport", family="D", tau=TAUS_TRANSPORT, h=H_GLOBAL, t_end=1.0,
                      backend="diagonal-auto", ref="exact", out=str(tmp_path), dx=0.004, repeats=1)
    t0 = time.perf_counter()
    table = run_convergence_study(cfg)
    secs = time.perf_counter() - t0
    orders = {tau: table.orders[("transport", "D", tau)] for tau in cfg.tau}
    ok = not table.failed and all(o is not None and 1.85 <= o <= 2.15 for o in orders.values())
    sym = max(abs(table.error(0.2, h) / table.error(0.8, h) - 1) for h in cfg.h)
    ok &= sym <= 0.05
    half_min = all(table.error(0.5, h) <= min(table.error(t, h) for t in cfg.tau) for h in cfg.h[1:])
    ok &= half_min
    detail = " ".join(f"tau={t:g}:{o:.3f}" for t, o in orders.items())
    report(7, ok, f"orders {detail}; max |e(.2)/e(.8)-1|={sym:.1e}; tau=1/2 minimal={half_min}", secs, 300.0)


def test_criterion_8_neumann_remainder():
    t0 = time.perf_counter()
    hs = 2.0 ** -np.arange(3, 9)
    p = random_matrix_problem(8, seed=21)
    be = ExpActionBackend("dense")
    refs = [reference_solution(p, be, h, 10_000, rtol=1e-10) for h in hs]
    slopes = {}
    for n in (1, 2):
        errs = [np.linalg.norm(r - neumann_iterate(p, None, h, NeumannConfig(depth=n))) for h, r in zip(hs, refs)]
        slopes[n] = estimate_order(hs, errs)
    secs = time.perf_counter() - t0
    ok = slopes[1] >= 1.9 and slopes[2] >= 2.9
    report(8, ok, f"remainder slopes n=1: {slopes[1]:.3f} (>= 1.9), n=2: {slopes[2]:.3f} (>= 2.9)", secs, 30.0)
