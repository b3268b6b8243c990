"""Quick invariant checks, run by ``splitkit verify``.

Each check returns (ok, detail).  The whole suite takes a few seconds.
"""
from __future__ import annotations

import time

import numpy as np
from numpy.polynomial import Polynomial

from .duhamel import NeumannConfig, neumann_iterate
from .expaction import ExpActionBackend
from .harness import estimate_order
from .models import random_matrix_problem, schrodinger_problem
from .quadrature import family_rules, kernel_integral, kernel_prediction, optimal_tau_F, quadrature_error_oracle
from .splittings import build_D, build_F, integrate, step
from .operators import commutator


def check_optimal_tau():
    tau = optimal_tau_F()
    r = abs(kernel_integral("F", tau))
    return r < 1e-13, f"tau*={tau!r} |int K|={r:.1e}"


def check_kernels():
    worst = 0.0
    for fam, hi in (("F", 0.5), ("D", 1.0)):
        for tau in np.linspace(0.0, hi, 20):
            q1, _ = family_rules(fam, tau)
            for k in (2, 3, 4):
                f = Polynomial([0.0] * k + [1.0])
                worst = max(worst, abs(quadrature_error_oracle(q1, f) - kernel_prediction(fam, tau, f)))
    return worst < 1e-13, f"max |quadrature error - kernel prediction| = {worst:.1e}"


def check_strang_identity():
    p = random_matrix_problem(6, seed=3)
    be = ExpActionBackend("dense")
    a = step(build_F(0.5), p, be, 0.1, 0.05, p.u0)
    b = step(build_D(0.5), p, be, 0.1, 0.05, p.u0)
    d = np.max(np.abs(a - b))
    return d < 1e-12, f"|F(h,1/2) - D(h,1/2)| = {d:.1e}"


def check_commutator():
    p = random_matrix_problem(6, seed=4)
    X, Y = p.A, p.B(0.3)
    d = np.max(np.abs((commutator(X, Y) + commutator(Y, X)).to_array()))
    return d < 1e-14, f"|[X,Y] + [Y,X]| = {d:.1e}"


def check_local_order():
    p = random_matrix_problem(8, seed=1)
    be = ExpActionBackend("dense")
    hs = 2.0 ** -np.arange(4, 8)
    errs = []
    for h in hs:
        ref = neumann_iterate(p, None, h, NeumannConfig(depth=4))
        errs.append(np.linalg.norm(step(build_F(0.25), p, be, 0.0, h, p.u0) - ref))
    slope = estimate_order(hs, errs)
    return slope >= 2.9, f"local slope F(h,1/4) = {slope:.3f}"


def check_norm():
    p = schrodinger_problem(64)
    u = integrate(build_F(0.21), p, ExpActionBackend(), 1e-2).u
    drift = abs(p.norm(u) / p.norm(p.u0) - 1)
    return drift < 1e-8, f"Schrodinger norm drift = {drift:.1e}"


CHECKS = [
    ("optimal tau", check_optimal_tau),
    ("kernel oracle", check_kernels),
    ("Strang identity", check_strang_identity),
    ("commutator antisymmetry", check_commutator),
    ("local order", check_local_order),
    ("norm conservation", check_norm),
]


def run_all(out=print) -> bool:
    ok_all = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:<24s} {detail}  ({time.perf_counter() - t0:.2f}s)")
    return ok_all
