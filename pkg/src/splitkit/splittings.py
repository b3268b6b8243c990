"""Splitting schemes compiled from quadrature rules, and the time stepper.

A scheme is a list of exponential stages written in operator-product order,
so the rightmost stage acts on the state first.  Stage coefficients are kept
as exact fractions of the given tau; zero stages are removed and adjacent
compatible stages merged when the scheme is built.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import InvalidArgument, ResourceError, UnsupportedQuadrature
from .expaction import ExpActionBackend
from .operators import EvolutionProblem, effective_C
from .quadrature import QuadratureRule1D, SimplexQuadratureRule

__all__ = [
    "Stage",
    "SplittingScheme",
    "build_F",
    "build_D",
    "build_scheme",
    "compile_from_quadrature",
    "step",
    "integrate",
    "IntegrationResult",
    "MAX_STEPS",
]

EXP_A = "ExpA"
EXP_B = "ExpB"
EXP_BC = "ExpBplusC"
MAX_STEPS = 10**8


@dataclass(frozen=True)
class Stage:
    """One exponential factor.

    ExpA:       exp(coeff * h * A)
    ExpB:       exp(coeff * h * B(t_n + offset * h))
    ExpBplusC:  exp(coeff * h * B(t) + c_coeff * h^2 * C(t)),  t = t_n + offset * h
    """

    kind: str
    coeff: Fraction
    offset: Optional[Fraction] = None
    c_coeff: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in (EXP_A, EXP_B, EXP_BC):
            raise InvalidArgument(f"unknown stage kind {self.kind!r}")
        if self.kind == EXP_A and self.offset is not None:
            raise InvalidArgument("ExpA stages carry no time offset")
        if self.kind != EXP_A:
            if self.offset is None or not 0 <= self.offset <= 1:
                raise InvalidArgument("B stages need a time offset in [0, 1]")
        if self.kind != EXP_BC and self.c_coeff != 0:
            raise InvalidArgument("only ExpBplusC stages carry a C coefficient")

    def __str__(self):
        if self.kind == EXP_A:
            return f"ExpA {self.coeff}"
        if self.kind == EXP_B:
            return f"ExpB {self.coeff} @ {self.offset}"
        return f"ExpBplusC {self.coeff} @ {self.offset}, c={self.c_coeff}"


@dataclass(frozen=True)
class SplittingScheme:
    family: str
    tau: Optional[float]
    stages: tuple

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        a_sum = sum((s.coeff for s in self.stages if s.kind == EXP_A), Fraction(0))
        b_sum = sum((s.coeff for s in self.stages if s.kind != EXP_A), Fraction(0))
        if a_sum != 1 or b_sum != 1:
            raise InvalidArgument(f"inconsistent scheme: A coefficients sum to {a_sum}, B weights to {b_sum}")

    def __len__(self):
        return len(self.stages)

    def __str__(self):
        return " | ".join(str(s) for s in self.stages)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _normalize(stages):
    """Drop zero stages, turn ExpBplusC with c=0 into ExpB, merge neighbours."""
    out = []
    for s in stages:
        if s.coeff == 0 and s.c_coeff == 0:
            continue
        if s.kind == EXP_BC and s.c_coeff == 0:
            s = Stage(EXP_B, s.coeff, s.offset)
        if out:
            prev = out[-1]
            if s.kind == prev.kind == EXP_A:
                out[-1] = Stage(EXP_A, prev.coeff + s.coeff)
                continue
            if s.kind == prev.kind == EXP_B and s.offset == prev.offset:
                out[-1] = Stage(EXP_B, prev.coeff + s.coeff, s.offset)
                continue
        out.append(s)
    # merging may expose new zero-coefficient neighbours only if coefficients cancel
    return [s for s in out if not (s.coeff == 0 and s.c_coeff == 0)]


def build_F(tau) -> SplittingScheme:
    """exp(tau hA) exp(h/2 B(1-tau)) exp((1-2tau) hA) exp(h/2 B(tau)) exp(tau hA)."""
    t = _frac(tau)
    if not 0 <= t <= Fraction(1, 2):
        raise InvalidArgument(f"family F needs tau in [0, 1/2], got {float(tau)}")
    half = Fraction(1, 2)
    stages = [
        Stage(EXP_A, t),
        Stage(EXP_B, half, 1 - t),
        Stage(EXP_A, 1 - 2 * t),
        Stage(EXP_B, half, t),
        Stage(EXP_A, t),
    ]
    return SplittingScheme("F", float(tau), _normalize(stages))


def build_D(tau) -> SplittingScheme:
    """exp((1-tau) hA) exp(hB(tau) + h^2 (1-2tau)/2 C(tau)) exp(tau hA)."""
    t = _frac(tau)
    if not 0 <= t <= 1:
        raise InvalidArgument(f"family D needs tau in [0, 1], got {float(tau)}")
    stages = [
        Stage(EXP_A, 1 - t),
        Stage(EXP_BC, Fraction(1), t, (1 - 2 * t) / 2),
        Stage(EXP_A, t),
    ]
    return SplittingScheme("D", float(tau), _normalize(stages))


def build_scheme(family: str, tau) -> SplittingScheme:
    family = family.upper()
    if family == "F":
        return build_F(tau)
    if family == "D":
        return build_D(tau)
    raise InvalidArgument(f"unknown family {family!r}")


def _close(a, b, tol=1e-14):
    return abs(a - b) <= tol


def _match_F(q1: QuadratureRule1D, q2: SimplexQuadratureRule):
    if any(d != 0 for d in q1.orders):
        return None, "F pattern needs value samples only"
    if len(q1) == 1:
        if not (_close(q1.nodes[0], 0.5) and _close(q1.weights[0], 1.0)):
            return None, "single-node F pattern must be the midpoint with weight 1"
        tau = 0.5
    elif len(q1) == 2:
        if not (_close(q1.weights[0], 0.5) and _close(q1.weights[1], 0.5)):
            return None, f"F pattern needs equal weights 1/2, got {q1.weights}"
        if not _close(q1.nodes[0] + q1.nodes[1], 1.0):
            return None, "F pattern needs nodes symmetric about 1/2"
        tau = min(q1.nodes)
    else:
        return None, f"F pattern has one or two nodes, got {len(q1)}"
    expected = {}
    for p, w in (((1 - tau, 1 - tau), 0.125), ((1 - tau, tau), 0.25), ((tau, tau), 0.125)):
        key = next((k for k in expected if _close(k[0], p[0]) and _close(k[1], p[1])), p)
        expected[key] = expected.get(key, 0.0) + w
    if len(expected) != len(q2):
        return None, "simplex rule does not match the F node layout"
    for p, w in zip(q2.nodes, q2.weights):
        key = next((k for k in expected if _close(k[0], p[0]) and _close(k[1], p[1])), None)
        if key is None or not _close(expected[key], w):
            return None, f"simplex node {p} with weight {w} does not match the F layout"
    return tau, None


def _match_D(q1: QuadratureRule1D, q2: SimplexQuadratureRule):
    if sorted(q1.orders) != [0, 1] or len(q1) != 2:
        return None, "D pattern needs one value sample and one first-derivative sample"
    i0, i1 = q1.orders.index(0), q1.orders.index(1)
    tau = q1.nodes[i0]
    if not _close(q1.nodes[i1], tau):
        return None, "D pattern samples value and derivative at the same node"
    if not _close(q1.weights[i0], 1.0) or not _close(q1.weights[i1], (1 - 2 * tau) / 2):
        return None, "D pattern weights must be 1 and (1 - 2 tau)/2"
    if len(q2) != 1 or not (_close(q2.nodes[0][0], tau) and _close(q2.nodes[0][1], tau)):
        return None, "D pattern needs the single simplex node (tau, tau)"
    return tau, None


def compile_from_quadrature(q1: QuadratureRule1D, q2: SimplexQuadratureRule) -> SplittingScheme:
    """Read tau off a supported quadrature pair and build the matching scheme."""
    if 1 in q1.orders:
        tau, why = _match_D(q1, q2)
        if tau is None:
            raise UnsupportedQuadrature(f"unsupported quadrature: {why}")
        return build_D(tau)
    tau, why = _match_F(q1, q2)
    if tau is None:
        raise UnsupportedQuadrature(f"unsupported quadrature: {why}")
    return build_F(tau)


def _c_mode(problem: EvolutionProblem, c_mode: str) -> str:
    if c_mode == "auto":
        return "analytic-override" if problem.C_override is not None else "discrete"
    return c_mode


def step(
    scheme: SplittingScheme,
    problem: EvolutionProblem,
    backend: ExpActionBackend,
    t_n: float,
    h: float,
    u: np.ndarray,
    c_mode: str = "auto",
) -> np.ndarray:
    """Advance u from t_n to t_n + h."""
    if not h > 0:
        raise InvalidArgument(f"step size must be positive, got {h}")
    mode = _c_mode(problem, c_mode)
    for s in reversed(scheme.stages):
        if s.kind == EXP_A:
            u = backend.exp_action(problem.A, float(s.coeff) * h, u, cache=True)
            continue
        t = t_n + float(s.offset) * h
        Bt = problem.B(t)
        if s.kind == EXP_B:
            u = backend.exp_action(Bt, float(s.coeff) * h, u)
        else:
            C = effective_C(problem.B, problem.A, t, mode, override=problem.C_override, h=h)
            H = Bt.scaled(float(s.coeff) * h) + C.scaled(float(s.c_coeff) * h * h)
            u = backend.exp_action(H, 1.0, u)
    return u


@dataclass
class IntegrationResult:
    u: np.ndarray
    steps: int
    h: float
    step_times: np.ndarray
    trajectory: Optional[list] = None

    @property
    def loop_seconds(self) -> float:
        return float(np.sum(self.step_times))


def step_count(T: float, h: float, allow_partial: bool = False) -> int:
    if not h > 0:
        raise InvalidArgument(f"step size must be positive, got {h}")
    n = T / h
    if n > MAX_STEPS:
        raise ResourceError(f"{n:.3g} steps requested, guard is {MAX_STEPS:.0e}")
    k = round(n)
    if abs(n - k) <= 4 * np.finfo(float).eps * max(n, 1.0) and k > 0:
        return k
    if allow_partial:
        return math.ceil(n)
    raise InvalidArgument(f"T/h = {n!r} is not an integer; pass allow_partial=True for a short final step")


def integrate(
    scheme: SplittingScheme,
    problem: EvolutionProblem,
    backend: ExpActionBackend,
    h: float,
    t_end: Optional[float] = None,
    allow_partial: bool = False,
    keep_trajectory: bool = False,
    c_mode: str = "auto",
) -> IntegrationResult:
    """Compose steps of size h from 0 to t_end (default: the problem horizon)."""
    T = problem.T if t_end is None else float(t_end)
    if T == 0:
        return IntegrationResult(problem.u0.copy(), 0, h, np.zeros(0), [problem.u0.copy()] if keep_trajectory else None)
    n = step_count(T, h, allow_partial)
    u = problem.u0
    times = np.empty(n)
    traj = [u.copy()] if keep_trajectory else None
    clock = time.perf_counter
    for k in range(n):
        t_n = k * h
        hk = min(h, T - t_n) if allow_partial else h
        t0 = clock()
        u = step(scheme, problem, backend, t_n, hk, u, c_mode)
        times[k] = clock() - t0
        if keep_trajectory:
            traj.append(u.copy())
    return IntegrationResult(u, n, h, times, traj)
