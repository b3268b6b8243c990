"""Quadrature rules behind the two splitting families, their Peano error
kernels, and the kernel-based choice of tau.

All rules live on the normalized interval [0, 1] (weights in units of h)
or on the normalized simplex {0 <= s2 <= s1 <= 1} (weights in units of h^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigurationError, InvalidArgument

__all__ = [
    "QuadratureRule1D",
    "SimplexQuadratureRule",
    "ErrorKernel",
    "f_family_rules",
    "d_family_rules",
    "apply_rule_1d",
    "apply_rule_simplex",
    "error_kernel",
    "kernel_eval",
    "kernel_integral",
    "kernel_integral_exact",
    "kernel_prediction",
    "optimal_tau_F",
    "quadrature_error_oracle",
    "OPTIMAL_TAU_F",
]

OPTIMAL_TAU_F = (3.0 - math.sqrt(3.0)) / 6.0

_NODE_TOL = 1e-14


@dataclass(frozen=True)
class QuadratureRule1D:
    """sum_k w_k f^(d_k)(sigma_k) approximating int_0^1 f."""

    nodes: tuple
    weights: tuple
    orders: tuple

    def __post_init__(self):
        nodes = tuple(float(x) for x in self.nodes)
        weights = tuple(float(w) for w in self.weights)
        orders = tuple(int(d) for d in self.orders)
        if not (len(nodes) == len(weights) == len(orders)):
            raise InvalidArgument("nodes, weights and derivative orders must have equal length")
        if any(not 0.0 <= x <= 1.0 for x in nodes):
            raise InvalidArgument("quadrature nodes must lie in [0, 1]")
        if any(d < 0 for d in orders):
            raise InvalidArgument("derivative orders must be non-negative")
        if abs(sum(w for w, d in zip(weights, orders) if d == 0) - 1.0) > 1e-14:
            raise InvalidArgument("value weights must sum to 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "orders", orders)

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class SimplexQuadratureRule:
    """sum_k w_k f(s1_k, s2_k) approximating int_0^1 int_0^{s1} f ds2 ds1."""

    nodes: tuple
    weights: tuple

    def __post_init__(self):
        nodes = tuple((float(a), float(b)) for a, b in self.nodes)
        weights = tuple(float(w) for w in self.weights)
        if len(nodes) != len(weights):
            raise InvalidArgument("nodes and weights must have equal length")
        for s1, s2 in nodes:
            if not 0.0 <= s2 <= s1 <= 1.0:
                raise InvalidArgument(f"simplex node ({s1}, {s2}) outside 0 <= s2 <= s1 <= 1")
        if abs(sum(weights) - 0.5) > 1e-14:
            raise InvalidArgument("simplex weights must sum to 1/2")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.nodes)


def _merge_1d(nodes, weights, orders):
    out = {}
    for x, w, d in zip(nodes, weights, orders):
        key = next((k for k in out if k[1] == d and abs(k[0] - x) <= _NODE_TOL), (x, d))
        out[key] = out.get(key, 0.0) + w
    return QuadratureRule1D(
        tuple(k[0] for k in out), tuple(out.values()), tuple(k[1] for k in out)
    )


def _merge_simplex(nodes, weights):
    out = {}
    for p, w in zip(nodes, weights):
        key = next((k for k in out if abs(k[0] - p[0]) <= _NODE_TOL and abs(k[1] - p[1]) <= _NODE_TOL), p)
        out[key] = out.get(key, 0.0) + w
    return SimplexQuadratureRule(tuple(out), tuple(out.values()))


def f_family_rules(tau: float):
    """Two-node value rule and three-node simplex rule generating F(h, tau).

    Coincident nodes (tau = 1/2) are merged with summed weights.
    """
    tau = float(tau)
    if not 0.0 <= tau <= 0.5:
        raise InvalidArgument(f"family F needs tau in [0, 1/2], got {tau}")
    q1 = _merge_1d((tau, 1.0 - tau), (0.5, 0.5), (0, 0))
    q2 = _merge_simplex(
        ((1.0 - tau, 1.0 - tau), (1.0 - tau, tau), (tau, tau)),
        (1.0 / 8.0, 1.0 / 4.0, 1.0 / 8.0),
    )
    return q1, q2


def d_family_rules(tau: float):
    """Birkhoff rule f(tau) + (1-2tau)/2 f'(tau) and the one-node simplex rule.

    The derivative entry is kept even when its weight vanishes (tau = 1/2)
    so the rule stays recognizable as a member of family D.
    """
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise InvalidArgument(f"family D needs tau in [0, 1], got {tau}")
    q1 = QuadratureRule1D((tau, tau), (1.0, (1.0 - 2.0 * tau) / 2.0), (0, 1))
    q2 = SimplexQuadratureRule(((tau, tau),), (0.5,))
    return q1, q2


def apply_rule_1d(rule: QuadratureRule1D, f: Callable, df: Optional[Callable] = None, d2f: Optional[Callable] = None):
    """sum_k w_k f^(d_k)(sigma_k).

    ``f`` may also be a numpy Polynomial, in which case derivatives are taken
    exactly.
    """
    derivs = [f, df, d2f]
    if isinstance(f, Polynomial):
        derivs = [f, f.deriv(1), f.deriv(2)]
    total = 0.0
    for x, w, d in zip(rule.nodes, rule.weights, rule.orders):
        if d >= len(derivs) or derivs[d] is None:
            if w == 0.0:
                continue
            raise ConfigurationError(f"rule samples derivative of order {d} but none was supplied")
        total = total + w * derivs[d](x)
    return total


def apply_rule_simplex(rule: SimplexQuadratureRule, f: Callable):
    return sum(w * f(s1, s2) for (s1, s2), w in zip(rule.nodes, rule.weights))


@dataclass(frozen=True)
class ErrorKernel:
    """Piecewise-polynomial Peano kernel on [0, 1], without the 1/2 prefactor.

    The quadrature error of the family's one-dimensional rule is
    (1/2) int_0^1 K(s) f''(s) ds.
    """

    family: str
    tau: float
    pieces: tuple  # ((a, b), Polynomial)

    def __post_init__(self):
        edges = [p[0] for p in self.pieces]
        if abs(edges[0][0]) > 0 or abs(edges[-1][1] - 1.0) > 0:
            raise InvalidArgument("kernel pieces must cover [0, 1]")
        for (a0, b0), (a1, b1) in zip(edges, edges[1:]):
            if b0 != a1:
                raise InvalidArgument("kernel pieces must tile [0, 1] without gaps or overlaps")


_S = Polynomial([0.0, 1.0])


def _piece_coeffs(family: str, t):
    """Kernel pieces as ((a, b), ascending coefficients in s).

    ``t`` may be a float or a Fraction; with a Fraction everything is exact.
    """
    one = 1 if isinstance(t, Fraction) else 1.0
    if family == "F":
        return [((0 * one, t), (0, 0, 1)), ((t, one - t), (t, -1, 1)), ((one - t, one), (1, -2, 1))]
    # Peano kernel of f(tau) + (1/2 - tau) f'(tau): s^2 left of the node
    return [((0 * one, t), (0, 0, 1)), ((t, one), (1, -2, 1))]


def _check_family(family: str, tau: float) -> str:
    family = family.upper()
    if family not in ("F", "D"):
        raise InvalidArgument(f"unknown family {family!r}")
    hi = 0.5 if family == "F" else 1.0
    if not 0.0 <= tau <= hi:
        raise InvalidArgument(f"family {family} needs tau in [0, {hi:g}], got {tau}")
    return family


def error_kernel(family: str, tau: float) -> ErrorKernel:
    tau = float(tau)
    family = _check_family(family, tau)
    pieces = tuple(
        ((a, b), Polynomial([float(c) for c in coeffs]))
        for (a, b), coeffs in _piece_coeffs(family, tau)
        if b > a
    )
    return ErrorKernel(family, tau, pieces)


def kernel_eval(kernel: ErrorKernel, s: float) -> float:
    if not 0.0 <= s <= 1.0:
        raise InvalidArgument(f"kernel argument {s} outside [0, 1]")
    for (a, b), p in kernel.pieces:
        if a <= s <= b:
            return float(p(s))
    raise AssertionError("unreachable: pieces tile [0, 1]")


def _piece_integral(p: Polynomial, a: float, b: float) -> float:
    P = p.integ()
    return float(P(b) - P(a))


def kernel_integral_exact(family: str, tau) -> Fraction:
    """int_0^1 K(s; tau) ds in rational arithmetic (tau taken as its exact binary value)."""
    t = Fraction(tau)
    family = _check_family(family, float(t))
    total = Fraction(0)
    for (a, b), coeffs in _piece_coeffs(family, t):
        total += sum(Fraction(c) * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(coeffs))
    return total


def kernel_integral(family: str, tau: float) -> float:
    """int_0^1 K(s; tau) ds, integrated piece by piece in closed form."""
    return float(kernel_integral_exact(family, tau))


def kernel_prediction(family: str, tau: float, f: Polynomial) -> float:
    """(1/2) int_0^1 K(s; tau) f''(s) ds: the error the kernel predicts."""
    k = error_kernel(family, tau)
    f2 = f.deriv(2)
    return 0.5 * sum(_piece_integral(p * f2, a, b) for (a, b), p in k.pieces)


def optimal_tau_F() -> float:
    """The tau in [0, 1/2] where the F-kernel integrates to zero.

    Bisection over doubles with the sign decided exactly, run until the
    bracket holds two adjacent floats; returns the one nearer the root.
    """
    lo, hi = 0.0, 0.5
    flo = kernel_integral_exact("F", lo)
    if flo * kernel_integral_exact("F", hi) > 0:
        raise AssertionError("kernel integral does not change sign on [0, 1/2]")
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fmid = kernel_integral_exact("F", mid)
        if fmid == 0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return lo if abs(kernel_integral_exact("F", lo)) <= abs(kernel_integral_exact("F", hi)) else hi


def quadrature_error_oracle(rule: QuadratureRule1D, f) -> float:
    """int_0^1 f - rule(f) for a polynomial f (coefficients or Polynomial)."""
    if not isinstance(f, Polynomial):
        f = Polynomial(np.asarray(f, dtype=float))
    if f.degree() > 6:
        raise InvalidArgument("oracle restricted to polynomials of degree <= 6")
    F = f.integ()
    return float(F(1.0) - F(0.0)) - float(apply_rule_1d(rule, f))


def gauss_legendre_01(n: int):
    """n-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def rule_degree(rule: QuadratureRule1D, max_degree: int = 8, tol: float = 1e-13) -> int:
    """Largest d such that the rule integrates every monomial up to s^d exactly."""
    for d in range(max_degree + 1):
        if abs(quadrature_error_oracle(rule, Polynomial([0.0] * d + [1.0]))) > tol:
            return d - 1
    return max_degree


def family_rules(family: str, tau: float):
    family = family.upper()
    if family == "F":
        return f_family_rules(tau)
    if family == "D":
        return d_family_rules(tau)
    raise InvalidArgument(f"unknown family {family!r}")


def tau_range(family: str) -> Sequence[float]:
    return (0.0, 0.5) if family.upper() == "F" else (0.0, 1.0)
