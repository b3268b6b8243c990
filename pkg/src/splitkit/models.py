"""Semi-discretized model problems.

* Schrodinger:  i u_t = -1/2 u_xx + V(x, t) u on [-3, 3], u(+-3) = 0,
  V = -2 cos(10 t) x^2 + x^4.
* Transport:    u_t = -u_x + f(x, t) u on [-3, 4] (truncated line),
  f = -exp(-(2x - t)^2), g = exp(-2 x^2).
* Random dense matrix problems with polynomial-in-t B(t).

Both PDEs use fourth-order centered finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AccuracyError, InvalidArgument
from .operators import DenseOperator, EvolutionProblem, TimeDependentOperator

__all__ = [
    "Grid1D",
    "ModelSpec",
    "first_derivative_matrix",
    "second_derivative_matrix",
    "schrodinger_potential",
    "schrodinger_initial",
    "schrodinger_problem",
    "transport_f",
    "transport_g",
    "transport_problem",
    "transport_exact",
    "transport_exact_grid",
    "random_matrix_problem",
]

_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# one-sided fourth-order first-derivative stencils for rows 0 and 1
_C1_ROW0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_C1_ROW1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


@dataclass(frozen=True)
class Grid1D:
    points: np.ndarray
    spacing: float
    boundary: str = "dirichlet-zero"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 16:
            raise InvalidArgument("grid needs at least 16 points")
        d = np.diff(pts)
        if np.any(d <= 0):
            raise InvalidArgument("grid points must be strictly increasing")
        if np.max(np.abs(d - self.spacing)) > 64 * np.finfo(float).eps * max(1.0, np.max(np.abs(pts))):
            raise InvalidArgument("grid spacing is not uniform")
        if self.boundary not in ("dirichlet-zero", "outflow-truncation"):
            raise InvalidArgument(f"unknown boundary treatment {self.boundary!r}")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.size

    @classmethod
    def interior(cls, a: float, b: float, n: int) -> "Grid1D":
        """n interior nodes of a uniform partition of [a, b] (endpoints excluded)."""
        dx = (b - a) / (n + 1)
        return cls(a + dx * np.arange(1, n + 1), dx, "dirichlet-zero")

    @classmethod
    def closed(cls, a: float, b: float, dx: float) -> "Grid1D":
        m = int(round((b - a) / dx))
        return cls(a + dx * np.arange(m + 1), (b - a) / m, "outflow-truncation")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    grid: Optional[Grid1D]
    params: dict = field(default_factory=dict)


def first_derivative_matrix(n: int, dx: float, closure: str = "one-sided") -> np.ndarray:
    """Fourth-order d/dx on n equispaced nodes.

    closure="one-sided": skewed fourth-order stencils in the two rows at each end.
    closure="zero": centered stencil everywhere with zero values outside
    (skew-symmetric).
    """
    D = np.zeros((n, n))
    for j in range(n):
        for k, c in zip(range(-2, 3), _C1):
            if 0 <= j + k < n:
                D[j, j + k] = c
    if closure == "one-sided":
        D[0, :] = 0.0
        D[1, :] = 0.0
        D[-1, :] = 0.0
        D[-2, :] = 0.0
        D[0, 0:5] = _C1_ROW0
        D[1, 0:5] = _C1_ROW1
        D[-1, -5:] = -_C1_ROW0[::-1]
        D[-2, -5:] = -_C1_ROW1[::-1]
    elif closure != "zero":
        raise InvalidArgument(f"unknown closure {closure!r}")
    return D / dx


def second_derivative_matrix(n: int, dx: float) -> np.ndarray:
    """Fourth-order d^2/dx^2 on the n interior nodes of a homogeneous Dirichlet
    problem.

    The boundary value is zero and the ghost value beyond it is the odd
    reflection u(-dx) = -u(dx), which keeps the matrix symmetric.
    """
    D = np.zeros((n, n))
    for j in range(n):
        for k, c in zip(range(-2, 3), _C2):
            if 0 <= j + k < n:
                D[j, j + k] += c
    # ghost u_{-1} = -u_1 enters row 0 with coefficient -1/12
    D[0, 0] -= _C2[0]
    D[-1, -1] -= _C2[4]
    return D / dx**2


# --- Schrodinger ---------------------------------------------------------

def schrodinger_potential(x, t):
    return -2.0 * np.cos(10.0 * t) * x**2 + x**4


def schrodinger_potential_dt(x, t):
    return 20.0 * np.sin(10.0 * t) * x**2


def schrodinger_potential_dtt(x, t):
    return 200.0 * np.cos(10.0 * t) * x**2


def schrodinger_initial(x):
    return (x**2 - 9.0) * np.exp(-20.0 * (x + 0.5) ** 2)


def schrodinger_problem(N: int = 128, T: float = 1.0) -> EvolutionProblem:
    """i u_t = -1/2 u_xx + V u on N interior nodes of [-3, 3].

    A = (i/2) D2 and B(t) = -i diag(V(x, t)), both skew-Hermitian.
    """
    if N < 32:
        raise InvalidArgument(f"Schrodinger grid needs N >= 32, got {N}")
    grid = Grid1D.interior(-3.0, 3.0, N)
    x = grid.points
    D2 = second_derivative_matrix(N, grid.spacing)
    A = DenseOperator(0.5j * D2, "banded", 2)
    x2 = x**2
    x4 = x**4

    def ev(t):
        return DenseOperator(-1j * (-2.0 * math.cos(10.0 * t) * x2 + x4), "diagonal")

    def d1(t):
        return DenseOperator(-1j * (20.0 * math.sin(10.0 * t) * x2), "diagonal")

    def d2(t):
        return DenseOperator(-1j * (200.0 * math.cos(10.0 * t) * x2), "diagonal")

    def batch(ts):
        diag = -1j * schrodinger_potential(x[None, :], ts[:, None])
        out = np.zeros((ts.size, N, N), dtype=complex)
        out[:, np.arange(N), np.arange(N)] = diag
        return out

    B = TimeDependentOperator(ev, d1, d2, batch=batch)
    u0 = schrodinger_initial(x).astype(complex)
    spec = ModelSpec("schrodinger", grid, {"N": N})
    return EvolutionProblem(A, B, u0, T, weights=np.full(N, grid.spacing), name="schrodinger", meta={"spec": spec})


# --- transport -----------------------------------------------------------

def transport_f(x, t):
    return -np.exp(-((2.0 * x - t) ** 2))


def transport_f_t(x, t):
    w = 2.0 * x - t
    return -2.0 * w * np.exp(-(w**2))


def transport_f_tt(x, t):
    w = 2.0 * x - t
    return (2.0 - 4.0 * w**2) * np.exp(-(w**2))


def transport_f_x(x, t):
    w = 2.0 * x - t
    return 4.0 * w * np.exp(-(w**2))


def transport_g(x):
    return np.exp(-2.0 * x**2)


def transport_problem(dx: float = 0.004, T: float = 1.0, closure: str = "zero") -> EvolutionProblem:
    """u_t = -u_x + f u on [-3, 4] with A = -D1 and B(t) = diag(f(x, t)).

    The commutator [f, -d/dx] is the multiplication by f_x, so
    C(t) = diag(f_x + f_t) is registered as the analytic override.
    """
    if not 0 < dx <= 0.02:
        raise InvalidArgument(f"transport grid spacing must be in (0, 0.02], got {dx}")
    grid = Grid1D.closed(-3.0, 4.0, dx)
    x = grid.points
    n = grid.n
    A = DenseOperator(-first_derivative_matrix(n, grid.spacing, closure), "banded", 4)

    B = TimeDependentOperator(
        lambda t: DenseOperator(transport_f(x, t), "diagonal"),
        lambda t: DenseOperator(transport_f_t(x, t), "diagonal"),
        lambda t: DenseOperator(transport_f_tt(x, t), "diagonal"),
    )

    def C(t):
        return DenseOperator(transport_f_x(x, t) + transport_f_t(x, t), "diagonal")

    spec = ModelSpec("transport", grid, {"dx": dx, "closure": closure})
    return EvolutionProblem(
        A, B, transport_g(x), T, weights=np.full(n, grid.spacing), C_override=C, name="transport", meta={"spec": spec}
    )


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_GK_X = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_GK_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_IDX = np.array([1, 3, 5, 7, 9, 11, 13])  # positions of the 7 Gauss nodes in _GK_X
_G_W = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(fn, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    vals = fn(mid + half * _GK_X)
    k = half * np.dot(_GK_W, vals)
    g = half * np.dot(_G_W, vals[_G_IDX])
    return k, abs(k - g)


def adaptive_gk(fn, a: float, b: float, tol: float, max_depth: int = 40) -> float:
    """Adaptive Gauss-Kronrod (7, 15) quadrature of a vectorized fn over [a, b]."""
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    total = 0.0
    stack = [(a, b, tol, 0)]
    while stack:
        lo, hi, t, depth = stack.pop()
        val, err = _gk15(fn, lo, hi)
        if err <= max(t, 1e-300) or (hi - lo) < 1e-14 * max(1.0, abs(lo)):
            total += val
            continue
        if depth >= max_depth:
            raise AccuracyError(f"adaptive quadrature exceeded depth {max_depth} on [{lo}, {hi}]", (val, err))
        m = 0.5 * (lo + hi)
        stack.append((lo, m, 0.5 * t, depth + 1))
        stack.append((m, hi, 0.5 * t, depth + 1))
    return sign * total


def transport_exact(
    x: float,
    t: float,
    tol: float = 1e-12,
    f: Callable = transport_f,
    g: Callable = transport_g,
) -> float:
    """Closed-form transport solution along the characteristic through (x, t):

    u(x, t) = exp( int_1^x f(s, t-x+s) ds - int_1^{x-t} f(s, t-x+s) ds ) g(x - t)
    """
    if tol < 1e-12:
        raise InvalidArgument("transport_exact tolerance must be >= 1e-12")
    x, t = float(x), float(t)

    def along(s):
        return f(s, t - x + s)

    i1 = adaptive_gk(along, 1.0, x, tol)
    i2 = adaptive_gk(along, 1.0, x - t, tol)
    return float(np.exp(i1 - i2) * g(x - t))


def transport_exact_grid(points, t: float, tol: float = 1e-12, **kw) -> np.ndarray:
    return np.array([transport_exact(x, t, tol, **kw) for x in np.asarray(points)])


# --- random matrix problems ----------------------------------------------

def random_matrix_problem(
    dim: int = 8,
    seed: int = 0,
    T: float = 1.0,
    degree: int = 2,
    skew: bool = False,
    scale: float = 1.0,
) -> EvolutionProblem:
    """Dense complex A and B(t) = B0 + t B1 + ... + t^degree B_degree.

    Every matrix is normalized to spectral norm ``scale``; with ``skew`` they
    are made skew-Hermitian so the flow is unitary.
    """
    if dim < 1:
        raise InvalidArgument("dimension must be positive")
    rng = np.random.default_rng(seed)

    def draw():
        M = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        if skew:
            M = 0.5 * (M - M.conj().T)
        return scale * M / np.linalg.norm(M, 2)

    A = DenseOperator(draw())
    coeffs = [draw() for _ in range(degree + 1)]
    B = TimeDependentOperator.polynomial(coeffs)
    u0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    u0 /= np.linalg.norm(u0)
    return EvolutionProblem(A, B, u0, T, name="matrix", meta={"seed": seed, "coeffs": coeffs})
