"""Matrix exponential and its action on vectors.

Three routes: elementwise for diagonal operators, a degree-18 Taylor
polynomial for dense ones (scaling-and-squaring when the exponential itself
is cached, substepping when only its action on one vector is needed), and
an Arnoldi projection for large ones.
"""
from __future__ import annotations

import math
import threading
from typing import Optional

import numpy as np

from .errors import ConvergenceError, InvalidArgument, ResourceError
from .operators import DenseOperator

__all__ = ["ExpActionBackend", "exp_action", "expm_dense", "expm_array", "taylor_action", "DENSE_DIM_GUARD"]

DENSE_DIM_GUARD = 2048
TAYLOR_DEGREE = 18
SCALING_THRESHOLD = 0.5

_TAYLOR_COEFFS = [1.0 / math.factorial(k) for k in range(TAYLOR_DEGREE + 1)]


def _taylor_ps(X: np.ndarray) -> np.ndarray:
    """sum_{k<=18} X^k / k!  via Paterson-Stockmeyer with blocks of 4 (7 products)."""
    n = X.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=X.dtype), X.shape)
    X2 = X @ X
    X3 = X2 @ X
    X4 = X2 @ X2
    powers = (eye, X, X2, X3)
    a = _TAYLOR_COEFFS

    def block(j):
        out = a[4 * j] * eye
        for i in range(1, 4):
            k = 4 * j + i
            if k <= TAYLOR_DEGREE:
                out = out + a[k] * powers[i]
        return out

    P = block(4)
    for j in (3, 2, 1, 0):
        P = P @ X4 + block(j)
    return P


def expm_array(M: np.ndarray) -> np.ndarray:
    """exp(M) for a square array, or a stack of them (..., n, n)."""
    M = np.asarray(M)
    if M.dtype.kind not in "fc":
        M = M.astype(float)
    if M.shape[-1] == 0:
        return M.copy()
    norm = float(np.max(np.sum(np.abs(M), axis=-2))) if M.size else 0.0
    s = 0
    if norm > SCALING_THRESHOLD:
        s = max(0, int(math.ceil(math.log2(norm / SCALING_THRESHOLD))))
    X = M / (2.0**s) if s else M
    E = _taylor_ps(X)
    for _ in range(s):
        E = E @ E
    return E


def taylor_action(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """exp(M) v without forming exp(M).

    M is split into s equal parts with ||M/s||_1 <= 1/2 and each part applied
    by its Taylor series, truncated once a term drops below unit roundoff
    relative to the partial sum (the remaining tail is then smaller still,
    since every further term shrinks by at least a factor 1/2).
    """
    norm = float(np.max(np.sum(np.abs(M), axis=0))) if M.size else 0.0
    s = max(1, int(math.ceil(norm / SCALING_THRESHOLD)))
    X = M / s if s > 1 else M
    eps = np.finfo(float).eps
    w = np.asarray(v, dtype=np.result_type(M.dtype, np.asarray(v).dtype))
    for _ in range(s):
        term = w
        for k in range(1, TAYLOR_DEGREE + 1):
            term = (X @ term) / k
            w = w + term
            if np.abs(term).sum() <= eps * np.abs(w).sum():
                break
    return w


def expm_dense(H: DenseOperator, c: complex = 1.0) -> DenseOperator:
    """exp(c H) as a DenseOperator."""
    if H.is_diagonal:
        return DenseOperator.diagonal(np.exp(c * H.entries))
    if H.dim > DENSE_DIM_GUARD:
        raise ResourceError(
            f"dense exponential refused for dim={H.dim} > {DENSE_DIM_GUARD}; use the krylov backend"
        )
    return DenseOperator(expm_array(_scale(H.entries, c)))


def _scale(M: np.ndarray, c) -> np.ndarray:
    # keep real operators real when c is real
    if isinstance(c, complex) and c.imag == 0:
        c = c.real
    return c * M


class ExpActionBackend:
    """Strategy for v -> exp(cH) v.

    variant: "auto", "dense", "krylov" or "diagonal".  Diagonal operators are
    always exponentiated elementwise; "diagonal" additionally refuses any
    other operator.  "auto" picks dense up to ``dense_max_dim`` and Krylov
    above.  Dense exponentials requested with ``cache=True`` are memoized on
    (operator identity, c).
    """

    VARIANTS = ("auto", "dense", "krylov", "diagonal")

    def __init__(self, variant: str = "auto", m: int = 30, tol: float = 1e-10, dense_max_dim: int = DENSE_DIM_GUARD):
        if variant not in self.VARIANTS:
            raise InvalidArgument(f"unknown backend variant {variant!r}")
        if m < 2:
            raise InvalidArgument("krylov subspace dimension must be >= 2")
        if not tol > 0:
            raise InvalidArgument("krylov tolerance must be positive")
        self.variant = variant
        self.m = m
        self.tol = tol
        self.dense_max_dim = dense_max_dim
        self._cache: dict = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"ExpActionBackend({self.variant!r}, m={self.m}, tol={self.tol})"

    def route(self, H: DenseOperator) -> str:
        if H.is_diagonal:
            return "diagonal"
        if self.variant == "diagonal":
            raise InvalidArgument("diagonal backend given a non-diagonal operator")
        if self.variant == "auto":
            return "dense" if H.dim <= self.dense_max_dim else "krylov"
        return self.variant

    def clear_cache(self) -> None:
        with self._lock:
            self._cache.clear()

    def cached_expm(self, H: DenseOperator, c) -> np.ndarray:
        key = (id(H), complex(c))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is H:
            return hit[1]
        E = expm_dense(H, c).entries
        with self._lock:
            # idempotent: a concurrent writer produced the same matrix
            self._cache[key] = (H, E)
        return E

    def exp_action(self, H: DenseOperator, c, v: np.ndarray, cache: bool = False) -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (H.dim,):
            raise InvalidArgument(f"vector of shape {v.shape} for operator of dim {H.dim}")
        if c == 0:
            return v.copy()
        route = self.route(H)
        if route == "diagonal":
            return np.exp(c * H.entries) * v
        if route == "dense":
            if cache:
                return self.cached_expm(H, c) @ v
            return taylor_action(_scale(H.entries, c), v)
        return krylov_expv(H, c, v, self.m, self.tol)


def exp_action(backend: ExpActionBackend, H: DenseOperator, c, v: np.ndarray, cache: bool = False) -> np.ndarray:
    return backend.exp_action(H, c, v, cache=cache)


def krylov_expv(H: DenseOperator, c, v: np.ndarray, m: int, tol: float) -> np.ndarray:
    """Arnoldi approximation of exp(cH) v with Saad's a-posteriori error estimate."""
    n = H.dim
    m = min(m, n)
    beta = float(np.linalg.norm(v))
    if beta == 0.0:
        return np.zeros_like(v)
    dtype = np.result_type(H.dtype, v.dtype, np.asarray(c).dtype)
    V = np.zeros((n, m + 1), dtype=dtype)
    Hm = np.zeros((m + 1, m + 1), dtype=dtype)
    V[:, 0] = v / beta
    scale = max(H.norm1(), 1e-300)
    k = m
    breakdown = False
    for j in range(m):
        w = H.apply(V[:, j]).astype(dtype, copy=False)
        for i in range(j + 1):
            Hm[i, j] = np.vdot(V[:, i], w)
            w = w - Hm[i, j] * V[:, i]
        hn = float(np.linalg.norm(w))
        if hn <= 1e-13 * scale:
            k = j + 1
            breakdown = True
            break
        Hm[j + 1, j] = hn
        V[:, j + 1] = w / hn
    if breakdown:
        # invariant subspace: projection is exact up to rounding
        small = expm_array(c * Hm[:k, :k])
        return beta * (V[:, :k] @ small[:, 0])
    aug = c * Hm  # last column is zero: the extra row carries c h_{m+1,m} e_m^T
    small = expm_array(aug)
    err = beta * abs(small[m, 0])
    if err > tol * beta:
        raise ConvergenceError(
            f"krylov(m={m}) residual estimate {err:.3e} exceeds tolerance {tol * beta:.3e}", residual=err
        )
    return beta * (V[:, :m] @ small[:m, 0])
