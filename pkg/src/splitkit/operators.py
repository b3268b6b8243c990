"""Operators A, B(t), their commutators and the problem container.

Everything here is finite dimensional: A is the semi-discretization of the
(possibly unbounded) constant generator, B(t) a bounded time-dependent
perturbation.  Diagonal operators keep only their diagonal in memory; the
full matrix is materialized on request.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InvalidArgument

__all__ = [
    "DenseOperator",
    "TimeDependentOperator",
    "EvolutionProblem",
    "commutator",
    "b_derivative",
    "effective_C",
    "default_fd_step",
]

STRUCTURES = ("general", "diagonal", "banded")


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """A square matrix with a structure tag.

    ``entries`` may be a 1-D array when ``structure == "diagonal"``; it is then
    read as the diagonal.  A 2-D diagonal-tagged matrix must have exactly
    zero off-diagonal entries.  The ``banded`` tag is a hint only.
    """

    entries: np.ndarray
    structure: str = "general"
    bandwidth: Optional[int] = None

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise InvalidArgument(f"unknown structure tag {self.structure!r}")
        e = np.asarray(self.entries)
        if self.structure == "diagonal":
            if e.ndim == 2:
                if e.shape[0] != e.shape[1]:
                    raise InvalidArgument(f"operator must be square, got {e.shape}")
                d = np.diag(e)
                if np.any(e - np.diag(d)):
                    raise InvalidArgument("diagonal tag on a matrix with nonzero off-diagonal entries")
                e = d.copy()
            elif e.ndim != 1:
                raise InvalidArgument("diagonal operator needs a vector or a square matrix")
        else:
            if e.ndim != 2 or e.shape[0] != e.shape[1]:
                raise InvalidArgument(f"operator must be square, got shape {e.shape}")
        if e.size == 0:
            raise InvalidArgument("operator dimension must be positive")
        e = e.view()  # freeze our view, not the caller's array
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def diagonal(cls, d) -> "DenseOperator":
        return cls(np.asarray(d), "diagonal")

    @classmethod
    def zeros(cls, dim: int, dtype=float) -> "DenseOperator":
        return cls(np.zeros(dim, dtype=dtype), "diagonal")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.structure == "diagonal"

    @property
    def dtype(self):
        return self.entries.dtype

    @property
    def diag(self) -> np.ndarray:
        return self.entries if self.is_diagonal else np.diag(self.entries)

    def to_array(self) -> np.ndarray:
        """The full dim x dim matrix."""
        if self.is_diagonal:
            return np.diag(self.entries)
        return self.entries

    def norm1(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(self.entries)))
        return float(np.max(np.sum(np.abs(self.entries), axis=0)))

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.is_diagonal:
            return self.entries * v
        return self.entries @ v

    def scaled(self, c) -> "DenseOperator":
        return DenseOperator(c * self.entries, self.structure, self.bandwidth)

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        _check_dims(self, other)
        if self.is_diagonal and other.is_diagonal:
            return DenseOperator(self.entries + other.entries, "diagonal")
        if self.is_diagonal:
            out = other.entries.astype(np.result_type(self.dtype, other.dtype), copy=True)
            out[np.diag_indices(self.dim)] += self.entries
            return DenseOperator(out, other.structure, other.bandwidth)
        if other.is_diagonal:
            return other + self
        structure, bw = _merge_band(self, other)
        return DenseOperator(self.entries + other.entries, structure, bw)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        return self + other.scaled(-1)

    def __neg__(self) -> "DenseOperator":
        return self.scaled(-1)

    def __matmul__(self, other):
        if not isinstance(other, DenseOperator):
            return self.apply(np.asarray(other))
        _check_dims(self, other)
        if self.is_diagonal and other.is_diagonal:
            return DenseOperator(self.entries * other.entries, "diagonal")
        if self.is_diagonal:
            return DenseOperator(self.entries[:, None] * other.entries, other.structure, other.bandwidth)
        if other.is_diagonal:
            return DenseOperator(self.entries * other.entries[None, :], self.structure, self.bandwidth)
        if self.structure == "banded" and other.structure == "banded":
            return DenseOperator(self.entries @ other.entries, "banded", self.bandwidth + other.bandwidth)
        return DenseOperator(self.entries @ other.entries)

    def __repr__(self) -> str:
        return f"DenseOperator(dim={self.dim}, structure={self.structure!r}, dtype={self.dtype})"


def _check_dims(X: DenseOperator, Y: DenseOperator) -> None:
    if X.dim != Y.dim:
        raise InvalidArgument(f"dimension mismatch: {X.dim} vs {Y.dim}")


def _merge_band(X: DenseOperator, Y: DenseOperator):
    if X.structure == "banded" and Y.structure == "banded":
        return "banded", max(X.bandwidth, Y.bandwidth)
    return "general", None


def commutator(X: DenseOperator, Y: DenseOperator) -> DenseOperator:
    """[X, Y] = XY - YX."""
    _check_dims(X, Y)
    if X.is_diagonal and Y.is_diagonal:
        return DenseOperator.zeros(X.dim, np.result_type(X.dtype, Y.dtype))
    if X.is_diagonal:
        # diag(x) Y - Y diag(x) = (x_i - x_j) Y_ij
        out = (X.entries[:, None] - X.entries[None, :]) * Y.entries
        return DenseOperator(out, Y.structure, Y.bandwidth)
    if Y.is_diagonal:
        return commutator(Y, X).scaled(-1)
    XY = X.entries @ Y.entries
    YX = Y.entries @ X.entries
    structure, bw = "general", None
    if X.structure == "banded" and Y.structure == "banded":
        structure, bw = "banded", X.bandwidth + Y.bandwidth
    return DenseOperator(XY - YX, structure, bw)


def default_fd_step(h: Optional[float] = None) -> float:
    if h is None:
        return 1e-5
    return max(1e-5, h * 1e-3)


@dataclass(frozen=True)
class TimeDependentOperator:
    """B(t) with either analytic or finite-difference time derivatives.

    With ``d1``/``d2`` given the operator is in analytic mode; otherwise
    derivatives are centered differences with step ``fd_step`` (or the
    h-dependent default when ``fd_step`` is None).  ``batch`` optionally maps
    an array of times to the stacked (M, dim, dim) matrices.
    """

    eval: Callable[[float], DenseOperator]
    d1: Optional[Callable[[float], DenseOperator]] = None
    d2: Optional[Callable[[float], DenseOperator]] = None
    fd_step: Optional[float] = None
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, t: float) -> DenseOperator:
        return self.eval(t)

    def stack(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.batch is not None:
            return self.batch(ts)
        return np.stack([self.eval(float(t)).to_array() for t in ts])

    @property
    def analytic(self) -> bool:
        return self.d1 is not None

    @classmethod
    def constant(cls, op: DenseOperator) -> "TimeDependentOperator":
        zero = DenseOperator(np.zeros_like(op.entries), op.structure, op.bandwidth)
        return cls(lambda t: op, lambda t: zero, lambda t: zero)

    @classmethod
    def polynomial(cls, coeffs) -> "TimeDependentOperator":
        """B(t) = sum_k coeffs[k] t^k with exact derivatives."""
        ops = [c if isinstance(c, DenseOperator) else DenseOperator(np.asarray(c)) for c in coeffs]
        if not ops:
            raise InvalidArgument("need at least one coefficient")
        diag = all(op.is_diagonal for op in ops)
        structure = "diagonal" if diag else "general"
        data = np.stack([op.entries if diag else op.to_array() for op in ops])
        shape = data.shape[1:]
        flat = data.reshape(len(ops), -1)
        mats = np.stack([op.to_array() for op in ops])
        ks = np.arange(len(ops))

        def combo(weights):
            return DenseOperator((weights @ flat).reshape(shape), structure)

        def ev(t):
            return combo(float(t) ** ks)

        def d1(t):
            return combo(np.where(ks > 0, ks * float(t) ** np.maximum(ks - 1, 0), 0.0))

        def d2(t):
            return combo(np.where(ks > 1, ks * (ks - 1) * float(t) ** np.maximum(ks - 2, 0), 0.0))

        def batch(ts):
            powers = ts[:, None] ** ks[None, :]
            return np.einsum("mk,kij->mij", powers, mats)

        return cls(ev, d1, d2, batch=batch)


def b_derivative(B: TimeDependentOperator, t: float, order: int, h: Optional[float] = None) -> DenseOperator:
    """First or second time derivative of B at t."""
    if order not in (1, 2):
        raise InvalidArgument(f"derivative order must be 1 or 2, got {order}")
    if B.analytic:
        fn = B.d1 if order == 1 else B.d2
        if fn is None:
            raise ConfigurationError("analytic mode without a second-derivative closure")
        return fn(t)
    delta = B.fd_step if B.fd_step is not None else default_fd_step(h)
    if delta <= 0:
        raise InvalidArgument("finite-difference step must be positive")
    plus, minus = B(t + delta), B(t - delta)
    if order == 1:
        return (plus - minus).scaled(1.0 / (2 * delta))
    mid = B(t)
    return (plus - mid.scaled(2.0) + minus).scaled(1.0 / delta**2)


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """u'(t) = [A + B(t)] u(t), u(0) = u0 on [0, T].

    ``C_override`` is an optional closure t -> C(t) used when the continuous
    commutator [B(t), A] + B'(t) is known in closed form.
    """

    A: DenseOperator
    B: TimeDependentOperator
    u0: np.ndarray
    T: float
    weights: Optional[np.ndarray] = None
    C_override: Optional[Callable[[float], DenseOperator]] = None
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        u0 = np.asarray(self.u0)
        if u0.ndim != 1 or u0.shape[0] != self.A.dim:
            raise InvalidArgument(f"u0 has shape {u0.shape}, expected ({self.A.dim},)")
        if not self.T > 0:
            raise InvalidArgument("time horizon T must be positive")
        if self.B(0.0).dim != self.A.dim:
            raise InvalidArgument("B(t) and A dimensions disagree")
        if self.weights is not None:
            w = np.broadcast_to(np.asarray(self.weights, dtype=float), u0.shape)
            if np.any(w <= 0):
                raise InvalidArgument("norm weights must be strictly positive")
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "u0", u0)

    @property
    def dim(self) -> int:
        return self.A.dim

    def norm(self, v: np.ndarray) -> float:
        """Discrete (weighted) L2 norm."""
        if self.weights is None:
            return float(np.linalg.norm(v))
        return float(np.sqrt(np.sum(self.weights * np.abs(v) ** 2)))


def effective_C(
    B: TimeDependentOperator,
    A: DenseOperator,
    t: float,
    mode: str = "discrete",
    override: Optional[Callable[[float], DenseOperator]] = None,
    h: Optional[float] = None,
) -> DenseOperator:
    """C(t) = [B(t), A] + B'(t), either assembled or taken from ``override``."""
    if mode == "analytic-override":
        if override is None:
            raise ConfigurationError("analytic-override requested but no C closure is registered")
        return override(t)
    if mode != "discrete":
        raise InvalidArgument(f"unknown mode {mode!r}")
    return commutator(B(t), A) + b_derivative(B, t, 1, h=h)
