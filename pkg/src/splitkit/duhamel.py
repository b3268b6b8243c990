"""Reference solutions: truncated Neumann series of the iterated Duhamel
formula, and fine-step midpoint Strang with a Richardson self-check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AccuracyError, InvalidArgument, ResourceError
from .expaction import ExpActionBackend, expm_array
from .operators import EvolutionProblem
from .quadrature import gauss_legendre_01
from .splittings import build_F, integrate

__all__ = ["NeumannConfig", "neumann_iterate", "reference_solution", "ReferenceResult"]

GL_POINTS = 4
MAX_DIM = 32


@dataclass(frozen=True)
class NeumannConfig:
    depth: int = 2
    panels: int = 4

    def __post_init__(self):
        if not 0 <= self.depth <= 4:
            raise ResourceError(f"Neumann depth {self.depth} outside 0..4")
        if self.panels < 4:
            raise InvalidArgument("need at least 4 panels per nesting level")


def _composite_gl(panels: int):
    x, w = gauss_legendre_01(GL_POINTS)
    edges = np.arange(panels) / panels
    nodes = (edges[:, None] + x[None, :] / panels).ravel()
    weights = np.tile(w / panels, panels)
    return nodes, weights


class _Propagator:
    """exp(t A) applied to batches, via eigendecomposition when well conditioned."""

    def __init__(self, A: np.ndarray):
        self.A = A
        lam, V = np.linalg.eig(A)
        self.ok = np.linalg.cond(V) < 1e6
        if self.ok:
            self.lam, self.V, self.Vinv = lam, V, np.linalg.inv(V)

    def apply(self, t: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Rows of X multiplied by exp(t_k A); t has shape (M,), X (M, n)."""
        if self.ok:
            Y = X @ self.Vinv.T
            Y = Y * np.exp(t[:, None] * self.lam[None, :])
            return Y @ self.V.T
        E = expm_array(t[:, None, None] * self.A[None, :, :])
        return np.einsum("kij,kj->ki", E, X)


def _neumann(problem, prop, u0, t0, ts, depth, nodes, weights):
    """u^[depth](t) for every t in ts (offsets from t0)."""
    free = prop.apply(ts, np.broadcast_to(u0, (ts.size, u0.size)))
    if depth == 0:
        return free
    M, Q = ts.size, nodes.size
    inner_t = (ts[:, None] * nodes[None, :]).ravel()
    inner_u = _neumann(problem, prop, u0, t0, inner_t, depth - 1, nodes, weights)
    Bs = problem.B.stack(t0 + inner_t)
    Bu = np.einsum("kij,kj->ki", Bs, inner_u)
    lag = (ts[:, None] * (1.0 - nodes[None, :])).ravel()
    integrand = prop.apply(lag, Bu).reshape(M, Q, -1)
    integral = np.einsum("q,mqn->mn", weights, integrand) * ts[:, None]
    return free + integral


def neumann_iterate(
    problem: EvolutionProblem,
    backend: Optional[ExpActionBackend],
    h: float,
    cfg: NeumannConfig = NeumannConfig(),
    t0: float = 0.0,
    u0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """sum_{d<=n} K^d[exp(.A) u0](h): the n-fold iterated Duhamel expansion.

    Nested integrals use composite 4-point Gauss-Legendre on each level with
    the inner variable scaled to the outer one (t2 = t1 s2).  The exponentials
    of A are evaluated in closed form from an eigendecomposition, so
    ``backend`` is only consulted for the depth-0 term.
    """
    if problem.dim > MAX_DIM:
        raise ResourceError(f"Neumann oracle limited to dim <= {MAX_DIM}, got {problem.dim}")
    if not 0 < h <= 1:
        raise ResourceError(f"Neumann oracle needs 0 < h <= 1, got {h}")
    u0 = problem.u0 if u0 is None else np.asarray(u0)
    if cfg.depth == 0 and backend is not None:
        return backend.exp_action(problem.A, h, u0)
    A_real = problem.A.to_array()
    A = A_real.astype(complex)
    prop = _Propagator(A)
    nodes, weights = _composite_gl(cfg.panels)
    out = _neumann(problem, prop, u0.astype(complex), t0, np.array([h]), cfg.depth, nodes, weights)[0]
    if np.isrealobj(u0) and np.isrealobj(A_real) and np.isrealobj(problem.B(t0).entries):
        return out.real
    return out


@dataclass
class ReferenceResult:
    u: np.ndarray
    coarse: np.ndarray
    steps: int
    difference: float  # ||u_{h/2} - u_h|| in the problem norm


def reference_solution(
    problem: EvolutionProblem,
    backend: ExpActionBackend,
    t: float,
    refinement: int,
    rtol: Optional[float] = 1e-10,
    full: bool = False,
):
    """Midpoint-Strang solution at time t with ``refinement`` steps, checked by
    halving the step.

    Raises AccuracyError when the halved run differs by more than ``rtol``
    (relative); ``rtol=None`` skips the check.  Returns the finer solution, or
    a ReferenceResult when ``full`` is set.
    """
    if t == 0:
        u = problem.u0.copy()
        return ReferenceResult(u, u, 0, 0.0) if full else u
    if refinement < 1e4:
        raise InvalidArgument(f"reference needs at least 1e4 steps, got {refinement}")
    strang = build_F(0.5)
    h = t / refinement
    coarse = integrate(strang, problem, backend, h, t_end=t).u
    fine = integrate(strang, problem, backend, h / 2, t_end=t).u
    diff = problem.norm(fine - coarse)
    scale = max(problem.norm(fine), np.finfo(float).tiny)
    if rtol is not None and diff > rtol * scale:
        raise AccuracyError(
            f"Richardson check failed: halving the step changed the reference by {diff / scale:.3e} (relative)",
            candidates=(coarse, fine),
        )
    if full:
        return ReferenceResult(fine, coarse, 2 * refinement, diff)
    return fine
