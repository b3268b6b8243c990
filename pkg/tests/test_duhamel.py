import numpy as np
import pytest

from splitkit.duhamel import NeumannConfig, neumann_iterate, reference_solution
from splitkit.errors import AccuracyError, InvalidArgument, ResourceError
from splitkit.expaction import ExpActionBackend
from splitkit.harness import estimate_order
from splitkit.models import random_matrix_problem
from splitkit.operators import DenseOperator, EvolutionProblem, TimeDependentOperator
from splitkit.splittings import build_F, step

from conftest import random_complex


def _commuting(rng, n=4):
    Q, _ = np.linalg.qr(random_complex(rng, n))
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    A = Q @ np.diag(a) @ Q.conj().T
    B = Q @ np.diag(b) @ Q.conj().T
    u0 = rng.standard_normal(n) + 0j
    E = Q @ np.diag(np.exp(a + b)) @ Q.conj().T
    return A, B, u0, E


def test_config_guards():
    with pytest.raises(ResourceError):
        NeumannConfig(depth=5)
    with pytest.raises(InvalidArgument):
        NeumannConfig(panels=2)


def test_depth_zero_is_free_flow():
    p = random_matrix_problem(6, seed=2)
    be = ExpActionBackend("dense")
    np.testing.assert_allclose(
        neumann_iterate(p, be, 0.3, NeumannConfig(depth=0)), be.exp_action(p.A, 0.3, p.u0), atol=1e-14
    )


def test_B_zero_any_depth(rng):
    A = DenseOperator(random_complex(rng, 5))
    p = EvolutionProblem(A, TimeDependentOperator.constant(DenseOperator(np.zeros((5, 5)))), rng.standard_normal(5) + 0j, 1.0)
    ref = ExpActionBackend("dense").exp_action(A, 0.5, p.u0)
    for d in range(4):
        np.testing.assert_allclose(neumann_iterate(p, None, 0.5, NeumannConfig(depth=d)), ref, atol=1e-13)


def test_commuting_constant_depth3(rng):
    A, B, u0, _ = _commuting(rng)
    B = 0.5 * B / np.linalg.norm(B, 2)
    h = 0.1
    p = EvolutionProblem(DenseOperator(A), TimeDependentOperator.constant(DenseOperator(B)), u0, 1.0)
    w, W = np.linalg.eigh(A + B)
    exact = W @ (np.exp(h * w) * (W.conj().T @ u0))
    # the first omitted term is (hB)^4/4! e^{hA} u0
    bound = (0.5 * h) ** 4 / 24 * np.exp(h * np.linalg.norm(A + B, 2)) * np.linalg.norm(u0)
    err = np.linalg.norm(neumann_iterate(p, None, h, NeumannConfig(depth=3)) - exact)
    assert err < 1e-6 and err < 1.1 * bound


def test_guards():
    p = random_matrix_problem(40, seed=0)
    with pytest.raises(ResourceError):
        neumann_iterate(p, None, 0.1)
    q = random_matrix_problem(4, seed=0)
    with pytest.raises(ResourceError):
        neumann_iterate(q, None, 1.5)


def test_real_data_gives_real_result(rng):
    A = DenseOperator(rng.standard_normal((4, 4)))
    B = TimeDependentOperator.polynomial([rng.standard_normal((4, 4)), rng.standard_normal((4, 4))])
    p = EvolutionProblem(A, B, rng.standard_normal(4), 1.0)
    assert np.isrealobj(neumann_iterate(p, None, 0.2, NeumannConfig(depth=2)))


def test_quadrature_resolution_converged():
    p = random_matrix_problem(8, seed=5)
    for h in (0.5, 0.125):
        a = neumann_iterate(p, None, h, NeumannConfig(depth=3, panels=4))
        b = neumann_iterate(p, None, h, NeumannConfig(depth=3, panels=8))
        assert np.linalg.norm(a - b) < h**5 * 1e-3


@pytest.mark.parametrize("n,slope_min", [(1, 1.9), (2, 2.9)])
def test_remainder_order(n, slope_min):
    p = random_matrix_problem(8, seed=7)
    hs = 2.0 ** -np.arange(3, 9)
    errs = [
        np.linalg.norm(neumann_iterate(p, None, h, NeumannConfig(depth=4)) - neumann_iterate(p, None, h, NeumannConfig(depth=n)))
        for h in hs
    ]
    assert estimate_order(hs, errs) >= slope_min


def test_F_matches_two_term_expansion():
    p = random_matrix_problem(8, seed=9)
    be = ExpActionBackend("dense")
    hs = 2.0 ** -np.arange(3, 8)
    errs = [np.linalg.norm(step(build_F(0.3), p, be, 0.0, h, p.u0) - neumann_iterate(p, None, h, NeumannConfig(depth=2))) for h in hs]
    assert estimate_order(hs, errs) >= 2.9


def test_reference_t_zero():
    p = random_matrix_problem(4, seed=1)
    np.testing.assert_array_equal(reference_solution(p, ExpActionBackend(), 0.0, 10_000), p.u0)


def test_reference_commuting(rng):
    A, B, u0, E = _commuting(rng)
    p = EvolutionProblem(DenseOperator(A), TimeDependentOperator.constant(DenseOperator(B)), u0, 1.0)
    u = reference_solution(p, ExpActionBackend("dense"), 0.5, 10_000)
    w, W = np.linalg.eigh(A + B)
    np.testing.assert_allclose(u, W @ (np.exp(0.5 * w) * (W.conj().T @ u0)), atol=1e-10)


def test_reference_needs_refinement():
    p = random_matrix_problem(4, seed=1)
    with pytest.raises(InvalidArgument):
        reference_solution(p, ExpActionBackend(), 1.0, 100)


def test_reference_richardson_failure_carries_candidates():
    p = random_matrix_problem(4, seed=1, scale=3.0)
    with pytest.raises(AccuracyError) as info:
        reference_solution(p, ExpActionBackend("dense"), 1.0, 10_000, rtol=1e-14)
    assert len(info.value.candidates) == 2


def test_reference_full_result():
    p = random_matrix_problem(4, seed=1)
    res = reference_solution(p, ExpActionBackend("dense"), 1.0, 10_000, rtol=1e-6, full=True)
    assert res.steps == 20_000 and res.difference >= 0
