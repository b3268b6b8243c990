import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.polynomial import Polynomial

from splitkit.expaction import ExpActionBackend
from splitkit.operators import DenseOperator, commutator
from splitkit.quadrature import family_rules, kernel_integral, kernel_prediction, quadrature_error_oracle
from splitkit.splittings import build_D, build_F
from splitkit.models import random_matrix_problem

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**32 - 1)


def _complex_matrix(seed, n, scale=1.0):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * M / np.linalg.norm(M, 2), rng


@given(n=st.integers(1, 6), data=st.data())
def test_commutator_antisymmetric(n, data):
    X = data.draw(arrays(float, (n, n), elements=finite))
    Y = data.draw(arrays(float, (n, n), elements=finite))
    a = commutator(DenseOperator(X), DenseOperator(Y)).to_array()
    b = commutator(DenseOperator(Y), DenseOperator(X)).to_array()
    assert np.array_equal(a, -b)


@given(d=arrays(float, 5, elements=finite), data=st.data())
def test_commutator_diagonal_left_antisymmetric(d, data):
    Y = data.draw(arrays(float, (5, 5), elements=finite))
    a = commutator(DenseOperator.diagonal(d), DenseOperator(Y)).to_array()
    b = commutator(DenseOperator(Y), DenseOperator.diagonal(d)).to_array()
    assert np.allclose(a, -b, rtol=0, atol=1e-12 * (1 + np.abs(a).max()))


@given(seed=seeds, c1=st.floats(-1, 1), c2=st.floats(-1, 1))
def test_semigroup(seed, c1, c2):
    H, rng = _complex_matrix(seed, 16)
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    be = ExpActionBackend("dense")
    H = DenseOperator(H)
    lhs = be.exp_action(H, c1, be.exp_action(H, c2, v))
    rhs = be.exp_action(H, c1 + c2, v)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(v)


@given(seed=seeds, c=st.floats(-50, 50), variant=st.sampled_from(["dense", "krylov"]))
def test_norm_preserved_skew(seed, c, variant):
    M, rng = _complex_matrix(seed, 24)
    S = DenseOperator(0.5 * (M - M.conj().T))
    v = rng.standard_normal(24) + 1j * rng.standard_normal(24)
    tol = 1e-11 if variant == "dense" else 1e-9
    be = ExpActionBackend(variant, m=24, tol=1e-12)
    w = be.exp_action(S, c, v)
    assert abs(np.linalg.norm(w) - np.linalg.norm(v)) <= tol * np.linalg.norm(v)


@given(tau=st.floats(0, 0.5), k=st.integers(0, 6))
def test_peano_identity_F(tau, k):
    q1, _ = family_rules("F", tau)
    f = Polynomial([0] * k + [1])
    assert abs(quadrature_error_oracle(q1, f) - kernel_prediction("F", tau, f)) < 1e-13


@given(tau=st.floats(0, 1), k=st.integers(0, 6))
def test_peano_identity_D(tau, k):
    q1, _ = family_rules("D", tau)
    f = Polynomial([0] * k + [1])
    assert abs(quadrature_error_oracle(q1, f) - kernel_prediction("D", tau, f)) < 1e-13


@given(tau=st.floats(0, 1))
def test_D_kernel_positive(tau):
    assert kernel_integral("D", tau) >= kernel_integral("D", 0.5) > 0


@given(tau=st.floats(0, 0.5))
def test_F_consistency_sums(tau):
    s = build_F(tau)
    assert sum(x.coeff for x in s.stages if x.kind == "ExpA") == 1
    assert sum(x.coeff for x in s.stages if x.kind != "ExpA") == 1
    assert s.n_stages in (3, 5)


@given(tau=st.floats(0, 1))
def test_D_consistency_sums(tau):
    s = build_D(tau)
    assert sum(x.coeff for x in s.stages if x.kind == "ExpA") == 1
    assert sum(x.coeff for x in s.stages if x.kind != "ExpA") == 1
    assert s.n_stages in (2, 3)


@given(seed=st.integers(0, 10_000), tau=st.floats(0, 0.5), h=st.floats(0.01, 0.2))
def test_F_unitary_on_skew_data(seed, tau, h):
    from splitkit.splittings import step

    p = random_matrix_problem(6, seed=seed, skew=True)
    u = step(build_F(tau), p, ExpActionBackend("dense"), 0.0, h, p.u0)
    assert abs(np.linalg.norm(u) - 1.0) < 1e-12
