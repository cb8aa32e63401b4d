import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aadeim.errors import SingularMatrixError
from aadeim.models import BurgersModel, NewtonConfig, solve_full_model
from aadeim.rom import (ReducedBasis, StepCounters, deim_project, deim_residual, pod_basis, qdeim_points,
                        solve_reduced_step)


def random_orthonormal(N, n, seed):
    return np.linalg.qr(np.random.default_rng(seed).standard_normal((N, n)))[0]


def test_pod_of_rank_one_snapshots():
    v = np.arange(1.0, 6.0)
    Q = np.outer(v, [1.0, 2.0, -1.0])
    b = pod_basis(Q, 1)
    assert abs(abs(b.U[:, 0] @ v) / np.linalg.norm(v) - 1) < 1e-12


def test_pod_flags_rank_deficiency(caplog):
    Q = np.outer(np.ones(6), np.ones(4))
    b = pod_basis(Q, 3)
    assert b.rank_deficient
    assert "numerical rank" in caplog.text


def test_pod_rejects_large_n():
    with pytest.raises(ValueError):
        pod_basis(np.ones((5, 3)), 4)


def test_pod_is_optimal_projection():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((30, 12))
    b = pod_basis(Q, 4)
    s = np.linalg.svd(Q, compute_uv=False)
    err = np.linalg.norm(Q - b.U @ (b.U.T @ Q)) ** 2
    assert err == pytest.approx(np.sum(s[4:] ** 2))


def test_qdeim_on_canonical_basis():
    U = np.eye(6)[:, [4, 1]]
    assert sorted(qdeim_points(U)) == [1, 4]


def test_qdeim_singular_basis():
    U = np.zeros((5, 2))
    U[0, :] = 1.0
    with pytest.raises(SingularMatrixError):
        qdeim_points(U)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 60), st.integers(1, 8), st.integers(0, 2**31))
def test_deim_interpolates_and_reproduces_span(N, n, seed):
    n = min(n, N)
    basis = ReducedBasis(random_orthonormal(N, n, seed)).with_points()
    rng = np.random.default_rng(seed + 1)
    y = rng.standard_normal(N)
    assert np.abs(deim_project(basis, y)[basis.points] - y[basis.points]).max() <= 1e-12 * max(1, np.abs(y).max())
    z = basis.U @ rng.standard_normal(n)
    assert np.linalg.norm(deim_project(basis, z) - z) <= 1e-10 * np.linalg.norm(z)


def test_deim_residual_zero_on_span():
    basis = ReducedBasis(random_orthonormal(20, 3, 1)).with_points()
    F = basis.U @ np.random.default_rng(2).standard_normal((3, 5))
    C, R = deim_residual(basis, F)
    assert np.abs(R).max() < 1e-12


def test_basis_validate():
    basis = ReducedBasis(random_orthonormal(10, 2, 0)).with_points()
    assert basis.validate() is basis
    bad = ReducedBasis(basis.U, np.array([3, 3]))
    with pytest.raises(ValueError):
        bad.validate()


def test_reduced_step_with_identity_basis_matches_full():
    m = BurgersModel(N=32, dt=1e-3, mu=3e-2)
    q0 = m.initial_condition()
    basis = ReducedBasis(np.eye(32)).with_points()
    counters = StepCounters()
    x = solve_reduced_step(m, basis, q0, m.dt, NewtonConfig(), counters=counters)
    full = solve_full_model(m, q0, 1).states[:, 0]
    assert np.allclose(x, full, atol=1e-12)
    assert counters.max_solve_dim == 32
    assert counters.f_restricted_calls == 15


def test_reduced_step_in_invariant_subspace():
    # the zero state of Burgers stays zero: any basis reproduces it
    m = BurgersModel(N=32)
    basis = ReducedBasis(random_orthonormal(32, 3, 0)).with_points()
    x = solve_reduced_step(m, basis, np.zeros(3), 0.1, NewtonConfig())
    assert np.abs(x).max() < 1e-14
