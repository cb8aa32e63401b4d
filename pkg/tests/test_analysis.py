import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aadeim.adeim import adaptive_sampling
from aadeim.analysis import (advection_local_spaces, appendix_a_snapshots, check_adaptation, decay_factor,
                             local_coherence, locality_study, subspace_distance, subspace_distance_trace,
                             verify_lemma_residual_coherence)
from aadeim.models import AdvectionModel, NewtonConfig, solve_full_model
from aadeim.rom import qdeim_points


def orth(N, n, rng):
    return np.linalg.qr(rng.standard_normal((N, n)))[0]


def test_subspace_distance_trivial_cases():
    U = np.eye(6)[:, :2]
    V = np.eye(6)[:, 2:4]
    assert subspace_distance(U, U) == 0.0
    assert subspace_distance(U, V) == pytest.approx(2.0)


def test_subspace_distance_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        subspace_distance(2 * np.eye(4)[:, :2], np.eye(4)[:, :2])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_subspace_distance_properties(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(3, 40))
    n = int(rng.integers(1, min(N, 6) + 1))
    U, V = orth(N, n, rng), orth(N, n, rng)
    d = subspace_distance(U, V)
    assert abs(d - subspace_distance_trace(U, V)) < 1e-9
    assert abs(d - subspace_distance(V, U)) < 1e-9
    O = orth(n, n, rng)
    assert abs(d - subspace_distance(U @ O, V)) < 1e-10
    assert abs(d - subspace_distance(U, V @ orth(n, n, rng))) < 1e-10
    assert subspace_distance(U, U @ O) < 1e-10


def test_decay_factor_trivial():
    rng = np.random.default_rng(0)
    R = rng.standard_normal((8, 3))
    assert decay_factor(R, np.arange(8), 3) == pytest.approx(0.0, abs=1e-20)
    assert decay_factor(np.zeros((8, 3)), [0, 1], 1) == 0.0


def test_decay_factor_against_svd_oracle():
    rng = np.random.default_rng(1)
    R = rng.standard_normal((20, 4))
    s = np.array([2, 5, 11, 17, 3, 8])
    comp = np.setdiff1d(np.arange(20), s)
    sig = np.linalg.svd(R[s], compute_uv=False)
    for r in range(1, 5):
        oracle = (R[comp] ** 2).sum() + (sig[r:] ** 2).sum()
        assert decay_factor(R, s, r) == pytest.approx(oracle, rel=1e-12)


def test_adaptive_sampling_minimizes_decay_factor():
    rng = np.random.default_rng(2)
    for N in range(3, 11):
        R = rng.standard_normal((N, 2))
        for m in range(2, N + 1):
            # r equal to the rank of the sampled residual: only the unsampled part remains
            best = adaptive_sampling(R, m).indices
            rho = decay_factor(R, best, 2)
            for c in itertools.combinations(range(N), m):
                assert rho <= decay_factor(R, list(c), 2) + 1e-12


def test_local_coherence_canonical():
    U = np.eye(10)[:, :2]
    prof = local_coherence(U)
    assert np.allclose(prof.values[:2], 5.0) and np.all(prof.values[2:] == 0)
    assert prof.coherence == 5.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_local_coherence_sum_and_max(seed):
    U = orth(100, 4, np.random.default_rng(seed))
    prof = local_coherence(U)
    assert abs(prof.values.sum() * 4 / 100 - 4) < 1e-9
    assert prof.coherence >= 1.0
    assert np.all(np.diff(prof.sorted_values) <= 0)


def test_residual_coherence_same_space_is_zero():
    rng = np.random.default_rng(3)
    U = orth(50, 3, rng)
    rep = verify_lemma_residual_coherence(U, U, qdeim_points(U))
    assert rep.residual_rows.max() < 1e-25
    assert rep.max_violation_ratio <= 1.0


def test_residual_coherence_incoherent_case_not_localized():
    rng = np.random.default_rng(4)
    U, V = orth(400, 3, rng), orth(400, 3, rng)
    rep = verify_lemma_residual_coherence(U, V, qdeim_points(U), seed=1)
    assert not rep.localized
    assert rep.max_violation_ratio <= 1.0


def test_residual_coherence_advection():
    U, p, U_bar, F = advection_local_spaces(N=1024, n=3, w=25, seed=0)
    rep = verify_lemma_residual_coherence(U, U_bar, p, F_tilde=U_bar.T @ F)
    assert rep.localized
    assert rep.decay_orders(1500) >= 6
    assert rep.max_violation_ratio <= 1.0
    assert all(v is None for v in rep.unfitted.values())


def test_prop_bound_on_constructed_instances():
    rng = np.random.default_rng(5)
    for _ in range(50):
        N = int(rng.integers(10, 60))
        n = int(rng.integers(1, 5))
        U, U_bar = orth(N, n, rng), orth(N, n, rng)
        F = U_bar @ rng.standard_normal((n, n + 1))
        p = qdeim_points(U)
        m = int(rng.integers(n + 1, N + 1))
        s = rng.choice(N, m, replace=False)
        r = int(rng.integers(1, n + 1))
        chk = check_adaptation(U, p, s, F, U_bar, r)
        assert chk.distance <= chk.bound + 1e-8
        assert abs(chk.sampled_residual_after - chk.predicted_sampled_residual) < 1e-9 * max(1, chk.predicted_sampled_residual)


def test_locality_constant_trajectory():
    Q = np.tile(np.linspace(1, 2, 30)[:, None], (1, 40))
    st_ = locality_study(Q, 10, 1, [15, 39])
    for sv in [st_.global_sv, *st_.local_sv.values()]:
        assert sv[0] == 1.0 and np.all(sv[1:] < 1e-12)


def test_locality_window_must_fit():
    with pytest.raises(ValueError):
        locality_study(np.ones((5, 10)), 4, 1, [2])


def test_advection_local_decay_faster_than_global():
    m = AdvectionModel(N=1024, dt=8e-6, mu=10.0)
    traj = solve_full_model(m, m.initial_condition(), m.K, NewtonConfig(iterations=1))
    st_ = locality_study(traj, 500, 3, [m.K // 2 - 1], global_stride=5)
    local = st_.local_sv[m.K // 2 - 1]
    assert np.log10(st_.global_sv[9] / local[9]) >= 4


def test_appendix_a_snapshots():
    one = appendix_a_snapshots(1000, 1, 0.0)
    x = -5 + 10 * (np.arange(1000) + 0.5) / 1000
    assert np.array_equal(one[:, 0], (x > 0).astype(float))
    Q = appendix_a_snapshots(2000, 2, 0.5)
    assert np.sum((Q[:, 1] - Q[:, 0]) ** 2) == pytest.approx(0.5 * 2000 / 10, abs=1)
    with pytest.raises(ValueError):
        appendix_a_snapshots(100, 3, 2.0)
