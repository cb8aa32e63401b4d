"""Low-rank ADEIM basis updates and residual-driven sampling."""

from dataclasses import dataclass

import numpy as np

from .linalg import orthonormalize, pseudo_inverse, solve_linear, thin_svd
from .rom import ReducedBasis, qdeim_points

RANK_RTOL = 1e-12


@dataclass(frozen=True)
class SamplingSet:
    """Sampling indices ``s`` into ``{0, ..., N-1}``."""

    indices: np.ndarray
    N: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        object.__setattr__(self, "indices", idx)
        if len(np.unique(idx)) != len(idx):
            raise ValueError("sampling indices must be distinct")
        if idx.size and (idx.min() < 0 or idx.max() >= self.N):
            raise ValueError("sampling indices out of range")

    @property
    def m(self):
        return self.indices.size

    def complement(self):
        mask = np.ones(self.N, dtype=bool)
        mask[self.indices] = False
        return np.flatnonzero(mask)


@dataclass
class AdeimUpdate:
    """Additive update ``U + alpha @ beta.T`` restricted to the sampled rows.

    `alpha` is stored compactly as ``(m, r)`` rows belonging to `samples`;
    :meth:`alpha_full` expands it to ``(N, r)``.
    """

    samples: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    C: np.ndarray
    R: np.ndarray
    sigma: np.ndarray

    @property
    def rank(self):
        return self.beta.shape[1]

    def alpha_full(self, N):
        A = np.zeros((N, self.rank))
        A[self.samples] = self.alpha
        return A

    def apply(self, U):
        """``U + alpha beta^T`` without re-orthogonalization."""
        U = np.array(U, dtype=float)
        U[self.samples] += self.alpha @ self.beta.T
        return U


def compute_adeim_update(U, points, samples, F_at_points, F_at_samples, r):
    """Rank-`r` update minimizing ``||S^T((U + a b^T) C - F)||_F`` with ``C`` fixed.

    ``C = U[points] \\ F_p`` and ``R = U[samples] C - F_s``. With ``R = W diag(sigma) V^T``
    each direction contributes ``alpha_i = -R v_i`` and
    ``beta_i = pinv(C^T) v_i``. The rank is clamped to the number of
    singular values above ``RANK_RTOL * max(sigma_max, ||F_s||_F)``.
    """
    if r <= 0:
        raise ValueError(f"update rank must be positive, got {r}")
    U = np.asarray(U, dtype=float)
    samples = np.asarray(samples, dtype=np.intp)
    C = solve_linear(U[points], np.asarray(F_at_points, dtype=float), "ADEIM coefficients")
    F_at_samples = np.asarray(F_at_samples, dtype=float)
    R = U[samples] @ C - F_at_samples
    _, sigma, V = thin_svd(R)
    # relative to the data as well, so rounding noise in an exact window has rank 0
    scale = max(sigma[0] if sigma.size else 0.0, np.linalg.norm(F_at_samples))
    n_pos = int((sigma > RANK_RTOL * scale).sum()) if scale > 0 else 0
    r_eff = min(r, n_pos)
    V = V[:, :r_eff]
    alpha = -R @ V
    beta = pseudo_inverse(C.T) @ V
    return AdeimUpdate(samples, alpha, beta, C, R, sigma)


def adeim_update(basis, sampling, F_at_points, F_at_samples, r, return_update=False):
    """Adapt the basis and recompute its QDEIM points.

    `sampling` may be a :class:`SamplingSet` or an index array. The updated
    basis is re-orthonormalized by QR before the points are recomputed.
    """
    samples = sampling.indices if isinstance(sampling, SamplingSet) else np.asarray(sampling)
    upd = compute_adeim_update(basis.U, basis.points, samples, F_at_points, F_at_samples, r)
    U_new = orthonormalize(upd.apply(basis.U))
    new = ReducedBasis(U_new, qdeim_points(U_new), orthonormal=True)
    if return_update:
        return new, upd
    return new


def row_residuals(R):
    """Squared row norms ``||R^T e_i||^2``."""
    R = np.asarray(R, dtype=float)
    return np.einsum("ij,ij->i", R, R)


def adaptive_sampling(R, m):
    """The `m` rows of `R` with the largest squared norms.

    Ties are broken by the lower index. Returns the indices in descending
    residual order.
    """
    R = np.asarray(R, dtype=float)
    N = R.shape[0]
    if not 0 <= m <= N:
        raise ValueError(f"need 0 <= m <= N, got m={m}, N={N}")
    order = np.argsort(-row_residuals(R), kind="stable")
    return SamplingSet(order[:m], N)


def uniform_sampling(N, m, seed):
    """`m` indices drawn uniformly without replacement.

    `seed` is an integer or a ``numpy.random.Generator`` (PCG64).
    """
    if not 0 <= m <= N:
        raise ValueError(f"need 0 <= m <= N, got m={m}, N={N}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return SamplingSet(np.sort(rng.choice(N, size=m, replace=False)), N)


def assemble_surrogate_state(basis, sampling, f_at_samples, f_at_points):
    """Surrogate column: exact ``f`` at samples, DEIM reconstruction elsewhere."""
    samples = sampling.indices if isinstance(sampling, SamplingSet) else np.asarray(sampling)
    f_at_samples = np.asarray(f_at_samples, dtype=float)
    f_at_points = np.asarray(f_at_points, dtype=float)
    if f_at_samples.shape[0] != samples.size or f_at_points.shape[0] != basis.n:
        raise ValueError("missing f values for samples or interpolation points")
    c = solve_linear(basis.interpolation_matrix(), f_at_points, "surrogate state")
    q_hat = basis.U @ c
    q_hat[samples] = f_at_samples
    return q_hat
