"""POD bases, QDEIM interpolation points and DEIM reduced models."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelDivergenceError, SingularMatrixError
from .linalg import COND_LIMIT, check_finite, condition_estimate, pivoted_qr, solve_linear, thin_svd

log = logging.getLogger(__name__)


@dataclass
class ReducedBasis:
    """DEIM pair: basis matrix ``U`` (N x n) and interpolation points.

    `points` may be ``None`` for a bare POD basis that has not been paired
    with interpolation points yet.
    """

    U: np.ndarray
    points: np.ndarray = None
    orthonormal: bool = True
    rank_deficient: bool = False
    singular_values: np.ndarray = field(default=None, repr=False)

    @property
    def N(self):
        return self.U.shape[0]

    @property
    def n(self):
        return self.U.shape[1]

    def with_points(self, points=None):
        """Return a copy with `points` (QDEIM points if omitted)."""
        if points is None:
            points = qdeim_points(self.U)
        return ReducedBasis(self.U, np.asarray(points, dtype=np.intp), self.orthonormal,
                            self.rank_deficient, self.singular_values)

    def interpolation_matrix(self):
        """``P^T U``, i.e. the rows of ``U`` at the interpolation points."""
        if self.points is None:
            raise ValueError("basis has no interpolation points")
        return self.U[self.points]

    def validate(self):
        p = self.points
        if p is None:
            raise ValueError("basis has no interpolation points")
        if len(np.unique(p)) != len(p) or p.min() < 0 or p.max() >= self.N:
            raise ValueError("interpolation points must be distinct and in range")
        if condition_estimate(self.U[p]) > COND_LIMIT:
            raise SingularMatrixError("P^T U of reduced basis")
        if self.orthonormal:
            err = np.linalg.norm(self.U.T @ self.U - np.eye(self.n))
            if err > 1e-10:
                raise ValueError(f"basis flagged orthonormal but ||U^T U - I||_F = {err:.2e}")
        return self


def pod_basis(snapshots, n):
    """Leading `n` left singular vectors of the snapshot matrix.

    If `n` exceeds the numerical rank the basis is still returned and
    flagged ``rank_deficient``.
    """
    Q = check_finite(snapshots, "snapshot matrix")
    if n > min(Q.shape):
        raise ValueError(f"n={n} exceeds min(N, M)={min(Q.shape)}")
    U, s, _ = thin_svd(Q)
    tol = max(Q.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    if rank < n:
        log.warning("POD: requested n=%d but numerical rank is %d", n, rank)
    return ReducedBasis(U[:, :n].copy(), None, True, rank < n, s)


def qdeim_points(U):
    """First ``n`` pivots of the column-pivoted QR of ``U^T``."""
    U = np.asarray(U, dtype=float)
    n = U.shape[1]
    points = pivoted_qr(U.T)[:n]
    if condition_estimate(U[points]) > COND_LIMIT:
        raise SingularMatrixError("QDEIM point selection")
    return points


def deim_coefficients(basis, F_at_points, context="DEIM coefficients"):
    """``(P^T U)^{-1} P^T F`` given the rows of ``F`` at the points."""
    return solve_linear(basis.interpolation_matrix(), F_at_points, context)


def deim_project(basis, y):
    """DEIM approximation ``U (P^T U)^{-1} P^T y``."""
    y = np.asarray(y, dtype=float)
    return basis.U @ deim_coefficients(basis, y[basis.points], "deim_project")


def deim_residual(basis, F):
    """Coefficients ``C`` and residual ``R = U C - F`` for the columns of `F`."""
    F = np.asarray(F, dtype=float)
    C = deim_coefficients(basis, F[basis.points], "deim_residual")
    return C, basis.U @ C - F


@dataclass
class StepCounters:
    """Operation counts collected while stepping a reduced model."""

    f_full: int = 0
    f_restricted_calls: int = 0
    f_restricted_components: int = 0
    jac_full: int = 0
    jac_row_calls: int = 0
    max_solve_dim: int = 0
    basis_updates: int = 0

    def solve(self, dim):
        self.max_solve_dim = max(self.max_solve_dim, dim)


def solve_reduced_step(model, basis, q_red, t, newton, step=None, counters=None, timer=None):
    """Advance the reduced state one step.

    Solves ``(P^T U)^{-1} P^T f(U x; t) = q_red`` for ``x`` with fixed-count
    Newton iterations. Only the rows of ``f`` and of its Jacobian at the
    interpolation points are evaluated; the reduced Jacobian
    ``P^T J(U x) U`` is assembled directly from those stencil rows, and each
    Newton correction is an ``n x n`` solve.
    """
    U, p = basis.U, basis.points
    PU = U[p]
    target = PU @ q_red
    x = np.array(q_red, dtype=float)
    for _ in range(newton.iterations):
        if timer:
            timer.start("rhs")
        q = U @ x
        fp = model.evaluate_f_restricted(q, t, p)
        if timer:
            timer.start("jacobian")
        cols, vals = model.jacobian_stencil(q, t, p)
        cols = model._wrap_cols(cols)
        Jred = np.einsum("ij,ijk->ik", vals, U[cols])
        if timer:
            timer.start("solve")
        dx = solve_linear(Jred, fp - target, "reduced Newton Jacobian")
        x = x - newton.step * dx
        if counters is not None:
            counters.f_restricted_calls += 1
            counters.f_restricted_components += len(p)
            counters.jac_row_calls += 1
            counters.solve(Jred.shape[0])
    if timer:
        timer.stop()
    if not np.isfinite(x).all():
        raise ModelDivergenceError(step if step is not None else -1, "reduced solve")
    return x
