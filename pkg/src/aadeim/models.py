"""Full-order models ``q_k = f(q_{k+1})`` for implicit Euler time stepping.

Every model describes ``f`` row by row through a five-point stencil
(offsets -2..2). Full evaluation, restricted evaluation at an index set and
the analytic Jacobian are all computed from that one stencil routine, so
``evaluate_f_restricted(q, t, idx)`` is bitwise identical to
``evaluate_f(q, t)[idx]``.

Time convention: the step from ``q_k`` to ``q_{k+1}`` solves
``f(q_{k+1}; t_{k+1}) = q_k`` with ``t_k = k * dt``; time-dependent
coefficients are evaluated at the implicit level ``t_{k+1}``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg.lapack import dgbsv

from .errors import ModelDivergenceError, SingularMatrixError

OFFSETS = np.arange(-2, 3)


@dataclass(frozen=True)
class NewtonConfig:
    """Fixed-iteration Newton settings (no early exit)."""

    iterations: int = 15
    step: float = 1.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("Newton needs at least one iteration")


@dataclass
class Trajectory:
    """States as columns, ``states[:, j]`` at time ``times[j]``."""

    states: np.ndarray
    times: np.ndarray

    @property
    def N(self):
        return self.states.shape[0]

    @property
    def K(self):
        return self.states.shape[1]


class FullModel:
    """Common machinery; subclasses implement :meth:`_stencil`."""

    name = "model"

    def __init__(self, N, dt, mu, T=None):
        if N < 5:
            raise ValueError("grid needs at least 5 points")
        self.N = int(N)
        self.dt = float(dt)
        self.mu = float(mu)
        self.T = T

    @property
    def K(self):
        if self.T is None:
            return None
        return int(round(self.T / self.dt))

    def time(self, k):
        return k * self.dt

    def _stencil(self, q, t, idx):
        """Return ``(cols, fvals, jvals)`` for rows `idx`.

        `cols` is ``(len(idx), 5)`` with out-of-range entries allowed where
        the Jacobian coefficient is zero; `fvals` is ``f`` at the rows and
        `jvals` the matching Jacobian entries.
        """
        raise NotImplementedError

    def _check_indices(self, indices):
        idx = np.asarray(indices, dtype=np.intp).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.N):
            raise IndexError(f"indices out of range for N={self.N}")
        return idx

    def evaluate_f(self, q, t):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.N,):
            raise ValueError(f"state must have shape ({self.N},), got {q.shape}")
        return self._stencil(q, t, np.arange(self.N))[1]

    def evaluate_f_restricted(self, q, t, indices):
        idx = self._check_indices(indices)
        if idx.size == 0:
            return np.zeros(0)
        return self._stencil(np.asarray(q, dtype=float), t, idx)[1]

    def jacobian_stencil(self, q, t, indices):
        """Jacobian rows at `indices` in stencil form ``(cols, vals)``."""
        idx = self._check_indices(indices)
        cols, _, vals = self._stencil(np.asarray(q, dtype=float), t, idx)
        return cols, vals

    def jacobian_f(self, q, t):
        """Assembled dense ``N x N`` Jacobian of ``f``."""
        cols, vals = self.jacobian_stencil(q, t, np.arange(self.N))
        J = np.zeros((self.N, self.N))
        rows = np.broadcast_to(np.arange(self.N)[:, None], cols.shape)
        valid = (cols >= 0) & (cols < self.N)
        np.add.at(J, (rows[valid], cols[valid]), vals[valid])
        return J

    def jacobian_sparse(self, q, t):
        cols, vals = self.jacobian_stencil(q, t, np.arange(self.N))
        rows = np.broadcast_to(np.arange(self.N)[:, None], cols.shape)
        valid = (cols >= 0) & (cols < self.N) & (vals != 0)
        return sp.csc_matrix((vals[valid], (rows[valid], cols[valid])), shape=(self.N, self.N))

    def assemble_jacobian(self, q, t):
        """Jacobian in whatever form :meth:`solve_assembled` consumes."""
        return self.jacobian_sparse(q, t)

    def solve_assembled(self, A, b):
        return spla.spsolve(A, b)

    def solve_jacobian(self, q, t, b):
        """Solve ``J(q) x = b`` for the Newton correction."""
        return self.solve_assembled(self.assemble_jacobian(q, t), b)

    def newton_correction(self, x, t, rhs):
        """Return ``J(x)^{-1} (f(x) - rhs)``."""
        return self.solve_jacobian(x, t, self.evaluate_f(x, t) - rhs)

    def stencil_support(self, indices):
        """State indices that `indices` rows of ``f`` depend on."""
        idx = self._check_indices(indices)
        cols = idx[:, None] + OFFSETS[None, :]
        return np.unique(self._wrap(cols))

    def _wrap(self, cols):
        return cols[(cols >= 0) & (cols < self.N)]

    def _wrap_cols(self, cols):
        # out-of-range stencil entries carry zero coefficients
        return np.clip(cols, 0, self.N - 1)


class AdvectionModel(FullModel):
    """Linear advection ``q_t + mu q_x = 0`` on (-1, 1), periodic.

    Second-order upwind in space: ``(3 q_i - 4 q_{i-1} + q_{i-2}) / (2 dx)``
    for ``mu >= 0`` (mirrored for ``mu < 0``), with ``N`` points
    ``x_i = -1 + i dx``, ``dx = 2 / N``.
    """

    name = "advection"

    def __init__(self, N=8192, dt=1e-6, mu=10.0, T=0.08):
        super().__init__(N, dt, mu, T)
        self.dx = 2.0 / self.N
        self.x = -1.0 + self.dx * np.arange(self.N)
        if self.mu >= 0:
            coeff = np.array([1.0, -4.0, 3.0, 0.0, 0.0])
        else:
            coeff = np.array([0.0, 0.0, -3.0, 4.0, -1.0])
        self._coeff = coeff * (self.dt * self.mu / (2.0 * self.dx))
        self._coeff[2] += 1.0

    def initial_condition(self):
        return np.exp(-self.x**2 / 0.0002) / np.sqrt(np.pi * 0.02)

    def _wrap(self, cols):
        return np.mod(cols, self.N)

    _wrap_cols = _wrap

    def _stencil(self, q, t, idx):
        cols = np.mod(idx[:, None] + OFFSETS[None, :], self.N)
        vals = np.broadcast_to(self._coeff, cols.shape)
        f = (vals * q[cols]).sum(axis=1)
        return cols, f, vals

    @cached_property
    def _lu(self):
        # constant Jacobian: factor once
        return spla.splu(self.jacobian_sparse(np.zeros(self.N), 0.0))

    def assemble_jacobian(self, q, t):
        return self._lu

    def solve_assembled(self, A, b):
        return A.solve(np.asarray(b, dtype=float))


# min over t of sin(20 pi t) + cos(60 pi t) + 2
VISCOSITY_FACTOR_MIN = 0.12129314986


def viscosity(t, mu):
    """Time-varying viscosity ``mu (sin(20 pi t) + cos(60 pi t) + 2)``."""
    return mu * (np.sin(20 * np.pi * t) + np.cos(60 * np.pi * t) + 2.0)


def transport_direction(t):
    """``sign(sin(20 pi t) + cos(60 pi t) + 1)`` with ``sign(0) = +1``."""
    val = np.sin(20 * np.pi * t) + np.cos(60 * np.pi * t) + 1.0
    # exact zeros are only hit up to rounding, e.g. t = 0.05 gives ~1e-16
    out = np.where(val >= -1e-12, 1.0, -1.0)
    return out if np.ndim(out) else float(out)


class BurgersModel(FullModel):
    """Burgers' equation ``q_t + eta(t) q q_x = nu(t) q_xx`` on [-1, 1].

    The grid has ``N`` nodes ``x_i = -1 + i dx`` with ``dx = 2 / (N - 1)``;
    nodes 0 and N-1 carry the Dirichlet values and their rows of ``f`` are
    identity rows, so they stay at the initial boundary values.

    Interior rows use the flux form ``eta (q^2/2)_x`` split by the sign of
    the wave speed ``eta q``: with ``q_b = max(q, 0)`` for ``eta > 0`` (and
    ``min(q, 0)`` for ``eta < 0``) and ``q_f = q - q_b``, the flux
    ``g_b = q_b^2 / 2`` is differenced backward
    ``(3 g_i - 4 g_{i-1} + g_{i-2}) / (2 dx)`` and ``g_f = q_f^2 / 2``
    forward ``(-3 g_i + 4 g_{i+1} - g_{i+2}) / (2 dx)``. The split keeps
    ``f`` continuously differentiable, so Newton does not cycle where ``q``
    changes sign. Next to a boundary the stencil that would leave the grid
    falls back to a first-order one-sided difference. Diffusion is
    the central three-point Laplacian.
    """

    name = "burgers"

    def __init__(self, N=1024, dt=5e-5, mu=3e-3, T=1.5):
        super().__init__(N, dt, mu, T)
        self.dx = 2.0 / (self.N - 1)
        self.x = -1.0 + self.dx * np.arange(self.N)

    def initial_condition(self):
        q = np.zeros(self.N)
        q[(self.x >= -0.5) & (self.x <= -1.0 / 3.0)] = 1.0
        return q

    def coefficients(self, t):
        nu = viscosity(t, self.mu)
        if self.mu > 0 and nu < self.mu * VISCOSITY_FACTOR_MIN * 0.99:
            raise ValueError(f"viscosity {nu} below its lower bound at t={t}")
        return nu, transport_direction(t)

    @cached_property
    def _tables(self):
        N, dx = self.N, self.dx
        # convection rows: 0 none, 1 backward 2nd order, 2 backward 1st order,
        # 3 forward 2nd order, 4 forward 1st order
        conv = np.array([
            [0.0, 0.0, 0.0, 0.0, 0.0],
            [1.0 / (2 * dx), -4.0 / (2 * dx), 3.0 / (2 * dx), 0.0, 0.0],
            [0.0, -1.0 / dx, 1.0 / dx, 0.0, 0.0],
            [0.0, 0.0, -3.0 / (2 * dx), 4.0 / (2 * dx), -1.0 / (2 * dx)],
            [0.0, 0.0, -1.0 / dx, 1.0 / dx, 0.0],
        ])
        i = np.arange(N)
        interior = (i > 0) & (i < N - 1)
        back_kind = np.where(interior, np.where(i >= 2, 1, 2), 0)
        fwd_kind = np.where(interior, np.where(i <= N - 3, 3, 4), 0)
        diff = np.zeros((N, 5))
        diff[interior] = np.array([0.0, 1.0, -2.0, 1.0, 0.0]) / dx**2
        cols = i[:, None] + OFFSETS[None, :]
        clipped = np.clip(cols, 0, N - 1)
        # LAPACK gbsv storage: ab[kl + ku + i - j, j] = J[i, j], kl = ku = 2
        valid = (cols == clipped).ravel()
        band_rows = np.broadcast_to((4 - OFFSETS)[None, :], cols.shape).ravel()
        band_flat = np.ravel_multi_index((band_rows[valid], cols.ravel()[valid]), (7, N))
        return conv, back_kind, fwd_kind, diff, cols, clipped, valid, band_flat

    def _stencil(self, q, t, idx):
        nu, eta = self.coefficients(t)
        conv_table, back_kind, fwd_kind, diff_table, all_cols, all_clipped = self._tables[:6]
        cb = conv_table[back_kind[idx]]
        cf = conv_table[fwd_kind[idx]]
        diff = diff_table[idx]
        qc = q[all_clipped[idx]]
        qb = np.maximum(qc, 0.0) if eta > 0 else np.minimum(qc, 0.0)
        qf = qc - qb
        dt = self.dt
        f = q[idx] + dt * eta * (cb * (0.5 * qb * qb) + cf * (0.5 * qf * qf)).sum(axis=1) \
            - dt * nu * (diff * qc).sum(axis=1)
        jac = (dt * eta) * (cb * qb + cf * qf) - (dt * nu) * diff
        jac[:, 2] += 1.0
        return all_cols[idx], f, jac

    def newton_correction(self, x, t, rhs):
        """Return ``J(x)^{-1} (f(x) - rhs)`` from a single stencil pass."""
        _, f, vals = self._stencil(x, t, np.arange(self.N))
        return self.solve_assembled(self._band(vals), f - rhs)

    def assemble_jacobian(self, q, t):
        _, vals = self.jacobian_stencil(q, t, np.arange(self.N))
        return self._band(vals)

    def _band(self, vals):
        # vals: stencil of all N rows in natural order
        valid, band_flat = self._tables[6:]
        ab = np.zeros(7 * self.N)
        ab[band_flat] = vals.ravel()[valid]
        return ab.reshape(7, self.N)

    def solve_assembled(self, A, b):
        _, _, x, info = dgbsv(2, 2, A, b, overwrite_ab=True)
        if info > 0:
            raise SingularMatrixError("Burgers Jacobian")
        return x


def newton_full_step(model, q_prev, t, newton, timer=None):
    """One implicit step: solve ``f(x; t) = q_prev`` by fixed Newton iterations."""
    x = np.array(q_prev, dtype=float)
    for _ in range(newton.iterations):
        if timer is None:
            x = x - newton.step * model.newton_correction(x, t, q_prev)
            continue
        timer.start("rhs")
        res = model.evaluate_f(x, t) - q_prev
        timer.start("jacobian")
        A = model.assemble_jacobian(x, t)
        timer.start("solve")
        x = x - newton.step * model.solve_assembled(A, res)
    if timer is not None:
        timer.stop()
    return x


def solve_full_model(model, q0, steps, newton=None, k0=0, timer=None):
    """March `steps` implicit steps from `q0` (state at step `k0`).

    Returns the trajectory of the computed states ``q_{k0+1} .. q_{k0+steps}``
    (the initial state is not included).
    """
    newton = newton or NewtonConfig()
    q = np.asarray(q0, dtype=float)
    if not np.isfinite(q).all():
        raise ModelDivergenceError(k0, "full", "non-finite initial state")
    Q = np.empty((model.N, steps))
    for j in range(steps):
        k = k0 + j + 1
        with np.errstate(over="ignore", invalid="ignore"):  # reported below
            q = newton_full_step(model, q, model.time(k), newton, timer)
        if not np.isfinite(q).all():
            raise ModelDivergenceError(k, "full")
        Q[:, j] = q
    times = model.time(np.arange(k0 + 1, k0 + steps + 1))
    return Trajectory(Q, times)


def make_model(kind, **params):
    """Construct a model from its name (``advection`` or ``burgers``)."""
    kinds = {"advection": AdvectionModel, "burgers": BurgersModel}
    if kind not in kinds:
        raise ValueError(f"unknown model {kind!r}; expected one of {sorted(kinds)}")
    return kinds[kind](**params)
