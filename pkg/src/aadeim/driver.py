"""Online adaptive reduced models: warm start, sampling, basis adaptation.

Step indexing follows the full model: ``q_0`` is the initial condition and
a trajectory holds ``q_1 .. q_K`` as columns ``0 .. K-1``. Each loop pass
of the online phase advances one step, solving the reduced system
``f~(x_k) = x_{k-1}`` for the new reduced state ``x_k`` given the previous
one.

The surrogate column appended to the window at step ``k`` is built from
``f(U x_k; t_k)``: exact at the sampling points, DEIM-reconstructed at all
other rows. After every basis update the reduced state is re-expressed in
the new basis by orthogonal projection of the reconstructed state.
"""

import logging
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .adeim import adaptive_sampling, assemble_surrogate_state, compute_adeim_update, uniform_sampling
from .errors import ConfigError, SingularMatrixError
from .linalg import orthonormalize, solve_linear, thin_svd
from .models import NewtonConfig, Trajectory, solve_full_model
from .rom import ReducedBasis, StepCounters, pod_basis, qdeim_points, solve_reduced_step
from .timing import PHASES, PhaseTimer

log = logging.getLogger(__name__)


@dataclass
class AadeimConfig:
    """Knobs of the online adaptive reduced model.

    ``adapt_every=None`` disables basis adaptation (and sampling); ``m`` may
    then be 0. ``sampling`` is ``"adaptive"`` (residual ranked) or
    ``"uniform"`` (seeded uniform draw without replacement).
    """

    n: int
    w_init: int
    m: int
    w: int = None
    z: int = 5
    r: int = 1
    adapt_every: int = 1
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    seed: int = 0
    sampling: str = "adaptive"
    snapshot_every: int = 1

    def __post_init__(self):
        if self.w is None:
            self.w = self.n + 1
        self.validate()

    def validate(self, N=None):
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.w < self.n:
            raise ConfigError(f"window w={self.w} must be at least n={self.n}")
        if self.w_init < self.w:
            raise ConfigError(f"w_init={self.w_init} must be at least w={self.w}")
        if self.w_init < self.n:
            raise ConfigError("w_init must be at least n")
        if self.z < 1 or self.r < 1 or self.snapshot_every < 1:
            raise ConfigError("z, r and snapshot_every must be positive")
        if self.sampling not in ("adaptive", "uniform"):
            raise ConfigError(f"unknown sampling strategy {self.sampling!r}")
        if self.adaptive:
            if self.adapt_every < 1:
                raise ConfigError("adapt_every must be positive (or None)")
            if self.m <= self.n:
                raise ConfigError(f"m={self.m} must exceed n={self.n}")
        if N is not None and self.m > N:
            raise ConfigError(f"m={self.m} exceeds N={N}")

    @property
    def adaptive(self):
        return self.adapt_every is not None


@dataclass
class RunRecord:
    """Result of one run.

    `phase_times` is ``(K, 6)`` seconds per step in the order of
    ``timing.PHASES``; `totals` holds per-phase totals plus ``overhead`` and
    ``total``.
    """

    method: str
    trajectory: Trajectory
    full_step: np.ndarray
    sampling_adapted: np.ndarray
    basis_adapted: np.ndarray
    phase_times: np.ndarray
    totals: dict
    counters: StepCounters
    running_error: np.ndarray = None
    error: float = None

    @property
    def states(self):
        return self.trajectory.states

    def attach_reference(self, reference, schedule="standard"):
        ref = reference.states if isinstance(reference, Trajectory) else reference
        diff = np.sum((self.states - ref) ** 2, axis=0)
        norm = np.sum(ref**2, axis=0)
        self.running_error = np.sqrt(np.cumsum(diff) / np.maximum(np.cumsum(norm), np.finfo(float).tiny))
        self.error = compute_error(ref, self.states, schedule)
        return self


def _new_record(method, N, K, dt):
    return dict(
        method=method,
        Q=np.empty((N, K)),
        times=dt * np.arange(1, K + 1),
        full_step=np.zeros(K, dtype=bool),
        sampling_adapted=np.zeros(K, dtype=bool),
        basis_adapted=np.zeros(K, dtype=bool),
        phase_times=np.zeros((K, len(PHASES))),
    )


def _finish(rec, timer, t_start, counters):
    total = time.perf_counter() - t_start
    totals = timer.snapshot()
    totals["overhead"] = total - sum(totals.values())
    totals["total"] = total
    return RunRecord(rec["method"], Trajectory(rec["Q"], rec["times"]), rec["full_step"],
                     rec["sampling_adapted"], rec["basis_adapted"], rec["phase_times"],
                     totals, counters)


def _phase_delta(timer, before):
    now = timer.snapshot()
    return np.array([now[p] - before[p] for p in PHASES]), now


def _warm_start(model, q0, config, K, rec):
    if config.w_init >= K:
        raise ConfigError(f"w_init={config.w_init} must be smaller than K={K}")
    warm = solve_full_model(model, q0, config.w_init, config.newton)
    rec["Q"][:, : config.w_init] = warm.states
    rec["full_step"][: config.w_init] = True
    snaps = warm.states[:, config.snapshot_every - 1 :: config.snapshot_every]
    if snaps.shape[1] < config.n:
        snaps = warm.states
    basis = pod_basis(snaps, config.n).with_points()
    window = deque((warm.states[:, j].copy() for j in range(config.w_init - config.w + 1, config.w_init)),
                   maxlen=config.w)
    x = basis.U.T @ warm.states[:, -1]
    return basis, window, x


def run_aadeim(model, q0, config, K=None, reference=None):
    """Adaptive bases with adaptive sampling.

    Parameters
    ----------
    model : FullModel
    q0 : ndarray
        Initial condition (state at step 0).
    config : AadeimConfig
    K : int, optional
        Number of steps; defaults to ``model.K``.
    reference : Trajectory or ndarray, optional
        Full-model trajectory for error reporting.

    Returns
    -------
    RunRecord
    """
    K = K or model.K
    N = model.N
    config.validate(N)
    t_start = time.perf_counter()
    timer = PhaseTimer()
    counters = StepCounters()
    rec = _new_record("aadeim", N, K, model.dt)
    rng = np.random.default_rng(config.seed)

    basis, window, x = _warm_start(model, q0, config, K, rec)
    samples = None
    w_init = config.w_init
    before = timer.snapshot()

    for k in range(w_init + 1, K + 1):
        try:
            basis, x, samples = _aadeim_step(model, config, basis, x, samples, window, k, rng,
                                             rec, counters, timer)
        except SingularMatrixError as exc:
            raise exc.locate(k, timer.current or "reduced") from None
        rec["phase_times"][k - 1], before = _phase_delta(timer, before)

    out = _finish(rec, timer, t_start, counters)
    if reference is not None:
        out.attach_reference(reference)
    return out


def _aadeim_step(model, config, basis, x, samples, window, k, rng, rec, counters, timer):
    N = model.N
    w_init = config.w_init
    t = model.time(k)
    x = solve_reduced_step(model, basis, x, t, config.newton, k, counters, timer)
    q = basis.U @ x
    rec["Q"][:, k - 1] = q

    if config.adaptive:
        timer.start("sample")
        p = basis.points
        refresh = k % config.z == 0 or k == w_init + 1
        if refresh and config.sampling == "adaptive":
            fcol = model.evaluate_f(q, t)
            counters.f_full += 1
            window.append(fcol)
            Fk = np.column_stack(window)
            C = solve_linear(basis.U[p], Fk[p], f"sampling residual at step {k}")
            # as a set; sorted so results do not depend on tie order
            samples = np.sort(adaptive_sampling(Fk - basis.U @ C, config.m).indices)
            rec["sampling_adapted"][k - 1] = True
        else:
            if refresh:
                samples = uniform_sampling(N, config.m, rng).indices
                rec["sampling_adapted"][k - 1] = True
            idx = np.union1d(samples, p)
            vals = model.evaluate_f_restricted(q, t, idx)
            counters.f_restricted_calls += 1
            counters.f_restricted_components += idx.size
            fs = vals[np.searchsorted(idx, samples)]
            fp = vals[np.searchsorted(idx, p)]
            window.append(assemble_surrogate_state(basis, samples, fs, fp))

        if (k - w_init - 1) % config.adapt_every == 0:
            timer.start("adaptU")
            Fk = np.column_stack(window)
            basis = _adapt(basis, samples, Fk, config.r, timer)
            counters.basis_updates += 1
            x = basis.U.T @ q
            rec["basis_adapted"][k - 1] = True
        timer.stop()
    return basis, x, samples


def _adapt(basis, samples, Fk, r, timer):
    p = basis.points
    upd = compute_adeim_update(basis.U, p, samples, Fk[p], Fk[samples], r)
    U = orthonormalize(upd.apply(basis.U))
    timer.start("adaptP")
    return ReducedBasis(U, qdeim_points(U))


def run_static_rom(model, q0, basis, steps, newton=None, k0=0):
    """Reduced time stepping with a fixed basis and fixed points.

    The reduced initial state is the orthogonal projection ``U^T q0``;
    `k0` is the step index of `q0` (it shifts the time grid only).
    """
    newton = newton or NewtonConfig()
    if basis.points is None:
        basis = basis.with_points()
    t_start = time.perf_counter()
    timer = PhaseTimer()
    counters = StepCounters()
    rec = _new_record("static", model.N, steps, model.dt)
    rec["times"] = model.dt * np.arange(k0 + 1, k0 + steps + 1)
    x = basis.U.T @ np.asarray(q0, dtype=float)
    before = timer.snapshot()
    for j in range(steps):
        k = k0 + j + 1
        try:
            x = solve_reduced_step(model, basis, x, model.time(k), newton, k, counters, timer)
        except SingularMatrixError as exc:
            raise exc.locate(k, timer.current or "reduced") from None
        rec["Q"][:, j] = basis.U @ x
        rec["phase_times"][j], before = _phase_delta(timer, before)
    return _finish(rec, timer, t_start, counters)


def svd_window_basis(Fk, n):
    """Basis of the leading `n` left singular vectors of a window, with QDEIM points."""
    U = thin_svd(Fk)[0][:, :n]
    return ReducedBasis(U, qdeim_points(U))


def run_full_svd_variant(model, q0, config, svd_adapt_every, K=None, eval_every=1, reference=None):
    """Comparison variant: full evaluations of ``f`` and SVD-recomputed bases.

    Every `eval_every` reduced steps ``f`` is evaluated at all components and
    appended to the window; every `svd_adapt_every` steps the basis is
    replaced by the leading singular vectors of the window. Pass
    ``svd_adapt_every=None`` to never adapt.
    """
    K = K or model.K
    t_start = time.perf_counter()
    timer = PhaseTimer()
    counters = StepCounters()
    rec = _new_record("fullsvd", model.N, K, model.dt)
    basis, window, x = _warm_start(model, q0, config, K, rec)
    w_init = config.w_init
    before = timer.snapshot()
    for k in range(w_init + 1, K + 1):
        t = model.time(k)
        try:
            x = solve_reduced_step(model, basis, x, t, config.newton, k, counters, timer)
        except SingularMatrixError as exc:
            raise exc.locate(k, timer.current or "reduced") from None
        q = basis.U @ x
        rec["Q"][:, k - 1] = q
        j = k - w_init - 1
        if j % eval_every == 0:
            timer.start("sample")
            window.append(model.evaluate_f(q, t))
            counters.f_full += 1
            rec["sampling_adapted"][k - 1] = True
        if svd_adapt_every is not None and j % svd_adapt_every == 0:
            timer.start("adaptU")
            U = thin_svd(np.column_stack(window))[0][:, : config.n]
            timer.start("adaptP")
            basis = ReducedBasis(U, qdeim_points(U))
            x = U.T @ q
            counters.basis_updates += 1
            rec["basis_adapted"][k - 1] = True
        timer.stop()
        rec["phase_times"][k - 1], before = _phase_delta(timer, before)
    out = _finish(rec, timer, t_start, counters)
    if reference is not None:
        out.attach_reference(reference)
    return out


def run_full(model, q0, K=None, newton=None, timed=False):
    """Full-model run wrapped in a :class:`RunRecord`."""
    K = K or model.K
    newton = newton or NewtonConfig()
    t_start = time.perf_counter()
    timer = PhaseTimer()
    rec = _new_record("full", model.N, K, model.dt)
    q = np.asarray(q0, dtype=float)
    before = timer.snapshot()
    for j in range(K):
        traj = solve_full_model(model, q, 1, newton, k0=j, timer=timer if timed else None)
        q = traj.states[:, 0]
        rec["Q"][:, j] = q
        rec["phase_times"][j], before = _phase_delta(timer, before)
    rec["full_step"][:] = True
    return _finish(rec, timer, t_start, StepCounters())


def standard_schedule(K, dense=1000, every=50):
    """Steps ``1..dense`` and then every `every`-th step, as column indices."""
    steps = np.arange(1, K + 1)
    keep = (steps <= dense) | (steps % every == 0)
    return np.flatnonzero(keep)


def compute_error(reference, test, subsample=None):
    """Relative Frobenius error ``||Q~ - Q||_F / ||Q||_F`` over scheduled columns.

    `subsample` is ``None`` (all columns), an int stride, ``"standard"`` for
    :func:`standard_schedule`, or an explicit array of column indices.
    """
    ref = reference.states if isinstance(reference, Trajectory) else np.asarray(reference, dtype=float)
    tst = test.states if isinstance(test, Trajectory) else np.asarray(test, dtype=float)
    if ref.shape != tst.shape:
        raise ValueError(f"shape mismatch: reference {ref.shape} vs test {tst.shape}")
    K = ref.shape[1]
    if subsample is None:
        cols = np.arange(K)
    elif isinstance(subsample, str):
        if subsample != "standard":
            raise ValueError(f"unknown schedule {subsample!r}")
        cols = standard_schedule(K)
    elif np.isscalar(subsample):
        cols = np.arange(0, K, int(subsample))
    else:
        cols = np.asarray(subsample, dtype=np.intp)
    denom = np.linalg.norm(ref[:, cols])
    if denom == 0.0:
        raise ValueError("reference trajectory is zero on the schedule")
    return float(np.linalg.norm(tst[:, cols] - ref[:, cols]) / denom)
