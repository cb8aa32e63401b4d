"""CSV and binary artifacts.

Floats are written with ``repr``, the shortest string that round-trips a
64-bit float, which is locale independent.
"""

import csv
import struct
from pathlib import Path

import numpy as np

from .models import Trajectory
from .timing import PHASES

MAGIC = b"ROMTRAJ1"
METRICS_COLUMNS = ("step", "phase_rhs_s", "phase_jac_s", "phase_solve_s",
                   "phase_sample_s", "phase_adaptU_s", "phase_adaptP_s", "err_running")


def fmt(x):
    return repr(float(x))


def _comment(config_hash):
    return f"# config_hash={config_hash}\n" if config_hash else ""


def _read_lines(path):
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    return [ln for ln in lines if not ln.startswith("#")]


def write_trajectory_csv(path, trajectory, config_hash=None):
    """One column per time step under a ``t=<seconds>`` header."""
    Q = trajectory.states
    with open(path, "w", newline="") as fh:
        fh.write(_comment(config_hash))
        fh.write(",".join(f"t={fmt(t)}" for t in trajectory.times) + "\n")
        for row in Q:
            fh.write(",".join(map(fmt, row)) + "\n")


def read_trajectory_csv(path):
    lines = _read_lines(path)
    if not lines:
        raise ValueError(f"{path}: empty trajectory file")
    header = lines[0].split(",")
    if not all(h.startswith("t=") for h in header):
        raise ValueError(f"{path}: header must be t=<seconds> per column")
    times = np.array([float(h[2:]) for h in header])
    Q = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return Trajectory(Q.reshape(len(lines) - 1, len(header)), times)


def write_trajectory_bin(path, trajectory):
    Q = np.asarray(trajectory.states, dtype="<f8")
    N, K = Q.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", N, K))
        fh.write(Q.tobytes(order="F"))


def read_trajectory_bin(path, dt=None):
    """Read the binary format. Times are not stored; ``k * dt`` is used if `dt` is given."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic")
    N, K = struct.unpack("<QQ", data[8:24])
    payload = np.frombuffer(data, dtype="<f8", offset=24)
    if payload.size != N * K:
        raise ValueError(f"{path}: expected {N * K} values, found {payload.size}")
    Q = payload.reshape((N, K), order="F").astype(float)
    times = np.arange(1, K + 1) * dt if dt else np.arange(1, K + 1, dtype=float)
    return Trajectory(Q, times)


def read_trajectory(path):
    """Dispatch on content: binary magic or CSV."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    return read_trajectory_bin(path) if head == MAGIC else read_trajectory_csv(path)


def write_metrics_csv(path, record, config_hash=None, timings=True):
    """Per-step phase times and running error of a run record.

    With ``timings=False`` the phase columns are left empty so the file only
    depends on the computation, not on the machine.
    """
    times = record.phase_times
    err = record.running_error
    with open(path, "w", newline="") as fh:
        fh.write(_comment(config_hash))
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for k in range(times.shape[0]):
            cells = [str(k + 1)]
            cells += [fmt(v) for v in times[k]] if timings else [""] * len(PHASES)
            cells.append(fmt(err[k]) if err is not None and np.isfinite(err[k]) else "")
            fh.write(",".join(cells) + "\n")


def read_metrics_csv(path):
    lines = _read_lines(path)
    reader = csv.DictReader(lines)
    return list(reader)


def write_series_csv(path, values, index=None, config_hash=None):
    """``index,value`` pairs for one curve."""
    values = np.asarray(values, dtype=float).ravel()
    index = np.arange(1, values.size + 1) if index is None else np.asarray(index)
    with open(path, "w", newline="") as fh:
        fh.write(_comment(config_hash))
        fh.write("index,value\n")
        for i, v in zip(index, values):
            fh.write(f"{i if isinstance(i, (int, np.integer)) else fmt(i)},{fmt(v)}\n")


def read_series_csv(path):
    lines = _read_lines(path)[1:]
    idx, val = zip(*(ln.split(",") for ln in lines)) if lines else ((), ())
    return np.array([float(i) for i in idx]), np.array([float(v) for v in val])


def write_rows_csv(path, columns, rows, config_hash=None):
    with open(path, "w", newline="") as fh:
        fh.write(_comment(config_hash))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row) + "\n")


def write_basis_csv(path, basis, config_hash=None):
    """Basis columns as CSV; points (1-based) in a ``.points`` sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(_comment(config_hash))
        fh.write(",".join(f"u{j + 1}" for j in range(basis.n)) + "\n")
        for row in basis.U:
            fh.write(",".join(map(fmt, row)) + "\n")
    if basis.points is not None:
        path.with_suffix(".points").write_text("\n".join(str(int(p) + 1) for p in basis.points) + "\n")
