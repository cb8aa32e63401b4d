import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aadeim import io
from aadeim.config import build_config, config_hash, load_grid, parse_text
from aadeim.errors import ConfigError
from aadeim.models import Trajectory
from aadeim.rom import ReducedBasis

BASE = """
[model]
kind = burgers
N = 64
dt = 5e-5
mu = 3e-3

[method]
kind = aadeim
n = 4
w_init = 20
m = 16

[run]
K = 50
"""


def test_parse_types():
    parsed = parse_text(BASE + "seed = 3\n")
    assert parsed["model"]["N"] == 64 and parsed["model"]["dt"] == 5e-5
    assert parsed["run"]["seed"] == 3
    cfg = build_config(parsed)
    assert cfg.aadeim_config().w == 5
    assert cfg.steps == 50


@pytest.mark.parametrize("text,line,col", [
    ("[model]\nkind = burgers\nbogus = 1\n", 3, 1),
    ("[model]\nN = 1x\n", 2, 5),
    ("[models]\n", 1, 2),
    ("kind = burgers\n", 1, 1),
    ("[model]\nN 5\n", 2, 1),
    ("[model]\nN = 4\nN = 5\n", 3, 1),
    ("[run]\n  reference = maybe\n", 2, 15),
])
def test_parse_errors_report_position(text, line, col):
    with pytest.raises(ConfigError) as exc:
        parse_text(text)
    assert (exc.value.line, exc.value.column) == (line, col)
    assert f"line {line}, column {col}" in str(exc.value)


def test_comments_and_blank_lines():
    parsed = parse_text("# top\n\n[model]\n; note\nkind = advection\n")
    assert parsed == {"model": {"kind": "advection"}}


def test_validation_before_compute():
    with pytest.raises(ConfigError):
        build_config(parse_text(BASE.replace("m = 16", "m = 2")))
    with pytest.raises(ConfigError):
        build_config(parse_text(BASE.replace("K = 50", "K = 10")))
    with pytest.raises(ConfigError):
        build_config(parse_text(BASE.replace("kind = aadeim", "kind = static")))
    with pytest.raises(ConfigError):
        build_config(parse_text("[model]\nkind = burgers\n"))


def test_config_hash_and_seed_override(monkeypatch):
    parsed = parse_text(BASE)
    h = config_hash(parsed)
    assert h == config_hash(parse_text("\n# comment\n" + BASE))
    monkeypatch.setenv("AADEIM_SEED", "11")
    cfg = build_config(parsed)
    assert cfg.seed == 11 and cfg.hash != h
    monkeypatch.setenv("AADEIM_SEED", "x")
    with pytest.raises(ConfigError):
        build_config(parsed)


def test_grid(tmp_path):
    p = tmp_path / "g.cfg"
    p.write_text("[grid]\nm_frac = 0.1, 0.3\nz = 1,5\n")
    assert load_grid(p) == {"m_frac": (0.1, 0.3), "z": (1, 5)}
    p.write_text("[grid]\nm = 3\nm_frac = 0.1\n")
    with pytest.raises(ConfigError):
        load_grid(p)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=12))
def test_float_format_round_trips(values):
    for v in values:
        assert float(io.fmt(v)) == v


def test_trajectory_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    traj = Trajectory(rng.standard_normal((5, 4)) * 1e-7, np.array([0.1, 0.2, 0.30000000000000004, 0.4]))
    path = tmp_path / "t.csv"
    io.write_trajectory_csv(path, traj, "abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_hash=abc"
    assert lines[1].startswith("t=0.1,t=0.2,t=0.30000000000000004")
    back = io.read_trajectory(path)
    assert np.array_equal(back.states, traj.states) and np.array_equal(back.times, traj.times)


def test_trajectory_binary_layout(tmp_path):
    Q = np.arange(6.0).reshape(2, 3)
    path = tmp_path / "t.bin"
    io.write_trajectory_bin(path, Trajectory(Q, np.arange(3.0)))
    data = path.read_bytes()
    assert data[:8] == b"ROMTRAJ1"
    assert int.from_bytes(data[8:16], "little") == 2 and int.from_bytes(data[16:24], "little") == 3
    assert np.frombuffer(data[24:32], "<f8")[0] == 0.0 and np.frombuffer(data[32:40], "<f8")[0] == 3.0
    assert np.array_equal(io.read_trajectory(path).states, Q)
    path.write_bytes(b"ROMTRAJ1" + data[8:-8])
    with pytest.raises(ValueError):
        io.read_trajectory_bin(path)


def test_series_and_basis_files(tmp_path):
    io.write_series_csv(tmp_path / "s.csv", [3.0, 1.5])
    idx, val = io.read_series_csv(tmp_path / "s.csv")
    assert list(idx) == [1, 2] and list(val) == [3.0, 1.5]
    b = ReducedBasis(np.eye(4)[:, :2], np.array([0, 1]))
    io.write_basis_csv(tmp_path / "b.csv", b)
    assert (tmp_path / "b.points").read_text() == "1\n2\n"
