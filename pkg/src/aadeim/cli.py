"""Command line entry point: ``aadeim run|sweep|study|compare``.

Exit codes: 0 success, 2 configuration or input errors, 3 runtime model errors.
"""

import argparse
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, io
from .driver import compute_error, run_aadeim, run_full, run_full_svd_variant, run_static_rom
from .errors import AadeimError, ConfigError
from .config import SCHEMA, load_config, load_grid
from .models import Trajectory, solve_full_model
from .rom import pod_basis

log = logging.getLogger("aadeim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _schedule(cfg):
    s = cfg.run["error_schedule"]
    return None if s == "all" else "standard" if s == "standard" else int(s)


def _reference(cfg, model, q0, K):
    return solve_full_model(model, q0, K, cfg.newton)


def execute(cfg, timings=False, reference=None):
    """Run the configured method and return its :class:`RunRecord`."""
    model = cfg.build_model()
    q0 = model.initial_condition()
    K = cfg.steps
    kind = cfg.kind
    if kind == "full":
        return run_full(model, q0, K, cfg.newton, timed=timings)
    if kind == "static":
        every = cfg.method["snapshot_every"]
        snaps = [solve_full_model(cfg.build_model(mu), q0, K, cfg.newton).states[:, every - 1 :: every]
                 for mu in cfg.method["train_mu"]]
        basis = pod_basis(np.hstack(snaps), cfg.method["n"]).with_points()
        rec = run_static_rom(model, q0, basis, K, cfg.newton)
    elif kind == "aadeim":
        rec = run_aadeim(model, q0, cfg.aadeim_config(), K)
    elif kind == "fullsvd":
        rec = run_full_svd_variant(model, q0, cfg.aadeim_config(adapt_every=None),
                                   cfg.method["svd_adapt_every"], K, cfg.method["eval_every"])
    else:
        raise ConfigError("method kind 'study' is run with the study subcommand")
    if cfg.run["reference"]:
        if reference is None:
            reference = _reference(cfg, model, q0, K)
        rec.attach_reference(reference, _schedule(cfg))
    return rec


def _write_trajectory(out, rec, cfg):
    traj = rec.trajectory
    every = cfg.run["trajectory_every"]
    if every > 1:
        traj = Trajectory(traj.states[:, every - 1 :: every], traj.times[every - 1 :: every])
    if cfg.run["format"] in ("csv", "both"):
        io.write_trajectory_csv(out / "trajectory.csv", traj, cfg.hash)
    if cfg.run["format"] in ("bin", "both"):
        io.write_trajectory_bin(out / "trajectory.bin", traj)


def _summary_row(rec, timings):
    c = rec.counters
    row = {"method": rec.method, "error": rec.error if rec.error is not None else "",
           "f_full": c.f_full, "f_restricted_calls": c.f_restricted_calls,
           "basis_updates": c.basis_updates, "max_solve_dim": c.max_solve_dim}
    if timings:
        row.update({f"{k}_s": v for k, v in rec.totals.items()})
    return row


def cmd_run(args):
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rec = execute(cfg, timings=args.timings)
    _write_trajectory(out, rec, cfg)
    io.write_metrics_csv(out / "metrics.csv", rec, cfg.hash, timings=args.timings)
    row = _summary_row(rec, args.timings)
    io.write_rows_csv(out / "summary.csv", list(row), [list(row.values())], cfg.hash)
    err = f"{rec.error:.6e}" if rec.error is not None else "n/a"
    print(f"{rec.method}: K={rec.states.shape[1]} error={err} full_f={rec.counters.f_full}")
    return EXIT_OK


def _cells(cfg, grid):
    N = cfg.model["N"] or cfg.build_model().N
    mus = grid.get("mu") or (None,)
    if "m_frac" in grid:
        ms = tuple(int(round(f * N)) for f in grid["m_frac"])
    else:
        ms = grid.get("m") or (None,)
    ns = grid.get("n") or (None,)
    zs = grid.get("z") or (None,)
    return list(itertools.product(mus, ms, ns, zs))


def _cell_config(cfg, cell):
    mu, m, n, z = cell
    method = {k: v for k, v in (("m", m), ("n", n), ("z", z)) if v is not None}
    model = {"mu": mu} if mu is not None else {}
    return cfg.replace(method=method, model=model)


def _ref_job(args):
    config_path, mu, path = args
    cfg = load_config(config_path)
    if mu is not None:
        cfg = cfg.replace(model={"mu": mu})
    model = cfg.build_model()
    traj = solve_full_model(model, model.initial_condition(), cfg.steps, cfg.newton)
    io.write_trajectory_bin(path, traj)
    return path


def _cell_job(args):
    config_path, cell, index, ref_path, out, timings = args
    cfg = _cell_config(load_config(config_path), cell)
    ref = io.read_trajectory_bin(ref_path) if ref_path else None
    rec = execute(cfg, timings=timings, reference=ref)
    row = {"cell": index, "mu": cfg.model["mu"], "m": cfg.method["m"], "n": cfg.method["n"],
           "z": cfg.method["z"], **_summary_row(rec, timings)}
    io.write_rows_csv(Path(out) / f"cell_{index:04d}.csv", list(row), [list(row.values())], cfg.hash)
    return row


def cmd_sweep(args):
    cfg = load_config(args.config)
    grid = load_grid(args.grid)
    cells = _cells(cfg, grid)
    for cell in cells:  # validate every cell before computing anything
        _cell_config(cfg, cell)
    out = Path(args.out)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    workers = max(1, args.workers)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    mapper = pool.map if pool else map
    try:
        refs = {}
        if cfg.kind != "full" and cfg.run["reference"]:
            mus = sorted({c[0] for c in cells}, key=lambda v: (v is None, v))
            jobs = [(args.config, mu, str(out / "cells" / f"reference_{i}.bin")) for i, mu in enumerate(mus)]
            refs = dict(zip(mus, mapper(_ref_job, jobs)))
        jobs = [(args.config, c, i, refs.get(c[0]), str(out / "cells"), args.timings)
                for i, c in enumerate(cells)]
        rows = list(mapper(_cell_job, jobs))
    finally:
        if pool:
            pool.shutdown()
    for path in refs.values():
        Path(path).unlink()
    io.write_rows_csv(out / "sweep.csv", list(rows[0]), [list(r.values()) for r in rows], cfg.hash)
    for r in rows:
        print(f"cell {r['cell']}: mu={r['mu']} m={r['m']} n={r['n']} z={r['z']} error={r['error']}")
    return EXIT_OK


def _study_params(cfg, kind):
    params = {k: default for k, (_, default) in SCHEMA["study"].items()}
    params.update(cfg.study)
    params["kind"] = kind
    return params


def run_study(cfg, kind, out):
    """Run one analysis study and write its ``<study>_<label>.csv`` curves."""
    p = _study_params(cfg, kind)
    h = cfg.hash
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def series(label, values, index=None):
        path = out / f"{kind}_{label}.csv"
        io.write_series_csv(path, values, index, h)
        written.append(path)

    if kind == "appendixA":
        errors, ratios = analysis.moving_step_decay_study(p["N"], p["n"], p["t_max"], p["n_times"])
        series("error", errors, np.asarray(p["t_max"]))
        series("ratio", ratios)
        return written

    model = cfg.build_model()
    if kind == "locality":
        K = cfg.steps
        at = p["at_steps"] or (K // 4, K // 2, 3 * K // 4, K)
        traj = solve_full_model(model, model.initial_condition(), K, cfg.newton)
        st = analysis.locality_study(traj, p["w"], p["n"], [k - 1 for k in at], p["global_stride"])
        series("global", st.global_sv)
        for k in at:
            series(f"local_step{k}", st.local_sv[k - 1])
            if k - 1 in st.local_residual:
                series(f"residual_step{k}", st.local_residual[k - 1])
        return written

    U, pts, U_bar, F = analysis.local_spaces(model, p["n"], p["w"], p["span"], cfg.seed, cfg.newton)
    if kind == "coherence":
        rep = analysis.verify_lemma_residual_coherence(U, U_bar, pts, F_tilde=U_bar.T @ F)
        series("gamma_U", analysis.local_coherence(U).sorted_values)
        series("gamma_Ubar", analysis.local_coherence(U_bar).sorted_values)
        series("residual", rep.sorted_residual)
        series("bound", rep.bound[rep.order])
        labels = ("Lambda", "F_norm2", "max_violation_ratio", "top_decile_energy", "localized")
        vals = [rep.Lambda, rep.F_norm2, rep.max_violation_ratio, rep.top_decile_energy, float(rep.localized)]
        path = out / f"{kind}_summary.csv"
        io.write_rows_csv(path, ("quantity", "value"), list(zip(labels, vals)), h)
        written.append(path)
    else:  # bounds
        ranks = p["ranks"] or tuple(range(1, p["n"] + 1))
        res = analysis.adaptation_error_study(U, pts, U_bar, F, p["m_values"], ranks)
        for r in ranks:
            series(f"distance_r{r}", res["distance"][r], res["m"])
            series(f"bound_r{r}", res["bound"][r], res["m"])
        series("residual_bound", res["residual_bound"], res["m"])
    return written


def cmd_study(args):
    cfg = load_config(args.config)
    for path in run_study(cfg, args.kind, args.out):
        print(path)
    return EXIT_OK


def cmd_compare(args):
    try:
        ref = io.read_trajectory(args.ref)
        tests = [(t, io.read_trajectory(t)) for t in args.test]
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    for name, traj in tests:
        try:
            err = compute_error(ref, traj, args.every)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
        print(f"{name},{io.fmt(err)}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="aadeim", description="Adaptive reduced models with adaptive sampling.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one configured run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timings", action="store_true", help="write wall-clock phase times (not reproducible)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("study", help="analysis studies")
    p.add_argument("--kind", required=True, choices=["locality", "coherence", "appendixA", "bounds"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("compare", help="relative errors against a reference trajectory")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True, nargs="+")
    p.add_argument("--every", type=int, default=None, help="use every k-th column")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AadeimError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
