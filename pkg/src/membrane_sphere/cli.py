"""
Command-line driver.

Subcommands: relax, gamma-study, axisym, energy, selftest.
Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 selftest failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .axisym import cap_alpha, two_cap_flow
from .config import ConfigError, build_initial, capset_from, load_config
from .energetics import energy_diffuse, energy_J, energy_K, energy_reduced
from .flow import FlowDivergence, FlowParams, StepFailure, run_flow
from .operators import green_of_projection
from .selftest import run_selftest
from .spectral import build_grid
from .studies import check_resolvable, gamma_study, jump_study, sharp_vs_diffuse

log = logging.getLogger("membrane_sphere")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFTEST = 0, 1, 2, 3


def _outdir(cfg, args) -> Path:
    d = Path(args.out or cfg.outputs.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _meta(cfg, **extra):
    m = dict(cfg.flat())
    m.update(extra)
    return m


def cmd_relax(cfg, args) -> int:
    out = _outdir(cfg, args)
    grid = build_grid(cfg.model.R, cfg.L_max, cfg.oversample, cfg.fft_size)
    check_resolvable(cfg.model.epsilon, grid)
    phi0 = build_initial(cfg, grid)
    fp = cfg.flow
    if cfg.outputs.snapshot_every:
        fp = replace(fp, snapshot_every=cfg.outputs.snapshot_every)
    fmts = set(cfg.outputs.formats)

    def snapshot(state):
        tag = f"{state.step_count:08d}"
        if "txt" in fmts:
            io.write_snapshot_text(out / f"phi_{tag}.txt", state.phi)
        if "vtk" in fmts:
            io.write_vtk(out / f"fields_{tag}.vtk", {"phi": state.phi, "u": state.u})

    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        diag, state = run_flow(phi0, cfg.model, fp, on_snapshot=snapshot if fmts & {"txt", "vtk"} else None)
        message = diag.status
    except (FlowDivergence, StepFailure) as exc:
        diag, state, message, status = exc.diagnostics, exc.state, str(exc), EXIT_NUMERIC
        log.error("flow failed: %s", exc)
    wall = time.perf_counter() - t0
    io.write_csv(out / "diagnostics.csv", diag.COLUMNS, diag.UNITS, diag.rows(), _meta(cfg))
    summary = {"status": message, "wall_time_s": wall}
    if state is not None:
        io.save_checkpoint(out / "final.ckpt", state, cfg.model)
        summary.update(
            t=state.t,
            steps=state.step_count,
            E_reduced=energy_reduced(state.phi, cfg.model),
            J_eps=energy_J(state.phi, cfg.model),
            K=energy_K(state.phi, cfg.model),
            mass=state.phi.mean(),
            lam=state.lam,
            rhs_norm=state.rhs_norm,
            rejected=diag.rejected if diag is not None else 0,
        )
        if diag is not None and diag.el is not None:
            summary["el_residuals"] = list(diag.el)
    io.write_json(out / "summary.json", summary)
    print(f"relax: {message} after {summary.get('steps', 0)} steps, t = {summary.get('t', float('nan')):.6g}")
    return status


def _eps_list(args, cfg):
    eps = args.eps if args.eps else cfg.get_extra("study.eps", (0.1, 0.05, 0.025))
    if not isinstance(eps, (tuple, list)):
        eps = (eps,)
    return [float(e) for e in eps]


def cmd_gamma_study(cfg, args) -> int:
    out = _outdir(cfg, args)
    eps = _eps_list(args, cfg)
    L_list = cfg.get_extra("study.L_max")
    if L_list is not None and not isinstance(L_list, tuple):
        L_list = (L_list,)
    if L_list is not None and len(L_list) != len(eps):
        raise ConfigError("study.L_max needs one entry per eps")
    capset = capset_from(cfg.initial)
    try:
        rows = gamma_study(capset, cfg.model, eps, L_list, cfg.oversample, cfg.fft_size)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cols = list(rows[0])
    units = ["length" if c == "eps" else "1" if c.startswith(("rate", "L_max")) else "energy" for c in cols]
    io.write_csv(out / "gamma_study.csv", cols, units, [[r[c] for c in cols] for r in rows], _meta(cfg))
    for r in rows:
        print(f"eps = {r['eps']:<8g} err_J = {r['err_J']:.3e} (rate {r['rate_J']:.2f})  err_E = {r['err_E']:.3e}")
    return EXIT_OK


def cmd_axisym(cfg, args) -> int:
    out = _outdir(cfg, args)
    mode = args.mode or cfg.get_extra("axisym.mode", "flow")
    capset = capset_from(cfg.initial)
    p = cfg.model
    if cfg.get_extra("axisym.match_alpha", True):
        p = p.with_(alpha=cap_alpha(capset))
    L_series = int(cfg.get_extra("axisym.L_series", 1024))
    sharp_dt = float(cfg.get_extra("axisym.dt", 1e-2))
    t_end = float(cfg.get_extra("axisym.t_end", cfg.flow.t_end))
    meta = _meta(cfg, **{"axisym.alpha_used": p.alpha, "axisym.mode": mode})
    status = EXIT_OK
    if mode == "flow":
        tr = two_cap_flow(capset, p, sharp_dt, t_end, L_series=L_series)
        n = tr.angles.shape[1]
        cols = ["t"] + [f"theta_{i}" for i in range(n)] + ["E_SI", "alpha"]
        units = ["time"] + ["rad"] * n + ["energy", "1"]
        rows = [[t, *a, e, al] for t, a, e, al in zip(tr.t, tr.angles, tr.energy, tr.alpha)]
        io.write_csv(out / "trajectory.csv", cols, units, rows, {**meta, "status": tr.status})
        print(f"axisym flow: {tr.status} at t = {tr.t[-1]:.6g}, angles {np.array2string(tr.angles[-1], precision=6)}")
        if tr.status == "energy_increase":
            status = EXIT_NUMERIC
    elif mode == "compare":
        times = cfg.get_extra("axisym.times", tuple(t_end * k / 5 for k in range(1, 6)))
        times = times if isinstance(times, tuple) else (times,)
        rows, tr = sharp_vs_diffuse(
            capset, p, cfg.L_max, times, sharp_dt=sharp_dt, L_series=L_series, oversample=cfg.oversample, fft_size=cfg.fft_size
        )
        cols = list(rows[0])
        units = ["time" if c.startswith("t") else "rad" for c in cols]
        io.write_csv(out / "compare.csv", cols, units, [[r[c] for c in cols] for r in rows], meta)
        worst = max(r["max_diff"] for r in rows)
        tol = 2 * p.epsilon / p.R
        print(f"axisym compare: max angle difference {worst:.4g} rad (2 eps / R = {tol:.4g})")
    elif mode == "jump":
        rows = jump_study(capset, p, _eps_list(args, cfg))
        cols = list(rows[0])
        units = ["1"] * len(cols)
        io.write_csv(out / "jump_study.csv", cols, units, [[r[c] for c in cols] for r in rows], meta)
        for r in rows:
            print(f"eps = {r['eps']:<8g} [lap u]/(-2 Lambda) = {r['ratio']:.4f}  [u] = {r['jump_u']:.2e}  [du] = {r['jump_grad']:.2e}")
    else:
        raise ConfigError(f"unknown axisym mode {mode!r}")
    return status


def cmd_energy(args) -> int:
    try:
        state, params = io.load_checkpoint(args.checkpoint)
    except (OSError, io.CheckpointError) as exc:
        raise ConfigError(str(exc)) from exc
    u = green_of_projection(state.phi, params)
    rep = energy_diffuse(u, state.phi, params)
    report = rep.as_dict()
    report.update(E_reduced=energy_reduced(state.phi, params), t=state.t, steps=state.step_count, params=params.as_dict())
    if args.json:
        io.write_json(args.json, report)
    for k in ("total", "bending", "dirichlet", "potential", "line", "coupling_K", "E_reduced"):
        print(f"{k:<10} {report[k]!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="membrane-sphere", description=__doc__.strip().splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", "-c", help="configuration file (section.key = value lines)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration key")
        p.add_argument("--out", "-o", help="output directory (overrides outputs.directory)")

    common(sub.add_parser("relax", help="run the conserved gradient flow"))
    g = sub.add_parser("gamma-study", help="convergence table of the diffuse energy as eps decreases")
    common(g)
    g.add_argument("--eps", type=float, nargs="+", help="decreasing list of interface widths")
    a = sub.add_parser("axisym", help="sharp two-cap flow, comparison with a full run, or jump study")
    common(a)
    a.add_argument("--mode", choices=("flow", "compare", "jump"))
    a.add_argument("--eps", type=float, nargs="+", help="eps sweep for --mode jump")
    e = sub.add_parser("energy", help="energy report for a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--json", help="also write the report as JSON")
    s = sub.add_parser("selftest", help="run the invariant suite")
    s.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "selftest":
            return EXIT_OK if run_selftest(args.seed) else EXIT_SELFTEST
        if args.command == "energy":
            return cmd_energy(args)
        cfg = load_config(args.config, args.set)
        handler = {"relax": cmd_relax, "gamma-study": cmd_gamma_study, "axisym": cmd_axisym}[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlowDivergence, StepFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # resolution and geometry checks raise ValueError before any work
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
