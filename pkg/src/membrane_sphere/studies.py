"""
Experiment drivers shared by the command line, scripts and acceptance tests.

Each driver returns plain rows (lists of dicts) so callers decide how to
persist them.  Sweeps can run members on a thread pool; results are always
merged in the order of the input list.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import initial as ini
from .axisym import CapSet, find_interfaces, jump_extract, series_energy_detail, two_cap_flow, zonal_profile
from .energetics import energy_J, energy_K, energy_reduced
from .flow import FlowParams, initial_state, run_flow
from .operators import ModelParams
from .spectral import build_grid

__all__ = [
    "worker_count",
    "resolution_for",
    "check_resolvable",
    "observed_rates",
    "gamma_study",
    "relax_caps",
    "jump_study",
    "diffuse_cap_angles",
    "sharp_vs_diffuse",
]


def worker_count() -> int:
    """Worker cap from the MEMBRANE_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("MEMBRANE_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def resolution_for(epsilon: float, R: float = 1.0, oversample: float = 2.0) -> int:
    """Smallest power-of-two L_max with epsilon >= 4 pi R / n_theta."""
    need = 4.0 * math.pi * R / epsilon
    L = 8
    while math.ceil(oversample * (L + 1) - 1e-12) < need:
        L *= 2
    return L


def check_resolvable(epsilon: float, grid) -> None:
    if epsilon < 4.0 * math.pi * grid.R / grid.n_theta * (1 - 1e-12):
        raise ValueError(
            f"epsilon = {epsilon:g} is not resolved by n_theta = {grid.n_theta} (need eps >= 4 pi R / n_theta)"
        )


def observed_rates(eps, errs):
    """log(e_k / e_{k+1}) / log(eps_k / eps_{k+1}) for successive pairs."""
    out = [float("nan")]
    for k in range(1, len(eps)):
        a, b = errs[k - 1], errs[k]
        if a > 0 and b > 0:
            out.append(math.log(a / b) / math.log(eps[k - 1] / eps[k]))
        else:
            out.append(float("nan"))
    return out


def gamma_study(capset: CapSet, params: ModelParams, eps_list, L_list=None, oversample=2.0, fft_size="smooth"):
    """Evaluate J_eps, K and the reduced energy of tanh profiles across eps.

    Targets: the line energy b_hat |gamma|, K(chi) and the reduced sharp
    energy, the latter two from the converged Legendre series.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if L_list is None:
        L_list = [resolution_for(e, params.R, oversample) for e in eps_list]
    detail = series_energy_detail(capset, params, 4096)
    line = detail.line
    K_chi = detail.converged - line
    E_SI = detail.converged
    p0 = params.with_(Lambda=0.0)

    def one(args):
        eps, L = args
        g = build_grid(params.R, L, oversample, fft_size)
        check_resolvable(eps, g)
        p = params.with_(epsilon=eps)
        phi = ini.tanh_caps(g, capset, eps, alpha=p.alpha)
        J = energy_J(phi, p)
        K = energy_K(phi, p, form="reformulated")
        E = energy_reduced(phi, p)
        E0 = energy_reduced(phi, p0.with_(epsilon=eps))
        return {
            "eps": eps,
            "L_max": L,
            "J_eps": J,
            "K": K,
            "E_reduced": E,
            "E_reduced_Lambda0": E0,
            "line_target": line,
            "K_chi": K_chi,
            "E_SI": E_SI,
            "err_J": abs(J - line) / line,
            "err_K": abs(K - K_chi),
            "err_E": abs(E - E_SI),
            "err_E_Lambda0": abs(E0 - line) / line,
        }

    rows = _map(one, list(zip(eps_list, L_list)))
    for key in ("err_J", "err_K", "err_E", "err_E_Lambda0"):
        rates = observed_rates(eps_list, [r[key] for r in rows])
        for r, q in zip(rows, rates):
            r["rate_" + key[4:]] = q
    return rows


def relax_caps(capset, params, L, flow_params, oversample=2.0, fft_size="smooth"):
    """Relax tanh data for ``capset`` with the diffuse flow; returns (diag, state)."""
    g = build_grid(params.R, L, oversample, fft_size)
    phi0 = ini.tanh_caps(g, capset, params.epsilon, alpha=params.alpha)
    return run_flow(phi0, params, flow_params)


def jump_study(capset, params: ModelParams, eps_list, L_list=None, flow_params=None, **jump_kw):
    """Relax an axisymmetric cap for each eps and extract the interface jumps."""
    eps_list = [float(e) for e in eps_list]
    if L_list is None:
        L_list = [resolution_for(e, params.R) for e in eps_list]

    def one(args):
        eps, L = args
        p = params.with_(epsilon=eps)
        fp = flow_params
        if fp is None:
            dt = 0.5 * p.beta * eps**2 / p.b
            fp = FlowParams(dt=dt, dt_max=dt, t_end=50.0, stop_tol=1e-6, max_steps=20000)
        diag, state = relax_caps(capset, p, L, fp)
        j = jump_extract(state, p, **jump_kw)
        return {
            "eps": eps,
            "L_max": L,
            "steps": state.step_count,
            "status": diag.status,
            "rhs_norm": diag.rhs_norm[-1],
            "theta_star": j.theta_star,
            "jump_lap": j.jump_lap,
            "ratio": j.jump_lap / (-2.0 * p.Lambda) if p.Lambda > 0 else float("nan"),
            "jump_grad": j.jump_grad,
            "jump_u": j.jump_u,
            "u_scale": j.u_scale,
        }

    return _map(one, list(zip(eps_list, L_list)))


def diffuse_cap_angles(phi, capset_template: CapSet) -> np.ndarray:
    """Cap angles of a diffuse state from the zeros of its zonal profile.

    Roots are matched to the template caps: the northernmost root belongs to
    a north cap, the southernmost to a south cap.
    """
    roots = find_interfaces(zonal_profile(phi))
    if roots.size < len(capset_template.caps):
        raise ValueError("fewer interfaces than caps")
    out = []
    for cap in capset_template.caps:
        out.append(roots[0] if cap.pole == "north" else math.pi - roots[-1])
    return np.array(out)


def sharp_vs_diffuse(
    capset: CapSet,
    params: ModelParams,
    L: int,
    times,
    sharp_dt: float = 1e-2,
    flow_dt: float | None = None,
    L_series: int = 1024,
    oversample: float = 2.0,
    fft_size: str = "smooth",
):
    """Track cap angles of the sharp ODE and of the diffuse flow at given times."""
    times = [float(t) for t in times]
    t_end = max(times)
    traj = two_cap_flow(capset, params, sharp_dt, t_end, L_series=L_series)
    g = build_grid(params.R, L, oversample, fft_size)
    phi0 = ini.tanh_caps(g, capset, params.epsilon, alpha=params.alpha)
    if flow_dt is None:
        flow_dt = 0.5 * params.beta * params.epsilon**2 / params.b
    fp = FlowParams(dt=flow_dt, dt_max=flow_dt, t_end=t_end, stop_tol=0.0)
    state = initial_state(phi0, params, flow_dt)
    rows = []
    for t in sorted(times):
        if t > state.t:
            _, state = run_flow(None, params, replace(fp, t_end=t), state=state)
        if t > traj.t[-1] + 1e-12:
            raise ValueError(f"sharp trajectory ended ({traj.status}) before t = {t:g}")
        sharp = np.array([np.interp(t, traj.t, traj.angles[:, i]) for i in range(traj.angles.shape[1])])
        diffuse = diffuse_cap_angles(state.phi, capset)
        rows.append(
            {
                "t": t,
                **{f"sharp_{i}": float(a) for i, a in enumerate(sharp)},
                **{f"diffuse_{i}": float(a) for i, a in enumerate(diffuse)},
                "max_diff": float(np.max(np.abs(sharp - diffuse))),
            }
        )
    return rows, traj
