"""
Conserved Allen-Cahn gradient flow of the reduced energy.

The height is slaved to the phase field, u = G(P phi), and phi evolves by::

    beta eps phi_t = b eps Lap phi - (b/eps) W'(phi)
                     - kappa Lambda (Lap + 2/R^2) u - kappa Lambda^2 phi + lambda

with lambda the spatially constant multiplier that keeps mean(phi) = alpha.

Time stepping
-------------
First-order IMEX: b eps Lap phi and -kappa Lambda^2 phi are implicit (diagonal
in spectral space); W'(phi) and the height coupling are explicit.  The (0, 0)
coefficient of phi is pinned to alpha sqrt(4 pi), so mass is conserved to
round-off and lambda is recovered afterwards.

Every step is checked against the reduced energy.  The energy change is
accumulated in difference form: for an update d with grid values delta,

    dE = R^2 sum q d (2 c + d)
         + (b/eps) int [delta W'(g) + delta^2 (3 g^2 - 1)/2 + g delta^3 + delta^4/4]

which stays accurate when d is tiny, unlike the difference of two full
energies.  A step with dE > energy_tol is rejected and retried with half the
time step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .energetics import double_well, double_well_prime, energy_K, quadratic_weights
from .operators import ModelParams, green_multiplier, green_of_projection, height_residual, shifted_laplacian
from .spectral import (
    GridField,
    SpectralField,
    _analyze_batch,
    _synth_batch,
    gradient_sq_integral,
    integrate,
    laplace_beltrami,
    synthesize,
)

__all__ = [
    "FlowParams",
    "FlowState",
    "FlowDiagnostics",
    "FlowDivergence",
    "StepFailure",
    "flow_rhs",
    "step_imex",
    "run_flow",
    "el_residuals",
    "initial_state",
]

SQRT4PI = math.sqrt(4.0 * math.pi)


class FlowDivergence(RuntimeError):
    """max |phi| exceeded the divergence threshold."""

    def __init__(self, msg, diagnostics=None, state=None):
        super().__init__(msg)
        self.diagnostics = diagnostics
        self.state = state


class StepFailure(RuntimeError):
    """No acceptable step was found above the minimum time step."""

    def __init__(self, msg, diagnostics=None, state=None):
        super().__init__(msg)
        self.diagnostics = diagnostics
        self.state = state


@dataclass(frozen=True)
class FlowParams:
    """Time-stepping controls.

    Attributes
    ----------
    dt : float
        Initial time step.
    t_end : float
        Final time.
    dt_min, dt_max : float
        Bounds for the adaptive step.
    energy_tol : float
        Permitted energy increase per accepted step.
    snapshot_every : int
        Call the snapshot hook every this many steps (0 disables).
    stop_tol : float
        Stop once max |rhs| on the grid falls below this.
    max_steps : int or None
        Hard cap on the number of accepted steps.
    grow : float
        Factor applied to dt after an accepted step (capped at dt_max).
    diverge_at : float
        Abort when max |phi| exceeds this.
    """

    dt: float = 1e-3
    t_end: float = 10.0
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    energy_tol: float = 0.0
    snapshot_every: int = 0
    stop_tol: float = 1e-7
    max_steps: int | None = None
    grow: float = 1.0
    diverge_at: float = 10.0

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt <= dt_max")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.energy_tol < 0:
            raise ValueError("energy_tol must be nonnegative")
        if self.grow < 1.0:
            raise ValueError("grow must be >= 1")


@dataclass(frozen=True)
class FlowState:
    """One point of a trajectory.

    ``values`` caches the grid values of ``phi``; ``energy`` is the reduced
    energy accumulated from exact per-step increments; ``dt`` is the step
    size to try next.
    """

    phi: SpectralField
    u: SpectralField
    lam: float
    t: float
    step_count: int
    dt: float
    energy: float
    values: np.ndarray = field(repr=False)
    rhs_norm: float = float("nan")


@dataclass
class FlowDiagnostics:
    """Per-step time series; rows strictly increasing in t."""

    t: list = field(default_factory=list)
    E_reduced: list = field(default_factory=list)
    J_eps: list = field(default_factory=list)
    K: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    rhs_norm: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    max_abs_phi: list = field(default_factory=list)
    status: str = "running"
    rejected: int = 0
    el: tuple = (float("nan"), float("nan"))

    COLUMNS = ("t", "E_reduced", "J_eps", "K", "mass", "lambda", "rhs_norm", "dt")
    UNITS = ("time", "energy", "energy", "energy", "1", "energy/area", "1/time", "time")

    def append(self, **row):
        for k, v in row.items():
            getattr(self, k).append(float(v))

    def rows(self):
        return list(zip(self.t, self.E_reduced, self.J_eps, self.K, self.mass, self.lam, self.rhs_norm, self.dt))

    def __len__(self):
        return len(self.t)


# --------------------------------------------------------------------------
# spectral building blocks


def _operators(grid, params: ModelParams):
    """Diagonal factors: implicit D, explicit height coupling C, energy weights q."""
    R2 = grid.R ** 2
    lam = (grid.degrees * (grid.degrees + 1)).astype(float)
    D = params.b * params.epsilon * lam / R2 + params.kappa * params.Lambda ** 2
    C = params.kappa * params.Lambda * (lam - 2.0) / R2 * green_multiplier(grid, params)
    tri = grid.triangle
    return np.where(tri, D, 0.0), np.where(tri, C, 0.0), quadratic_weights(grid, params)


def _check_mean(phi: SpectralField, alpha: float, tol: float = 1e-12):
    if abs(phi.mean() - alpha) > tol * max(1.0, abs(alpha)):
        raise ValueError(f"mean of phi is {phi.mean():.3e}, expected {alpha:.3e}")


def _explicit(coeffs, wprime_coeffs, C, params):
    return -(params.b / params.epsilon) * wprime_coeffs + C * coeffs


def flow_rhs(phi: SpectralField, params: ModelParams):
    """Right-hand side phi_t of the conserved flow and its multiplier.

    Returns
    -------
    rhs : SpectralField
        Zero (0, 0) coefficient, so int rhs = 0 exactly.
    lam : float
        (b/eps) mean W'(phi) + kappa Lambda^2 alpha.
    u : SpectralField
        G(P phi).
    """
    _check_mean(phi, params.alpha)
    g = phi.grid
    D, C, _ = _operators(g, params)
    wp = _analyze_batch(g, double_well_prime(synthesize(phi).values)[None])[0]
    bracket = _explicit(phi.coeffs, wp, C, params) - D * phi.coeffs
    L = g.L_max
    lam = -bracket[0, L] / SQRT4PI
    bracket[0, L] = 0.0
    rhs = SpectralField(g, bracket / (params.beta * params.epsilon))
    return rhs, float(lam), green_of_projection(phi, params)


def _reduced_energy_from(coeffs, values, grid, params, q):
    quad = grid.R ** 2 * math.fsum((q * coeffs * coeffs).ravel())
    return quad + params.b / params.epsilon * integrate(double_well(values), grid)


def initial_state(phi0: SpectralField, params: ModelParams, dt: float = 1e-3, mean_tol: float = 1e-6) -> FlowState:
    """Wrap phi0 as a flow state, re-projecting its mean onto alpha if close."""
    if abs(phi0.mean() - params.alpha) > mean_tol:
        raise ValueError(f"initial mean {phi0.mean():.6g} differs from alpha = {params.alpha:.6g}")
    c = phi0.coeffs.copy()
    c[0, phi0.grid.L_max] = params.alpha * SQRT4PI
    phi = SpectralField(phi0.grid, c)
    values = synthesize(phi).values
    q = quadratic_weights(phi.grid, params)
    E = _reduced_energy_from(c, values, phi.grid, params, q)
    return FlowState(
        phi=phi,
        u=green_of_projection(phi, params),
        lam=float("nan"),
        t=0.0,
        step_count=0,
        dt=dt,
        energy=E,
        values=values,
    )


class _Stepper:
    """Caches the diagonal operators for one (grid, params) pair."""

    def __init__(self, grid, params: ModelParams):
        self.grid = grid
        self.params = params
        self.D, self.C, self.q = _operators(grid, params)
        self.L = grid.L_max
        self.be = params.beta * params.epsilon

    def prepare(self, state: FlowState):
        p = self.params
        c = state.phi.coeffs
        wpv = double_well_prime(state.values)
        wp = _analyze_batch(self.grid, wpv[None])[0]
        N = _explicit(c, wp, self.C, p)
        lam = (p.b / p.epsilon * wp[0, self.L] + p.kappa * p.Lambda ** 2 * c[0, self.L]) / SQRT4PI
        rhs = N - self.D * c
        rhs[0, self.L] = 0.0
        rhs /= self.be
        rhs_norm = float(np.max(np.abs(_synth_batch(self.grid, rhs[None])[0])))
        return N, wpv, lam, rhs_norm

    def trial(self, state: FlowState, N, dt):
        c = state.phi.coeffs
        r = dt / self.be
        new = (c + r * N) / (1.0 + r * self.D)
        new[0, self.L] = self.params.alpha * SQRT4PI
        return new

    def increment(self, state, d, delta, wpv):
        p = self.params
        g0 = state.values
        quad = self.grid.R ** 2 * math.fsum((self.q * d * (2.0 * state.phi.coeffs + d)).ravel())
        d2 = delta * delta
        dens = delta * wpv + d2 * (0.5 * (3.0 * g0 * g0 - 1.0) + delta * (g0 + 0.25 * delta))
        return quad + p.b / p.epsilon * integrate(dens, self.grid)

    def step(self, state: FlowState, fp: FlowParams, prepared=None, t_stop=None):
        """One accepted step; returns (new_state, rejections, dt_taken).

        With ``t_stop`` the step is shortened so as not to pass that time;
        the nominal step size carried in the state is unaffected.
        """
        N, wpv, lam, _ = prepared if prepared is not None else self.prepare(state)
        dt = min(state.dt, fp.dt_max)
        clipped = t_stop is not None and state.t + dt >= t_stop
        if clipped:
            dt = max(t_stop - state.t, fp.dt_min)
        rejected = 0
        while True:
            new = self.trial(state, N, dt)
            d = new - state.phi.coeffs
            # single-field synthesis so cached values match a reloaded state bit for bit
            vals = _synth_batch(self.grid, new[None])[0]
            delta = _synth_batch(self.grid, d[None])[0]
            dE = self.increment(state, d, delta, wpv)
            if dE <= fp.energy_tol:
                break
            rejected += 1
            clipped = False
            dt *= 0.5
            if dt < fp.dt_min:
                raise StepFailure(f"time step fell below dt_min = {fp.dt_min:g} at t = {state.t:g}", state=state)
        phi = SpectralField(self.grid, new)
        new_state = FlowState(
            phi=phi,
            u=green_of_projection(phi, self.params),
            lam=lam,
            t=t_stop if clipped else state.t + dt,
            step_count=state.step_count + 1,
            dt=min((dt if rejected else state.dt) * fp.grow, fp.dt_max),
            energy=state.energy + dE,
            values=vals,
        )
        return new_state, rejected, dt


def step_imex(state: FlowState, params: ModelParams, flow_params: FlowParams) -> FlowState:
    """Advance one accepted IMEX step (with energy-based step rejection)."""
    _check_mean(state.phi, params.alpha)
    st = _Stepper(state.phi.grid, params)
    prepared = st.prepare(state)
    new_state, _, _ = st.step(state, flow_params, prepared)
    return new_state


def _row(diag, state, params, lam, rhs_norm, dt, q):
    g = state.phi.grid
    J = 0.5 * params.b * params.epsilon * gradient_sq_integral(state.phi) + params.b / params.epsilon * integrate(
        double_well(state.values), g
    )
    K = energy_K(state.phi, params, form="reformulated")
    diag.append(
        t=state.t,
        E_reduced=state.energy,
        J_eps=J,
        K=K,
        mass=state.phi.mean(),
        lam=lam,
        rhs_norm=rhs_norm,
        dt=dt,
        max_abs_phi=float(np.max(np.abs(state.values))),
    )


def run_flow(
    phi0: SpectralField,
    params: ModelParams,
    flow_params: FlowParams,
    on_snapshot=None,
    state: FlowState | None = None,
):
    """Integrate the flow until t_end, convergence, max_steps or failure.

    Each diagnostics row describes the state at time t together with the
    residual max |rhs| and multiplier evaluated there; ``dt`` is the step
    taken to reach t (0 for the first row).

    Parameters
    ----------
    on_snapshot : callable, optional
        Called as ``on_snapshot(state)`` every ``snapshot_every`` steps and at
        the end.
    state : FlowState, optional
        Resume from this state instead of ``phi0``.

    Returns
    -------
    FlowDiagnostics, FlowState
    """
    fp = flow_params
    if state is None:
        state = initial_state(phi0, params, fp.dt)
    st = _Stepper(state.phi.grid, params)
    diag = FlowDiagnostics()
    prepared = st.prepare(state)
    last_dt = 0.0
    while True:
        lam, rhs_norm = prepared[2], prepared[3]
        state = replace(state, lam=lam, rhs_norm=rhs_norm)
        _row(diag, state, params, lam, rhs_norm, last_dt, st.q)
        if fp.snapshot_every and state.step_count % fp.snapshot_every == 0 and on_snapshot is not None:
            on_snapshot(state)
        if diag.max_abs_phi[-1] > fp.diverge_at:
            diag.status = "diverged"
            raise FlowDivergence(f"max |phi| exceeded {fp.diverge_at:g} at t = {state.t:g}", diag, state)
        if rhs_norm < fp.stop_tol:
            diag.status = "converged"
            break
        if fp.t_end - state.t <= 1e-12 * max(1.0, fp.t_end):
            diag.status = "t_end"
            break
        if fp.max_steps is not None and state.step_count >= fp.max_steps:
            diag.status = "max_steps"
            break
        try:
            state, rej, last_dt = st.step(state, fp, prepared, t_stop=fp.t_end)
        except StepFailure as exc:
            diag.status = "step_failure"
            exc.diagnostics = diag
            raise
        diag.rejected += rej
        prepared = st.prepare(state)
    diag.el = el_residuals(state, params)
    if on_snapshot is not None and not (fp.snapshot_every and state.step_count % fp.snapshot_every == 0):
        on_snapshot(state)
    return diag, state


def el_residuals(state: FlowState, params: ModelParams, projected: bool = True):
    """Max-norm residuals of the two stationarity equations.

    r1 = |(b/eps)(W'(phi) - mean W'(phi)) - b eps Lap phi
          + kappa Lambda (Lap + 2/R^2) u + kappa Lambda^2 (phi - alpha)|
    r2 = |(Lap + 2/R^2)(kappa Lap u - sigma u + kappa Lambda (phi - alpha))|

    With ``projected`` (default) W'(phi) is replaced by its degree <= L_max
    part, the quantity the discrete flow drives to zero, so that
    r1 = beta eps max|rhs|.  With ``projected=False`` W'(phi) is taken
    pointwise and r1 also contains the spatial truncation error.
    """
    phi, u = state.phi, state.u
    g = phi.grid
    vals = synthesize(phi).values
    wp = double_well_prime(vals)
    if projected:
        wp = synthesize(SpectralField(g, _analyze_batch(g, wp[None])[0])).values
    wp_mean = integrate(wp, g) / g.area
    lin = (
        laplace_beltrami(phi) * (-params.b * params.epsilon)
        + shifted_laplacian(u) * (params.kappa * params.Lambda)
        + phi * (params.kappa * params.Lambda ** 2)
    )
    r1_vals = params.b / params.epsilon * (wp - wp_mean) + synthesize(lin).values
    r1_vals -= params.kappa * params.Lambda ** 2 * params.alpha
    r1 = float(np.max(np.abs(r1_vals)))
    r2 = height_residual(u, phi, params)
    return r1, r2
