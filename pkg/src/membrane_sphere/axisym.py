"""
Axisymmetric cap configurations and a Legendre-series oracle.

Everything here works with zonal (m = 0) data and its own Legendre recurrence,
independently of the 2-D transforms in :mod:`membrane_sphere.spectral`, so the
two code paths can be compared.

Sign conventions
----------------
chi = +1 inside every listed cap (phase 2) and -1 elsewhere (phase 1).  A
positive growth velocity W moves a cap edge away from the cap's pole, so the
cap grows; for a north cap d(theta0)/dt = W / R.  Geodesic curvature of a cap
edge is cot(theta0) / R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .operators import ModelParams

__all__ = [
    "Cap",
    "CapSet",
    "AxisymField",
    "legendre_table",
    "cap_alpha",
    "cap_perimeter",
    "geodesic_curvature",
    "chi_legendre",
    "green_axisym",
    "sharp_energy_series",
    "series_energy_detail",
    "explicit_projection",
    "one_sided_traces",
    "cap_forces",
    "cap_velocities",
    "TwoCapTrajectory",
    "two_cap_flow",
    "zonal_profile",
    "find_interfaces",
    "JumpResult",
    "jump_extract",
]


@dataclass(frozen=True)
class Cap:
    pole: str
    theta0: float

    def __post_init__(self):
        if self.pole not in ("north", "south"):
            raise ValueError("pole must be 'north' or 'south'")
        if not (0.0 < self.theta0 <= math.pi / 2):
            raise ValueError("cap angle must lie in (0, pi/2]")

    @property
    def edge_colatitude(self) -> float:
        return self.theta0 if self.pole == "north" else math.pi - self.theta0

    def area(self, R: float = 1.0) -> float:
        return 2.0 * math.pi * R * R * (1.0 - math.cos(self.theta0))

    def perimeter(self, R: float = 1.0) -> float:
        return 2.0 * math.pi * R * math.sin(self.theta0)


@dataclass(frozen=True)
class CapSet:
    """Disjoint polar caps forming phase 2.  At most one cap per pole."""

    caps: tuple

    def __post_init__(self):
        caps = tuple(self.caps)
        object.__setattr__(self, "caps", caps)
        if not caps:
            raise ValueError("a cap set needs at least one cap")
        poles = [c.pole for c in caps]
        if len(set(poles)) != len(poles):
            raise ValueError("at most one cap per pole")
        if len(caps) == 2 and caps[0].theta0 + caps[1].theta0 >= math.pi:
            raise ValueError("caps overlap")

    @classmethod
    def single(cls, theta0: float, pole: str = "north") -> "CapSet":
        return cls((Cap(pole, theta0),))

    @classmethod
    def two(cls, theta_north: float, theta_south: float) -> "CapSet":
        return cls((Cap("north", theta_north), Cap("south", theta_south)))

    def with_angles(self, angles) -> "CapSet":
        return CapSet(tuple(Cap(c.pole, float(a)) for c, a in zip(self.caps, angles)))

    @property
    def angles(self) -> np.ndarray:
        return np.array([c.theta0 for c in self.caps])

    def area(self, R: float = 1.0) -> float:
        return sum(c.area(R) for c in self.caps)

    def perimeter(self, R: float = 1.0) -> float:
        return sum(c.perimeter(R) for c in self.caps)

    def indicator_at(self, theta):
        """chi at colatitude(s) theta; +1 on a cap edge."""
        theta = np.asarray(theta, dtype=float)
        inside = np.zeros(theta.shape, dtype=bool)
        for c in self.caps:
            if c.pole == "north":
                inside |= theta <= c.theta0
            else:
                inside |= theta >= math.pi - c.theta0
        out = np.where(inside, 1.0, -1.0)
        return float(out) if out.ndim == 0 else out

    def interface_colatitudes(self) -> np.ndarray:
        return np.array([c.edge_colatitude for c in self.caps])


def legendre_table(L: int, x) -> np.ndarray:
    """Unnormalised Legendre polynomials P_0..P_L at x by Bonnet's recurrence."""
    x = np.asarray(x, dtype=float)
    P = np.empty((L + 1,) + x.shape)
    P[0] = 1.0
    if L >= 1:
        P[1] = x
    for l in range(2, L + 1):
        P[l] = ((2 * l - 1) * x * P[l - 1] - (l - 1) * P[l - 2]) / l
    return P


def _norm(L: int) -> np.ndarray:
    l = np.arange(L + 1)
    return np.sqrt((2 * l + 1) / (4.0 * math.pi))


@dataclass
class AxisymField:
    """f(theta) = sum_l c_l Pbar_l(cos theta) with Pbar_l = sqrt((2l+1)/4pi) P_l.

    ``c`` agrees with the m = 0 column of a 2-D coefficient array.
    """

    c: np.ndarray
    R: float = 1.0

    @property
    def L_max(self) -> int:
        return len(self.c) - 1

    def evaluate(self, theta) -> np.ndarray:
        x = np.cos(np.asarray(theta, dtype=float))
        P = legendre_table(self.L_max, x)
        return np.tensordot(self.c * _norm(self.L_max), P, axes=1)

    def derivative(self, theta) -> np.ndarray:
        """d f / d theta."""
        theta = np.asarray(theta, dtype=float)
        x = np.cos(theta)
        L = self.L_max
        P = legendre_table(L + 1, x)
        # (1 - x^2) P_l' = l (P_{l-1} - x P_l); d/dtheta = -sin(theta) d/dx
        s = np.sin(theta)
        l = np.arange(L + 1).reshape((-1,) + (1,) * x.ndim)
        dPdx_times_s2 = np.zeros_like(P[: L + 1])
        dPdx_times_s2[1:] = l[1:] * (P[:L] - x * P[1 : L + 1])
        return -np.tensordot(self.c * _norm(L), dPdx_times_s2, axes=1) / s

    def laplacian(self) -> "AxisymField":
        l = np.arange(self.L_max + 1)
        return AxisymField(-l * (l + 1) / self.R**2 * self.c, self.R)


def cap_alpha(capset: CapSet) -> float:
    """Mean of chi: (|phase 2| - |phase 1|) / |Gamma|."""
    a2 = capset.area(1.0)
    return (2.0 * a2 - 4.0 * math.pi) / (4.0 * math.pi)


def cap_perimeter(capset: CapSet, R: float = 1.0) -> float:
    return capset.perimeter(R)


def geodesic_curvature(cap: Cap, R: float = 1.0) -> float:
    """cot(theta0)/R: positive for caps smaller than a hemisphere."""
    return math.cos(cap.theta0) / (math.sin(cap.theta0) * R)


def chi_legendre(capset: CapSet, L_max: int, R: float = 1.0) -> AxisymField:
    """Zonal coefficients of chi from exact Legendre antiderivatives.

    Uses int P_l dx = (P_{l+1} - P_{l-1}) / (2l + 1) for l >= 1.
    """
    c = np.zeros(L_max + 1)
    c[0] = -math.sqrt(4.0 * math.pi)
    l = np.arange(1, L_max + 1)
    for cap in capset.caps:
        x0 = math.cos(cap.theta0)
        if cap.pole == "north":
            P = legendre_table(L_max + 1, x0)
            ints = -(P[2:] - P[:-2]) / (2 * l + 1)
            c[0] += 4.0 * math.pi * _norm(0)[0] * (1.0 - x0)
        else:
            x1 = -x0
            P = legendre_table(L_max + 1, x1)
            ints = (P[2:] - P[:-2]) / (2 * l + 1)
            c[0] += 4.0 * math.pi * _norm(0)[0] * (x1 + 1.0)
        c[1:] += 4.0 * math.pi * _norm(L_max)[1:] * ints
    return AxisymField(c, R)


def green_axisym(f: AxisymField, params: ModelParams) -> AxisymField:
    """Apply G o P to zonal data (degrees l <= 1 dropped)."""
    l = np.arange(f.L_max + 1)
    mult = np.zeros(f.L_max + 1)
    mult[2:] = params.kappa * params.Lambda / (params.sigma + params.kappa * l[2:] * (l[2:] + 1) / f.R**2)
    return AxisymField(mult * f.c, f.R)


@dataclass(frozen=True)
class SeriesEnergy:
    truncated: float
    converged: float
    tail: float
    line: float


def series_energy_detail(capset: CapSet, params: ModelParams, L_max: int) -> SeriesEnergy:
    """Reduced sharp energy from the Legendre series.

    ``truncated`` drops int (P chi)^2 beyond L_max, matching a degree-L_max
    2-D computation; it decreases monotonically in L_max.  ``converged`` uses
    int chi^2 - int (P chi)^2 = int (chi - P chi)^2, which needs only degrees
    l <= 1.  ``tail`` estimates the remaining error of ``converged`` assuming
    c_l^2 ~ C / l^2.
    """
    R = params.R
    R2 = R * R
    chi = chi_legendre(capset, L_max, R)
    c = chi.c
    l = np.arange(L_max + 1)
    g = green_axisym(AxisymField(np.ones(L_max + 1), R), params).c
    A = 0.5 * params.kappa * params.Lambda * (params.sigma / params.kappa + 2.0 / R2) * R2
    B = 0.5 * params.kappa * params.Lambda**2
    first = A * math.fsum(g[2:] * c[2:] ** 2)
    high = R2 * math.fsum(c[2:] ** 2)
    low = R2 * math.fsum(c[:2] ** 2)
    line = params.b_hat * capset.perimeter(R)
    truncated = first + B * (4.0 * math.pi * R2 - high) + line
    converged = first + B * low + line
    # tail of sum g_l c_l^2 with g_l ~ kappa Lambda R^2 / (kappa l^2) for large l
    top = l[L_max // 2 :]
    C = float(np.mean(top.astype(float) ** 2 * c[L_max // 2 :] ** 2)) if L_max >= 4 else 0.0
    gl_scale = params.kappa * params.Lambda * R2 / (params.sigma * R2 + params.kappa)
    tail = A * gl_scale * C / (3.0 * L_max**3)
    return SeriesEnergy(truncated, converged, tail, line)


def sharp_energy_series(capset: CapSet, params: ModelParams, L_max: int, converged: bool = False) -> float:
    """Reduced sharp energy K(chi) + b_hat |gamma| from the Legendre series."""
    d = series_energy_detail(capset, params, L_max)
    return d.converged if converged else d.truncated


def explicit_projection(capset: CapSet, R: float = 1.0):
    """Moment form of chi - P chi for axisymmetric caps.

    Returns ``(mean, k)`` with chi - P chi = mean + k cos(theta), where
    mean = int chi / |Gamma| and k = (3/|Gamma|) int chi nu_3.
    """
    area = 4.0 * math.pi * R * R
    mean = cap_alpha(capset)
    m3 = 0.0
    for cap in capset.caps:
        s2 = math.sin(cap.theta0) ** 2
        m3 += (2.0 if cap.pole == "north" else -2.0) * math.pi * R * R * s2
    return mean, 3.0 / area * m3


def one_sided_traces(
    f: AxisymField,
    theta0: float,
    h: float,
    offsets=(2, 4, 8),
):
    """Limits of f at theta0 from below and above by Richardson extrapolation.

    Samples f at theta0 -/+ k h for k in ``offsets`` and extrapolates the
    values to zero offset assuming a smooth expansion in the offset.
    """
    ks = np.asarray(offsets, dtype=float)
    out = []
    for sgn in (-1.0, 1.0):
        vals = f.evaluate(theta0 + sgn * ks * h)
        # polynomial through (k h, value) evaluated at 0
        coef = np.polyfit(ks * h, vals, len(ks) - 1)
        out.append(float(coef[-1]))
    return out[0], out[1]


def cap_forces(
    capset: CapSet,
    params: ModelParams,
    L_series: int = 1024,
    traces: str = "identity",
) -> np.ndarray:
    """Energy released per unit length and per unit growth of each cap.

    force_i = b_hat H_i + 4 kappa Lambda u_i / R^2 + kappa Lambda (Lap u^(1) + Lap u^(2))_i
    with u = G(P chi).  The sum of the one-sided Laplacians is either taken
    from the identity Lap u = (sigma/kappa) u - Lambda P chi
    (``traces="identity"``, giving 2 (sigma/kappa) u + 2 Lambda (chi - P chi))
    or from Richardson-extrapolated series values (``traces="richardson"``).

    dE/d(theta_i) = R |gamma_i| force_i.
    """
    R = params.R
    chi = chi_legendre(capset, L_series, R)
    u = green_axisym(chi, params)
    mean, k = explicit_projection(capset, R)
    edges = capset.interface_colatitudes()
    u_edge = u.evaluate(edges)
    if traces == "identity":
        q = mean + k * np.cos(edges)
        lap_sum = 2.0 * (params.sigma / params.kappa) * u_edge + 2.0 * params.Lambda * q
    elif traces == "richardson":
        lapu = u.laplacian()
        h = math.pi / (L_series + 1) * R
        lap_sum = np.array([sum(one_sided_traces(lapu, th, h / R)) for th in edges])
    else:
        raise ValueError(f"unknown trace method {traces!r}")
    H = np.array([geodesic_curvature(c, R) for c in capset.caps])
    kL = params.kappa * params.Lambda
    return params.b_hat * H + 4.0 * kL * u_edge / R**2 + kL * lap_sum


def cap_velocities(capset: CapSet, params: ModelParams, L_series: int = 1024, traces: str = "identity") -> np.ndarray:
    """Growth velocities W_i = -(force_i - <force>) / beta_hat.

    <.> is the length-weighted mean over all cap edges, which makes the flow
    conserve the total cap area.
    """
    f = cap_forces(capset, params, L_series, traces)
    lengths = np.array([c.perimeter(params.R) for c in capset.caps])
    mean = float(np.dot(lengths, f) / lengths.sum())
    return -(f - mean) / params.beta_hat


@dataclass
class TwoCapTrajectory:
    t: np.ndarray
    angles: np.ndarray
    energy: np.ndarray
    alpha: np.ndarray
    status: str
    rejected: int = 0
    capsets: list = field(default_factory=list, repr=False)


def _rk4(rhs, valid, y, h):
    """One classical RK4 step; returns (y_new, None) or (None, violated constraint)."""
    k1 = rhs(y)
    tmp = y + 0.5 * h * k1
    if (bad := valid(tmp)) is not None:
        return None, bad
    k2 = rhs(tmp)
    tmp = y + 0.5 * h * k2
    if (bad := valid(tmp)) is not None:
        return None, bad
    k3 = rhs(tmp)
    tmp = y + h * k3
    if (bad := valid(tmp)) is not None:
        return None, bad
    k4 = rhs(tmp)
    out = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if (bad := valid(out)) is not None:
        return None, bad
    return out, None


def two_cap_flow(
    capset0: CapSet,
    params: ModelParams,
    dt: float,
    t_end: float,
    L_series: int = 1024,
    theta_min: float = 1e-3,
    traces: str = "identity",
    energy_rtol: float = 1e-12,
    max_halvings: int = 20,
) -> TwoCapTrajectory:
    """Integrate the sharp-interface cap ODE with classical RK4.

    A step that raises the (converged) series energy by more than
    ``energy_rtol`` relative, or that leaves the admissible angle range, is
    retried with half the step; accepted steps let the step grow back to
    ``dt``.  Steps below ``dt / 2**max_halvings`` end the run.  Integration stops on reaching ``t_end``, when a
    cap angle drops below ``theta_min`` (status ``"vanished"``), or when the
    caps touch (status ``"collision"``).
    """
    R = params.R

    def rhs(angles):
        cs = capset0.with_angles(angles)
        return cap_velocities(cs, params, L_series, traces) / R

    def energy(angles):
        return sharp_energy_series(capset0.with_angles(angles), params, L_series, converged=True)

    def valid(angles):
        if np.any(angles < theta_min) or np.any(angles > math.pi / 2):
            return "vanished" if np.any(angles < theta_min) else "collision"
        if len(angles) == 2 and angles.sum() >= math.pi:
            return "collision"
        return None

    y = capset0.angles.astype(float)
    t = 0.0
    E = energy(y)
    ts, ys, Es, als = [t], [y.copy()], [E], [cap_alpha(capset0)]
    status = "completed"
    rejected = 0
    h_min = dt * 0.5**max_halvings
    h = dt
    while t_end - t > 1e-12 * max(1.0, t_end):
        h = min(h, t_end - t)
        yy, bad = _rk4(rhs, valid, y, h)
        E_new = energy(yy) if yy is not None else None
        if yy is None or E_new > E + energy_rtol * abs(E):
            rejected += 1
            if h <= h_min:
                status = bad or "energy_increase"
                break
            h *= 0.5
            continue
        y, E, t = yy, E_new, t + h
        ts.append(t)
        ys.append(y.copy())
        Es.append(E)
        als.append(cap_alpha(capset0.with_angles(y)))
        h = min(dt, 2.0 * h)
    return TwoCapTrajectory(
        t=np.array(ts),
        angles=np.array(ys),
        energy=np.array(Es),
        alpha=np.array(als),
        status=status,
        rejected=rejected,
    )


# --------------------------------------------------------------------------
# diffuse states: interface location and jump extraction


def zonal_profile(field) -> AxisymField:
    """Zonal part of a 2-D spectral field as an :class:`AxisymField`."""
    g = field.grid
    return AxisymField(field.coeffs[:, g.L_max].copy(), g.R)


def _axisym_defect(field) -> float:
    g = field.grid
    c = field.coeffs
    total = float(np.linalg.norm(c))
    if total == 0.0:
        return 0.0
    nz = np.delete(c, g.L_max, axis=1)
    return float(np.linalg.norm(nz)) / total


def find_interfaces(profile: AxisymField, n_samples: int = 4096) -> np.ndarray:
    """Colatitudes where the zonal profile changes sign (root-bracketed)."""
    th = np.linspace(0.0, math.pi, n_samples + 1)[1:-1]
    v = profile.evaluate(th)
    roots = []
    for i in np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]:
        roots.append(brentq(lambda s: float(profile.evaluate(s)), th[i], th[i + 1], xtol=1e-14))
    return np.array(roots)


@dataclass(frozen=True)
class JumpResult:
    theta_star: float
    jump_lap: float
    jump_grad: float
    jump_u: float
    u_scale: float


def _extrapolate(f, theta_star, direction, start, width, n, degree):
    d = start + np.linspace(0.0, width, n)
    vals = f(theta_star + direction * d)
    coef = np.polyfit(d, vals, degree)
    return float(coef[-1])


def jump_extract(
    state,
    params: ModelParams,
    interface: int = 0,
    distance: float = 5.0,
    width: float | None = None,
    n_samples: int = 16,
    degree: int = 3,
    axisym_tol: float = 1e-6,
    pole_margin: float = 0.02,
) -> JumpResult:
    """Jumps of u, grad u . mu and Lap u across a diffuse interface.

    One-sided limits are extrapolated with a degree-``degree`` polynomial from
    zonal samples at geodesic distance >= ``distance * epsilon`` from the zero
    theta* of the zonal phi profile.  Jumps are (phase 2 side) - (phase 1
    side), phase 2 being where phi > 0; mu points from phase 1 into phase 2.

    Raises
    ------
    ValueError
        If the state is not axisymmetric or phi has no sign change.
    """
    phi, u = state.phi, state.u
    for name, f in (("phi", phi), ("u", u)):
        if _axisym_defect(f) > axisym_tol:
            raise ValueError(f"{name} is not axisymmetric")
    prof = zonal_profile(phi)
    roots = find_interfaces(prof)
    if roots.size == 0:
        raise ValueError("interface not found: phi does not change sign")
    theta_star = float(roots[interface])
    R = params.R
    start = distance * params.epsilon / R
    if width is None:
        width = max(0.3, 10.0 * params.epsilon / R)
    # keep the sampling window clear of the poles and of neighbouring layers
    others = np.delete(roots, interface)
    room_hi = min([math.pi - theta_star - pole_margin] + [r - theta_star - start for r in others if r > theta_star])
    room_lo = min([theta_star - pole_margin] + [theta_star - r - start for r in others if r < theta_star])
    wh = min(width, room_hi - start)
    wl = min(width, room_lo - start)
    if wl <= 0.5 * start or wh <= 0.5 * start:
        raise ValueError("interface too close to a pole or another interface")
    uz = zonal_profile(u)
    lapz = uz.laplacian()
    grad = lambda th: uz.derivative(th) / R  # noqa: E731
    # phase 2 on the side where phi > 0
    side2 = 1.0 if float(prof.evaluate(theta_star + 0.5 * start)) > 0 else -1.0
    res = {}
    for key, f in (("u", uz.evaluate), ("grad", grad), ("lap", lapz.evaluate)):
        hi = _extrapolate(f, theta_star, 1.0, start, wh, n_samples, degree)
        lo = _extrapolate(f, theta_star, -1.0, start, wl, n_samples, degree)
        v2, v1 = (hi, lo) if side2 > 0 else (lo, hi)
        res[key] = v2 - v1
    # mu = side2 * e_theta, so grad u . mu = side2 * du/(R dtheta)
    return JumpResult(
        theta_star=theta_star,
        jump_lap=res["lap"],
        jump_grad=side2 * res["grad"],
        jump_u=res["u"],
        u_scale=float(np.max(np.abs(uz.evaluate(np.linspace(0.01, math.pi - 0.01, 512))))),
    )
