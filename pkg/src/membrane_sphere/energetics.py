"""
Energy functionals of the coupled phase-field / height model.

Bending density
---------------
The membrane density used throughout is::

    e_m = kappa/2 [ (Lap u + 2u/R^2 + Lambda phi)^2 - (2u/R^2)(Lap u + 2u/R^2) ]
          - sigma/2 u (Lap u + 2u/R^2)

This is the form whose first variation in u gives
(Lap + 2/R^2)(kappa Lap u - sigma u + kappa Lambda phi) = 0 and whose value at
u = G(P phi) reproduces the reduced energy; per unit-norm degree-l mode
(R = 1, phi = 0) it equals kappa/2 l(l+1)(l(l+1) - 2) + sigma/2 (l(l+1) - 2),
i.e. 12 for l = 2, kappa = 1, sigma = 0.

Conventions
-----------
Energies are integrals over the radius-R sphere.  Quadratic terms are
evaluated spectrally; the double-well term and any term involving a
non-band-limited field are evaluated by grid quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import (
    ModelParams,
    green_multiplier,
    green_of_projection,
    project_S,
    shifted_laplacian,
)
from .spectral import (
    GridField,
    SpectralField,
    SphereGrid,
    analyze,
    gauss_legendre,
    gradient_sq_integral,
    integrate,
    laplace_beltrami,
    normalized_alp,
    synthesize,
)

__all__ = [
    "double_well",
    "double_well_prime",
    "EnergyReport",
    "energy_em",
    "energy_diffuse",
    "energy_reduced",
    "energy_J",
    "energy_K",
    "quadratic_weights",
    "sample_indicator",
    "indicator_coeffs",
    "gamma_limit_value",
    "energy_sharp",
    "energy_sharp_reduced",
]


def double_well(phi):
    return 0.25 * (phi * phi - 1.0) ** 2


def double_well_prime(phi):
    return phi * (phi * phi - 1.0)


@dataclass(frozen=True)
class EnergyReport:
    """Breakdown of an energy value.

    ``total = bending + dirichlet + potential + line``.  ``coupling_K`` is the
    nonlocal part K of the reduced energy, reported for diagnostics and not
    part of the sum (it coincides with ``bending`` when u = G(P phi)).
    """

    total: float
    bending: float
    dirichlet: float = 0.0
    potential: float = 0.0
    line: float = 0.0
    coupling_K: float = float("nan")

    def parts_sum(self) -> float:
        return self.bending + self.dirichlet + self.potential + self.line

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "bending": self.bending,
            "dirichlet": self.dirichlet,
            "potential": self.potential,
            "line": self.line,
            "coupling_K": self.coupling_K,
        }


def _check_same_grid(a, b):
    if not a.grid.compatible(b.grid):
        raise ValueError("fields live on different grids")


def energy_em(u: SpectralField, phi: GridField, params: ModelParams) -> float:
    """Integral of the bending density e_m by grid quadrature."""
    _check_same_grid(u, phi)
    R2 = u.grid.R ** 2
    v = synthesize(shifted_laplacian(u)).values
    uu = synthesize(u).values
    k = params.kappa
    dens = 0.5 * k * ((v + params.Lambda * phi.values) ** 2 - (2.0 / R2) * uu * v) - 0.5 * params.sigma * uu * v
    return integrate(dens, u.grid)


def _potential(phi: SpectralField, params: ModelParams, values=None) -> float:
    if values is None:
        values = synthesize(phi).values
    return params.b / params.epsilon * integrate(double_well(values), phi.grid)


def energy_J(phi: SpectralField, params: ModelParams) -> float:
    """Modica-Mortola part: int b (eps/2 |grad phi|^2 + W(phi)/eps)."""
    return 0.5 * params.b * params.epsilon * gradient_sq_integral(phi) + _potential(phi, params)


def energy_diffuse(u: SpectralField, phi: SpectralField, params: ModelParams) -> EnergyReport:
    """Full diffuse-interface energy E_DI(u, phi) with its parts."""
    _check_same_grid(u, phi)
    values = synthesize(phi).values
    bending = energy_em(u, GridField(phi.grid, values), params)
    dirichlet = 0.5 * params.b * params.epsilon * gradient_sq_integral(phi)
    potential = _potential(phi, params, values)
    return EnergyReport(
        total=bending + dirichlet + potential,
        bending=bending,
        dirichlet=dirichlet,
        potential=potential,
        coupling_K=energy_K(phi, params),
    )


def quadratic_weights(grid: SphereGrid, params: ModelParams) -> np.ndarray:
    """Diagonal q of the quadratic part of the reduced energy.

    The reduced energy equals ``R^2 * sum(q * c**2) + (b/eps) int W(phi)``
    for coefficients ``c`` of phi.
    """
    R2 = grid.R ** 2
    lam = (grid.degrees * (grid.degrees + 1)).astype(float)
    g = green_multiplier(grid, params)
    q = 0.5 * params.kappa * params.Lambda * (2.0 - lam) / R2 * g
    q = q + 0.5 * params.b * params.epsilon * lam / R2 + 0.5 * params.kappa * params.Lambda ** 2
    return np.where(grid.triangle, q, 0.0)


def energy_reduced(phi: SpectralField, params: ModelParams, form: str = "simplified") -> float:
    """Reduced energy E_DI(G(P phi), phi) with u eliminated.

    Parameters
    ----------
    form : {"simplified", "expanded"}
        ``"simplified"`` uses the diagonal quadratic form (spectral) plus the
        double-well quadrature.  ``"expanded"`` integrates
        kappa/2 (Lap - sigma/kappa) G (Lap + 2/R^2) G + kappa Lambda^2 phi^2/2
        + kappa Lambda phi (Lap + 2/R^2) G + Dirichlet + W pointwise on the grid,
        with G = G(P phi).
    """
    g = phi.grid
    if form == "simplified":
        quad = g.R ** 2 * float(np.sum(quadratic_weights(g, params) * phi.coeffs ** 2))
        return quad + _potential(phi, params)
    if form == "expanded":
        G = green_of_projection(phi, params)
        LG = synthesize(shifted_laplacian(G)).values
        lapG = synthesize(laplace_beltrami(G)).values
        Gv = synthesize(G).values
        pv = synthesize(phi).values
        k = params.kappa
        dens = (
            0.5 * k * (lapG - params.sigma / k * Gv) * LG
            + 0.5 * k * params.Lambda ** 2 * pv ** 2
            + k * params.Lambda * pv * LG
            + params.b / params.epsilon * double_well(pv)
        )
        return integrate(dens, g) + 0.5 * params.b * params.epsilon * gradient_sq_integral(phi)
    raise ValueError(f"unknown form {form!r}")


def energy_K(
    phi: SpectralField,
    params: ModelParams,
    form: str = "pre",
    phi_sq_integral: float | None = None,
) -> float:
    """Nonlocal part K of the reduced energy.

    Parameters
    ----------
    form : {"pre", "reformulated"}
        ``"pre"``: int kappa Lambda/2 P phi (Lap + 2/R^2) G(P phi)
        + kappa Lambda^2 phi^2 / 2, by grid quadrature.
        ``"reformulated"``: kappa Lambda/2 (sigma/kappa + 2/R^2) int P phi G(P phi)
        + kappa Lambda^2/2 (int phi^2 - int (P phi)^2), spectrally.
    phi_sq_integral : float, optional
        Value to use for int phi^2.  For an indicator chi this is exactly
        |Gamma|, which a truncated expansion cannot reproduce.
    """
    g = phi.grid
    kL = params.kappa * params.Lambda
    if form == "pre":
        Pphi = project_S(phi)
        LG = synthesize(shifted_laplacian(green_of_projection(phi, params))).values
        first = integrate(0.5 * kL * synthesize(Pphi).values * LG, g)
        if phi_sq_integral is None:
            phi_sq_integral = integrate(synthesize(phi).values ** 2, g)
        return first + 0.5 * kL * params.Lambda * phi_sq_integral
    if form == "reformulated":
        return _k_reformulated(phi.coeffs, g, params, phi_sq_integral)
    raise ValueError(f"unknown form {form!r}")


def _k_reformulated(coeffs, grid, params, phi_sq_integral=None) -> float:
    R2 = grid.R ** 2
    kL = params.kappa * params.Lambda
    high = coeffs[2:]
    gmul = green_multiplier(grid, params)[2:]
    pg = R2 * float(np.sum(gmul * high ** 2))
    pp = R2 * float(np.sum(high ** 2))
    if phi_sq_integral is None:
        phi_sq_integral = R2 * float(np.sum(coeffs ** 2))
    return 0.5 * kL * (params.sigma / params.kappa + 2.0 / R2) * pg + 0.5 * kL * params.Lambda * (phi_sq_integral - pp)


# --------------------------------------------------------------------------
# sharp configurations


def sample_indicator(grid: SphereGrid, capset) -> GridField:
    """Pointwise samples of chi: +1 inside (or on the edge of) a cap, -1 elsewhere."""
    theta = grid.theta
    inside = np.zeros(grid.n_theta, dtype=bool)
    for cap in capset.caps:
        if cap.pole == "north":
            inside |= theta <= cap.theta0
        else:
            inside |= theta >= math.pi - cap.theta0
    col = np.where(inside, 1.0, -1.0)
    return GridField(grid, np.repeat(col[:, None], grid.n_phi, axis=1))


def _aligned_zonal(grid: SphereGrid, capset) -> np.ndarray:
    """Zonal coefficients of chi by Gauss quadrature on each smooth piece.

    The cos(theta) axis is split at the cap edges and each piece is integrated
    with enough Gauss-Legendre nodes to be exact for degree-L_max polynomials.
    """
    L = grid.L_max
    breaks = {-1.0, 1.0}
    for cap in capset.caps:
        breaks.add(math.cos(cap.theta0) if cap.pole == "north" else -math.cos(cap.theta0))
    edges = sorted(breaks)
    xg, wg = gauss_legendre(L // 2 + 2)
    out = np.zeros(L + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        val = capset.indicator_at(math.acos(max(-1.0, min(1.0, mid))))
        x = 0.5 * (hi - lo) * xg + mid
        w = 0.5 * (hi - lo) * wg
        P0 = normalized_alp(L, x)[0]
        out += 2.0 * math.pi * val * (P0 @ w)
    return out


def indicator_coeffs(grid: SphereGrid, capset, method: str = "aligned") -> SpectralField:
    """Spectral coefficients of the cap indicator chi.

    Parameters
    ----------
    method : {"aligned", "pointwise"}
        ``"aligned"`` integrates chi exactly against each zonal harmonic
        (quadrature split at the cap edges), giving the true L2 projection.
        ``"pointwise"`` analyzes the pointwise samples of
        :func:`sample_indicator`; its error is O(grid spacing).
    """
    if method == "pointwise":
        return analyze(sample_indicator(grid, capset))
    if method != "aligned":
        raise ValueError(f"unknown method {method!r}")
    c = np.zeros(grid.coeff_shape)
    c[:, grid.L_max] = _aligned_zonal(grid, capset)
    return SpectralField(grid, c)


def _sharp_reduced_parts(grid, capset, params, method):
    chi = indicator_coeffs(grid, capset, method)
    K = _k_reformulated(chi.coeffs, grid, params, phi_sq_integral=grid.area)
    line = params.b_hat * capset.perimeter(grid.R)
    return K, line


def gamma_limit_value(capset, params: ModelParams, grid: SphereGrid, method: str = "aligned") -> float:
    """b_hat |gamma| + K(chi_gamma) evaluated on ``grid``."""
    K, line = _sharp_reduced_parts(grid, capset, params, method)
    return line + K


def energy_sharp_reduced(capset, params: ModelParams, grid: SphereGrid, method: str = "aligned") -> float:
    """Reduced sharp-interface energy on the 2-D grid.

    Identical to :func:`gamma_limit_value` by construction: both reduce to
    K(chi) + b_hat |gamma|.
    """
    K, line = _sharp_reduced_parts(grid, capset, params, method)
    return line + K


def energy_sharp(u: SpectralField, capset, params: ModelParams, method: str = "aligned") -> EnergyReport:
    """Sharp-interface energy int e_m(chi, u) + b_hat |gamma|.

    Uses chi^2 = 1 exactly; the cross term int chi (Lap + 2/R^2) u is an inner
    product against the coefficients of chi.
    """
    g = u.grid
    R2 = g.R ** 2
    chi = indicator_coeffs(g, capset, method)
    Lu = shifted_laplacian(u).coeffs
    k = params.kappa
    vv = R2 * float(np.sum(Lu * Lu))
    uv = R2 * float(np.sum(u.coeffs * Lu))
    cross = R2 * float(np.sum(chi.coeffs * Lu))
    bending = 0.5 * k * (vv + 2.0 * params.Lambda * cross + params.Lambda ** 2 * g.area - 2.0 / R2 * uv)
    bending -= 0.5 * params.sigma * uv
    K, line = _sharp_reduced_parts(g, capset, params, method)
    return EnergyReport(total=bending + line, bending=bending, line=line, coupling_K=K)
