"""
Projection onto S = span{1, nu_1, nu_2, nu_3}^perp and the Green operator.

On the sphere the constants and the normal components nu_i are exactly the
spherical harmonics of degree l <= 1, so the L2-orthogonal projection onto S
is a spectral truncation and the Green operator of (sigma - kappa Lap) on S is
diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spectral import SpectralField, integrate, laplace_beltrami, synthesize

__all__ = [
    "C_W",
    "ModelParams",
    "project_S",
    "green_G",
    "green_of_projection",
    "green_multiplier",
    "shifted_laplacian",
    "reformulation_residual",
    "height_residual",
    "moment_projection",
]

#: Line-tension constant int_{-1}^{1} sqrt(2 W(s)) ds for W = (s^2 - 1)^2 / 4.
C_W = 2.0 * math.sqrt(2.0) / 3.0


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the coupled model.

    Attributes
    ----------
    kappa : float
        Bending rigidity, > 0.
    sigma : float
        Surface tension, >= 0.
    Lambda : float
        Curvature coupling (spontaneous curvature per unit phase), >= 0;
        zero decouples the height from the phase field.
    b : float
        Line-energy scale, > 0.
    epsilon : float
        Interface width, > 0.
    beta : float
        Kinetic coefficient, > 0.
    alpha : float
        Mean composition, in (-1, 1).
    R : float
        Sphere radius, > 0.
    """

    kappa: float = 1.0
    sigma: float = 0.0
    Lambda: float = 1.0
    b: float = 1.0
    epsilon: float = 0.1
    beta: float = 1.0
    alpha: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        checks = {
            "kappa": self.kappa > 0,
            "sigma": self.sigma >= 0,
            "Lambda": self.Lambda >= 0,
            "b": self.b > 0,
            "epsilon": self.epsilon > 0,
            "beta": self.beta > 0,
            "alpha": abs(self.alpha) < 1,
            "R": self.R > 0,
        }
        bad = [k for k, ok in checks.items() if not ok]
        if bad:
            raise ValueError(f"invalid model parameters: {', '.join(bad)}")

    @property
    def b_hat(self) -> float:
        return C_W * self.b

    @property
    def beta_hat(self) -> float:
        return C_W * self.beta

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "sigma": self.sigma,
            "Lambda": self.Lambda,
            "b": self.b,
            "epsilon": self.epsilon,
            "beta": self.beta,
            "alpha": self.alpha,
            "R": self.R,
        }


def project_S(a: SpectralField) -> SpectralField:
    """Zero every degree l <= 1 coefficient."""
    c = a.coeffs.copy()
    c[:2] = 0.0
    return SpectralField(a.grid, c)


def green_multiplier(grid, params: ModelParams) -> np.ndarray:
    """Per-coefficient factor of the Green operator; zero for l <= 1."""
    l = grid.degrees.astype(float)
    denom = params.sigma + params.kappa * l * (l + 1) / grid.R**2
    mult = np.zeros_like(l)
    high = l >= 2
    mult[high] = params.kappa * params.Lambda / denom[high]
    return mult


def green_G(eta: SpectralField, params: ModelParams, rtol: float = 1e-12) -> SpectralField:
    """Solve (sigma - kappa Lap) G = kappa Lambda eta on S.

    Raises
    ------
    ValueError
        If ``eta`` has l <= 1 content above ``rtol`` relative to its size.
    """
    c = eta.coeffs
    scale = np.max(np.abs(c))
    low = np.max(np.abs(c[:2]))
    if low > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError("argument of the Green operator is not in S; project it first")
    return SpectralField(eta.grid, green_multiplier(eta.grid, params) * c)


def green_of_projection(phi: SpectralField, params: ModelParams) -> SpectralField:
    """Equilibrium height u = G(P phi)."""
    return SpectralField(phi.grid, green_multiplier(phi.grid, params) * phi.coeffs)


def shifted_laplacian(a: SpectralField) -> SpectralField:
    """(Lap + 2/R^2) a; annihilates the l = 1 harmonics."""
    g = a.grid
    l = g.degrees
    return SpectralField(g, (2.0 - l * (l + 1)) / g.R**2 * a.coeffs)


def reformulation_residual(phi: SpectralField, params: ModelParams) -> float:
    """Max-norm gap between the two sides of the rewritten shifted Laplacian of G(P phi).

    Compares (Lap + 2/R^2) G(P phi) with
    (sigma/kappa + 2/R^2) G(P phi) - Lambda P phi, both evaluated on the grid.
    """
    u = green_of_projection(phi, params)
    lhs = shifted_laplacian(u)
    rhs = u * (params.sigma / params.kappa + 2.0 / phi.grid.R**2) - project_S(phi) * params.Lambda
    return float(np.max(np.abs(synthesize(lhs - rhs).values)))


def height_residual(u: SpectralField, phi: SpectralField, params: ModelParams) -> float:
    """Max-norm of (Lap + 2/R^2)(kappa Lap u - sigma u + kappa Lambda (phi - alpha))."""
    inner_ = (
        laplace_beltrami(u) * params.kappa
        - u * params.sigma
        + (phi - SpectralField.constant(phi.grid, params.alpha)) * (params.kappa * params.Lambda)
    )
    return float(np.max(np.abs(synthesize(shifted_laplacian(inner_)).values)))


def moment_projection(values: np.ndarray, grid) -> np.ndarray:
    """P applied on the grid by subtracting the mean and the three normal moments.

    Uses P f = f - mean(f) - (3/|Gamma|) sum_i (int f nu_i) nu_i, which follows
    from int nu_i nu_j = delta_ij |Gamma| / 3.  Serves as an independent
    check on the spectral truncation in :func:`project_S`.
    """
    area = grid.area
    out = values - integrate(values, grid) / area
    for nu in grid.points():
        out = out - (3.0 / area) * integrate(values * nu, grid) * nu
    return out
