"""
Real spherical-harmonic machinery on a sphere of radius R.

Grid
----
Colatitudes are the Gauss-Legendre nodes in x = cos(theta), ordered so that
theta increases (north to south); the poles are never grid points.  Longitudes
are equispaced, lon_k = 2*pi*k/n_phi, so the longitude transform is an FFT.

Coefficient convention
----------------------
Coefficients are stored in a dense ``(L_max + 1, 2 L_max + 1)`` array; degree l
is the row and order m in [-l, l] sits in column ``L_max + m``.  Entries with
|m| > l are kept at zero.  The basis is orthonormal over the UNIT sphere::

    Y_l0          = Pbar_l0(cos theta)
    Y_lm  (m > 0) = sqrt(2) Pbar_lm(cos theta) cos(m lon)
    Y_l,-m        = sqrt(2) Pbar_lm(cos theta) sin(m lon)

with Pbar_lm normalised so that 2*pi * int_{-1}^{1} Pbar_lm(x)^2 dx = 1 and no
Condon-Shortley phase.  Surface integrals over the radius-R sphere carry an
explicit R**2, e.g. ``integrate(synthesize(a) * synthesize(b)) ==
R**2 * sum(a * b)``.

All transforms are single-threaded numpy; the per-order reduction runs over
m = 0..L_max in increasing order, so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

__all__ = [
    "SphereGrid",
    "SpectralField",
    "GridField",
    "gauss_legendre",
    "normalized_alp",
    "build_grid",
    "analyze",
    "synthesize",
    "integrate",
    "laplace_beltrami",
    "gradient_sq_integral",
    "inner",
    "evaluate",
]


def gauss_legendre(n: int, tol: float = 1e-14, max_iter: int = 100):
    """Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.

    Nodes are returned in DECREASING order (increasing colatitude).

    Returns
    -------
    x : ndarray [n]
    w : ndarray [n]
        Weights, summing to 2.
    """
    if n < 1:
        raise ValueError("need at least one node")
    k = np.arange(1, n + 1)
    # Tricomi-type initial guess, already decreasing in k
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(max_iter):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        # P_n' from (1 - x^2) P_n' = n (P_{n-1} - x P_n)
        one_minus_x2 = (1.0 - x) * (1.0 + x)
        dp = n * (p0 - x * p1) / one_minus_x2
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    else:  # pragma: no cover - Newton converges quadratically from this guess
        raise RuntimeError("Gauss-Legendre Newton iteration did not converge")
    # final evaluation at the converged nodes
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    one_minus_x2 = (1.0 - x) * (1.0 + x)
    w = 2.0 * one_minus_x2 / (n * (p0 - x * p1)) ** 2
    return x, w


def normalized_alp(L: int, x: np.ndarray) -> list[np.ndarray]:
    """Fully normalised associated Legendre functions Pbar_lm(x), l <= L.

    Uses the standard three-term recurrence in l with sectoral seeds
    Pbar_mm = sqrt((2m+1)/(2m)) sin(theta) Pbar_{m-1,m-1}.

    Returns
    -------
    list of ndarray
        Entry m has shape ``(L + 1 - m, len(x))``; row i is degree l = m + i.
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.sqrt((1.0 - x) * (1.0 + x))
    tables = []
    pmm = np.full_like(x, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(L + 1):
        if m > 0:
            pmm = math.sqrt((2 * m + 1) / (2 * m)) * s * pmm
        tab = np.empty((L + 1 - m, x.size))
        tab[0] = pmm
        if m + 1 <= L:
            tab[1] = math.sqrt(2 * m + 3) * x * pmm
        for i, l in enumerate(range(m + 2, L + 1), start=2):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt((2 * l + 1) * ((l - 1) ** 2 - m * m) / ((2 * l - 3) * (l * l - m * m)))
            tab[i] = a * x * tab[i - 1] - b * tab[i - 2]
        tables.append(tab)
    return tables


@dataclass(eq=False)
class SphereGrid:
    """Gauss-Legendre x equispaced grid with cached Legendre tables.

    Immutable after construction; safe to share between threads.
    """

    R: float
    L_max: int
    n_theta: int
    n_phi: int
    oversample: float
    x: np.ndarray
    weights: np.ndarray
    _plm: list = field(repr=False)

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.x)

    @property
    def sin_theta(self) -> np.ndarray:
        return np.sqrt((1.0 - self.x) * (1.0 + self.x))

    @property
    def lon(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def coeff_shape(self) -> tuple[int, int]:
        return (self.L_max + 1, 2 * self.L_max + 1)

    @property
    def area(self) -> float:
        return 4.0 * math.pi * self.R**2

    @property
    def degrees(self) -> np.ndarray:
        """Degree l of each coefficient slot, shape ``coeff_shape``."""
        L = self.L_max
        return np.broadcast_to(np.arange(L + 1)[:, None], self.coeff_shape)

    @property
    def orders(self) -> np.ndarray:
        L = self.L_max
        return np.broadcast_to(np.arange(-L, L + 1)[None, :], self.coeff_shape)

    @property
    def triangle(self) -> np.ndarray:
        """Boolean mask of valid (l, m) slots."""
        return np.abs(self.orders) <= self.degrees

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cartesian unit-normal components (nu_1, nu_2, nu_3) on the grid."""
        s = self.sin_theta[:, None]
        lon = self.lon[None, :]
        return s * np.cos(lon), s * np.sin(lon), np.broadcast_to(self.x[:, None], self.shape)

    def compatible(self, other: "SphereGrid") -> bool:
        return self is other or (
            self.R == other.R
            and self.L_max == other.L_max
            and self.n_theta == other.n_theta
            and self.n_phi == other.n_phi
        )


def build_grid(R: float, L_max: int, oversample: float = 2.0, fft_size: str = "exact") -> SphereGrid:
    """Build a quadrature grid able to transform degree-``L_max`` fields exactly.

    ``n_theta = ceil(oversample (L_max + 1))`` and ``n_phi`` is the smallest
    even integer >= ``oversample (2 L_max + 1)``.

    Parameters
    ----------
    fft_size : {"exact", "smooth"}
        ``"smooth"`` rounds ``n_phi`` up to the next even 5-smooth length.
        The minimal length can contain a large prime factor (514 = 2 * 257 for
        L_max = 128), which makes the longitude FFT an order of magnitude
        slower; the larger grid is at least as accurate.
    """
    if L_max < 2:
        raise ValueError("L_max must be >= 2 so that degrees l >= 2 exist")
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if not R > 0:
        raise ValueError("radius must be positive")
    n_theta = math.ceil(oversample * (L_max + 1) - 1e-12)
    n_phi = math.ceil(oversample * (2 * L_max + 1) - 1e-12)
    n_phi += n_phi % 2
    if fft_size == "smooth":
        n_phi = scipy.fft.next_fast_len(n_phi, real=True)
        while n_phi % 2:
            n_phi = scipy.fft.next_fast_len(n_phi + 1, real=True)
    elif fft_size != "exact":
        raise ValueError(f"unknown fft_size {fft_size!r}")
    x, w = gauss_legendre(n_theta)
    return SphereGrid(
        R=float(R),
        L_max=int(L_max),
        n_theta=n_theta,
        n_phi=n_phi,
        oversample=float(oversample),
        x=x,
        weights=w,
        _plm=normalized_alp(L_max, x),
    )


@dataclass(eq=False)
class SpectralField:
    grid: SphereGrid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != self.grid.coeff_shape:
            raise ValueError(f"coefficient array must have shape {self.grid.coeff_shape}")

    @classmethod
    def zeros(cls, grid: SphereGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.coeff_shape))

    @classmethod
    def constant(cls, grid: SphereGrid, value: float) -> "SpectralField":
        c = np.zeros(grid.coeff_shape)
        c[0, grid.L_max] = value * math.sqrt(4.0 * math.pi)
        return cls(grid, c)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def mean(self) -> float:
        """Surface mean, read off the (0, 0) coefficient."""
        return self.coeffs[0, self.grid.L_max] / math.sqrt(4.0 * math.pi)

    def zonal(self) -> np.ndarray:
        """The m = 0 column (zonal Legendre coefficients)."""
        return self.coeffs[:, self.grid.L_max].copy()

    def _check(self, other):
        if not self.grid.compatible(other.grid):
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs - other.coeffs)
        return NotImplemented

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return SpectralField(self.grid, self.coeffs * scalar)
        return NotImplemented

    __rmul__ = __mul__


@dataclass(eq=False)
class GridField:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"grid values must have shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid field contains non-finite values")


def _synth_batch(grid: SphereGrid, coeffs: np.ndarray) -> np.ndarray:
    """Synthesize a stack of coefficient arrays, shape (B, L+1, 2L+1)."""
    L = grid.L_max
    B = coeffs.shape[0]
    n = grid.n_phi
    cos_part = np.empty((L + 1, B, grid.n_theta))
    sin_part = np.zeros((L + 1, B, grid.n_theta))
    ct = np.ascontiguousarray(coeffs.transpose(0, 2, 1))
    cos_part[0] = ct[:, L, :] @ grid._plm[0]
    for m in range(1, L + 1):
        P = grid._plm[m]
        cos_part[m] = ct[:, L + m, m:] @ P
        sin_part[m] = ct[:, L - m, m:] @ P
    X = np.zeros((B, grid.n_theta, n // 2 + 1), dtype=np.complex128)
    Xv = X.view(np.float64).reshape(B, grid.n_theta, n // 2 + 1, 2)
    scale = np.full(L + 1, n * math.sqrt(0.5))
    scale[0] = n
    Xv[:, :, : L + 1, 0] = (cos_part * scale[:, None, None]).transpose(1, 2, 0)
    Xv[:, :, : L + 1, 1] = (sin_part * -scale[:, None, None]).transpose(1, 2, 0)
    return np.fft.irfft(X, n=n, axis=-1)


def _analyze_batch(grid: SphereGrid, values: np.ndarray) -> np.ndarray:
    """Analyze a stack of grid arrays, shape (B, n_theta, n_phi)."""
    L = grid.L_max
    B = values.shape[0]
    X = np.fft.rfft(values, axis=-1)[:, :, : L + 1]
    wq = grid.weights * (2.0 * math.pi / grid.n_phi)
    re = np.ascontiguousarray((X.real * wq[:, None]).transpose(2, 0, 1))
    im = np.ascontiguousarray((X.imag * wq[:, None]).transpose(2, 0, 1))
    # assemble with the order index leading, then transpose once
    out = np.zeros((B, 2 * L + 1, L + 1))
    out[:, L, :] = re[0] @ grid._plm[0].T
    r2 = math.sqrt(2.0)
    for m in range(1, L + 1):
        PT = grid._plm[m].T
        out[:, L + m, m:] = r2 * (re[m] @ PT)
        out[:, L - m, m:] = -r2 * (im[m] @ PT)
    return np.ascontiguousarray(out.transpose(0, 2, 1))


def synthesize(a: SpectralField) -> GridField:
    """Point values of a band-limited field on its grid."""
    return GridField(a.grid, _synth_batch(a.grid, a.coeffs[None])[0])


def analyze(f: GridField) -> SpectralField:
    """L2(Gamma) projection of grid values onto the degree <= L_max basis.

    Exact for band-limited input.
    """
    if not np.all(np.isfinite(f.values)):
        raise ValueError("cannot analyze non-finite values")
    return SpectralField(f.grid, _analyze_batch(f.grid, f.values[None])[0])


def integrate(f: GridField | np.ndarray, grid: SphereGrid | None = None) -> float:
    """Surface integral over the radius-R sphere by Gauss x trapezoid quadrature."""
    if isinstance(f, GridField):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f)
        if grid is None:
            raise ValueError("a grid is required for raw arrays")
    return float(grid.weights @ values.sum(axis=1)) * (2.0 * math.pi / grid.n_phi) * grid.R**2


def laplace_beltrami(a: SpectralField) -> SpectralField:
    g = a.grid
    lam = (g.degrees * (g.degrees + 1)) / g.R**2
    return SpectralField(g, -lam * a.coeffs)


def gradient_sq_integral(a: SpectralField) -> float:
    """int_Gamma |grad_Gamma a|^2 dGamma, via Green's identity on the closed sphere."""
    l = a.grid.degrees
    # R^2 from dGamma cancels 1/R^2 from the eigenvalue
    return float(np.sum(l * (l + 1) * a.coeffs**2))


def inner(a: SpectralField, b: SpectralField) -> float:
    """L2(Gamma) inner product of two band-limited fields."""
    a._check(b)
    return float(np.sum(a.coeffs * b.coeffs)) * a.grid.R**2


def evaluate(a: SpectralField, theta, lon) -> np.ndarray:
    """Evaluate a spectral field at arbitrary points (broadcast theta, lon)."""
    theta, lon = np.broadcast_arrays(np.asarray(theta, float), np.asarray(lon, float))
    shape = theta.shape
    th = theta.ravel()
    ln = lon.ravel()
    L = a.grid.L_max
    tables = normalized_alp(L, np.cos(th))
    out = a.coeffs[:, L] @ tables[0]
    r2 = math.sqrt(2.0)
    for m in range(1, L + 1):
        P = tables[m]
        out = out + r2 * (
            (a.coeffs[m:, L + m] @ P) * np.cos(m * ln) + (a.coeffs[m:, L - m] @ P) * np.sin(m * ln)
        )
    return out.reshape(shape)
