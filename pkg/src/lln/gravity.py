"""Newtonian sources: Poisson solvers and Coriolis vector-potential presets."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import fft as sfft

from .fields import GridSpec, gradient
from .geometry import GridPotential

__all__ = [
    "poisson_periodic",
    "poisson_isolated",
    "inverse_laplacian",
    "constraint_potential",
    "mass_density",
    "coriolis_preset",
    "taub_nut_varpi",
    "self_cell_coefficient",
]


def mass_density(phi, grid: GridSpec, m: float, normalized: bool = True):
    """Gravitating density m |phi|^2, by default per unit total norm.

    The self-consistent coupling is written for a unit-norm spinor; dividing
    by the actual norm keeps the source physical for any amplitude and is
    what the anisotropic dilation covariance requires.
    """
    dens = np.sum(np.abs(np.asarray(phi)) ** 2, axis=0)
    if normalized:
        total = dens.sum() * grid.dv
        if total <= 0:
            raise ValueError("cannot normalize a zero field")
        dens = dens / total
    return m * dens


def inverse_laplacian(f, grid: GridSpec):
    """Mean-free spectral inverse: Delta(out) = f - mean(f)."""
    F = sfft.fftn(np.asarray(f), workers=-1)
    k2 = grid.k2.copy()
    k2.flat[0] = 1.0
    F = -F / k2
    F.flat[0] = 0.0
    out = sfft.ifftn(F, workers=-1)
    return out.real if np.isrealobj(f) else out


def poisson_periodic(rho, grid: GridSpec, G: float = 1.0):
    """Solve Delta U = 4 pi G rho on the torus.

    Only the mean-free part of rho is invertible; the returned U has zero
    mean and satisfies Delta U = 4 pi G (rho - rho_mean) exactly in the
    spectral sense.
    """
    return inverse_laplacian(-4.0 * np.pi * G * np.asarray(rho), grid) * (-1.0)


def constraint_potential(grid: GridSpec, rho, varpi_curl2=0.0, G: float = 1.0, dt_div=0.0):
    """U balancing the full tt curvature constraint on the torus.

    Delta U = 4 pi G rho - |Omega|^2 / 2 - d_t(delta varpi), mean-free part.
    Pass |curl varpi|^2 for varpi_curl2 when a Coriolis field is present.
    """
    src = 4.0 * np.pi * G * np.asarray(rho) - 0.5 * np.asarray(varpi_curl2) - dt_div
    return inverse_laplacian(np.broadcast_to(src, grid.shape), grid)


############################################################
# isolated (free-space) Poisson via doubled-grid convolution
############################################################

_SELF_CELL = None
_KERNEL_CACHE: dict = {}


def self_cell_coefficient() -> float:
    """Mean of 1/|x| over the unit cube [-1/2, 1/2]^3 (dimensionless).

    Computed once by Gauss-Legendre quadrature on the positive octant; sets
    the singular cell of the free-space kernel to its cell-averaged value.
    """
    global _SELF_CELL
    if _SELF_CELL is None:
        x, w = leggauss(48)
        xm = 0.25 * (x + 1.0)  # (0, 1/2)
        wm = 0.25 * w
        X, Y, Z = np.meshgrid(xm, xm, xm, indexing="ij")
        W = (
            wm.reshape(-1, 1, 1)
            * wm.reshape(1, -1, 1)
            * wm.reshape(1, 1, -1)
        )
        _SELF_CELL = float(8.0 * np.sum(W / np.sqrt(X**2 + Y**2 + Z**2)))
    return _SELF_CELL


def _isolated_kernel(grid: GridSpec):
    key = (grid.n, round(grid.length, 12))
    if key not in _KERNEL_CACHE:
        M = 2 * grid.n
        idx = np.arange(M)
        q = ((idx + grid.n) % M - grid.n) * grid.dx  # signed displacement
        R = np.sqrt(
            q.reshape(-1, 1, 1) ** 2 + q.reshape(1, -1, 1) ** 2 + q.reshape(1, 1, -1) ** 2
        )
        R.flat[0] = 1.0
        K = 1.0 / R
        K.flat[0] = self_cell_coefficient() / grid.dx
        _KERNEL_CACHE[key] = sfft.rfftn(K, workers=-1)
    return _KERNEL_CACHE[key]


def poisson_isolated(rho, grid: GridSpec, G: float = 1.0):
    """Free-space potential of a compact source: U = -G int rho/|x-x'|.

    Zero-padded convolution on the doubled grid, so periodic images never
    contribute; the source must be well localized inside the box (check the
    edge fraction of the state first).
    """
    rho = np.asarray(rho, dtype=float)
    M = 2 * grid.n
    pad = np.zeros((M, M, M))
    pad[: grid.n, : grid.n, : grid.n] = rho
    Khat = _isolated_kernel(grid)
    conv = sfft.irfftn(sfft.rfftn(pad, workers=-1) * Khat, s=(M, M, M), workers=-1)
    return -G * grid.dv * conv[: grid.n, : grid.n, : grid.n]


############################################################
# Coriolis presets
############################################################


def taub_nut_varpi(x, a: float = 1.0, sign: int = +1):
    """Self-dual mass-less Taub-NUT vector potential (wire along -+ z axis).

    varpi = 2a (x2 dx1 - x1 dx2) / (r (x3 + sign r)); its exterior derivative
    is the monopole field 2a grad(1/r): |Omega|^2 = 4 a^2 / r^4, divergence
    and curl(curl .) both vanish away from the axis.
    """
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x**2, axis=-1))
    den = r * (x[..., 2] + sign * r)
    out = np.zeros_like(x)
    out[..., 0] = 2.0 * a * x[..., 1] / den
    out[..., 1] = -2.0 * a * x[..., 0] / den
    return out


def coriolis_preset(name: str, grid: GridSpec, **kw):
    """Named Coriolis fields on a grid; returns (varpi, valid_mask).

    uniform: constant vorticity Omega0 (3-vector or scalar => z axis),
             varpi = (1/2) Omega0 x x, curl varpi = Omega0.
    taubnut: parameters a, sign (+1 puts the string on the negative axis),
             r_cut (default 2 cells) masks the axis tube and the origin.
             Periodic derivatives of this preset are untrustworthy near the
             masked region; use the analytic callable for pointwise work.
    gradient: pure gauge varpi = grad(theta) for a given theta array
             (zero vorticity; removable by a phase redefinition).
    """
    X = grid.mesh()
    mask = np.ones(grid.shape, dtype=bool)
    if name == "uniform":
        om = kw.get("Omega0", 1.0)
        om = np.asarray(om, dtype=float)
        if om.ndim == 0:
            om = np.array([0.0, 0.0, float(om)])
        varpi = 0.5 * np.cross(om, np.moveaxis(X, 0, -1)).transpose(3, 0, 1, 2)
        return varpi, mask
    if name == "taubnut":
        a = kw.get("a", 1.0)
        sign = int(kw.get("sign", +1))
        r_cut = kw.get("r_cut", 2.0 * grid.dx)
        pts = np.moveaxis(X, 0, -1)
        r = np.sqrt(np.sum(pts**2, axis=-1))
        axis_dist = np.sqrt(pts[..., 0] ** 2 + pts[..., 1] ** 2)
        on_string = (sign * pts[..., 2] < 0) & (axis_dist < r_cut)
        mask = (r > r_cut) & ~on_string
        safe = np.where(mask[..., None], pts, np.array([1.0, 1.0, 1.0]))
        varpi = np.moveaxis(taub_nut_varpi(safe, a=a, sign=sign), -1, 0)
        varpi = np.where(mask[None], varpi, 0.0)
        return varpi, mask
    if name == "gradient":
        theta = np.asarray(kw["theta"], dtype=float)
        if theta.shape != grid.shape:
            raise ValueError("theta array must live on the grid")
        return gradient(theta, grid), mask
    raise ValueError(f"unknown coriolis preset {name!r}")


def uniform_rotation_potential(grid: GridSpec, Omega0) -> GridPotential:
    """Rigid-rotation frame with exact (constant) varpi derivatives.

    The linear-in-x varpi is not periodic, so its spectral gradient would
    ring at the seam; the constant d_i varpi_j = (1/2) eps_ijk Omega_k is
    passed through instead.
    """
    varpi, _ = coriolis_preset("uniform", grid, Omega0=Omega0)
    om = np.asarray(Omega0, dtype=float)
    if om.ndim == 0:
        om = np.array([0.0, 0.0, float(om)])
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    dw = 0.5 * np.einsum("ijk,k->ij", eps, om)
    dvarpi = np.broadcast_to(
        dw[:, :, None, None, None], (3, 3) + grid.shape
    ).copy()
    return GridPotential(grid, U=None, varpi=varpi, dvarpi=dvarpi)
