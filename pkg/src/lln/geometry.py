"""Bargmann lift of Newtonian gravity with Coriolis vector potential.

The five-dimensional pp-wave (Brinkmann) metric carried here is, in the
coordinate order (x1, x2, x3, t, s),

    g = dx.dx + 2 varpi.dx dt - 2U dt^2 + 2 dt ds,

with xi = d/ds the covariantly constant null direction. Spinors are Dirac
4-spinors built from two Pauli pairs (phi over chi); equal-weight densities
carry the conformal weight 2/5. All pointwise algebra below is vectorized
over arbitrary leading axes; field-level operators act on grids from
:mod:`lln.fields`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Optional

import numpy as np

from .fields import (
    PAULI,
    GridSpec,
    curl,
    divergence,
    gradient,
    laplacian,
    sample_points,
    sigma_dot,
)

__all__ = [
    "DENSITY_WEIGHT",
    "PotentialSample",
    "AnalyticPotential",
    "GridPotential",
    "flat_potential",
    "brinkmann_metric",
    "brinkmann_metric_inverse",
    "volume_density",
    "GammaSet",
    "gamma_set",
    "clifford_residual",
    "chirality_matrix",
    "ChristoffelTable",
    "christoffels",
    "christoffels_fd",
    "ricci_fd",
    "RicciCheck",
    "ricci_constraint_residual",
    "TimeMap",
    "schwarzian",
    "LiftedSpinor",
    "spin_connection",
    "spin_connection_contraction",
    "covariant_spinor_derivative",
    "lie_derivative_spinor_density",
    "dirac_residual",
]

# weight of an equal-scaling spinor density in dimension 5: (N - 1)/(2N)
DENSITY_WEIGHT = 0.4

_I2 = np.eye(2, dtype=complex)


############################################################
# potential data
############################################################


@dataclass
class PotentialSample:
    """Values (and optionally first derivatives) of (U, varpi) at points.

    Shapes: U (...,), varpi (..., 3), dU (..., 3), dvarpi (..., 3, 3) with
    dvarpi[..., i, j] = d_i varpi_j, dtU (...,), dtvarpi (..., 3).
    """

    U: np.ndarray
    varpi: np.ndarray
    dU: Optional[np.ndarray] = None
    dtU: Optional[np.ndarray] = None
    dvarpi: Optional[np.ndarray] = None
    dtvarpi: Optional[np.ndarray] = None

    @property
    def has_derivatives(self) -> bool:
        return not (
            self.dU is None
            or self.dtU is None
            or self.dvarpi is None
            or self.dtvarpi is None
        )


@dataclass
class AnalyticPotential:
    """Closed-form (U, varpi), with optional closed-form first derivatives.

    Callables take (x, t) with x of shape (..., 3) and return shapes as in
    PotentialSample. Derivative callables are needed only by the closed-form
    Christoffel path; finite-difference oracles work from values alone.
    """

    U: Callable
    varpi: Callable
    dU: Optional[Callable] = None
    dtU: Optional[Callable] = None
    dvarpi: Optional[Callable] = None
    dtvarpi: Optional[Callable] = None

    def sample(self, x, t=0.0, derivatives: bool = False) -> PotentialSample:
        x = np.asarray(x, dtype=float)
        s = PotentialSample(
            U=np.asarray(self.U(x, t), dtype=float),
            varpi=np.asarray(self.varpi(x, t), dtype=float),
        )
        if derivatives:
            if self.dU is None or self.dvarpi is None:
                raise ValueError(
                    "analytic potential lacks derivative callables; "
                    "use the finite-difference oracle instead"
                )
            s.dU = np.asarray(self.dU(x, t), dtype=float)
            s.dvarpi = np.asarray(self.dvarpi(x, t), dtype=float)
            s.dtU = (
                np.asarray(self.dtU(x, t), dtype=float)
                if self.dtU
                else np.zeros_like(s.U)
            )
            s.dtvarpi = (
                np.asarray(self.dtvarpi(x, t), dtype=float)
                if self.dtvarpi
                else np.zeros_like(s.varpi)
            )
        return s


class GridPotential:
    """Static (U, varpi) sampled on a periodic grid.

    Spatial derivatives are spectral and cached; time derivatives are zero.
    Off-lattice samples come from the trigonometric interpolant.
    """

    def __init__(self, grid: GridSpec, U=None, varpi=None, dU=None, dvarpi=None):
        self.grid = grid
        self.U = np.zeros(grid.shape) if U is None else np.asarray(U, dtype=float)
        self.varpi = (
            np.zeros((3,) + grid.shape)
            if varpi is None
            else np.asarray(varpi, dtype=float)
        )
        if self.U.shape != grid.shape or self.varpi.shape != (3,) + grid.shape:
            raise ValueError("potential arrays do not match the grid")
        self._cache = {}
        # exact derivatives may be supplied for fields that are not periodic
        # (a rigid rotation's varpi is linear in x, so its spectral gradient
        # would ring at the seam); downstream curls and divergences then
        # derive from these instead of FFTs
        if dU is not None:
            dU = np.asarray(dU, dtype=float)
            if dU.shape != (3,) + grid.shape:
                raise ValueError("dU override must have shape (3,) + grid shape")
            self._cache["dU"] = dU
        if dvarpi is not None:
            dvarpi = np.asarray(dvarpi, dtype=float)
            if dvarpi.shape != (3, 3) + grid.shape:
                raise ValueError("dvarpi override must have shape (3, 3) + grid shape")
            self._cache["dvarpi"] = dvarpi
            dw = dvarpi
            self._cache["curl"] = np.stack(
                [
                    dw[1, 2] - dw[2, 1],
                    dw[2, 0] - dw[0, 2],
                    dw[0, 1] - dw[1, 0],
                ]
            )
            self._cache["div"] = dw[0, 0] + dw[1, 1] + dw[2, 2]

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def dU(self):
        return self._get("dU", lambda: gradient(self.U, self.grid))

    @property
    def dvarpi(self):
        # [i, j] = d_i varpi_j
        return self._get(
            "dvarpi",
            lambda: np.stack([gradient(self.varpi[j], self.grid) for j in range(3)], axis=1),
        )

    @property
    def curl_varpi(self):
        return self._get("curl", lambda: curl(self.varpi, self.grid))

    @property
    def div_varpi(self):
        return self._get("div", lambda: divergence(self.varpi, self.grid))

    @property
    def omega2(self):
        """|Omega|^2 = (1/2) Omega_ij Omega_ij = |curl varpi|^2."""
        return self._get("omega2", lambda: np.sum(self.curl_varpi**2, axis=0))

    def is_flat(self) -> bool:
        return not (np.any(self.U) or np.any(self.varpi))

    def sample(self, x, t=0.0, derivatives: bool = False) -> PotentialSample:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        U = sample_points(self.U, self.grid, x)
        w = sample_points(self.varpi, self.grid, x)  # (3, P)
        s = PotentialSample(U=U, varpi=np.moveaxis(w, 0, -1))
        if derivatives:
            dU = sample_points(self.dU, self.grid, x)
            dw = sample_points(self.dvarpi.reshape((9,) + self.grid.shape), self.grid, x)
            s.dU = np.moveaxis(dU, 0, -1)
            s.dvarpi = np.moveaxis(dw.reshape(3, 3, -1), (0, 1), (-2, -1))
            s.dtU = np.zeros_like(s.U)
            s.dtvarpi = np.zeros_like(s.varpi)
        return s


def flat_potential(grid: GridSpec) -> GridPotential:
    return GridPotential(grid)


############################################################
# metric and Clifford algebra (pointwise, vectorized)
############################################################


def _values(sample_or_U, varpi=None):
    if varpi is None:
        return np.asarray(sample_or_U.U), np.asarray(sample_or_U.varpi)
    return np.asarray(sample_or_U), np.asarray(varpi)


def brinkmann_metric(sample, varpi=None) -> np.ndarray:
    """Metric components g_{mu nu}, shape (..., 5, 5).

    Accepts a PotentialSample or a pair (U, varpi) with varpi indexed last.
    """
    U, w = _values(sample, varpi)
    base = np.broadcast_shapes(U.shape, w.shape[:-1])
    g = np.zeros(base + (5, 5))
    for i in range(3):
        g[..., i, i] = 1.0
    g[..., :3, 3] = w
    g[..., 3, :3] = w
    g[..., 3, 3] = -2.0 * U
    g[..., 3, 4] = 1.0
    g[..., 4, 3] = 1.0
    return g


def brinkmann_metric_inverse(sample, varpi=None) -> np.ndarray:
    """Inverse metric g^{mu nu}; closed form, det g = -1 identically."""
    U, w = _values(sample, varpi)
    base = np.broadcast_shapes(U.shape, w.shape[:-1])
    gi = np.zeros(base + (5, 5))
    for i in range(3):
        gi[..., i, i] = 1.0
    gi[..., :3, 4] = -w
    gi[..., 4, :3] = -w
    gi[..., 3, 4] = 1.0
    gi[..., 4, 3] = 1.0
    gi[..., 4, 4] = 2.0 * U + np.sum(w**2, axis=-1)
    return gi


def volume_density(g: np.ndarray) -> np.ndarray:
    """sqrt(-det g), evaluated numerically (should be identically 1)."""
    return np.sqrt(-np.linalg.det(g))


@dataclass
class GammaSet:
    upper: np.ndarray  # (..., 5, 4, 4), gamma^mu
    lower: np.ndarray  # (..., 5, 4, 4), gamma_mu = g_{mu nu} gamma^nu


def gamma_set(sample, varpi=None) -> GammaSet:
    """Curved-space gamma matrices adapted to the Brinkmann frame.

    The spatial gamma^j are block diagonal (-i sigma_j, +i sigma_j); gamma^t
    has the identity in the lower-left Pauli block; gamma^s carries the
    potentials. Lowered matrices are produced with the metric numerically.
    """
    U, w = _values(sample, varpi)
    base = np.broadcast_shapes(U.shape, w.shape[:-1])
    up = np.zeros(base + (5, 4, 4), dtype=complex)
    for j in range(3):
        up[..., j, :2, :2] = -1j * PAULI[j]
        up[..., j, 2:, 2:] = 1j * PAULI[j]
    up[..., 3, 2:, :2] = _I2
    sw = np.einsum("...j,jab->...ab", w, PAULI)
    up[..., 4, :2, :2] = 1j * sw
    up[..., 4, :2, 2:] = -2.0 * _I2
    up[..., 4, 2:, 2:] = -1j * sw
    up[..., 4, 2:, :2] = U[..., None, None] * _I2
    g = brinkmann_metric(U, w)
    low = np.einsum("...mn,...nab->...mab", g, up)
    return GammaSet(upper=up, lower=low)


def clifford_residual(gammas: np.ndarray, metric: np.ndarray) -> float:
    """max |{gamma_mu, gamma_nu} + 2 g_{mu nu}| over all slots and points.

    Works for either index position when handed the matching metric array.
    """
    anti = np.einsum("...mab,...nbc->...mnac", gammas, gammas)
    anti = anti + np.einsum("...nab,...mbc->...mnac", gammas, gammas)
    target = -2.0 * metric[..., None, None] * np.eye(4)
    return float(np.max(np.abs(anti - target)))


_EPS5 = [(p, float(np.linalg.det(np.eye(5)[list(p)]))) for p in permutations(range(5))]


def chirality_matrix(gam: GammaSet, g: np.ndarray) -> np.ndarray:
    """Volume element Gamma = -(sqrt(-g)/5!) eps_{mnrls} g^m g^n g^r g^l g^s.

    With eps_{123ts} = +1 this evaluates to the identity: odd-dimensional
    Clifford algebras have a central volume element, and the sign convention
    here fixes the inequivalent representation choice.
    """
    up = gam.upper
    vol = volume_density(g)
    base = up.shape[:-3]
    out = np.zeros(base + (4, 4), dtype=complex)
    for p, sign in _EPS5:
        term = up[..., p[0], :, :]
        for idx in p[1:]:
            term = term @ up[..., idx, :, :]
        out += sign * term
    return -vol[..., None, None] / 120.0 * out


############################################################
# Christoffel symbols and curvature
############################################################


@dataclass
class ChristoffelTable:
    """Dense Gamma^rho_{mu nu}, shape (..., 5, 5, 5), index order [rho, mu, nu]."""

    dense: np.ndarray

    def __getitem__(self, idx):
        return self.dense[idx]


def christoffels(sample: PotentialSample) -> ChristoffelTable:
    """Closed-form connection of the Brinkmann metric.

    Non-vanishing families only: Gamma^i_tt, Gamma^i_jt, Gamma^s_ij,
    Gamma^s_it, Gamma^s_tt. Requires a sample with first derivatives.
    """
    if not sample.has_derivatives:
        raise ValueError("christoffels requires a sample carrying derivatives")
    dU = np.asarray(sample.dU)
    dtU = np.asarray(sample.dtU)
    dw = np.asarray(sample.dvarpi)
    dtw = np.asarray(sample.dtvarpi)
    w = np.asarray(sample.varpi)
    base = np.broadcast_shapes(dU.shape[:-1], dw.shape[:-2])
    G = np.zeros(base + (5, 5, 5))
    om = dw - np.swapaxes(dw, -1, -2)  # Omega_ij = d_i w_j - d_j w_i
    acc = dU + dtw  # Gamma^i_tt
    G[..., :3, 3, 3] = acc
    G[..., :3, :3, 3] = -0.5 * om  # Gamma^i_jt, symmetric in (j, t)
    G[..., :3, 3, :3] = -0.5 * om
    G[..., 4, :3, :3] = 0.5 * (dw + np.swapaxes(dw, -1, -2))
    s_it = -dU - 0.5 * np.einsum("...ij,...j->...i", om, w)
    G[..., 4, :3, 3] = s_it
    G[..., 4, 3, :3] = s_it
    G[..., 4, 3, 3] = -dtU - np.einsum("...i,...i->...", w, acc)
    return ChristoffelTable(dense=G)


def _metric_at(potential, x, t):
    s = potential.sample(np.atleast_2d(x), t)
    return brinkmann_metric(s.U, s.varpi)[0]


def christoffels_fd(potential, point, t: float = 0.0, h: float = 1e-3) -> np.ndarray:
    """Connection at one event from centered differences of the metric itself.

    Independent cross-check for :func:`christoffels`: only metric values are
    sampled, so it never touches the closed-form derivative bookkeeping.
    Differentiation along s is skipped (the metric has no s dependence, the
    difference quotient is identically zero).
    """
    point = np.asarray(point, dtype=float)
    dg = np.zeros((5, 5, 5))
    for mu in range(3):
        e = np.zeros(3)
        e[mu] = h
        dg[mu] = (_metric_at(potential, point + e, t) - _metric_at(potential, point - e, t)) / (2 * h)
    dg[3] = (_metric_at(potential, point, t + h) - _metric_at(potential, point, t - h)) / (2 * h)
    s = potential.sample(np.atleast_2d(point), t)
    gi = brinkmann_metric_inverse(s.U, s.varpi)[0]
    return 0.5 * np.einsum(
        "rs,msn->rmn", gi, dg
    ) + 0.5 * np.einsum("rs,nsm->rmn", gi, dg) - 0.5 * np.einsum("rs,smn->rmn", gi, dg)


def ricci_fd(potential, point, t: float = 0.0, h: float = 1e-3) -> np.ndarray:
    """Ricci tensor at one event, assembled from finite differences of g.

    Second derivatives use centered stencils over (x, t); the s direction is
    flat by inspection of the metric components. Convention
    R_{mu nu} = d_rho Gamma^rho_{mu nu} - d_mu Gamma^rho_{rho nu} + GG - GG.
    """
    point = np.asarray(point, dtype=float)

    def gat(dx, dt_):
        return _metric_at(potential, point + dx, t + dt_)

    zeros3 = np.zeros(3)
    g0 = gat(zeros3, 0.0)
    gi0 = np.linalg.inv(g0)

    def step(mu):
        if mu < 3:
            e = np.zeros(3)
            e[mu] = h
            return e, 0.0
        if mu == 3:
            return zeros3, h
        return None  # s: flat direction

    dg = np.zeros((5, 5, 5))
    ddg = np.zeros((5, 5, 5, 5))
    for mu in range(4):
        ex, et = step(mu)
        gp, gm = gat(ex, et), gat(-ex, -et)
        dg[mu] = (gp - gm) / (2 * h)
        ddg[mu, mu] = (gp - 2 * g0 + gm) / h**2
    for mu in range(4):
        for nu in range(mu + 1, 4):
            exm, etm = step(mu)
            exn, etn = step(nu)
            gpp = gat(exm + exn, etm + etn)
            gmm = gat(-exm - exn, -etm - etn)
            gpm = gat(exm - exn, etm - etn)
            gmp = gat(-exm + exn, -etm + etn)
            ddg[mu, nu] = ddg[nu, mu] = (gpp + gmm - gpm - gmp) / (4 * h**2)

    def gamma_of(gi, d):
        return 0.5 * (
            np.einsum("rs,msn->rmn", gi, d)
            + np.einsum("rs,nsm->rmn", gi, d)
            - np.einsum("rs,smn->rmn", gi, d)
        )

    Gam = gamma_of(gi0, dg)
    dGam = np.zeros((5, 5, 5, 5))  # [lambda, rho, mu, nu]
    for lam in range(4):
        dgi = -gi0 @ dg[lam] @ gi0
        term = gamma_of(dgi, dg)
        term += 0.5 * (
            np.einsum("rs,msn->rmn", gi0, ddg[lam])
            + np.einsum("rs,nsm->rmn", gi0, ddg[lam])
            - np.einsum("rs,smn->rmn", gi0, ddg[lam])
        )
        dGam[lam] = term
    ric = (
        np.einsum("rrmn->mn", dGam)
        - np.einsum("mrrn->mn", dGam)
        + np.einsum("rrl,lmn->mn", Gam, Gam)
        - np.einsum("rml,lrn->mn", Gam, Gam)
    )
    return ric


@dataclass
class RicciCheck:
    """Field-equation residuals of a (U, varpi, rho) triple on a grid."""

    scalar: np.ndarray  # Delta U + dt(div-term) + |Omega|^2/2 - 4 pi G rho
    vector: np.ndarray  # curl curl varpi (vanishing <=> harmonic Coriolis)
    scalar_max: float
    scalar_max_meanfree: float
    vector_max: float


def ricci_constraint_residual(
    p: GridPotential, rho=None, G: float = 1.0, dt_div_varpi=0.0
) -> RicciCheck:
    """Check the only nontrivial curvature component against its source.

    The tt Ricci component reduces to Delta U + d_t(delta varpi) + |Omega|^2/2,
    and the off-tt components vanish iff delta(Omega) = curl curl varpi = 0.
    Static snapshots have no d_t(delta varpi); pass it explicitly when known.
    A periodic U can only balance the mean-free part of the source, so the
    mean-free residual is reported alongside the raw maximum.
    """
    grid = p.grid
    rho = np.zeros(grid.shape) if rho is None else np.asarray(rho)
    lhs = laplacian(p.U, grid) + dt_div_varpi + 0.5 * p.omega2
    scalar = lhs - 4.0 * np.pi * G * rho
    vector = curl(p.curl_varpi, grid)
    mf = scalar - scalar.mean()
    return RicciCheck(
        scalar=scalar,
        vector=vector,
        scalar_max=float(np.max(np.abs(scalar))),
        scalar_max_meanfree=float(np.max(np.abs(mf))),
        vector_max=float(np.max(np.abs(vector))),
    )


############################################################
# time reparametrization
############################################################


@dataclass
class TimeMap:
    """Orientation-preserving reparametrization t -> f(t).

    Derivative callables are optional; without them the Schwarzian falls back
    to centered finite differences of f alone.
    """

    f: Callable
    df: Optional[Callable] = None
    d2f: Optional[Callable] = None
    d3f: Optional[Callable] = None
    name: str = ""

    def __call__(self, t):
        return self.f(t)

    @classmethod
    def affine(cls, a: float, b: float) -> "TimeMap":
        if a <= 0:
            raise ValueError("affine time map needs positive slope")
        return cls(
            f=lambda t: a * np.asarray(t) + b,
            df=lambda t: a * np.ones_like(np.asarray(t, dtype=float)),
            d2f=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            d3f=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            name=f"affine({a}, {b})",
        )

    @classmethod
    def homography(cls, a: float, b: float, c: float, d: float) -> "TimeMap":
        det = a * d - b * c
        if det <= 0:
            raise ValueError("homography needs positive determinant")
        return cls(
            f=lambda t: (a * np.asarray(t) + b) / (c * np.asarray(t) + d),
            df=lambda t: det / (c * np.asarray(t) + d) ** 2,
            d2f=lambda t: -2 * c * det / (c * np.asarray(t) + d) ** 3,
            d3f=lambda t: 6 * c**2 * det / (c * np.asarray(t) + d) ** 4,
            name=f"homography({a}, {b}, {c}, {d})",
        )

    @classmethod
    def power(cls, p: float) -> "TimeMap":
        # t > 0 only
        return cls(
            f=lambda t: np.asarray(t, dtype=float) ** p,
            df=lambda t: p * np.asarray(t, dtype=float) ** (p - 1),
            d2f=lambda t: p * (p - 1) * np.asarray(t, dtype=float) ** (p - 2),
            d3f=lambda t: p * (p - 1) * (p - 2) * np.asarray(t, dtype=float) ** (p - 3),
            name=f"power({p})",
        )


def schwarzian(tm: TimeMap, t, h: float = 1e-3):
    """S(f) = f'''/f' - (3/2)(f''/f')^2; zero exactly for homographies."""
    t = np.asarray(t, dtype=float)
    if tm.df is not None and tm.d2f is not None and tm.d3f is not None:
        d1, d2, d3 = tm.df(t), tm.d2f(t), tm.d3f(t)
    else:
        f = tm.f
        d1 = (f(t + h) - f(t - h)) / (2 * h)
        d2 = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
        d3 = (f(t + 2 * h) - 2 * f(t + h) + 2 * f(t - h) - f(t - 2 * h)) / (2 * h**3)
    if np.any(np.asarray(d1) <= 0):
        raise ValueError("time map must be orientation preserving (f' > 0)")
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


############################################################
# spinor calculus on grids
############################################################


@dataclass
class LiftedSpinor:
    """Pauli pair (phi, chi) assembled into the Dirac 4-spinor of the lift."""

    grid: GridSpec
    phi: np.ndarray  # (2, n, n, n)
    chi: np.ndarray  # (2, n, n, n)
    m: float = 1.0
    hbar: float = 1.0
    time: float = 0.0

    @property
    def psi(self) -> np.ndarray:
        return np.concatenate([self.phi, self.chi], axis=0)


def _gamma_grids(p: GridPotential) -> GammaSet:
    """GammaSet with matrix axes leading and grid axes trailing: (5, 4, 4, grid)."""
    U = p.U
    w = np.moveaxis(p.varpi, 0, -1)  # (..., 3)
    gs = gamma_set(U, w)  # (grid, 5, 4, 4)
    up = np.moveaxis(gs.upper, (-3, -2, -1), (0, 1, 2))
    low = np.moveaxis(gs.lower, (-3, -2, -1), (0, 1, 2))
    return GammaSet(upper=up, lower=low)


def _dgamma_lower(p: GridPotential, mu: int) -> np.ndarray:
    """d_mu gamma_rho on the grid, shape (5, 4, 4, grid); mu in 0..4.

    Only the lower-left Pauli block of gamma_t and gamma_j moves: the lowered
    matrices are linear in (U, varpi) with constant coefficients.
    """
    out = np.zeros((5, 4, 4) + p.grid.shape, dtype=complex)
    if mu >= 3:
        return out  # static potentials, s-independent metric
    dU_mu = p.dU[mu]
    dw_mu = p.dvarpi[mu]  # (3, grid), d_mu varpi_j
    # gamma_t lower-left block is -U * I2
    out[3, 2, 0] = -dU_mu
    out[3, 3, 1] = -dU_mu
    # gamma_j lower-left block is varpi_j * I2
    for j in range(3):
        out[j, 2, 0] = dw_mu[j]
        out[j, 3, 1] = dw_mu[j]
    return out


def _christoffel_grids(p: GridPotential) -> np.ndarray:
    """Closed-form Gamma^rho_{mu nu} on the grid, shape (5, 5, 5, grid)."""
    grid = p.grid
    G = np.zeros((5, 5, 5) + grid.shape)
    dw = p.dvarpi
    om = dw - np.swapaxes(dw, 0, 1)
    acc = p.dU  # static: no dt varpi
    G[:3, 3, 3] = acc
    G[:3, :3, 3] = -0.5 * om
    G[:3, 3, :3] = -0.5 * om
    G[4, :3, :3] = 0.5 * (dw + np.swapaxes(dw, 0, 1))
    s_it = -p.dU - 0.5 * np.einsum("ij...,j...->i...", om, p.varpi)
    G[4, :3, 3] = s_it
    G[4, 3, :3] = s_it
    G[4, 3, 3] = -np.einsum("i...,i...->...", p.varpi, acc)
    return G


def spin_connection(p: GridPotential) -> np.ndarray:
    """Connection matrices omega_mu, shape (5, 4, 4, grid).

    nabla_mu psi = d_mu psi + omega_mu psi with
    omega_mu = -(1/8) [gamma^rho, d_mu gamma_rho - Gamma^sigma_{mu rho} gamma_sigma].
    omega_s vanishes: nothing depends on s and no Christoffel has a lower s.
    """
    gam = _gamma_grids(p)
    Gam = _christoffel_grids(p)
    out = np.zeros((5, 4, 4) + p.grid.shape, dtype=complex)
    for mu in range(4):  # omega_s = 0
        D = _dgamma_lower(p, mu) - np.einsum(
            "sr...,sab...->rab...", Gam[:, mu, :], gam.lower
        )
        comm = np.einsum("rab...,rbc...->ac...", gam.upper, D) - np.einsum(
            "rab...,rbc...->ac...", D, gam.upper
        )
        out[mu] = -comm / 8.0
    return out


def spin_connection_contraction(p: GridPotential) -> np.ndarray:
    """gamma^mu omega_mu, shape (4, 4, grid); the Dirac operator's potential term."""
    gam = _gamma_grids(p)
    om = spin_connection(p)
    return np.einsum("mab...,mbc...->ac...", gam.upper, om)


def covariant_spinor_derivative(
    psi: np.ndarray,
    p: GridPotential,
    m: float,
    hbar: float,
    dt_psi=None,
    connection=None,
) -> np.ndarray:
    """nabla_mu psi for a 4-spinor grid field, shape (5, 4, grid).

    The field is understood as the s-equivariant lift psi * exp(i m s / hbar),
    so the s slot is algebraic: nabla_s psi = (i m / hbar) psi. The t slot
    needs dt_psi (raises when absent), spatial slots are spectral.
    """
    psi = np.asarray(psi, dtype=complex)
    grid = p.grid
    out = np.zeros((5, 4) + grid.shape, dtype=complex)
    gpsi = gradient(psi, grid)  # (3, 4, grid)
    for mu in range(3):
        out[mu] = gpsi[mu]
    if dt_psi is None:
        raise ValueError("covariant t-derivative needs dt_psi")
    out[3] = np.asarray(dt_psi, dtype=complex)
    out[4] = (1j * m / hbar) * psi
    om = spin_connection(p) if connection is None else connection
    out += np.einsum("mab...,b...->ma...", om, psi)
    return out


def lie_derivative_spinor_density(
    psi: np.ndarray,
    p: GridPotential,
    X,
    m: float,
    hbar: float,
    dt_psi=None,
    t0: float = 0.0,
    weight: float = DENSITY_WEIGHT,
) -> np.ndarray:
    """Spinor-density Lie derivative along a conformal generator, on the s=0 slice.

    X is any object with attributes (omega, beta, gamma, delta, eps, eta)
    describing the vector field

        X^x = omega x x + t beta + gamma - 3 delta x,
        X^t = -5 delta t + eps,
        X^s = -beta.x - delta s + eta.

    Implements L_X = X^mu nabla_mu - (1/4) d_[mu X_nu] gamma^mu gamma^nu
    + weight (div X); indices are lowered with the full Brinkmann metric, so
    potential terms are included. The s-linear part of X^s acts through
    (im/hbar) s and drops on the s = 0 slice; its trace survives in div X.
    dt_psi is required whenever X^t is not identically zero at the field's
    time slice (pass the PDE right-hand side or a finite-difference stamp).
    """
    psi = np.asarray(psi, dtype=complex)
    grid = p.grid
    Xmesh = grid.mesh()
    om = np.asarray(X.omega, dtype=float)
    beta = np.asarray(X.beta, dtype=float)
    gam_tr = np.asarray(X.gamma, dtype=float)
    delta = float(X.delta)
    eps = float(X.eps)
    eta = float(X.eta)

    # X^mu on the s = 0 slice at time t0; X^t is spatially constant.
    Xx = (
        np.cross(om, np.moveaxis(Xmesh, 0, -1)).transpose(3, 0, 1, 2)
        + t0 * beta.reshape(3, 1, 1, 1)
        + gam_tr.reshape(3, 1, 1, 1)
        - 3.0 * delta * Xmesh
    )
    Xt = -5.0 * delta * t0 + eps
    Xs = -np.einsum("j,j...->...", beta, Xmesh) + eta
    ones = np.ones(grid.shape)

    Xup = np.zeros((5,) + grid.shape)
    Xup[:3] = Xx
    Xup[3] = Xt * ones
    Xup[4] = Xs

    # transport: X^j d_j + X^t d_t + X^s (im/hbar) + spin connection along X
    gpsi = gradient(psi, grid)
    transport = np.einsum("j...,ja...->a...", Xx, gpsi)
    if abs(Xt) > 0:
        if dt_psi is None:
            raise ValueError("generator moves time; dt_psi is required")
        transport = transport + Xt * np.asarray(dt_psi, dtype=complex)
    transport = transport + (1j * m / hbar) * Xs * psi
    conn = spin_connection(p)
    transport = transport + np.einsum(
        "m...,mab...,b...->a...", Xup, conn, psi
    )

    # d_mu X_nu with X_nu = g_{nu lambda} X^lambda, assembled analytically:
    # X^mu is polynomial in (x, t) so only the potentials are differentiated
    # (spectrally); taking an FFT derivative of the linear-in-x pieces
    # themselves would alias on the torus.
    U = p.U
    w = p.varpi
    dU = p.dU
    dw = p.dvarpi  # [i, j] = d_i varpi_j
    dXx = np.cross(om[None, :], np.eye(3)) - 3.0 * delta * np.eye(3)
    # dXx[i, j] = d_i X^j (constant matrix)

    dX = np.zeros((5, 5) + grid.shape)
    # d_i X_j = d_i X^j + (d_i varpi_j) X^t
    dX[:3, :3] = dXx.reshape(3, 3, 1, 1, 1) + dw * Xt
    # d_i X_t = (d_i varpi_k) X^k + varpi_k d_i X^k - 2 (d_i U) X^t + d_i X^s
    dX[:3, 3] = (
        np.einsum("ik...,k...->i...", dw, Xx)
        + np.einsum("k...,ik->i...", w, dXx)
        - 2.0 * dU * Xt
        - beta.reshape(3, 1, 1, 1) * ones
    )
    # d_i X_s = d_i X^t = 0
    # d_t rows: potentials are static, d_t X^x = beta, d_t X^t = -5 delta
    dX[3, :3] = beta.reshape(3, 1, 1, 1) + w * (-5.0 * delta)
    dX[3, 3] = np.einsum("j...,j->...", w, beta) - 2.0 * U * (-5.0 * delta)
    dX[3, 4] = -5.0 * delta * ones
    # d_s X_nu = g_{nu s} d_s X^s = -delta on the t slot
    dX[4, 3] = -delta * ones

    A = 0.5 * (dX - np.swapaxes(dX, 0, 1))
    gam = _gamma_grids(p)
    kos = np.zeros_like(psi)
    for mu in range(5):
        for nu in range(5):
            a = A[mu, nu]
            if not np.any(a):
                continue
            block = np.einsum(
                "ab...,bc...,c...->a...", gam.upper[mu], gam.upper[nu], psi
            )
            kos += -0.25 * a * block

    divX = -15.0 * delta
    return transport + kos + weight * divX * psi


def _sigma_grad(phi, grid):
    g = gradient(phi, grid)  # (3, 2, grid)
    return np.einsum("jab,jb...->a...", PAULI, g)


def dirac_residual(
    phi: np.ndarray,
    chi: np.ndarray,
    dt_phi: np.ndarray,
    p: GridPotential,
    m: float,
    hbar: float,
):
    """Pointwise residual of the two coupled Pauli-pair equations.

    line1: hbar sigma(grad) phi + 2 m chi - i m sigma(varpi) phi
    line2: i hbar dt_phi - m U phi - hbar sigma(grad) chi
           + i m sigma(varpi) chi - (hbar/4) sigma(curl varpi) phi

    dt_phi is an input: pass the analytic time derivative when known, or a
    centered difference of evolution snapshots (second-order in the step).
    Returns (node_residual, line1, line2).
    """
    grid = p.grid
    phi = np.asarray(phi, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    line1 = hbar * _sigma_grad(phi, grid) + 2.0 * m * chi
    line2 = (
        1j * hbar * np.asarray(dt_phi, dtype=complex)
        - m * p.U * phi
        - hbar * _sigma_grad(chi, grid)
    )
    if np.any(p.varpi):
        line1 = line1 - 1j * m * sigma_dot(p.varpi, phi)
        line2 = line2 + 1j * m * sigma_dot(p.varpi, chi)
        line2 = line2 - 0.25 * hbar * sigma_dot(p.curl_varpi, phi)
    node = np.sqrt(
        np.sum(np.abs(line1) ** 2, axis=0) + np.sum(np.abs(line2) ** 2, axis=0)
    )
    return node, line1, line2
