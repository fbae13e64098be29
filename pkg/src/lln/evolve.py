"""Dynamics of the upper Pauli pair.

After eliminating the lower pair algebraically, the wave equation is an
ordinary Schrodinger problem i hbar dphi/dt = H phi with

    H = (1/2m)(P - m varpi)^2 + m U - (hbar/4) sigma(curl varpi),

P = -i hbar grad. The same operator in developed form (Laplacian plus
symmetrized Coriolis advection plus |varpi|^2/2) is implemented separately
as a cross-check; the two agree to roundoff. Split-step integration covers
the varpi = 0 case (exactly unitary); a spectral RK4 path handles the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .fields import (
    PAULI,
    BispinorField,
    GridSpec,
    curl,
    divergence,
    fftn,
    gradient,
    ifftn,
    laplacian,
    sigma_dot,
)
from .geometry import GridPotential, flat_potential
from .gravity import mass_density, poisson_isolated, poisson_periodic

__all__ = [
    "chi_from_phi",
    "apply_hamiltonian",
    "hamiltonian_mismatch",
    "energy_expectation",
    "StabilityError",
    "max_frequency",
    "RunConfig",
    "RunResult",
    "run",
    "ground_state",
    "GroundStateResult",
    "CurrentCheck",
    "current_and_continuity",
    "gauge_transform",
    "spin_commutator_residual",
]


def chi_from_phi(phi, p: Optional[GridPotential], grid: GridSpec, m: float, hbar: float):
    """Algebraic lower pair: chi = -(hbar/2m) sigma(grad) phi + (i/2) sigma(varpi) phi."""
    phi = np.asarray(phi, dtype=complex)
    g = gradient(phi, grid)  # (3, 2, grid)
    chi = -(hbar / (2.0 * m)) * np.einsum("jab,jb...->a...", PAULI, g)
    if p is not None and np.any(p.varpi):
        chi = chi + 0.5j * sigma_dot(p.varpi, phi)
    return chi


def apply_hamiltonian(
    phi,
    p: Optional[GridPotential],
    grid: GridSpec,
    m: float,
    hbar: float,
    form: str = "canonical",
    dealias: bool = False,
):
    """H phi for the developed or canonical operator form.

    canonical: (1/2m)(P - m varpi)^2 + m U - (hbar/4) sigma(curl varpi)
    developed: -(hbar^2/2m) Delta + (i hbar/2){sigma(grad), sigma(varpi)}
               + m (U + |varpi|^2/2) + (hbar/4) sigma(curl varpi)

    Both are Hermitian on the grid (spectral derivatives are exactly
    antisymmetric) and agree pointwise to roundoff.
    """
    phi = np.asarray(phi, dtype=complex)
    if p is None:
        p = flat_potential(grid)
    w = p.varpi
    has_w = bool(np.any(w))
    if form == "canonical":
        out = -(hbar**2 / (2.0 * m)) * laplacian(phi, grid)
        if has_w:
            gphi = gradient(phi, grid)
            wgrad = np.einsum("j...,ja...->a...", w, gphi)
            divw = p.div_varpi
            # (i hbar/2)(div varpi) + i hbar varpi.grad comes from expanding
            # the square; |varpi|^2 completes it.
            out = out + 1j * hbar * wgrad + 0.5j * hbar * divw * phi
            out = out + 0.5 * m * np.sum(w**2, axis=0) * phi
            out = out - 0.25 * hbar * sigma_dot(p.curl_varpi, phi)
        out = out + m * p.U * phi
    elif form == "developed":
        out = -(hbar**2 / (2.0 * m)) * laplacian(phi, grid)
        if has_w:
            gphi = gradient(phi, grid)
            sg_sw = np.einsum(
                "jab,jb...->a...", PAULI, gradient(sigma_dot(w, phi), grid)
            )
            sw_sg = sigma_dot(w, np.einsum("jab,jb...->a...", PAULI, gphi))
            out = out + 0.5j * hbar * (sg_sw + sw_sg)
            out = out + 0.5 * m * np.sum(w**2, axis=0) * phi
            out = out + 0.25 * hbar * sigma_dot(p.curl_varpi, phi)
        out = out + m * p.U * phi
    else:
        raise ValueError(f"unknown hamiltonian form {form!r}")
    if dealias:
        F = fftn(out)
        F *= grid.dealias_mask
        out = ifftn(F)
    return out


def hamiltonian_mismatch(phi, p, grid, m, hbar) -> float:
    """max |H_canonical phi - H_developed phi| over nodes and components."""
    a = apply_hamiltonian(phi, p, grid, m, hbar, form="canonical")
    b = apply_hamiltonian(phi, p, grid, m, hbar, form="developed")
    return float(np.max(np.abs(a - b)))


def energy_expectation(phi, p, grid, m, hbar, form="canonical") -> float:
    h = apply_hamiltonian(phi, p, grid, m, hbar, form=form)
    return float(np.real(np.sum(np.conj(phi) * h)) * grid.dv)


class StabilityError(RuntimeError):
    pass


def max_frequency(p: Optional[GridPotential], grid: GridSpec, m: float, hbar: float) -> float:
    """Conservative spectral-radius estimate of H/hbar (rad per unit time)."""
    kmax = float(np.abs(grid.k1()).max())
    w = hbar * 3.0 * kmax**2 / (2.0 * m)  # corner of the k-lattice
    if p is not None:
        wmax = float(np.max(np.sqrt(np.sum(p.varpi**2, axis=0))))
        pot = float(np.max(np.abs(p.U + 0.5 * np.sum(p.varpi**2, axis=0))))
        w += m * pot / hbar
        w += wmax * np.sqrt(3.0) * kmax
        if np.any(p.varpi):
            w += 0.25 * float(np.max(np.sqrt(p.omega2)))
    return w


############################################################
# integrators
############################################################


@dataclass
class RunConfig:
    dt: float
    steps: int
    evolver: str = "split"  # "split" | "rk4"
    source: str = "free"  # "free" | "external" | "self"
    G: float = 1.0
    poisson: str = "periodic"  # self-consistent solve: "periodic" | "isolated"
    hamiltonian: str = "canonical"
    dealias: bool = False
    monitor_every: int = 0
    monitor: Optional[Callable] = None

    def __post_init__(self):
        if self.evolver not in ("split", "rk4"):
            raise ValueError(f"unknown evolver {self.evolver!r}")
        if self.source not in ("free", "external", "self"):
            raise ValueError(f"unknown source mode {self.source!r}")
        if self.poisson not in ("periodic", "isolated"):
            raise ValueError(f"unknown poisson mode {self.poisson!r}")
        if not (self.dt > 0) or self.steps < 0:
            raise ValueError("dt must be positive and steps nonnegative")


@dataclass
class RunResult:
    field: BispinorField
    times: list
    records: list
    warnings: list = dc_field(default_factory=list)


def _self_potential(phi, grid, m, G, poisson, base: Optional[GridPotential]):
    rho = mass_density(phi, grid, m)
    if poisson == "periodic":
        U = poisson_periodic(rho, grid, G)
    else:
        U = poisson_isolated(rho, grid, G)
    if base is not None:
        return GridPotential(grid, U=U + base.U, varpi=base.varpi)
    return GridPotential(grid, U=U)


def _potential_for(phi, cfg: RunConfig, grid, m, p: Optional[GridPotential]):
    if cfg.source == "free":
        return p if p is not None else None
    if cfg.source == "external":
        if p is None:
            raise ValueError("external source mode needs a potential")
        return p
    return _self_potential(phi, grid, m, cfg.G, cfg.poisson, p)


def run(f: BispinorField, cfg: RunConfig, p: Optional[GridPotential] = None) -> RunResult:
    """Advance a field cfg.steps times by cfg.dt.

    split: Strang splitting kick/drift/kick, exactly norm preserving;
    requires vanishing Coriolis potential. Self-consistent U is refreshed
    before every kick (the drift does not change |phi|, so this costs one
    Poisson solve per step).
    rk4: classical Runge-Kutta on the full H, any potentials; refuses steps
    beyond the stability bound with a suggested dt.
    """
    f = f.copy()
    grid, m, hbar = f.grid, f.m, f.hbar
    records, times, warns = [], [], []

    def note(step_field, pot):
        if cfg.monitor is not None:
            records.append(cfg.monitor(step_field, pot))
            times.append(step_field.time)

    if cfg.evolver == "split":
        if p is not None and np.any(p.varpi):
            raise ValueError(
                "split-step requires vanishing Coriolis potential; use rk4"
            )
        k2 = grid.k2
        drift = np.exp(-1j * hbar * k2 * cfg.dt / (2.0 * m))
        pot = _potential_for(f.data, cfg, grid, m, p)
        if cfg.monitor_every:
            note(f, pot)
        for step in range(cfg.steps):
            if pot is not None:
                f.data *= np.exp(-1j * (m / hbar) * pot.U * (cfg.dt / 2.0))
            f.data = ifftn(drift * fftn(f.data))
            if cfg.source == "self":
                pot = _self_potential(f.data, grid, m, cfg.G, cfg.poisson, p)
            if pot is not None:
                f.data *= np.exp(-1j * (m / hbar) * pot.U * (cfg.dt / 2.0))
            f.time += cfg.dt
            if cfg.monitor_every and (step + 1) % cfg.monitor_every == 0:
                note(f, pot)
    else:
        pot0 = _potential_for(f.data, cfg, grid, m, p)
        wmax = max_frequency(pot0, grid, m, hbar)
        if cfg.dt * wmax > 2.5:
            raise StabilityError(
                f"rk4 step {cfg.dt:g} exceeds the stability bound for this "
                f"operator (max frequency ~{wmax:.3g}); "
                f"use dt <= {2.5 / wmax:.3g}"
            )

        def rhs(phi):
            pk = _potential_for(phi, cfg, grid, m, p)
            return (-1j / hbar) * apply_hamiltonian(
                phi, pk, grid, m, hbar, form=cfg.hamiltonian, dealias=cfg.dealias
            )

        if cfg.monitor_every:
            note(f, pot0)
        for step in range(cfg.steps):
            y = f.data
            k1 = rhs(y)
            k2_ = rhs(y + 0.5 * cfg.dt * k1)
            k3 = rhs(y + 0.5 * cfg.dt * k2_)
            k4 = rhs(y + cfg.dt * k3)
            f.data = y + (cfg.dt / 6.0) * (k1 + 2 * k2_ + 2 * k3 + k4)
            f.time += cfg.dt
            if cfg.monitor_every and (step + 1) % cfg.monitor_every == 0:
                note(f, _potential_for(f.data, cfg, grid, m, p))

    if not np.all(np.isfinite(f.data)):
        raise StabilityError("evolution produced non-finite amplitudes")
    return RunResult(field=f, times=times, records=records, warnings=warns)


############################################################
# ground state by imaginary-time relaxation
############################################################


@dataclass
class GroundStateResult:
    field: BispinorField
    energy: float  # <H>, the chemical potential in self-sourced mode
    iterations: int
    converged: bool
    potential: GridPotential
    energy_sn: Optional[float] = None  # T + W/2, self-sourced mode only


def ground_state(
    f0: BispinorField,
    G: float = 1.0,
    dtau: float = 0.05,
    tol: float = 1e-10,
    max_iter: int = 20000,
    source: str = "self",
    p: Optional[GridPotential] = None,
    poisson: str = "periodic",
) -> GroundStateResult:
    """Imaginary-time split-step relaxation to the lowest state.

    Self-consistent mode refreshes U from the renormalized density every
    sweep. Convergence is declared when the energy settles to within tol
    between consecutive sweeps.
    """
    if source not in ("self", "external"):
        raise ValueError("ground_state supports 'self' or 'external' sources")
    if source == "external" and p is None:
        raise ValueError("external source needs a potential")
    if p is not None and np.any(p.varpi):
        raise ValueError("imaginary-time split-step requires vanishing varpi")
    f = f0.copy().normalized()
    grid, m, hbar = f.grid, f.m, f.hbar
    decay = np.exp(-hbar * grid.k2 * dtau / (2.0 * m))
    E_prev = np.inf
    pot = p
    it = 0
    for it in range(1, max_iter + 1):
        if source == "self":
            pot = _self_potential(f.data, grid, m, G, poisson, p)
        f.data *= np.exp(-(m / hbar) * pot.U * (dtau / 2.0))
        f.data = ifftn(decay * fftn(f.data))
        f.data *= np.exp(-(m / hbar) * pot.U * (dtau / 2.0))
        f = f.normalized()
        E = energy_expectation(f.data, pot, grid, m, hbar)
        if abs(E - E_prev) < tol:
            return GroundStateResult(
                field=f, energy=E, iterations=it, converged=True, potential=pot,
                energy_sn=_sn_energy(f, pot, E) if source == "self" else None,
            )
        E_prev = E
    return GroundStateResult(
        field=f, energy=E_prev, iterations=it, converged=False, potential=pot,
        energy_sn=_sn_energy(f, pot, E_prev) if source == "self" else None,
    )


def _sn_energy(f: BispinorField, pot: GridPotential, e_total: float) -> float:
    # <H> double counts the pair interaction; the particle energy is T + W/2
    dens = np.sum(np.abs(f.data) ** 2, axis=0)
    W = float(np.sum(pot.U * dens) * f.grid.dv) * f.m
    return e_total - 0.5 * W


############################################################
# currents, gauge maps, spin precession
############################################################


@dataclass
class CurrentCheck:
    rho: np.ndarray
    J_pair: np.ndarray  # from the bilinear in (phi, chi)
    J_phi: np.ndarray  # phi-only form with magnetization curl
    dt_rho: np.ndarray
    residual: np.ndarray  # dt_rho + div J_pair
    residual_max: float
    form_mismatch: float  # max |J_pair - J_phi|


def current_and_continuity(
    phi, p: Optional[GridPotential], grid: GridSpec, m: float, hbar: float
) -> CurrentCheck:
    """Probability density/current and the continuity residual.

    J is computed twice: as i(phi+ sigma chi - chi+ sigma phi) with the
    algebraic chi, and in the phi-only form
    (hbar/m) Im(phi+ grad phi) + (hbar/2m) curl(phi+ sigma phi) - varpi rho.
    dt_rho is evaluated through the equation of motion, so the continuity
    residual measures operator consistency, not integrator error.
    """
    phi = np.asarray(phi, dtype=complex)
    pau = PAULI
    rho = np.sum(np.abs(phi) ** 2, axis=0)
    chi = chi_from_phi(phi, p, grid, m, hbar)
    z = np.einsum("a...,jab,b...->j...", np.conj(phi), pau, chi)
    J_pair = -2.0 * np.imag(z)
    gphi = gradient(phi, grid)
    J_phi = (hbar / m) * np.imag(
        np.einsum("a...,ja...->j...", np.conj(phi), gphi)
    )
    spin_dens = np.einsum("a...,jab,b...->j...", np.conj(phi), pau, phi).real
    J_phi = J_phi + (hbar / (2.0 * m)) * curl(spin_dens, grid)
    if p is not None and np.any(p.varpi):
        J_phi = J_phi - p.varpi * rho
    h = apply_hamiltonian(phi, p, grid, m, hbar)
    dt_rho = (2.0 / hbar) * np.imag(np.einsum("a...,a...->...", np.conj(phi), h))
    residual = dt_rho + divergence(J_pair, grid)
    return CurrentCheck(
        rho=rho,
        J_pair=J_pair,
        J_phi=J_phi,
        dt_rho=dt_rho,
        residual=residual,
        residual_max=float(np.max(np.abs(residual))),
        form_mismatch=float(np.max(np.abs(J_pair - J_phi))),
    )


def gauge_transform(f: BispinorField, p: Optional[GridPotential], theta, dt_theta=None):
    """Vertical gauge map: phi' = exp(i m theta/hbar) phi, varpi' = varpi + grad theta,
    U' = U - dt_theta. All densities and currents are invariant."""
    grid = f.grid
    theta = np.asarray(theta, dtype=float)
    if p is None:
        p = flat_potential(grid)
    f2 = f.copy()
    f2.data = np.exp(1j * f.m / f.hbar * theta) * f.data
    U2 = p.U - (0.0 if dt_theta is None else np.asarray(dt_theta))
    p2 = GridPotential(grid, U=U2, varpi=p.varpi + gradient(theta, grid))
    return f2, p2


def spin_commutator_residual(Omega, hbar: float = 1.0) -> float:
    """Exact 2x2 check of the precession law for uniform vorticity.

    (i/hbar) [ -(hbar/4) sigma(Omega), S_j ] must equal (S x Omega)_j / 2
    with S = (hbar/2) sigma; returns the max operator-norm deviation.
    """
    pau = PAULI
    Omega = np.asarray(Omega, dtype=float)
    Hs = -0.25 * hbar * np.einsum("j,jab->ab", Omega, pau)
    worst = 0.0
    for j in range(3):
        S_j = 0.5 * hbar * pau[j]
        comm = (1j / hbar) * (Hs @ S_j - S_j @ Hs)
        # (S x Omega)_j = sigma(v), v = (hbar/2) Omega x e_j
        v = 0.5 * hbar * np.cross(Omega, np.eye(3)[j])
        target = 0.5 * np.einsum("k,kab->ab", v, pau)
        worst = max(worst, float(np.max(np.abs(comm - target))))
    return worst
