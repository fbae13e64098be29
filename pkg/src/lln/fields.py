"""Periodic grids, spectral calculus, and bispinor field containers.

Everything downstream lives on a cubic box [-L/2, L/2)^3 sampled on an N^3
lattice. Derivatives are spectral (exact on band-limited data), quadrature is
the torus trapezoid rule, and off-lattice values come from the trigonometric
interpolant through the samples. Axis order of every gridded array is
``[..., x1, x2, x3]``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "PAULI",
    "GridSpec",
    "BispinorField",
    "Observables",
    "sigma_dot",
    "gradient",
    "laplacian",
    "divergence",
    "curl",
    "integrate",
    "inner",
    "norm2",
    "gaussian_packet",
    "band_limited_noise",
    "observables",
    "shift_field",
    "resample_separable",
    "sample_points",
    "upsample",
    "Snapshot",
    "SnapshotDataError",
    "save_snapshot",
    "save_potentials",
    "load_snapshot",
]

# Pauli matrices, index order [j, row, col].
PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)


def _workers() -> int:
    val = os.environ.get("LLN_THREADS", "").strip()
    if val:
        return max(1, int(val))
    return -1  # scipy: use all available


def fftn(f, axes=(-3, -2, -1)):
    return sfft.fftn(f, axes=axes, workers=_workers())


def ifftn(F, axes=(-3, -2, -1)):
    return sfft.ifftn(F, axes=axes, workers=_workers())


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic grid: n points per axis on a box of side length."""

    n: int
    length: float

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError("grid size must be even and >= 4")
        if not (self.length > 0):
            raise ValueError("box length must be positive")

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dv(self) -> float:
        return self.dx**3

    def axis(self) -> np.ndarray:
        """Box-centered chart: x_i = (i - n/2) dx, i = 0..n-1."""
        return (np.arange(self.n) - self.n // 2) * self.dx

    def mesh(self) -> np.ndarray:
        """Dense coordinates, shape (3, n, n, n)."""
        a = self.axis()
        return np.stack(np.meshgrid(a, a, a, indexing="ij"))

    def k1(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.dx)

    @cached_property
    def kvec(self):
        """Wavenumbers broadcast against the three trailing axes."""
        k = self.k1()
        return (
            k.reshape(-1, 1, 1),
            k.reshape(1, -1, 1),
            k.reshape(1, 1, -1),
        )

    @cached_property
    def k2(self) -> np.ndarray:
        k1, k2, k3 = self.kvec
        return k1**2 + k2**2 + k3**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # 2/3 rule on each axis
        k = self.k1()
        kcut = (2.0 / 3.0) * np.abs(k).max()
        keep = np.abs(k) <= kcut + 1e-12
        return (
            keep.reshape(-1, 1, 1)
            & keep.reshape(1, -1, 1)
            & keep.reshape(1, 1, -1)
        )


def sigma_dot(v, phi):
    """Pointwise sigma(v) phi for a Pauli pair phi[..., grid].

    v is either a constant 3-vector or a vector field (3, n, n, n).
    """
    v = np.asarray(v)
    return np.einsum("j...,jab,b...->a...", v, PAULI, phi)


def _spectral(f, grid, mult):
    F = fftn(np.asarray(f))
    out = ifftn(mult * F)
    if np.isrealobj(f):
        return out.real
    return out


def gradient(f, grid: GridSpec):
    """Spectral gradient; returns shape (3,) + f.shape."""
    F = fftn(np.asarray(f))
    out = np.stack([ifftn(1j * k * F) for k in grid.kvec])
    if np.isrealobj(f):
        return out.real
    return out


def laplacian(f, grid: GridSpec):
    return _spectral(f, grid, -grid.k2)


def divergence(v, grid: GridSpec):
    out = sum(ifftn(1j * k * fftn(v[j])) for j, k in enumerate(grid.kvec))
    if np.isrealobj(v):
        return out.real
    return out


def curl(v, grid: GridSpec):
    k1, k2, k3 = grid.kvec
    F = [fftn(v[j]) for j in range(3)]
    out = np.stack(
        [
            ifftn(1j * (k2 * F[2] - k3 * F[1])),
            ifftn(1j * (k3 * F[0] - k1 * F[2])),
            ifftn(1j * (k1 * F[1] - k2 * F[0])),
        ]
    )
    if np.isrealobj(v):
        return out.real
    return out


def integrate(f, grid: GridSpec):
    """Torus quadrature over the trailing grid axes."""
    return np.sum(f, axis=(-3, -2, -1)) * grid.dv


def inner(a, b, grid: GridSpec):
    """Full L2 pairing <a, b>, summed over all component axes."""
    return np.sum(np.conj(a) * b) * grid.dv


def norm2(a, grid: GridSpec) -> float:
    return float(np.sum(np.abs(a) ** 2) * grid.dv)


############################################################
# field container
############################################################


@dataclass
class BispinorField:
    """Upper Pauli pair phi on a grid; the lower pair chi is derived, not stored.

    mass_tag tracks the accumulated dilation factor applied by symmetry maps
    (starts at 1; the physical mass m is rescaled in step with it).
    """

    grid: GridSpec
    data: np.ndarray  # (2, n, n, n) complex
    m: float = 1.0
    hbar: float = 1.0
    time: float = 0.0
    mass_tag: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (2,) + self.grid.shape:
            raise ValueError(
                f"bispinor data must have shape (2, n, n, n), got {self.data.shape}"
            )

    def copy(self) -> "BispinorField":
        return replace(self, data=self.data.copy())

    @property
    def norm2(self) -> float:
        return norm2(self.data, self.grid)

    def normalized(self) -> "BispinorField":
        return replace(self, data=self.data / np.sqrt(self.norm2))


def gaussian_packet(
    grid: GridSpec,
    sigma: float = 1.0,
    center=(0.0, 0.0, 0.0),
    k0=(0.0, 0.0, 0.0),
    spin=(1.0, 0.0),
    m: float = 1.0,
    hbar: float = 1.0,
    time: float = 0.0,
    normalize: bool = True,
) -> BispinorField:
    """Gaussian wave packet, |phi|^2 of one-axis variance sigma^2.

    Envelope exp(-|x - c|^2 / (4 sigma^2)) times plane phase exp(i k0.(x - c)).
    """
    X = grid.mesh()
    c = np.asarray(center, dtype=float)
    k0 = np.asarray(k0, dtype=float)
    dxv = X - c.reshape(3, 1, 1, 1)
    r2 = np.sum(dxv**2, axis=0)
    phase = np.einsum("j,j...->...", k0, dxv)
    env = np.exp(-r2 / (4.0 * sigma**2) + 1j * phase)
    data = np.asarray(spin, dtype=complex).reshape(2, 1, 1, 1) * env
    f = BispinorField(grid=grid, data=data, m=m, hbar=hbar, time=time)
    return f.normalized() if normalize else f


def band_limited_noise(grid: GridSpec, modes: int = 4, seed: int = 0, comps=(), real: bool = True):
    """Random smooth field from Fourier modes with |k_i| <= modes * (2 pi / L).

    Useful as a generic test field: trigonometric interpolation and spectral
    derivatives are exact on it. Peak magnitude is normalized to ~1.
    """
    rng = np.random.default_rng(seed)
    shape = tuple(comps) + grid.shape
    F = np.zeros(shape, dtype=complex)
    idx = [i % grid.n for i in range(-modes, modes + 1)]
    sub = np.ix_(*([idx] * 3))
    block = tuple(comps) + (2 * modes + 1,) * 3
    vals = rng.standard_normal(block) + 1j * rng.standard_normal(block)
    F[(Ellipsis,) + sub] = vals
    f = ifftn(F)
    if real:
        f = f.real
    f /= np.max(np.abs(f))
    return f


@dataclass
class Observables:
    norm2: float
    centroid: np.ndarray  # <x>
    momentum: np.ndarray  # <p> canonical
    spin: np.ndarray  # <(hbar/2) sigma>
    edge_fraction: float  # norm fraction in the outer 10% shell of any axis
    edge_warning: bool


def observables(f: BispinorField) -> Observables:
    g = f.grid
    rho = np.sum(np.abs(f.data) ** 2, axis=0)
    total = float(integrate(rho, g))
    X = g.mesh()
    cen = integrate(X * rho, g) / total
    gphi = gradient(f.data, g)  # (3, 2, n, n, n)
    pm = f.hbar * np.imag(
        np.einsum("a...,ja...->j...", np.conj(f.data), gphi)
    )
    mom = integrate(pm, g) / total
    sdens = np.einsum("a...,jab,b...->j...", np.conj(f.data), PAULI, f.data).real
    spin = 0.5 * f.hbar * integrate(sdens, g) / total
    edge = np.max(np.abs(X), axis=0) > 0.45 * g.length
    frac = float(integrate(rho * edge, g) / total)
    return Observables(
        norm2=total,
        centroid=cen,
        momentum=mom,
        spin=spin,
        edge_fraction=frac,
        edge_warning=frac > 1e-6,
    )


############################################################
# trigonometric interpolation and resampling
############################################################

# The interpolant through samples f_j at x_j = (j - n/2) dx is
#   f(x) = (1/n) sum_k F_k exp(i k (x + L/2)),   F = fft(f),
# per axis; the L/2 offset matters because fft indexes from the box corner.


def _phase_matrix(grid: GridSpec, pts: np.ndarray) -> np.ndarray:
    """(P, n) matrix E with E @ fft(f) = interpolant values at pts (one axis)."""
    k = grid.k1()
    return np.exp(1j * np.outer(pts + grid.length / 2.0, k)) / grid.n


def shift_field(f, grid: GridSpec, v):
    """g(x) = f(x - v) by spectral phase shift (exact for the interpolant)."""
    v = np.asarray(v, dtype=float)
    F = fftn(np.asarray(f))
    k1, k2, k3 = grid.kvec
    F = F * np.exp(-1j * (k1 * v[0] + k2 * v[1] + k3 * v[2]))
    out = ifftn(F)
    return out.real if np.isrealobj(f) else out


def resample_separable(f, grid: GridSpec, axes_pts) -> np.ndarray:
    """Evaluate the interpolant on a tensor-product lattice.

    axes_pts = (p1, p2, p3), arrays of per-axis sample coordinates. Cost is
    O(n^4) per axis instead of O(n^6) for a dense point cloud. Leading
    component axes of f are carried along.
    """
    F = fftn(np.asarray(f))
    E1, E2, E3 = (_phase_matrix(grid, np.asarray(p, dtype=float)) for p in axes_pts)
    out = np.einsum("pa,qb,rc,...abc->...pqr", E1, E2, E3, F, optimize=True)
    return out.real if np.isrealobj(f) else out


def sample_points(f, grid: GridSpec, pts, chunk: int = 8192) -> np.ndarray:
    """Interpolant values at an arbitrary point cloud pts (P, 3).

    Dense O(P n^3) evaluation, chunked; meant for modest P or small grids.
    """
    pts = np.asarray(pts, dtype=float)
    F = fftn(np.asarray(f))
    lead = F.shape[:-3]
    P = pts.shape[0]
    out = np.empty(lead + (P,), dtype=complex)
    for lo in range(0, P, chunk):
        sl = slice(lo, min(lo + chunk, P))
        E1 = _phase_matrix(grid, pts[sl, 0])
        E2 = _phase_matrix(grid, pts[sl, 1])
        E3 = _phase_matrix(grid, pts[sl, 2])
        out[..., sl] = np.einsum(
            "pa,pb,pc,...abc->...p", E1, E2, E3, F, optimize=True
        )
    return out.real if np.isrealobj(f) else out


def upsample(f, grid: GridSpec, new_grid: GridSpec) -> np.ndarray:
    """Zero-pad the spectrum onto a finer grid (same box length)."""
    if new_grid.length != grid.length:
        raise ValueError("upsample requires matching box lengths")
    if new_grid.n < grid.n:
        raise ValueError("target grid must be at least as fine")
    F = fftn(np.asarray(f))
    lead = F.shape[:-3]
    out = np.zeros(lead + new_grid.shape, dtype=complex)
    h = grid.n // 2
    idx = np.r_[0:h, new_grid.n - h : new_grid.n]
    src = np.r_[0:h, grid.n - h : grid.n]
    out[(Ellipsis,) + np.ix_(idx, idx, idx)] = F[(Ellipsis,) + np.ix_(src, src, src)]
    out *= (new_grid.n / grid.n) ** 3
    res = ifftn(out)
    return res.real if np.isrealobj(f) else res


############################################################
# snapshot files (.lls)
############################################################

# One utf-8 JSON header line, then raw little-endian complex128. Payload index
# runs components fastest, then x1, then x2, then x3 slowest; in numpy terms a
# C-order array of shape (n3, n2, n1, components).

_SNAP_VERSION = 1


class SnapshotDataError(ValueError):
    """Payload is structurally valid but numerically unusable (NaN/Inf)."""


@dataclass
class Snapshot:
    kind: str  # "bispinor" | "potential"
    grid: GridSpec
    data: np.ndarray  # (C, n, n, n) complex
    m: float
    hbar: float
    G: float
    time: float
    mass_tag: float = 1.0

    def to_field(self) -> BispinorField:
        if self.kind != "bispinor":
            raise ValueError(f"snapshot kind is {self.kind!r}, not bispinor")
        return BispinorField(
            grid=self.grid,
            data=self.data,
            m=self.m,
            hbar=self.hbar,
            time=self.time,
            mass_tag=self.mass_tag,
        )

    def to_potentials(self):
        """Returns (U, varpi) as real arrays."""
        if self.kind != "potential":
            raise ValueError(f"snapshot kind is {self.kind!r}, not potential")
        return self.data[0].real.copy(), self.data[1:4].real.copy()


def _write_snapshot(path, kind, grid, data, m, hbar, G, time, mass_tag=1.0):
    data = np.asarray(data, dtype=complex)
    header = {
        "format": "lls",
        "version": _SNAP_VERSION,
        "kind": kind,
        "n": [grid.n, grid.n, grid.n],
        "length": grid.length,
        "components": int(data.shape[0]),
        "dtype": "complex128",
        "endianness": "little",
        "layout": "components-fastest",
        "m": float(m),
        "hbar": float(hbar),
        "G": float(G),
        "time": float(time),
        "mass_tag": float(mass_tag),
    }
    payload = np.ascontiguousarray(np.transpose(data, (3, 2, 1, 0))).astype("<c16")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(payload.tobytes())


def save_snapshot(path, f: BispinorField, G: float = 0.0):
    _write_snapshot(
        path, "bispinor", f.grid, f.data, f.m, f.hbar, G, f.time, f.mass_tag
    )


def save_potentials(path, grid: GridSpec, U, varpi, m=1.0, hbar=1.0, G=0.0, time=0.0):
    data = np.concatenate([np.asarray(U)[None], np.asarray(varpi)]).astype(complex)
    _write_snapshot(path, "potential", grid, data, m, hbar, G, time)


def load_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: malformed snapshot header") from exc
        for key in ("format", "kind", "n", "length", "components", "m", "hbar", "G", "time"):
            if key not in header:
                raise ValueError(f"{path}: snapshot header missing {key!r}")
        if header["format"] != "lls" or header.get("dtype") != "complex128":
            raise ValueError(f"{path}: not a recognized snapshot file")
        n1, n2, n3 = header["n"]
        if not (n1 == n2 == n3):
            raise ValueError(f"{path}: only cubic grids are supported")
        grid = GridSpec(n=int(n1), length=float(header["length"]))
        C = int(header["components"])
        raw = np.fromfile(fh, dtype="<c16")
    expect = C * grid.n**3
    if raw.size != expect:
        raise ValueError(
            f"{path}: payload has {raw.size} values, expected {expect}"
        )
    data = np.transpose(raw.reshape(n3, n2, n1, C), (3, 2, 1, 0)).copy()
    if not np.all(np.isfinite(data)):
        raise SnapshotDataError(f"{path}: snapshot contains non-finite values")
    kind = header["kind"]
    if kind == "bispinor" and C != 2:
        raise ValueError(f"{path}: bispinor snapshot must have 2 components")
    if kind == "potential" and C != 4:
        raise ValueError(f"{path}: potential snapshot must have 4 components")
    return Snapshot(
        kind=kind,
        grid=grid,
        data=data,
        m=float(header["m"]),
        hbar=float(header["hbar"]),
        G=float(header["G"]),
        time=float(header["time"]),
        mass_tag=float(header.get("mass_tag", 1.0)),
    )
