"""The twelve-parameter symmetry group of the self-gravitating wave equation.

Elements u = (A, b, c, d, e, g, h): a rotation A, a boost velocity b, a space
translation c, time-axis parameters (d, e, g) with the anisotropy constraint
d^3 g^2 = 1, and an s-translation h. The scale factor is nu = d g; a pure
dilation has d = nu^-2, g = nu^3 (space stretches by nu^3, time by nu^5,
giving the dynamical exponent z = 5/3).

Action on Bargmann coordinates:

    x -> (A x + b t + c) / g
    t -> (d t + e) / g
    s -> (s - <b, A x> - |b|^2 t / 2 + h) / nu

The spinor representation rescales mass by nu and acts on the Pauli pair by a
lower-triangular 2x2-block matrix; see :func:`represent`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .fields import (
    PAULI,
    BispinorField,
    GridSpec,
    gradient,
    sample_points,
    shift_field,
    resample_separable,
)
from .geometry import GridPotential, TimeMap

__all__ = [
    "SnGroupElement",
    "LieParams",
    "quat_mul",
    "quat_from_matrix",
    "matrix_from_quat",
    "su2_from_quat",
    "act",
    "inverse_act",
    "compose",
    "inverse",
    "exp_element",
    "lie_vector",
    "infinitesimal_action",
    "represent",
    "represent_pair",
    "represent_fn",
    "transform_potentials",
    "element_to_dict",
    "element_from_dict",
    "save_element",
    "load_element",
]

_TOL = 1e-9


############################################################
# quaternions (scalar-first, unit norm)
############################################################


def quat_mul(q1, q2):
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_sign_fix(q):
    """Canonical sign: scalar part positive, ties broken by first nonzero."""
    q = np.asarray(q, dtype=float)
    for comp in q:
        if comp > _TOL:
            return q.copy()
        if comp < -_TOL:
            return -q
    return q.copy()


def quat_from_matrix(A):
    """Unit quaternion of a proper rotation (Shepperd's method)."""
    A = np.asarray(A, dtype=float)
    tr = np.trace(A)
    cand = np.array([tr, A[0, 0], A[1, 1], A[2, 2]])
    which = int(np.argmax(cand))
    if which == 0:
        w = np.sqrt(1.0 + tr) / 2.0
        s = 4.0 * w
        q = np.array(
            [w, (A[2, 1] - A[1, 2]) / s, (A[0, 2] - A[2, 0]) / s, (A[1, 0] - A[0, 1]) / s]
        )
    else:
        i = which - 1
        j, k = (i + 1) % 3, (i + 2) % 3
        t = np.sqrt(1.0 + A[i, i] - A[j, j] - A[k, k])
        v = np.empty(4)
        v[1 + i] = t / 2.0
        v[0] = (A[k, j] - A[j, k]) / (2.0 * t)
        v[1 + j] = (A[j, i] + A[i, j]) / (2.0 * t)
        v[1 + k] = (A[k, i] + A[i, k]) / (2.0 * t)
        q = v
    return quat_sign_fix(q / np.linalg.norm(q))


def matrix_from_quat(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def su2_from_quat(q):
    """a = w - i (x s1 + y s2 + z s3); satisfies a sigma(v) a^dag = sigma(Av)."""
    w, x, y, z = q
    return w * np.eye(2, dtype=complex) - 1j * (
        x * PAULI[0] + y * PAULI[1] + z * PAULI[2]
    )


############################################################
# group elements
############################################################


@dataclass
class SnGroupElement:
    """(A, b, c, d, e, g, h) with A in SO(3), d, g > 0, d^3 g^2 = 1."""

    A: np.ndarray = dc_field(default_factory=lambda: np.eye(3))
    b: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    c: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    d: float = 1.0
    e: float = 0.0
    g: float = 1.0
    h: float = 0.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float).reshape(3)
        self.c = np.asarray(self.c, dtype=float).reshape(3)
        self.d = float(self.d)
        self.e = float(self.e)
        self.g = float(self.g)
        self.h = float(self.h)
        if self.A.shape != (3, 3):
            raise ValueError("rotation block must be a 3x3 matrix")
        if np.max(np.abs(self.A.T @ self.A - np.eye(3))) > 1e-8:
            raise ValueError("rotation block must be orthogonal (A^T A = 1)")
        if np.linalg.det(self.A) < 0:
            raise ValueError("rotation block must be proper (det A = +1)")
        if self.d <= 0 or self.g <= 0:
            raise ValueError("d and g must be positive")
        if abs(self.d**3 * self.g**2 - 1.0) > 1e-8:
            raise ValueError("scaling relation violated: d**3 * g**2 must equal 1")

    @property
    def nu(self) -> float:
        return self.d * self.g

    @cached_property
    def quat(self) -> np.ndarray:
        return quat_from_matrix(self.A)

    # ----- constructors -----

    @classmethod
    def identity(cls) -> "SnGroupElement":
        return cls()

    @classmethod
    def rotation(cls, axis, angle: float) -> "SnGroupElement":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        q = np.concatenate([[np.cos(angle / 2)], np.sin(angle / 2) * axis])
        return cls(A=matrix_from_quat(q))

    @classmethod
    def boost(cls, b) -> "SnGroupElement":
        return cls(b=np.asarray(b, dtype=float))

    @classmethod
    def translation(cls, c=(0.0, 0.0, 0.0), e: float = 0.0, h: float = 0.0) -> "SnGroupElement":
        return cls(c=np.asarray(c, dtype=float), e=e, h=h)

    @classmethod
    def dilation(cls, nu: float) -> "SnGroupElement":
        if nu <= 0:
            raise ValueError("dilation factor must be positive")
        return cls(d=nu**-2, g=nu**3)

    @classmethod
    def random(cls, seed: int = 0, scale: float = 0.5) -> "SnGroupElement":
        rng = np.random.default_rng(seed)
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        nu = float(np.exp(scale * rng.uniform(-1, 1)))
        return cls(
            A=matrix_from_quat(quat_sign_fix(q)),
            b=scale * rng.standard_normal(3),
            c=scale * rng.standard_normal(3),
            d=nu**-2,
            e=scale * rng.standard_normal(),
            g=nu**3,
            h=scale * rng.standard_normal(),
        )

    def time_map(self) -> TimeMap:
        """The induced reparametrization t -> (d t + e)/g (Schwarzian-free)."""
        return TimeMap.affine(self.d / self.g, self.e / self.g)


############################################################
# action, composition, inversion
############################################################


def act(u: SnGroupElement, x, t=0.0, s=0.0):
    """Apply u to event coordinates; x may carry leading batch axes (..., 3)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    Ax = np.einsum("ij,...j->...i", u.A, x)
    xh = (Ax + np.multiply.outer(t, u.b) + u.c) / u.g
    th = (u.d * t + u.e) / u.g
    sh = (
        s
        - np.einsum("...i,i->...", Ax, u.b)
        - 0.5 * np.dot(u.b, u.b) * t
        + u.h
    ) / u.nu
    return xh, th, sh


def inverse_act(u: SnGroupElement, xh, th=0.0, sh=0.0):
    return act(inverse(u), xh, th, sh)


def compose(u1: SnGroupElement, u2: SnGroupElement) -> SnGroupElement:
    """Group product: (u1 * u2) acts as u1 after u2."""
    nu2 = u2.nu
    A = u1.A @ u2.A
    b = u1.A @ u2.b + u2.d * u1.b
    c = u1.A @ u2.c + u2.e * u1.b + u2.g * u1.c
    d = u1.d * u2.d
    e = u1.d * u2.e + u2.g * u1.e
    g = u1.g * u2.g
    h = (
        u2.h
        + nu2 * u1.h
        - u2.d * np.dot(u1.b, u1.A @ u2.c)
        - 0.5 * u2.d * u2.e * np.dot(u1.b, u1.b)
    )
    return SnGroupElement(A=A, b=b, c=c, d=d, e=e, g=g, h=h)


def inverse(u: SnGroupElement) -> SnGroupElement:
    nu = u.nu
    At = u.A.T
    return SnGroupElement(
        A=At,
        b=-(At @ u.b) / u.d,
        c=At @ (u.e * u.b / nu - u.c / u.g),
        d=1.0 / u.d,
        e=-u.e / nu,
        g=1.0 / u.g,
        h=(0.5 * u.e * np.dot(u.b, u.b) / u.d - np.dot(u.b, u.c) - u.h) / nu,
    )


############################################################
# Lie algebra
############################################################


@dataclass
class LieParams:
    """Generator components: rotation omega, boost beta, translations
    (gamma: space, eps: time, eta: vertical), anisotropic dilation delta.

    Vector field: X^x = omega x x + t beta + gamma - 3 delta x,
    X^t = -5 delta t + eps, X^s = -beta.x - delta s + eta.
    """

    omega: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    beta: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    gamma: np.ndarray = dc_field(default_factory=lambda: np.zeros(3))
    delta: float = 0.0
    eps: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float).reshape(3)
        self.beta = np.asarray(self.beta, dtype=float).reshape(3)
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(3)


def lie_vector(X: LieParams):
    """Coordinate components of the generator as a callable (x, t, s) -> tuple."""

    def comps(x, t=0.0, s=0.0):
        x = np.asarray(x, dtype=float)
        xx = (
            np.cross(X.omega, x)
            + np.multiply.outer(np.asarray(t, dtype=float), X.beta)
            + X.gamma
            - 3.0 * X.delta * x
        )
        xt = -5.0 * X.delta * np.asarray(t, dtype=float) + X.eps
        xs = -np.einsum("j,...j->...", X.beta, x) - X.delta * np.asarray(s) + X.eta
        return xx, xt, xs

    return comps


def _cross_matrix(w):
    return np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )


def exp_element(X: LieParams, tau: float = 1.0) -> SnGroupElement:
    """Exponentiate a generator to a finite element.

    The action on (x, t, s) is affine, so the flow is a 6x6 homogeneous
    matrix exponential; the element parameters are read back off its blocks.
    """
    L = np.zeros((6, 6))
    L[:3, :3] = _cross_matrix(X.omega) - 3.0 * X.delta * np.eye(3)
    L[:3, 3] = X.beta
    L[3, 3] = -5.0 * X.delta
    L[4, :3] = -X.beta
    L[4, 4] = -X.delta
    L[:3, 5] = X.gamma
    L[3, 5] = X.eps
    L[4, 5] = X.eta
    E = expm(tau * L)
    nu = 1.0 / E[4, 4]
    d = float(np.sqrt(nu * E[3, 3]))
    g = nu / d
    A = g * E[:3, :3]
    b = g * E[:3, 3]
    c = g * E[:3, 5]
    e = g * E[3, 5]
    h = nu * E[4, 5]
    return SnGroupElement(A=A, b=b, c=c, d=d, e=e, g=g, h=h)


def infinitesimal_action(
    X: LieParams,
    psi: np.ndarray,
    grid: GridSpec,
    m: float,
    hbar: float,
    dt_psi=None,
    t0: float = 0.0,
    weight: float = 0.4,
) -> np.ndarray:
    """Group-side Lie derivative of a 4-spinor density on flat space.

    Built directly from the generator data (no metric machinery), as the
    strong-operator derivative: represent(exp(tau X)) = exp(-tau L) with L
    the returned operator. dt_psi is required whenever the generator moves
    time (eps != 0 or delta != 0 at t0 != 0).
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] != 4:
        raise ValueError("expected a 4-component spinor field")
    Xmesh = grid.mesh()
    Xx = (
        np.cross(X.omega, np.moveaxis(Xmesh, 0, -1)).transpose(3, 0, 1, 2)
        + t0 * X.beta.reshape(3, 1, 1, 1)
        + X.gamma.reshape(3, 1, 1, 1)
        - 3.0 * X.delta * Xmesh
    )
    Xt = -5.0 * X.delta * t0 + X.eps
    Xs = -np.einsum("j,j...->...", X.beta, Xmesh) + X.eta

    gpsi = gradient(psi, grid)
    out = np.einsum("j...,ja...->a...", Xx, gpsi)
    if abs(Xt) > 0:
        if dt_psi is None:
            raise ValueError("generator moves time; dt_psi is required")
        out = out + Xt * np.asarray(dt_psi, dtype=complex)
    out = out + (1j * m / hbar) * Xs * psi

    so = np.einsum("j,jab->ab", X.omega, PAULI)
    sb = np.einsum("j,jab->ab", X.beta, PAULI)
    block = np.zeros((4, 4), dtype=complex)
    block[:2, :2] = X.delta * np.eye(2) + 0.5j * so
    block[2:, 2:] = -X.delta * np.eye(2) + 0.5j * so
    block[2:, :2] = 0.5j * sb
    out = out + np.einsum("ab,b...->a...", block, psi)

    out = out + weight * (-15.0 * X.delta) * psi
    return out


############################################################
# spinor representation
############################################################


def _rep_phase_exponent(u: SnGroupElement, x_out, t_out: float):
    """f(x, t) such that the multiplier is exp(i m_in f / hbar)."""
    b2 = float(np.dot(u.b, u.b))
    return (
        u.g * np.einsum("j,j...->...", u.b, x_out)
        - (u.g / (2.0 * u.d)) * b2 * t_out
        + (u.e / (2.0 * u.d)) * b2
        - float(np.dot(u.b, u.c))
        - u.h
    )


def _pullback_points_map(u: SnGroupElement, tau: float):
    """x_in = M x_out + v for the slice pulled back to input time tau."""
    M = u.g * u.A.T
    v = -u.A.T @ (tau * u.b + u.c)
    return M, v


def _resample_linear(data, grid: GridSpec, M, v):
    """Interpolant of data evaluated at M x + v over the node mesh x.

    Exact fast paths: pure shift (spectral), axis-aligned M (separable).
    A general rotation falls back to dense chunked evaluation; keep those
    to small grids.
    """
    offdiag = M - np.diag(np.diag(M))
    if np.max(np.abs(M - np.eye(3))) < 1e-13:
        out = np.stack([shift_field(comp, grid, -v) for comp in data])
        return out
    if np.max(np.abs(offdiag)) < 1e-13:
        ax = grid.axis()
        pts = [np.diag(M)[i] * ax + v[i] for i in range(3)]
        return resample_separable(data, grid, pts)
    mesh = np.moveaxis(grid.mesh(), 0, -1).reshape(-1, 3)
    pts = mesh @ M.T + v
    vals = sample_points(data, grid, pts)
    return vals.reshape(data.shape[:-3] + grid.shape)


def _commensurate_warning(u: SnGroupElement, f: BispinorField):
    if not np.any(u.b):
        return
    kb = f.m * u.g * u.b / f.hbar
    base = 2.0 * np.pi / f.grid.length
    ratio = kb / base
    if np.max(np.abs(ratio - np.round(ratio))) > 1e-8:
        warnings.warn(
            "boost phase wavevector m g b / hbar is not a lattice mode; "
            "the represented field is discontinuous across the periodic seam",
            stacklevel=3,
        )


def represent(u: SnGroupElement, f: BispinorField) -> BispinorField:
    """Apply the spinor representation of u to a grid field.

    Output lives on the same grid at time (d t + e)/g, with mass nu m. The
    upper Pauli pair transforms among itself (the representation matrix is
    block lower triangular); use represent_pair to transport a derived chi.
    """
    phi_out, _ = _represent_arrays(u, f, chi=None)
    nu = u.nu
    t_hat = (u.d * f.time + u.e) / u.g
    return BispinorField(
        grid=f.grid,
        data=phi_out,
        m=nu * f.m,
        hbar=f.hbar,
        time=t_hat,
        mass_tag=nu * f.mass_tag,
    )


def represent_pair(u: SnGroupElement, f: BispinorField, chi: np.ndarray):
    """Transform (phi, chi) together; returns (field_out, chi_out)."""
    phi_out, chi_out = _represent_arrays(u, f, chi=np.asarray(chi, dtype=complex))
    nu = u.nu
    t_hat = (u.d * f.time + u.e) / u.g
    out = BispinorField(
        grid=f.grid,
        data=phi_out,
        m=nu * f.m,
        hbar=f.hbar,
        time=t_hat,
        mass_tag=nu * f.mass_tag,
    )
    return out, chi_out


def _represent_arrays(u: SnGroupElement, f: BispinorField, chi=None):
    _commensurate_warning(u, f)
    grid = f.grid
    nu = u.nu
    tau = f.time
    t_hat = (u.d * tau + u.e) / u.g
    M, v = _pullback_points_map(u, tau)
    phi_p = _resample_linear(f.data, grid, M, v)
    a = su2_from_quat(u.quat)
    f_exp = _rep_phase_exponent(u, grid.mesh(), t_hat)
    phase = np.exp(1j * f.m / f.hbar * f_exp)
    upper = nu**5 * a  # nu^6 * (a / nu)
    phi_out = phase * np.einsum("ab,b...->a...", upper, phi_p)
    chi_out = None
    if chi is not None:
        chi_p = _resample_linear(chi, grid, M, v)
        lower_left = nu**6 * (-0.5j) * np.einsum(
            "j,jab,bc->ac", nu * u.b, PAULI, a
        )
        lower_right = nu**7 * a  # nu^6 * nu
        chi_out = phase * (
            np.einsum("ab,b...->a...", lower_left, phi_p)
            + np.einsum("ab,b...->a...", lower_right, chi_p)
        )
    return phi_out, chi_out


def represent_fn(u: SnGroupElement, fn, m: float, hbar: float):
    """Representation on a callable Pauli pair fn(x, t) -> (..., 2).

    Returns (new_fn, new_mass); chain the mass when composing by hand.
    """
    nu = u.nu
    a = su2_from_quat(u.quat)
    upper = nu**5 * a
    At = u.A.T

    def out(x, t):
        x = np.asarray(x, dtype=float)
        tau = (u.g * t - u.e) / u.d
        x_in = np.einsum("ij,...j->...i", At, u.g * x - tau * u.b - u.c)
        val = fn(x_in, tau)  # (..., 2)
        f_exp = (
            u.g * np.einsum("j,...j->...", u.b, x)
            - (u.g / (2.0 * u.d)) * float(np.dot(u.b, u.b)) * t
            + (u.e / (2.0 * u.d)) * float(np.dot(u.b, u.b))
            - float(np.dot(u.b, u.c))
            - u.h
        )
        phase = np.exp(1j * m / hbar * f_exp)
        return phase[..., None] * np.einsum("ab,...b->...a", upper, val)

    return out, nu * m


############################################################
# induced action on the potentials
############################################################


def transform_potentials(u: SnGroupElement, p: GridPotential, t_hat=None) -> GridPotential:
    """Pull a static (U, varpi) pair through u.

    U -> nu^4 (U + varpi . A^T b) and varpi -> nu^2 A varpi, both evaluated
    at the pulled-back event. For a static input the output slice is taken
    at t_hat (default e/g, which pulls back to the t = 0 slice); elements
    with a boost make a static potential time dependent, so pick the slice
    you mean.
    """
    grid = p.grid
    nu = u.nu
    if t_hat is None:
        t_hat = u.e / u.g
    tau = (u.g * t_hat - u.e) / u.d
    M, v = _pullback_points_map(u, tau)
    U_p = _resample_linear(p.U[None], grid, M, v)[0]
    w_p = _resample_linear(p.varpi, grid, M, v)
    Atb = u.A.T @ u.b
    U_hat = nu**4 * (U_p + np.einsum("j...,j->...", w_p, Atb))
    w_hat = nu**2 * np.einsum("ij,j...->i...", u.A, w_p)
    return GridPotential(grid, U=U_hat, varpi=w_hat)


############################################################
# JSON serialization
############################################################


def element_to_dict(u: SnGroupElement) -> dict:
    return {
        "a": [float(x) for x in u.quat],
        "b": [float(x) for x in u.b],
        "c": [float(x) for x in u.c],
        "d": u.d,
        "e": u.e,
        "g": u.g,
        "h": u.h,
        "nu": u.nu,
    }


def element_from_dict(data: dict) -> SnGroupElement:
    for key in ("a", "b", "c", "d", "e", "g", "h"):
        if key not in data:
            raise ValueError(f"group element is missing field {key!r}")
    q = np.asarray(data["a"], dtype=float)
    if q.shape != (4,):
        raise ValueError("field 'a' must be a quaternion [w, x, y, z]")
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise ValueError("quaternion must have unit length")
    u = SnGroupElement(
        A=matrix_from_quat(q),
        b=data["b"],
        c=data["c"],
        d=float(data["d"]),
        e=float(data["e"]),
        g=float(data["g"]),
        h=float(data["h"]),
    )
    if "nu" in data and abs(float(data["nu"]) - u.nu) > 1e-6:
        raise ValueError("declared nu is inconsistent with d*g")
    return u


def save_element(path, u: SnGroupElement):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(element_to_dict(u), fh, indent=2)
        fh.write("\n")


def load_element(path) -> SnGroupElement:
    with open(path, "r", encoding="utf-8") as fh:
        return element_from_dict(json.load(fh))
