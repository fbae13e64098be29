import numpy as np
import pytest

from lln import fields
from lln.fields import (
    BispinorField,
    GridSpec,
    SnapshotDataError,
    band_limited_noise,
    gaussian_packet,
    load_snapshot,
    observables,
    sample_points,
    save_potentials,
    save_snapshot,
    shift_field,
    upsample,
)

G32 = GridSpec(n=32, length=16.0)
G16 = GridSpec(n=16, length=16.0)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(n=7, length=16.0)
    with pytest.raises(ValueError):
        GridSpec(n=2, length=16.0)
    with pytest.raises(ValueError):
        GridSpec(n=16, length=-1.0)
    g = GridSpec(n=16, length=8.0)
    assert g.dx == 0.5
    assert g.dv == 0.125
    ax = g.axis()
    assert ax[0] == -4.0 and ax[-1] == 4.0 - 0.5
    assert abs(ax[g.n // 2]) == 0.0


def test_kvec_matches_fftfreq():
    g = G16
    k1 = g.k1()
    assert np.allclose(k1, 2 * np.pi * np.fft.fftfreq(g.n, d=g.dx))
    # broadcast shapes multiply out to the full grid
    kx, ky, kz = g.kvec
    assert (kx + ky + kz).shape == g.shape


def test_gaussian_packet_moments():
    # sigma is the one-axis standard deviation of the density
    f = gaussian_packet(G32, sigma=1.2)
    assert abs(f.norm2 - 1.0) < 1e-13
    obs = observables(f)
    assert np.max(np.abs(obs.centroid)) < 1e-9
    X = G32.mesh()
    dens = np.sum(np.abs(f.data) ** 2, axis=0)
    for i in range(3):
        var = float(np.sum(X[i] ** 2 * dens) * G32.dv)
        assert abs(var - 1.44) < 1e-8
    assert not obs.edge_warning


def test_gaussian_packet_momentum_and_spin():
    k0 = (2 * np.pi / 16.0) * np.array([1.0, -2.0, 0.0])
    f = gaussian_packet(G32, sigma=1.0, k0=k0, spin=(0.0, 1.0))
    obs = observables(f)
    assert np.max(np.abs(obs.momentum - k0)) < 1e-12
    # spin expectation of the down spinor
    assert np.max(np.abs(obs.spin - np.array([0.0, 0.0, -0.5]))) < 1e-13


def test_gaussian_packet_center_offset():
    # centroid shifts slightly toward the nearest wrap image; 2e-8 at offset 2
    f = gaussian_packet(G32, sigma=1.0, center=(1.0, -0.5, 2.0))
    obs = observables(f)
    assert np.max(np.abs(obs.centroid - np.array([1.0, -0.5, 2.0]))) < 1e-7


def test_band_limited_noise_spectrum():
    a = band_limited_noise(G16, modes=3, seed=5)
    F = np.fft.fftn(a)
    j = np.fft.fftfreq(16, d=1.0 / 16)
    J = np.meshgrid(j, j, j, indexing="ij")
    outside = (np.abs(J[0]) > 3) | (np.abs(J[1]) > 3) | (np.abs(J[2]) > 3)
    assert np.max(np.abs(F[outside])) < 1e-10 * np.max(np.abs(F))
    assert abs(np.max(np.abs(a)) - 1.0) < 1e-12  # peak normalized
    # deterministic in the seed
    b = band_limited_noise(G16, modes=3, seed=5)
    assert np.array_equal(a, b)


def test_parseval():
    f = gaussian_packet(G32, sigma=1.2)
    F = fields.fftn(f.data)
    assert abs(np.sum(np.abs(f.data) ** 2) - np.sum(np.abs(F) ** 2) / G32.n**3) < 1e-12


def test_gradient_antisymmetry():
    # <f, dg/dx> = -<df/dx, g> for the spectral derivative
    a = band_limited_noise(G32, modes=4, seed=1)
    b = band_limited_noise(G32, modes=4, seed=2)
    da = fields.gradient(a, G32)
    db = fields.gradient(b, G32)
    for i in range(3):
        lhs = np.sum(a * db[i]) * G32.dv
        rhs = -np.sum(da[i] * b) * G32.dv
        assert abs(lhs - rhs) < 1e-12


def test_gradient_of_plane_wave():
    k = 2 * np.pi / 16.0 * np.array([2.0, -1.0, 3.0])
    X = G16.mesh()
    w = np.exp(1j * np.einsum("i,i...->...", k, X))
    dw = fields.gradient(w, G16)
    for i in range(3):
        assert np.max(np.abs(dw[i] - 1j * k[i] * w)) < 1e-12


def test_curl_div_identities():
    v = band_limited_noise(G16, modes=3, seed=9, comps=(3,))
    assert np.max(np.abs(fields.divergence(fields.curl(v, G16), G16))) < 1e-11
    s = band_limited_noise(G16, modes=3, seed=10)
    assert np.max(np.abs(fields.curl(fields.gradient(s, G16), G16))) < 1e-11


def test_laplacian_consistency():
    s = band_limited_noise(G16, modes=3, seed=11)
    lap = fields.laplacian(s, G16)
    div_grad = fields.divergence(fields.gradient(s, G16), G16)
    assert np.max(np.abs(lap - div_grad)) < 1e-11


def test_shift_field_lattice_is_roll():
    f = gaussian_packet(G32, sigma=1.2)
    sh = shift_field(f.data, G32, np.array([G32.dx, 0.0, 0.0]))
    assert np.max(np.abs(sh - np.roll(f.data, 1, axis=1))) < 1e-13


def test_shift_field_off_lattice_gaussian():
    # spectral shift against the analytic translated gaussian; sigma small
    # enough that wrap images sit below the tolerance
    f = gaussian_packet(G32, sigma=0.8, normalize=False)
    v = np.array([0.31, -0.73, 0.12])
    sh = shift_field(f.data, G32, v)
    ref = gaussian_packet(G32, sigma=0.8, center=v, normalize=False)
    assert np.max(np.abs(sh - ref.data)) < 1e-7


def test_sample_points_on_lattice_exact():
    f = band_limited_noise(G16, modes=4, seed=3, comps=(2,)).astype(complex)
    pts = G16.mesh().reshape(3, -1).T[::37]
    vals = sample_points(f, G16, pts)
    idx = np.round((pts + 8.0) / G16.dx).astype(int) % G16.n
    ref = f[:, idx[:, 0], idx[:, 1], idx[:, 2]]
    assert np.max(np.abs(vals - ref)) < 1e-12


def test_upsample_band_limited_exact():
    g48 = GridSpec(n=48, length=16.0)
    bl = band_limited_noise(G32, modes=5, seed=77, comps=(2,)).astype(complex)
    up = upsample(bl, G32, g48)
    ax = g48.axis()
    ref = fields.resample_separable(bl, G32, (ax, ax, ax))
    assert np.max(np.abs(up - ref)) < 1e-13
    n0 = np.sum(np.abs(bl) ** 2) * G32.dv
    n1 = np.sum(np.abs(up) ** 2) * g48.dv
    assert abs(n1 / n0 - 1.0) < 1e-12
    with pytest.raises(ValueError):
        upsample(bl, G32, GridSpec(n=16, length=16.0))
    with pytest.raises(ValueError):
        upsample(bl, G32, GridSpec(n=48, length=12.0))


def test_observables_edge_warning():
    f = gaussian_packet(G32, sigma=1.0, center=(7.5, 0.0, 0.0))
    obs = observables(f)
    assert obs.edge_warning
    assert obs.edge_fraction > 1e-3


def test_snapshot_roundtrip(tmp_path):
    f = gaussian_packet(G32, sigma=1.0, k0=(0.4, 0, 0), m=1.3, hbar=0.7)
    f.time = 0.25
    path = tmp_path / "state.lls"
    save_snapshot(path, f, G=2.0)
    snap = load_snapshot(path)
    assert snap.kind == "bispinor"
    assert snap.grid == G32
    assert snap.m == 1.3 and snap.hbar == 0.7 and snap.G == 2.0
    assert snap.time == 0.25
    g = snap.to_field()
    assert np.array_equal(g.data, f.data)  # bit exact
    assert g.m == f.m and g.time == f.time


def test_potential_snapshot_roundtrip(tmp_path):
    U = band_limited_noise(G16, modes=2, seed=4)
    w = band_limited_noise(G16, modes=2, seed=5, comps=(3,))
    path = tmp_path / "pot.lls"
    save_potentials(path, G16, U, w, m=1.0, hbar=1.0, G=1.0, time=0.0)
    snap = load_snapshot(path)
    assert snap.kind == "potential"
    U2, w2 = snap.to_potentials()
    assert np.array_equal(U2, U)
    assert np.array_equal(w2, w)
    with pytest.raises(ValueError):
        snap.to_field()  # wrong kind


def test_snapshot_rejects_nan(tmp_path):
    f = gaussian_packet(G16, sigma=1.0)
    path = tmp_path / "bad.lls"
    save_snapshot(path, f, G=1.0)
    raw = path.read_bytes()
    head, _, payload = raw.partition(b"\n")
    arr = np.frombuffer(payload, dtype=np.complex128).copy()
    arr[3] = np.nan + 0j
    path.write_bytes(head + b"\n" + arr.tobytes())
    with pytest.raises(SnapshotDataError):
        load_snapshot(path)


def test_snapshot_rejects_malformed_header(tmp_path):
    f = gaussian_packet(G16, sigma=1.0)
    path = tmp_path / "s.lls"
    save_snapshot(path, f, G=1.0)
    raw = path.read_bytes()
    head, _, payload = raw.partition(b"\n")
    import json

    hd = json.loads(head)
    for breakage in (
        {"format": "xxx"},
        {"dtype": "float32"},
        {"components": 3},
        {"n": [32, 32, 16]},
    ):
        h2 = dict(hd)
        h2.update(breakage)
        path.write_bytes(json.dumps(h2).encode() + b"\n" + payload)
        with pytest.raises(ValueError):
            load_snapshot(path)


def test_snapshot_rejects_truncated_payload(tmp_path):
    f = gaussian_packet(G16, sigma=1.0)
    path = tmp_path / "t.lls"
    save_snapshot(path, f, G=1.0)
    raw = path.read_bytes()
    path.write_bytes(raw[:-64])
    with pytest.raises(ValueError):
        load_snapshot(path)


def test_field_validation():
    with pytest.raises(ValueError):
        BispinorField(grid=G16, data=np.zeros((3,) + G16.shape, dtype=complex), m=1.0, hbar=1.0)
    with pytest.raises(ValueError):
        BispinorField(grid=G16, data=np.zeros((2, 8, 8, 8), dtype=complex), m=1.0, hbar=1.0)
