"""Free Gaussian spreading against the closed-form variance law.

A packet of density width sigma0 evolved by the split-step integrator
should follow var(t) = sigma0^2 + (hbar t / 2 m sigma0)^2 per axis.
"""

import numpy as np

from lln.fields import GridSpec, gaussian_packet, integrate
from lln.evolve import RunConfig, run


def variance(f):
    X = f.grid.mesh()
    rho = np.sum(np.abs(f.data) ** 2, axis=0)
    v = np.array([float(integrate(rho * X[j] ** 2, f.grid)) for j in range(3)])
    return v / float(integrate(rho, f.grid))


def main():
    grid = GridSpec(32, 16.0)
    sigma0 = 1.2
    f = gaussian_packet(grid, sigma=sigma0)
    print(f"grid {grid.n}^3, box {grid.length}, sigma0 = {sigma0}")
    print(f"{'t':>6} {'var (measured)':>16} {'var (analytic)':>16} {'rel err':>10}")
    for _ in range(5):
        v = variance(f)
        expect = sigma0**2 + (f.hbar * f.time / (2 * f.m * sigma0)) ** 2
        print(f"{f.time:6.2f} {v.mean():16.10f} {expect:16.10f} "
              f"{abs(v.mean() - expect) / expect:10.2e}")
        f = run(f, RunConfig(dt=1e-2, steps=25, evolver="split")).field
    print(f"norm after {f.time:.2f} time units: {f.norm2:.15f}")


if __name__ == "__main__":
    main()
