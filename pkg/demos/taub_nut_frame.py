"""The Taub-NUT Coriolis frame and its monopole field strength.

The preset's varpi is the gravitomagnetic potential of a mass with NUT
charge a: its curl is the radial monopole -2a x/r^3 (so the Coriolis
curvature squares to 4 a^2 / r^4) at the price of a string singularity
along half the symmetry axis.
"""

import numpy as np

from lln.gravity import taub_nut_varpi


def fd_curl(fn, x, h=5e-4):
    J = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        J[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return np.array([J[1, 2] - J[2, 1], J[2, 0] - J[0, 2], J[0, 1] - J[1, 0]])


def main():
    a = 0.7
    w = lambda x: taub_nut_varpi(x, a=a)

    print(f"NUT parameter a = {a}; curl varpi vs the monopole -2a x/r^3")
    print(f"{'point':>24} {'|curl - monopole|':>18} {'|curl|^2 r^4/4a^2':>18}")
    rng = np.random.default_rng(1)
    for _ in range(6):
        x = rng.uniform(-5, 5, size=3)
        while np.hypot(x[0], x[1]) < 1.0 or np.linalg.norm(x) < 2.0:
            x = rng.uniform(-5, 5, size=3)
        r = np.linalg.norm(x)
        c = fd_curl(w, x)
        mono = -2 * a * x / r**3
        print(f"({x[0]:6.2f},{x[1]:6.2f},{x[2]:6.2f}) "
              f"{np.max(np.abs(c - mono)):>18.2e} "
              f"{np.dot(c, c) * r**4 / (4 * a**2):>18.12f}")

    print("\nthe string: |varpi| along x = (0.05, 0, z)")
    for z in (2.0, 0.5, -0.5, -2.0):
        v = w(np.array([0.05, 0.0, z]))
        print(f"  z = {z:5.1f}   |varpi| = {np.linalg.norm(v):10.3f}"
              + ("   <- singular side" if z < 0 else ""))


if __name__ == "__main__":
    main()
