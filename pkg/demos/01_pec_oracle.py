"""Checking the eigensolver against a closed cylinder with a known answer.

A dielectric cylinder (n = 2.6, radius 450 nm) with perfectly conducting
walls has an m = 0 TM mode whose frequency follows from the first zero of
J0: f = x01 c / (2 pi n a). Refining the grid should shrink the error by
about 4x per halving of h, the signature of a second-order scheme.

    python demos/01_pec_oracle.py
"""

import math
import time

from scipy.constants import c as C0
from scipy.special import jn_zeros

from nanopan.eigensolver import build_domain, pec_cylinder, solve_modes

RADIUS, INDEX, LENGTH = 450e-9, 2.6, 450e-9


def main():
    f_exact = jn_zeros(0, 1)[0] * C0 / (2 * math.pi * INDEX * RADIUS)
    print(f"analytic TM010: {f_exact / 1e12:.4f} THz")
    print(f"{'h [nm]':>7} {'f [THz]':>10} {'rel. error':>11} {'order':>6} {'time':>6}")
    prev = None
    for h in (10e-9, 5e-9, 2.5e-9):
        t0 = time.perf_counter()
        dom = build_domain(pec_cylinder(RADIUS, LENGTH, INDEX), h, 0)
        mode = solve_modes(dom, 2 * math.pi * 0.97 * f_exact)[0]
        err = abs(mode.frequency / f_exact - 1)
        order = f"{math.log2(prev / err):.2f}" if prev else ""
        print(f"{h * 1e9:7.1f} {mode.frequency / 1e12:10.4f} {err:11.2e} {order:>6} "
              f"{time.perf_counter() - t0:5.1f}s")
        prev = err


if __name__ == "__main__":
    main()
