"""Measured hypotheses: Poincaré calibration, balancing, A_p and doubling.

Run: python3 demos/inequalities.py
"""

import numpy as np

from sobocomp.domain import build_grid, density_measure, lebesgue
from sobocomp.families import sine_decay
from sobocomp.forms import identity_form
from sobocomp.geometry import Quasimetric, ball
from sobocomp.inequalities import (
    ap_trend, balancing_probe, calibrate_delta, default_radius_grid, doubling_exponent,
)


def main():
    dom = build_grid(1, [0, 1], 1024)
    w = lebesgue(dom)
    Q = identity_form(dom)
    d = Quasimetric("euclidean")
    fam = sine_decay(dom, 8)
    grid = default_radius_grid(0.25)
    K = np.abs(dom.centers[:, 0] - 0.5) < 0.3

    print("Poincaré delta(eps) for the damped sines")
    for eps in (0.2, 0.1, 0.05):
        rep = calibrate_delta(fam, K, eps, 1.0, 2, w, w, w, Q, d, grid, max_centers=16)
        print(f"  eps={eps:<5} delta={rep.delta:.5f} worst quotient={rep.worst:.4f}")

    bal = balancing_probe(w, w, K, 1.0, 2, [0.1, 0.03, 0.01], d)
    print("\nbalancing with w = mu:", [f"{v:.2e}" for v in bal["values"]], bal["flag"])

    print("\nA_2 sup under 4x refinement on (-1, 1)")
    build = lambda n: build_grid(1, [-1, 1], n)
    for label, fn in (("|x|^(1/2)", lambda X: np.abs(X[:, 0]) ** 0.5),
                      ("|x|^(-2)", lambda X: np.abs(X[:, 0]) ** -2.0)):
        tr = ap_trend(build, fn, 2, 256)
        print(f"  {label:10s} coarse={tr['coarse']:.4g} fine={tr['fine']:.4g} growth={tr['growth']:.3f}")

    line = build_grid(1, [-1, 1], 4000)
    wh = density_measure(line, "abs(x)^0.5")
    c = line.cell_of([0.0005])
    pairs = [(ball(d, c, r, line), ball(d, c, r / 2, line)) for r in (0.05, 0.1, 0.2, 0.4)]
    print(f"\ndoubling exponent of |x|^(1/2) dx at 0: {doubling_exponent(wh, pairs)['theta']:.3f}")


if __name__ == "__main__":
    main()
