"""Quasimetric balls, swallowing and the ball covers used by every extraction.

Run: python3 demos/covers.py
"""

import numpy as np

from sobocomp.domain import build_grid, lebesgue
from sobocomp.engine import select_K
from sobocomp.geometry import (
    Quasimetric, ball, build_cover, check_swallow, packing_bound, swallowing_gamma, verify_quasimetric,
)


def main():
    dom = build_grid(2, [0, 1], 64)
    w = lebesgue(dom)

    print("quasimetric constants")
    for d in (Quasimetric("euclidean"), Quasimetric("power", beta=2), Quasimetric("grushin", kappa=2.0)):
        k, bad = verify_quasimetric(d, dom, trials=20000)
        print(f"  {d.kind:10s} declared kappa={d.kappa:.2f}  sampled ratio={k:.3f}  violations={bad}")

    # two overlapping balls: gamma = kappa + 2 kappa^2 swallows the smaller one
    d = Quasimetric("euclidean")
    B1 = ball(d, [0.3, 0.5], 0.15, dom)
    B2 = ball(d, [0.5, 0.5], 0.2, dom)
    g = swallowing_gamma(d.kappa)
    print(f"\nswallowing with gamma={g}: {check_swallow(d, B1, B2, dom)}; with gamma=1: "
          f"{check_swallow(d, B1, B2, dom, gamma=1.0)}")

    print("\ncovers of K (largest-mass cells) at r=0.1, c0=2")
    bound = packing_bound(d, dom, 0.1, 2.0)
    for eps in (0.1, 0.05, 0.02):
        K = select_K(w, eps)
        plan = build_cover(d, dom, K, 0.1, 2.0, w, eps)
        v = plan.verify(K, w)
        print(f"  eps={eps:<5} J={plan.J:3d} deficit={plan.coverage_deficit:.4f} "
              f"observed overlap={plan.overlap_M:2d} bound={bound} covers K={v['covers_K']}")


if __name__ == "__main__":
    main()
