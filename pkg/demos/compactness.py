"""Extraction runs: global, abstract reduction, local, ball-function route,
and the unbounded negative control.

Run: python3 demos/compactness.py   (about 15 s)
"""

import math

import numpy as np

from sobocomp.domain import build_grid, lebesgue, lp_norm
from sobocomp.engine import FamilyS, run_abstract, run_general, run_local, run_two_measure
from sobocomp.errors import CertificateError
from sobocomp.families import sine, sine_decay
from sobocomp.forms import identity_form
from sobocomp.geometry import Quasimetric


def show(rep):
    for lv in rep.levels:
        print(f"    eps={lv['eps']:<6.4g} J={lv['J']:3d} M={lv['overlap_M']} I={lv['I']:.2e} II={lv['II']:.2e} "
              f"modulus={lv['modulus']:.3e} <= {lv['bound_L1']:.3e}  T={lv['T']} tail={lv['tail_size']}")


def main():
    dom = build_grid(1, [0, 1], 2048)
    w = lebesgue(dom)
    Q = identity_form(dom)
    d = Quasimetric("euclidean")
    fam = FamilyS(sine_decay(dom, 48), 2, math.inf, 1.0, q_list=(1, 2, 4))

    print("global run, f_k = sin(2 pi k x)/(2 pi k)")
    rep = run_general(fam, d, dom, w, w, w, Q)
    show(rep)
    print(f"  tail L^2 norm {lp_norm(rep.limit, 2, w):.2e}; subsequence length {len(rep.subsequence)}")

    ab = run_abstract([m.f for m in fam.members], rep.extras["covers"], rep.eps_schedule, 2, math.inf,
                      rep.constants["C2"], w, M=1.0, a_tables=rep.extras["a_tables"])
    print("abstract reduction gives the same subsequence:", ab.subsequence == rep.subsequence)

    x = dom.centers[:, 0]
    loc = run_local(fam, d, dom, w, w, w, Q, np.abs(x - 0.5) < 0.25, 4)
    print("\nlocal run on |x - 1/2| < 1/4, eps = 1/j")
    show(loc)

    fs, gs = [m.f for m in fam.members], [m.g[:, 0] for m in fam.members]
    tm = run_two_measure(fs, gs, w, lambda r, y: r, d, dom, w, 1.0, 2, math.inf)
    print("\nball-function route with a_*(B_r) = r")
    show(tm)
    # small radii give tight average tolerances, so a 48-member family keeps a short tail
    print(f"  subsequence {tm.subsequence}")

    print("\nnegative control, f_k = sin(2 pi k x)")
    try:
        run_general(FamilyS(sine(dom, 48), 2, math.inf, 10.0), d, dom, w, w, w, Q)
    except CertificateError as exc:
        print("  refused:", exc)


if __name__ == "__main__":
    main()
