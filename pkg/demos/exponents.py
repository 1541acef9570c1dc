"""Exact exponent bookkeeping: conjugates, Sobolev gains, interpolation and
the s-John admissibility predicate.

Run: python3 demos/exponents.py
"""

from sobocomp.exponents import (
    INF, classical_sobolev_N, cutoff_conjugates, fmt, holder_conjugate, interpolation_lambda, john_N,
    sjohn_admissible, unweighted_sjohn_N,
)


def main():
    print("conjugates:", {fmt(p): fmt(holder_conjugate(p)) for p in (1, "3/2", 2, 3, INF)})
    print("classical N(n=3,p=2) =", fmt(classical_sobolev_N(3, 2)))
    print("John N(theta=3,p=2) =", fmt(john_N(3, 2)))
    print("lambda(q=2,N=6) =", fmt(interpolation_lambda(2, 6)), " lambda(q=3,N=inf) =",
          fmt(interpolation_lambda(3, INF)))
    print("cutoff (t, t') for s=4, p=2, sigma=2:", tuple(fmt(x) for x in cutoff_conjugates(4, 2, 2)))

    print("\nunweighted s-John threshold, n=3, p=2")
    for s in (1, "5/4", "3/2", 2):
        print(f"  s={s:>4}: N <= {fmt(unweighted_sjohn_N(3, 2, s))}")

    print("\nweighted part (i), n=2, p=2, a=1, b=0")
    for s in (1, 2, 3, 4):
        v = sjohn_admissible(2, 2, 1, 0, s, "i")
        extra = f"q < {fmt(v.q_upper)}, witness N={fmt(v.witness_N)}" if v.holds else v.binding_constraint
        print(f"  s={s}: holds={v.holds}  {extra}")


if __name__ == "__main__":
    main()
