"""Exact exponent arithmetic.

Exponents are :class:`fractions.Fraction` values or :data:`INF`.  Floats are
accepted on input and converted through their shortest repr, so ``0.5``
becomes ``1/2`` rather than a 53-bit dyadic.
"""

from dataclasses import dataclass
from fractions import Fraction
import math

from .errors import ExponentRangeError, PreconditionError

INF = math.inf


def as_exponent(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise PreconditionError(f"not an exponent: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if math.isinf(x) and x > 0:
            return INF
        if not math.isfinite(x):
            raise PreconditionError(f"not an exponent: {x!r}")
        return Fraction(repr(x))
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "oo", "∞"):
            return INF
        try:
            return Fraction(s)
        except ValueError:
            raise PreconditionError(f"cannot parse exponent {x!r}") from None
    raise PreconditionError(f"not an exponent: {x!r}")


def reciprocal(x):
    """1/x with 1/INF = 0."""
    x = as_exponent(x)
    if x == INF:
        return Fraction(0)
    if x == 0:
        return INF
    return 1 / x


def fmt(x):
    """Canonical string: 'inf', an integer, or 'num/den'."""
    if x == INF:
        return "inf"
    x = as_exponent(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def holder_conjugate(p):
    p = as_exponent(p)
    if p == INF:
        return Fraction(1)
    if p < 1:
        raise ExponentRangeError(f"Hölder conjugate needs p >= 1, got {fmt(p)}")
    if p == 1:
        return INF
    return p / (p - 1)


def classical_sobolev_N(n, p):
    n, p = as_exponent(n), as_exponent(p)
    if not (1 <= p < n):
        raise ExponentRangeError(f"classical gain needs 1 <= p < n, got n={fmt(n)}, p={fmt(p)}")
    return n * p / (n - p)


def john_N(theta, p):
    theta, p = as_exponent(theta), as_exponent(p)
    if p < 1:
        raise ExponentRangeError(f"p must be >= 1, got {fmt(p)}")
    if theta == INF:
        return p
    if not theta > p:
        raise ExponentRangeError(f"John gain needs theta > p, got theta={fmt(theta)}, p={fmt(p)}")
    return theta * p / (theta - p)


def interpolation_lambda(q, N):
    """lambda with 1/q = lambda/1 + (1-lambda)/N."""
    q, N = as_exponent(q), as_exponent(N)
    if q < 1:
        raise ExponentRangeError(f"q must be >= 1, got {fmt(q)}")
    if q == 1:
        return Fraction(1)
    if N != INF and q >= N:
        raise ExponentRangeError(f"interpolation needs q < N, got q={fmt(q)}, N={fmt(N)}")
    if q == INF:
        raise ExponentRangeError("interpolation needs finite q")
    return (reciprocal(q) - reciprocal(N)) / (1 - reciprocal(N))


def cutoff_conjugates(s, p, sigma):
    """(t, t') with t = s/p; requires s >= p * sigma'."""
    s, p, sigma = as_exponent(s), as_exponent(p), as_exponent(sigma)
    if sigma <= 1:
        raise ExponentRangeError(f"sigma must exceed 1, got {fmt(sigma)}")
    sp = holder_conjugate(sigma)
    need = p * sp
    if s < need:
        raise ExponentRangeError(
            f"cutoff order s={fmt(s)} is below p*sigma'={fmt(need)}",
            witness={"s": fmt(s), "p_sigma_prime": fmt(need)},
        )
    if s == INF:
        return INF, Fraction(1)
    t = s / p
    return t, holder_conjugate(t)


@dataclass(frozen=True)
class AdmissibilityVerdict:
    holds: bool
    binding_constraint: str
    inv_q_threshold: object = None
    q_upper: object = None
    witness_N: object = None

    def as_dict(self):
        return {
            "holds": self.holds,
            "binding_constraint": self.binding_constraint,
            "inv_q_threshold": None if self.inv_q_threshold is None else fmt(self.inv_q_threshold),
            "q_upper": None if self.q_upper is None else fmt(self.q_upper),
            "witness_N": None if self.witness_N is None else fmt(self.witness_N),
        }


def _q_upper(thr):
    return INF if thr <= 0 else 1 / thr


def sjohn_admissible(n, p, a, b, s, part="i", q=None):
    """Admissibility of (n, p, a, b, s) for the weighted s-John embedding.

    Part ``"i"``: n + a > s(n-1+b) - p + 1, with the open range
    1/q > max{1/p - 1/n, (s(n-1+b) - p + 1)/((n+a)p)}.

    Part ``"ii"`` (p > 1, b - a < p): n + ap > s(n-1+b) - p + 1 >= n + a, with
    1/q > max{b/p - 1, (s(n-1+b) - p - n + 1)/p} / a.

    ``witness_N`` is the midpoint in 1/N between the threshold (clipped at 0)
    and ``1/q`` when ``q`` is given, else the top of the admissible range.
    """
    n, p, a, b, s = (as_exponent(v) for v in (n, p, a, b, s))
    if INF in (n, p, a, b, s):
        raise ExponentRangeError("s-John parameters must be finite")
    if n < 1 or n.denominator != 1:
        raise ExponentRangeError(f"n must be a positive integer, got {fmt(n)}")
    if p < 1:
        raise ExponentRangeError(f"p must be >= 1, got {fmt(p)}")
    if a < 0:
        raise ExponentRangeError(f"a must be >= 0, got {fmt(a)}")
    if s < 1:
        raise ExponentRangeError(f"s must be >= 1, got {fmt(s)}")
    lhs = s * (n - 1 + b) - p + 1
    if part == "i":
        if not n + a > lhs:
            return AdmissibilityVerdict(False, "n+a>s(n-1+b)-p+1")
        t_sob = 1 / p - 1 / n
        t_sj = lhs / ((n + a) * p)
        thr = max(t_sob, t_sj)
        tag = "1/p-1/n" if t_sob >= t_sj else "s(n-1+b)-p+1/((n+a)p)"
        top = 1 / p  # q >= p: only the gain over p is interesting
        if q is not None:
            top = min(top, reciprocal(q))
        if not thr < top:
            return AdmissibilityVerdict(False, "empty q-range", thr, _q_upper(thr))
        lo = max(thr, Fraction(0))
        return AdmissibilityVerdict(True, tag, thr, _q_upper(thr), reciprocal((lo + top) / 2))
    if part == "ii":
        if not p > 1:
            raise ExponentRangeError(f"part ii needs p > 1, got {fmt(p)}")
        if not b - a < p:
            raise ExponentRangeError(f"part ii needs b-a < p, got b-a={fmt(b - a)}, p={fmt(p)}")
        if a == 0:
            return AdmissibilityVerdict(False, "a=0")
        if not n + a * p > lhs:
            return AdmissibilityVerdict(False, "n+ap>s(n-1+b)-p+1")
        if not lhs >= n + a:
            return AdmissibilityVerdict(False, "s(n-1+b)-p+1>=n+a")
        t_b = b / p - 1
        t_s = (s * (n - 1 + b) - p - n + 1) / p
        thr = max(t_b, t_s) / a
        tag = "b/p-1" if t_b >= t_s else "(s(n-1+b)-p-n+1)/p"
        top = Fraction(1) if q is None else reciprocal(q)
        if not thr < top:
            return AdmissibilityVerdict(False, "empty q-range", thr, _q_upper(thr))
        lo = max(thr, Fraction(0))
        return AdmissibilityVerdict(True, tag, thr, _q_upper(thr), reciprocal((lo + top) / 2))
    raise PreconditionError(f"part must be 'i' or 'ii', got {part!r}")


def unweighted_sjohn_N(n, p, s):
    """Sup of admissible N from 1/N >= (s(n-1) - p + 1)/(np).

    The boundary s = 1 + p/(n-1) is accepted and gives N = p.
    """
    n, p, s = as_exponent(n), as_exponent(p), as_exponent(s)
    if s < 1:
        raise ExponentRangeError(f"s must be >= 1, got {fmt(s)}")
    if n > 1 and s > 1 + p / (n - 1):
        raise ExponentRangeError(
            f"s={fmt(s)} exceeds 1+p/(n-1)={fmt(1 + p / (n - 1))}",
        )
    num = s * (n - 1) - p + 1
    if num <= 0:
        return INF
    return n * p / num


def exponent_table(grid):
    """Verdict rows for a parameter grid (list of dicts with n,p,a,b,s,part)."""
    rows = []
    for g in grid:
        try:
            v = sjohn_admissible(g["n"], g["p"], g["a"], g["b"], g["s"], g.get("part", "i"))
            row = {k: fmt(as_exponent(g[k])) for k in ("n", "p", "a", "b", "s")}
            row["part"] = g.get("part", "i")
            row.update(v.as_dict())
            row["error"] = None
        except ExponentRangeError as exc:
            row = {k: str(g[k]) for k in ("n", "p", "a", "b", "s")}
            row["part"] = g.get("part", "i")
            row.update({"holds": False, "binding_constraint": "domain", "inv_q_threshold": None,
                        "q_upper": None, "witness_N": None, "error": str(exc)})
        rows.append(row)
    return rows
