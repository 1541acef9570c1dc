"""Measured inequality constants: Poincaré quotients, balancing, A_p, doubling,
local Sobolev constants and the comparable-weight ball estimate.

Every constant produced here is an empirical lower bound over the sampled
balls and functions; nothing claims a true supremum.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .domain import average, distance_to_complement, lp_norm
from .errors import (
    InvalidWeightError,
    PreconditionError,
    SupportError,
    ZeroMeasureError,
)
from .forms import sobolev_norm, sqrtQ_magnitude
from .geometry import Quasimetric, ball


class DegenerateFormWarning(UserWarning):
    pass


def default_radius_grid(r_max, levels=12, ratio=0.5):
    """Ascending geometric grid ``r_max * ratio**k``, k = levels-1..0."""
    return [r_max * ratio ** k for k in range(levels - 1, -1, -1)]


def poincare_quotient(pair, B, c0, p, w, nu, mu, Q, d):
    """||f - f_{B,w}||_{L^p_w(B)} / ||(f,g)||_{W(B_{c0 r})}.

    Constant-on-B members give 0 without looking at the denominator; a zero
    denominator with a nonzero numerator gives +inf and a warning.
    """
    E = B.cells
    if w.of(E) <= 0:
        raise ZeroMeasureError(f"ball at cell {B.center} has zero w-measure")
    fE = pair.f[E]
    if np.ptp(fE) == 0:
        return 0.0
    num = lp_norm(pair.f - average(pair.f, E, w), p, w, E)
    F = ball(d, B.center, c0 * B.radius, w.domain).cells if c0 != 1 else E
    den = sobolev_norm(pair, p, nu, mu, Q, F)
    if den == 0:
        if num == 0:
            return 0.0
        warnings.warn(f"degenerate form: zero Sobolev norm on B_{c0}r at cell {B.center}",
                      DegenerateFormWarning, stacklevel=2)
        return math.inf
    return num / den


@dataclass
class PoincareReport:
    epsilon: float
    delta: float
    c0: float
    worst: float
    rows: list = field(default_factory=list, repr=False)
    diagnostic: str = ""

    def as_dict(self):
        return {"epsilon": self.epsilon, "delta": self.delta, "c0": self.c0,
                "worst_quotient": self.worst, "diagnostic": self.diagnostic}


def calibrate_delta(family, K, eps, c0, p, w, nu, mu, Q, d, radius_grid, max_centers=None):
    """Largest grid radius delta such that every grid radius <= delta passes
    (quotient <= eps) for all members and all centers in K.

    Returns a :class:`PoincareReport`; ``delta = 0`` with a diagnostic when the
    smallest radius already fails.
    """
    radius_grid = list(radius_grid)
    if not family:
        raise PreconditionError("family is empty")
    if any(b < a for a, b in zip(radius_grid, radius_grid[1:])):
        raise PreconditionError("radius_grid must be ascending")
    centers = np.flatnonzero(K)
    if max_centers is not None and centers.size > max_centers:
        centers = centers[np.linspace(0, centers.size - 1, max_centers).round().astype(int)]
    rows = []
    delta, worst_ok = 0.0, 0.0
    diagnostic = ""
    if eps <= 0:
        return PoincareReport(eps, 0.0, c0, math.inf, rows, "epsilon must be positive")
    for r in radius_grid:
        worst = 0.0
        witness = None
        for y in centers:
            B = ball(d, int(y), r, w.domain)
            for k, pair in enumerate(family):
                qv = poincare_quotient(pair, B, c0, p, w, nu, mu, Q, d)
                if qv > worst:
                    worst, witness = qv, (k, int(y))
        rows.append({"radius": r, "worst": worst,
                     "member": None if witness is None else witness[0],
                     "center": None if witness is None else witness[1]})
        if worst > eps:
            if delta == 0.0:
                diagnostic = (f"smallest radius {r:.6g} already fails: quotient {worst:.6g} "
                              f"(member {witness[0]}, cell {witness[1]})")
            break
        delta, worst_ok = r, worst
    return PoincareReport(eps, delta, c0, worst_ok if delta > 0 else math.inf, rows, diagnostic)


def balancing_probe(w, mu, K, c0, p, radii, d):
    """Per radius, sup over centers in K of r^p w(B_r) / mu(B_{c0 r})."""
    radii = list(radii)
    if any(r <= 0 for r in radii):
        raise PreconditionError("radii must be positive")
    values = []
    centers = np.flatnonzero(K)
    for r in radii:
        best = 0.0
        for y in centers:
            Br = ball(d, int(y), r, w.domain).cells
            Bc = ball(d, int(y), c0 * r, w.domain).cells
            den = mu.of(Bc)
            if den <= 0:
                raise ZeroMeasureError(f"mu vanishes on the ball of radius {c0 * r} at cell {int(y)}",
                                       witness={"cell": int(y), "radius": c0 * r})
            best = max(best, r ** p * w.of(Br) / den)
        values.append(best)
    order = np.argsort(radii)
    if len(radii) < 2:
        flag = "undetermined"
    else:
        small, large = values[order[0]], values[order[-1]]
        flag = "balanced" if large > 0 and small / large < 0.1 else "unbalanced"
    return {"radii": radii, "values": values, "flag": flag}


@dataclass
class ApReport:
    p: float
    ratios: np.ndarray = field(repr=False)
    sup: float = 0.0
    argsup: int = -1
    trend: dict = None

    def as_dict(self):
        return {"p": self.p, "sup": self.sup, "n_balls": int(self.ratios.size), "trend": self.trend}


def _box_sums(domain, values, boxes):
    """Sums of ``values`` over index boxes via an n-d prefix table."""
    full = np.zeros(domain.cells_per_axis)
    full[domain.full_mask] = values
    S = full
    for k in range(domain.dim):
        S = np.cumsum(S, axis=k)
    S = np.pad(S, [(1, 0)] * domain.dim)
    lo, hi = boxes
    total = np.zeros(lo.shape[0])
    for corner in range(2 ** domain.dim):
        idx, sign = [], 1
        for k in range(domain.dim):
            if corner >> k & 1:
                idx.append(lo[:, k])
                sign = -sign
            else:
                idx.append(hi[:, k])
        total += sign * S[tuple(idx)]
    return total


def dyadic_boxes(domain, scales=4):
    """All cell-aligned boxes of side ``L / 2^j`` (j = 1..scales) per axis.

    Returned as (lo, hi) index arrays of shape (count, dim), half-open.
    """
    los, his = [], []
    for j in range(1, scales + 1):
        widths = [max(1, n >> j) for n in domain.cells_per_axis]
        starts = [np.arange(0, n - w + 1) for n, w in zip(domain.cells_per_axis, widths)]
        mesh = np.meshgrid(*starts, indexing="ij")
        lo = np.stack([m.ravel() for m in mesh], axis=1)
        los.append(lo)
        his.append(lo + np.asarray(widths))
    return np.vstack(los), np.vstack(his)


def ap_constant(domain, density, p, boxes=None):
    """Sup over boxes of avg(eta) * avg(eta^{-1/(p-1)})^{p-1}; for p = 1 the
    ratio avg(eta) / min(eta).  Averages are Lebesgue cell averages."""
    eta = np.asarray(density, dtype=float)
    if np.any(~np.isfinite(eta)) or np.any(eta <= 0):
        i = int(np.flatnonzero(~np.isfinite(eta) | (eta <= 0))[0])
        raise InvalidWeightError(f"weight must be positive and finite, fails at cell {i}",
                                 witness={"cell": i})
    if not domain.full_mask.all():
        raise PreconditionError("A_p boxes need a fully active grid")
    if boxes is None:
        boxes = dyadic_boxes(domain)
    lo, hi = boxes
    count = np.prod(hi - lo, axis=1).astype(float)
    avg = _box_sums(domain, eta, boxes) / count
    if p == 1:
        full = np.full(domain.cells_per_axis, np.inf)
        full[domain.full_mask] = eta
        mins = np.array([full[tuple(slice(a, b) for a, b in zip(l, h))].min() for l, h in zip(lo, hi)])
        ratios = avg / mins
    elif p > 1:
        dual = _box_sums(domain, eta ** (-1.0 / (p - 1)), boxes) / count
        ratios = avg * dual ** (p - 1)
    else:
        raise PreconditionError(f"A_p needs p >= 1, got {p}")
    k = int(np.argmax(ratios))
    return ApReport(float(p), ratios, float(ratios[k]), k)


def ap_trend(build, density_fn, p, cells, factor=4, scales=4):
    """A_p sup at ``cells`` and ``factor * cells``; ``build(cells)`` makes the grid."""
    out = []
    for n in (cells, factor * cells):
        dom = build(n)
        out.append(ap_constant(dom, density_fn(dom.centers), p, dyadic_boxes(dom, scales)).sup)
    growth = out[1] / out[0]
    return {"coarse": out[0], "fine": out[1], "growth": growth, "factor": factor}


def doubling_exponent(w, ball_pairs):
    """Fit log(w(B_r)/w(B_r')) = theta log(r/r') + log C over concentric pairs.

    ``ball_pairs`` holds (B_r, B_r') Ball tuples.  One pair gives the exact
    two-point slope (C = 1); several pairs with distinct ratios give a
    least-squares fit with intercept.
    """
    xs, ys = [], []
    for Br, Bs in ball_pairs:
        if Br.center != Bs.center or not 0 < Bs.radius < Br.radius:
            raise PreconditionError("pairs must be concentric with 0 < r' < r")
        a, b = w.of(Br.cells), w.of(Bs.cells)
        if a <= 0 or b <= 0:
            raise ZeroMeasureError(f"zero mass on a ball at cell {Br.center}",
                                   witness={"cell": Br.center, "r": Br.radius, "r_prime": Bs.radius})
        xs.append(math.log(Br.radius / Bs.radius))
        ys.append(math.log(a / b))
    xs, ys = np.array(xs), np.array(ys)
    if xs.size == 1 or np.ptp(xs) == 0:
        theta = float(np.sum(xs * ys) / np.sum(xs * xs))
        logC = 0.0
    else:
        theta, logC = (float(v) for v in np.polyfit(xs, ys, 1))
    resid = ys - (theta * xs + logC)
    return {"theta": theta, "C": math.exp(logC), "max_residual": float(np.abs(resid).max()),
            "n_pairs": int(xs.size)}


def local_sobolev_constant(pairs, B, p, sigma, w, nu, mu, Q):
    """max over pairs of ||f||_{L^{p sigma}_w(B)} / ||(f,g)||_{W(Omega)}."""
    best = 0.0
    for k, pair in enumerate(pairs):
        s = pair.support
        if s is None or np.any(s & ~B.cells):
            raise SupportError(f"member {k} is not supported inside the ball at cell {B.center}",
                               witness={"member": k})
        num = lp_norm(pair.f, p * sigma, w, B.cells)
        if num == 0:
            continue
        den = sobolev_norm(pair, p, nu, mu, Q)
        best = max(best, math.inf if den == 0 else num / den)
    return best


def global_embedding_constant(pairs, B, p, t_prime, nu, mu, Q):
    """max over pairs of ||f||_{L^{p t'}_mu(B)} / ||(f,g)||_{W(Omega)}."""
    best = 0.0
    for pair in pairs:
        num = lp_norm(pair.f, p * t_prime, mu, B.cells)
        if num == 0:
            continue
        den = sobolev_norm(pair, p, nu, mu, Q)
        best = max(best, math.inf if den == 0 else num / den)
    return best


def normalized_sobolev_check(pair, B, p, sigma, w, nu, mu, Q, C_cand, tol=1e-9):
    """Averaged bound with the factor r on the gradient term."""
    E = B.cells
    lhs = (np.sum(np.abs(pair.f[E]) ** (p * sigma) * w.mass[E]) / w.of(E)) ** (1 / (p * sigma))
    t1 = (np.sum(np.abs(pair.f[E]) ** p * nu.mass[E]) / nu.of(E)) ** (1 / p)
    gq = sqrtQ_magnitude(Q, pair.g)
    t2 = (np.sum(gq[E] ** p * mu.mass[E]) / mu.of(E)) ** (1 / p)
    rhs = C_cand * t1 + C_cand * B.radius * t2
    return bool(lhs <= rhs * (1 + tol) or lhs == 0), float(lhs), float(rhs)


def ball_poincare_constant(a, b, p, n):
    """C~ along the comparable-weight path, with the convex-domain constant 2^n.

    ||f - f_D||_{L^p(D)} <= 2^n r ||grad f||_{L^p(D)} on a Euclidean ball of
    radius r; the weight sandwich rho_D/2 <= rho <= 3 rho_D/2 converts it, and
    switching to the weighted mean costs a factor 2.
    """
    up = 1.5 ** a if a >= 0 else 0.5 ** a
    low = 0.5 ** b if b >= 0 else 1.5 ** b
    return 2.0 * 2.0 ** n * up ** (1.0 / p) * low ** (-1.0 / p)


def weighted_ball_poincare(domain, f, grad, D, a, b, p, rho=None, distance_floor=None):
    """Check the rho^a / rho^b ball estimate on a Euclidean ball D.

    Returns ``(holds, C~, lhs, rhs)``.
    """
    if rho is None:
        rho = distance_to_complement(domain)
    rD = rho[D.center]
    if distance_floor is not None and rD < distance_floor:
        raise PreconditionError(f"ball center is closer than {distance_floor} to the complement")
    if not D.radius < 0.5 * rD:
        raise PreconditionError(
            f"ball radius {D.radius:.6g} is not below half the boundary distance {rD:.6g}",
            witness={"cell": D.center, "radius": D.radius, "distance": float(rD)})
    E = D.cells
    if np.any(rho[E] < 0.5 * rD) or np.any(rho[E] > 1.5 * rD):
        i = int(np.flatnonzero(E & ((rho < 0.5 * rD) | (rho > 1.5 * rD)))[0])
        raise PreconditionError("weight sandwich fails inside the ball", witness={"cell": i})
    vol = domain.cell_volume
    wa, wb = rho ** a * vol, rho ** b * vol
    if np.ptp(f[E]) == 0:
        lhs = 0.0
    else:
        fa = np.dot(f[E], wa[E]) / wa[E].sum()
        lhs = float(np.sum(np.abs(f[E] - fa) ** p * wa[E]) ** (1 / p))
    gnorm = np.sqrt(np.sum(np.asarray(grad).reshape(len(f), -1) ** 2, axis=1))
    C = ball_poincare_constant(a, b, p, domain.dim)
    e = (a - b) / p
    rhs = float(C * (D.radius ** e + domain.diameter ** e) * D.radius
                * np.sum(gnorm[E] ** p * wb[E]) ** (1 / p))
    return bool(lhs <= rhs), C, lhs, rhs


def euclidean_ball(domain, x, r):
    return ball(Quasimetric("euclidean"), x, r, domain)
