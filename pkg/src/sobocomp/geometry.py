"""Quasimetrics on grid domains, d-balls and ball covers.

Balls are evaluated on active cell centers with strict inequality:
``B_r(x) = {active y : d(x, y) < r}``.  Cover selection walks candidate
centers in active-cell (lexicographic) order, so covers are deterministic.
"""

from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np

from .domain import distance_to_complement
from .errors import (
    CoverageError,
    GeometryError,
    PreconditionError,
    QuasimetricAxiomError,
    UnsupportedConfiguration,
)

AXIOM_TOL = 1e-9


class Quasimetric:
    """Symmetric quasimetric with declared constant ``kappa``.

    Kinds:

    ``euclidean``      |x - y|, kappa = 1
    ``power``          |x - y|^beta, kappa = max(1, 2^(beta-1))
    ``anisotropic``    max_i |x_i - y_i|^beta_i, kappa = max(1, 2^(max beta - 1))
    ``grushin``        |dx1| + |dx2| / (|x1| + |y1| + |dx2|^(1/2)), 2-d only;
                       kappa must be declared (estimate it with
                       :func:`verify_quasimetric`)
    ``table``          an explicit (m, m) matrix over active cells
    """

    def __init__(self, kind="euclidean", kappa=None, beta=None, table=None):
        self.kind = kind
        self.beta = beta
        self.table = None
        if kind == "euclidean":
            default = 1.0
        elif kind == "power":
            if beta is None or beta <= 0:
                raise PreconditionError("power quasimetric needs beta > 0")
            default = max(1.0, 2.0 ** (float(beta) - 1.0))
        elif kind == "anisotropic":
            beta = tuple(float(b) for b in np.atleast_1d(beta)) if beta is not None else None
            if not beta or min(beta) <= 0:
                raise PreconditionError("anisotropic quasimetric needs positive per-axis exponents")
            self.beta = beta
            default = max(1.0, 2.0 ** (max(beta) - 1.0))
        elif kind == "grushin":
            default = None
        elif kind == "table":
            if table is None:
                raise PreconditionError("table quasimetric needs a matrix")
            self.table = np.asarray(table, dtype=float)
            if self.table.ndim != 2 or self.table.shape[0] != self.table.shape[1]:
                raise PreconditionError(f"table must be square, got shape {self.table.shape}")
            default = None
        else:
            raise PreconditionError(f"unknown quasimetric kind {kind!r}")
        if kappa is None:
            kappa = default
        if kappa is None:
            raise PreconditionError(f"{kind} quasimetric needs an explicit kappa")
        if kappa < 1:
            raise PreconditionError(f"kappa must be >= 1, got {kappa}")
        self.kappa = float(kappa)

    def __repr__(self):
        extra = f", beta={self.beta}" if self.beta is not None else ""
        return f"Quasimetric({self.kind!r}, kappa={self.kappa}{extra})"

    def spec(self):
        out = {"kind": self.kind, "kappa": self.kappa}
        if self.beta is not None:
            out["beta"] = list(self.beta) if isinstance(self.beta, tuple) else self.beta
        return out

    def between(self, X, Y):
        """Elementwise d(X[k], Y[k]) for point arrays of shape (k, dim)."""
        if self.kind == "table":
            raise UnsupportedConfiguration("table quasimetric is defined on cell indices only")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        diff = np.abs(X - Y)
        if self.kind == "euclidean":
            return np.sqrt(np.einsum("...i,...i->...", diff, diff))
        if self.kind == "power":
            return np.sqrt(np.einsum("...i,...i->...", diff, diff)) ** self.beta
        if self.kind == "anisotropic":
            if diff.shape[-1] != len(self.beta):
                raise PreconditionError(f"{len(self.beta)} exponents for a {diff.shape[-1]}-d domain")
            return np.max(diff ** np.asarray(self.beta), axis=-1)
        if self.kind == "grushin":
            if diff.shape[-1] != 2:
                raise PreconditionError("grushin quasimetric is 2-d only")
            den = np.abs(X[..., 0]) + np.abs(Y[..., 0]) + np.sqrt(diff[..., 1])
            with np.errstate(invalid="ignore", divide="ignore"):
                second = np.where(diff[..., 1] > 0, diff[..., 1] / den, 0.0)
            return diff[..., 0] + second
        raise AssertionError(self.kind)

    def from_cell(self, domain, i, J=None):
        """Distances from active cell ``i`` to active cells ``J`` (all if None)."""
        if self.kind == "table":
            self._check_table(domain)
            row = self.table[i]
            return row.copy() if J is None else row[J]
        Y = domain.centers if J is None else domain.centers[J]
        return self.between(domain.centers[i][None, :], Y)

    def reach(self, x, rho):
        """Per-axis Euclidean half-widths containing ``B_rho(x)``."""
        if self.kind == "euclidean":
            return np.full(len(x), rho)
        if self.kind == "power":
            return np.full(len(x), rho ** (1.0 / self.beta))
        if self.kind == "anisotropic":
            return np.array([rho ** (1.0 / b) for b in self.beta])
        if self.kind == "grushin":
            t = (rho + math.sqrt(rho * rho + 4 * rho * (2 * abs(x[0]) + rho))) / 2
            return np.array([rho, t * t])
        return np.full(len(x), np.inf)

    def ball_indices(self, domain, i, rho):
        """Sorted active indices y with d(x_i, y) < rho, always including i."""
        if self.kind == "table":
            idx = np.flatnonzero(self.from_cell(domain, i) < rho)
        else:
            cand = domain.window(i, self.reach(domain.centers[i], rho))
            idx = cand[self.from_cell(domain, i, cand) < rho]
        if not np.any(idx == i):
            idx = np.sort(np.append(idx, i))
        return idx

    def ball_mask(self, domain, i, rho):
        mask = np.zeros(domain.n_active, dtype=bool)
        mask[self.ball_indices(domain, i, rho)] = True
        return mask

    def cells(self, domain, I, J):
        """Elementwise d between active cells I[k] and J[k]."""
        I = np.asarray(I)
        J = np.asarray(J)
        if self.kind == "table":
            self._check_table(domain)
            return self.table[I, J]
        return self.between(domain.centers[I], domain.centers[J])

    def _check_table(self, domain):
        if self.table.shape[0] != domain.n_active:
            raise PreconditionError(
                f"table has {self.table.shape[0]} rows for {domain.n_active} active cells")


def verify_quasimetric(d, domain, trials=10000, seed=0):
    """Sample triples; returns ``(kappa_estimate, violations)``.

    ``kappa_estimate`` is the largest observed d(x,y)/(d(x,z)+d(z,y));
    ``violations`` counts ratios above the declared kappa by more than 1e-9.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    m = domain.n_active
    rng = np.random.default_rng(seed)
    if d.kind == "table":
        d._check_table(domain)
        T = d.table
        diag = np.abs(np.diag(T))
        if np.any(diag > 0):
            i = int(np.argmax(diag))
            raise QuasimetricAxiomError(f"d(x,x) != 0 at cell {i}", witness={"x": i, "d": float(T[i, i])})
        asym = np.abs(T - T.T)
        if np.any(asym > AXIOM_TOL * np.maximum(1.0, np.abs(T))):
            i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
            raise QuasimetricAxiomError(
                f"asymmetric entry d({i},{j})={T[i, j]} vs d({j},{i})={T[j, i]}",
                witness={"x": int(i), "y": int(j)})
    x, y, z = (rng.integers(0, m, size=trials) for _ in range(3))
    dxy, dyx = d.cells(domain, x, y), d.cells(domain, y, x)
    asym = np.abs(dxy - dyx) > AXIOM_TOL * np.maximum(1.0, np.abs(dxy))
    if asym.any():
        k = int(np.flatnonzero(asym)[0])
        raise QuasimetricAxiomError(
            f"asymmetry between cells {int(x[k])} and {int(y[k])}",
            witness={"x": int(x[k]), "y": int(y[k]), "dxy": float(dxy[k]), "dyx": float(dyx[k])})
    zero = (dxy <= 0) & (x != y)
    if zero.any():
        k = int(np.flatnonzero(zero)[0])
        raise QuasimetricAxiomError(
            f"d vanishes between distinct cells {int(x[k])} and {int(y[k])}",
            witness={"x": int(x[k]), "y": int(y[k])})
    self_d = d.cells(domain, x, x)
    if np.any(self_d != 0):
        k = int(np.flatnonzero(self_d != 0)[0])
        raise QuasimetricAxiomError(f"d(x,x) != 0 at cell {int(x[k])}", witness={"x": int(x[k])})
    den = d.cells(domain, x, z) + d.cells(domain, z, y)
    ok = den > 0
    ratio = np.zeros(trials)
    ratio[ok] = dxy[ok] / den[ok]
    kappa_est = float(ratio.max()) if trials else 0.0
    violations = int(np.sum(ratio > d.kappa + AXIOM_TOL))
    return kappa_est, violations


@dataclass(frozen=True, eq=False)
class Ball:
    center: int
    radius: float
    cells: np.ndarray = field(repr=False)
    center_point: tuple = ()

    @property
    def size(self):
        return int(self.cells.sum())


def ball(d, x, r, domain):
    """``B_r(x)`` over active centers; ``x`` is an active index or a point."""
    if r <= 0:
        raise PreconditionError(f"ball radius must be positive, got {r}")
    if isinstance(x, (int, np.integer)):
        i = int(x)
        if not 0 <= i < domain.n_active:
            raise PreconditionError(f"cell index {i} out of range")
    else:
        i = domain.cell_of(x)
    cells = d.ball_mask(domain, i, r)
    cells.setflags(write=False)
    return Ball(i, float(r), cells, tuple(domain.centers[i].tolist()))


def swallowing_gamma(kappa):
    if kappa < 1:
        raise PreconditionError(f"kappa must be >= 1, got {kappa}")
    return kappa + 2 * kappa * kappa


def check_swallow(d, B1, B2, domain, gamma=None):
    """True iff B1 lies inside B_{gamma r2}(center of B2)."""
    if B1.radius > B2.radius:
        raise PreconditionError(f"need r1 <= r2, got {B1.radius} > {B2.radius}")
    if not np.any(B1.cells & B2.cells):
        raise PreconditionError("balls are disjoint", witness={"c1": B1.center, "c2": B2.center})
    if gamma is None:
        gamma = swallowing_gamma(d.kappa)
    big = d.from_cell(domain, B2.center, np.flatnonzero(B1.cells)) < gamma * B2.radius
    return bool(np.all(big))


def doubling_probe(d, domain, K, r, r_prime, trials=16, seed=0):
    """Greedy count of disjoint ``r'``-balls packed inside ``B_r(x)``, x in K.

    Centers are drawn without replacement from K (all of K if it is small);
    the return value is the maximum count, an empirical lower bound for the
    doubling constant at ratio r/r'.
    """
    if not 0 < r_prime <= r:
        raise PreconditionError(f"need 0 < r' <= r, got r'={r_prime}, r={r}")
    idx = np.flatnonzero(K)
    if idx.size == 0:
        raise PreconditionError("K is empty")
    rng = np.random.default_rng(seed)
    if idx.size > trials:
        idx = np.sort(rng.choice(idx, size=trials, replace=False))
    best = 0
    for x in idx:
        outer = ball(d, int(x), r, domain).cells
        taken = np.zeros_like(outer)
        count = 0
        for y in np.flatnonzero(outer):
            if taken[y]:
                continue
            small = d.ball_indices(domain, int(y), r_prime)
            if not np.all(outer[small]) or np.any(taken[small]):
                continue
            taken[small] = True
            count += 1
        best = max(best, count)
    return best


@dataclass(eq=False)
class CoverPlan:
    epsilon: float
    radius: float
    c0: float
    centers: list
    E: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    E_mass: np.ndarray = field(repr=False)
    overlap_M: int
    coverage_deficit: float
    F_radius: float = None
    dropped: int = 0

    @property
    def J(self):
        return len(self.centers)

    def union_E(self):
        return np.any(self.E, axis=0) if self.J else np.zeros(self.E.shape[1], dtype=bool)

    def cell_overlap(self):
        return self.F.sum(axis=0)

    def verify(self, K, w):
        """Cellwise re-check of coverage, deficit and overlap; returns a dict."""
        union = self.union_E()
        return {
            "covers_K": bool(np.all(union[K])),
            "deficit": float(w.mass[~union].sum()),
            "deficit_ok": float(w.mass[~union].sum()) < self.epsilon,
            "overlap": int(self.cell_overlap().max()) if self.J else 0,
            "overlap_ok": (int(self.cell_overlap().max()) if self.J else 0) <= self.overlap_M,
            "positive_mass": bool(np.all(self.E_mass > 0)),
        }

    def summary(self):
        return {
            "epsilon": self.epsilon,
            "J": self.J,
            "radius": self.radius,
            "F_radius": self.F_radius,
            "overlap_M": self.overlap_M,
            "coverage_deficit": self.coverage_deficit,
            "dropped_zero_mass": self.dropped,
        }


def _overlap(F):
    return max(1, int(F.sum(axis=0).max())) if F.shape[0] else 1


def build_cover(d, domain, K, r, c0, w, epsilon, gamma=None, check_deficit=True):
    """Cover built from a maximal disjoint family of ``B_{r/gamma}`` balls.

    Candidates are the cells of K in index order; a candidate is kept when its
    small ball misses every kept small ball.  Each kept center y yields
    ``E = B_r(y)`` and ``F = B_{c0 r}(y)``; E with zero w-mass is dropped.
    With ``check_deficit`` false the plan may leave w-mass >= epsilon
    uncovered (local runs only need K itself covered).
    """
    K = np.asarray(K, dtype=bool)
    if not K.any():
        raise PreconditionError("K is empty")
    if r <= 0 or c0 < 1:
        raise PreconditionError(f"need r > 0 and c0 >= 1, got r={r}, c0={c0}")
    if gamma is None:
        gamma = swallowing_gamma(d.kappa)
    occupied = np.zeros(domain.n_active, dtype=bool)
    chosen = []
    for x in np.flatnonzero(K):
        if occupied[x]:
            continue
        small = d.ball_indices(domain, int(x), r / gamma)
        if np.any(occupied[small]):
            continue
        occupied[small] = True
        chosen.append(int(x))

    E_rows, F_rows, keep, mass = [], [], [], []
    dropped = 0
    for y in chosen:
        E = d.ball_mask(domain, y, r)
        m = float(w.mass[E].sum())
        if m <= 0:
            dropped += 1
            continue
        F = d.ball_mask(domain, y, c0 * r)
        E_rows.append(E)
        F_rows.append(F)
        keep.append(y)
        mass.append(m)
    shape = (0, domain.n_active)
    E = np.array(E_rows, dtype=bool).reshape(-1, domain.n_active) if E_rows else np.zeros(shape, bool)
    F = np.array(F_rows, dtype=bool).reshape(-1, domain.n_active) if F_rows else np.zeros(shape, bool)
    union = np.any(E, axis=0) if len(keep) else np.zeros(domain.n_active, bool)
    deficit = float(w.mass[~union].sum())
    need = K if not check_deficit else K & (w.mass > 0)
    if not np.all(union[need]):
        miss = int(np.flatnonzero(need & ~union)[0])
        raise CoverageError(f"cover misses K at cell {miss}", witness={"cell": miss})
    if check_deficit and deficit >= epsilon:
        raise CoverageError(
            f"coverage deficit {deficit:.6g} is not below epsilon={epsilon}",
            witness={"deficit": deficit, "epsilon": epsilon})
    return CoverPlan(
        epsilon=float(epsilon), radius=float(r), c0=float(c0), centers=keep,
        E=E, F=F, E_mass=np.array(mass), overlap_M=_overlap(F),
        coverage_deficit=deficit, F_radius=float(c0 * r), dropped=dropped,
    )


def packing_bound(d, domain, r, c0, gamma=None):
    """Overlap bound for any cover built at (r, c0), independent of K and eps.

    Balls B_{c0 r}(y_k) sharing a point all lie in B_{c0 gamma r}(y_1), which
    then holds their pairwise disjoint B_{r/gamma}(y_k).  Counting cells gives
    L <= max |window of B_{c0 gamma r}| / min |B_{r/gamma}|.
    """
    if gamma is None:
        gamma = swallowing_gamma(d.kappa)
    big = 0
    small = domain.n_active
    for i in range(domain.n_active):
        x = domain.centers[i]
        big = max(big, domain.window(i, d.reach(x, c0 * gamma * r)).size)
        small = min(small, d.ball_indices(domain, i, r / gamma).size)
    return max(1, big // small)


def is_maximal(d, domain, K, plan, gamma=None):
    """Every center of K has a small ball meeting some selected small ball."""
    if gamma is None:
        gamma = swallowing_gamma(d.kappa)
    occupied = np.zeros(domain.n_active, dtype=bool)
    for y in plan.centers:
        occupied[d.ball_indices(domain, y, plan.radius / gamma)] = True
    for x in np.flatnonzero(K):
        if not np.any(occupied[d.ball_indices(domain, int(x), plan.radius / gamma)]):
            return False
    return True


def euclid_cover_triples(domain, K, r, w=None, epsilon=math.inf, rho=None):
    """Maximal disjoint ``r/6`` balls centered in K, tripled to radius ``r/2``.

    Returns a plan with E = F.  ``rho`` is the distance to the complement of
    the ambient open set (defaults to the grid domain itself); every doubled
    ball ``B_r(y)`` must fit inside it.
    """
    from .domain import lebesgue

    K = np.asarray(K, dtype=bool)
    if not K.any():
        raise PreconditionError("K is empty")
    d = Quasimetric("euclidean")
    if rho is None:
        rho = distance_to_complement(domain)
    if w is None:
        w = lebesgue(domain)
    occupied = np.zeros(domain.n_active, dtype=bool)
    chosen = []
    for x in np.flatnonzero(K):
        if occupied[x]:
            continue
        small = d.ball_indices(domain, int(x), r / 6)
        if np.any(occupied[small]):
            continue
        occupied[small] = True
        chosen.append(int(x))
    rows, mass = [], []
    for y in chosen:
        if rho[y] < r:
            raise GeometryError(
                f"doubled ball at cell {y} (radius {r}) leaves the ambient set (distance {rho[y]:.6g})",
                witness={"cell": y, "center": domain.centers[y].tolist(), "distance": float(rho[y])})
        E = d.ball_mask(domain, y, r / 2)
        rows.append(E)
        mass.append(float(w.mass[E].sum()))
    E = np.array(rows, dtype=bool)
    union = np.any(E, axis=0)
    if not np.all(union[K]):
        miss = int(np.flatnonzero(K & ~union)[0])
        raise CoverageError(f"triple cover misses K at cell {miss}", witness={"cell": miss})
    return CoverPlan(
        epsilon=float(epsilon), radius=r / 2, c0=1.0, centers=chosen, E=E, F=E,
        E_mass=np.array(mass), overlap_M=_overlap(E),
        coverage_deficit=float(w.mass[~union].sum()), F_radius=r / 2,
    )


def _complement_points(domain, i):
    """Inactive centers plus the nearest point on each box face, for cell i."""
    x = domain.centers[i]
    faces = []
    for k, (lo, hi) in enumerate(domain.bounds):
        for v in (lo, hi):
            p = x.copy()
            p[k] = v
            faces.append(p)
    return np.vstack([domain.inactive_centers(), np.array(faces)])


def distance_to_complement_d(d, domain, i):
    """d(x, complement) as a minimum over inactive centers and face points."""
    if d.kind == "table":
        raise UnsupportedConfiguration("complement distance needs a point-defined quasimetric")
    pts = _complement_points(domain, i)
    return float(d.between(np.broadcast_to(domain.centers[i], pts.shape), pts).min())


def inner_radius(x, d, domain):
    """``d(x, complement) / (2 kappa)`` for active cell index or point ``x``."""
    i = int(x) if isinstance(x, (int, np.integer)) else domain.cell_of(x)
    return distance_to_complement_d(d, domain, i) / (2 * d.kappa)


def ball_inside(d, domain, i, r):
    """True when no complement point of cell i lies within d-distance r."""
    pts = _complement_points(domain, i)
    return bool(np.all(d.between(np.broadcast_to(domain.centers[i], pts.shape), pts) >= r))


def cover_csv(plan, domain):
    """CSV text: a '#' metadata line, a header, then one row per pair."""
    buf = io.StringIO()
    buf.write(f"# epsilon={plan.epsilon!r} overlap_M={plan.overlap_M} "
              f"coverage_deficit={plan.coverage_deficit!r}\n")
    wr = csv.writer(buf, lineterminator="\n")
    coords = [f"x{k + 1}" for k in range(domain.dim)]
    wr.writerow(["l", *coords, "radius", "E_cells", "w_E"])
    for l, y in enumerate(plan.centers):
        wr.writerow([l, *[repr(float(c)) for c in domain.centers[y]], repr(plan.radius),
                     int(plan.E[l].sum()), repr(float(plan.E_mass[l]))])
    return buf.getvalue()
