"""Subsequence extraction with verified hypotheses and measured Cauchy moduli.

Weak convergence is replaced by convergence of the finitely many averages
``(f_k)_{E_l, w}`` that enter the II-term.  A coordinate is resolved once the
values in the last half of the current subsequence lie within the II
tolerance ``tau_l = (eps^p / (J w(E_l)))^{1/p}``; unresolved coordinates are
split at the widest gap of their sorted values, keeping the side with more
of the late members.  The procedure is a deterministic fold, so runs are
bitwise reproducible.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .domain import lp_norm
from .errors import (
    CertificateError,
    HypothesisViolation,
    InvariantFailure,
    PreconditionError,
    ZeroMeasureError,
)
from .exponents import holder_conjugate, interpolation_lambda, INF
from .forms import sobolev_norm, sqrtQ_magnitude
from .geometry import build_cover, swallowing_gamma
from .inequalities import default_radius_grid

REL_TOL = 1e-10
DEFAULT_EPS = (0.1, 0.05, 0.02, 0.01)


def _inv(x):
    return 0.0 if x == math.inf else 1.0 / x


@dataclass
class FamilyS:
    members: list
    p: float
    N: float
    M: float
    q_list: tuple = ()

    @property
    def F(self):
        return np.array([m.f for m in self.members])


def certify(family, w, nu, mu, Q, region=None):
    """Check every member against the declared bound M.

    The bound covers both ||f||_{L^N_w} (over ``region`` when given) and the
    pair norm.  Returns the observed maximum."""
    ln = np.array([lp_norm(m.f, family.N, w, region) for m in family.members])
    xn = np.array([sobolev_norm(m, family.p, nu, mu, Q) for m in family.members])
    worst = np.maximum(ln, xn)
    if not np.all(np.isfinite(worst)) or np.any(worst > family.M):
        k = int(np.flatnonzero(~np.isfinite(worst) | (worst > family.M))[0])
        raise CertificateError(
            f"member {k} has norm {worst[k]:.6g} above the declared bound M={family.M}",
            witness={"member": k, "L^N": float(ln[k]), "X": float(xn[k]), "M": family.M})
    return float(worst.max())


def select_K(w, eps, rho=None):
    """Greedy largest-mass cells until w(Omega \\ K) < eps.

    Ties go to cells farther from the complement (``rho``), then lower index.
    """
    m = w.mass
    keys = [np.arange(m.size)]
    if rho is not None:
        keys.append(-np.asarray(rho))
    keys.append(-m)
    order = np.lexsort(keys)
    total = float(m.sum())
    remaining = total - np.cumsum(m[order])
    n = int(np.searchsorted(-remaining, -eps, side="right")) + 1
    n = min(max(n, 1), m.size)
    while n < m.size and total - float(m[order[:n]].sum()) >= eps:
        n += 1
    K = np.zeros(m.size, dtype=bool)
    K[order[:n]] = True
    return K


def verify_Bp(balls, C1, pairs, p, nu, mu, Q, tol=1e-9):
    """sum_l ||(f,g) chi_B_l||_X^p <= 2^p C1 ||(f,g)||_X^p for every pair."""
    masks = np.array([getattr(b, "cells", b) for b in balls], dtype=bool)
    overlap = int(masks.sum(axis=0).max()) if len(masks) else 0
    if overlap > C1:
        raise PreconditionError(f"ball family overlaps {overlap} times, above C1={C1}",
                                witness={"overlap": overlap, "C1": C1})
    C2 = 2 ** p * C1
    ratios = []
    holds = True
    for pair in pairs:
        lhs = sum(sobolev_norm(pair, p, nu, mu, Q, B) ** p for B in masks)
        rhs = C2 * sobolev_norm(pair, p, nu, mu, Q) ** p
        if lhs > rhs * (1 + tol) and lhs > 0:
            holds = False
        ratios.append(lhs / rhs if rhs > 0 else 0.0)
    return holds, C2, ratios


def decompose_I_II(fm, fk, cover, p, w):
    """I, II and the pairwise sum S <= 2^(p-1) (I + II) for one pair of members."""
    d = np.asarray(fm, dtype=float) - np.asarray(fk, dtype=float)
    I = II = S = 0.0
    for E, mE in zip(cover.E, cover.E_mass):
        if mE <= 0:
            raise ZeroMeasureError("cover contains a zero-mass E")
        wE = w.mass[E]
        dE = float(np.dot(d[E], wE) / mE)
        I += float(np.sum(np.abs(d[E] - dE) ** p * wE))
        II += abs(dE) ** p * mE
        S += float(np.sum(np.abs(d[E]) ** p * wE))
    union = cover.union_E()
    lhs = float(np.sum(np.abs(d[union]) ** p * w.mass[union]))
    bound = 2 ** (p - 1) * (I + II)
    ok = lhs <= S * (1 + REL_TOL) + 1e-300 and S <= bound * (1 + REL_TOL) + 1e-300
    return {"I": I, "II": II, "lhs": lhs, "sum_E": S, "bound": bound, "ok": bool(ok)}


def averages_table(Fm, cover, w):
    """(members, J) matrix of E-averages."""
    cols = [Fm[:, E] @ w.mass[E] / mE for E, mE in zip(cover.E, cover.E_mass)]
    return np.stack(cols, axis=1) if cols else np.zeros((Fm.shape[0], 0))


def tolerances(cover, eps, p):
    J = cover.J
    return (eps ** p / (J * cover.E_mass)) ** (1.0 / p) if J else np.zeros(0)


def _resolved(vals, tau):
    h = len(vals) // 2
    tail = vals[h:]
    return len(vals) < 2 or np.ptp(tail) <= tau


def select_subsequence(tables, taus):
    """Diagonal refinement over every (level, l) coordinate.

    ``tables[i]`` is a (members, J_i) matrix of averages at level i and
    ``taus[i]`` the per-column tolerances.  Returns strictly increasing member
    indices.
    """
    n = tables[0].shape[0] if tables else 0
    S = np.arange(n)
    if n < 2:
        return S.tolist()
    changed = True
    while changed and len(S) >= 2:
        changed = False
        for A, tau in zip(tables, taus):
            for j in range(A.shape[1]):
                while len(S) >= 2 and not _resolved(A[S, j], tau[j]):
                    S = _split(S, A[S, j])
                    changed = True
    return S.tolist()


def _split(S, vals):
    """Cut the sorted values at their widest gap and keep the side holding
    more of the late members (the last half of S), the earliest index on a tie."""
    order = np.argsort(vals, kind="stable")
    gaps = np.diff(vals[order])
    cut = int(np.argmax(gaps)) + 1
    low, high = np.sort(S[order[:cut]]), np.sort(S[order[cut:]])
    late = S[len(S) // 2]
    nl, nh = int(np.sum(low >= late)), int(np.sum(high >= late))
    if nl != nh:
        return low if nl > nh else high
    return low if low[0] < high[0] else high


def tail_start(S, A, tau):
    """Smallest position t with range(A[S[t:], l]) <= tau_l for every l."""
    S = np.asarray(S)
    for t in range(len(S)):
        sub = A[S[t:]]
        if np.all(np.ptp(sub, axis=0) <= tau) if sub.shape[1] else True:
            return t
    return len(S) - 1


@dataclass
class ExtractionReport:
    kind: str
    p: float
    N: float
    eps_schedule: list
    levels: list
    subsequence: list
    limit: np.ndarray = field(repr=False)
    q_table: list
    constants: dict
    notes: list = field(default_factory=list)
    extras: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        return {
            "kind": self.kind,
            "p": self.p,
            "N": self.N,
            "eps_schedule": list(self.eps_schedule),
            "levels": self.levels,
            "subsequence": list(self.subsequence),
            "q_table": self.q_table,
            "constants": self.constants,
            "notes": list(self.notes),
        }

    def level_rows(self):
        return [[lv.get("eps"), lv.get("J"), lv.get("radius"), lv.get("overlap_M"),
                 lv.get("I"), lv.get("II"), lv.get("modulus"), lv.get("bound_L1"),
                 lv.get("T")] for lv in self.levels]


def _pairwise(Fm, idx):
    i, j = np.triu_indices(len(idx), k=1)
    return np.asarray(idx)[i], np.asarray(idx)[j]


def _extract(kind, Fm, covers, eps_schedule, p, N, M, C, w, q_list, region=None,
             local=False, notes=()):
    """Shared selection and bound verification.

    ``C`` bounds sum_l ||f - f_E||^p by C eps^p.  For global runs the L^1
    modulus is checked against C' eps w(Omega)^{1/p'} + 2M eps^{1/N'} with
    C' = (2^{p-1}(2^p C + 1))^{1/p}; local runs check the L^p modulus on
    ``region`` against C' eps.
    """
    tables = [averages_table(Fm, cv, w) for cv in covers]
    taus = [tolerances(cv, e, p) for cv, e in zip(covers, eps_schedule)]
    S = select_subsequence(tables, taus)
    Cp = (2 ** (p - 1) * (2 ** p * C + 1)) ** (1.0 / p)
    p_conj = float(holder_conjugate(p)) if p != 1 else math.inf
    N_conj = float(holder_conjugate(N)) if N != math.inf else 1.0
    wtot = w.of(region) if local else w.total
    levels = []
    q_rows = []
    mask = region if region is not None else slice(None)
    for cv, e, A, tau in zip(covers, eps_schedule, tables, taus):
        T = tail_start(S, A, tau) if len(S) >= 2 else 0
        tail = np.asarray(S[T:])
        a, b = _pairwise(Fm, tail)
        I_max = II_max = mod_p = mod_1 = 0.0
        ok_17 = ok_I = ok_II = ok_L1 = True
        D = Fm[a] - Fm[b] if a.size else np.zeros((0, Fm.shape[1]))
        if a.size:
            I = np.zeros(a.size)
            S_E = np.zeros(a.size)
            II = np.zeros(a.size)
            for E, mE in zip(cv.E, cv.E_mass):
                wE = w.mass[E]
                dE = D[:, E] @ wE / mE
                I += np.abs(D[:, E] - dE[:, None]) ** p @ wE
                S_E += np.abs(D[:, E]) ** p @ wE
                II += np.abs(dE) ** p * mE
            union = cv.union_E()
            cover_region = region if local else union
            lhs = np.abs(D[:, cover_region]) ** p @ w.mass[cover_region]
            ok_17 = bool(np.all(lhs <= S_E * (1 + REL_TOL) + 1e-300)
                         and np.all(S_E <= 2 ** (p - 1) * (I + II) * (1 + REL_TOL) + 1e-300))
            ok_I = bool(np.all(I <= 2 ** p * C * e ** p * (1 + REL_TOL)))
            ok_II = bool(np.all(II <= e ** p * (1 + 1e-9)))
            I_max, II_max = float(I.max()), float(II.max())
            mod_p = float(lhs.max() ** (1 / p))
            if local:
                ok_L1 = bool(mod_p <= Cp * e * (1 + REL_TOL))
                mod_1 = float((np.abs(D[:, mask]) @ w.mass[mask]).max())
            else:
                l1 = np.abs(D) @ w.mass
                mod_1 = float(l1.max())
        if local:
            bound = Cp * e
            comps = [Cp * e, 0.0]
        else:
            comps = [Cp * e * wtot ** (1 / p_conj if p_conj != math.inf else 0.0),
                     2 * M * e ** (1 / N_conj)]
            bound = comps[0] + comps[1]
            ok_L1 = bool(mod_1 <= bound * (1 + REL_TOL))
        level = {
            "eps": e, "J": cv.J, "radius": cv.radius, "overlap_M": cv.overlap_M,
            "coverage_deficit": cv.coverage_deficit, "I": I_max, "II": II_max,
            "I_bound": 2 ** p * C * e ** p, "II_bound": e ** p,
            "modulus": mod_1 if not local else mod_p, "modulus_p": mod_p, "modulus_L1": mod_1,
            "bound_L1": bound, "bound_components": comps, "T": int(T), "tail_size": int(tail.size),
            "checks": {"eq_1_7": ok_17, "I_bound": ok_I, "II_bound": ok_II, "modulus_bound": ok_L1},
        }
        levels.append(level)
        for q in q_list:
            q_rows.append(_q_row(D, q, p, N, M, w, mask, e, local))
    failed = [(lv["eps"], k) for lv in levels for k, v in lv["checks"].items() if not v]
    if failed:
        raise InvariantFailure(f"bound chain failed at {failed[0]}", witness={"failures": failed})
    limit = Fm[S[-1]].copy() if S else np.zeros(Fm.shape[1])
    return ExtractionReport(
        kind=kind, p=p, N=N, eps_schedule=list(eps_schedule), levels=levels,
        subsequence=[int(s) for s in S], limit=limit, q_table=q_rows,
        constants={"M": M, "C": C, "C_modulus": Cp},
        notes=list(notes) + ["the limit reported is the last member of the subsequence (tail representative)"],
        extras={"tables": tables, "taus": taus, "covers": covers},
    )


def _q_row(D, q, p, N, M, w, mask, e, local):
    q = float(q)
    row = {"eps": e, "q": q}
    if D.shape[0] == 0:
        row.update({"modulus_q": 0.0, "interp_bound": 0.0, "ok": True})
        return row
    wm = w.mass[mask]
    Dm = np.abs(D[:, mask])
    l1 = Dm @ wm
    lq = (Dm ** q @ wm) ** (1 / q)
    if local and q <= p:
        lp = (Dm ** p @ wm) ** (1 / p)
        wq = float(wm.sum())
        bound = lp * wq ** (1 / q - 1 / p)
        ok = bool(np.all(lq <= bound * (1 + 1e-12) + 1e-300))
        row.update({"route": "holder", "modulus_q": float(lq.max()), "interp_bound": float(bound.max()), "ok": ok})
        return row
    if not (N == math.inf or q < N):
        row.update({"route": "none", "modulus_q": float(lq.max()), "interp_bound": None, "ok": False})
        return row
    lam = float(interpolation_lambda(q, INF if N == math.inf else N))
    lN = Dm.max(axis=1) if N == math.inf else (Dm ** N @ wm) ** (1 / N)
    direct = l1 ** lam * lN ** (1 - lam)
    ok = bool(np.all(lq <= direct * (1 + 1e-12) + 1e-300))
    row.update({"route": "interpolation", "lambda": lam, "modulus_q": float(lq.max()),
                "interp_bound": float((l1 ** lam * (2 * M) ** (1 - lam)).max()), "ok": ok})
    return row


def _quotients(Fm, G, cover, p, w, nu, mu):
    """(members, J) Poincaré quotients with the pair norm on F."""
    out = np.zeros((Fm.shape[0], cover.J))
    a_tab = np.zeros((Fm.shape[0], cover.J))
    for l, (E, F, mE) in enumerate(zip(cover.E, cover.F, cover.E_mass)):
        wE = w.mass[E]
        avg = Fm[:, E] @ wE / mE
        num = (np.abs(Fm[:, E] - avg[:, None]) ** p @ wE) ** (1 / p)
        const = np.ptp(Fm[:, E], axis=1) == 0
        den = (np.abs(Fm[:, F]) ** p @ nu.mass[F]) ** (1 / p) + (G[:, F] ** p @ mu.mass[F]) ** (1 / p)
        a_tab[:, l] = den
        with np.errstate(divide="ignore", invalid="ignore"):
            qv = np.where(const, 0.0, np.where(den > 0, num / den, np.inf))
        out[:, l] = np.where(const | (num == 0), 0.0, qv)
    return out, a_tab


def _cover_for(eps, family, Fm, G, d, domain, K, w, nu, mu, c0, radius_grid, extra_ok=None,
               check_deficit=True):
    worst = None
    for r in sorted(radius_grid, reverse=True):
        cv = build_cover(d, domain, K, r, c0, w, eps, check_deficit=check_deficit)
        if extra_ok is not None and not extra_ok(cv):
            continue
        Qt, a_tab = _quotients(Fm, G, cv, family.p, w, nu, mu)
        if np.all(Qt <= eps):
            return cv, Qt, a_tab
        k, l = np.unravel_index(int(np.argmax(Qt)), Qt.shape)
        worst = {"member": int(k), "ball": int(l), "center": int(cv.centers[l]),
                 "radius": r, "quotient": float(Qt[k, l])}
    raise HypothesisViolation(
        f"local Poincaré inequality fails at eps={eps} on every trial radius",
        witness=worst or {"eps": eps})


def run_general(family, d, domain, w, nu, mu, Q, eps_schedule=DEFAULT_EPS, c0=1.0,
                radius_grid=None, rho=None):
    """Extraction for a bounded family of Sobolev pairs (global version)."""
    eps_schedule = sorted(eps_schedule, reverse=True)
    Mobs = certify(family, w, nu, mu, Q)
    M = family.M
    Fm = family.F
    G = np.array([sqrtQ_magnitude(Q, m.g) for m in family.members])
    if radius_grid is None:
        radius_grid = default_radius_grid(domain.diameter / 4)
    covers, quot, atabs = [], [], []
    for e in eps_schedule:
        K = select_K(w, e, rho)
        cv, Qt, a_tab = _cover_for(e, family, Fm, G, d, domain, K, w, nu, mu, c0, radius_grid)
        covers.append(cv)
        quot.append(Qt)
        atabs.append(a_tab)
    C1 = max(cv.overlap_M for cv in covers)
    p = family.p
    C2 = 2 ** p * C1
    C = C2 * M ** p
    for cv, e in zip(covers, eps_schedule):
        delta = _deviation_sums(Fm, cv, p, w)
        if np.any(delta > C * e ** p * (1 + REL_TOL)):
            k = int(np.argmax(delta))
            raise InvariantFailure(f"deviation sum exceeds C2 M^p eps^p at eps={e}",
                                   witness={"member": k, "sum": float(delta[k]), "bound": C * e ** p})
    rep = _extract("general", Fm, covers, eps_schedule, p, family.N, M, C, w, family.q_list,
                   notes=["each member witnesses its own closure membership by the constant sequence"])
    rep.constants.update({"C1": C1, "C2": C2, "M_observed": Mobs, "c0": c0,
                          "gamma": swallowing_gamma(d.kappa)})
    for lv, Qt in zip(rep.levels, quot):
        lv["worst_quotient"] = float(Qt.max()) if Qt.size else 0.0
    rep.extras.update({"a_tables": atabs, "quotients": quot})
    return rep


def _deviation_sums(Fm, cover, p, w):
    out = np.zeros(Fm.shape[0])
    for E, mE in zip(cover.E, cover.E_mass):
        wE = w.mass[E]
        avg = Fm[:, E] @ wE / mE
        out += np.abs(Fm[:, E] - avg[:, None]) ** p @ wE
    return out


def run_abstract(fs, covers, eps_schedule, p, N, C, w, M=None, a_tables=None, q_list=()):
    """Extraction from deviation sums alone (no gradient data).

    With ``a_tables`` each member must satisfy ||f - f_E|| <= eps a_l with
    sum_l a_l^p <= C; otherwise the sums are checked directly against C eps^p.
    """
    Fm = np.array([np.asarray(f, dtype=float) for f in fs])
    pairs = sorted(zip(eps_schedule, covers), key=lambda t: -t[0])
    eps_schedule = [e for e, _ in pairs]
    covers = [c for _, c in pairs]
    if M is None:
        M = float(max(lp_norm(f, N, w) for f in Fm))
    for i, (cv, e) in enumerate(zip(covers, eps_schedule)):
        dev = np.zeros((Fm.shape[0], cv.J))
        for l, (E, mE) in enumerate(zip(cv.E, cv.E_mass)):
            if mE <= 0:
                raise ZeroMeasureError("cover contains a zero-mass E")
            wE = w.mass[E]
            avg = Fm[:, E] @ wE / mE
            dev[:, l] = (np.abs(Fm[:, E] - avg[:, None]) ** p @ wE) ** (1 / p)
        if a_tables is not None:
            a = np.asarray(a_tables[i])
            bad = dev > e * a * (1 + REL_TOL)
            if bad.any():
                k, l = np.argwhere(bad)[0]
                raise HypothesisViolation(
                    f"member {k} violates the per-set bound on set {l} at eps={e}",
                    witness={"member": int(k), "set": int(l), "lhs": float(dev[k, l]),
                             "rhs": float(e * a[k, l])})
            sums = np.sum(a ** p, axis=1)
            if np.any(sums > C * (1 + REL_TOL)):
                k = int(np.argmax(sums))
                raise HypothesisViolation(f"sum of a_l^p exceeds C for member {k} at eps={e}",
                                          witness={"member": k, "sum": float(sums[k]), "C": C})
        total = np.sum(dev ** p, axis=1)
        if np.any(total > C * e ** p * (1 + REL_TOL)):
            k = int(np.argmax(total))
            raise HypothesisViolation(
                f"member {k} violates the deviation-sum hypothesis at eps={e}",
                witness={"member": k, "sum": float(total[k]), "bound": C * e ** p})
    return _extract("abstract", Fm, covers, eps_schedule, p, N, M, C, w, q_list)


def run_local(family, d, domain, w, nu, mu, Q, Omega_prime, j_max, Omega_dprime=None, c0=1.0,
              radius_grid=None, j_values=None):
    """Extraction on Omega' with eps = 1/j; only cells of the covers matter."""
    Omega_prime = np.asarray(Omega_prime, dtype=bool)
    p = family.p
    if not Omega_prime.any():
        return ExtractionReport("local", p, family.N, [], [], list(range(len(family.members))),
                                np.zeros(domain.n_active), [], {"M": family.M},
                                notes=["Omega' is empty: nothing to verify"])
    js = list(j_values) if j_values is not None else list(range(1, j_max + 1))
    eps_schedule = [1.0 / j for j in js]
    Fm = family.F
    G = np.array([sqrtQ_magnitude(Q, m.g) for m in family.members])
    if radius_grid is None:
        radius_grid = default_radius_grid(domain.diameter / 4)
    inside = (lambda cv: not np.any(cv.union_E() & ~Omega_dprime)) if Omega_dprime is not None else None
    covers, quot = [], []
    for e in eps_schedule:
        cv, Qt, _ = _cover_for(e, family, Fm, G, d, domain, Omega_prime, w, nu, mu, c0,
                               radius_grid, extra_ok=inside, check_deficit=False)
        if not np.all(cv.union_E()[Omega_prime]):
            miss = int(np.flatnonzero(Omega_prime & ~cv.union_E())[0])
            raise HypothesisViolation(f"cover misses Omega' at cell {miss}", witness={"cell": miss})
        covers.append(cv)
        quot.append(Qt)
    union_all = np.any([cv.union_E() for cv in covers], axis=0)
    # L^N on the union of all covers plus the pair norm, as one sum
    ln = np.array([lp_norm(m.f, family.N, w, union_all) for m in family.members])
    xn = np.array([sobolev_norm(m, p, nu, mu, Q) for m in family.members])
    total = ln + xn
    M = family.M
    if not np.all(np.isfinite(total)) or np.any(total > M):
        k = int(np.flatnonzero(~np.isfinite(total) | (total > M))[0])
        raise CertificateError(
            f"member {k} has local bound {total[k]:.6g} above the declared M={M}",
            witness={"member": k, "L^N(union E)": float(ln[k]), "X": float(xn[k]), "M": M})
    M_obs = float(total.max())
    C1 = max(cv.overlap_M for cv in covers)
    C2 = 2 ** p * C1
    C = C2 * M ** p
    rep = _extract("local", Fm, covers, eps_schedule, p, family.N, M, C, w, family.q_list,
                   region=Omega_prime, local=True)
    rep.constants.update({"C1": C1, "C2": C2, "M_observed": M_obs, "w_Omega": w.total,
                          "w_Omega_prime": w.of(Omega_prime)})
    return rep


class BallSetFunction:
    """b(f, B) evaluated for all members at once: ``fn(cover, l) -> (members,)``."""

    def __init__(self, fn, label=""):
        self.fn = fn
        self.label = label

    def __call__(self, cover, l):
        v = np.asarray(self.fn(cover, l), dtype=float)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise HypothesisViolation(f"ball set function {self.label!r} is negative or infinite",
                                      witness={"ball": l})
        return v


def greedy_coloring(F):
    """Color balls so that equal colors are pairwise disjoint (index order)."""
    colors = []
    for l in range(F.shape[0]):
        used = {colors[k] for k in range(l) if np.any(F[k] & F[l])}
        c = 0
        while c in used:
            c += 1
        colors.append(c)
    return np.array(colors, dtype=int)


def run_quasimetric(fs, b, d, domain, w, c0, p, N, eps_schedule=DEFAULT_EPS, radius_grid=None,
                    M=None, q_list=(), rho=None):
    """Extraction from a ball set function b bounding local oscillation."""
    Fm = np.array([np.asarray(f, dtype=float) for f in fs])
    eps_schedule = sorted(eps_schedule, reverse=True)
    if radius_grid is None:
        radius_grid = default_radius_grid(domain.diameter / 4)
    if M is None:
        M = float(max(lp_norm(f, N, w) for f in Fm))
    covers, colors_used = [], []
    for e in eps_schedule:
        K = select_K(w, e, rho)
        found = None
        witness = None
        for r in sorted(radius_grid, reverse=True):
            cv = build_cover(d, domain, K, r, c0, w, e)
            bvals = np.stack([b(cv, l) for l in range(cv.J)], axis=1)
            dev = _deviations(Fm, cv, p, w)
            bad = dev > bvals * (1 + REL_TOL) + 1e-300
            if bad.any():
                k, l = np.argwhere(bad)[0]
                witness = {"kind": "oscillation", "member": int(k), "ball": int(l),
                           "center": int(cv.centers[l]), "radius": r,
                           "lhs": float(dev[k, l]), "b": float(bvals[k, l])}
                continue
            col = greedy_coloring(cv.F)
            ok = True
            for c in range(col.max() + 1):
                s = np.sum(bvals[:, col == c] ** p, axis=1)
                if np.any(s > e ** p * (1 + REL_TOL)):
                    k = int(np.argmax(s))
                    witness = {"kind": "disjoint-sum", "member": k, "color": c,
                               "radius": r, "sum": float(s[k]), "bound": e ** p}
                    ok = False
                    break
            if ok:
                found = (cv, int(col.max() + 1))
                break
        if found is None:
            raise HypothesisViolation(f"no trial radius satisfies the ball-function hypotheses at eps={e}",
                                      witness=witness or {"eps": e})
        covers.append(found[0])
        colors_used.append(found[1])
    C = float(max(colors_used))
    for cv, e in zip(covers, eps_schedule):
        tot = _deviation_sums(Fm, cv, p, w)
        if np.any(tot > C * e ** p * (1 + REL_TOL)):
            raise InvariantFailure(f"deviation sum exceeds colors * eps^p at eps={e}")
    rep = _extract("quasimetric", Fm, covers, eps_schedule, p, N, M, C, w, q_list)
    for lv, nc in zip(rep.levels, colors_used):
        lv["colors"] = nc
    rep.constants.update({"colors": C, "c0": c0})
    return rep


def _deviations(Fm, cover, p, w):
    out = np.zeros((Fm.shape[0], cover.J))
    for l, (E, mE) in enumerate(zip(cover.E, cover.E_mass)):
        wE = w.mass[E]
        avg = Fm[:, E] @ wE / mE
        out[:, l] = (np.abs(Fm[:, E] - avg[:, None]) ** p @ wE) ** (1 / p)
    return out


def a_star_decay(a_star, d, domain, K, radii):
    """sup over y in K of a_*(B_r(y)) for each radius."""
    idx = np.flatnonzero(K)
    return [float(max(a_star(r, int(y)) for y in idx)) for r in radii]


def run_two_measure(fs, gs, mu, a_star, d, domain, w, c0, p, N, eps_schedule=DEFAULT_EPS,
                    radius_grid=None, M=None, q_list=(), rho=None):
    """b(f_i, B) = a_*(B) ||g_i||_{L^p_mu(c0 B)}; a_* must vanish as r -> 0."""
    Gm = np.abs(np.array([np.asarray(g, dtype=float) for g in gs]))
    if radius_grid is None:
        radius_grid = default_radius_grid(domain.diameter / 4)
    K = select_K(w, min(eps_schedule), rho)
    radii = sorted(radius_grid)
    sup_a = a_star_decay(a_star, d, domain, K, radii)
    table = [{"radius": r, "sup_a_star": s} for r, s in zip(radii, sup_a)]
    if not (sup_a[-1] > 0 and sup_a[0] / sup_a[-1] < 0.1):
        raise HypothesisViolation("a_* does not vanish as the radius shrinks",
                                  witness={"decay": table})

    def fn(cover, l):
        F = cover.F[l]
        return a_star(cover.radius, cover.centers[l]) * (Gm[:, F] ** p @ mu.mass[F]) ** (1 / p)

    rep = run_quasimetric(fs, BallSetFunction(fn, "a_* ||g||"), d, domain, w, c0, p, N,
                          eps_schedule, radius_grid, M, q_list, rho)
    rep.kind = "two-measure"
    rep.constants["a_star_decay"] = table
    return rep
