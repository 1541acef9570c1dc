"""One pipeline per CLI subcommand.

Each returns ``(summary, tables)`` where ``tables`` maps a file suffix to CSV
text; errors propagate as :class:`SobocompError` subclasses.
"""

import itertools
import math

import numpy as np

from . import config as cf
from .domain import distance_to_complement, lp_norm
from .engine import FamilyS, run_abstract, run_general, run_local, run_two_measure, select_K
from .errors import ConfigError, HypothesisViolation, InvariantFailure
from .exponents import (
    as_exponent,
    classical_sobolev_N,
    cutoff_conjugates,
    exponent_table,
    fmt,
    john_N,
)
from .expr import compile_expr
from .families import bump
from .forms import (
    SobolevPair,
    build_cutoff,
    local_to_global_sobolev,
    partition_gradient_norms,
    partition_of_unity,
    sobolev_norm,
    sqrtQ_magnitude,
)
from .geometry import ball, build_cover, cover_csv, is_maximal, packing_bound
from .inequalities import (
    ap_constant,
    ap_trend,
    balancing_probe,
    calibrate_delta,
    default_radius_grid,
    doubling_exponent,
    global_embedding_constant,
    local_sobolev_constant,
)
from .report import LEVEL_COLUMNS, csv_text


def _setting(cfg):
    dom = cf.make_domain(cfg)
    w, nu, mu = (cf.make_measure(cfg, dom, k) for k in ("w", "nu", "mu"))
    return dom, w, nu, mu, cf.make_quasimetric(cfg), cf.make_form(cfg, dom)


def _N(cfg):
    N = as_exponent(cfg["exponents"]["N"])
    return math.inf if N == math.inf else float(N)


def _family(cfg, dom):
    ex = cfg["exponents"]
    return FamilyS(cf.make_family(cfg, dom), float(ex["p"]), _N(cfg), float(cfg["engine"]["M"]),
                   tuple(float(q) for q in ex["q"]))


def _radius_grid(cfg, dom):
    g = cfg["engine"].get("radius_grid")
    return sorted(g) if g else default_radius_grid(dom.diameter / 4)


def cover(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    c = cfg.get("cover", {})
    eps = float(c.get("epsilon", 0.05))
    r = float(c.get("radius", dom.diameter / 8))
    K = select_K(w, eps, distance_to_complement(dom))
    plan = build_cover(d, dom, K, r, float(c.get("c0", 1.0)), w, eps)
    summary = plan.summary()
    summary["K_cells"] = int(K.sum())
    summary["verify"] = plan.verify(K, w)
    summary["maximal"] = is_maximal(d, dom, K, plan)
    summary["overlap_bound"] = packing_bound(d, dom, r, float(c.get("c0", 1.0)))
    return summary, {"cover": cover_csv(plan, dom)}


def poincare(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    fam = cf.make_family(cfg, dom)
    p = float(cfg["exponents"]["p"])
    c0 = float(cfg["engine"]["c0"])
    grid = _radius_grid(cfg, dom)
    rho = distance_to_complement(dom)
    out, rows = [], []
    for eps in cfg["engine"]["eps"]:
        K = select_K(w, eps, rho)
        rep = calibrate_delta(fam, K, eps, c0, p, w, nu, mu, Q, d, grid, max_centers=64)
        out.append(rep.as_dict())
        rows += [[eps, r["radius"], r["worst"], r["member"], r["center"]] for r in rep.rows]
    K = select_K(w, min(cfg["engine"]["eps"]), rho)
    idx = np.flatnonzero(K)
    Ks = np.zeros_like(K)
    Ks[idx[np.linspace(0, idx.size - 1, min(idx.size, 32)).round().astype(int)]] = True
    bal = balancing_probe(w, mu, Ks, c0, p, grid, d)
    return ({"levels": out, "balancing": bal},
            {"poincare": csv_text(("eps", "radius", "worst", "member", "center"), rows)})


def apcheck(cfg):
    pr = cfg.get("probe", {})
    text = pr.get("density") or cfg["measures"]["w"].get("expr")
    if text is None:
        raise ConfigError("apcheck needs probe.density or measures.w.expr")
    fn = compile_expr(text)
    factor = int(pr.get("factor", 4))
    base = cfg["domain"]["cells"][0]
    rows, res = [], []
    for p in pr.get("p", [2]):
        dom = cf.make_domain(cfg)
        rep = ap_constant(dom, fn(dom.centers), float(p))
        tr = ap_trend(lambda n: cf.make_domain(cfg, n), fn, float(p), base, factor)
        res.append({"p": p, "sup": rep.sup, "trend": tr})
        rows.append([p, rep.sup, tr["coarse"], tr["fine"], tr["growth"]])
    return ({"density": text, "results": res},
            {"ap": csv_text(("p", "sup", "coarse", "fine", "growth"), rows)})


def doubling(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    pr = cfg.get("probe", {})
    center = pr.get("center", [float(np.mean(b)) for b in cfg["domain"]["bounds"]])
    radii = sorted(pr.get("radii", [0.05, 0.1, 0.2, 0.4]))
    balls = [ball(d, center, r, dom) for r in radii]
    pairs = [(balls[i], balls[0]) for i in range(1, len(balls))]
    fit = doubling_exponent(w, pairs)
    p = cfg["exponents"]["p"]
    N = None
    if fit["theta"] > p:
        N = float(john_N(fit["theta"], p))
    rows = [[b.radius, w.of(b.cells)] for b in balls]
    return {"center": center, "fit": fit, "john_N_at_theta": N}, \
        {"doubling": csv_text(("radius", "mass"), rows)}


def exponents(cfg):
    g = cfg.get("exponent_grid")
    if g is None:
        raise ConfigError("exponents needs exponent_grid")
    grid = [{"n": n, "p": p, "a": a, "b": b, "s": s, "part": part}
            for n, p, a, b, s, part in itertools.product(g["n"], g["p"], g["a"], g["b"], g["s"],
                                                          g.get("part", ["i"]))]
    rows = exponent_table(grid)
    for row, spec in zip(rows, grid):
        n, p, s = (as_exponent(spec[k]) for k in ("n", "p", "s"))
        row["classical_N"] = fmt(classical_sobolev_N(n, p)) if 1 <= p < n else None
        row["unweighted_boundary"] = (fmt(1 + p / (n - 1)) if n > 1 else "inf")
    cols = ("n", "p", "a", "b", "s", "part", "holds", "binding_constraint", "inv_q_threshold",
            "q_upper", "witness_N", "classical_N", "unweighted_boundary")
    return {"rows": rows}, {"exponents": csv_text(cols, [[r[c] for c in cols] for r in rows])}


def _cutoffs(cfg, dom, d, Q, mu):
    part = cfg.get("partition")
    if part is None:
        raise ConfigError("this subcommand needs a partition section")
    frac = float(part.get("inner_fraction", 0.5))
    s = as_exponent(cfg["exponents"].get("s", "inf"))
    s = math.inf if s == math.inf else float(s)
    cuts = [build_cutoff(d, dom, ball(d, b["center"], b["radius"], dom), frac * b["radius"], Q, mu, s)
            for b in part["balls"]]
    K = cf.make_mask(dom, part["K"])
    return K, cuts, s


def partition(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    K, cuts, s = _cutoffs(cfg, dom, d, Q, mu)
    fam = partition_of_unity(K, cuts)
    tot = fam.total()
    supp = all(bool(np.all(fam.psis[j][~fam.balls[j].cells] == 0)) for j in range(fam.J))
    summary = {
        "J": fam.J,
        "K_cells": int(K.sum()),
        "sum_error_on_K": float(np.abs(tot[K] - 1).max()) if K.any() else 0.0,
        "psi_min": float(fam.psis.min()),
        "psi_max": float(fam.psis.max()),
        "supports_respected": supp,
        "product_identity_error": float(np.abs(tot - fam.product_form()).max()),
        "gradient_norms": partition_gradient_norms(fam, Q, mu, s).tolist(),
        "cutoff_certificates": [c.certificate for c in cuts],
    }
    rows = [[j, *fam.balls[j].center_point, fam.balls[j].radius, float(fam.psis[j].max())]
            for j in range(fam.J)]
    cols = ("j", *[f"x{k + 1}" for k in range(dom.dim)], "radius", "psi_max")
    return summary, {"partition": csv_text(cols, rows)}


def _localized(psi, dpsi, pair, B):
    f = psi * pair.f
    g = dpsi * pair.f[:, None] + psi[:, None] * pair.g
    return SobolevPair(f, g, support=B.cells)


def sobolev_assembly(dom, w, nu, mu, Q, K, cuts, train, test, p, sigma, s):
    """Measure per-ball constants on ``train`` and check the assembled bound on ``test``."""
    _, tprime = cutoff_conjugates(s, p, sigma)
    tprime = math.inf if tprime == math.inf else float(tprime)
    fam = partition_of_unity(K, cuts)
    norms = partition_gradient_norms(fam, Q, mu, s)
    CB, C1B = [], []
    for j, B in enumerate(fam.balls):
        loc = [_localized(fam.psis[j], fam.grads[j], pr, B) for pr in train]
        CB.append(local_sobolev_constant(loc, B, p, sigma, w, nu, mu, Q))
        C1B.append(global_embedding_constant(train, B, p, tprime, nu, mu, Q))
    C, cbar = local_to_global_sobolev(CB, C1B, norms)
    rows = []
    for k, pr in enumerate(test):
        lhs = lp_norm(pr.f, p * sigma, w, K)
        rhs = C * sobolev_norm(pr, p, nu, mu, Q)
        rows.append({"member": k, "lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs)})
    return {"C_Omega_prime": C, "C_bar": cbar, "C_B": CB, "C1_B": C1B,
            "psi_gradient_norms": norms.tolist(), "t_prime": tprime, "held_out": rows,
            "violations": sum(not r["ok"] for r in rows)}


def _bump_family(dom, region, count, radius_range, seed):
    rng = np.random.default_rng(seed)
    idx = np.flatnonzero(region)
    out = []
    for _ in range(count):
        c = dom.centers[rng.choice(idx)]
        out.append(bump(dom, c, float(rng.uniform(*radius_range))))
    return out


def sobolev_local(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    K, cuts, s = _cutoffs(cfg, dom, d, Q, mu)
    ex = cfg["exponents"]
    p, sigma = float(ex["p"]), float(ex.get("sigma", 2.0))
    part = cfg["partition"]
    region = np.ones(dom.n_active, dtype=bool)
    train = _bump_family(dom, region, int(part.get("train_count", 24)), (0.1, 0.4), 0)
    test = _bump_family(dom, region, int(part.get("test_count", 24)), (0.1, 0.4), 1)
    res = sobolev_assembly(dom, w, nu, mu, Q, K, cuts, train, test, p, sigma, s)
    if res["violations"]:
        bad = next(r for r in res["held_out"] if not r["ok"])
        raise HypothesisViolation("assembled Sobolev bound fails on a held-out member", witness=bad)
    rows = [[r["member"], r["lhs"], r["rhs"]] for r in res["held_out"]]
    return res, {"heldout": csv_text(("member", "lhs", "rhs"), rows)}


def _engine_tables(rep):
    rows = rep.level_rows()
    q = [[r["eps"], r["q"], r.get("route"), r["modulus_q"], r.get("interp_bound"), r["ok"]]
         for r in rep.q_table]
    return {"levels": csv_text(LEVEL_COLUMNS, rows),
            "q": csv_text(("eps", "q", "route", "modulus_q", "bound", "ok"), q)}


def compact_general(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    fam = _family(cfg, dom)
    e = cfg["engine"]
    rep = run_general(fam, d, dom, w, nu, mu, Q, e["eps"], float(e["c0"]), _radius_grid(cfg, dom),
                      distance_to_complement(dom))
    return rep.as_dict(), _engine_tables(rep)


def compact_abstract(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    fam = _family(cfg, dom)
    e = cfg["engine"]
    gen = run_general(fam, d, dom, w, nu, mu, Q, e["eps"], float(e["c0"]), _radius_grid(cfg, dom),
                      distance_to_complement(dom))
    rep = run_abstract([m.f for m in fam.members], gen.extras["covers"], gen.eps_schedule, fam.p,
                       fam.N, gen.constants["C"], w, M=fam.M, a_tables=gen.extras["a_tables"],
                       q_list=fam.q_list)
    out = rep.as_dict()
    out["matches_general"] = rep.subsequence == gen.subsequence
    if not out["matches_general"]:
        raise InvariantFailure("abstract and general subsequences differ",
                               witness={"general": gen.subsequence, "abstract": rep.subsequence})
    return out, _engine_tables(rep)


def compact_local(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    fam = _family(cfg, dom)
    e = cfg["engine"]
    if "omega_prime" not in e:
        raise ConfigError("compact-local needs engine.omega_prime")
    Op = cf.make_mask(dom, e["omega_prime"])
    Odp = cf.make_mask(dom, e["omega_dprime"]) if "omega_dprime" in e else None
    rep = run_local(fam, d, dom, w, nu, mu, Q, Op, int(e["j_max"]), Odp, float(e["c0"]),
                    _radius_grid(cfg, dom))
    return rep.as_dict(), _engine_tables(rep)


def compact_quasimetric(cfg):
    dom, w, nu, mu, d, Q = _setting(cfg)
    fam = _family(cfg, dom)
    e = cfg["engine"]
    mode = e.get("a_star", "radius")
    a_star = (lambda r, y: r) if mode == "radius" else (lambda r, y: 1.0)
    gs = [sqrtQ_magnitude(Q, m.g) for m in fam.members]
    rep = run_two_measure([m.f for m in fam.members], gs, mu, a_star, d, dom, w, float(e["c0"]),
                          fam.p, fam.N, e["eps"], _radius_grid(cfg, dom), fam.M, fam.q_list,
                          distance_to_complement(dom))
    return rep.as_dict(), _engine_tables(rep)


PIPELINES = {
    "cover": cover,
    "poincare": poincare,
    "apcheck": apcheck,
    "doubling": doubling,
    "exponents": exponents,
    "partition": partition,
    "sobolev-local": sobolev_local,
    "compact-general": compact_general,
    "compact-abstract": compact_abstract,
    "compact-local": compact_local,
    "compact-quasimetric": compact_quasimetric,
}
