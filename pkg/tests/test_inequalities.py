import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from sobocomp.domain import build_grid, density_measure, distance_to_complement, lebesgue, power_weight
from sobocomp.errors import InvalidWeightError, PreconditionError, SupportError, ZeroMeasureError
from sobocomp.families import bump, constants
from sobocomp.forms import SobolevPair, gradient, identity_form, zero_form
from sobocomp.geometry import Quasimetric, ball
from sobocomp.inequalities import (
    DegenerateFormWarning,
    ap_constant,
    balancing_probe,
    calibrate_delta,
    default_radius_grid,
    doubling_exponent,
    euclidean_ball,
    local_sobolev_constant,
    normalized_sobolev_check,
    poincare_quotient,
    weighted_ball_poincare,
)

EUC = Quasimetric("euclidean")
LINE = build_grid(1, [0, 1], 400)
LEB = lebesgue(LINE)
ID = identity_form(LINE)
X = LINE.centers[:, 0]
XPAIR = SobolevPair(X, np.ones(LINE.n_active))


def q(pair, B, c0=1.0, w=LEB, Q=ID):
    return poincare_quotient(pair, B, c0, 2, w, w, w, Q, EUC)


def test_quotient_examples():
    whole = ball(EUC, [0.5], 0.51, LINE)
    assert whole.cells.all()
    assert q(constants(LINE, 3)[2], whole) == 0
    assert q(XPAIR, whole) == pytest.approx((1 / math.sqrt(12)) / (1 / math.sqrt(3) + 1), rel=1e-4)


def test_quotient_degenerate_kernel():
    tiny = density_measure(LINE, 1e-12)
    B = ball(EUC, [0.5], 0.3, LINE)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        val = poincare_quotient(XPAIR, B, 1.0, 2, LEB, tiny, LEB, zero_form(LINE), EUC)
    assert val > 1e4
    with pytest.warns(DegenerateFormWarning):
        val = poincare_quotient(XPAIR, B, 1.0, 2, LEB, density_measure(LINE, 0.0), LEB, zero_form(LINE), EUC)
    assert val == math.inf


def _neumann_constant(L, n=400):
    """Smallest positive Neumann eigenvalue of -u'' on an interval of length L,
    from a dense symmetric eigen-solve; returns 1/sqrt(lambda_1)."""
    h = L / n
    A = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h ** 2
    A[0, 0] = A[-1, -1] = 1 / h ** 2
    lam = scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=[1, 1])[0]
    return 1 / math.sqrt(lam)


def test_calibrate_delta_constants_and_zero():
    grid = default_radius_grid(0.4, levels=6)
    rep = calibrate_delta(constants(LINE, 4), LINE.all_cells(), 0.1, 1.0, 2, LEB, LEB, LEB, ID, EUC, grid,
                          max_centers=10)
    assert rep.delta == grid[-1]
    rep = calibrate_delta([XPAIR], LINE.all_cells(), 0.0, 1.0, 2, LEB, LEB, LEB, ID, EUC, grid)
    assert rep.delta == 0 and rep.diagnostic


def test_calibrate_delta_linear_in_eps():
    C1 = _neumann_constant(1.0)
    assert C1 == pytest.approx(1 / math.pi, rel=1e-3)
    grid = default_radius_grid(0.4, levels=14, ratio=0.75)
    K = np.abs(X - 0.5) < 0.25
    deltas = []
    for eps in (0.2, 0.1, 0.05):
        rep = calibrate_delta([XPAIR], K, eps, 1.0, 2, LEB, LEB, LEB, ID, EUC, grid, max_centers=9)
        # quotient <= ||f - avg|| / ||f'|| <= (2r) C1 on an interval of length 2r
        floor = max((r for r in grid if 2 * r * C1 * 1.01 <= eps), default=0.0)
        assert rep.delta >= floor
        deltas.append(rep.delta)
    slope = np.polyfit(np.log([0.2, 0.1, 0.05]), np.log(deltas), 1)[0]
    assert slope <= 1.3 and deltas[0] >= deltas[1] >= deltas[2] > 0


def test_balancing_examples():
    K = np.abs(X - 0.5) < 0.2
    out = balancing_probe(LEB, LEB, K, 1.0, 2, [0.1, 0.01], EUC)
    for r, v in zip(out["radii"], out["values"]):
        assert v <= r ** 2 * (1 + 1e-12)
    assert out["flag"] == "balanced"
    assert balancing_probe(LEB, LEB, K, 1.0, 2, [0.1], EUC)["flag"] == "undetermined"


def test_balancing_boundary_power_weight():
    rho = distance_to_complement(LINE)
    w5 = power_weight(LINE, rho, 5)
    K = X < 0.05
    radii = [0.04, 0.02, 0.01]
    out = balancing_probe(w5, LEB, K, 2.0, 2, radii, EUC)
    for r, v in zip(radii, out["values"]):
        brute = max(r ** 2 * w5.mass[np.abs(X - X[y]) < r].sum() / LEB.mass[np.abs(X - X[y]) < 2 * r].sum()
                    for y in np.flatnonzero(K))
        assert v == pytest.approx(brute, rel=1e-12)
    assert out["flag"] == "balanced"


def test_balancing_zero_mu():
    mu = density_measure(LINE, "x > 0.5")
    with pytest.raises(ZeroMeasureError):
        balancing_probe(LEB, mu, X < 0.1, 1.0, 2, [0.01], EUC)


def test_ap_unit_weight_and_invalid():
    dom = build_grid(1, [-1, 1], 64)
    for p in (1, 2, 3):
        rep = ap_constant(dom, np.ones(dom.n_active), p)
        assert np.all(rep.ratios == 1.0)
    with pytest.raises(InvalidWeightError):
        ap_constant(dom, np.abs(dom.centers[:, 0]) - 0.5, 2)


def test_doubling_examples():
    dom = build_grid(1, [-1, 1], 4000)
    leb = lebesgue(dom)
    c = dom.cell_of([0.0005])
    radii = [0.05, 0.1, 0.2, 0.4]
    pairs = [(ball(EUC, c, r, dom), ball(EUC, c, r / k, dom)) for r in radii for k in (2, 4)]
    assert doubling_exponent(leb, pairs)["theta"] == pytest.approx(1.0, abs=0.05)
    wh = density_measure(dom, "abs(x)^0.5")
    assert doubling_exponent(wh, pairs)["theta"] == pytest.approx(1.5, abs=0.1)
    one = [(ball(EUC, c, 0.3, dom), ball(EUC, c, 0.1, dom))]
    a, b = wh.of(one[0][0].cells), wh.of(one[0][1].cells)
    assert doubling_exponent(wh, one)["theta"] == pytest.approx(math.log(a / b) / math.log(3), rel=1e-12)


def test_doubling_zero_mass():
    w = density_measure(LINE, "x > 0.5")
    pair = (ball(EUC, 10, 0.02, LINE), ball(EUC, 10, 0.01, LINE))
    with pytest.raises(ZeroMeasureError):
        doubling_exponent(w, [pair])


def test_doubling_product_measure():
    dom = build_grid(2, [-1, 1], 200)
    w = density_measure(dom, "abs(x)^0.5 * abs(y)^1")
    c = dom.cell_of([0.001, 0.001])
    pairs = [(ball(EUC, c, r, dom), ball(EUC, c, r / 2, dom)) for r in (0.1, 0.2, 0.4, 0.8)]
    assert doubling_exponent(w, pairs)["theta"] == pytest.approx((1 + 0.5) + (1 + 1), abs=0.1)


def _bump_pairs(dom, B, count=5):
    c = dom.centers[B.center, 0]
    return [bump(dom, [c + o], R) for o, R in zip(np.linspace(-0.05, 0.05, count), np.linspace(0.1, 0.2, count))]


def test_local_sobolev_examples():
    B = euclidean_ball(LINE, [0.5], 0.3)
    zero = SobolevPair(np.zeros(LINE.n_active), np.zeros(LINE.n_active), support=B.cells)
    assert local_sobolev_constant([zero], B, 2, 1.5, LEB, LEB, LEB, ID) == 0
    vals = []
    for n in (400, 1600):
        dom = build_grid(1, [0, 1], n)
        m = lebesgue(dom)
        Bn = euclidean_ball(dom, [0.5], 0.3)
        vals.append(local_sobolev_constant(_bump_pairs(dom, Bn), Bn, 2, 1.5, m, m, m, identity_form(dom)))
    assert np.isfinite(vals[0]) and vals[1] == pytest.approx(vals[0], rel=0.1)
    with pytest.raises(SupportError):
        local_sobolev_constant(constants(LINE, 2), B, 2, 1.5, LEB, LEB, LEB, ID)


def test_normalized_check_examples():
    B = euclidean_ball(LINE, [0.5], 0.3)
    zero = SobolevPair(np.zeros(LINE.n_active), np.zeros(LINE.n_active))
    assert normalized_sobolev_check(zero, B, 2, 1.5, LEB, LEB, LEB, ID, 1.0)[0]
    bp = bump(LINE, [0.5], 0.25)
    # 1-d surrogate of the elliptic gain: sigma = 3 with a generous constant
    assert normalized_sobolev_check(bp, B, 2, 3, LEB, LEB, LEB, ID, 10.0)[0]
    assert not normalized_sobolev_check(bp, B, 2, 3, LEB, LEB, LEB, ID, 0.0)[0]


def test_weighted_ball_examples():
    dom = build_grid(1, [0, 1], 2000)
    x = dom.centers[:, 0]
    D = euclidean_ball(dom, [0.5], 0.1)
    ok, C, lhs, rhs = weighted_ball_poincare(dom, x, np.ones(dom.n_active), D, 1, 1, 2)
    assert ok and lhs > 0
    rho = distance_to_complement(dom)
    E = D.cells
    wa = rho[E]
    fa = np.dot(x[E], wa) / wa.sum()
    assert lhs == pytest.approx(math.sqrt(np.sum((x[E] - fa) ** 2 * wa) * dom.cell_volume), rel=1e-12)
    ok, _, lhs, _ = weighted_ball_poincare(dom, np.ones(dom.n_active), np.zeros(dom.n_active), D, 2, 0, 2)
    assert ok and lhs == 0
    with pytest.raises(PreconditionError):
        weighted_ball_poincare(dom, x, np.ones(dom.n_active), euclidean_ball(dom, [0.1], 0.06), 1, 1, 2)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 0.3), st.floats(0.01, 0.3))
def test_calibrate_monotone(e1, e2):
    e1, e2 = sorted((e1, e2))
    grid = default_radius_grid(0.4, levels=8)
    K = np.abs(X - 0.5) < 0.25
    fam = [XPAIR, bump(LINE, [0.5], 0.3)]
    d1 = calibrate_delta(fam, K, e1, 1.0, 2, LEB, LEB, LEB, ID, EUC, grid, max_centers=5).delta
    d2 = calibrate_delta(fam, K, e2, 1.0, 2, LEB, LEB, LEB, ID, EUC, grid, max_centers=5).delta
    assert d1 <= d2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-5, 5), st.floats(0.1, 10), st.floats(0.05, 0.4),
       st.integers(0, LINE.n_active - 1))
def test_quotient_invariances(seed, shift, scale, r, center):
    rng = np.random.default_rng(seed)
    f = np.cumsum(rng.normal(size=LINE.n_active)) * 0.01
    pair = SobolevPair(f, gradient(LINE, f))
    B = ball(EUC, center, r, LINE)
    base = q(pair, B, c0=1.5)
    shifted = SobolevPair(f + shift, pair.g)
    # the nu-term of the denominator sees the shift; check with nu = 0
    zero = density_measure(LINE, 0.0)
    b0 = poincare_quotient(pair, B, 1.5, 2, LEB, zero, LEB, ID, EUC)
    assert poincare_quotient(shifted, B, 1.5, 2, LEB, zero, LEB, ID, EUC) == pytest.approx(b0, rel=1e-9)
    assert q(pair.scaled(scale), B, c0=1.5) == pytest.approx(base, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.02, 0.3), st.integers(0, LINE.n_active - 1))
def test_balancing_w_equals_mu(r, center):
    K = LINE.no_cells()
    K[center] = True
    v = balancing_probe(LEB, LEB, K, 2.0, 2, [r], EUC)["values"][0]
    ratio = LEB.of(ball(EUC, center, r, LINE).cells) / LEB.of(ball(EUC, center, 2 * r, LINE).cells)
    assert v <= r ** 2 * ratio * (1 + 1e-12)
