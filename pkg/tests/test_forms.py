import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobocomp.domain import build_grid, lebesgue, lp_norm
from sobocomp.errors import AssemblyError, CoverageError, PreconditionError, PSDError, StencilError, SupportError
from sobocomp.families import bump
from sobocomp.forms import (
    QuadraticFormField,
    SobolevPair,
    build_cutoff,
    diag_expr_form,
    form_lp_norm,
    gradient,
    grushin_form,
    identity_form,
    local_to_global_sobolev,
    partition_of_unity,
    sobolev_norm,
    sqrtQ_magnitude,
    zero_form,
)
from sobocomp.geometry import Quasimetric, ball

EUC = Quasimetric("euclidean")
SQ = build_grid(2, [0, 1], 16)
RNG = np.random.default_rng(7)


def test_sqrtQ_examples():
    g = RNG.normal(size=(SQ.n_active, 2))
    assert np.allclose(sqrtQ_magnitude(identity_form(SQ), g), np.linalg.norm(g, axis=1))
    e2 = np.tile([0.0, 1.0], (SQ.n_active, 1))
    assert np.allclose(sqrtQ_magnitude(grushin_form(SQ), e2), np.abs(SQ.centers[:, 0]))
    assert np.all(sqrtQ_magnitude(zero_form(SQ), g) == 0)


def test_psd_rejected():
    Q = np.tile(np.diag([1.0, -1e-6]), (SQ.n_active, 1, 1))
    with pytest.raises(PSDError):
        QuadraticFormField(SQ, Q)


def test_form_symmetrized():
    Q = np.tile(np.array([[2.0, 1.0], [0.0, 2.0]]), (SQ.n_active, 1, 1))
    F = QuadraticFormField(SQ, Q)
    assert np.all(F.Q == np.swapaxes(F.Q, 1, 2))


def test_form_lp_norm_examples():
    dom = build_grid(2, [0, 1], 200)
    mu = lebesgue(dom)
    e2 = np.tile([0.0, 1.0], (dom.n_active, 1))
    assert abs(form_lp_norm(e2, grushin_form(dom), 2, mu) - 1 / math.sqrt(3)) < 1e-5
    e1 = np.tile([1.0, 0.0], (dom.n_active, 1))
    kernel = diag_expr_form(dom, ["0", "1"])
    assert form_lp_norm(e1, kernel, 2, mu) == 0


def test_sobolev_norm_examples():
    dom = build_grid(1, [0, 1], 4000)
    m = lebesgue(dom)
    x = dom.centers[:, 0]
    pair = SobolevPair(x, np.ones(dom.n_active))
    Q = identity_form(dom)
    assert abs(sobolev_norm(pair, 2, m, m, Q) - (1 / math.sqrt(3) + 1)) < 1e-6
    assert sobolev_norm(SobolevPair(0 * x, 0 * x), 2, m, m, Q) == 0
    B = ball(EUC, [0.5], 0.2, dom)
    assert sobolev_norm(pair, 2, m, m, Q, B.cells) <= sobolev_norm(pair, 2, m, m, Q)


def test_pair_support_contract():
    dom = build_grid(1, [0, 1], 8)
    with pytest.raises(SupportError):
        SobolevPair(np.ones(8), np.zeros(8), support=dom.centers[:, 0] < 0.5)


def test_gradient_affine_and_quadratic():
    g = gradient(SQ, 3 * SQ.centers[:, 0] - 2 * SQ.centers[:, 1] + 1)
    assert np.allclose(g, [3, -2], atol=1e-12)
    dom = build_grid(1, [0, 1], 50)
    x = dom.centers[:, 0]
    g = gradient(dom, x ** 2)[:, 0]
    assert np.allclose(g[1:-1], 2 * x[1:-1], atol=1e-12)


def test_gradient_second_order():
    err = []
    for n in (100, 200):
        dom = build_grid(1, [0, 1], n)
        x = dom.centers[:, 0]
        g = gradient(dom, np.sin(2 * np.pi * x))[1:-1, 0]
        err.append(np.abs(g - 2 * np.pi * np.cos(2 * np.pi * x[1:-1])).max())
    assert 3.8 < err[0] / err[1] < 4.2


def test_gradient_isolated_cell():
    mask = np.zeros((5, 5), bool)
    mask[2, 2] = True
    dom = build_grid(2, [0, 1], 5, mask=mask)
    with pytest.raises(StencilError):
        gradient(dom, np.zeros(1))


def test_cutoff_interval_profile():
    dom = build_grid(1, [0, 1], 200)
    x = dom.centers[:, 0]
    # radii off the center lattice so no center sits on a ramp end
    r, g = 0.2512, 0.1512
    B = ball(EUC, [0.5025], r, dom)
    c = build_cutoff(EUC, dom, B, g, Q=identity_form(dom), mu=lebesgue(dom), s=math.inf)
    t = np.abs(x - 0.5025)
    assert np.all(c.phi[t < g] == 1)
    assert np.all(c.phi[~B.cells] == 0)
    ramp = (t > g) & (t < r)
    assert np.allclose(c.phi[ramp], (r - t[ramp]) / (r - g))
    assert c.certificate["ok"] and c.certificate["norm"] == pytest.approx(1 / (r - g))
    with pytest.raises(PreconditionError):
        build_cutoff(EUC, dom, B, 0.3)


def test_cutoff_grushin_certificate_quadrature():
    dom = build_grid(2, [0, 1], 60)
    Q, mu = grushin_form(dom), lebesgue(dom)
    B = ball(EUC, [0.5, 0.5], 0.3, dom)
    c = build_cutoff(EUC, dom, B, 0.1, Q=Q, mu=mu, s=4)
    diff = dom.centers - dom.centers[B.center]
    r = np.linalg.norm(diff, axis=1)
    ramp = (r > 0.1) & (r < 0.3)
    grad = np.zeros_like(diff)
    grad[ramp] = -diff[ramp] / r[ramp, None] / 0.2
    q = grad[:, 0] ** 2 + dom.centers[:, 0] ** 2 * grad[:, 1] ** 2
    brute = np.sum(q ** 2 * dom.cell_volume) ** 0.25
    assert c.certificate["norm"] == pytest.approx(brute, rel=1e-12)


def _cut(dom, x, r, inner):
    return build_cutoff(EUC, dom, ball(EUC, [x], r, dom), inner)


def test_partition_examples():
    dom = build_grid(1, [0, 1], 200)
    x = dom.centers[:, 0]
    c1, c2 = _cut(dom, 0.3025, 0.2012, 0.1012), _cut(dom, 0.4525, 0.2012, 0.1012)
    fam = partition_of_unity(np.abs(x - 0.3025) < 0.1, [c1])
    assert np.array_equal(fam.psis[0], c1.phi)
    K = (x > 0.25) & (x < 0.5)
    fam = partition_of_unity(K, [c1, c2])
    # exact up to floating round-off
    assert np.allclose(fam.total(), fam.product_form(), rtol=0, atol=1e-14)
    assert np.allclose(fam.product_form(), 1 - (1 - c1.phi) * (1 - c2.phi), rtol=0, atol=0)
    assert np.all(fam.total()[c1.inner | c2.inner] == 1)
    with pytest.raises(CoverageError):
        partition_of_unity(x > 0.1, [c1, c2])


def test_partition_gradients_match_stencil():
    dom = build_grid(1, [0, 1], 2000)
    x = dom.centers[:, 0]
    cuts = [_cut(dom, 0.3, 0.2, 0.1), _cut(dom, 0.5, 0.2, 0.1)]
    fam = partition_of_unity((x > 0.25) & (x < 0.55), cuts)
    for j in range(fam.J):
        num = gradient(dom, fam.psis[j])[:, 0]
        # away from ramp kinks the product-rule gradient agrees with the stencil
        smooth = np.ones_like(x, bool)
        for c in cuts:
            r = np.abs(x - dom.centers[c.ball.center, 0])
            for k in (c.gamma, c.ball.radius):
                smooth &= np.abs(r - k) > 2e-3
        assert np.allclose(fam.grads[j][smooth, 0], num[smooth], atol=1e-6)


def test_local_to_global_examples():
    assert local_to_global_sobolev([1.0], [0.0], [5.0])[0] == 1.0
    one = local_to_global_sobolev([2.0], [0.5], [3.0])[0]
    assert local_to_global_sobolev([2.0, 2.0], [0.5, 0.5], [3.0, 3.0])[0] == 2 * one
    with pytest.raises(AssemblyError) as exc:
        local_to_global_sobolev([1.0, math.inf], [0, 0], [1, 1])
    assert exc.value.witness["ball"] == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_sqrtQ_squared_is_quadratic_value(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(SQ.n_active, 2, 2))
    Q = QuadraticFormField(SQ, A @ np.swapaxes(A, 1, 2))
    g = rng.normal(size=(SQ.n_active, 2))
    direct = np.einsum("mi,mij,mj->m", g, Q.Q, g)
    assert np.allclose(sqrtQ_magnitude(Q, g) ** 2, direct, rtol=1e-10, atol=1e-300)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.15, 0.85), st.floats(0.05, 0.2)), min_size=1, max_size=5))
def test_cutoff_family_invariants(spec):
    dom = SQ
    cuts = [build_cutoff(EUC, dom, ball(EUC, [c, 0.5], r, dom), r / 2) for c, r in spec]
    K = np.zeros(dom.n_active, bool)
    for c in cuts:
        K |= c.inner
    fam = partition_of_unity(K, cuts)
    assert np.all((fam.psis >= 0) & (fam.psis <= 1))
    for j, c in enumerate(cuts):
        assert np.all(fam.psis[j][~c.ball.cells] == 0)
    assert np.all(fam.total() <= 1 + 1e-12)
    assert np.allclose(fam.total()[K], 1, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 0.7), st.floats(0.15, 0.3))
def test_product_rule_bound(c, r):
    dom = build_grid(1, [0, 1], 400)
    x = dom.centers[:, 0]
    Q = identity_form(dom)
    cut = build_cutoff(EUC, dom, ball(EUC, [c], r, dom), r / 2)
    f_pair = bump(dom, [0.5], 0.45)
    prod = cut.phi * f_pair.f
    lhs = sqrtQ_magnitude(Q, gradient(dom, prod))
    rhs = cut.phi * sqrtQ_magnitude(Q, f_pair.g) + np.abs(f_pair.f) * sqrtQ_magnitude(Q, cut.grad)
    # off the ramp kinks the stencil error is O(h); the bump's f'' jumps at its edge
    h = dom.spacing[0]
    t = np.abs(x - dom.centers[cut.ball.center, 0])
    smooth = (np.abs(t - r / 2) > 2 * h) & (np.abs(t - r) > 2 * h) & (t > 2 * h)
    assert np.all(lhs[smooth] <= rhs[smooth] + 2 * h)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=3, max_size=3), st.lists(st.floats(0, 5), min_size=3, max_size=3),
       st.lists(st.floats(0, 5), min_size=3, max_size=3), st.integers(0, 2), st.floats(0, 2))
def test_assembly_monotone(C, C1, nrm, j, bump_by):
    base = local_to_global_sobolev(C, C1, nrm)[0]
    for arr in (C, C1, nrm):
        up = list(arr)
        up[j] += bump_by
        args = [up if a is arr else a for a in (C, C1, nrm)]
        assert local_to_global_sobolev(*args)[0] >= base
