import math
from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings, strategies as st

from sobocomp.errors import ExponentRangeError
from sobocomp.exponents import (
    INF,
    as_exponent,
    classical_sobolev_N,
    cutoff_conjugates,
    holder_conjugate,
    interpolation_lambda,
    john_N,
    reciprocal,
    sjohn_admissible,
    unweighted_sjohn_N,
)


def test_as_exponent_forms():
    assert as_exponent(0.5) == Fr(1, 2)
    assert as_exponent("3/2") == Fr(3, 2)
    assert as_exponent("inf") is INF and as_exponent(math.inf) is INF
    assert reciprocal(INF) == 0


def test_holder_conjugate():
    assert holder_conjugate(2) == 2
    assert holder_conjugate(INF) == 1
    assert holder_conjugate(3) == Fr(3, 2)
    assert holder_conjugate(1) == INF
    with pytest.raises(ExponentRangeError):
        holder_conjugate(Fr(1, 2))


def test_classical_and_john():
    assert classical_sobolev_N(3, 2) == 6
    assert classical_sobolev_N(2, 1) == 2
    with pytest.raises(ExponentRangeError):
        classical_sobolev_N(2, 2)
    assert john_N(3, 2) == 6
    assert john_N(4, 2) == 4
    with pytest.raises(ExponentRangeError):
        john_N(2, 2)


def test_interpolation_lambda():
    assert interpolation_lambda(2, 6) == Fr(2, 5)
    assert interpolation_lambda(3, INF) == Fr(1, 3)
    assert interpolation_lambda(1, 4) == 1
    with pytest.raises(ExponentRangeError):
        interpolation_lambda(6, 6)


def test_cutoff_conjugates():
    assert cutoff_conjugates(INF, 2, 2) == (INF, 1)
    assert cutoff_conjugates(4, 2, 2) == (2, 2)
    with pytest.raises(ExponentRangeError):
        cutoff_conjugates(3, 2, 2)


def test_sjohn_examples():
    v = sjohn_admissible(2, 2, 1, 0, 2, "i")
    assert v.holds and v.inv_q_threshold == Fr(1, 6) and v.q_upper == 6
    for n, p, s in [(2, 2, 2), (3, 2, Fr(3, 2)), (3, 3, 1)]:
        assert not sjohn_admissible(n, p, 0, 0, s, "ii").holds
        assert sjohn_admissible(n, p, 0, 0, s, "ii").binding_constraint == "a=0"


def test_unweighted_sjohn():
    assert unweighted_sjohn_N(3, 2, 1) == 6
    assert unweighted_sjohn_N(2, 1, 1) == 2
    assert unweighted_sjohn_N(3, 2, 2) == 2  # boundary 1 + p/(n-1)
    with pytest.raises(ExponentRangeError):
        unweighted_sjohn_N(3, 2, 3)


rats = st.fractions(min_value=1, max_value=20, max_denominator=12)


@settings(max_examples=200)
@given(rats)
def test_conjugate_involution(p):
    assert holder_conjugate(holder_conjugate(p)) == p


@settings(max_examples=200)
@given(rats, rats, rats)
def test_lambda_monotone(q1, q2, N):
    q1, q2 = sorted((q1, q2))
    if not (q1 < q2 < N):
        return
    assert interpolation_lambda(q1, N) > interpolation_lambda(q2, N)
    assert interpolation_lambda(q2, N) < interpolation_lambda(q2, N + 1)
    assert 0 < interpolation_lambda(q2, N) <= 1


@settings(max_examples=300)
@given(st.integers(2, 5), st.fractions(1, 6, max_denominator=6), st.fractions(1, 6, max_denominator=6))
def test_reduction_a_b_zero(n, p, s):
    v = sjohn_admissible(n, p, 0, 0, s, "i")
    expect = s < 1 + p / (n - 1)
    assert (v.binding_constraint != "n+a>s(n-1+b)-p+1") == expect
    if p < n:
        # below the Sobolev exponent the q-range above p is never empty
        assert v.holds == expect


@settings(max_examples=300)
@given(st.integers(1, 4), st.fractions(1, 5, max_denominator=4), st.fractions(0, 3, max_denominator=4),
       st.fractions(0, 3, max_denominator=4), st.fractions(1, 3, max_denominator=4))
def test_witness_N_lies_in_range(n, p, a, b, s):
    v = sjohn_admissible(n, p, a, b, s, "i")
    if not v.holds:
        return
    inv = reciprocal(v.witness_N)
    assert max(v.inv_q_threshold, 0) <= inv < 1 / p
    assert v.witness_N > p


@settings(max_examples=200)
@given(rats, st.fractions(min_value=Fr(11, 10), max_value=10, max_denominator=10), rats)
def test_cutoff_tprime_below_sigma(p, sigma, extra):
    s = p * holder_conjugate(sigma) + extra - 1
    t, tp = cutoff_conjugates(s, p, sigma)
    assert 1 <= tp <= sigma and t == s / p
