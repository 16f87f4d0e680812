from __future__ import annotations

import json
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from symsq import exponents as ex
from symsq.exponents import ELL, L, ONE, Interval, Monomial, P, Y, k


def test_monomial_algebra():
    m = Monomial.of(k=2, P=F(-1, 3))
    assert (m * m ** -1) == ONE
    assert m.substitute("k", P ** 3) == P ** F(17, 3)
    assert str(Monomial.of(k=1, P=F(1, 2))) == "k P^1/2"
    with pytest.raises(ex.ArgumentError):
        Monomial.of(z=1)


def test_equate_terms_solves():
    Ys = ex.equate_terms(Y * k, P / Y, "Y")
    assert Ys == (P / k) ** F(1, 2)
    with pytest.raises(ex.NoSolutionError):
        ex.equate_terms(Y * k, Y * P, "Y")


def test_interval_logic():
    a = Interval(F(0), F(1), True, False)
    b = Interval(F(1, 2), None, False, False)
    c = a.intersect(b)
    assert (c.lo, c.hi, c.lo_closed, c.hi_closed) == (F(1, 2), F(1), False, False)
    assert a.contains(c) and not c.contains(a)
    assert Interval(F(1), F(1)).empty
    assert ex.linear_region(F(2), F(-1), strict=True) == Interval(None, F(1, 2), False, False)


def test_theorem_exponents():
    thm = ex.theorem_terms().terms
    assert thm[0] == ELL ** F(-1, 2)
    t = thm[1]
    assert (t["L"], t["k"], t["P"]) == (F(22, 7), F(13, 7), F(-4, 7))


def test_optimal_Y():
    assert ex.optimal_Y() == Monomial.of(k=F(2, 7), P=F(-5, 14), L=F(12, 7))


def test_amplified_chain():
    assert ex.amplified_terms().terms[1] == L ** F(36, 7) * k ** F(13, 7) * P ** F(-4, 7)
    assert ex.optimal_L() == Monomial.of(k=F(-13, 29), P=F(4, 29))
    assert ex.final_bound() == Monomial.of(k=F(13, 29), P=F(25, 29))


def test_final_bound_balances_both_terms():
    t = ex.individual_terms().substitute("L", ex.optimal_L()).terms
    assert len(t) == 1


def test_subconvex_window():
    r = ex.corollary_range()
    assert (r.lo, r.hi) == (F(13, 64), F(3, 8))
    assert ex.delta_width() == F(11, 128)
    assert ex.amplified_window().hi == F(4, 13)


def test_unamplified_bound():
    b = ex.unamplified_bound().terms
    assert set(b) == {P, k ** F(13, 7) * P ** F(3, 7)}


def test_sketch_first_regime():
    Ys, _ = ex.sketch_first_regime()
    assert Ys == k ** 4 * P ** F(-3, 2)


@pytest.mark.parametrize("kappa", [2, 3, 5, 10])
def test_sketch_second_regime_formula(kappa):
    Ys, _ = ex.sketch_second_regime(kappa)
    kap = F(kappa)
    assert Ys == Monomial.of(k=(4 - 4 * kap) / (2 * kap + 1), P=(2 * kap - 5) / (4 * kap + 2))
    assert Ys == ex.sketch_second_regime_closed_form(kappa)


@given(st.integers(2, 200))
def test_sketch_second_regime_any_kappa(kappa):
    assert ex.sketch_second_regime(kappa)[0] == ex.sketch_second_regime_closed_form(kappa)


@pytest.mark.parametrize("kappa", [2, 3, 7])
def test_sketch_ranges_abut(kappa):
    first = ex.sketch_first_regime_upper(kappa)
    _, second = ex.sketch_second_regime(kappa)
    assert first.lo == F(1, 4) and not first.lo_closed
    assert first.hi == second.lo
    assert second.hi == ex.sketch_upper_endpoint(kappa)


def test_assumption_audit_both_branches():
    branches = ex.length_branches()
    assert len(branches) == 2
    for Lm, Ym, rng in branches:
        verdicts = ex.assumption_audit(Lm, Ym, rng)
        assert len(verdicts) == 2
        assert all(v.verdict for v in verdicts)


def test_assumption_audit_detects_violation():
    # the L = 1 branch needs t <= 3/8
    Lm, Ym, _ = ex.length_branches()[1]
    wide = Interval(F(4, 13), F(1, 2), False, False)
    assert not all(v.verdict for v in ex.assumption_audit(Lm, Ym, wide))


def test_report_json():
    rep = json.loads(ex.exponent_report_json(2))
    assert rep["subconvex_interval"] == ["13/64", "3/8"]
    assert rep["delta_max"] == "11/128"
    assert rep["lindelof_on_average_up_to"] == "4/13"
    assert rep["sketch"]["Y_first"] == "k^4 P^-3/2"
    assert len(rep["assumptions"]) == 4 and all(a["verdict"] for a in rep["assumptions"])
