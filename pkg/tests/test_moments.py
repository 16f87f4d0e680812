from __future__ import annotations

import math

import numpy as np
import pytest

from symsq import arith, lfunc, moments, petersson
from symsq.errors import ArgumentError, PrecisionError, UnsupportedError
from symsq.qexp import Eigenform, delta_eigenform, sym_square


@pytest.fixture(scope="module")
def engine(delta, g5):
    return moments.moment_engine(delta, g5, 1e-8)


@pytest.fixture(scope="module")
def omega(g5):
    return petersson.omega_newform(g5, check=False)


@pytest.mark.parametrize("L", [2, 3, 7])
def test_amplifier_identity(g5, L):
    amp = moments.Amplifier.build(g5, L)
    assert amp.primes == [p for p in arith.primes_up_to(2 * L) if p >= L and p != 5]
    assert abs(amp.value(g5) - len(amp.primes)) < 1e-10


def test_amplifier_expansion_by_hand(g5):
    # P = {2, 3}: alpha_2 = lambda(2), alpha_3 = lambda(3), alpha_4 = alpha_9 = -1
    amp = moments.Amplifier.build(g5, 2)
    assert amp.primes == [2, 3]
    l2, l3 = g5.lambda_(2), g5.lambda_(3)
    alpha = {2: l2, 3: l3, 4: -1.0, 9: -1.0}
    assert amp.alpha == pytest.approx(alpha)
    hand: dict[int, float] = {}
    for a, x in alpha.items():
        for b, y in alpha.items():
            for e in arith.divisors(math.gcd(a, b)):
                key = a * b // (e * e)
                hand[key] = hand.get(key, 0.0) + x * y
    got = amp.expansion()
    assert set(got) == {k for k, v in hand.items() if v != 0} | (set(got) - set(hand))
    for k, v in hand.items():
        assert got.get(k, 0.0) == pytest.approx(v, abs=1e-14)


def test_amplified_average_spectral_model(delta, g5):
    # with F(l) = lambda_g0(l) the Hecke relations collapse the average to A_g0^2 = |P|^2
    for L in (2, 3):
        amp = moments.Amplifier.build(g5, L)
        value = moments.amplified_average(delta, g5, L, moment=g5.lambda_)
        assert value == pytest.approx(len(amp.primes) ** 2, abs=1e-10)


def test_amplified_average_rejects_level_twists(delta, g5):
    with pytest.raises(ArgumentError):
        moments.MomentConfig(delta, g5, 5)


def test_config_validation(delta, g5):
    with pytest.raises(ArgumentError):
        moments.MomentConfig(g5, g5, 1)
    with pytest.raises(ArgumentError):
        moments.MomentConfig(delta, g5, 17, L=1)
    with pytest.raises(ArgumentError):
        moments.MomentConfig(delta, g5, 1, Y=0)
    cfg = moments.MomentConfig(delta, g5, 1)
    assert cfg.P == 5 and cfg.kappa == 2
    assert cfg.Q == pytest.approx(12 ** 4 * 125)


@pytest.mark.parametrize("ell", [1, 2, 6])
def test_trace_route_spectral_split(delta, g5, engine, omega, ell):
    # one newform: S_1 = lambda(l) / omega * (first AFE sum), S_2 = eps lambda(l) / omega * (dual sum)
    rep = engine.trace(ell, 1.0)
    cv = lfunc.central_value_report(delta, g5, 1.0)
    assert rep.S1 == pytest.approx(g5.lambda_(ell) / omega * cv.first_sum, rel=1e-8)
    assert rep.S2 == pytest.approx(cv.epsilon * g5.lambda_(ell) / omega * cv.dual_sum, rel=1e-8)
    assert abs(rep.F) < 1e-8 * abs(rep.S1)


def test_trace_y_invariance(engine):
    vals = [engine.trace(1, Y) for Y in (0.5, 1.0, 2.0)]
    for r in vals:
        assert abs(r.F) < 1e-8 * abs(r.S1)
    assert vals[0].S1 == pytest.approx(-vals[2].S2, rel=1e-8)


def test_diagonal_by_hand(delta, g5, engine):
    F = sym_square(delta, 1, 100)
    V = engine.V
    for ell in (1, 4, 6, 12):
        hand = 0.0
        for d in arith.divisors(ell):
            if arith.mobius(d) == 0:
                continue
            y = ell * d * d / 5 ** 1.5
            hand += arith.mobius(d) * F.row[ell // d] / math.sqrt(ell * d * d) * float(np.real(V(np.array([y]), F=F))[0])
        assert moments.diagonal_term(moments.MomentConfig(delta, g5, ell, L=2), engine) == pytest.approx(hand, rel=1e-12)


def test_direct_route_needs_a_single_newform(delta):
    g8 = Eigenform(8, 5, (0, 1, 0, 0))     # S_8(Gamma_0(5)) has dimension 3
    with pytest.raises(UnsupportedError):
        moments._require_enumerable(g8)
    g16 = Eigenform(16, 5, (0, 1, 0, 0))   # S_16(1) contributes oldforms
    with pytest.raises(UnsupportedError):
        moments._require_enumerable(g16)


def test_moment_report_json(delta, g5, engine):
    rep = moments.moment_report(moments.MomentConfig(delta, g5, 1), cross_check=True, engine=engine)
    d = rep.as_dict()
    assert d["rel_gap"] == rep.rel_gap and rep.rel_gap < 1e-8


def test_offdiagonal_validation(delta, g5):
    with pytest.raises(ArgumentError):
        moments.offdiagonal_identity_check(delta, g5, 3, 10.0, 1, 1, 1, family=1)   # P does not divide c
    with pytest.raises(ArgumentError):
        moments.offdiagonal_identity_check(delta, g5, 5, 10.0, 1, 1, 1, family=2)   # (c, P) > 1
    with pytest.raises(ArgumentError):
        moments.offdiagonal_identity_check(delta, g5, 5, 10.0, 2, 2, 1)             # d not squarefree
    with pytest.raises(PrecisionError):
        moments.offdiagonal_identity_check(delta_eigenform(500), g5, 5, 10.0, 1, 1, 1)


@pytest.mark.parametrize("family,c,X,d1,d2,ell", [
    (1, 5, 10.0, 1, 1, 2),
    (2, 3, 10.0, 1, 1, 3),
    (2, 3, 40.0, 2, 1, 1),
    (1, 5, 80.0, 1, 2, 1),
    (2, 4, 270.0, 1, 3, 1),
])
def test_offdiagonal_identity_branches(delta, g5, family, c, X, d1, d2, ell):
    r = moments.offdiagonal_identity_check(delta, g5, c, X, d1, d2, ell, family=family)
    assert r.rel_err_strict < 1e-7
