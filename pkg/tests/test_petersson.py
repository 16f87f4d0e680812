from __future__ import annotations

import cmath
import math
import warnings

import mpmath
import numpy as np
import pytest

from symsq import lfunc, petersson
from symsq.errors import (ArgumentError, IntegrityWarning, PreconditionError, TruncationError,
                          UnsupportedError)
from symsq.qexp import delta_eigenform, eta_quotient, reference_newform


def brute_kloosterman(m, n, c):
    return sum(cmath.exp(2j * math.pi * (m * x + n * pow(x, -1, c)) / c)
               for x in range(1, c + 1) if math.gcd(x, c) == 1).real if c > 1 else 1.0


def brute_geometric(k, N, m, n, c_top):
    s = sum(brute_kloosterman(m, n, c) / c * float(mpmath.besselj(k - 1, 4 * math.pi * math.sqrt(m * n) / c))
            for c in range(N, c_top + 1, N))
    return (1.0 if m == n else 0.0) + 2 * math.pi * (-1) ** (k // 2) * s


@pytest.mark.parametrize("k,N,m,n", [(12, 1, 2, 3), (12, 1, 5, 5), (16, 1, 1, 4), (12, 2, 1, 3), (8, 2, 3, 5)])
def test_engine_against_brute(k, N, m, n):
    res = petersson.PeterssonEngine(N, 120).run([k], [(m, n)])[k]
    assert float(res.values[0]) == pytest.approx(brute_geometric(k, N, m, n, res.c_max), abs=1e-12)


def test_dimension_table():
    level_one = [petersson.cusp_dimension(k, 1) for k in range(4, 28, 2)]
    assert level_one == [0, 0, 0, 0, 1, 0, 1, 1, 1, 1, 2, 1]
    assert [petersson.cusp_dimension(k, 5) for k in (4, 6, 8)] == [1, 1, 3]
    assert petersson.cusp_dimension(12, 2) == 2
    assert petersson.cusp_dimension(8, 2) == 1
    assert petersson.cusp_dimension(4, 11) == 2
    with pytest.raises(ArgumentError):
        petersson.cusp_dimension(4, 4)


def test_spectral_level_one():
    f = delta_eigenform(64)
    L1 = lfunc.special_value_L1_sym2(delta_eigenform(20_000), 1e-12)
    omega = petersson.omega_from_L1(12, 1, L1)
    pairs = [(1, 1), (2, 3), (4, 4), (6, 9), (10, 7)]
    res = petersson.PeterssonEngine(1, petersson.certified_c_max(12, 1, 10, 10, 1e-11)).run([12], pairs)[12]
    for (m, n), v in zip(pairs, res.values):
        assert v == pytest.approx(f.lambda_(m) * f.lambda_(n) / omega, abs=1e-9)


def test_certified_truncation():
    p = petersson.PeterssonParams.choose(12, 1, 20, 20, 1e-10)
    assert p.certified and p.tail_bound <= 1e-10
    assert petersson.petersson_tail_bound(12, 1, 20, 20, p.c_max - 1) > 1e-10 or p.c_max == 1
    with pytest.raises(TruncationError):
        petersson.PeterssonParams.choose(4, 1, 1, 1, 1e-10)
    unc = petersson.PeterssonParams.choose(4, 1, 1, 1, 1e-10, certify=False)
    assert not unc.certified and unc.c_max == petersson.DEFAULT_C_CAP


def test_weight_two_unsupported():
    with pytest.raises(UnsupportedError):
        petersson.PeterssonParams.choose(2, 11, 1, 1, 1e-6)


def _lambda_delta(n, lam2, lam3):
    # lambda_Delta on {2, 3}-smooth n from lambda(2), lambda(3) by the prime-power recursion
    def power(lp, e):
        a, b = 1.0, lp
        for _ in range(e):
            a, b = b, lp * b - a
        return a
    e2 = e3 = 0
    while n % 2 == 0:
        n //= 2
        e2 += 1
    while n % 3 == 0:
        n //= 3
        e3 += 1
    return power(lam2, e2) * power(lam3, e3) * (1.0 if n == 1 else math.nan)


def test_oldforms_removed():
    # S_12(Gamma_0(2)) is spanned by Delta(z), Delta(2z): no newforms, so Delta* = 0.
    # The computed truncation plus the level-one tail completed spectrally must vanish.
    f = delta_eigenform(10)
    omega = 1.0 / brute_geometric(12, 1, 1, 1, 60)
    lam2, lam3 = f.lambda_(2), f.lambda_(3)
    sieve = petersson.NewformSieve(12, 2, 1e-11, max_depth=4)
    for m, n in ((1, 1), (3, 1), (1, 3)):
        with pytest.warns(IntegrityWarning):
            r = sieve.evaluate_many([petersson.DeltaStarRequest(m, n, 12, 2)])[0]
        assert r.depth == 4 and abs(r.value) <= r.tail_estimate
        kept = {(t.R, t.a, t.b) for t, _ in r.terms}
        completion = sum(t.coefficient * _lambda_delta(t.a, lam2, lam3) * _lambda_delta(t.b, lam2, lam3) / omega
                         for t in petersson.sieve_terms(petersson.DeltaStarRequest(m, n, 12, 2), 60)
                         if t.R == 1 and (t.R, t.a, t.b) not in kept)
        assert abs(r.value + completion) < 1e-9


def test_zero_level_one_space_needs_no_depth():
    sieve = petersson.NewformSieve(4, 5, 1e-9)
    assert sieve.depth(petersson.DeltaStarRequest(1, 1, 4, 5)) == (0, 0.0)


def _newform_check(h, pairs, tol):
    omega = petersson.omega_from_L1(h.weight, h.level, lfunc.special_value_L1_sym2(h, 1e-11))
    sieve = petersson.NewformSieve(h.weight, h.level, 1e-10)
    for m, n in pairs:
        assert sieve(m, n) == pytest.approx(h.lambda_(m) * h.lambda_(n) / omega, abs=tol)


def test_single_newform_level_two():
    h = eta_quotient([(1, 8), (2, 8)], 8, 2, 20_000)
    _newform_check(h, [(1, 1), (3, 1), (1, 2), (3, 4), (5, 5), (7, 9)], 1e-8)


def test_single_newform_level_five():
    g = reference_newform(20_000)
    # weight 4: c-sums stop at the cap, not certified
    _newform_check(g, [(1, 1), (2, 1), (1, 5), (3, 4)], 1e-7)


def test_omega_newform():
    g = reference_newform(20_000)
    assert petersson.omega_newform(g, check=False) == pytest.approx(0.8640086076224076, rel=1e-8)


def test_zero_space_weight_six():
    res = petersson.PeterssonEngine(1, 20_000).run([6], [(1, 1), (2, 3), (5, 5)])[6]
    assert np.abs(res.values).max() < 1e-9


def test_sieve_requests_validated():
    with pytest.raises(PreconditionError):
        petersson.DeltaStarRequest(5, 1, 4, 5)


def test_original_form_warns_outside_hypothesis():
    assert petersson.original_form_applies(5, 5)
    assert not petersson.original_form_applies(25, 5)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        petersson.NewformSieve(8, 2, 1e-9)(1, 4, original=True)
    assert any(issubclass(w.category, IntegrityWarning) for w in caught)


def test_original_form_agrees_inside_hypothesis():
    for m, n in ((1, 1), (3, 2), (1, 6)):
        a = petersson.delta_star(8, 2, m, n, 1e-10)
        b = petersson.delta_star_original(8, 2, m, n, 1e-10)
        assert a == pytest.approx(b, abs=1e-9)
