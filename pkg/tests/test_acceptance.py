from __future__ import annotations

import math
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from symsq import arith, cli, exponents as ex, lfunc, moments, petersson
from symsq.qexp import verify_hecke
from symsq.special import bessel_j


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, seconds: float, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({seconds:.1f} s) {detail}")
    return emit


def test_criterion_1_exponents(report):
    t0 = time.perf_counter()
    thm = ex.theorem_terms().terms[1]
    Yo, Lo = ex.optimal_Y(), ex.optimal_L()
    amp = ex.amplified_terms().terms[1]
    got = [thm["L"], thm["k"], -thm["P"], Yo["L"], Yo["k"], -Yo["P"], amp["L"],
           -Lo["k"], Lo["P"], ex.final_bound()["P"], ex.corollary_range().lo,
           ex.amplified_window().hi, ex.corollary_range().hi, ex.delta_width()]
    want = [F(22, 7), F(13, 7), F(4, 7), F(12, 7), F(2, 7), F(5, 14), F(36, 7),
            F(13, 29), F(4, 29), F(25, 29), F(13, 64), F(4, 13), F(3, 8), F(11, 128)]
    sketch = ex.sketch_first_regime()[0] == ex.k ** 4 * ex.P ** F(-3, 2)
    for kappa in (2, 3, 4, 8, 20):
        kap = F(kappa)
        sketch &= ex.sketch_second_regime(kappa)[0] == ex.Monomial.of(
            k=(4 - 4 * kap) / (2 * kap + 1), P=(2 * kap - 5) / (4 * kap + 2))
    dt = time.perf_counter() - t0
    ok = got == want and sketch and dt < 1
    report(1, ok, dt, f"{sum(a == b for a, b in zip(got, want))}/14 exponents, sketch Y {sketch}")
    assert ok


def test_criterion_2_petersson(report):
    t0 = time.perf_counter()
    f = cli._level_one(12, 64)
    omega = petersson.omega_from_L1(12, 1, lfunc.special_value_L1_sym2(cli._level_one(12, 20_000), 1e-12))
    pairs = [(m, n) for m in range(1, 21) for n in range(m, 21)]
    res = petersson.PeterssonEngine(1, petersson.certified_c_max(12, 1, 20, 20, 1e-10)).run([12], pairs)[12]
    spec = np.array([f.lambda_(m) * f.lambda_(n) / omega for m, n in pairs])
    gap12 = float(np.abs(res.values - spec).max())

    # one run shares the Kloosterman sums across the four weights
    small = [(m, n) for m in range(1, 11) for n in range(m, 11)]
    zero = petersson.PeterssonEngine(1, 40_000).run([4, 6, 8, 10], small)
    zero_gap = {kw: float(np.abs(r.values).max()) for kw, r in zero.items()}

    c = np.arange(1, 40_001)
    S = arith.KloostermanBatch(c).matrix([(1, 1)])[:, 0]
    j3 = float(np.sum(S * bessel_j(3, 4 * math.pi / c) / c))
    j3_gap = abs(j3 + 1 / (2 * math.pi))
    dt = time.perf_counter() - t0
    ok = gap12 < 1e-8 and max(zero_gap.values()) < 1e-9 and j3_gap < 1e-9 and dt < 60
    report(2, ok, dt, f"level-one gap {gap12:.2e}, zero spaces "
                      + ", ".join(f"k={kw} {v:.1e}" for kw, v in zero_gap.items())
                      + f", J_3 sum gap {j3_gap:.1e}")
    assert ok


def test_criterion_3_voronoi(report):
    t0 = time.perf_counter()
    rows = [cli._voronoi_one((c, a, X, 30.0, 12, None, 1e-10, None))
            for X in (10.0, 100.0) for c, a in ((2, 1), (3, 1), (3, 2), (4, 1), (5, 2))]
    worst = max(r["rel_err"] for r in rows)
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and dt < 300
    report(3, ok, dt, f"10 cases, max rel_err {worst:.1e} (log-Gaussian weight)")
    assert ok


def test_criterion_4_afe(report, delta, g5):
    t0 = time.perf_counter()
    reps = [lfunc.central_value_report(delta, g5, Y) for Y in (0.25, 0.5, 1.0, 2.0, 4.0)]
    values = np.array([r.value for r in reps])
    scale = min(r.scale for r in reps)
    spread = float(values.max() - values.min()) / scale
    imag = max(r.imag_residue for r in reps)
    dt = time.perf_counter() - t0
    ok = spread < 1e-6 and imag < 1e-10 and dt < 300
    report(4, ok, dt, f"spread {spread:.1e} of the AFE sums (value {values.mean():.1e}, "
                      f"root number {reps[0].epsilon:+.0f}), imag {imag:.1e}")
    assert ok


def test_criterion_5_routes(report, delta, g5):
    t0 = time.perf_counter()
    engine = moments.moment_engine(delta, g5, 1e-8)
    gaps = {}
    for ell in (1, 2, 3, 4, 6):
        rep = moments.moment_report(moments.MomentConfig(delta, g5, ell), cross_check=True, engine=engine)
        gaps[ell] = rep.rel_gap
    dt = time.perf_counter() - t0
    worst = max(gaps.values())
    ok = worst < 1e-4 and dt < 600
    report(5, ok, dt, f"max rel_gap {worst:.1e} over l in {{1,2,3,4,6}}")
    assert ok


def test_criterion_6_properties(report, delta, g5, g5_small):
    t0 = time.perf_counter()
    checks = {}
    checks["hecke"] = verify_hecke(delta.a[:22_501], 12, 1) is None and verify_hecke(g5.a[:20_001], 4, 5) is None
    n = np.arange(1, 10_001)
    tau = np.array([arith.divisor_count(int(x)) for x in n], dtype=float)
    checks["deligne"] = all(np.all(np.abs(fm.lambda_array(10_000)[1:]) <= tau * (1 + 1e-12)) for fm in (delta, g5))
    batch = arith.KloostermanBatch(range(1, 10_001))
    pairs = [(1, 1), (2, 3), (5, 5)]
    S = batch.matrix(pairs)
    checks["weil"] = all(np.all(np.abs(S[:, j]) <= np.array([arith.weil_bound(m, nn, int(c)) for c in batch.moduli])
                                * (1 + 1e-9)) for j, (m, nn) in enumerate(pairs))
    rng = random.Random(7)
    worst = 0.0
    for _ in range(200):
        while True:
            c1, c2 = rng.randint(2, 300), rng.randint(2, 300)
            if math.gcd(c1, c2) == 1:
                break
        m, nn = rng.randint(-5000, 5000), rng.randint(-5000, 5000)
        c2b, c1b = pow(c2, -1, c1), pow(c1, -1, c2)
        lhs = arith.kloosterman(m, nn, c1 * c2)
        rhs = arith.kloosterman_direct(m * c2b, nn * c2b, c1) * arith.kloosterman_direct(m * c1b, nn * c1b, c2)
        worst = max(worst, abs(lhs - rhs))
    checks["crt"] = worst < 1e-9
    checks["amplifier"] = all(abs(moments.Amplifier.build(g5, L).value(g5)
                                  - len(moments.Amplifier.build(g5, L).primes)) < 1e-10 for L in (2, 3, 5, 7, 11))
    V = lfunc.VWeight(delta, g5_small, level_layer="as-written")
    target = lfunc.special_value_L1_sym2(delta) * (1 - g5_small.lambda_(5) * 5 ** -1.5)
    checks["V limit"] = abs(lfunc.v_weight(V, 1e-7) - target) < 1e-4 * abs(target)
    checks["audit"] = all(v.verdict for Lm, Ym, r in ex.length_branches() for v in ex.assumption_audit(Lm, Ym, r))
    dt = time.perf_counter() - t0
    ok = all(checks.values())
    report(6, ok, dt, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


def test_criterion_7_offdiagonal(report, delta, g5):
    t0 = time.perf_counter()
    errs = {}
    for family, c, X in ((1, 5, 10.0), (1, 10, 40.0), (2, 3, 10.0), (2, 7, 10.0)):
        r = moments.offdiagonal_identity_check(delta, g5, c, X, 1, 1, 1, family=family)
        errs[(family, c)] = r.rel_err_strict
    dt = time.perf_counter() - t0
    ok = max(errs.values()) < 1e-6
    report(7, ok, dt, ", ".join(f"T{fam} c={c} {e:.1e}" for (fam, c), e in errs.items()))
    assert ok
