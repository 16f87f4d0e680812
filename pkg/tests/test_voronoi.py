from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from symsq import voronoi
from symsq.errors import ArgumentError, PrecisionError
from symsq.qexp import delta_eigenform, sym_square

mpmath.mp.dps = 20


@pytest.fixture(scope="module")
def F():
    return sym_square(delta_eigenform(46_000), 1, 45_000)


def _g_ref(k, eta, s):
    G = mpmath.gamma
    if eta == 0:
        return (G((s + 2) / 2) * G((s + k) / 2) * G((s + k + 1) / 2)
                / (G((1 - s) / 2) * G((k - 1 - s) / 2) * G((k - s) / 2)))
    return (G((s + 1) / 2) * G((s + k + 1) / 2) * G((s + k) / 2)
            / (G(-s / 2) * G((k - s) / 2) * G((k - 1 - s) / 2)))


def _psi_ref(k, w, x, eta):
    # (1/pi) int_0^inf Re[(pi^3 x)^{-it} G_eta(it) psi~(-it)] dt with the Gaussian integral for psi~
    c, a = mpmath.mpf(w.center), mpmath.mpf(w.alpha)

    def mel(s):
        return mpmath.sqrt(mpmath.pi / a) * mpmath.exp(s * c + s * s / (4 * a))

    def f(t):
        u = 1j * t
        return (mpmath.power(math.pi ** 3 * x, -u) * _g_ref(k, eta, u) * mel(-u)).real

    return float(mpmath.quad(f, mpmath.linspace(0, 120, 25)) / mpmath.pi)


def test_bump_support_and_derivatives():
    w = voronoi.DyadicWeight(10.0)
    y = np.linspace(9, 21, 1201)
    v = w(y)
    assert np.all(v[(y <= 10) | (y >= 20)] == 0)
    assert w(15.0) == pytest.approx(1.0)
    h = 1e-5
    for j in (1, 2, 3):
        yy = np.linspace(10.5, 19.5, 13)
        num = (w.derivative(j - 1, yy + h) - w.derivative(j - 1, yy - h)) / (2 * h)
        assert np.allclose(w.derivative(j, yy), num, rtol=1e-6, atol=1e-8)


def test_derivative_constants_scale_invariant():
    a = voronoi.DyadicWeight(10.0).derivative_constants(4)
    b = voronoi.DyadicWeight(1000.0).derivative_constants(4)
    assert a == b and a[0] == pytest.approx(1.0)
    # c_1 by brute force on the physical variable
    w = voronoi.DyadicWeight(7.0)
    y = np.linspace(7, 14, 200_001)[1:-1]
    assert np.max(np.abs(y * np.gradient(w(y), y))) == pytest.approx(a[1], rel=1e-4)


def test_mellin_log_gaussian_exact():
    w = voronoi.LogGaussianWeight(10.0)
    psi = voronoi.TestFunction(w)
    s = np.array([0.0, 0.5 + 3j, -1 + 20j, 2 - 7j])
    assert np.allclose(voronoi.mellin(psi, s), w.mellin_exact(s), rtol=1e-12, atol=0)


def test_mellin_line_matches_pointwise():
    psi = voronoi.TestFunction(voronoi.LogGaussianWeight(20.0), theta=3.0)
    # the v-step shrinks with the total height; at T = 256 the first nodes are alias-free
    vals = voronoi.mellin_line(psi, -0.5, 0.1, 2560)[:200]
    t = 0.1 * np.arange(200)
    ref = voronoi.mellin(psi, 0.5 - 1j * t)     # the line returns psi~(-sigma - i t)
    assert np.allclose(vals, ref, rtol=0, atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("x", [0.05, 1.0, 20.0])
def test_psi_against_mpmath(x):
    w = voronoi.LogGaussianWeight(10.0)
    P = voronoi.PsiTransform(12, voronoi.TestFunction(w))
    for eta in (0, 1):
        got = float(P.psi_eta(np.array([x]), eta)[0])
        ref = _psi_ref(12, w, x, eta)
        assert got == pytest.approx(ref, abs=1e-11 * max(1.0, abs(ref)))


def test_psi_pm_conjugate():
    P = voronoi.PsiTransform(12, voronoi.TestFunction(voronoi.LogGaussianWeight(10.0)))
    x = np.geomspace(1e-3, 1e3, 9)
    assert np.allclose(P(x, 1), np.conj(P(x, -1)))
    with pytest.raises(ArgumentError):
        P(x, 0)


def test_sym_square_pairs(F):
    m = np.arange(1, 200)
    for n1 in (1, 4, 6, 9):
        assert np.allclose(voronoi.sym_square_pairs(F, m, n1), [F(int(a), n1) for a in m])
    with pytest.raises(PrecisionError):
        voronoi.sym_square_pairs(F, np.array([10 ** 6]), 1)


@pytest.mark.parametrize("c,a,X", [(1, 1, 10.0), (2, 1, 25.0), (6, 5, 10.0), (7, 3, 50.0)])
def test_voronoi_identity(F, c, a, X):
    psi = voronoi.TestFunction(voronoi.LogGaussianWeight(X))
    r = voronoi.voronoi_check(F, a, c, voronoi.PsiTransform(12, psi), 1e-10)
    assert r.rel_err < 1e-10


def test_voronoi_identity_with_bessel_factor(F):
    psi = voronoi.TestFunction(voronoi.LogGaussianWeight(30.0), theta=2.5)
    r = voronoi.voronoi_check(F, 2, 5, voronoi.PsiTransform(12, psi), 1e-10)
    assert r.rel_err < 1e-10


def test_voronoi_rejects_non_coprime(F):
    P = voronoi.PsiTransform(12, voronoi.TestFunction(voronoi.LogGaussianWeight(10.0)))
    with pytest.raises(ArgumentError):
        voronoi.voronoi_check(F, 2, 4, P)


def test_kloosterman_residues():
    from symsq import arith
    r = voronoi.kloosterman_residues(2, 9, 1)
    assert np.allclose(r, [arith.kloosterman(2, n, 9) for n in range(9)])


def test_dual_mass_moves_with_X(F):
    # the dual sum concentrates at n2 ~ c^3 / X: the mass point falls as X grows
    points = []
    for X in (10.0, 40.0, 160.0):
        psi = voronoi.TestFunction(voronoi.LogGaussianWeight(X))
        r = voronoi.voronoi_check(F, 1, 5, voronoi.PsiTransform(12, psi), 1e-10)
        points.append(voronoi.dual_mass_point(r, 0.9))
    assert points[0] > points[1] > points[2]


def test_wilton_envelope(F):
    golden = (1 + math.sqrt(5)) / 2
    rep = voronoi.wilton_envelope(F, [0.0, golden, 1 / 3], [64.0, 1024.0, 16384.0])
    assert len(rep.rows) == 9
    # the twisted sums stay below X^{3/4} k^{1/2} by a fixed constant
    assert rep.max_ratio < 1
    with pytest.raises(PrecisionError):
        voronoi.wilton_envelope(F, [0.0], [1e6])
