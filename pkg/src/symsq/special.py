"""Bessel J of integer order, the Whittaker factors W_{nu,+-}, log-Gamma and
the gamma quotient G_eta that appears in the GL(3) Voronoi kernel.

Bessel regimes, for order nu and argument x:

* power series for x <= series_limit(nu),
* Gauss-Laguerre quadrature of the Whittaker integral for x >= whittaker_limit(nu),
* Miller backward recurrence in between (only reached when nu is large).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_genlaguerre

from .errors import DomainError, EvaluationError, PoleError, SingularityError

LAGUERRE_NODES = 64
SERIES_TERM_CAP = 400
SERIES_STOP = 1e-18

# Bernoulli numbers B_2 .. B_24 for the Stirling series
_BERNOULLI = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6,
              -3617 / 510, 43867 / 798, -174611 / 330, 854513 / 138, -236364091 / 2730]
STIRLING_TERMS = 10
STIRLING_RADIUS = 15.0
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


# ------------------------------------------------------------------ log Gamma

def _is_pole(s: np.ndarray) -> np.ndarray:
    return (s.imag == 0) & (s.real <= 0) & (s.real == np.round(s.real))


def log_gamma(s):
    """Principal branch of log Gamma(s) for complex s (scalar or array)."""
    arr = np.asarray(s, dtype=complex)
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr).copy()
    if _is_pole(z).any():
        raise PoleError(f"log_gamma has a pole at {z[_is_pole(z)][0].real:g}")
    # shift up until |z| >= radius in the right half plane; principal logs of the
    # shifted factors reproduce the principal branch off the negative axis
    shift = np.where(np.abs(z) < STIRLING_RADIUS,
                     np.ceil(np.maximum(STIRLING_RADIUS - z.real, 0.0)), 0.0)
    shift = np.where(z.real < 0, np.maximum(shift, np.ceil(-z.real) + STIRLING_RADIUS), shift)
    correction = np.zeros_like(z)
    n_max = int(shift.max()) if len(shift) else 0
    w = z.copy()
    for j in range(n_max):
        active = shift > j
        correction[active] += np.log(w[active])
        w[active] += 1.0
    out = (w - 0.5) * np.log(w) - w + _HALF_LOG_2PI
    inv = 1.0 / w
    inv2 = inv * inv
    term = inv
    for k in range(1, STIRLING_TERMS + 1):
        out += _BERNOULLI[k - 1] / (2 * k * (2 * k - 1)) * term
        term = term * inv2
    out -= correction
    return out[0] if scalar else out


def gamma(s):
    return np.exp(log_gamma(s))


# ------------------------------------------------------------------- Bessel J

def series_limit(nu: int) -> float:
    """Largest x where the alternating Taylor series stays well conditioned."""
    return max(8.0, 0.5 * nu)


def whittaker_limit(nu: int) -> float:
    return max(8.0, float(nu))


def bessel_j_series(nu: int, x) -> np.ndarray:
    """Taylor series sum_j (-1)^j (x/2)^(2j+nu) / (j! (j+nu)!), vectorized."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    half = 0.5 * x
    log_lead = nu * np.log(np.where(half > 0, half, 1.0)) - math.lgamma(nu + 1)
    if (log_lead > 700).any():
        raise EvaluationError(f"series leading term overflows for nu={nu}, x={x.max():g}")
    lead = np.where(half > 0, np.exp(log_lead), 0.0 if nu > 0 else 1.0)
    total = np.ones_like(x)
    term = np.ones_like(x)
    q = -half * half
    active = np.arange(len(x))
    for j in range(1, SERIES_TERM_CAP + 1):
        term[active] *= q[active] / (j * (j + nu))
        total[active] += term[active]
        done = np.abs(term[active]) <= SERIES_STOP * np.abs(total[active])
        if done.all():
            break
        active = active[~done]
    else:
        raise EvaluationError(f"Bessel series did not converge in {SERIES_TERM_CAP} terms")
    return lead * total


@lru_cache(maxsize=128)
def _laguerre_rule(nu: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_genlaguerre(LAGUERRE_NODES, nu - 0.5)
    weights = weights / math.gamma(nu + 0.5)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def whittaker_w(nu: int, sign: int, x):
    """W_{nu,sign}(x) for x >= 1 by 64-node generalized Gauss-Laguerre quadrature."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    xs = np.atleast_1d(arr)
    if (xs < 1).any():
        raise DomainError("Whittaker factor is only bounded for x >= 1; for small x use the "
                          "Bessel power series (W grows like x^(1/2 - nu) near zero)")
    nodes, weights = _laguerre_rule(nu)
    ratio = nodes[None, :] / (2.0 * xs[:, None])
    integrand = np.exp((nu - 0.5) * np.log1p(sign * 1j * ratio))
    val = integrand @ weights * np.exp(-sign * 0.5j * (nu + 0.5) * math.pi)
    return val[0] if scalar else val


def bessel_j_whittaker(nu: int, x) -> np.ndarray:
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    w = whittaker_w(nu, 1, xs)
    return 2.0 * (np.exp(1j * xs) * w).real / np.sqrt(2 * math.pi * xs)


def bessel_j_miller(nu: int, x) -> np.ndarray:
    """Backward recurrence normalized by J_0 + 2 sum J_2k = 1."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    top = int(max(nu, xs.max()) + 40 + 10 * math.sqrt(max(nu, xs.max())))
    top += top % 2
    j_next = np.zeros_like(xs)
    j_cur = np.full_like(xs, 1e-300)
    norm = np.zeros_like(xs)
    result = np.zeros_like(xs)
    for n in range(top, 0, -1):
        j_prev = (2.0 * n / xs) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > 1e250
        if big.any():
            j_cur[big] *= 1e-250
            j_next[big] *= 1e-250
            norm[big] *= 1e-250
            result[big] *= 1e-250
        if n - 1 == nu:
            result = j_cur.copy()
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm += 2.0 * j_cur
    norm += j_cur
    if nu == 0:
        result = j_cur
    return result / norm


def bessel_j(nu: int, x):
    """J_nu(x) for integer nu >= 0 and x >= 0 (scalar or array)."""
    if nu < 0 or int(nu) != nu:
        raise DomainError("order must be a non-negative integer")
    nu = int(nu)
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    xs = np.atleast_1d(arr)
    if (xs < 0).any():
        raise DomainError("argument must be non-negative")
    out = np.empty_like(xs)
    lo, hi = series_limit(nu), whittaker_limit(nu)
    s_mask = xs <= lo
    w_mask = xs >= hi
    m_mask = ~(s_mask | w_mask)
    if s_mask.any():
        out[s_mask] = bessel_j_series(nu, xs[s_mask])
    if w_mask.any():
        out[w_mask] = bessel_j_whittaker(nu, xs[w_mask])
    if m_mask.any():
        out[m_mask] = bessel_j_miller(nu, xs[m_mask])
    if not np.isfinite(out).all():
        raise EvaluationError(f"non-finite Bessel value for nu={nu}")
    return float(out[0]) if scalar else out


def bessel_small_bound(nu: int, x):
    """|J_nu(x)| <= (x/2)^nu / nu! for real x (from the alternating series)."""
    return (np.asarray(x, dtype=float) / 2.0) ** nu / math.factorial(nu)


@dataclass(frozen=True)
class BesselEvaluator:
    order: int

    @property
    def switch_point(self) -> float:
        return series_limit(self.order)

    def __call__(self, x):
        return bessel_j(self.order, x)


@dataclass(frozen=True)
class WhittakerFactor:
    order: int
    sign: int

    def __call__(self, x):
        return whittaker_w(self.order, self.sign, x)


# ---------------------------------------------------------------- G_eta(s)

def _g_eta_arguments(k: int, eta: int, s: np.ndarray) -> tuple[list, list]:
    num = [(1 + s + 1 - eta) / 2, (1 + s + (k - 1) + eta) / 2, (1 + s + k - eta) / 2]
    den = [(-s + 1 - eta) / 2, (-s + (k - 1) + eta) / 2, (-s + k - eta) / 2]
    return num, den


def log_g_eta(k: int, eta: int, s):
    """log G_eta(s); -inf real part where a denominator Gamma has a pole."""
    if eta not in (0, 1):
        raise DomainError("eta must be 0 or 1")
    arr = np.asarray(s, dtype=complex)
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr)
    num, den = _g_eta_arguments(k, eta, z)
    for i, a in enumerate(num):
        if _is_pole(a).any():
            raise SingularityError(f"numerator Gamma factor {i} has a pole", factor_index=i)
    out = sum(log_gamma(a) for a in num)
    zero = np.zeros(len(z), dtype=bool)
    for a in den:
        pole = _is_pole(a)
        zero |= pole
        safe = np.where(pole, 1.0, a)
        out = out - log_gamma(safe)
    out = np.where(zero, -np.inf + 0j, out)
    return out[0] if scalar else out


def g_eta(k: int, eta: int, s):
    """G_eta(s) = prod Gamma(numerator args) / prod Gamma(denominator args)."""
    val = np.exp(log_g_eta(k, eta, s))
    return val


@dataclass(frozen=True)
class GammaQuotient:
    k: int
    eta: int

    def __call__(self, s):
        return g_eta(self.k, self.eta, s)

    def envelope_ratio(self, s):
        s = np.asarray(s, dtype=complex)
        t = s.imag
        sigma = s.real
        return np.abs(self(s)) / ((np.abs(t) + 1) * (t * t + self.k ** 2)) ** (sigma + 0.5)
