"""Analytic data of L(s, Sym^2 f x g): gamma factors, root number, the AFE
weight V(y), L(1, Sym^2 f) and the central value by the approximate
functional equation.

The Dirichlet series used is

    L(s, Sym^2 f x g) = L^{(N)}(2s, Sym^2 f) sum_{(d,N)=1} mu(d) d^{-3s} sum_n A_F(1,n) lambda_g(dn) n^{-s},

with the level primes removed from the Sym^2 factor. The variant
L(2s, Sym^2 f) L_N(3s, g)^{-1} in place of L^{(N)}(2s, Sym^2 f) does not match
the Euler factor at p | N and breaks the functional equation; it is kept as
``level_layer="as-written"`` for comparison only.

V is evaluated through the Dirichlet expansion of that prefactor inside its
Mellin integral,

    V(y) = sum_{(m,N)=1} A_F(1, m) / m * W(y m^2),

where W is the inverse Mellin transform of the damped gamma ratio alone,
computed by the trapezoidal rule on a vertical line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import arith
from .errors import (ArgumentError, ContourError, ConvergenceError, DomainError,
                     PrecisionError)
from .qexp import Eigenform, SymSquareCoefficients, sym_square
from .special import log_gamma

GAMMA_KINDS = ("hecke-deg2", "sym2-deg3", "rankin-deg6")
DEFAULT_DAMPING = 256
W_CUTOFF_EPS = 1e-17


# ------------------------------------------------------------ gamma factors

def log_gamma_factor(kind: str, s, k: int, kappa: int = 1):
    s = np.asarray(s, dtype=complex)
    if kind == "hecke-deg2":
        return (-s * math.log(math.pi) + log_gamma(s / 2 + (k - 1) / 4)
                + log_gamma(s / 2 + (k + 1) / 4))
    if kind == "sym2-deg3":
        return (-1.5 * s * math.log(math.pi) + log_gamma((s + 1) / 2)
                + log_gamma((s + k - 1) / 2) + log_gamma((s + k) / 2))
    if kind == "rankin-deg6":
        shifts = rankin_gamma_shifts(k, kappa)
        return -3 * s * math.log(2 * math.pi) + sum(log_gamma(s + a) for a in shifts)
    raise ArgumentError(f"unknown gamma factor kind {kind!r}; expected one of {GAMMA_KINDS}")


def rankin_gamma_shifts(k: int, kappa: int) -> tuple[float, float, float]:
    return (kappa - 0.5, k + kappa - 1.5, abs(k - kappa - 0.5))


def gamma_factor(kind: str, s, k: int, kappa: int = 1):
    """gamma(s) for the degree-2, symmetric-square or Rankin-Selberg L-function."""
    return np.exp(log_gamma_factor(kind, s, k, kappa))


@dataclass(frozen=True)
class GammaFactor:
    kind: str
    k: int
    kappa: int = 1

    def __call__(self, s):
        return gamma_factor(self.kind, s, self.k, self.kappa)


def root_number(k: int, kappa: int, N: int, lambda_g_N: float) -> float:
    """Root number of Sym^2 f x g for g of squarefree level N."""
    if N < 1 or not arith.is_squarefree(N):
        raise ArgumentError("level must be squarefree")
    sign = (-1) ** (kappa + 1) if k > kappa else (-1) ** kappa
    return sign * arith.mobius(N) * lambda_g_N * math.sqrt(N)


@dataclass(frozen=True)
class RootNumber:
    k: int
    kappa: int
    N: int
    lambda_g_N: float

    @property
    def value(self) -> float:
        return root_number(self.k, self.kappa, self.N, self.lambda_g_N)


# ------------------------------------------------------------ L(1, Sym^2 f)

def sym2_dirichlet_coefficients(f: Eigenform, n_max: int) -> np.ndarray:
    """Coefficients of zeta^{(N)}(2s) sum lambda_f(n^2) n^{-s}, index 0..n_max."""
    lam_sq = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        lam_sq[n] = f.lambda_(n * n) if n * n >= f.precision else f.lam[n * n]
    out = np.zeros(n_max + 1)
    for ell in range(1, math.isqrt(n_max) + 1):
        if math.gcd(ell, f.level) != 1:
            continue
        step = ell * ell
        out[step::step] += lam_sq[1: n_max // step + 1]
    return out


def _sym2_row_fast(f: Eigenform, n_max: int) -> np.ndarray:
    if f.level == 1:
        return sym_square(f, 1, n_max).row.copy()
    return sym2_dirichlet_coefficients(f, n_max)


def special_value_L1_sym2(f: Eigenform, tol: float = 1e-10, X0: float = 64.0,
                          kernel: str = "gaussian", doublings: int = 6) -> float:
    """L(1, Sym^2 f) from a smoothed Dirichlet series, cutoff doubled until stable.

    The Gaussian kernel exp(-(n/X)^2) has Mellin poles at w = -2j, where the
    trivial zeros of L(1 + w, Sym^2 f) sit, so the smoothing bias decays
    faster than any power of X; ``kernel="exponential"`` is the plain
    exp(-n/X) variant (bias of order 1/X). This is a heuristic tail: no bound
    is proven.
    """
    if kernel not in ("gaussian", "exponential"):
        raise ArgumentError("kernel must be 'gaussian' or 'exponential'")
    reach = 6.5 if kernel == "gaussian" else 40.0
    previous = None
    X = X0
    for _ in range(doublings + 1):
        n_max = int(reach * X) + 1
        try:
            c = _sym2_row_fast(f, n_max)
        except PrecisionError as exc:
            raise PrecisionError(f"L(1, Sym^2) at cutoff X={X:g} needs lambda_f up to "
                                 f"{exc.required}", exc.required) from exc
        n = np.arange(1, n_max + 1, dtype=float)
        w = np.exp(-(n / X) ** 2) if kernel == "gaussian" else np.exp(-n / X)
        value = float(np.sum(c[1:] * w / n))
        if previous is not None and abs(value - previous) < tol:
            return value
        previous = value
        X *= 2
    raise ConvergenceError(f"L(1, Sym^2 f) not stable to {tol:g} after {doublings} doublings")


def finite_euler_inverse(g: Eigenform, s: float) -> float:
    """L_N(s, g)^{-1} = prod_{p | N} (1 - lambda_g(p) p^{-s})."""
    out = 1.0
    for p in arith.factorize(g.level) if g.level > 1 else ():
        out *= 1.0 - g.lambda_(p) * p ** (-s)
    return out


def sym2_local_inverse(f: Eigenform, N: int, s: float) -> float:
    """prod_{p | N} L_p(s, Sym^2 f)^{-1} for f unramified at every p | N."""
    out = 1.0
    for p in arith.factorize(N) if N > 1 else ():
        t = f.lambda_(p) ** 2 - 1.0
        x = p ** (-s)
        out *= 1.0 - t * x + t * x * x - x ** 3
    return out


# ----------------------------------------------------------------- V weight

@dataclass(frozen=True)
class ContourSpec:
    abscissa: float
    step: float
    height: float
    tail_bound: float


@dataclass(eq=False)
class VWeight:
    """The AFE weight V(y) for Sym^2 f x g with damping order A."""

    f: Eigenform
    g: Eigenform
    A: int = DEFAULT_DAMPING
    step: float = 0.05
    right_abscissa: float = 0.5
    saddle_abscissas: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    height_cap: float = 400.0
    level_layer: str = "primitive"
    _node_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.f.level != 1:
            raise ArgumentError("f must have level one")
        if self.g.weight % 2:
            raise ArgumentError("g must have even weight")
        if self.A < 1:
            raise ArgumentError("damping order must be a positive integer")
        if self.level_layer not in ("primitive", "as-written"):
            raise ArgumentError("level_layer must be 'primitive' or 'as-written'")

    @property
    def k(self) -> int:
        return self.f.weight

    @property
    def kappa(self) -> int:
        return self.g.weight // 2

    @property
    def level(self) -> int:
        return self.g.level

    @cached_property
    def left_abscissa(self) -> float:
        # nearest left pole of the gamma ratio is at u = -kappa; stay at distance >= 1
        return -min(1.0, self.kappa / 2.0)

    def log_integrand(self, u):
        """log of G(u) gamma(1/2 + u) / gamma(1/2), without the 1/u."""
        u = np.asarray(u, dtype=complex)
        damp = -24 * self.A * np.log(np.cos(np.pi * u / (4 * self.A)))
        ratio = (log_gamma_factor("rankin-deg6", 0.5 + u, self.k, self.kappa)
                 - log_gamma_factor("rankin-deg6", 0.5, self.k, self.kappa).real)
        return damp + ratio

    def contour(self, sigma: float, step: float | None = None,
                two_sided: bool = False) -> tuple[np.ndarray, np.ndarray, ContourSpec]:
        """Trapezoid nodes t_j and weights F(sigma + i t_j) h / pi for W.

        One-sided nodes t >= 0 use F(conj u) = conj F(u) and W = Re(sum);
        two-sided nodes cover [-T, T] with weights h / (2 pi) and no symmetry.
        """
        h = self.step if step is None else step
        key = (sigma, h, two_sided)
        hit = self._node_cache.get(key)
        if hit is not None:
            return hit
        t = np.arange(0.0, self.height_cap, h)
        u = sigma + 1j * t
        F = np.exp(self.log_integrand(u)) / u
        mag = np.abs(F)
        keep = np.nonzero(mag > W_CUTOFF_EPS * mag.max())[0]
        last = int(keep[-1]) + 1
        if last >= len(t) - 1:
            raise ContourError(f"integrand not decayed by height {self.height_cap}; raise height_cap")
        r = mag[last] / max(mag[last - 1], 1e-300)
        tail = mag[last] * h / max(1 - r, 1e-3) / math.pi
        spec = ContourSpec(sigma, h, float(t[last]), float(tail))
        if two_sided:
            tt = np.concatenate([-t[last:0:-1], t[: last + 1]])
            uu = sigma + 1j * tt
            weights = np.exp(self.log_integrand(uu)) / uu * h / (2 * math.pi)
            out = (tt, weights, spec)
        else:
            weights = F[: last + 1] * h / math.pi
            weights[0] *= 0.5
            out = (t[: last + 1], weights, spec)
        self._node_cache[key] = out
        return out

    @cached_property
    def _log_real_integrand(self) -> np.ndarray:
        sig = np.asarray(self.saddle_abscissas)
        return self.log_integrand(sig).real - np.log(sig)

    def saddle_choice(self, z: np.ndarray) -> np.ndarray:
        """Index of the abscissa minimizing |F(sigma)| z^{-sigma}, near the saddle."""
        sig = np.asarray(self.saddle_abscissas)
        cost = self._log_real_integrand[None, :] - np.outer(np.log(z), sig)
        return np.argmin(cost, axis=1)

    def w_transform(self, z, sigma: float | None = None, two_sided: bool = False) -> np.ndarray:
        """W(z) = (1/2 pi i) int G(u) gamma(1/2+u)/gamma(1/2) z^{-u} du/u, z > 0.

        Real output by default; ``two_sided=True`` returns the complex quadrature
        value, whose imaginary part measures the failure of conjugate symmetry.
        """
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if (z <= 0).any():
            raise DomainError("W is defined for positive arguments")
        out = np.empty(z.shape, dtype=complex if two_sided else float)
        if sigma is None:
            small = z < 1.0
            groups = [(self.left_abscissa, small)]
            choice = self.saddle_choice(z)
            for j, sig in enumerate(self.saddle_abscissas):
                groups.append((sig, ~small & (choice == j)))
        else:
            groups = [(sigma, np.ones(len(z), dtype=bool))]
        for sig, mask in groups:
            if not mask.any():
                continue
            t, wts, _ = self.contour(sig, two_sided=two_sided)
            logz = np.log(z[mask])
            acc = np.zeros(mask.sum(), dtype=out.dtype)
            chunk = max(1, 2_000_000 // len(t))
            for lo in range(0, len(logz), chunk):
                lz = logz[lo:lo + chunk]
                val = np.exp(-1j * np.outer(lz, t)) @ wts
                acc[lo:lo + chunk] = (val if two_sided else val.real) * np.exp(-sig * lz)
            if sig < 0:
                acc += 1.0  # residue at u = 0
            out[mask] = acc
        return out

    def z_cut(self, eps: float = W_CUTOFF_EPS) -> float:
        """Beyond z_cut, |W(z)| < eps (geometric search; W is monotone there)."""
        key = ("zcut", eps)
        if key not in self._node_cache:
            z = 1.0
            while abs(self.w_transform(np.array([z]))[0]) > eps:
                z *= 1.25
                if z > 1e9:
                    raise ContourError("W does not decay; check the damping order")
            self._node_cache[key] = z
        return self._node_cache[key]

    def level_divisor_terms(self) -> list[tuple[int, float]]:
        """(e, c_e) with W(y m^2 e^3) weighted by c_e; only e = 1 for the primitive layer."""
        if self.level_layer == "primitive":
            return [(1, 1.0)]
        out = []
        for e in arith.divisors(self.level):
            mu = arith.mobius(e)
            if mu:
                out.append((e, mu * self.g.lambda_(e) * e ** -1.5))
        return out

    def __call__(self, y, sigma: float | None = None, F: SymSquareCoefficients | None = None,
                 eps: float = W_CUTOFF_EPS, two_sided: bool = False) -> np.ndarray:
        """V at an array of positive y; m-terms with W(y m^2 e^3) < eps are dropped."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if (y <= 0).any():
            raise DomainError("V is defined for y > 0")
        zc = self.z_cut(eps)
        m_max = int(math.sqrt(zc / y.min())) + 1
        if F is None or len(F.row) <= m_max:
            F = sym_square(self.f, 1, m_max)
        rows, zs, coef = [], [], []
        for e, c_e in self.level_divisor_terms():
            for i, yi in enumerate(y):
                top = int(math.sqrt(zc / (yi * e ** 3))) + 1
                m = np.arange(1, top + 1)
                rows.append(np.full(top, i))
                zs.append(yi * e ** 3 * m * m)
                a = F.row[1: top + 1] / m
                if self.level_layer == "primitive" and self.level > 1:
                    a = np.where(np.gcd(m, self.level) == 1, a, 0.0)
                coef.append(c_e * a)
        rows = np.concatenate(rows)
        zs = np.concatenate(zs)
        coef = np.concatenate(coef)
        vals = self.w_transform(zs, sigma, two_sided)
        re = np.bincount(rows, weights=coef * vals.real, minlength=len(y))
        if not two_sided:
            return re
        return re + 1j * np.bincount(rows, weights=coef * vals.imag, minlength=len(y))

    def small_y_limit(self, tol: float = 1e-12) -> float:
        """Residue at u = 0: L^{(N)}(1, Sym^2 f), or L(1, Sym^2 f) L_N(3/2, g)^{-1} as written."""
        base = special_value_L1_sym2(self.f, tol)
        if self.level_layer == "as-written":
            return base * finite_euler_inverse(self.g, 1.5)
        return base * sym2_local_inverse(self.f, self.level, 1.0)


def v_weight(V: VWeight, y: float, tol: float = 1e-8, sigma: float | None = None) -> float:
    """V(y); raises ContourError when the quadrature tail exceeds tol."""
    spec = V.contour(V.right_abscissa if sigma is None else sigma)[2]
    if spec.tail_bound > tol:
        raise ContourError(f"contour tail {spec.tail_bound:.2e} exceeds tol {tol:.2e}; raise the height")
    return float(V(np.array([y]), sigma)[0])


# ------------------------------------------------------------- central value

@dataclass
class CentralValueReport:
    k: int
    kappa: int
    P: int
    Y: float
    value: float
    epsilon: float
    truncation_n: int
    tail_bound: float
    first_sum: float = 0.0
    dual_sum: float = 0.0
    imag_residue: float = 0.0

    @property
    def scale(self) -> float:
        """Size of the individual AFE sums; the yardstick when the value cancels to 0."""
        return max(abs(self.first_sum), abs(self.dual_sum))

    def as_dict(self) -> dict:
        return {"k": self.k, "kappa": self.kappa, "P": self.P, "Y": self.Y, "value": self.value,
                "epsilon": self.epsilon, "truncation_n": self.truncation_n,
                "tail_bound": self.tail_bound}


def afe_ranges(V: VWeight, Y: float, eps: float) -> tuple[int, int]:
    """Largest n with |V| >= eps in the first and the dual AFE sum (d = 1)."""
    scale = V.level ** 1.5
    zc = V.z_cut(eps)
    return int(zc * Y * scale) + 1, int(zc * scale / Y) + 1


def required_precision(f: Eigenform, g: Eigenform, Y: float, tol: float = 1e-10) -> int:
    """Coefficient range both forms need for central_value at this Y."""
    V = VWeight(f, g)
    return max(afe_ranges(V, Y, tol * 1e-3)) + 2


def squarefree_coprime(limit: int, N: int) -> list[int]:
    return [d for d in range(1, limit + 1) if math.gcd(d, N) == 1 and arith.mobius(d) != 0]


def central_value_report(f: Eigenform, g: Eigenform, Y: float = 1.0, tol: float = 1e-10,
                         V: VWeight | None = None, two_sided: bool = True) -> CentralValueReport:
    """L(1/2, Sym^2 f x g) by the approximate functional equation."""
    if f.level != 1:
        raise ArgumentError("f must have level one")
    if not arith.is_prime(g.level):
        raise ArgumentError("g must have prime level")
    if Y <= 0:
        raise ArgumentError("Y must be positive")
    V = V or VWeight(f, g)
    N = g.level
    sign = root_number(f.weight, g.weight // 2, N, g.lambda_(N))
    eps = tol * 1e-3
    n1, n2 = afe_ranges(V, Y, eps)
    n_top = max(n1, n2)
    for form in (f, g):
        if form.precision <= n_top + 1:
            raise PrecisionError(f"{form.name or 'form'} of level {form.level} needs coefficients "
                                 f"up to {n_top + 1} (has {form.precision - 1})", n_top + 2)
    m_top = int(math.sqrt(V.z_cut(eps) * max(Y, 1 / Y) * N ** 1.5)) + 2
    F = sym_square(f, 1, max(n_top, m_top))
    sums = [0j, 0j]
    d_list = squarefree_coprime(int(n_top ** (1 / 3)) + 1, N)
    for d in d_list:
        mu = arith.mobius(d)
        for j, (scale_y, top) in enumerate(((1.0 / (Y * N ** 1.5), n1), (Y / N ** 1.5, n2))):
            nmax = top // d ** 3
            if nmax < 1:
                continue
            n = np.arange(1, nmax + 1)
            lam_g = g.lam[d * n]
            coef = mu * d ** -1.5 * F.row[1: nmax + 1] * lam_g / np.sqrt(n)
            v = V(d ** 3 * n * scale_y, F=F, eps=eps, two_sided=two_sided)
            sums[j] += complex(np.sum(coef * v))
    spec = V.contour(V.right_abscissa)[2]
    # discarded terms have |V| < eps and decay super-exponentially beyond the cut
    tail = (eps + spec.tail_bound) * sum(d ** -1.5 for d in d_list) * 2 * math.sqrt(n_top)
    total = sums[0] + sign * sums[1]
    return CentralValueReport(f.weight, g.weight // 2, N, Y, total.real, sign, n_top, tail,
                              sums[0].real, sums[1].real, abs(total.imag))


def central_value(f: Eigenform, g: Eigenform, Y: float = 1.0, tol: float = 1e-10) -> float:
    return central_value_report(f, g, Y, tol).value
