"""GL(3) Voronoi summation for A_F(1, n) twisted by e(n abar / c).

    sum_n A_F(1,n) e(n abar/c) psi(n)
        = c sum_{n1 | c} sum_{n2} A_F(n2, n1) / (n1 n2)
              [S(a, n2; c/n1) Psi_+(n2 n1^2 / c^3) + S(a, -n2; c/n1) Psi_-(n2 n1^2 / c^3)]

with Psi_eta(x) = (1/2 pi i) int_(sigma) (pi^3 x)^{-s} G_eta(s) psi~(-s) ds and
Psi_pm = (Psi_0 -+ i Psi_1) / (2 pi^{3/2}).

Two weight families. DyadicWeight is the compact C-infinity bump on [X, 2X];
its Mellin transform decays only like exp(-c sqrt|t|), so the dual sum it
produces is far too long for an identity check. LogGaussianWeight,
exp(-alpha log^2(y / (sqrt 2 X))), has a Gaussian Mellin transform and a dual
sum of length about c^3 alpha^{3/2} / X; it is the weight for identity checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import arith
from .errors import ArgumentError, ContourError, PrecisionError
from .qexp import SymSquareCoefficients
from .special import bessel_j, log_g_eta

SQRT2 = math.sqrt(2.0)


# ------------------------------------------------------------------ weights

class Weight(Protocol):
    X: float

    def __call__(self, y): ...

    def log_support(self) -> tuple[float, float]: ...


def _bump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def _bump_derivatives(u: np.ndarray, order: int) -> list[np.ndarray]:
    """b, b', ..., b^(order) for b = exp(g), g = 1 - 1/(1 - u^2), by Faa di Bruno recursion."""
    inside = np.abs(u) < 1
    uu = np.where(inside, u, 0.0)
    # g = 1 - (1/2) [1/(1-u) + 1/(1+u)]  =>  g^(i) = -(i!/2) [(1-u)^{-i-1} + (-1)^i (1+u)^{-i-1}]
    g = [None] + [-(math.factorial(i) / 2) * ((1 - uu) ** (-i - 1) + (-1) ** i * (1 + uu) ** (-i - 1))
                  for i in range(1, order + 1)]
    b = [np.where(inside, np.exp(1.0 - 1.0 / (1.0 - uu ** 2)), 0.0)]
    for j in range(1, order + 1):
        acc = np.zeros_like(uu)
        for i in range(j):
            acc = acc + math.comb(j - 1, i) * g[i + 1] * b[j - 1 - i]
        b.append(np.where(inside, acc, 0.0))
    return b


@dataclass(frozen=True)
class DyadicWeight:
    """w(y) = exp(1 - 1/(1 - u^2)), u = 2(y - X)/X - 1, supported on [X, 2X]."""

    X: float

    def __post_init__(self):
        if self.X <= 0:
            raise ArgumentError("X must be positive")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return _bump(2 * (y - self.X) / self.X - 1)

    def derivative(self, j: int, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        u = 2 * (y - self.X) / self.X - 1
        return (2 / self.X) ** j * _bump_derivatives(u, j)[j]

    def log_support(self) -> tuple[float, float]:
        return math.log(self.X), math.log(2 * self.X)

    def derivative_constants(self, order: int = 8, grid: int = 4001) -> list[float]:
        """c_j = max |y^j w^(j)(y)| on a fine grid; independent of X."""
        u = np.linspace(-1, 1, grid)[1:-1]
        ders = _bump_derivatives(u, order)
        return [float(np.max(np.abs((u + 3) ** j * ders[j]))) for j in range(order + 1)]


@dataclass(frozen=True)
class LogGaussianWeight:
    """w(y) = exp(-alpha log^2(y / X0)), X0 = sqrt(2) X, with closed-form Mellin transform."""

    X: float
    alpha: float = 30.0
    cutoff: float = 1e-17

    def __post_init__(self):
        if self.X <= 0 or self.alpha <= 0:
            raise ArgumentError("X and alpha must be positive")

    @property
    def center(self) -> float:
        return math.log(SQRT2 * self.X)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.exp(-self.alpha * (np.log(y) - self.center) ** 2)

    def log_support(self) -> tuple[float, float]:
        r = math.sqrt(math.log(1 / self.cutoff) / self.alpha)
        return self.center - r, self.center + r

    def mellin_exact(self, s):
        s = np.asarray(s, dtype=complex)
        return math.sqrt(math.pi / self.alpha) * np.exp(s * self.center + s * s / (4 * self.alpha))


@dataclass(frozen=True)
class TestFunction:
    """psi(y) = J_{2 kappa - 1}(theta sqrt y) w(y), or w(y) alone when theta is None."""

    weight: object
    theta: float | None = None
    kappa: int = 2

    def __post_init__(self):
        if self.theta is not None and self.theta <= 0:
            raise ArgumentError("theta must be positive")

    @property
    def X(self) -> float:
        return self.weight.X

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        w = self.weight(y)
        if self.theta is None:
            return w
        return bessel_j(2 * self.kappa - 1, self.theta * np.sqrt(np.atleast_1d(y))).reshape(y.shape) * w

    def log_support(self) -> tuple[float, float]:
        return self.weight.log_support()


# ------------------------------------------------------------------- Mellin

def mellin(psi, s, tol: float = 1e-12, max_nodes: int = 1 << 20):
    """psi~(s) = int psi(y) y^s dy/y by trapezoid in v = log y, nodes doubled until stable.

    The integrand is smooth and (numerically) vanishes to all orders at the
    ends of the log-support, so the trapezoid rule converges spectrally.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    lo, hi = psi.log_support()
    n = 256
    prev = None
    while n <= max_nodes:
        v = np.linspace(lo, hi, n + 1)
        vals = psi(np.exp(v))
        dv = (hi - lo) / n
        cur = np.exp(np.outer(s_arr, v)) @ vals * dv
        if prev is not None and np.all(np.abs(cur - prev) <= tol * np.maximum(np.abs(cur), 1e-300) + 1e-300):
            return cur[0] if np.ndim(s) == 0 else cur
        prev = cur
        n *= 2
    raise ContourError(f"Mellin quadrature did not reach tol {tol:g} with {max_nodes} nodes")


def mellin_line(psi, sigma: float, h: float, n_t: int, oversample: float = 2.0) -> np.ndarray:
    """psi~(-sigma - i t_j) for t_j = j h, j = 0..n_t-1, by one FFT.

    With a uniform v-grid of step delta and h * delta = 2 pi / M the sum
    sum_m b_m exp(-i j h v_m) is a length-M DFT.
    """
    lo, hi = psi.log_support()
    T = h * n_t
    delta_max = math.pi / (oversample * T)
    M = max(int(math.ceil(2 * math.pi / (h * delta_max))), 16)
    M = int(2 ** math.ceil(math.log2(M)))
    delta = 2 * math.pi / (h * M)
    count = int(math.floor((hi - lo) / delta)) + 1
    if count > M:
        raise ContourError("v-grid longer than the transform length; lower h")
    v = lo + delta * np.arange(count)
    b = np.zeros(M)
    b[:count] = psi(np.exp(v)) * np.exp(-sigma * v) * delta
    spec = np.fft.fft(b)[:n_t]
    return spec * np.exp(-1j * h * np.arange(n_t) * lo)


# ------------------------------------------------------------- Psi transform

@dataclass(eq=False)
class PsiTransform:
    """Psi_0, Psi_1 and Psi_pm for a test function, on the line Re s = sigma."""

    k: int
    psi: object
    sigma: float = 0.0
    h: float = 0.1
    eps: float = 1e-16
    t_probe: float = 20000.0
    _nodes: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.k % 2:
            raise ArgumentError("k must be even")
        if self.sigma <= -1:
            raise ArgumentError("sigma must exceed -1 (numerator Gamma poles)")

    def integrand_weights(self) -> tuple[np.ndarray, list[np.ndarray], float]:
        """Nodes t >= 0 and G_eta(s) psi~(-s) h/pi for eta = 0, 1; plus the tail estimate."""
        if self._nodes is not None:
            return self._nodes
        # first drop below eps * peak after the peak; beyond it the FFT roundoff
        # floor times the polynomial growth of G would take over
        T = min(256.0, self.t_probe)
        while True:
            n_probe = int(T / self.h)
            m_line = mellin_line(self.psi, self.sigma, self.h, n_probe)
            t = self.h * np.arange(n_probe)
            s = self.sigma + 1j * t
            weights = [np.exp(log_g_eta(self.k, eta, s)) * m_line for eta in (0, 1)]
            mag = np.maximum(np.abs(weights[0]), np.abs(weights[1]))
            top = int(np.argmax(mag))
            below = np.nonzero(mag[top:] < self.eps * mag[top])[0]
            if len(below):
                last = top + int(below[0])
                break
            if T >= self.t_probe:
                raise ContourError(f"Psi integrand not decayed by t = {self.t_probe:g}; raise t_probe")
            T = min(2 * T, self.t_probe)
        w = []
        for F in weights:
            ww = F[: last + 1] * self.h / math.pi
            ww[0] *= 0.5
            w.append(ww)
        tail = float(mag[top]) * self.eps * self.h * 50 / math.pi
        self._nodes = (t[: last + 1], w, float(tail))
        return self._nodes

    @property
    def height(self) -> float:
        return float(self.integrand_weights()[0][-1])

    def psi_eta(self, x, eta: int) -> np.ndarray:
        """Psi_eta(x) for x > 0 (real, since psi is real)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if (x <= 0).any():
            raise ArgumentError("x must be positive")
        t, w, _ = self.integrand_weights()
        L = np.log(math.pi ** 3 * x)
        out = np.empty(len(x))
        chunk = max(1, 4_000_000 // len(t))
        for i in range(0, len(x), chunk):
            lz = L[i:i + chunk]
            out[i:i + chunk] = (np.exp(-1j * np.outer(lz, t)) @ w[eta]).real * np.exp(-self.sigma * lz)
        return out

    def psi_pm(self, x) -> tuple[np.ndarray, np.ndarray]:
        p0 = self.psi_eta(x, 0)
        p1 = self.psi_eta(x, 1)
        scale = 2 * math.pi ** 1.5
        return (p0 - 1j * p1) / scale, (p0 + 1j * p1) / scale

    def __call__(self, x, sign: int):
        if sign not in (1, -1):
            raise ArgumentError("sign must be +1 or -1")
        plus, minus = self.psi_pm(x)
        return plus if sign == 1 else minus


def psi_transform(P: PsiTransform, x, sign: int, tol: float = 1e-10):
    _, _, tail = P.integrand_weights()
    if tail > tol:
        raise ContourError(f"Psi tail estimate {tail:.2e} exceeds tol {tol:.2e}")
    return P(x, sign)


# --------------------------------------------------------- Voronoi identity

def sym_square_pairs(F: SymSquareCoefficients, m: np.ndarray, n1: int) -> np.ndarray:
    """A_F(m, n1) for an array m, by sum_{d | (m, n1)} mu(d) A(m/d, 1) A(1, n1/d)."""
    m = np.asarray(m, dtype=np.int64)
    if m.max() >= len(F.row) or n1 >= len(F.row):
        raise PrecisionError(f"A_F(1, n) needed up to {max(int(m.max()), n1)}", int(max(m.max(), n1)) + 1)
    out = np.zeros(len(m))
    for d in arith.divisors(n1):
        mu = arith.mobius(d)
        if mu == 0:
            continue
        hit = m % d == 0
        out[hit] += mu * F.row[m[hit] // d] * F.row[n1 // d]
    return out


@dataclass
class VoronoiResult:
    c: int
    a: int
    X: float
    lhs: complex
    rhs: complex
    dual_lengths: dict[int, int]
    dual_terms: dict[int, np.ndarray] = field(repr=False, default_factory=dict)

    @property
    def rel_err(self) -> float:
        return abs(self.lhs - self.rhs) / (1 + abs(self.lhs))

    def as_row(self) -> dict:
        return {"c": self.c, "a": self.a, "X": self.X, "lhs_re": self.lhs.real, "lhs_im": self.lhs.imag,
                "rhs_re": self.rhs.real, "rhs_im": self.rhs.imag, "rel_err": self.rel_err}

    def to_json(self) -> str:
        return json.dumps(self.as_row())


def twisted_sum(F: SymSquareCoefficients, frequency: float, psi, n_lo: int | None = None) -> complex:
    """sum_n A_F(1, n) e(frequency n) psi(n) over the support of psi."""
    lo, hi = psi.log_support()
    n0 = max(1, int(math.floor(math.exp(lo))) if n_lo is None else n_lo)
    n1 = int(math.ceil(math.exp(hi)))
    if n1 >= len(F.row):
        raise PrecisionError(f"A_F(1, n) needed up to {n1}", n1 + 1)
    n = np.arange(n0, n1 + 1)
    return complex(np.sum(F.row[n] * np.exp(2j * math.pi * frequency * n) * psi(n.astype(float))))


def kloosterman_residues(a: int, c: int, sign: int) -> np.ndarray:
    """S(a, sign * r; c) for r = 0..c-1."""
    return np.array([arith.kloosterman(a, sign * r, c) for r in range(c)])


def voronoi_dual(F: SymSquareCoefficients, a: int, c: int, P: PsiTransform, tol: float = 1e-10,
                 block: int = 2000, max_terms: int = 10 ** 7) -> tuple[complex, dict, dict]:
    """The right side, each n2-sum grown in blocks until Psi has died out.

    A block stops the sum when its largest term is below tol * 1e-3 times the larger of
    |partial| and the largest term so far, and it lies beyond the transition x X > k^2.
    """
    total = 0j
    lengths, terms_out = {}, {}
    X = P.psi.X
    for n1 in arith.divisors(c):
        cc = c // n1
        Sp = kloosterman_residues(a, cc, 1)
        Sm = kloosterman_residues(a, cc, -1)
        partial = 0j
        peak = 0.0
        chunks = []
        start = 1
        while True:
            n2 = np.arange(start, start + block)
            x = n2 * n1 * n1 / c ** 3
            plus, minus = P.psi_pm(x)
            A = sym_square_pairs(F, n2, n1)
            r = n2 % cc
            t = c * A / (n1 * n2) * (Sp[r] * plus + Sm[r] * minus)
            chunks.append(t)
            partial += t.sum()
            past = x[0] * X > P.k ** 2
            top = float(np.abs(t).max())
            peak = max(peak, top)
            if past and top < tol * 1e-3 * max(abs(partial), peak):
                break
            start += block
            if start > max_terms:
                raise ContourError(f"dual sum not converged by n2 = {max_terms} (n1 = {n1})")
        allt = np.concatenate(chunks)
        lengths[n1] = len(allt)
        terms_out[n1] = allt
        total += partial
    return total, lengths, terms_out


def voronoi_check(F: SymSquareCoefficients, a: int, c: int, P: PsiTransform,
                  tol: float = 1e-10) -> VoronoiResult:
    """Both sides of the Voronoi identity; contract |lhs - rhs| <= tol (1 + |lhs|)."""
    if c < 1:
        raise ArgumentError("c must be positive")
    if math.gcd(a, c) != 1:
        raise ArgumentError(f"(a, c) = ({a}, {c}) must be coprime")
    abar = pow(a, -1, c) if c > 1 else 0
    lhs = twisted_sum(F, abar / c, P.psi)
    rhs, lengths, terms = voronoi_dual(F, a, c, P, tol)
    return VoronoiResult(c, a, P.psi.X, lhs, rhs, lengths, terms)


def dual_mass_point(result: VoronoiResult, fraction: float = 0.99, n1: int = 1) -> int:
    """Smallest n2 carrying ``fraction`` of the total |term| mass of the n1-block."""
    mass = np.cumsum(np.abs(result.dual_terms[n1]))
    return int(np.searchsorted(mass, fraction * mass[-1]) + 1)


# ------------------------------------------------------------------- Wilton

@dataclass
class WiltonReport:
    rows: list[dict]
    k: int

    @property
    def max_ratio(self) -> float:
        return max(r["ratio"] for r in self.rows)

    def constants_by_X(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for r in self.rows:
            out[r["X"]] = max(out.get(r["X"], 0.0), r["ratio"])
        return out


def wilton_envelope(F: SymSquareCoefficients, alpha_grid: Sequence[float],
                    X_list: Sequence[float]) -> WiltonReport:
    """|sum A_F(1,n) e(alpha n) w(n)| / (X^{3/4} k^{1/2}) for the dyadic bump w."""
    if len(F.row) <= 2 * max(X_list):
        raise PrecisionError(f"coefficients needed up to {2 * max(X_list):g}", int(2 * max(X_list)) + 1)
    k = F.source.weight
    rows = []
    for X in X_list:
        w = DyadicWeight(float(X))
        n = np.arange(int(X), int(2 * X) + 1)
        wn = w(n.astype(float))
        base = F.row[n] * wn
        for alpha in alpha_grid:
            S = complex(np.sum(base * np.exp(2j * math.pi * alpha * n)))
            rows.append({"alpha": float(alpha), "X": float(X), "re": S.real, "im": S.imag,
                         "ratio": abs(S) / (X ** 0.75 * math.sqrt(k))})
    return WiltonReport(rows, k)
