"""Twisted first moment over newforms of level P, its trace-formula expansion,
the amplifier, and the off-diagonal Voronoi rewriting.

    F(l) = sum_g omega_g^-1 lambda_g(l) L(1/2, Sym^2 f x g) = S_1(l, Y) + (-1)^kappa S_2(l, Y)

S_1 and S_2 are the two AFE sums averaged with Delta*_{2 kappa, P}; the direct
route multiplies out the single newform instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import arith
from .errors import ArgumentError, PrecisionError, UnsupportedError
from .lfunc import VWeight, central_value, squarefree_coprime
from .petersson import (DEFAULT_C_CAP, DeltaStarRequest, NewformSieve,
                        cusp_dimension, omega_newform)
from .qexp import Eigenform, SymSquareCoefficients, sym_square
from .special import bessel_j
from .voronoi import PsiTransform, twisted_sum

SAFETY_TERMS = 20


# ---------------------------------------------------------------- amplifier

@dataclass
class Amplifier:
    L: float
    P: int
    g0: Eigenform
    primes: list[int] = field(default_factory=list)
    alpha: dict[int, float] = field(default_factory=dict)

    @classmethod
    def build(cls, g0: Eigenform, L: float) -> Amplifier:
        if L < 1:
            raise ArgumentError("L must be at least 1")
        P = g0.level
        primes = [p for p in arith.primes_up_to(int(2 * L)) if p >= L and p != P]
        alpha: dict[int, float] = {}
        for p in primes:
            alpha[p] = g0.lambda_(p)
            alpha[p * p] = -1.0
        return cls(L, P, g0, primes, alpha)

    def value(self, g: Eigenform) -> float:
        """A_g = sum_l alpha_l lambda_g(l)."""
        return sum(a * g.lambda_(l) for l, a in self.alpha.items())

    def expansion(self) -> dict[int, float]:
        """Coefficients c_l with |A_g|^2 = sum_l c_l lambda_g(l), from the Hecke relation."""
        out: dict[int, float] = {}
        for l1, a1 in self.alpha.items():
            for l2, a2 in self.alpha.items():
                for l3 in arith.divisors(math.gcd(l1, l2)):
                    l = l1 * l2 // (l3 * l3)
                    out[l] = out.get(l, 0.0) + a1 * a2
        return out


# ------------------------------------------------------------------- config

@dataclass(frozen=True)
class MomentConfig:
    f: Eigenform
    g: Eigenform
    ell: int
    Y: float = 1.0
    tol: float = 1e-8
    L: float = 1.0

    def __post_init__(self):
        if self.f.level != 1:
            raise ArgumentError("f must have level one")
        if not arith.is_prime(self.g.level):
            raise ArgumentError("g must have prime level")
        if self.ell < 1 or math.gcd(self.ell, self.g.level) != 1:
            raise ArgumentError(f"ell = {self.ell} must be positive and coprime to P")
        if self.ell > 16 * self.L ** 4:
            raise ArgumentError(f"ell = {self.ell} exceeds 16 L^4")
        if self.Y <= 0:
            raise ArgumentError("Y must be positive")

    @property
    def P(self) -> int:
        return self.g.level

    @property
    def kappa(self) -> int:
        return self.g.weight // 2

    @property
    def Q(self) -> float:
        return float(self.f.weight) ** 4 * self.P ** 3

    @property
    def a_priori_gate(self) -> bool:
        return self.L ** 2 * math.sqrt(self.Y) * self.Q ** 0.25 <= self.P


@dataclass
class MomentReport:
    k: int
    kappa: int
    P: int
    ell: int
    Y: float
    S1: float
    S2: float
    F: float
    route_direct: float | None = None
    T1: float | None = None
    T2: float | None = None
    n_ranges: tuple[int, int] = (0, 0)

    @property
    def rel_gap(self) -> float | None:
        if self.route_direct is None:
            return None
        return abs(self.F - self.route_direct) / (1 + abs(self.route_direct))

    def as_dict(self) -> dict:
        return {"k": self.k, "kappa": self.kappa, "P": self.P, "ell": self.ell, "Y": self.Y,
                "S1": self.S1, "S2": self.S2, "F": self.F, "route_direct": self.route_direct,
                "rel_gap": self.rel_gap}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())


# ------------------------------------------------------------ trace route

class MomentEngine:
    """Shared state for many (l, Y): one V, one newform sieve, a Delta* memo keyed by (l, m)."""

    def __init__(self, f: Eigenform, g: Eigenform, tol: float = 1e-8, c_cap: int = DEFAULT_C_CAP):
        self.f, self.g, self.tol = f, g, tol
        self.P = g.level
        self.V = VWeight(f, g)
        self.sieve = NewformSieve(g.weight, self.P, tol, c_cap)
        self.full = self.sieve.engine(self.P)
        self._delta_star: dict[tuple[int, int], float] = {}
        self._delta_full: dict[tuple[int, int], float] = {}
        self._F: SymSquareCoefficients | None = None

    @property
    def eps(self) -> float:
        return self.tol * 1e-2

    def coefficients(self, n_max: int) -> SymSquareCoefficients:
        if self._F is None or len(self._F.row) <= n_max:
            if self.f.precision <= n_max:
                raise PrecisionError(f"f needs coefficients up to {n_max}", n_max + 1)
            self._F = sym_square(self.f, 1, n_max)
        return self._F

    def ranges(self, Y: float) -> tuple[int, int]:
        """n-ranges (d = 1) of the two sums: |V| < tol 1e-2 beyond, plus the safety terms."""
        zc = self.V.z_cut(self.eps)
        s = self.P ** 1.5
        return int(zc * Y * s) + SAFETY_TERMS, int(zc * s / Y) + SAFETY_TERMS

    def _blocks(self, Y: float) -> list[tuple[int, int, np.ndarray, np.ndarray]]:
        """(sum index, d, n, weight) with weight = mu(d) d^-3/2 A_F(1,n) n^-1/2 V(.)."""
        n1, n2 = self.ranges(Y)
        F = self.coefficients(max(n1, n2))
        s = self.P ** 1.5
        out = []
        for j, (top, yscale) in enumerate(((n1, 1 / (Y * s)), (n2, Y / s))):
            for d in squarefree_coprime(int(top ** (1 / 3)) + 1, self.P):
                nmax = top // d ** 3
                if nmax < 1:
                    continue
                n = np.arange(1, nmax + 1)
                v = np.real(self.V(d ** 3 * n * yscale, F=F, eps=self.eps))
                w = arith.mobius(d) * d ** -1.5 * F.row[1:nmax + 1] / np.sqrt(n) * v
                out.append((j, d, n, w))
        return out

    def _fill(self, keys: set) -> None:
        """Delta* for each key; the R = P sieve term (coefficient 1) is Delta_{2 kappa, P} itself."""
        missing = sorted(k for k in keys if k not in self._delta_star)
        if not missing:
            return
        reqs = [DeltaStarRequest(l, m, self.g.weight, self.P) for l, m in missing]
        results = self.sieve.evaluate_many(reqs)
        full_missing = []
        for key, res in zip(missing, results):
            self._delta_star[key] = float(res.value)
            for t, v in res.terms:
                if t.R == self.P and (t.a, t.b) == key and t.coefficient == 1.0:
                    self._delta_full[key] = float(v)
                    break
            else:
                full_missing.append(key)
        if full_missing:
            vals = self.full.run([self.g.weight], full_missing)[self.g.weight].values
            for key, v in zip(full_missing, vals):
                self._delta_full[key] = float(v)

    def trace(self, ell: int, Y: float) -> MomentReport:
        blocks = self._blocks(Y)
        keys = set()
        for j, d, n, _ in blocks:
            m = d * n * (self.P if j else 1)
            keys.update((ell, int(x)) for x in m)
        self._fill(keys)
        S = [0.0, 0.0]
        T = [0.0, 0.0]
        for j, d, n, w in blocks:
            m = d * n * (self.P if j else 1)
            ds = np.array([self._delta_star[(ell, int(x))] for x in m])
            df = np.array([self._delta_full[(ell, int(x))] for x in m])
            S[j] += float(np.sum(w * ds))
            T[j] += float(np.sum(w * df))
        root = math.sqrt(self.P)
        S1, S2 = S[0], root * S[1]
        sign = (-1) ** (self.g.weight // 2)
        return MomentReport(self.f.weight, self.g.weight // 2, self.P, ell, Y, S1, S2, S1 + sign * S2,
                            T1=T[0], T2=root * T[1], n_ranges=self.ranges(Y))

    def diagonal(self, ell: int, Y: float) -> float:
        """The delta(l, dn) part of T_1: sum_{d | l, (d,P)=1} mu(d) A_F(1, l/d) (l d^2)^-1/2 V(l d^2 / (Y P^3/2))."""
        F = self.coefficients(ell)
        total = 0.0
        for d in arith.divisors(ell):
            mu = arith.mobius(d)
            if mu == 0 or math.gcd(d, self.P) != 1:
                continue
            y = ell * d * d / (Y * self.P ** 1.5)
            total += mu * F.row[ell // d] / math.sqrt(ell * d * d) * float(np.real(self.V(np.array([y]), F=F))[0])
        return total


_ENGINES: dict[tuple, MomentEngine] = {}


def moment_engine(f: Eigenform, g: Eigenform, tol: float = 1e-8, c_cap: int = DEFAULT_C_CAP) -> MomentEngine:
    key = (id(f), id(g), tol, c_cap)
    e = _ENGINES.get(key)
    if e is None:
        e = _ENGINES[key] = MomentEngine(f, g, tol, c_cap)
    return e


def twisted_moment_trace(cfg: MomentConfig, engine: MomentEngine | None = None) -> MomentReport:
    engine = engine or moment_engine(cfg.f, cfg.g, cfg.tol)
    return engine.trace(cfg.ell, cfg.Y)


# ----------------------------------------------------------- direct route

def _require_enumerable(g: Eigenform) -> None:
    k, P = g.weight, g.level
    if cusp_dimension(k, P) != 1 or cusp_dimension(k, 1) != 0:
        raise UnsupportedError(f"H*_{k}({P}) is not the single built-in newform")


_OMEGA: dict[int, float] = {}


def twisted_moment_direct(cfg: MomentConfig) -> float:
    """omega_g^-1 lambda_g(l) L(1/2, Sym^2 f x g) for the one newform of the space."""
    _require_enumerable(cfg.g)
    key = id(cfg.g)
    if key not in _OMEGA:
        _OMEGA[key] = omega_newform(cfg.g, check=False)
    L_half = central_value(cfg.f, cfg.g, cfg.Y, min(cfg.tol, 1e-10))
    return cfg.g.lambda_(cfg.ell) * L_half / _OMEGA[key]


def moment_report(cfg: MomentConfig, cross_check: bool = True,
                  engine: MomentEngine | None = None) -> MomentReport:
    rep = twisted_moment_trace(cfg, engine)
    if cross_check:
        rep.route_direct = twisted_moment_direct(cfg)
    return rep


def diagonal_term(cfg: MomentConfig, engine: MomentEngine | None = None) -> float:
    engine = engine or moment_engine(cfg.f, cfg.g, cfg.tol)
    return engine.diagonal(cfg.ell, cfg.Y)


def amplified_average(f: Eigenform, g0: Eigenform, L: float, Y: float = 1.0, tol: float = 1e-8,
                      moment: Callable[[int], float] | None = None) -> float:
    """sum_{l1, l2} alpha_l1 alpha_l2 sum_{l3 | (l1, l2)} F(l1 l2 / l3^2), F memoized in l."""
    amp = Amplifier.build(g0, L)
    if moment is None:
        engine = moment_engine(f, g0, tol)

        def moment(l: int) -> float:
            return engine.trace(l, Y).F
    memo: dict[int, float] = {}
    total = 0.0
    for l, coef in sorted(amp.expansion().items()):
        if l > 16 * L ** 4 or math.gcd(l, g0.level) != 1:
            raise ArgumentError(f"twist {l} outside the admissible range")
        if l not in memo:
            memo[l] = moment(l)
        total += coef * memo[l]
    return total


# ------------------------------------------------ off-diagonal identities

@dataclass(frozen=True)
class OffdiagonalWeight:
    """psi(y) = J_{2 kappa - 1}(theta sqrt y) d^-3/2 y^-1/2 V(d^3 y * vscale) h(d^3 y / X).

    h is the log-Gaussian bump exp(-alpha log^2(t / sqrt 2)); vscale is 1/(Y P^3/2) for
    the first family and Y / P^3/2 for the second.
    """

    V: VWeight
    F: SymSquareCoefficients
    theta: float
    kappa: int
    d: int
    X_dyadic: float
    vscale: float
    alpha: float = 30.0
    cutoff: float = 1e-24

    @property
    def X(self) -> float:
        return self.X_dyadic / self.d ** 3

    def log_support(self) -> tuple[float, float]:
        r = math.sqrt(math.log(1 / self.cutoff) / self.alpha)
        c = math.log(math.sqrt(2) * self.X)
        return c - r, c + r

    def __call__(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        t = self.d ** 3 * y
        h = np.exp(-self.alpha * (np.log(t / self.X_dyadic) - math.log(math.sqrt(2))) ** 2)
        v = np.real(self.V(t * self.vscale, F=self.F))
        J = bessel_j(2 * self.kappa - 1, self.theta * np.sqrt(y))
        return J * v * h / np.sqrt(t)


@dataclass
class OffdiagonalResult:
    family: int
    c: int
    X: float
    d1: int
    d2: int
    ell: int
    direct: complex
    voronoi_form: complex
    n1_one: complex        # the n_1 = 1 part of the expanded side

    @property
    def rel_err(self) -> float:
        return abs(self.direct - self.voronoi_form) / (1 + abs(self.direct))

    @property
    def rel_err_strict(self) -> float:
        return abs(self.direct - self.voronoi_form) / abs(self.direct)


def _offdiagonal_setup(family: int, c: int, d1: int, d2: int, ell: int, P: int) -> None:
    if family not in (1, 2):
        raise ArgumentError("family must be 1 or 2")
    d = d1 * d2
    if c < 1 or d1 < 1 or d2 < 1 or ell < 1:
        raise ArgumentError("c, d1, d2, ell must be positive")
    if arith.mobius(d) == 0 or math.gcd(d, P) != 1:
        raise ArgumentError("d = d1 d2 must be squarefree and coprime to P")
    if math.gcd(c, d2) != 1:
        raise ArgumentError("(c, d2) must be 1")
    if math.gcd(ell, P) != 1:
        raise ArgumentError("(ell, P) must be 1")
    if family == 1 and c % P:
        raise ArgumentError("the first family needs P | c")
    if family == 2 and math.gcd(c, P) != 1:
        raise ArgumentError("the second family needs (c, P) = 1")


def offdiagonal_identity_check(f: Eigenform, g: Eigenform, c: int, X: float, d1: int, d2: int,
                               ell: int, family: int = 1, Y: float = 1.0, tol: float = 1e-8,
                               V: VWeight | None = None, T_height: float = 20000.0) -> OffdiagonalResult:
    """The a-sum of e(l a / (c d1)) against the twisted n-sum, both before Voronoi and fully expanded.

    Expanded side, family 1 (family 2 adds P to the congruence and 1/sqrt P in front):
        1/d1 sum_{n1 c1 = c} sum_{c2 | c d1} mu(c d1 / c2) c2 / n1 sum_{n3 | n1} mu(n3)/n3 A_F(1, n1/n3)
           sum*_{b mod c1, b d1 n1 = -d2 l (c2)} sum_n A_F(n, 1)/n e(+-n n3 bbar / c1) Psi_+-(n n3 n1^2 / c^3)
    """
    P = g.level
    _offdiagonal_setup(family, c, d1, d2, ell, P)
    kappa = g.weight // 2
    k = f.weight
    V = V or VWeight(f, g)
    s = P ** 1.5
    vscale = 1 / (Y * s) if family == 1 else Y / s
    d = d1 * d2
    cd1 = c * d1
    theta = 4 * math.pi * math.sqrt(ell * d) / cd1
    if family == 2:
        theta /= math.sqrt(P)
    weight_top = int(math.exp(math.log(math.sqrt(2) * X / d ** 3) + math.sqrt(math.log(1e17) / 30))) + 2
    dual_top = int(c ** 3 * 3.6 * 30 ** 1.5 / (math.sqrt(2) * X / d ** 3) * 3) + 4000
    top = max(weight_top, dual_top)
    if f.precision <= top:
        raise PrecisionError(f"f needs coefficients up to {top}", top + 1)
    F = sym_square(f, 1, top)
    psi = OffdiagonalWeight(V, F, theta, kappa, d, X, vscale)
    front = 1.0 if family == 1 else 1 / math.sqrt(P)
    twist = ell if family == 1 else ell * pow(P, -1, cd1) % cd1

    # direct: group a by r = d2 abar mod c
    inner: dict[int, complex] = {}
    direct = 0j
    for a in range(cd1):
        if math.gcd(a, cd1) != 1:
            continue
        r = d2 * pow(a, -1, cd1) % c if c > 1 else 0
        if r not in inner:
            inner[r] = twisted_sum(F, r / c, psi)
        direct += np.exp(2j * math.pi * twist * a / cd1) * inner[r]
    direct *= front / cd1

    # expanded
    T = PsiTransform(k, psi, eps=max(tol * 1e-4, 1e-14), t_probe=T_height)
    exp_total = 0j
    n1_one = 0j
    for n1 in arith.divisors(c):
        c1 = c // n1
        block = 0j
        for c2 in arith.divisors(cd1):
            mu2 = arith.mobius(cd1 // c2)
            if mu2 == 0:
                continue
            mult = d1 * n1 * (P if family == 2 else 1)
            bs = [b for b in range(c1) if math.gcd(b, c1) == 1 and (b * mult + d2 * ell) % c2 == 0]
            if not bs:
                continue
            for n3 in arith.divisors(n1):
                mu3 = arith.mobius(n3)
                if mu3 == 0:
                    continue
                coef = mu2 * mu3 * c2 / (n1 * n3) * F.row[n1 // n3]
                # sum_b e(+-n n3 bbar / c1) is a Ramanujan-type sum periodic in n mod c1
                bbar = np.array([pow(b, -1, c1) if c1 > 1 else 0 for b in bs])
                r = np.arange(c1)
                Rp = np.exp(2j * math.pi * np.outer(r, bbar) / c1).sum(axis=1)
                series = _dual_series(F, T, n3, n1, c, c1, Rp, tol)
                block += coef * series
        block /= d1
        exp_total += block
        if n1 == 1:
            n1_one = block * front
    return OffdiagonalResult(family, c, X, d1, d2, ell, complex(direct), complex(front * exp_total),
                             complex(n1_one))


def _dual_series(F: SymSquareCoefficients, T: PsiTransform, n3: int, n1: int, c: int, c1: int,
                 Rp: np.ndarray, tol: float, block: int = 2000, max_terms: int = 10 ** 7) -> complex:
    """sum_n A_F(n,1)/n [R(n n3) Psi_+(x) + conj R(n n3) Psi_-(x)], x = n n3 n1^2 / c^3."""
    total = 0j
    peak = 0.0
    start = 1
    while True:
        n = np.arange(start, start + block)
        if n[-1] >= len(F.row):
            raise PrecisionError(f"A_F(1, n) needed beyond {len(F.row) - 1}", int(n[-1]) + 1)
        x = n * n3 * n1 * n1 / c ** 3
        plus, minus = T.psi_pm(x)
        R = Rp[(n * n3) % c1]
        t = F.row[n] / n * (R * plus + np.conj(R) * minus)
        total += t.sum()
        top = float(np.abs(t).max())
        peak = max(peak, top)
        if x[0] * T.psi.X > T.k ** 2 and top < tol * 1e-3 * max(abs(total), peak):
            return total
        start += block
        if start > max_terms:
            raise PrecisionError("dual series did not converge", max_terms)
