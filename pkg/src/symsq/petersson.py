"""Petersson averages from the Kloosterman side, the newform sieve, and the
harmonic weights omega.

    Delta_{k,N}(m, n) = delta(m, n) + 2 pi i^{-k} sum_{N | c} S(m, n; c) / c * J_{k-1}(4 pi sqrt(mn) / c)
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import arith
from .errors import (ArgumentError, IntegrityWarning, PreconditionError, TruncationError,
                     UnsupportedError)
from .qexp import Eigenform
from .special import bessel_j

DEFAULT_C_CAP = 40_000
PAIR_CHUNK = 64


# ------------------------------------------------------------- truncation

def _tail_constant(k: int, N: int, m: int, n: int) -> tuple[float, float]:
    """(K, e) with sum_{c > N J, N | c} |S(m,n;c)/c J_{k-1}(4 pi sqrt(mn)/c)| * 2 pi <= K J^{-e}.

    Uses |S| <= tau(c) (m,n,c)^{1/2} c^{1/2}, tau(Nj) <= tau(N) 2 sqrt(j) and
    |J_nu(x)| <= (x/2)^nu / nu!.
    """
    a = k - 0.5
    e = a - 1.5
    if e <= 0:
        raise UnsupportedError(f"weight {k}: the Kloosterman tail does not converge absolutely (need k >= 4)")
    g = math.gcd(m, n)
    nu = k - 1
    log_k = (math.log(2 * math.pi) + math.log(2 * arith.divisor_count(N)) + 0.5 * math.log(g)
             - a * math.log(N) + nu * math.log(2 * math.pi * math.sqrt(m * n))
             - math.lgamma(nu + 1) - math.log(e))
    return math.exp(log_k), e


def petersson_tail_bound(k: int, N: int, m: int, n: int, c_max: int) -> float:
    """Certified bound on the discarded part of the c-sum beyond c_max."""
    K, e = _tail_constant(k, N, m, n)
    J = max(c_max // N, 1)
    return K * J ** (-e)


def certified_c_max(k: int, N: int, m: int, n: int, tol: float) -> int:
    """Smallest multiple of N whose certified tail is below tol."""
    K, e = _tail_constant(k, N, m, n)
    J = max(1, math.ceil((K / tol) ** (1.0 / e)))
    return N * J


@dataclass(frozen=True)
class PeterssonParams:
    weight: int
    level: int
    tol: float
    c_max: int
    tail_bound: float
    certified: bool

    @classmethod
    def choose(cls, weight: int, level: int, m: int, n: int, tol: float,
               c_cap: int = DEFAULT_C_CAP, certify: bool = True) -> PeterssonParams:
        """c_max for one pair; uncertified runs stop at c_cap and report tail_bound = nan."""
        _check_weight_level(weight, level)
        need = certified_c_max(weight, level, m, n, tol)
        if need <= c_cap:
            return cls(weight, level, tol, need, petersson_tail_bound(weight, level, m, n, need), True)
        if certify:
            raise TruncationError(f"certified truncation needs c_max = {need} > cap {c_cap}; "
                                  "pass certify=False for an empirical tail")
        cap = level * max(1, c_cap // level)
        return cls(weight, level, tol, cap, float("nan"), False)


def _check_weight_level(k: int, N: int) -> None:
    if k % 2 or k < 2:
        raise ArgumentError("weight must be a positive even integer")
    if k == 2:
        raise UnsupportedError("weight 2: the c-sum tail bound fails (needs k - 1 >= 3)")
    if N < 1 or not arith.is_squarefree(N):
        raise ArgumentError("level must be squarefree")


# ------------------------------------------------------------ geometric side

@dataclass
class GeometricResult:
    weight: int
    level: int
    pairs: list[tuple[int, int]]
    values: np.ndarray
    c_max: int
    tail_bound: np.ndarray      # certified bound per pair (may exceed tol when uncertified)
    tail_estimate: np.ndarray   # empirical: spread of partial sums over (c_max/2, c_max]


class PeterssonEngine:
    """Geometric sides for many (weight, pair) combinations at one level.

    Kloosterman sums are shared across weights; moduli are processed in blocks
    so memory stays bounded.
    """

    def __init__(self, level: int, c_max: int, block: int = 5000):
        if level < 1 or not arith.is_squarefree(level):
            raise ArgumentError("level must be squarefree")
        self.level = level
        self.c_max = level * max(1, c_max // level)
        self.moduli = np.arange(level, self.c_max + 1, level, dtype=np.int64)
        self.block = block
        self._batches = [arith.KloostermanBatch(self.moduli[i:i + block])
                         for i in range(0, len(self.moduli), block)]

    def run(self, weights: Iterable[int], pairs: Sequence[tuple[int, int]]) -> dict[int, GeometricResult]:
        weights = sorted(set(int(k) for k in weights))
        for k in weights:
            _check_weight_level(k, self.level)
        pairs = [(int(m), int(n)) for m, n in pairs]
        for m, n in pairs:
            if m < 1 or n < 1:
                raise ArgumentError("m and n must be positive")
        P = len(pairs)
        total = {k: np.zeros(P) for k in weights}
        spread = {k: np.zeros(P) for k in weights}
        half = self.c_max // 2
        for lo in range(0, P, PAIR_CHUNK):
            chunk = pairs[lo:lo + PAIR_CHUNK]
            root = np.sqrt(np.array([m * n for m, n in chunk], dtype=float))
            partial = {k: np.zeros(len(chunk)) for k in weights}
            lo_env = {k: np.full(len(chunk), np.inf) for k in weights}
            hi_env = {k: np.full(len(chunk), -np.inf) for k in weights}
            for batch in self._batches:
                c = batch.moduli.astype(float)
                S = batch.matrix(chunk)                      # (moduli, pairs)
                x = 4 * np.pi * root[None, :] / c[:, None]
                for k in weights:
                    J = bessel_j(k - 1, x.ravel()).reshape(x.shape)
                    terms = S * J / c[:, None]
                    run = partial[k] + np.cumsum(terms, axis=0)
                    sel = batch.moduli > half
                    if sel.any():
                        lo_env[k] = np.minimum(lo_env[k], run[sel].min(axis=0))
                        hi_env[k] = np.maximum(hi_env[k], run[sel].max(axis=0))
                    partial[k] = run[-1]
            for k in weights:
                sign = (-1) ** (k // 2)
                delta = np.array([1.0 if m == n else 0.0 for m, n in chunk])
                total[k][lo:lo + len(chunk)] = delta + 2 * np.pi * sign * partial[k]
                spread[k][lo:lo + len(chunk)] = 2 * np.pi * (hi_env[k] - lo_env[k])
        out = {}
        for k in weights:
            bounds = np.array([petersson_tail_bound(k, self.level, m, n, self.c_max) for m, n in pairs])
            out[k] = GeometricResult(k, self.level, pairs, total[k], self.c_max, bounds, spread[k])
        return out


def delta_geometric(k: int, N: int, m: int, n: int, tol: float = 1e-10,
                    c_cap: int = DEFAULT_C_CAP, certify: bool = True) -> float:
    """Delta_{k,N}(m, n) from the Kloosterman-Bessel side."""
    params = PeterssonParams.choose(k, N, m, n, tol, c_cap, certify)
    if not params.certified:
        warnings.warn(f"Delta_{{{k},{N}}}({m},{n}): c-sum stopped at {params.c_max} without a "
                      "certified tail", IntegrityWarning, stacklevel=2)
    res = PeterssonEngine(N, params.c_max).run([k], [(m, n)])[k]
    return float(res.values[0])


# ---------------------------------------------------------------- newform sieve

def _legendre_small(a: int, p: int) -> int:
    if p == 2:
        return 0 if a % 2 == 0 else 1 if a % 8 in (1, 7) else -1
    r = pow(a % p, (p - 1) // 2, p)
    return 0 if r == 0 else 1 if r == 1 else -1


def cusp_dimension(k: int, N: int) -> int:
    """dim S_k(Gamma_0(N)) for even k >= 4 and squarefree N (Riemann-Roch count)."""
    if k < 4 or k % 2 or not arith.is_squarefree(N):
        raise ArgumentError("need even k >= 4 and squarefree N")
    primes = list(arith.factorize(N)) if N > 1 else []
    index = N
    nu2 = nu3 = 1
    for p in primes:
        index = index // p * (p + 1)
        nu2 *= 1 + (_legendre_small(-1, p) if p != 2 else 0)
        nu3 *= 1 + (_legendre_small(-3, p) if p != 3 else 0)
    cusps = 2 ** len(primes)
    dim = (Fraction(k - 1, 12) * index + (k // 4 - Fraction(k - 1, 4)) * nu2
           + (k // 3 - Fraction(k - 1, 3)) * nu3 - Fraction(cusps, 2))
    return int(dim)

@dataclass(frozen=True)
class DeltaStarRequest:
    m: int
    n: int
    weight: int
    level: int

    def __post_init__(self):
        if math.gcd(self.m, self.level) != 1:
            raise PreconditionError(f"(m, N) = ({self.m}, {self.level}) must be 1")
        if not arith.is_squarefree(self.level):
            raise PreconditionError("level must be squarefree")


@dataclass(frozen=True)
class SieveTerm:
    """coefficient * Delta_{k,R}(a, b)."""
    coefficient: float
    R: int
    a: int
    b: int


def _ell_powers(L: int, j_max: int) -> list[tuple[int, int]]:
    """(ell, total exponent) for ell | L^infinity with every prime exponent <= j_max."""
    out = [(1, 0)]
    for p in (arith.factorize(L) if L > 1 else ()):
        out = [(ell * p ** e, tot + e) for ell, tot in out for e in range(j_max + 1)]
    return sorted(out)


def _series_bound(x: float, J: int | None = None) -> float:
    """sum_{e <= J} (2e + 1) x^e, all e when J is None."""
    if J is None:
        return (1 + x) / (1 - x) ** 2
    return sum((2 * e + 1) * x ** e for e in range(J + 1))


def sieve_terms(req: DeltaStarRequest, depth: int, original: bool = False) -> list[SieveTerm]:
    """Expansion of Delta* into full-space averages, ell | L^infty with prime exponents <= depth."""
    N, m, n = req.level, req.m, req.n
    out = []
    for L in arith.divisors(N):
        R = N // L
        mu_L = arith.mobius(L)
        base = mu_L / (L * float(arith.nu(math.gcd(n, L))))
        for ell, _ in _ell_powers(L, depth):
            if original:
                out.append(SieveTerm(base / ell, R, m * ell * ell, n))
                continue
            for l1 in arith.divisors(L):
                # l1 | L suffices: l1^2 | l1 L forces every prime of l1 to divide L
                if n % (l1 * l1) or (l1 * L) % (l1 * l1):
                    continue
                out.append(SieveTerm(base / ell * arith.mobius(l1) * l1, R, m * ell * ell, n // (l1 * l1)))
    return out


def original_form_applies(n: int, N: int) -> bool:
    """Hypothesis under which the ell_1-free form agrees with the general one: (n, N^2) | N."""
    return N % math.gcd(n, N * N) == 0


@dataclass
class DeltaStarResult:
    value: float
    terms: list[tuple[SieveTerm, float]]
    depth: int
    tail_estimate: float


class NewformSieve:
    """Delta*_{k,N} with the ell-series truncated by a positivity magnitude bound.

    |Delta_{k,R}(a, b)| <= tau(a) tau(b) Delta_{k,R}(1, 1) (Deligne), so a term
    whose bound is below tol is not evaluated, and the exponent cap on ell is
    chosen per request so the bound on everything beyond it is below tol too.
    With ``skip_zero_spaces`` a level R with dim S_k(R) = 0 contributes exactly
    nothing and is not run at all.
    """

    def __init__(self, k: int, N: int, tol: float = 1e-9, c_cap: int = DEFAULT_C_CAP,
                 max_depth: int = 64, skip_zero_spaces: bool = True, max_argument: int = 10 ** 7):
        _check_weight_level(k, N)
        self.k, self.N, self.tol, self.c_cap, self.max_depth = k, N, tol, c_cap, max_depth
        self.max_argument = max_argument
        self.skip_zero_spaces = skip_zero_spaces
        self._scale: dict[int, float] = {}
        self._engines: dict[tuple[int, int], PeterssonEngine] = {}

    def engine(self, R: int, c_max: int | None = None) -> PeterssonEngine:
        c_max = self.c_cap if c_max is None else min(c_max, self.c_cap)
        e = self._engines.get((R, c_max))
        if e is None:
            e = self._engines[(R, c_max)] = PeterssonEngine(R, c_max)
        return e

    def _c_max(self, R: int, pairs) -> int:
        """Certified c_max for the largest pair, or the cap when that is out of reach."""
        top = max(a * b for a, b in pairs)
        try:
            need = certified_c_max(self.k, R, top, 1, self.tol * 1e-2)
        except OverflowError:
            return self.c_cap
        # round up to a power of two times R so nearby requests share an engine
        j = 1
        while R * j < need:
            j *= 2
        return min(R * j, self.c_cap)

    def depth(self, req: DeltaStarRequest) -> tuple[int, float]:
        """(exponent cap, bound on the omitted ell-terms).

        The cap is the smallest one whose omitted terms are bounded by tol * 1e-2,
        clamped so that m ell^2 stays below ``max_argument``. A clamped cap warns:
        with oldforms present the series decays only like p^-j.
        """
        factor = arith.divisor_count(req.m) * arith.divisor_count(req.n)
        levels = []
        for L in arith.divisors(self.N):
            if L == 1:
                continue
            scale = self.scale(self.N // L)
            if scale:
                sigma = sum(arith.divisors(L))
                levels.append((sigma / L * factor * scale, list(arith.factorize(L))))

        def tail(J: int) -> float:
            return sum(c * (math.prod(_series_bound(1 / p) for p in ps)
                            - math.prod(_series_bound(1 / p, J) for p in ps)) for c, ps in levels)

        if not levels:
            return 0, 0.0
        top = max(max(ps) for _, ps in levels)
        feasible = 0
        while feasible < self.max_depth and req.m * top ** (2 * feasible + 2) <= self.max_argument:
            feasible += 1
        for J in range(feasible + 1):
            t = tail(J)
            if t < self.tol * 1e-2:
                return J, t
        t = tail(feasible)
        warnings.warn(f"Delta*_{{{self.k},{self.N}}}({req.m},{req.n}): ell-series stopped at exponent "
                      f"{feasible}; omitted terms bounded by {t:.3g}", IntegrityWarning, stacklevel=3)
        return feasible, t

    def scale(self, R: int) -> float:
        """Delta_{k,R}(1, 1) = sum of omega^{-1} >= 0 (floored at the tail estimate)."""
        s = self._scale.get(R)
        if s is None and self.skip_zero_spaces and cusp_dimension(self.k, R) == 0:
            s = self._scale[R] = 0.0
        if s is None:
            res = self.engine(R, self._c_max(R, [(1, 1)])).run([self.k], [(1, 1)])[self.k]
            s = max(float(res.values[0]), float(res.tail_estimate[0]), 0.0)
            self._scale[R] = s
        return s

    def evaluate_many(self, requests: Sequence[DeltaStarRequest], original: bool = False) -> list[DeltaStarResult]:
        plans = []
        need: dict[int, set[tuple[int, int]]] = {}
        for req in requests:
            if original and not original_form_applies(req.n, req.level):
                warnings.warn(f"original sieve form used outside its hypothesis at n={req.n}",
                              IntegrityWarning, stacklevel=2)
            kept = []
            depth, skipped = self.depth(req)
            for t in sieve_terms(req, depth, original):
                if self.skip_zero_spaces and self.scale(t.R) == 0.0 and cusp_dimension(self.k, t.R) == 0:
                    continue
                bound = abs(t.coefficient) * arith.divisor_count(t.a) * arith.divisor_count(t.b) * self.scale(t.R)
                if bound < self.tol * 1e-2:
                    skipped += bound
                    continue
                kept.append(t)
                need.setdefault(t.R, set()).add((t.a, t.b))
            plans.append((kept, skipped, depth))
        values: dict[tuple[int, int, int], float] = {}
        for R, pairs in need.items():
            pairs = sorted(pairs)
            res = self.engine(R, self._c_max(R, pairs)).run([self.k], pairs)[self.k]
            for p, v in zip(pairs, res.values):
                values[(R,) + p] = float(v)
        out = []
        for kept, skipped, depth in plans:
            terms = [(t, values[(t.R, t.a, t.b)]) for t in kept]
            total = sum(t.coefficient * v for t, v in terms)
            out.append(DeltaStarResult(total, terms, depth, skipped))
        return out

    def __call__(self, m: int, n: int, original: bool = False) -> float:
        return self.evaluate_many([DeltaStarRequest(m, n, self.k, self.N)], original)[0].value


def delta_star(k: int, N: int, m: int, n: int, tol: float = 1e-9,
               c_cap: int = DEFAULT_C_CAP) -> float:
    """Delta*_{k,N}(m, n) = sum over newforms of omega^{-1} lambda(m) lambda(n)."""
    req = DeltaStarRequest(m, n, k, N)
    return NewformSieve(k, N, tol, c_cap).evaluate_many([req])[0].value


def delta_star_original(k: int, N: int, m: int, n: int, tol: float = 1e-9,
                        c_cap: int = DEFAULT_C_CAP) -> float:
    """The ell_1-free sieve; warns when (n, N^2) does not divide N."""
    if not original_form_applies(n, N):
        warnings.warn(f"(n, N^2) = {math.gcd(n, N * N)} does not divide N = {N}; "
                      "the ell_1-free form does not apply", IntegrityWarning, stacklevel=2)
    req = DeltaStarRequest(m, n, k, N)
    return NewformSieve(k, N, tol, c_cap).evaluate_many([req], original=True)[0].value


# ---------------------------------------------------------------------- omega

def omega_from_L1(weight: int, level: int, L1: float) -> float:
    return (weight - 1) * level / (2 * math.pi ** 2) * L1


def omega_newform(g: Eigenform, tol: float = 1e-9, c_cap: int = DEFAULT_C_CAP,
                  check: bool = True) -> float:
    """omega_g = 1 / Delta*(1, 1) for g the only newform of its space.

    With ``check`` the value is compared against (k-1) N / (2 pi^2) L(1, Sym^2 g);
    a gap above 1e-3 relative emits IntegrityWarning.
    """
    value = 1.0 / delta_star(g.weight, g.level, 1, 1, tol, c_cap)
    if check:
        from .lfunc import special_value_L1_sym2
        try:
            alt = omega_from_L1(g.weight, g.level, special_value_L1_sym2(g, 1e-8))
        except Exception as exc:  # heuristic route only; never fatal
            warnings.warn(f"L(1, Sym^2 g) route unavailable: {exc}", IntegrityWarning, stacklevel=2)
        else:
            if abs(alt - value) > 1e-3 * abs(value):
                warnings.warn(f"omega via Delta* = {value:.10g} but via L(1, Sym^2) = {alt:.10g}",
                              IntegrityWarning, stacklevel=2)
    return value
