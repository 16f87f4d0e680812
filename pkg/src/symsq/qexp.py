"""Exact integer q-expansions and the Hecke eigenforms built from them.

The integer layer never rounds. Normalized eigenvalues are produced at the
float boundary as ``a(n) / n**((weight - 1) / 2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, IntegrityError, PrecisionError

KARATSUBA_THRESHOLD = 64
LEVEL_ONE_WEIGHTS = (12, 16, 18, 20, 22, 26)


def _pack(coeffs: Sequence[int], width: int) -> int:
    """Kronecker substitution: evaluate the polynomial at 2**(8*width)."""
    pos = bytearray(len(coeffs) * width)
    neg = bytearray(len(coeffs) * width)
    for i, c in enumerate(coeffs):
        if c > 0:
            pos[i * width:(i + 1) * width] = c.to_bytes(width, "little")
        elif c < 0:
            neg[i * width:(i + 1) * width] = (-c).to_bytes(width, "little")
    return int.from_bytes(pos, "little") - int.from_bytes(neg, "little")


def _unpack(value: int, count: int, width: int) -> list[int]:
    half = 1 << (8 * width - 1)
    # adding half to every digit makes all digits non-negative
    bias = int.from_bytes((b"\x00" * (width - 1) + b"\x80") * count, "little")
    # higher digits only contribute multiples of 2**(8*width*count)
    raw = ((value + bias) & ((1 << (8 * width * count)) - 1)).to_bytes(count * width, "little")
    return [int.from_bytes(raw[i * width:(i + 1) * width], "little") - half for i in range(count)]


def _mul_schoolbook(a: Sequence[int], b: Sequence[int], n: int) -> list[int]:
    out = [0] * n
    for i, ai in enumerate(a[:n]):
        if ai == 0:
            continue
        lim = n - i
        for j, bj in enumerate(b[:lim]):
            if bj:
                out[i + j] += ai * bj
    return out


def _mul_kronecker(a: Sequence[int], b: Sequence[int], n: int) -> list[int]:
    a = a[:n]
    b = b[:n]
    ma = max((abs(x) for x in a), default=0)
    mb = max((abs(x) for x in b), default=0)
    if ma == 0 or mb == 0:
        return [0] * n
    bound = ma * mb * min(len(a), len(b))
    width = (bound.bit_length() + 2 + 7) // 8
    prod = _pack(a, width) * _pack(b, width)
    return _unpack(prod, n, width)


def multiply_truncated(a: Sequence[int], b: Sequence[int], n: int,
                       threshold: int = KARATSUBA_THRESHOLD) -> list[int]:
    """First ``n`` coefficients of the product of two integer sequences."""
    if min(len(a), len(b), n) <= threshold:
        return _mul_schoolbook(a, b, n)
    return _mul_kronecker(a, b, n)


@dataclass(frozen=True)
class IntegerPowerSeries:
    """Exact power series sum coeffs[n] q^n, valid for n < precision."""

    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))

    @property
    def precision(self) -> int:
        return len(self.coeffs)

    @classmethod
    def from_dict(cls, terms: dict[int, int], precision: int) -> IntegerPowerSeries:
        c = [0] * precision
        for k, v in terms.items():
            if 0 <= k < precision:
                c[k] += v
        return cls(tuple(c))

    @classmethod
    def one(cls, precision: int) -> IntegerPowerSeries:
        return cls.from_dict({0: 1}, precision)

    def __getitem__(self, n: int) -> int:
        if not 0 <= n < self.precision:
            raise PrecisionError(f"coefficient {n} outside precision {self.precision}", n + 1)
        return self.coeffs[n]

    def __len__(self) -> int:
        return self.precision

    def truncate(self, precision: int) -> IntegerPowerSeries:
        if precision > self.precision:
            raise PrecisionError(f"cannot raise precision {self.precision} to {precision}", precision)
        return IntegerPowerSeries(self.coeffs[:precision])

    def __add__(self, other: IntegerPowerSeries) -> IntegerPowerSeries:
        n = min(self.precision, other.precision)
        return IntegerPowerSeries(tuple(x + y for x, y in zip(self.coeffs[:n], other.coeffs[:n])))

    def __neg__(self) -> IntegerPowerSeries:
        return IntegerPowerSeries(tuple(-x for x in self.coeffs))

    def __sub__(self, other: IntegerPowerSeries) -> IntegerPowerSeries:
        return self + (-other)

    def scale(self, factor: int) -> IntegerPowerSeries:
        return IntegerPowerSeries(tuple(factor * x for x in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, int):
            return self.scale(other)
        n = min(self.precision, other.precision)
        return IntegerPowerSeries(tuple(multiply_truncated(self.coeffs, other.coeffs, n)))

    __rmul__ = __mul__

    def __pow__(self, e: int) -> IntegerPowerSeries:
        if e < 0:
            return self.inverse() ** (-e)
        result = IntegerPowerSeries.one(self.precision)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def shift(self, k: int) -> IntegerPowerSeries:
        """Multiply by q^k (k >= 0), keeping the precision."""
        if k < 0:
            raise ArgumentError("shift must be non-negative")
        return IntegerPowerSeries((0,) * min(k, self.precision) + self.coeffs[: max(self.precision - k, 0)])

    def substitute_power(self, m: int, precision: int | None = None) -> IntegerPowerSeries:
        """Series in q^m; exact up to m * precision."""
        if m < 1:
            raise ArgumentError("scale must be positive")
        n = m * self.precision if precision is None else precision
        if n > m * self.precision:
            raise PrecisionError("substitution exceeds source precision", n)
        c = [0] * n
        for i, v in enumerate(self.coeffs):
            if i * m >= n:
                break
            c[i * m] = v
        return IntegerPowerSeries(tuple(c))

    def inverse(self) -> IntegerPowerSeries:
        """Inverse of a series with constant term +-1."""
        if self.coeffs[0] not in (1, -1):
            raise ArgumentError("only unit constant terms are invertible over the integers")
        n = self.precision
        inv = [0] * n
        c0 = self.coeffs[0]
        inv[0] = c0
        for k in range(1, n):
            s = 0
            for j in range(1, k + 1):
                s += self.coeffs[j] * inv[k - j]
            inv[k] = -c0 * s
        return IntegerPowerSeries(tuple(inv))


def euler_product(precision: int) -> IntegerPowerSeries:
    """prod (1 - q^n) via the pentagonal-number theorem."""
    c = [0] * precision
    k = 0
    while True:
        sign = -1 if k % 2 else 1
        e1 = k * (3 * k - 1) // 2
        e2 = k * (3 * k + 1) // 2
        if e1 >= precision:
            break
        c[e1] += sign
        if k and e2 < precision:
            c[e2] += sign
        k += 1
    return IntegerPowerSeries(tuple(c))


def delta_qexp(precision: int) -> IntegerPowerSeries:
    """Ramanujan's Delta = q prod (1 - q^n)^24; coeffs[n] = tau(n)."""
    if precision < 2:
        raise ArgumentError("precision must be at least 2")
    return IntegerPowerSeries((0,) + (euler_product(precision - 1) ** 24).coeffs)


def _sigma_series(power: int, scale: int, constant: int, precision: int) -> IntegerPowerSeries:
    c = [0] * precision
    c[0] = constant
    for d in range(1, precision):
        dp = d ** power
        for n in range(d, precision, d):
            c[n] += dp
    for n in range(1, precision):
        c[n] *= scale
    return IntegerPowerSeries(tuple(c))


def eisenstein_e4(precision: int) -> IntegerPowerSeries:
    return _sigma_series(3, 240, 1, precision)


def eisenstein_e6(precision: int) -> IntegerPowerSeries:
    return _sigma_series(5, -504, 1, precision)


# ---------------------------------------------------------------- eigenforms

def _small_primes(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0:2] = b"\x00\x00"
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = bytearray(len(sieve[p * p::p]))
    return [i for i in range(n + 1) if sieve[i]]


def _smallest_prime_factors(n: int) -> list[int]:
    spf = list(range(n + 1))
    for p in range(2, int(n ** 0.5) + 1):
        if spf[p] == p:
            for m in range(p * p, n + 1, p):
                if spf[m] == m:
                    spf[m] = p
    return spf


def verify_hecke(a: Sequence[int], weight: int, level: int) -> int | None:
    """Return the first index violating the Hecke structure, or None.

    Checks a(1) = 1, multiplicativity over prime-power splits, the prime-power
    recursion for p not dividing the level and complete multiplicativity at p
    dividing the level.
    """
    n_max = len(a) - 1
    if n_max >= 1 and a[1] != 1:
        return 1
    spf = _smallest_prime_factors(max(n_max, 1))
    for n in range(2, n_max + 1):
        p = spf[n]
        pe, e = 1, 0
        m = n
        while m % p == 0:
            m //= p
            pe *= p
            e += 1
        if m > 1:
            if a[n] != a[pe] * a[m]:
                return n
            continue
        if e == 1:
            continue
        if level % p == 0:
            if a[n] != a[p] * a[n // p]:
                return n
        else:
            if a[n] != a[p] * a[n // p] - p ** (weight - 1) * a[n // (p * p)]:
                return n
    return None


@dataclass(frozen=True, eq=False)
class Eigenform:
    """Normalized Hecke eigenform with exact integer coefficients a(n), n < precision."""

    weight: int
    level: int
    a: tuple[int, ...]
    name: str = ""
    lam: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.a) < 2 or self.a[1] != 1:
            raise IntegrityError("eigenform must satisfy a(1) = 1")
        n = np.arange(len(self.a), dtype=float)
        with np.errstate(divide="ignore"):
            scale = n ** (-(self.weight - 1) / 2.0)
        scale[0] = 0.0
        vals = np.array([float(x) for x in self.a]) * scale
        vals.flags.writeable = False
        object.__setattr__(self, "lam", vals)

    @property
    def precision(self) -> int:
        return len(self.a)

    @cached_property
    def _spf(self) -> list[int]:
        return _smallest_prime_factors(max(self.precision - 1, 2))

    def coefficient(self, n: int) -> int:
        if not 1 <= n < self.precision:
            raise PrecisionError(f"a({n}) beyond precision {self.precision}", n + 1)
        return self.a[n]

    def lambda_prime_power(self, p: int, e: int) -> float:
        """lambda(p^e) from lambda(p) by the Hecke recursion."""
        if p ** e < self.precision:
            return float(self.lam[p ** e])
        if p >= self.precision:
            raise PrecisionError(f"eigenvalue at prime {p} unavailable (precision {self.precision})", p + 1)
        lp = float(self.lam[p])
        if self.level % p == 0:
            return lp ** e
        prev, cur = 1.0, lp
        for _ in range(e - 1):
            prev, cur = cur, lp * cur - prev
        return cur

    def lambda_(self, n: int) -> float:
        """lambda(n), extended multiplicatively past the stored precision."""
        if n < 1:
            raise ArgumentError("n must be positive")
        if n < self.precision:
            return float(self.lam[n])
        out = 1.0
        for p, e in factorize(n).items():
            out *= self.lambda_prime_power(p, e)
        return out

    def lambda_array(self, n_max: int) -> np.ndarray:
        """lambda(0..n_max) as floats; index 0 is 0."""
        if n_max < self.precision:
            return np.array(self.lam[: n_max + 1])
        return np.array([0.0] + [self.lambda_(n) for n in range(1, n_max + 1)])

    def to_json(self) -> str:
        rows = [{"n": n, "a": str(self.a[n]), "lambda": float(self.lam[n])}
                for n in range(1, self.precision)]
        return json.dumps(rows)

    @classmethod
    def from_json(cls, text: str, weight: int, level: int, name: str = "",
                  verify: bool = True) -> Eigenform:
        rows = json.loads(text)
        n_max = max(int(r["n"]) for r in rows)
        a = [0] * (n_max + 1)
        for r in rows:
            a[int(r["n"])] = int(r["a"])
        if verify:
            bad = verify_hecke(a, weight, level)
            if bad is not None:
                raise IntegrityError(f"imported table violates Hecke relations at n={bad}")
        return cls(weight, level, tuple(a), name)


def factorize(n: int) -> dict[int, int]:
    """Trial-division factorization; inputs here are desk scale."""
    out: dict[int, int] = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def delta_eigenform(precision: int) -> Eigenform:
    return Eigenform(12, 1, delta_qexp(precision).coeffs, "Delta")


def level_one_eigenform(weight: int, precision: int) -> Eigenform:
    """The unique normalized eigenform of S_weight(1) for one-dimensional spaces."""
    if weight not in LEVEL_ONE_WEIGHTS:
        raise ArgumentError(f"weight {weight} is not in the one-dimensional list {LEVEL_ONE_WEIGHTS}")
    if precision < 2:
        raise ArgumentError("precision must be at least 2")
    delta = delta_qexp(precision)
    e4_power, e6_power = {12: (0, 0), 16: (1, 0), 18: (0, 1), 20: (2, 0),
                          22: (1, 1), 26: (2, 1)}[weight]
    series = delta
    if e4_power:
        series = series * eisenstein_e4(precision) ** e4_power
    if e6_power:
        series = series * eisenstein_e6(precision)
    bad = verify_hecke(series.coeffs, weight, 1)
    if bad is not None:
        raise IntegrityError(f"weight {weight} product failed the Hecke check at n={bad}")
    return Eigenform(weight, 1, series.coeffs, f"level1_weight{weight}")


def eta_quotient(exponent_pairs: Iterable[tuple[int, int]], weight: int, level: int,
                 precision: int) -> Eigenform:
    """prod eta(m z)^r, verified to be a Hecke eigenform up to the precision."""
    pairs = [(int(m), int(r)) for m, r in exponent_pairs]
    if any(m < 1 for m, _ in pairs):
        raise ArgumentError("eta scales must be positive")
    if sum(r for _, r in pairs) != 2 * weight:
        raise ArgumentError("exponents must sum to twice the weight")
    shift24 = sum(m * r for m, r in pairs)
    if shift24 % 24 or shift24 <= 0:
        raise ArgumentError("sum of m*r must be a positive multiple of 24")
    if any(level % m for m, _ in pairs):
        raise ArgumentError("every eta scale must divide the level")
    lead = shift24 // 24
    need = precision - lead + 1
    series = IntegerPowerSeries.one(max(need, 1))
    for m, r in pairs:
        base = euler_product(need // m + 1).substitute_power(m, need)
        series = series * base ** r
    a = (0,) * lead + series.coeffs
    a = a[:precision]
    if lead != 1:
        a = a[lead - 1:]
    bad = verify_hecke(a, weight, level)
    if bad is not None:
        raise IntegrityError(f"eta quotient is not a Hecke eigenform (fails at n={bad})")
    return Eigenform(weight, level, tuple(a), "eta" + "".join(f"({m})^{r}" for m, r in pairs))


def reference_newform(precision: int) -> Eigenform:
    """eta(z)^4 eta(5z)^4, the weight-4 newform of level 5."""
    return eta_quotient([(1, 4), (5, 4)], 4, 5, precision)


# ------------------------------------------------------------- symmetric square

@dataclass(frozen=True, eq=False)
class SymSquareCoefficients:
    """The GL(3) coefficients A_F(m, n) of the symmetric square lift."""

    source: Eigenform
    M: int
    N: int
    row: np.ndarray = field(repr=False)  # A_F(1, n), n <= max(M, N)

    @classmethod
    def build(cls, f: Eigenform, M: int, N: int) -> SymSquareCoefficients:
        if f.level != 1:
            raise ArgumentError("symmetric square coefficients need a level-one form")
        size = max(M, N, 1)
        row = _sym_square_row(f, size)
        row.flags.writeable = False
        return cls(f, M, N, row)

    def a1(self, n: int) -> float:
        """A_F(1, n) = A_F(n, 1)."""
        if n == 0:
            return 0.0
        if not 1 <= abs(n) < len(self.row):
            raise PrecisionError(f"A_F(1, {n}) beyond table size {len(self.row) - 1}", abs(n))
        return float(self.row[abs(n)])

    def __call__(self, m: int, n: int) -> float:
        """A_F(m, n) via the Moebius-Hecke relation."""
        m, n = abs(m), abs(n)
        if m == 0 or n == 0:
            return 0.0
        g = math.gcd(m, n)
        total = 0.0
        for d in _divisors(g):
            mu = _mobius(d)
            if mu:
                total += mu * self.a1(m // d) * self.a1(n // d)
        return total

    def table(self) -> dict[tuple[int, int], float]:
        return {(m, n): self(m, n) for m in range(1, self.M + 1) for n in range(1, self.N + 1)}


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _mobius(n: int) -> int:
    out = 1
    for e in factorize(n).values():
        if e > 1:
            return 0
        out = -out
    return out


def _sym_square_row(f: Eigenform, size: int) -> np.ndarray:
    """A_F(1, n) for n <= size via multiplicativity in n.

    At a prime p the local sequence satisfies
    A(p^e) = (lambda(p)^2 - 1) (A(p^{e-1}) - A(p^{e-2})) + A(p^{e-3}).
    """
    primes = _small_primes(size)
    if primes and primes[-1] >= f.precision:
        missing = next(p for p in primes if p >= f.precision)
        raise PrecisionError(f"lambda_f({missing}) needed for A_F(1, {missing})", missing + 1)
    row = np.zeros(size + 1)
    row[1] = 1.0
    spf = _smallest_prime_factors(max(size, 2))
    local: dict[int, list[float]] = {}
    for p in primes:
        t = float(f.lam[p]) ** 2 - 1.0
        e_max = int(math.log(size) / math.log(p)) + 1
        seq = [1.0, t]
        for e in range(2, e_max + 1):
            prev3 = seq[e - 3] if e >= 3 else 0.0
            seq.append(t * (seq[e - 1] - seq[e - 2]) + prev3)
        local[p] = seq
    for n in range(2, size + 1):
        p = spf[n]
        m, e = n, 0
        while m % p == 0:
            m //= p
            e += 1
        row[n] = local[p][e] * row[m]
    return row


def sym_square(f: Eigenform, M: int, N: int) -> SymSquareCoefficients:
    return SymSquareCoefficients.build(f, M, N)
