"""Multiplicative functions and Kloosterman sums.

Single Kloosterman sums are split by the Chinese remainder theorem into
prime-power pieces, each summed directly with a cached inverse table.
``KloostermanBatch`` evaluates many (m, n) pairs over a common range of
moduli, using for each prime power q the table u -> S(1, u; q) obtained by
one FFT.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import ArgumentError

INVERSE_TABLE_LIMIT = 10 ** 6
_inverse_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_cache_lock = threading.Lock()


# ------------------------------------------------------------ multiplicative

def factorize(n: int) -> dict[int, int]:
    if n < 1:
        raise ArgumentError("factorize needs a positive integer")
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


def divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in factorize(n).items():
        divs = [d * p ** j for d in divs for j in range(e + 1)]
    return sorted(divs)


def mobius(n: int) -> int:
    out = 1
    for e in factorize(n).values():
        if e > 1:
            return 0
        out = -out
    return out


def euler_phi(n: int) -> int:
    out = n
    for p in factorize(n):
        out = out // p * (p - 1)
    return out


def divisor_count(n: int) -> int:
    out = 1
    for e in factorize(n).values():
        out *= e + 1
    return out


def nu(n: int) -> Fraction:
    """n * prod_{p | n} (1 + 1/p), exactly."""
    out = Fraction(n)
    for p in factorize(n):
        out *= Fraction(p + 1, p)
    return out


def is_squarefree(n: int) -> bool:
    return all(e == 1 for e in factorize(n).values())


def is_prime(n: int) -> bool:
    return n >= 2 and factorize(n) == {n: 1}


def primes_up_to(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(n ** 0.5) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return [int(p) for p in np.nonzero(sieve)[0]]


def smallest_prime_factor_table(n: int) -> np.ndarray:
    spf = np.arange(n + 1, dtype=np.int64)
    for p in range(2, int(n ** 0.5) + 1):
        if spf[p] == p:
            block = spf[p * p::p]
            mask = block == np.arange(p * p, n + 1, p)
            block[mask] = p
            spf[p * p::p] = block
    return spf


@dataclass(frozen=True)
class MultiplicativeTables:
    """Sieved mu, phi, tau and nu on 1..bound (index 0 unused)."""

    bound: int
    mu: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    nu_num: np.ndarray = field(repr=False)
    nu_den: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, bound: int) -> MultiplicativeTables:
        if bound < 1:
            raise ArgumentError("bound must be positive")
        spf = smallest_prime_factor_table(max(bound, 2))
        mu = np.zeros(bound + 1, dtype=np.int64)
        phi = np.zeros(bound + 1, dtype=np.int64)
        tau = np.zeros(bound + 1, dtype=np.int64)
        nun = np.zeros(bound + 1, dtype=np.int64)
        mu[1] = phi[1] = tau[1] = nun[1] = 1
        for n in range(2, bound + 1):
            p = int(spf[n])
            m, e = n, 0
            while m % p == 0:
                m //= p
                e += 1
            pe = p ** e
            mu[n] = 0 if e > 1 else -mu[m]
            phi[n] = phi[m] * (pe - pe // p)
            tau[n] = tau[m] * (e + 1)
            nun[n] = nun[m] * (pe // p) * (p + 1)
        den = np.ones(bound + 1, dtype=np.int64)
        den[0] = 0
        # nu(n) = prod p^(e-1)(p+1) is integral; the denominator column stays 1
        return cls(bound, mu, phi, tau, nun, den)

    def nu(self, n: int) -> Fraction:
        return Fraction(int(self.nu_num[n]), int(self.nu_den[n]))


# ------------------------------------------------------------- modular tools

def modpow_array(base: np.ndarray, exponent: int, modulus: int) -> np.ndarray:
    """Elementwise base**exponent mod modulus for modulus < 3e9."""
    result = np.ones_like(base, dtype=np.int64)
    b = np.asarray(base, dtype=np.int64) % modulus
    e = exponent
    while e:
        if e & 1:
            result = (result * b) % modulus
        e >>= 1
        if e:
            b = (b * b) % modulus
    return result


def _units_and_inverses(q: int, cache: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Units mod q and their inverses; cached below the table limit."""
    hit = _inverse_cache.get(q)
    if hit is not None:
        return hit
    x = np.arange(q, dtype=np.int64)
    if q == 1:
        units = np.zeros(1, dtype=np.int64)
        inv = np.zeros(1, dtype=np.int64)
    else:
        units = x[np.gcd(x, q) == 1]
        inv = modpow_array(units, euler_phi(q) - 1, q)
    units.flags.writeable = False
    inv.flags.writeable = False
    if cache and q <= INVERSE_TABLE_LIMIT:
        with _cache_lock:
            _inverse_cache.setdefault(q, (units, inv))
    return units, inv


def _exp_sum(phases: np.ndarray, q: int) -> float:
    # the phase is reduced mod q before scaling, so the angle stays in [0, 2pi)
    return float(np.cos((2.0 * np.pi / q) * (phases % q)).sum())


def kloosterman_direct(m: int, n: int, c: int) -> float:
    """S(m, n; c) by summing over all units mod c (no factorization)."""
    if c < 1:
        raise ArgumentError("modulus must be positive")
    if c == 1:
        return 1.0
    units, inv = _units_and_inverses(c)
    return _exp_sum((m % c) * units + (n % c) * inv, c)


def kloosterman(m: int, n: int, c: int) -> float:
    """S(m, n; c) through the CRT factorization into prime-power moduli."""
    if c < 1:
        raise ArgumentError("modulus must be positive")
    out = 1.0
    for p, e in factorize(c).items() if c > 1 else ():
        q = p ** e
        r = c // q
        rbar = pow(r, -1, q)
        out *= kloosterman_direct(m * rbar, n * rbar, q)
    return out


def ramanujan(n: int, c: int) -> float:
    """Ramanujan sum S(0, n; c)."""
    if c < 1:
        raise ArgumentError("modulus must be positive")
    g = math.gcd(n, c)
    return float(sum(d * mobius(c // d) for d in divisors(g)))


def weil_bound(m: int, n: int, c: int) -> float:
    return divisor_count(c) * math.sqrt(math.gcd(math.gcd(m, n), c)) * math.sqrt(c)


def factor_identity_check(n: int, c: int, P: int) -> tuple[float, float]:
    """S(nP, 1; cP) against -S(n, Pbar; c) for (c, P) = 1."""
    if not is_prime(P):
        raise ArgumentError("P must be prime")
    if math.gcd(c, P) != 1:
        raise ArgumentError("the factor identity needs (c, P) = 1; see factor_vanishing_check")
    lhs = kloosterman_direct(n * P, 1, c * P)
    pbar = pow(P, -1, c) if c > 1 else 0
    rhs = -kloosterman_direct(n, pbar, c)
    return lhs, rhs


def factor_vanishing_check(n: int, c: int, P: int) -> float:
    """S(nP, 1; cP) when P | c; the sum vanishes identically."""
    if not is_prime(P):
        raise ArgumentError("P must be prime")
    if c % P:
        raise ArgumentError("vanishing pattern needs P | c")
    return kloosterman_direct(n * P, 1, c * P)


# ------------------------------------------------------------------ batches

def primitive_root(p: int) -> int:
    if p == 2:
        return 1
    odd = list(factorize(p - 1))
    g = 2
    while any(pow(g, (p - 1) // r, p) == 1 for r in odd):
        g += 1
    return g


def _prime_units_inverses(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Units g^k mod p in discrete-log order and their inverses g^-k."""
    g = primitive_root(p)
    order = p - 1
    block = math.isqrt(order) + 1
    small = np.empty(block, dtype=np.int64)
    x = 1
    for i in range(block):
        small[i] = x
        x = x * g % p
    step = x  # g^block
    big = np.empty(order // block + 1, dtype=np.int64)
    y = 1
    for j in range(len(big)):
        big[j] = y
        y = y * step % p
    powers = ((big[:, None] * small[None, :]) % p).ravel()[:order]
    inverses = powers[(-np.arange(order)) % order]
    return powers, inverses


def kloosterman_unit_table(q: int) -> np.ndarray:
    """T[u] = S(1, u; q) for all residues u mod q, via one inverse FFT."""
    if q == 1:
        return np.ones(1)
    if is_prime(q):
        units, inv = _prime_units_inverses(q)
    else:
        units, inv = _units_and_inverses(q, cache=False)
    # h[y] = e(ybar/q) satisfies h[-y] = conj h[y], so with r = Re h + Im h the
    # real transform R = rfft(r) gives S(1,u;q) = Re R[u] + Im R[u] and S(1,-u;q) = Re R[u] - Im R[u]
    r = np.zeros(q)
    r[units] = np.sqrt(2.0) * np.sin((2 * np.pi / q) * inv + np.pi / 4)
    R = sfft.rfft(r)
    out = np.empty(q)
    half = len(R)
    out[:half] = R.real + R.imag
    out[half:] = (R.real - R.imag)[q - half:0:-1]
    return out


class KloostermanBatch:
    """S(m, n; c) for many pairs over a fixed list of moduli.

    For each prime power q exactly dividing c = q r the local factor is
    S(m, n rbar^2; q), which equals T_q[m n rbar^2] whenever m or n is a unit
    mod q. Tables T_q are cached up to ``cache_entries`` entries in total.
    """

    def __init__(self, moduli: Iterable[int], cache_entries: int = 20_000_000):
        self.moduli = np.asarray(sorted(set(int(c) for c in moduli)), dtype=np.int64)
        if len(self.moduli) and self.moduli[0] < 1:
            raise ArgumentError("moduli must be positive")
        self.cache_entries = cache_entries
        self._tables: dict[int, np.ndarray] = {}
        self._cached = 0
        self._direct_cache: dict[tuple[int, int, int], float] = {}
        self._groups = self._prime_power_incidence()

    def _prime_power_incidence(self) -> list[tuple[int, int, np.ndarray, np.ndarray]]:
        top = int(self.moduli[-1]) if len(self.moduli) else 1
        spf = smallest_prime_factor_table(max(top, 2))
        groups: dict[int, tuple[list[int], list[int]]] = {}
        for idx, c in enumerate(self.moduli.tolist()):
            rest = c
            while rest > 1:
                p = int(spf[rest])
                q = 1
                while rest % p == 0:
                    rest //= p
                    q *= p
                rows, cof = groups.setdefault(q, ([], []))
                rows.append(idx)
                cof.append(c // q)
        out = []
        for q in sorted(groups):
            rows, cof = groups[q]
            rs = np.array(cof, dtype=np.int64) % q
            rbar = modpow_array(rs, euler_phi(q) - 1, q)
            out.append((q, _prime_of(q), np.array(rows, dtype=np.int64), (rbar * rbar) % q))
        return out

    def _table(self, q: int) -> np.ndarray:
        t = self._tables.get(q)
        if t is None:
            t = kloosterman_unit_table(q)
            if self._cached + q <= self.cache_entries:
                self._tables[q] = t
                self._cached += q
        return t

    def _direct(self, q: int, m: int, n: int) -> float:
        key = (q, m % q, n % q)
        v = self._direct_cache.get(key)
        if v is None:
            v = kloosterman_direct(key[1], key[2], q)
            self._direct_cache[key] = v
        return v

    def matrix(self, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
        """Array of shape (len(moduli), len(pairs))."""
        m_arr = np.array([int(m) for m, _ in pairs], dtype=np.int64)
        n_arr = np.array([int(n) for _, n in pairs], dtype=np.int64)
        out = np.ones((len(self.moduli), len(pairs)))
        for q, p, rows, rbar2 in self._groups:
            unit_pair = (m_arr % p != 0) | (n_arr % p != 0)
            if unit_pair.any():
                mn = (m_arr % q) * (n_arr % q) % q
                vals = self._table(q)[(mn[None, :] * rbar2[:, None]) % q]
            else:
                vals = np.empty((len(rows), len(pairs)))
            bad = np.nonzero(~unit_pair)[0]
            if len(bad):
                classes, where = np.unique(rbar2, return_inverse=True)
                for j in bad:
                    m, n = int(m_arr[j]), int(n_arr[j])
                    col = np.array([self._direct(q, m, n * int(u)) for u in classes])
                    vals[:, j] = col[where]
            out[rows] *= vals
        return out


def _prime_of(q: int) -> int:
    return next(iter(factorize(q)))
