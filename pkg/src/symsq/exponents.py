"""Exact exponent bookkeeping for bounds built from monomials in k, P, L, Y (and ell).

Constants and (kP)^eps factors are dropped. Comparisons happen on the slice
k = P^t with t rational and P -> infinity, where a monomial k^a P^b L^0 Y^0 is
P^(a t + b) and an inequality between monomials is a linear inequality in t.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import ArgumentError

VARS = ("k", "P", "L", "Y", "ell")
Rational = Fraction | int


class NoSolutionError(ArgumentError):
    """equate_terms: the variable does not separate the two monomials."""


def _frac(x) -> Fraction:
    if isinstance(x, float):
        raise TypeError("exponents must be exact (int, Fraction or 'p/q' string)")
    return Fraction(x)


@dataclass(frozen=True)
class Monomial:
    exps: tuple[tuple[str, Fraction], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, Rational] | None = None, **kw: Rational) -> Monomial:
        items = dict(mapping or {})
        items.update(kw)
        for v in items:
            if v not in VARS:
                raise ArgumentError(f"unknown variable {v!r}")
        clean = tuple(sorted(((v, _frac(e)) for v, e in items.items() if _frac(e) != 0),
                             key=lambda p: VARS.index(p[0])))
        return cls(clean)

    def __getitem__(self, var: str) -> Fraction:
        return dict(self.exps).get(var, Fraction(0))

    def as_dict(self) -> dict[str, Fraction]:
        return dict(self.exps)

    def __mul__(self, other: Monomial) -> Monomial:
        d = self.as_dict()
        for v, e in other.exps:
            d[v] = d.get(v, Fraction(0)) + e
        return Monomial.of(d)

    def __truediv__(self, other: Monomial) -> Monomial:
        return self * other ** -1

    def __pow__(self, e: Rational) -> Monomial:
        e = _frac(e)
        return Monomial.of({v: x * e for v, x in self.exps})

    def substitute(self, var: str, value: Monomial) -> Monomial:
        e = self[var]
        rest = Monomial.of({v: x for v, x in self.exps if v != var})
        return rest * value ** e

    def variables(self) -> set[str]:
        return {v for v, _ in self.exps}

    def on_slice(self) -> tuple[Fraction, Fraction]:
        """(a, b) with k^a P^b = P^(a t + b) on k = P^t; only k and P may occur."""
        extra = self.variables() - {"k", "P"}
        if extra:
            raise ArgumentError(f"monomial still involves {sorted(extra)}")
        return self["k"], self["P"]

    def __str__(self) -> str:
        if not self.exps:
            return "1"
        return " ".join(v if e == 1 else f"{v}^{e}" for v, e in self.exps)


ONE = Monomial()
k, P, L, Y, ELL = (Monomial.of({v: 1}) for v in VARS)
Q = k ** 4 * P ** 3
CONVEXITY = k * P ** Fraction(3, 4)


@dataclass(frozen=True)
class MonomialBound:
    """A sum (equivalently a max) of monomials."""

    terms: tuple[Monomial, ...]

    @classmethod
    def of(cls, terms: Iterable[Monomial]) -> MonomialBound:
        out: list[Monomial] = []
        for t in terms:
            if t not in out:
                out.append(t)
        return cls(tuple(out))

    def substitute(self, var: str, value: Monomial) -> MonomialBound:
        return MonomialBound.of(t.substitute(var, value) for t in self.terms)

    def __add__(self, other: MonomialBound) -> MonomialBound:
        return MonomialBound.of(self.terms + other.terms)

    def scale(self, m: Monomial) -> MonomialBound:
        return MonomialBound.of(t * m for t in self.terms)

    def __str__(self) -> str:
        return " + ".join(str(t) for t in self.terms)


def equate_terms(t1: Monomial, t2: Monomial, var: str) -> Monomial:
    """The monomial value of ``var`` solving t1 = t2."""
    e1, e2 = t1[var], t2[var]
    if e1 == e2:
        raise NoSolutionError(f"{var} has the same exponent {e1} on both sides")
    r1 = Monomial.of({v: x for v, x in t1.exps if v != var})
    r2 = Monomial.of({v: x for v, x in t2.exps if v != var})
    return (r2 / r1) ** (Fraction(1) / (e1 - e2))


def substitute_and_reduce(b: MonomialBound, assignments: Mapping[str, Monomial]) -> MonomialBound:
    """Apply the assignments in order (later ones may feed on earlier ones)."""
    out = b
    for var, value in assignments.items():
        out = out.substitute(var, value)
    return out


# --------------------------------------------------------------- intervals

@dataclass(frozen=True)
class Interval:
    """t-interval with rational (or infinite, None) ends and open/closed flags."""

    lo: Fraction | None
    hi: Fraction | None
    lo_closed: bool = False
    hi_closed: bool = False

    @property
    def empty(self) -> bool:
        if self.lo is None or self.hi is None:
            return False
        return self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed))

    def intersect(self, other: Interval) -> Interval:
        lo, lc = self.lo, self.lo_closed
        if other.lo is not None and (lo is None or other.lo > lo or (other.lo == lo and not other.lo_closed)):
            lo, lc = other.lo, other.lo_closed if (lo is None or other.lo != lo) else (lc and other.lo_closed)
        hi, hc = self.hi, self.hi_closed
        if other.hi is not None and (hi is None or other.hi < hi or (other.hi == hi and not other.hi_closed)):
            hi, hc = other.hi, other.hi_closed if (hi is None or other.hi != hi) else (hc and other.hi_closed)
        return Interval(lo, hi, lc, hc)

    def contains(self, other: Interval) -> bool:
        """other is a subset of self."""
        if other.empty:
            return True
        if self.lo is not None:
            if other.lo is None or other.lo < self.lo:
                return False
            if other.lo == self.lo and other.lo_closed and not self.lo_closed:
                return False
        if self.hi is not None:
            if other.hi is None or other.hi > self.hi:
                return False
            if other.hi == self.hi and other.hi_closed and not self.hi_closed:
                return False
        return True

    def as_strings(self) -> list[str | None]:
        return [None if self.lo is None else str(self.lo), None if self.hi is None else str(self.hi)]

    def __str__(self) -> str:
        a = "(" if not self.lo_closed else "["
        b = ")" if not self.hi_closed else "]"
        return f"{a}{'-inf' if self.lo is None else self.lo}, {'inf' if self.hi is None else self.hi}{b}"


ALL_T = Interval(None, None)


def linear_region(a: Fraction, b: Fraction, strict: bool) -> Interval:
    """{t : a t + b < 0} (or <= 0 when not strict)."""
    if a == 0:
        ok = b < 0 or (b == 0 and not strict)
        return ALL_T if ok else Interval(Fraction(0), Fraction(0))
    root = -b / a
    if a > 0:
        return Interval(None, root, False, not strict)
    return Interval(root, None, not strict, False)


def inequality_region(lhs: Monomial, rhs: Monomial, strict: bool = False) -> Interval:
    """t-region on k = P^t where lhs <= rhs (lhs < rhs if strict) as P -> infinity."""
    a, b = (lhs / rhs).on_slice()
    return linear_region(a, b, strict)


def subconvex_range(bound: Monomial | MonomialBound,
                    validity: Interval = Interval(Fraction(0), None)) -> Interval:
    """t where every term of ``bound`` is below the convexity bound k P^(3/4)."""
    terms = bound.terms if isinstance(bound, MonomialBound) else (bound,)
    region = validity
    for t in terms:
        region = region.intersect(inequality_region(t, CONVEXITY, strict=True))
    return region


# --------------------------------------------------------- the bound chain

def twisted_moment_terms() -> MonomialBound:
    """The five-term twisted moment bound with ell <= 16 L^4 absorbed into L."""
    return MonomialBound.of([
        ELL ** Fraction(-1, 2),
        Y ** Fraction(1, 2) * Q ** Fraction(1, 4) / P,
        Q ** Fraction(1, 4) / (Y ** Fraction(1, 2) * P ** Fraction(3, 2)),
        L ** Fraction(5, 2) * Y ** Fraction(3, 8) * k * Q ** Fraction(3, 16) / P,
        L ** 4 * k * Q ** Fraction(1, 4) / (Y ** Fraction(1, 2) * P ** Fraction(3, 2)),
    ])


def reduced_terms() -> MonomialBound:
    """After the a-priori assumption removes the two pure-Y terms."""
    t = twisted_moment_terms().terms
    return MonomialBound.of([t[0], t[3], t[4]])


def optimal_Y() -> Monomial:
    t = reduced_terms().terms
    return equate_terms(t[1], t[2], "Y")


def theorem_terms() -> MonomialBound:
    """1/sqrt(ell) + L^{22/7} k^{13/7} P^{-4/7}."""
    b = reduced_terms().substitute("Y", optimal_Y())
    return MonomialBound.of([b.terms[0], b.terms[1]])


def amplified_terms() -> MonomialBound:
    """Trivial average over ell_1, ell_2: L from the 1/sqrt(ell) part, L^2 times the rest."""
    thm = theorem_terms().terms
    return MonomialBound.of([L, L ** 2 * thm[1]])


def individual_terms() -> MonomialBound:
    """Divide by |A_{g0}|^2 ~ L^2 and multiply by omega ~ P."""
    return amplified_terms().scale(P / L ** 2)


def optimal_L() -> Monomial:
    t = individual_terms().terms
    return equate_terms(t[0], t[1], "L")


def final_bound() -> Monomial:
    return individual_terms().terms[0].substitute("L", optimal_L())


def unamplified_bound() -> MonomialBound:
    """L = 1: P + k^{13/7} P^{3/7}."""
    return individual_terms().substitute("L", ONE)


def amplified_window() -> Interval:
    """Where amplification pays: the L = 1 theorem bound is not Lindelof-on-average, k > P^{4/13}."""
    return inequality_region(theorem_terms().terms[1].substitute("L", ONE), ONE)


def corollary_branches() -> list[tuple[MonomialBound, Interval]]:
    lindelof = amplified_window()
    first = Interval(None, lindelof.hi, False, True)
    second = Interval(lindelof.hi, None, False, False)
    return [(MonomialBound.of([final_bound()]), first), (unamplified_bound(), second)]


def corollary_range() -> Interval:
    """Union of subconvex pieces of both branches (they abut at 4/13)."""
    pieces = [subconvex_range(b, v) for b, v in corollary_branches()]
    lo = min(p.lo for p in pieces if p.lo is not None)
    hi = max(p.hi for p in pieces if p.hi is not None)
    return Interval(lo, hi)


def delta_width(r: Interval | None = None) -> Fraction:
    r = r or corollary_range()
    return (r.hi - r.lo) / 2


# ----------------------------------------------------------- assumptions

ASSUMPTION_ON_L = ("assumption on L", lambda Lm, Ym: (Lm, k ** Fraction(-2, 5) * P ** Fraction(3, 20)))
A_PRIORI = ("a priori", lambda Lm, Ym: (Lm ** 2 * Ym ** Fraction(1, 2) * Q ** Fraction(1, 4), P))


@dataclass
class AssumptionVerdict:
    name: str
    verdict: bool
    region: Interval
    binding_t: Fraction | None

    def as_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict,
                "binding_t": None if self.binding_t is None else str(self.binding_t),
                "region": str(self.region)}


def assumption_audit(Lm: Monomial, Ym: Monomial, t_range: Interval) -> list[AssumptionVerdict]:
    """Each assumption as an exact exponent inequality on k = P^t over ``t_range``."""
    out = []
    for name, build in (ASSUMPTION_ON_L, A_PRIORI):
        lhs, rhs = build(Lm, Ym)
        region = inequality_region(lhs, rhs, strict=False)
        ok = region.contains(t_range)
        a, b = (lhs / rhs).on_slice()
        binding = None if a == 0 else -b / a
        out.append(AssumptionVerdict(name, ok, region, binding))
    return out


def length_branches() -> list[tuple[Monomial, Monomial, Interval]]:
    """(L, Y, t-range) for both branches of the amplifier length."""
    Yopt = optimal_Y()
    Lopt = optimal_L()
    cor = corollary_range()
    lind = amplified_window().hi
    return [(Lopt, Yopt.substitute("L", Lopt), Interval(cor.lo, lind, False, True)),
            (ONE, Yopt.substitute("L", ONE), Interval(lind, cor.hi, False, False))]


# ---------------------------------------------------------- simplified case

def sketch_bounds(kappa: int) -> tuple[Monomial, Monomial]:
    """First-sum and dual-sum bounds of the large-kappa sketch."""
    s1 = P ** Fraction(1, 2) * (Y * Q ** Fraction(1, 2) / P ** 2) ** kappa
    s2 = Q ** Fraction(1, 4) / P * (k / (Y * P) ** Fraction(1, 2))
    return s1, s2


def sketch_first_regime() -> tuple[Monomial, Interval]:
    """Y from 1 = dual bound; valid where the first-sum bound is <= 1 < Q^{1/4}/P."""
    _, s2 = sketch_bounds(2)
    Ys = equate_terms(ONE, s2, "Y")
    return Ys, inequality_region(ONE, Q ** Fraction(1, 4) / P, strict=True)


def sketch_first_regime_upper(kappa: int) -> Interval:
    s1, _ = sketch_bounds(kappa)
    Ys, lower = sketch_first_regime()
    return lower.intersect(inequality_region(s1.substitute("Y", Ys), ONE))


def sketch_second_regime(kappa: int) -> tuple[Monomial, Interval]:
    s1, s2 = sketch_bounds(kappa)
    Ys = equate_terms(s1, s2, "Y")
    s1y = s1.substitute("Y", Ys)
    region = inequality_region(ONE, s1y).intersect(
        inequality_region(s1y, Q ** Fraction(1, 4) / P, strict=True))
    return Ys, region


def sketch_second_regime_closed_form(kappa: int) -> Monomial:
    kap = Fraction(kappa)
    return Monomial.of(k=(4 - 4 * kap) / (2 * kap + 1), P=(2 * kap - 5) / (4 * kap + 2))


def sketch_upper_endpoint(kappa: int) -> Fraction:
    return Fraction(3 * (2 * kappa - 1), 4 * (4 * kappa - 1))


# -------------------------------------------------------------------- report

def exponent_report(kappa: int = 2) -> dict:
    branches = length_branches()
    assumptions = []
    for i, (Lm, Ym, rng) in enumerate(branches, 1):
        for v in assumption_audit(Lm, Ym, rng):
            d = v.as_dict()
            d["name"] = f"{d['name']} (branch {i}, t in {rng})"
            assumptions.append(d)
    Ys2, reg2 = sketch_second_regime(kappa)
    cor = corollary_range()
    return {
        "bound_terms": [str(t) for t in twisted_moment_terms().terms],
        "theorem_terms": [str(t) for t in theorem_terms().terms],
        "amplified_terms": [str(t) for t in amplified_terms().terms],
        "Y_opt": str(optimal_Y()),
        "L_opt": str(optimal_L()),
        "final_bound": str(final_bound()),
        "subconvex_interval": cor.as_strings(),
        "delta_max": str(delta_width(cor)),
        "lindelof_on_average_up_to": str(amplified_window().hi),
        "sketch": {"kappa": kappa, "Y_first": str(sketch_first_regime()[0]),
                   "first_range": str(sketch_first_regime_upper(kappa)),
                   "Y_second": str(Ys2), "second_range": str(reg2)},
        "assumptions": assumptions,
    }


def exponent_report_json(kappa: int = 2) -> str:
    return json.dumps(exponent_report(kappa), sort_keys=True)
