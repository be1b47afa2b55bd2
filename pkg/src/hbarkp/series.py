"""Exact sparse arithmetic for graded truncated formal series.

A :class:`GradedSymbol` is a finite map from monomials

    hbar^h  xi^k  (log xi)^l  x^a  t_1^b_1 ... t_T^b_T

to exact rationals (``gmpy2.mpq``).  Everything else in the package is
built on this commutative ring.  Truncation is never silent: each symbol
carries a :class:`TrustRecord` describing which of its retained
coefficients are guaranteed to equal the coefficients of the untruncated
series.

Monomials are stored as flat tuples ``(h, xi, logxi, x, t_1, ..., t_T)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple

from gmpy2 import mpq

from .errors import (
    LogInProjection,
    LogLogProduct,
    MonomialOutOfWindow,
    NonNegativePowerInIntegrand,
    NotDivisibleByHbar,
    PolicyMismatch,
    SeriesInversionError,
    TrustUnderflow,
)

H, XI, LOG, X = 0, 1, 2, 3
T0 = 4  # first t exponent
INF = math.inf

ZERO = mpq(0)
ONE = mpq(1)


def rational(value) -> mpq:
    """Coerce ``int``, ``Fraction``, ``mpq`` or a ``"p/q"`` string to ``mpq``."""
    if isinstance(value, str):
        return mpq(value.strip())
    if isinstance(value, float):
        raise TypeError("floating-point coefficients are not accepted")
    return mpq(value)


def format_rational(c) -> str:
    c = mpq(c)
    return f"{c.numerator}/{c.denominator}"


class Monomial(NamedTuple):
    h: int = 0
    xi: int = 0
    logxi: int = 0
    x: int = 0
    t: tuple = ()

    def key(self, num_times: int) -> tuple:
        t = tuple(self.t) + (0,) * (num_times - len(self.t))
        if len(t) != num_times:
            raise MonomialOutOfWindow(f"monomial {self} has more than {num_times} times")
        return (self.h, self.xi, self.logxi, self.x) + t

    @classmethod
    def from_key(cls, key: tuple) -> "Monomial":
        return cls(key[H], key[XI], key[LOG], key[X], tuple(key[T0:]))


@dataclass(frozen=True)
class TruncationPolicy:
    """Retention window shared by all symbols that interact.

    ``hbar_floor`` is the lowest admissible hbar exponent.  It is 0 for
    every public symbol; internal pre-regrouping computations (star
    exponentials) use a relaxed copy with a negative floor.
    """

    hbar_max: int
    xi_min: int
    t_total_max: int
    x_max: int
    num_times: int = 1
    xi_max_hint: int | None = None
    hbar_floor: int = 0

    def __post_init__(self):
        if self.hbar_max < self.hbar_floor or self.xi_min > 0:
            raise ValueError(f"empty window: {self}")
        if self.t_total_max < 0 or self.x_max < 0 or self.num_times < 1:
            raise ValueError(f"empty window: {self}")

    def violation(self, key: tuple) -> str | None:
        """Name of the first window constraint ``key`` violates, or None."""
        if len(key) != T0 + self.num_times:
            return "arity"
        if key[XI] < self.xi_min:
            return "xi"
        if key[H] > self.hbar_max:
            return "hbar"
        if key[H] < self.hbar_floor:
            return "hbar_floor"
        if key[LOG] not in (0, 1):
            return "logxi"
        if key[X] < 0 or key[X] > self.x_max:
            return "x"
        tdeg = 0
        for e in key[T0:]:
            if e < 0:
                return "t"
            tdeg += e
        if tdeg > self.t_total_max:
            return "t"
        return None

    @property
    def t_weights(self) -> tuple:
        """Weights (j - 1) of t_j in the trust degree; zeta' = sum n t_n xi^(n-1) has degree 0."""
        return tuple(range(self.num_times))

    @property
    def t_weight(self) -> int:
        """Largest single weight, T - 1."""
        return self.num_times - 1

    def with_(self, **changes) -> "TruncationPolicy":
        return replace(self, **changes)

    def key(self, h=0, xi=0, logxi=0, x=0, t=()) -> tuple:
        return Monomial(h, xi, logxi, x, tuple(t)).key(self.num_times)


@dataclass(frozen=True)
class TrustRecord:
    """Which retained coefficients are exact.

    The untracked remainder of a symbol lives entirely in the union of
    four regions: ``w < xi_trust``, ``h > hbar_trust``, ``tdeg > t_trust``
    and ``x + h > x_trust``, where ``w = xi - sum_j (j - 1) b_j`` is the
    t-weighted xi-degree (for monomials free of t_2, t_3, ... ``w`` is the
    plain xi-degree).  A coefficient is exact iff its monomial avoids all four.
    Infinite bounds mean "nothing dropped in this direction".
    """

    xi_trust: float = -INF
    hbar_trust: float = INF
    t_trust: float = INF
    x_trust: float = INF
    tw: tuple = ()

    def exact(self, key: tuple) -> bool:
        ts = key[T0:]
        if key[XI] - _wdeg(ts, self.tw) < self.xi_trust or key[H] > self.hbar_trust:
            return False
        if key[X] + key[H] > self.x_trust:
            return False
        return sum(ts) <= self.t_trust

    def meet(self, other: "TrustRecord") -> "TrustRecord":
        return TrustRecord(
            max(self.xi_trust, other.xi_trust),
            min(self.hbar_trust, other.hbar_trust),
            min(self.t_trust, other.t_trust),
            min(self.x_trust, other.x_trust),
            self.tw or other.tw,
        )

    @property
    def complete(self) -> bool:
        return (self.xi_trust == -INF and self.hbar_trust == INF and self.t_trust == INF
                and self.x_trust == INF)

    def as_dict(self, policy: TruncationPolicy) -> dict:
        # clipped to the policy window, which is what a reader can observe
        return {
            "xi_trust": int(max(self.xi_trust, policy.xi_min)),
            "hbar_trust": int(min(self.hbar_trust, policy.hbar_max)),
            "t_trust": int(min(self.t_trust, policy.t_total_max)),
            "x_trust": int(min(self.x_trust, policy.x_max + policy.hbar_max)),
        }


FULL_TRUST = TrustRecord()


def _wdeg(ts, w) -> int:
    return sum(a * b for a, b in zip(ts, w))


def _check_policy(a: "GradedSymbol", b: "GradedSymbol"):
    if a.policy != b.policy:
        raise PolicyMismatch(f"{a.policy} != {b.policy}")


class GradedSymbol:
    """Immutable truncated series; see module docstring.

    ``xi_top`` bounds the t-weighted xi-degree (see :class:`TrustRecord`)
    of the full untruncated series; :attr:`xi_bound` bounds the plain one.
    """

    __slots__ = ("terms", "policy", "trust", "xi_top")

    def __init__(self, terms: dict, policy: TruncationPolicy, trust: TrustRecord = FULL_TRUST,
                 xi_top: float | None = None):
        # trusted constructor: terms must already be canonical and in window
        self.terms = terms
        self.policy = policy
        self.trust = trust
        tw = policy.t_weights
        known_top = max((k[XI] - _wdeg(k[T0:], tw) for k in terms), default=-INF)
        top = known_top if xi_top is None else max(xi_top, known_top)
        if trust.hbar_trust == INF and trust.t_trust == INF and trust.x_trust == INF:
            # the only unknown part sits below xi_trust
            top = min(top, max(known_top, trust.xi_trust - 1))
        self.xi_top = top

    @property
    def xi_bound(self) -> float:
        return self.xi_top + self.policy.t_weight * self.policy.t_total_max

    # -- construction -------------------------------------------------
    @classmethod
    def zero(cls, policy: TruncationPolicy) -> "GradedSymbol":
        return cls({}, policy)

    @classmethod
    def const(cls, c, policy: TruncationPolicy) -> "GradedSymbol":
        return make_symbol([(policy.key(), c)], policy)

    @classmethod
    def _from_raw(cls, raw: dict, policy: TruncationPolicy, trust: TrustRecord = FULL_TRUST,
                  xi_top: float | None = None) -> "GradedSymbol":
        """Drop zeros, truncate to the window and record what was dropped."""
        terms = {}
        tau, eta, theta, chi = trust.xi_trust, trust.hbar_trust, trust.t_trust, trust.x_trust
        xi_min, hmax, tmax, xmax = policy.xi_min, policy.hbar_max, policy.t_total_max, policy.x_max
        for k, c in raw.items():
            if not c:
                continue
            if k[XI] < xi_min:
                tau = max(tau, xi_min)
                continue
            h = k[H]
            if h > hmax:
                eta = min(eta, hmax)
                continue
            if sum(k[T0:]) > tmax:
                theta = min(theta, tmax)
                continue
            if k[X] > xmax:
                chi = min(chi, k[X] + h - 1)
                continue
            if h < policy.hbar_floor:
                raise MonomialOutOfWindow(f"hbar exponent {h} below floor", monomial=k)
            terms[k] = c
        return cls(terms, policy, TrustRecord(tau, eta, theta, chi, policy.t_weights), xi_top)

    def with_trust(self, trust: TrustRecord) -> "GradedSymbol":
        return GradedSymbol(self.terms, self.policy, trust, self.xi_top)

    def with_policy(self, policy: TruncationPolicy) -> "GradedSymbol":
        """Re-home into another window (truncating if it is narrower)."""
        if len(policy.key()) != len(self.policy.key()):
            raise PolicyMismatch("different number of times")
        return GradedSymbol._from_raw(self.terms, policy, self.trust, self.xi_top)

    # -- inspection ---------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, GradedSymbol):
            return self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"GradedSymbol({to_text(self)!r})"

    def __iter__(self):
        return iter(sorted(self.terms.items(), key=lambda kv: canonical_order(kv[0])))

    def coefficient(self, key, strict: bool = True) -> mpq:
        if isinstance(key, Monomial):
            key = key.key(self.policy.num_times)
        if strict and (self.policy.violation(key) or not self.trust.exact(key)):
            raise TrustUnderflow(f"coefficient of {Monomial.from_key(key)} is outside the trust window",
                                 trust=self.trust)
        return self.terms.get(key, ZERO)

    @property
    def has_log(self) -> bool:
        return any(k[LOG] for k in self.terms)

    @property
    def is_complete(self) -> bool:
        return self.trust.complete

    def trusted(self) -> "GradedSymbol":
        """The sub-symbol of exactly known coefficients."""
        ex = self.trust.exact
        return GradedSymbol({k: c for k, c in self.terms.items() if ex(k)}, self.policy, self.trust,
                            self.xi_top)

    def is_zero_within_trust(self) -> bool:
        ex = self.trust.exact
        return not any(ex(k) for k in self.terms)

    def agrees_with(self, other: "GradedSymbol") -> bool:
        """Equal on every monomial that both operands know exactly."""
        diff = sub(self, other)
        return diff.is_zero_within_trust()

    def max_xi(self) -> float:
        return max((k[XI] for k in self.terms), default=-INF)

    def min_xi(self) -> float:
        return min((k[XI] for k in self.terms), default=INF)

    def max_x(self) -> int:
        return max((k[X] for k in self.terms), default=0)

    def max_h(self) -> int:
        return max((k[H] for k in self.terms), default=0)

    def is_constant(self) -> bool:
        """Only hbar-powers (no xi, log, x, t)."""
        return all(k[XI] == 0 and k[LOG] == 0 and k[X] == 0 and not any(k[T0:]) for k in self.terms)

    # -- operators ----------------------------------------------------
    def __add__(self, other):
        return add(self, _lift(other, self.policy))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other, self.policy))

    def __rsub__(self, other):
        return sub(_lift(other, self.policy), self)

    def __neg__(self):
        return scale(self, -1)

    def __mul__(self, other):
        if isinstance(other, GradedSymbol):
            return mul(self, other)
        return scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)


def _lift(v, policy):
    if isinstance(v, GradedSymbol):
        return v
    return GradedSymbol.const(v, policy)


def canonical_order(key: tuple) -> tuple:
    """hbar ascending, then xi descending (log before plain), then x, then t."""
    return (key[H], -key[XI], -key[LOG], key[X]) + tuple(key[T0:])


def make_symbol(entries: Iterable, policy: TruncationPolicy) -> GradedSymbol:
    """Canonical symbol from ``(Monomial-or-key, coefficient)`` pairs."""
    raw: dict = {}
    for mono, c in entries:
        key = mono.key(policy.num_times) if isinstance(mono, Monomial) else tuple(mono)
        why = policy.violation(key)
        if why:
            raise MonomialOutOfWindow(f"{Monomial.from_key(key) if len(key) >= T0 else key} violates {why}",
                                      violation=why)
        raw[key] = raw.get(key, ZERO) + rational(c)
    return GradedSymbol({k: c for k, c in raw.items() if c}, policy)


# ---------------------------------------------------------------------------
# ring operations

def add(a: GradedSymbol, b: GradedSymbol) -> GradedSymbol:
    _check_policy(a, b)
    terms = dict(a.terms)
    for k, c in b.terms.items():
        s = terms.get(k, ZERO) + c
        if s:
            terms[k] = s
        else:
            terms.pop(k, None)
    return GradedSymbol(terms, a.policy, a.trust.meet(b.trust), max(a.xi_top, b.xi_top))


def sub(a: GradedSymbol, b: GradedSymbol) -> GradedSymbol:
    return add(a, scale(b, -1))


def scale(a: GradedSymbol, c) -> GradedSymbol:
    c = rational(c)
    if not c:
        return GradedSymbol({}, a.policy, a.trust, a.xi_top)
    return GradedSymbol({k: v * c for k, v in a.terms.items()}, a.policy, a.trust, a.xi_top)


def sum_symbols(items: Iterable[GradedSymbol], policy: TruncationPolicy) -> GradedSymbol:
    terms: dict = {}
    trust = FULL_TRUST
    top = -INF
    for s in items:
        if s.policy != policy:
            raise PolicyMismatch(f"{s.policy} != {policy}")
        trust = trust.meet(s.trust)
        top = max(top, s.xi_top)
        for k, c in s.terms.items():
            terms[k] = terms.get(k, ZERO) + c
    return GradedSymbol({k: c for k, c in terms.items() if c}, policy, trust, top)


def product_trust(a: GradedSymbol, b: GradedSymbol) -> TrustRecord:
    """Trust of the commutative product before window truncation."""
    floor = a.policy.hbar_floor
    ta, tb = a.trust, b.trust
    return TrustRecord(
        max(ta.xi_trust + b.xi_top, tb.xi_trust + a.xi_top),
        min(ta.hbar_trust + floor, tb.hbar_trust + floor),
        min(ta.t_trust, tb.t_trust),
        min(ta.x_trust + floor, tb.x_trust + floor),
        a.policy.t_weights,
    )


def mul(a: GradedSymbol, b: GradedSymbol) -> GradedSymbol:
    """Commutative product, truncated to the common window."""
    _check_policy(a, b)
    if a.has_log and b.has_log:
        raise LogLogProduct("product of two log-bearing symbols")
    return _mul_raw(a.terms, b.terms, a.policy, product_trust(a, b), a.xi_top + b.xi_top)


def _mul_raw(ta: dict, tb: dict, policy: TruncationPolicy, trust: TrustRecord, xi_top) -> GradedSymbol:
    xi_min, hmax, tmax, xmax = policy.xi_min, policy.hbar_max, policy.t_total_max, policy.x_max
    tau, eta, theta, chi = trust.xi_trust, trust.hbar_trust, trust.t_trust, trust.x_trust
    out: dict = {}
    get = out.get
    # sort b once by xi so the inner loop can stop early
    bl = sorted(tb.items(), key=lambda kv: -kv[0][XI])
    for ka, ca in ta.items():
        ha, xa, la, pa = ka[H], ka[XI], ka[LOG], ka[X]
        tpa = ka[T0:]
        da = sum(tpa)
        for kb, cb in bl:
            xi = xa + kb[XI]
            if xi < xi_min:
                tau = max(tau, xi_min)
                break
            h = ha + kb[H]
            if h > hmax:
                eta = min(eta, hmax)
                continue
            tp = kb[T0:]
            if da + sum(tp) > tmax:
                theta = min(theta, tmax)
                continue
            px = pa + kb[X]
            if px > xmax:
                chi = min(chi, px + h - 1)
                continue
            k = (h, xi, la + kb[LOG], px) + tuple(p + q for p, q in zip(tpa, tp))
            out[k] = get(k, ZERO) + ca * cb
    return GradedSymbol({k: c for k, c in out.items() if c}, policy,
                        TrustRecord(tau, eta, theta, chi, policy.t_weights), xi_top)


def power(a: GradedSymbol, n: int) -> GradedSymbol:
    result = GradedSymbol.const(1, a.policy)
    for _ in range(n):
        result = mul(result, a)
    return result


# ---------------------------------------------------------------------------
# derivatives, antiderivative, projections

def partial(a: GradedSymbol, var) -> GradedSymbol:
    """Partial derivative by ``"x"``, ``"xi"`` or a time index ``j`` (1-based)."""
    p = a.policy
    out: dict = {}
    tr = a.trust
    if var == "x":
        for k, c in a.terms.items():
            e = k[X]
            if e:
                nk = k[:X] + (e - 1,) + k[T0:]
                out[nk] = out.get(nk, ZERO) + c * e
        return GradedSymbol._from_raw(out, p, replace(tr, x_trust=tr.x_trust - 1), a.xi_top)
    if var == "xi":
        for k, c in a.terms.items():
            e = k[XI]
            if k[LOG]:
                # d/dxi (xi^e log xi) = e xi^(e-1) log xi + xi^(e-1)
                nk = (k[H], e - 1, 0) + k[X:]
                out[nk] = out.get(nk, ZERO) + c
                if e:
                    nk = (k[H], e - 1, 1) + k[X:]
                    out[nk] = out.get(nk, ZERO) + c * e
            elif e:
                nk = (k[H], e - 1, 0) + k[X:]
                out[nk] = out.get(nk, ZERO) + c * e
        return GradedSymbol._from_raw(out, p, replace(tr, xi_trust=tr.xi_trust - 1), a.xi_top - 1)
    if isinstance(var, str) and var.startswith("t"):
        var = int(var[1:])
    j = int(var)
    if not 1 <= j <= p.num_times:
        raise ValueError(f"no time variable t{j}")
    i = T0 + j - 1
    for k, c in a.terms.items():
        e = k[i]
        if e:
            nk = k[:i] + (e - 1,) + k[i + 1:]
            out[nk] = out.get(nk, ZERO) + c * e
    # lowering the degree in t_j raises the weighted xi-degree by j - 1
    tw = j - 1
    return GradedSymbol._from_raw(out, p, replace(tr, xi_trust=tr.xi_trust + tw, t_trust=tr.t_trust - 1),
                                  a.xi_top + tw)


def xi_antiderivative(a: GradedSymbol) -> GradedSymbol:
    """Antiderivative in xi without xi^0 constant; xi^-1 integrates to log xi."""
    out: dict = {}
    for k, c in a.terms.items():
        if k[LOG]:
            raise NonNegativePowerInIntegrand("log-bearing integrand")
        e = k[XI]
        if e >= 0:
            raise NonNegativePowerInIntegrand(f"integrand has xi^{e}", monomial=k)
        if e == -1:
            nk = (k[H], 0, 1) + k[X:]
            out[nk] = c
        else:
            nk = (k[H], e + 1, 0) + k[X:]
            out[nk] = c / (e + 1)
    tr = a.trust
    return GradedSymbol._from_raw(out, a.policy, replace(tr, xi_trust=tr.xi_trust + 1), a.xi_top + 1)


def hbar_component(a: GradedSymbol, n: int) -> GradedSymbol:
    """Coefficient of hbar^n as an hbar-free symbol."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out = {(0,) + k[1:]: c for k, c in a.terms.items() if k[H] == n}
    tr = a.trust
    eta = INF if n <= tr.hbar_trust else -1
    return GradedSymbol(out, a.policy, replace(tr, hbar_trust=eta, x_trust=tr.x_trust - n), a.xi_top)


def hbar_components(a: GradedSymbol) -> dict:
    return {n: hbar_component(a, n) for n in sorted({k[H] for k in a.terms})}


def shift_hbar(a: GradedSymbol, k: int) -> GradedSymbol:
    """Multiply by hbar^k (k may be negative when the result stays in window)."""
    out = {(key[H] + k,) + key[1:]: c for key, c in a.terms.items()}
    tr = a.trust
    return GradedSymbol._from_raw(out, a.policy,
                                  replace(tr, hbar_trust=tr.hbar_trust + k, x_trust=tr.x_trust + k), a.xi_top)


def divide_hbar(a: GradedSymbol) -> GradedSymbol:
    """Exact division by hbar; every exactly known coefficient must have h >= 1."""
    ex = a.trust.exact
    for k in a.terms:
        if k[H] == 0 and ex(k):
            raise NotDivisibleByHbar("symbol has an exact hbar^0 term", monomial=k)
    out = {(k[H] - 1,) + k[1:]: c for k, c in a.terms.items() if k[H] >= 1}
    tr = a.trust
    # untrusted hbar^0 leftovers are simply part of the unknown remainder
    return GradedSymbol(out, a.policy, replace(tr, hbar_trust=tr.hbar_trust - 1, x_trust=tr.x_trust - 1),
                        a.xi_top)


def xi_project(a: GradedSymbol, mode: str) -> GradedSymbol:
    """Split by sign of the xi-degree: ``"geq0"`` or ``"neg"``."""
    if mode not in ("geq0", "neg"):
        raise ValueError(mode)
    if mode == "neg" and a.has_log:
        raise LogInProjection("log xi term has no definite side")
    if mode == "geq0":
        out = {k: c for k, c in a.terms.items() if k[XI] >= 0 and not k[LOG]}
        return GradedSymbol(out, a.policy, a.trust, a.xi_top)
    out = {k: c for k, c in a.terms.items() if k[XI] < 0}
    return GradedSymbol(out, a.policy, a.trust, min(a.xi_top, -1))


def log_part(a: GradedSymbol) -> GradedSymbol:
    return GradedSymbol({k: c for k, c in a.terms.items() if k[LOG]}, a.policy, a.trust, a.xi_top)


def strip_log(a: GradedSymbol) -> tuple[GradedSymbol, GradedSymbol]:
    """(coefficient of log xi, log-free part)."""
    coef = {k[:LOG] + (0,) + k[X:]: c for k, c in a.terms.items() if k[LOG]}
    rest = {k: c for k, c in a.terms.items() if not k[LOG]}
    return (GradedSymbol(coef, a.policy, a.trust, a.xi_top), GradedSymbol(rest, a.policy, a.trust, a.xi_top))


def times_log(a: GradedSymbol) -> GradedSymbol:
    if a.has_log:
        raise LogLogProduct("symbol already carries log xi")
    return GradedSymbol({k[:LOG] + (1,) + k[X:]: c for k, c in a.terms.items()}, a.policy, a.trust, a.xi_top)


def select(a: GradedSymbol, pred) -> GradedSymbol:
    """Sub-symbol of terms whose key satisfies ``pred`` (trust unchanged)."""
    return GradedSymbol({k: c for k, c in a.terms.items() if pred(k)}, a.policy, a.trust, a.xi_top)


def set_x_zero(a: GradedSymbol) -> GradedSymbol:
    """Evaluate at x = 0."""
    tr = a.trust
    out = {k: c for k, c in a.terms.items() if k[X] == 0}
    return GradedSymbol(out, a.policy, replace(tr, hbar_trust=min(tr.hbar_trust, tr.x_trust), x_trust=INF),
                        a.xi_top)


def t_degree(key: tuple) -> int:
    return sum(key[T0:])


def t_component(a: GradedSymbol, d: int) -> GradedSymbol:
    """Sub-symbol of total t-degree ``d`` (t exponents kept)."""
    if d > a.trust.t_trust:
        raise TrustUnderflow(f"t-degree {d} beyond trust {a.trust.t_trust}", t_degree=d)
    return GradedSymbol({k: c for k, c in a.terms.items() if sum(k[T0:]) == d}, a.policy,
                        replace(a.trust, t_trust=INF), a.xi_top)


# ---------------------------------------------------------------------------
# commutative Laurent inverse in xi (dispersionless substitution needs 1/L)

def inverse(a: GradedSymbol) -> GradedSymbol:
    """Commutative inverse of ``c xi^k (1 + lower)`` with constant ``c``."""
    if not a.terms:
        raise SeriesInversionError("zero has no inverse")
    top = a.max_xi()
    lk = a.policy.key(xi=top)
    lead = [k for k in a.terms if k[XI] == top]
    if lead != [lk] or a.has_log or a.xi_top > top:
        raise SeriesInversionError("leading xi term must be a constant monomial")
    c = a.terms[lk]
    p = a.policy
    # a = c xi^top (1 - r) with r of xi-degree <= -1; 1/a = xi^-top/c * sum r^n
    inner = p.with_(xi_min=min(0, p.xi_min + top))
    r = {(k[H], k[XI] - top) + k[LOG:]: -v / c for k, v in a.terms.items() if k != lk}
    rsym = GradedSymbol._from_raw(r, inner, replace(a.trust, xi_trust=a.trust.xi_trust - top), -1)
    total = GradedSymbol.const(1, inner)
    term = total
    for _ in range(-inner.xi_min):
        term = mul(term, rsym)
        total = add(total, term)
    out = {(k[H], k[XI] - top) + k[LOG:]: v / c for k, v in total.terms.items()}
    tr = total.trust
    return GradedSymbol._from_raw(out, p, replace(tr, xi_trust=tr.xi_trust - top), -top)


# ---------------------------------------------------------------------------
# text and JSON forms

_VAR_RE = re.compile(r"^(hbar|h|xi|x|log|t(\d+))(?:\^(-?\d+))?$")


def parse_symbol(text: str, policy: TruncationPolicy) -> GradedSymbol:
    """Parse e.g. ``"x*xi^-1 - 1/2*h*xi^-3 + log + 3*t2^2"``.

    Variable names: ``h``/``hbar``, ``xi``, ``x``, ``log`` (log xi), ``t1``...
    """
    s = text.replace(" ", "").replace("**", "^")
    if not s:
        return GradedSymbol.zero(policy)
    s = re.sub(r"(?<=[^\^*/])-", "+-", s)
    entries = []
    for term in s.split("+"):
        if not term:
            continue
        coef = mpq(1)
        if term.startswith("-"):
            coef = -coef
            term = term[1:]
        mono = {"h": 0, "xi": 0, "logxi": 0, "x": 0}
        t = [0] * policy.num_times
        for f in term.split("*"):
            if re.fullmatch(r"\d+(/\d+)?", f):
                coef *= mpq(f)
                continue
            m = _VAR_RE.match(f)
            if not m:
                raise ValueError(f"cannot parse factor {f!r} in {text!r}")
            name, tj, e = m.group(1), m.group(2), int(m.group(3) or 1)
            if tj:
                t[int(tj) - 1] += e
            elif name in ("h", "hbar"):
                mono["h"] += e
            elif name == "log":
                mono["logxi"] += e
            else:
                mono[name] += e
        entries.append((Monomial(mono["h"], mono["xi"], mono["logxi"], mono["x"], tuple(t)), coef))
    return make_symbol(entries, policy)


def to_text(a: GradedSymbol) -> str:
    if not a.terms:
        return "0"
    parts = []
    for k, c in a:
        fs = []
        for name, e in (("h", k[H]), ("xi", k[XI]), ("log", k[LOG]), ("x", k[X])):
            if e:
                fs.append(name if e == 1 else f"{name}^{e}")
        for j, e in enumerate(k[T0:], 1):
            if e:
                fs.append(f"t{j}" if e == 1 else f"t{j}^{e}")
        mag = abs(c)
        body = "*".join(([str(mag)] if mag != 1 or not fs else []) + fs)
        parts.append(("- " if c < 0 else "+ ") + body)
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else "-" + out[1:]


def to_json(a: GradedSymbol) -> list:
    return [
        {"h": k[H], "xi": k[XI], "logxi": k[LOG], "x": k[X], "t": list(k[T0:]), "c": format_rational(c)}
        for k, c in a
    ]


def from_json(entries: list, policy: TruncationPolicy) -> GradedSymbol:
    return make_symbol(
        [(Monomial(e.get("h", 0), e.get("xi", 0), e.get("logxi", 0), e.get("x", 0), tuple(e.get("t", ()))),
          rational(e["c"])) for e in entries],
        policy,
    )
