"""Dispersionless layer: classical dressing and seed validation.

Classical symbols are hbar-free GradedSymbols and brackets are Poisson
brackets.  The seed X_0 is usually known at t = 0 only; its t-dependence
is then generated degree by degree in t by the same gauge step the
quantum recursion uses per hbar-grade (see :func:`extend_seed_in_t`).
"""

from __future__ import annotations

from dataclasses import dataclass

from gmpy2 import mpq

from .calculus import dressing_conjugate, poisson
from .errors import InductionHypothesisViolated, NotCanonical, TimeIndexOutOfRange
from .series import (
    XI,
    GradedSymbol,
    add,
    hbar_component,
    inverse,
    mul,
    partial,
    select,
    sub,
    t_component,
    t_degree,
    to_json,
    xi_project,
)

# ClassicalSymbol: a GradedSymbol with no hbar
ClassicalSymbol = GradedSymbol


@dataclass(frozen=True)
class DKPSeed:
    X0: GradedSymbol
    alpha0: mpq = mpq(0)

    def __post_init__(self):
        if self.X0.has_log:
            raise ValueError("X0 must be log-free")
        if any(k[0] for k in self.X0.terms):
            raise ValueError("X0 must be hbar-free")
        if self.X0.max_xi() > -1 or self.X0.xi_top > -1:
            raise ValueError("X0 must have xi-degrees <= -1")
        object.__setattr__(self, "alpha0", mpq(self.alpha0))


def _xi(p):
    return GradedSymbol._from_raw({p.key(xi=1): mpq(1)}, p)


def _x(p):
    return GradedSymbol._from_raw({p.key(x=1): mpq(1)}, p)


def dkp_dress(seed: DKPSeed, t_on: bool = True):
    """(calL, calM) = exp(ad X0) xi and exp(ad X0) exp(ad alpha0 log xi) exp(ad zeta) x."""
    p = seed.X0.policy
    L = dressing_conjugate(seed.X0, 0, False, _xi(p), classical=True)
    M = dressing_conjugate(seed.X0, seed.alpha0, t_on, _x(p), classical=True)
    return L, M


def substitute(f0: GradedSymbol, M: GradedSymbol, L: GradedSymbol) -> GradedSymbol:
    """Commutative evaluation f0(x -> M, xi -> L); negative xi-powers use 1/L."""
    p = L.policy
    one = GradedSymbol.const(1, p)

    def pw(cache, base, e):
        if e not in cache:
            cache[e] = one if e == 0 else mul(pw(cache, base, e - 1), base)
        return cache[e]

    Linv = None
    mcache, lcache, icache = {}, {}, {}
    parts = []
    for k, c in f0.terms.items():
        if k[0] or k[2] or any(k[4:]):
            raise ValueError("classical substitution needs an hbar-, log- and t-free polynomial")
        e, a = k[XI], k[3]
        if e >= 0:
            lp = pw(lcache, L, e)
        else:
            if Linv is None:
                Linv = inverse(L)
            lp = pw(icache, Linv, -e)
        parts.append(mul(pw(mcache, M, a), lp) * c)
    out = GradedSymbol.zero(p)
    for s in parts:
        out = add(out, s)
    return out


def check_canonical_pair(f0: GradedSymbol, g0: GradedSymbol):
    r = sub(poisson(f0, g0), GradedSymbol.const(1, f0.policy))
    if not r.is_zero_within_trust():
        raise NotCanonical("{f0, g0} != 1", residual=to_json(r.trusted()))


def dkp_rh_residual(f0, g0, L, M):
    """xi-negative parts of f0(calM, calL) and g0(calM, calL)."""
    check_canonical_pair(f0, g0)
    return xi_project(substitute(f0, M, L), "neg"), xi_project(substitute(g0, M, L), "neg")


def dkp_lax_residual(L: GradedSymbol, n: int) -> GradedSymbol:
    """dcalL/dt_n - {(calL^n)_{>=0}, calL}."""
    p = L.policy
    if not 1 <= n <= p.num_times:
        raise TimeIndexOutOfRange(f"n={n} outside 1..{p.num_times}", n=n)
    Ln = L
    for _ in range(n - 1):
        Ln = mul(Ln, L)
    B = xi_project(Ln, "geq0")
    return sub(partial(L, n), poisson(B, L))


def principal(f: GradedSymbol) -> GradedSymbol:
    """sigma^hbar of an hbar-order-0 operator symbol: its hbar^0 part."""
    return hbar_component(f, 0)


def extend_seed_in_t(f0: GradedSymbol, g0: GradedSymbol, seed: DKPSeed) -> DKPSeed:
    """Generate the t-dependence of X0 from its t = 0 value.

    Works one total t-degree d at a time: with X0 known through degree
    d-1, the degree-d parts of the dressed (f0, g0) determine the degree-d
    correction exactly as a grade of the hbar recursion does, with the
    t = 0 seed in place of sigma(X_0).  A constant log term would mean a
    t-dependent alpha and is rejected.
    """
    from .recursion import ch_invert, integrate_grade

    p = seed.X0.policy
    X = select(seed.X0, lambda k: t_degree(k) == 0)
    base = X
    for d in range(1, p.t_total_max + 1):
        P = dressing_conjugate(X, seed.alpha0, True, f0, classical=True)
        Q = dressing_conjugate(X, seed.alpha0, True, g0, classical=True)
        for e in range(d):
            for name, S in (("f", P), ("g", Q)):
                neg = xi_project(t_component(S, e), "neg")
                if not neg.is_zero_within_trust():
                    raise InductionHypothesisViolated(f"dressed {name} negative at t-degree {e}",
                                                      t_degree=e, residual=to_json(neg.trusted()))
        P0, Q0 = t_component(P, 0), t_component(Q, 0)
        a, Xt = integrate_grade(P0, Q0, t_component(P, d), t_component(Q, d), {"t_degree": d})
        if a:
            raise InductionHypothesisViolated("seed would need a t-dependent alpha", t_degree=d)
        X = add(X, ch_invert(0, Xt, base))
    return DKPSeed(X, seed.alpha0)
