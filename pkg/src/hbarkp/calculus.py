"""Noncommutative operator structure on total symbols.

Composition of microdifferential operators is the normal-ordering law

    a o b = sum_n hbar^n / n!  (d/dxi)^n a  (d/dx)^n b

with xi the symbol of hbar*d/dx.  Conjugations ``Ad(exp(A/hbar))`` are
summed as ``sum_k (1/k!) ((1/hbar) ad A)^k`` where the division by hbar is
structural: the bracket is assembled directly from its hbar-divisible
terms, so no negative hbar exponents ever appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from gmpy2 import mpq

from .errors import LogLogProduct, NonTerminatingConjugation
from .series import (
    INF,
    GradedSymbol,
    TruncationPolicy,
    hbar_component,
    mul,
    partial,
    rational,
    scale,
    shift_hbar,
    strip_log,
    sub,
    sum_symbols,
    times_log,
)

# OperatorSymbol is a GradedSymbol read as the total symbol of an operator
OperatorSymbol = GradedSymbol


def _derivs(a: GradedSymbol, var: str, upto: int) -> list:
    out = [a]
    for _ in range(upto):
        nxt = partial(out[-1], var)
        out.append(nxt)
        if not nxt.terms and _complete_in(nxt, var):
            break
    return out


def _complete_in(a: GradedSymbol, var: str) -> bool:
    # no untracked remainder that further differentiation could expose
    if var == "x":
        return a.trust.x_trust == INF
    return a.trust.xi_trust == -INF


def _star_terms(a: GradedSymbol, b: GradedSymbol, n_from: int, hbar_shift: int) -> GradedSymbol:
    if a.policy != b.policy:
        from .errors import PolicyMismatch
        raise PolicyMismatch(f"{a.policy} != {b.policy}")
    if a.has_log and b.has_log:
        raise LogLogProduct("star product of two log-bearing symbols")
    p = a.policy
    nmax = p.hbar_max - 2 * p.hbar_floor - hbar_shift
    dxb = _derivs(b, "x", nmax)
    parts = []
    da = a
    for n in range(0, len(dxb)):
        if n > 0:
            da = partial(da, "xi")
        if n < n_from:
            continue
        db = dxb[n]
        if not da.terms and not db.terms and n > n_from:
            break
        term = mul(da, db)
        term = scale(term, mpq(1, math.factorial(n)))
        parts.append(shift_hbar(term, n + hbar_shift))
    return sum_symbols(parts, p) if parts else GradedSymbol.zero(p)


def star_mul(a: OperatorSymbol, b: OperatorSymbol) -> OperatorSymbol:
    """Operator composition a o b on total symbols."""
    return _star_terms(a, b, 0, 0)


def star_commutator(a: OperatorSymbol, b: OperatorSymbol) -> OperatorSymbol:
    """a o b - b o a (the commutative n = 0 terms cancel identically)."""
    return sub(_star_terms(a, b, 1, 0), _star_terms(b, a, 1, 0))


def bracket_over_hbar(a: OperatorSymbol, b: OperatorSymbol) -> OperatorSymbol:
    """(1/hbar) [a, b], assembled without forming negative hbar powers."""
    return sub(_star_terms(a, b, 1, -1), _star_terms(b, a, 1, -1))


def star_power(a: OperatorSymbol, n: int) -> OperatorSymbol:
    result = GradedSymbol.const(1, a.policy)
    for _ in range(n):
        result = star_mul(result, a)
    return result


def poisson(a: GradedSymbol, b: GradedSymbol) -> GradedSymbol:
    """{a, b} = da/dxi db/dx - da/dx db/dxi."""
    return sub(mul(partial(a, "xi"), partial(b, "x")), mul(partial(a, "x"), partial(b, "xi")))


def hbar_order(a: GradedSymbol) -> float:
    """max over terms of -h; ``-inf`` for the zero symbol."""
    if not a.terms:
        return -INF
    return -min(k[0] for k in a.terms)


def principal_symbol(a: GradedSymbol) -> GradedSymbol:
    if not a.terms:
        return GradedSymbol.zero(a.policy)
    return hbar_component(a, int(-hbar_order(a)))


# ---------------------------------------------------------------------------
# generators and conjugation

NEG_ORDER_X = "neg_order_X"
ALPHA_LOG = "alpha_log"
ZETA_TIMES = "zeta_times"


@dataclass(frozen=True)
class ExpGenerator:
    """Generator A of a conjugation Ad(exp(A/hbar)).

    ``neg_order_X``: body has xi-degrees <= -1; ``alpha_log``: body is
    alpha(hbar)*log xi; ``zeta_times``: body is sum t_n xi^n.
    """

    kind: str
    body: GradedSymbol

    @classmethod
    def neg_order(cls, X: GradedSymbol) -> "ExpGenerator":
        return cls(NEG_ORDER_X, X)

    @classmethod
    def alpha_log(cls, alpha, policy: TruncationPolicy) -> "ExpGenerator":
        """``alpha`` is a rational, a list of hbar-coefficients, or a constant symbol."""
        if isinstance(alpha, GradedSymbol):
            a = alpha
        elif isinstance(alpha, (list, tuple)):
            a = GradedSymbol._from_raw({policy.key(h=n): rational(c) for n, c in enumerate(alpha)}, policy)
        else:
            a = GradedSymbol._from_raw({policy.key(): rational(alpha)}, policy)
        if not a.is_constant():
            raise ValueError("alpha must be constant in x, t and xi")
        return cls(ALPHA_LOG, times_log(a))

    @classmethod
    def zeta(cls, policy: TruncationPolicy) -> "ExpGenerator":
        raw = {}
        for n in range(1, policy.num_times + 1):
            t = [0] * policy.num_times
            t[n - 1] = 1
            raw[policy.key(xi=n, t=t)] = mpq(1)
        return cls(ZETA_TIMES, GradedSymbol._from_raw(raw, policy))


def zeta_symbol(policy: TruncationPolicy) -> GradedSymbol:
    return ExpGenerator.zeta(policy).body


def _check_contract(g: ExpGenerator, b: GradedSymbol):
    if g.kind == NEG_ORDER_X:
        if g.body.max_xi() > -1 or g.body.xi_top > -1 or g.body.has_log:
            raise NonTerminatingConjugation("neg_order_X body must have xi-degree <= -1 and no log")
        if b.xi_top == INF:
            raise NonTerminatingConjugation("argument unbounded above in xi")
    elif g.kind in (ALPHA_LOG, ZETA_TIMES):
        if b.trust.x_trust != INF:
            raise NonTerminatingConjugation(f"{g.kind} needs an argument known exactly as a polynomial in x")
        if g.kind == ALPHA_LOG and b.has_log and b.max_x() > 0:
            raise NonTerminatingConjugation("log-bearing argument under alpha_log")
    else:
        raise ValueError(f"unknown generator kind {g.kind}")


def _is_finished(g: ExpGenerator, term: GradedSymbol) -> bool:
    p = term.policy
    if g.kind == NEG_ORDER_X:
        # each further bracket lowers the xi-degree by at least two
        return term.xi_bound < p.xi_min or (not term.terms and term.trust.complete)
    return not term.terms


def ad_exp(g: ExpGenerator, b: OperatorSymbol, bracket=bracket_over_hbar) -> OperatorSymbol:
    """Ad(exp(A/hbar)) b = sum_k (1/k!) ((1/hbar) ad A)^k b.

    ``bracket`` may be swapped for :func:`poisson` to get the classical
    exp(ad_{,} A).
    """
    _check_contract(g, b)
    if not g.body.terms:
        return b
    total = [b]
    term = b
    k = 0
    while not _is_finished(g, term):
        k += 1
        term = scale(bracket(g.body, term), mpq(1, k))
        if g.kind == NEG_ORDER_X:
            term = GradedSymbol(term.terms, term.policy, term.trust, min(term.xi_top, b.xi_top - 2 * k))
        total.append(term)
        if k > 10_000:
            raise NonTerminatingConjugation("conjugation series did not terminate")
    return sum_symbols(total, b.policy)


def classical_ad_exp(g: ExpGenerator, b: GradedSymbol) -> GradedSymbol:
    """exp(ad_{,} A) b with the Poisson bracket."""
    return ad_exp(g, b, bracket=poisson)


def dressing_conjugate(X: GradedSymbol, alpha, t_on: bool, b: OperatorSymbol,
                       classical: bool = False) -> OperatorSymbol:
    """Ad(exp(X/hbar) (hbar d)^(alpha/hbar) exp(zeta/hbar)) b, innermost stage first."""
    br = poisson if classical else bracket_over_hbar
    p = b.policy
    out = b
    if t_on:
        out = ad_exp(ExpGenerator.zeta(p), out, br)
    ag = ExpGenerator.alpha_log(alpha, p)
    if ag.body.terms:
        out = ad_exp(ag, out, br)
    if X is not None and X.terms:
        out = ad_exp(ExpGenerator.neg_order(X), out, br)
    return out


def alpha_symbol(alpha, policy: TruncationPolicy) -> GradedSymbol:
    """alpha given as rational / list of hbar coefficients -> constant symbol."""
    return strip_log(ExpGenerator.alpha_log(alpha, policy).body)[0]
