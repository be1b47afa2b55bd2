"""Order-by-order construction of the dressing operator.

Given a canonical pair (f, g) with [f, g] = hbar and a dispersionless seed
(X_0, alpha_0), the corrections X_i, alpha_i are produced one hbar-grade at
a time.  The dressing operator is

    W = exp(X / hbar) (hbar d)^(alpha / hbar),   X = sum hbar^n X_n,

and it is never formed as a symbol; only its adjoint action is used.  After
each order the lower grades of Ad(W e^{zeta/hbar}) f and g are checked to be
free of negative powers of xi before the next grade is read off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb, factorial

from gmpy2 import mpq

from .calculus import (
    ExpGenerator,
    classical_ad_exp,
    dressing_conjugate,
    poisson,
    star_commutator,
    star_mul,
)
from .dkp import DKPSeed
from .errors import (
    AlphaNotConstant,
    HbarKPError,
    InductionHypothesisViolated,
    NotCanonical,
    ResidualLogTerm,
    TimeIndexOutOfRange,
    TrustUnderflow,
)
from .series import (
    LOG,
    GradedSymbol,
    TruncationPolicy,
    format_rational,
    hbar_component,
    mul,
    partial,
    scale,
    select,
    shift_hbar,
    strip_log,
    sub,
    sum_symbols,
    times_log,
    to_json,
    xi_antiderivative,
    xi_project,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RHProblem:
    """(f, g) together with the dispersionless seed.

    ``seed.X0`` must already carry its t-dependence when ``t_on`` is set
    (see :func:`hbarkp.dkp.extend_seed_in_t`).
    """

    f: GradedSymbol
    g: GradedSymbol
    seed: DKPSeed
    depth: int
    policy: TruncationPolicy
    t_on: bool = True

    def check_canonical(self):
        r = sub(star_commutator(self.f, self.g), GradedSymbol._from_raw({self.policy.key(h=1): mpq(1)},
                                                                         self.policy))
        if not r.is_zero_within_trust():
            raise NotCanonical("[f, g] != hbar", residual=to_json(r.trusted()))


@dataclass
class DressingData:
    X: list
    alpha: list
    policy: TruncationPolicy
    records: list = field(default_factory=list)

    def truncated(self, depth: int) -> "DressingData":
        return DressingData(self.X[:depth + 1], self.alpha[:depth + 1], self.policy, self.records[:depth + 1])

    @property
    def depth(self) -> int:
        return len(self.X) - 1


# ---------------------------------------------------------------------------

def bernoulli_table(pmax: int) -> list:
    """[B_0, B_2, ..., B_{2 pmax}] from the standard recurrence."""
    n = 2 * pmax
    B = [mpq(1)]
    for m in range(1, n + 1):
        B.append(-sum(comb(m + 1, k) * B[k] for k in range(m)) / (m + 1))
    return [B[2 * p] for p in range(pmax + 1)]


def total_X(X: list, policy: TruncationPolicy) -> GradedSymbol:
    return sum_symbols([shift_hbar(Xn, n) for n, Xn in enumerate(X)], policy)


def conjugate_step(problem: RHProblem, partial_data: DressingData):
    """(P, Q) = Ad(exp(X/hbar) (hbar d)^(alpha/hbar)) applied to f_t, g_t."""
    X = total_X(partial_data.X, problem.policy)
    a = list(partial_data.alpha)
    P = dressing_conjugate(X, a, problem.t_on, problem.f)
    Q = dressing_conjugate(X, a, problem.t_on, problem.g)
    return P, Q


def negative_grade(P: GradedSymbol, k: int) -> GradedSymbol:
    return xi_project(hbar_component(P, k), "neg")


def check_induction(P: GradedSymbol, Q: GradedSymbol, upto: int):
    """Grades 0..upto-1 of P and Q must be xi-nonnegative within trust."""
    for k in range(upto):
        for name, S in (("P", P), ("Q", Q)):
            neg = negative_grade(S, k)
            if not neg.is_zero_within_trust():
                raise InductionHypothesisViolated(f"{name} has negative powers at grade {k}", grade=k,
                                                  operand=name, residual=to_json(neg.trusted()))


def gauge_integrand(P0, Q0, Pi, Qi) -> GradedSymbol:
    """(dQ0/dxi Pi - dP0/dxi Qi) restricted to xi-degrees <= -1."""
    raw = sub(mul(partial(Q0, "xi"), Pi), mul(partial(P0, "xi"), Qi))
    if raw.has_log:
        raise ResidualLogTerm("log term in the gauge integrand")
    return xi_project(raw, "neg")


def integrate_grade(P0, Q0, Pi, Qi, where: dict) -> tuple:
    """Solve for (alpha, X~) from one grade; ``where`` labels errors."""
    Y = xi_antiderivative(gauge_integrand(P0, Q0, Pi, Qi))
    coef, rest = strip_log(Y)
    p = Y.policy
    # only xi^-1 integrates to degree 0 and that went into the log part
    rest = GradedSymbol(rest.terms, p, rest.trust, min(rest.xi_top, -1))
    ck = p.key()
    alpha = mpq(0)
    for k, c in coef.terms.items():
        if not coef.trust.exact(k):
            continue
        if k != ck:
            raise AlphaNotConstant("log xi coefficient depends on x or t", monomial=list(k), **where)
        alpha = c
    if coef.terms.get(ck) and not coef.trust.exact(ck):
        raise TrustUnderflow("log xi coefficient outside the trust window", **where)
    return alpha, rest


def extract_and_integrate(P: GradedSymbol, Q: GradedSymbol, i: int):
    """alpha_i and the log-free X~_i from grade i of (P, Q)."""
    check_induction(P, Q, i)
    P0, Q0 = hbar_component(P, 0), hbar_component(Q, 0)
    Pi, Qi = hbar_component(P, i), hbar_component(Q, i)
    return integrate_grade(P0, Q0, Pi, Qi, {"order": i})


def ch_invert(alpha_i, Xt: GradedSymbol, X0: GradedSymbol) -> GradedSymbol:
    """Invert z -> sum_n (ad X0)^(n-1)/n! z on X~' = alpha log xi + X~ - exp(ad X0)(alpha log xi)."""
    p = Xt.policy
    alpha_i = mpq(alpha_i)
    Z = Xt
    if alpha_i:
        a_log = times_log(GradedSymbol._from_raw({p.key(): alpha_i}, p))
        shifted = classical_ad_exp(ExpGenerator.neg_order(X0), a_log)
        Z = sub(sum_symbols([a_log, Xt], p), shifted)
        if any(Z.trust.exact(k) for k in Z.terms if k[LOG]):
            raise ResidualLogTerm("log xi failed to cancel")
        Z = select(Z, lambda k: not k[LOG])
    if not X0.terms:
        return Z
    # t/(e^t - 1) = 1 - t/2 + sum_p B_2p/(2p)! t^2p
    parts = [Z]
    cur = poisson(X0, Z)
    parts.append(scale(cur, mpq(-1, 2)))
    k = 1
    B = bernoulli_table(1)
    while cur.terms or not cur.trust.complete:
        k += 1
        cur = poisson(X0, cur)
        if cur.xi_bound < p.xi_min or (not cur.terms and cur.trust.complete):
            break
        if k % 2 == 0:
            if len(B) <= k // 2:
                B = bernoulli_table(k // 2)
            parts.append(scale(cur, B[k // 2] / factorial(k)))
    return sum_symbols(parts, p)


def solve(problem: RHProblem, depth: int | None = None, on_order=None) -> DressingData:
    """Run Steps 0-4 up to ``depth`` (default: the problem's depth)."""
    N = problem.depth if depth is None else depth
    p = problem.policy
    X0 = problem.seed.X0
    data = DressingData([X0], [mpq(problem.seed.alpha0)], p)
    data.records.append(order_record(0, data, None))
    for i in range(1, N + 1):
        try:
            P, Q = conjugate_step(problem, data)
            a_i, Xt = extract_and_integrate(P, Q, i)
            Xi = ch_invert(a_i, Xt, X0)
        except HbarKPError as exc:
            exc.context.setdefault("order", i)
            raise
        data.X.append(Xi)
        data.alpha.append(a_i)
        log.info("order %d: alpha=%s, %d terms", i, a_i, len(Xi))
        data.records.append(order_record(i, data, None))
        if on_order:
            on_order(i, data)
    return data


def order_record(i: int, data: DressingData, grades_ok) -> dict:
    return {"i": i, "alpha_i": format_rational(data.alpha[i]), "X_i": to_json(data.X[i].trusted()),
            "residual_grades_ok": grades_ok}


# ---------------------------------------------------------------------------
# assembly and residuals

def _xi(p):
    return GradedSymbol._from_raw({p.key(xi=1): mpq(1)}, p)


def _x(p):
    return GradedSymbol._from_raw({p.key(x=1): mpq(1)}, p)


def build_lax(data: DressingData, t_on: bool = True):
    """L = W (hbar d) W^-1 and M = W e^{zeta/hbar} x e^{-zeta/hbar} W^-1."""
    p = data.policy
    X = total_X(data.X, p)
    L = dressing_conjugate(X, 0, False, _xi(p))
    M = dressing_conjugate(X, list(data.alpha), t_on, _x(p))
    return L, M


def residual_rh(problem: RHProblem, data: DressingData):
    """xi-negative parts of f(M, L) and g(M, L), computed as the dressed f_t, g_t."""
    P, Q = conjugate_step(problem, data)
    return xi_project(P, "neg"), xi_project(Q, "neg")


def grades_vanishing(res: GradedSymbol, upto: int) -> list:
    """For each grade 0..upto, whether its trusted part is zero."""
    return [hbar_component(res, k).is_zero_within_trust() for k in range(upto + 1)]


def residual_lax(L: GradedSymbol, n: int) -> GradedSymbol:
    """hbar dL/dt_n - [B_n, L] with B_n = (L^n)_{>=0}."""
    p = L.policy
    if not 1 <= n <= p.num_times:
        raise TimeIndexOutOfRange(f"n={n} outside 1..{p.num_times}", n=n)
    Ln = L
    for _ in range(n - 1):
        Ln = star_mul(Ln, L)
    B = xi_project(Ln, "geq0")
    return sub(shift_hbar(partial(L, n), 1), star_commutator(B, L))


def residual_ccr(L: GradedSymbol, M: GradedSymbol) -> GradedSymbol:
    p = L.policy
    return sub(star_commutator(L, M), GradedSymbol._from_raw({p.key(h=1): mpq(1)}, p))
