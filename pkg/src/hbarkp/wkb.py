"""Dressing exponent X versus WKB phase S, and the wave function.

The two are related by

    sigma_tot(exp(X / hbar)) = exp(S / hbar),

the left side a star exponential and the right side an ordinary one.  We
compute the star exponential in a relaxed window where negative powers of
hbar are allowed, take the commutative logarithm and multiply by hbar.

Why truncating the relaxed computation is exact: with ``nu = h - xi`` and
``lam = x + nu / 2``, every monomial of X/hbar has ``nu >= 0`` and
``lam >= 0``, both weights add under commutative products, and a star
correction term ``hbar^m d_xi^m a d_x^m b`` raises ``nu`` by ``2m`` and
leaves ``lam`` unchanged.  A monomial of S inside the output window has
bounded ``nu`` and ``lam``, so intermediate monomials above those bounds
can never contribute and are dropped.  The xi-degree never rises either.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from gmpy2 import mpq

from .calculus import star_mul, zeta_symbol
from .errors import (
    NegativeHbarResidue,
    NoConvergenceAtGrade,
    RegularityViolation,
    TrustUnderflow,
)
from .series import (
    H,
    INF,
    LOG,
    X,
    XI,
    GradedSymbol,
    TrustRecord,
    TruncationPolicy,
    add,
    hbar_component,
    inverse,
    mul,
    partial,
    scale,
    select,
    set_x_zero,
    shift_hbar,
    sub,
    sum_symbols,
    to_json,
)

log = logging.getLogger(__name__)


def wkb_policy(policy: TruncationPolicy) -> TruncationPolicy:
    """Window for phases: x-degree widened so no phase term is ever cut in x.

    A phase monomial with xi-degree >= xi_min is built from at most
    ``-xi_min`` factors of X, and star corrections only lower the x-degree.
    """
    return policy.with_(x_max=policy.x_max * max(1, -policy.xi_min))


def _bounds(policy: TruncationPolicy):
    # nu and 2*lam caps for intermediates of hbar*log(...) in the window
    V = policy.hbar_max - 1 - policy.xi_min
    return V, 2 * policy.x_max + V


def _relaxed(policy: TruncationPolicy) -> TruncationPolicy:
    V, L2 = _bounds(policy)
    return policy.with_(hbar_floor=policy.xi_min, hbar_max=V, x_max=L2 // 2)


def _prune(a: GradedSymbol, V: int, L2: int) -> GradedSymbol:
    return select(a, lambda k: k[H] - k[XI] <= V and 2 * k[X] + k[H] - k[XI] <= L2)


def _check_input(Xs: GradedSymbol):
    if Xs.has_log:
        raise RegularityViolation("X must be log-free")
    if Xs.max_xi() > -1 or Xs.xi_top > -1:
        raise RegularityViolation("X must have xi-degrees <= -1")


def star_exp_total(X: GradedSymbol) -> GradedSymbol:
    """sum_k hbar^-k / k! sigma_tot(X^k), in the relaxed window of ``X.policy``.

    X is taken at face value (its retained terms); trust is handled by the
    callers.  The result lives in a policy with a negative hbar floor.
    """
    _check_input(X)
    p = X.policy
    R = _relaxed(p)
    V, L2 = _bounds(p)
    Y = shift_hbar(GradedSymbol(dict(X.terms), R), -1)
    Y = _prune(Y, V, L2)
    term = GradedSymbol.const(1, R)
    parts = [term]
    k = 0
    while True:
        k += 1
        term = _prune(scale(star_mul(term, Y), mpq(1, k)), V, L2)
        if not term.terms:
            break
        parts.append(term)
    log.debug("star exponential: %d powers", k - 1)
    return GradedSymbol(sum_symbols(parts, R).terms, R)


def regroup(E: GradedSymbol, policy: TruncationPolicy) -> GradedSymbol:
    """hbar * log E for E = 1 + lower, returned in ``policy`` (hbar floor 0)."""
    R = E.policy
    V, L2 = _bounds(policy)
    one = R.key()
    if E.terms.get(one) != 1:
        raise NegativeHbarResidue("star exponential must start with 1")
    u = GradedSymbol({k: c for k, c in E.terms.items() if k != one}, R)
    if u.max_xi() > -1:
        raise NegativeHbarResidue("star exponential has non-negative xi powers besides 1")
    parts = []
    pw = GradedSymbol.const(1, R)
    m = 0
    while True:
        m += 1
        pw = _prune(mul(pw, u), V, L2)
        if not pw.terms:
            break
        parts.append(scale(pw, mpq(1 if m % 2 else -1, m)))
    logE = sum_symbols(parts, R) if parts else GradedSymbol.zero(R)
    out = {}
    for k, c in logE.terms.items():
        h = k[H] + 1
        if h < 0:
            raise NegativeHbarResidue(f"hbar^{h} survived the logarithm", monomial=list(k))
        if h > policy.hbar_max or k[X] > policy.x_max:
            continue
        out[(h,) + k[1:]] = c
    return GradedSymbol(out, policy)


@dataclass
class WKBPhase:
    """S = sum hbar^n S_n as one symbol in the phase window."""

    S: GradedSymbol

    def __post_init__(self):
        if self.S.has_log:
            raise RegularityViolation("phase must be log-free")
        if self.S.max_xi() > -1:
            raise RegularityViolation("phase must have xi-degrees <= -1")

    @property
    def policy(self) -> TruncationPolicy:
        return self.S.policy

    def grade(self, n: int) -> GradedSymbol:
        return hbar_component(self.S, n)

    def grades(self) -> list:
        return [self.grade(n) for n in range(self.policy.hbar_max + 1)]

    def to_json(self) -> list:
        return [{"n": n, "S": to_json(s.trusted())} for n, s in enumerate(self.grades())]


def _phase_trust(X: GradedSymbol, policy: TruncationPolicy) -> TrustRecord:
    tr = X.trust
    if tr.x_trust != INF:
        raise TrustUnderflow("phase conversion needs X complete in x", x_trust=tr.x_trust)
    # xi and t regions are monotone; the hbar region is preserved by grade locality.
    # The phase itself is cut at the window edges, so those bound it too.
    return TrustRecord(max(tr.xi_trust, policy.xi_min), min(tr.hbar_trust, policy.hbar_max),
                       min(tr.t_trust, policy.t_total_max), INF, policy.t_weights)


def x_to_s(X: GradedSymbol, window: TruncationPolicy | None = None) -> WKBPhase:
    """WKB phase S with exp(S/hbar) = sigma_tot(exp(X/hbar)).

    ``window`` is the phase window; it defaults to :func:`wkb_policy` of
    ``X.policy`` (pass the phase's own policy when X came from s_to_x).
    """
    P = window or wkb_policy(X.policy)
    Xw = X.with_policy(P) if X.policy != P else X
    trust = _phase_trust(Xw, P)
    try:
        S = regroup(star_exp_total(Xw), P)
    except NegativeHbarResidue as exc:
        raise RegularityViolation(str(exc), **exc.context) from exc
    return WKBPhase(GradedSymbol(S.terms, P, trust, min(Xw.xi_top, -1)))


def s_to_x(phase: WKBPhase, max_iter: int | None = None) -> GradedSymbol:
    """Inverse of :func:`x_to_s`; X is returned in the phase window.

    X <- X + (S - x_to_s(X)) starting from X = S.  A correction of top
    xi-degree d changes x_to_s(X) by itself plus terms of xi-degree < d,
    so the top xi-degree of the discrepancy drops every round and the
    iteration is exact after at most ``-xi_min`` rounds.
    """
    S = phase.S
    p = S.policy
    trust = _phase_trust(S, p)
    if S.max_x() * max(1, -p.xi_min) > p.x_max:
        # the preimage may leave the window in x; such terms reach back
        # only to x >= x_max + 1 - nu/2
        V, _ = _bounds(p)
        trust = replace(trust, x_trust=p.x_max - (V + 1) // 2)
    target = GradedSymbol(dict(S.terms), p)
    Xc = target
    limit = max_iter if max_iter is not None else -p.xi_min + 2
    for _ in range(limit + 1):
        D = sub(target, GradedSymbol(x_to_s(Xc, p).S.terms, p))
        if not D.terms:
            return GradedSymbol(Xc.terms, p, trust, min(S.xi_top, -1))
        if D.has_log or D.max_xi() > -1:
            n = min(k[H] for k in D.terms)
            raise NoConvergenceAtGrade(f"discrepancy leaves the xi-negative class at grade {n}", grade=n)
        Xc = add(Xc, D)
    n = min(k[H] for k in D.terms)
    raise NoConvergenceAtGrade(f"no convergence after {limit} rounds, grade {n} still off", grade=n)


# ---------------------------------------------------------------------------
# wave function

@dataclass
class WaveData:
    """Psi = exp(S_hat/hbar + zeta/hbar) z^(alpha/hbar), x absorbed into t_1.

    ``S_hat`` is in the phase window with xi standing for z; the z^(alpha/hbar)
    factor is kept as the recorded ``alpha`` and never expanded.
    """

    S_hat: WKBPhase
    alpha: list
    zeta: GradedSymbol
    S_full: GradedSymbol
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        from .series import format_rational
        return {
            "S_hat": self.S_hat.to_json(),
            "alpha": [format_rational(a) for a in self.alpha],
            "zeta": to_json(self.zeta),
            "checks": dict(self.checks),
        }


def conjugate_to_wave(A: GradedSymbol, S: GradedSymbol) -> GradedSymbol:
    """exp(-phi/hbar) A exp(phi/hbar) applied to 1, phi = S + x xi (xi read as z).

    Conjugation turns hbar d into D = hbar d + phi_x, so a normal-ordered
    monomial x^a (hbar d)^e becomes x^a D^e 1.  Negative powers solve
    phi_x q + hbar q' = g by iterating q <- (g - hbar q') / phi_x; each
    round adds a power of hbar, so ``hbar_max + 1`` rounds are exact.
    """
    p = A.policy
    S = S.with_policy(p) if S.policy != p else S
    Sx = partial(S, "x")
    phix = add(GradedSymbol._from_raw({p.key(xi=1): mpq(1)}, p), Sx)
    emax = max((k[XI] for k in A.terms), default=0)
    emin = min((k[XI] for k in A.terms), default=0)
    one = GradedSymbol.const(1, p)
    powers = {0: one}
    g = one
    for e in range(1, max(emax, 0) + 1):
        g = add(mul(phix, g), shift_hbar(partial(g, "x"), 1))
        powers[e] = g
    if emin < 0:
        inv = inverse(phix)
        g = one
        for e in range(-1, emin - 1, -1):
            q = mul(g, inv)
            for _ in range(p.hbar_max + 1):
                q = mul(sub(g, shift_hbar(partial(q, "x"), 1)), inv)
            g = q
            powers[e] = g
    parts = []
    for k, c in A.terms.items():
        if k[LOG]:
            raise RegularityViolation("log-bearing operator cannot act on the wave function")
        mono = GradedSymbol({(k[H], 0, 0, k[X]) + k[4:]: c}, p)
        parts.append(mul(mono, powers[k[XI]]))
    out = sum_symbols(parts, p) if parts else GradedSymbol.zero(p)
    # the S side is tracked by the ring operations above; A's own unknown
    # part lands in the same regions because x^a D^e 1 never raises the
    # weighted xi-degree above e, never lowers hbar, t-degree or x + h
    tr = out.trust.meet(replace(A.trust, tw=p.t_weights))
    return GradedSymbol(out.terms, p, tr, out.xi_top)


def wave_function(data, t_on: bool = True, z_depth: int | None = None, check_linear: bool = True) -> WaveData:
    """Wave function data for solver output ``data`` (a DressingData)."""
    from .recursion import build_lax, total_X

    p = data.policy
    X = total_X(data.X, p)
    phase = x_to_s(X)
    S = phase.S
    P = S.policy
    checks = {}
    if t_on and P.num_times >= 1:
        # S depends on x and t_1 only through x + t_1
        d = sub(partial(S, "x"), partial(S, 1))
        checks["x_t1_absorption"] = d.is_zero_within_trust()
    S0 = set_x_zero(S)
    if z_depth is not None:
        S0 = GradedSymbol._from_raw({k: c for k, c in S0.terms.items() if k[XI] >= -z_depth}, P,
                                    replace(S0.trust, xi_trust=max(S0.trust.xi_trust, -z_depth)), S0.xi_top)
    zeta = zeta_symbol(P) if t_on else GradedSymbol.zero(P)
    if check_linear:
        L, M = build_lax(data, t_on)
        Lw = L.with_policy(P)
        z = GradedSymbol._from_raw({P.key(xi=1): mpq(1)}, P)
        checks["L_psi_eq_z_psi"] = sub(conjugate_to_wave(Lw, S), z).is_zero_within_trust()
        # M Psi = hbar dPsi/dz; reported only
        rhs = [GradedSymbol._from_raw({P.key(x=1): mpq(1)}, P), partial(S, "xi")]
        if t_on:
            rhs.append(partial(zeta, "xi"))
        a = GradedSymbol._from_raw({P.key(h=n, xi=-1): mpq(c) for n, c in enumerate(data.alpha)}, P)
        rhs.append(a)
        rM = sub(conjugate_to_wave(M.with_policy(P), S), sum_symbols(rhs, P))
        checks["M_psi_eq_dz_psi"] = rM.is_zero_within_trust()
    return WaveData(WKBPhase(S0), [mpq(a) for a in data.alpha], zeta, S, checks)


__all__ = [
    "WKBPhase",
    "WaveData",
    "conjugate_to_wave",
    "regroup",
    "s_to_x",
    "star_exp_total",
    "wave_function",
    "wkb_policy",
    "x_to_s",
]
