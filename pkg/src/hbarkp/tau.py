"""hbar-expansion of log tau from the wave-function phase.

With the phase written as S_n(t; z) = -sum_k z^-k / k v_{n,k}(t), the
gradients

    dF_n/dt_j = v_{n,j} + sum_{k+l=j} (1/l) dv_{n-1,l}/dt_k

determine log tau = sum hbar^(n-2) F_n up to constants, fixed here by
F_n(0) = 0.  The result is checked against the wave function through the
Miwa-shift identity

    sum_n hbar^(n-2) (F_n(t - hbar[z^-1]) - F_n(t)) = S_hat(t; z) / hbar,

which we multiply by hbar^2 so that every power of hbar is non-negative.

Polynomials in t are GradedSymbols with no hbar, xi or x; the xi-slot of
the trust record then bounds ``-sum_j (j - 1) b_j`` of a t-monomial.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from math import comb

from gmpy2 import mpq

from .errors import AlphaUnsupported, MissingVGrade, NotIntegrable
from .series import (
    H,
    INF,
    T0,
    XI,
    GradedSymbol,
    TrustRecord,
    TruncationPolicy,
    format_rational,
    mul,
    partial,
    scale,
    shift_hbar,
    sub,
    sum_symbols,
    to_json,
)

log = logging.getLogger(__name__)


def _tpoly_json(a: GradedSymbol) -> list:
    return [{"t": e["t"], "c": e["c"]} for e in to_json(a.trusted())]


# ---------------------------------------------------------------------------

@dataclass
class VTable:
    """v[(n, k)] as t-polynomials; ``grades`` is the number of known grades."""

    v: dict
    policy: TruncationPolicy
    grades: int
    kmax: int

    def get(self, n: int, k: int) -> GradedSymbol:
        if n < 0:
            return GradedSymbol.zero(self.policy)
        if n >= self.grades:
            raise MissingVGrade(f"v_{n},{k} needs grade {n} of the phase", grade=n, k=k)
        if k > self.kmax:
            raise MissingVGrade(f"v_{n},{k} beyond z-depth {self.kmax}", grade=n, k=k)
        return self.v.get((n, k), GradedSymbol.zero(self.policy))


def v_coefficients(S_hat, kmax: int | None = None) -> VTable:
    """v_{n,k} = -k * [z^-k] S_n for a phase (WKBPhase or symbol) with xi read as z."""
    S = getattr(S_hat, "S", S_hat)
    p = S.policy
    tr = S.trust
    grades = int(min(p.hbar_max, tr.hbar_trust)) + 1
    kmax = -p.xi_min if kmax is None else kmax
    raw: dict = {}
    for key, c in S.terms.items():
        n, k = key[H], -key[XI]
        if n >= grades or k > kmax:
            continue
        raw.setdefault((n, k), {})[(0, 0, 0, 0) + key[T0:]] = -k * c
    v = {}
    for n in range(grades):
        for k in range(1, kmax + 1):
            # a t-monomial b of v_{n,k} sits at weighted xi-degree -k - w(b) in S
            t = TrustRecord(tr.xi_trust + k, INF, tr.t_trust, INF, p.t_weights)
            v[(n, k)] = GradedSymbol(raw.get((n, k), {}), p, t)
    return VTable(v, p, grades, kmax)


def gradient_F(v: VTable, n: int, j: int) -> GradedSymbol:
    """dF_n/dt_j."""
    p = v.policy
    if not 1 <= j <= p.num_times:
        raise ValueError(f"no time t{j}")
    parts = [v.get(n, j)]
    if n >= 1:
        for k in range(1, j):
            l = j - k
            parts.append(scale(partial(v.get(n - 1, l), k), mpq(1, l)))
    return sum_symbols(parts, p)


def _integrability(grads: list) -> list:
    """Pairs (j, k) whose cross derivatives disagree within trust."""
    bad = []
    T = len(grads)
    for j in range(1, T + 1):
        for k in range(j + 1, T + 1):
            d = sub(partial(grads[j - 1], k), partial(grads[k - 1], j))
            if not d.is_zero_within_trust():
                bad.append((j, k, d))
    return bad


def integrate_F(v: VTable, n: int) -> GradedSymbol:
    """The polynomial F_n with the given gradient and F_n(0) = 0."""
    p = v.policy
    T = p.num_times
    grads = [gradient_F(v, n, j) for j in range(1, T + 1)]
    bad = _integrability(grads)
    if bad:
        j, k, d = bad[0]
        raise NotIntegrable(f"d/dt{k} of dF/dt{j} differs from d/dt{j} of dF/dt{k}", grade=n, j=j, k=k,
                            residual=to_json(d.trusted()))
    out: dict = {}
    for j, g in enumerate(grads, 1):
        for key, c in g.terms.items():
            deg = sum(key[T0:])
            nk = key[:T0 + j - 1] + (key[T0 + j - 1] + 1,) + key[T0 + j:]
            out[nk] = out.get(nk, 0) + c / (deg + 1)
    # b is exact once every b - e_j is: weighted degree shifts by j - 1
    tau = max(g.trust.xi_trust - (j - 1) for j, g in enumerate(grads, 1))
    theta = min(g.trust.t_trust for g in grads) + 1
    return GradedSymbol._from_raw(out, p, TrustRecord(tau, INF, theta, INF, p.t_weights))


@dataclass
class TauExpansion:
    F: list
    policy: TruncationPolicy
    checks: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"F": [{"n": n, "poly": _tpoly_json(f)} for n, f in enumerate(self.F)],
                "checks": dict(self.checks)}


def tau_expansion(v: VTable, depth: int | None = None) -> TauExpansion:
    N = v.grades - 1 if depth is None else depth
    F = [integrate_F(v, n) for n in range(N + 1)]
    ok = True
    for n, f in enumerate(F):
        for j in range(1, v.policy.num_times + 1):
            if not sub(partial(f, j), gradient_F(v, n, j)).is_zero_within_trust():
                ok = False
    return TauExpansion(F, v.policy, {"integrability": True, "gradient_consistency": ok})


# ---------------------------------------------------------------------------
# Miwa shift

def _miwa_terms(b: tuple, z_depth: int, hmax: int):
    """Expansion of prod_j (t_j - hbar z^-j / j)^b_j as (r, coefficient) pairs."""
    ranges = [range(e + 1) for e in b]
    for r in itertools.product(*ranges):
        h = sum(r)
        zdeg = sum((j + 1) * rj for j, rj in enumerate(r))
        if h > hmax or zdeg > z_depth:
            continue
        c = mpq(1)
        for j, (e, rj) in enumerate(zip(b, r)):
            if rj:
                c *= comb(e, rj) * mpq(-1, j + 1) ** rj
        yield r, h, zdeg, c


def miwa_shift(poly: GradedSymbol, z_depth: int, policy: TruncationPolicy | None = None) -> GradedSymbol:
    """poly(t_1 - hbar/z, t_2 - hbar/(2 z^2), ...), truncated at z^-z_depth and hbar^hbar_max.

    The result's trust is reported only in the xi-slot; callers that need
    exactness per monomial use :func:`_miwa_exact`.
    """
    p = policy or poly.policy
    out: dict = {}
    for key, c in poly.terms.items():
        b = key[T0:]
        for r, h, zdeg, cc in _miwa_terms(b, z_depth, p.hbar_max - key[H]):
            nk = (key[H] + h, key[XI] - zdeg) + key[2:T0] + tuple(e - q for e, q in zip(b, r))
            out[nk] = out.get(nk, 0) + c * cc
    tr = poly.trust
    eta = min(tr.hbar_trust, p.hbar_max)
    if tr.t_trust != INF:
        # unknown high t-degree terms land at lower t-degree with more hbar
        eta = min(eta, max((k[H] for k in poly.terms), default=0))
    return GradedSymbol._from_raw(out, p, replace(tr, xi_trust=max(tr.xi_trust, -z_depth), hbar_trust=eta))


def _compositions(k: int, T: int, size: int):
    """r in N^T with sum r = size and sum j r_j = k."""
    def rec(j, k_left, s_left, acc):
        if j > T:
            if k_left == 0 and s_left == 0:
                yield tuple(acc)
            return
        for rj in range(0, min(s_left, k_left // j) + 1):
            acc.append(rj)
            yield from rec(j + 1, k_left - j * rj, s_left - rj, acc)
            acc.pop()
    yield from rec(1, k, size, [])


def _miwa_exact(F: list, h: int, k: int, c: tuple, p: TruncationPolicy) -> bool:
    """Whether [hbar^h z^-k t^c] of sum_n hbar^n F_n(t - hbar[z^-1]) is fully known."""
    T = p.num_times
    for n in range(0, h + 1):
        size = h - n
        if size == 0:
            continue  # unshifted part cancels against -F_n(t)
        if n >= len(F):
            return False
        # a part j > T needs k >= j + (size - 1); those times are not modelled
        if k >= T + size:
            return False
        for r in _compositions(k, T, size):
            b = tuple(ci + ri for ci, ri in zip(c, r))
            if sum(b) > p.t_total_max:
                return False
            key = (0, 0, 0, 0) + b
            if not F[n].trust.exact(key):
                return False
    return True


def tau_residual(tau: TauExpansion, S_hat: GradedSymbol, z_depth: int) -> tuple:
    """hbar^2 R and a predicate telling which of its monomials are certified."""
    p = S_hat.policy
    parts = []
    for n, Fn in enumerate(tau.F):
        Fn = Fn.with_policy(p) if Fn.policy != p else Fn
        d = sub(miwa_shift(Fn, z_depth, p), Fn)
        parts.append(shift_hbar(d, n))
    parts.append(scale(shift_hbar(S_hat, 1), -1))
    R = sum_symbols(parts, p)
    str_ = S_hat.trust
    N = len(tau.F)

    def certified(key) -> bool:
        h, z, c = key[H], -key[XI], key[T0:]
        if h == 0 or z > z_depth or h > min(N, p.hbar_max):
            return False
        if not str_.exact((h - 1,) + key[1:]):
            return False
        return _miwa_exact(tau.F, h, z, c, p)

    return R, certified


def verify_tau_wave(tau: TauExpansion, wave, z_depth: int = 6) -> dict:
    """Miwa-shift residual report.  Requires alpha = 0."""
    if any(a != 0 for a in wave.alpha):
        raise AlphaUnsupported("tau check is defined for alpha = 0 only",
                               alpha=[format_rational(a) for a in wave.alpha])
    S = wave.S_hat.S
    R, certified = tau_residual(tau, S, z_depth)
    bad = {k: c for k, c in R.terms.items() if certified(k)}
    checked = _certified_count(R.policy, certified, z_depth, len(tau.F))
    deriv = derivative_form(tau, S, z_depth)
    return {
        "tau_wave": not bad,
        "residual": [{"h": k[H] - 2, "z": k[XI], "t": list(k[T0:]), "c": format_rational(c)}
                     for k, c in sorted(bad.items())],
        "certified_monomials": checked,
        "derivative_form": deriv,
    }


def _certified_count(p: TruncationPolicy, certified, z_depth: int, N: int) -> int:
    T = p.num_times
    count = 0
    for h in range(1, min(N, p.hbar_max) + 1):
        for z in range(1, z_depth + 1):
            for c in _tmonos(T, p.t_total_max):
                if certified((h, -z, 0, 0) + c):
                    count += 1
    return count


def _tmonos(T: int, dmax: int):
    for d in range(dmax + 1):
        for c in itertools.product(range(d + 1), repeat=T):
            if sum(c) == d:
                yield c


def derivative_form(tau: TauExpansion, S_hat: GradedSymbol, z_depth: int) -> dict:
    """Secondary report: dS_hat/dz = sum_n hbar^n sum_j z^(-j-1) (dF_n/dt_j)(t - hbar[z^-1]).

    Certified on the same monomials as the difference form, shifted by one
    z-degree (the identity is the z-derivative of the difference form).
    """
    p = S_hat.policy
    T = p.num_times
    lhs = partial(S_hat, "xi")
    parts = []
    for n, Fn in enumerate(tau.F):
        Fn = Fn.with_policy(p) if Fn.policy != p else Fn
        for j in range(1, T + 1):
            g = miwa_shift(partial(Fn, j), z_depth, p)
            zj = GradedSymbol._from_raw({p.key(xi=-j - 1): mpq(1)}, p)
            parts.append(shift_hbar(mul(zj, g), n))
    rhs = sum_symbols(parts, p) if parts else GradedSymbol.zero(p)
    D = sub(lhs, rhs)
    R, certified = tau_residual(tau, S_hat, z_depth)
    # d/dz of hbar^2 R is -hbar times this residual, so [hbar^h z^-(k+1)] here
    # is a multiple of [hbar^(h+1) z^-k] of hbar^2 R
    bad = [k for k in D.terms if certified((k[H] + 1, k[XI] + 1) + k[2:])]
    return {"zero": not bad, "nonzero_monomials": len(bad)}


def tau_from_wave(wave, depth: int | None = None, z_depth: int = 6) -> TauExpansion:
    v = v_coefficients(wave.S_hat.S, kmax=z_depth)
    return tau_expansion(v, depth)


__all__ = [
    "TauExpansion",
    "VTable",
    "derivative_form",
    "gradient_F",
    "integrate_F",
    "miwa_shift",
    "tau_expansion",
    "tau_from_wave",
    "tau_residual",
    "v_coefficients",
    "verify_tau_wave",
]
