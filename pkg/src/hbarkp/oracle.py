"""Brute-force reference computations, independent of the fast engine.

Operators are normal-ordered sums ``c hbar^h x^a (hbar d)^k``.  An operator
is applied literally to ``p(x, z) exp(x z / hbar)``: a positive power of
``hbar d`` acts as ``p -> z p + hbar dp/dx``, and the inverse solves
``(z + hbar d/dx) q = p`` by back-substitution on the x-degree.  The total
symbol of a product is then read off from ``A (b exp(xz/hbar))``.

Symbols here are plain dicts ``{(h, zpow, xdeg): Fraction}``; hbar powers
may be negative (needed before the logarithm regroups them).  Only t = 0
quantities are computed.  Nothing in this module imports the engine.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial

from .errors import WindowTooLarge

# documented limits of the brute-force path
ORACLE_LIMITS = {"hbar_max": 3, "xi_min": -6, "x_max": 4}


def _add_into(out, key, c):
    v = out.get(key, 0) + c
    if v:
        out[key] = v
    else:
        out.pop(key, None)


def _clean(d):
    return {k: v for k, v in d.items() if v}


def _dx(p):
    out = {}
    for (h, z, a), c in p.items():
        if a:
            _add_into(out, (h, z, a - 1), c * a)
    return out


def _apply_d(p):
    # hbar d acting on p e^{xz/hbar}
    out = {}
    for (h, z, a), c in p.items():
        _add_into(out, (h, z + 1, a), c)
    for (h, z, a), c in _dx(p).items():
        _add_into(out, (h + 1, z, a), c)
    return out


def _apply_dinv(p, zmin):
    # q = sum_m (-hbar)^m z^(-1-m) (d/dx)^m p, finite because p is polynomial in x
    out = {}
    m = 0
    cur = p
    while cur:
        sign = -1 if m % 2 else 1
        for (h, z, a), c in cur.items():
            nz = z - 1 - m
            if nz >= zmin:
                _add_into(out, (h + m, nz, a), sign * c)
        m += 1
        cur = _dx(cur)
    return out


def apply_operator(A, p, zmin):
    """Symbol of ``A (p e^{xz/hbar})`` divided by ``e^{xz/hbar}``; z-degrees below ``zmin`` dropped.

    Dropping is exact here as long as every operator met afterwards has
    nonpositive top order, which is how the callers use it.
    """
    by_k = {}
    for (h, k, a), c in A.items():
        by_k.setdefault(k, []).append((h, a, c))
    out = {}
    for k, monos in by_k.items():
        q = p
        if k >= 0:
            for _ in range(k):
                q = _apply_d(q)
        else:
            for _ in range(-k):
                q = _apply_dinv(q, zmin - 1 + k)
        for h, a, c in monos:
            for (qh, qz, qa), qc in q.items():
                if qz >= zmin:
                    _add_into(out, (qh + h, qz, qa + a), c * qc)
    return out


def compose(a, b, zmin):
    """Total symbol of the operator product a o b."""
    return apply_operator(a, b, zmin)


def commutator(a, b, zmin):
    out = dict(compose(a, b, zmin))
    for k, c in compose(b, a, zmin).items():
        _add_into(out, k, -c)
    return out


def _shift_h(p, k):
    return {(h + k, z, a): c for (h, z, a), c in p.items()}


def _scale(p, s):
    return {k: c * s for k, c in p.items() if c * s}


def _sum(ps):
    out = {}
    for p in ps:
        for k, c in p.items():
            _add_into(out, k, c)
    return out


def conjugate_exp(X, f, zmin):
    """exp(X/hbar) f exp(-X/hbar) = sum_k (1/k!) ((1/hbar) ad X)^k f, X of top order <= -1."""
    terms = [f]
    cur = f
    k = 0
    while cur:
        k += 1
        cur = _scale(_shift_h(commutator(X, cur, zmin), -1), Fraction(1, k))
        terms.append(cur)
        if k > 64:
            raise RuntimeError("conjugation did not terminate")
    return _sum(terms)


def conjugate_power(alpha, f, zmin):
    """(hbar d)^(alpha/hbar) f (hbar d)^(-alpha/hbar) for constant rational alpha.

    The conjugation is an algebra automorphism fixing hbar d and sending x to
    x + alpha (hbar d)^-1, so a normal-ordered f is mapped by substitution.
    """
    xs = {(0, 0, 1): Fraction(1)}
    if alpha:
        xs[(0, -1, 0)] = Fraction(alpha)
    out = {}
    for (h, k, a), c in f.items():
        # composing with (hbar d)^k afterwards raises degrees by up to k
        low = zmin - max(k, 0)
        term = {(h, 0, 0): c}
        for _ in range(a):
            term = compose(term, xs, low)
        term = compose(term, {(0, k, 0): Fraction(1)}, zmin)
        for key, v in term.items():
            if key[1] >= zmin:
                _add_into(out, key, v)
    return out


def star_exp_total(X, zmin):
    """sum_k hbar^-k / k! sigma(X^k), with negative hbar powers kept."""
    out = {(0, 0, 0): Fraction(1)}
    power = {(0, 0, 0): Fraction(1)}
    k = 0
    while True:
        k += 1
        power = compose(power, X, zmin)
        if not power:
            break
        for key, c in _shift_h(power, -k).items():
            _add_into(out, key, c / factorial(k))
    return out


def _cmul(a, b, zmin):
    out = {}
    for (h1, z1, x1), c1 in a.items():
        for (h2, z2, x2), c2 in b.items():
            if z1 + z2 >= zmin:
                _add_into(out, (h1 + h2, z1 + z2, x1 + x2), c1 * c2)
    return out


def phase_from_exp(E, zmin):
    """hbar log E for E = 1 + (terms of z-degree <= -1), commutative logarithm."""
    u = dict(E)
    _add_into(u, (0, 0, 0), Fraction(-1))
    if any(z >= 0 for (_, z, _) in u):
        raise ValueError("exponential symbol is not 1 + lower order")
    out = {}
    power = {(0, 0, 0): Fraction(1)}
    m = 0
    while True:
        m += 1
        power = _cmul(power, u, zmin)
        if not power:
            break
        sign = 1 if m % 2 else -1
        for key, c in power.items():
            _add_into(out, key, sign * c / m)
    return _shift_h(out, 1)


# ---------------------------------------------------------------------------
# tables in the shared report schema

def _entry(h, z, a, c, T):
    c = Fraction(c)
    return {"h": h, "xi": z, "logxi": 0, "x": a, "t": [0] * T, "c": f"{c.numerator}/{c.denominator}"}


def _order(key):
    h, z, a = key
    return (h, -z, a)


def to_entries(p, T, window=None):
    out = []
    for key in sorted(p, key=_order):
        h, z, a = key
        if window is not None and not (0 <= h <= window["hbar_max"] and z >= window["xi_min"]
                                       and a <= window["x_max"]):
            continue
        out.append(_entry(h, z, a, p[key], T))
    return out


def from_terms(terms):
    """Problem-file term list ``[{"h","xi","x","c"}]`` to an oracle dict (t-free terms only)."""
    out = {}
    for t in terms:
        if any(t.get("t", [])) or t.get("logxi", 0):
            raise ValueError("oracle handles t = 0, log-free terms only")
        _add_into(out, (t.get("h", 0), t.get("xi", 0), t.get("x", 0)), Fraction(t["c"]))
    return out


STAR_GRID = {"x_max": 2, "xi_lo": -2, "xi_hi": 2, "hbar_max": 2}


def star_grid_monomials(grid=STAR_GRID):
    return [(h, z, a) for h in range(grid["hbar_max"] + 1)
            for z in range(grid["xi_hi"], grid["xi_lo"] - 1, -1)
            for a in range(grid["x_max"] + 1)]


def star_table_entry_bounds(grid=STAR_GRID):
    """Smallest xi-degree any grid product can reach (products are exact above it)."""
    return 2 * grid["xi_lo"] - grid["x_max"]


def star_table(T, grid=STAR_GRID):
    zmin = star_table_entry_bounds(grid)
    rows = []
    for ma in star_grid_monomials(grid):
        for mb in star_grid_monomials(grid):
            prod = compose({ma: Fraction(1)}, {mb: Fraction(1)}, zmin)
            rows.append({"a": _entry(*ma, 1, T), "b": _entry(*mb, 1, T), "product": to_entries(prod, T)})
    return rows


def oracle_window(trunc):
    """Clip a problem truncation to the oracle limits."""
    return {
        "hbar_max": min(trunc["hbar_max"], ORACLE_LIMITS["hbar_max"]),
        "xi_min": max(trunc["xi_min"], ORACLE_LIMITS["xi_min"]),
        "x_max": min(trunc["x_max"], ORACLE_LIMITS["x_max"]),
    }


def check_window(window):
    for k, lim in ORACLE_LIMITS.items():
        v = window[k]
        if (k == "xi_min" and v < lim) or (k != "xi_min" and v > lim):
            raise WindowTooLarge(f"{k}={v} beyond oracle limit {lim}", parameter=k, limit=lim)


def seed_tables(spec, window):
    """Tables that depend only on the problem's seed and (f, g), all at t = 0."""
    check_window(window)
    T = spec["T"]
    zmin = window["xi_min"]
    X0 = from_terms(spec["seed"].get("X0", []))
    alpha = Fraction(spec["seed"].get("alpha0", "0/1"))
    f = from_terms(spec["f"])
    g = from_terms(spec["g"])
    E = star_exp_total(X0, zmin)
    S = phase_from_exp(E, zmin)
    if any(h < 0 for (h, _, _) in S):
        raise ValueError("negative hbar power survived the logarithm")
    # inner stage first
    df = conjugate_exp(X0, conjugate_power(alpha, f, zmin), zmin)
    dg = conjugate_exp(X0, conjugate_power(alpha, g, zmin), zmin)
    return {
        "seed_phase": to_entries(S, T, window),
        "seed_dressed_f": to_entries(df, T, window),
        "seed_dressed_g": to_entries(dg, T, window),
    }


def oracle_tables(spec, window=None):
    if window is None:
        window = oracle_window(spec["trunc"])
    out = {"window": dict(window), "star_table": star_table(spec["T"])}
    out.update(seed_tables(spec, window))
    return out
