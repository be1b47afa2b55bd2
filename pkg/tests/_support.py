"""Shared fixtures-by-function for the test modules.

Solver runs are cached per golden problem because several test files reuse
the same dressing data.
"""

from fractions import Fraction
from functools import lru_cache
from pathlib import Path
import json
import random

from gmpy2 import mpq
from hypothesis import strategies as st

from hbarkp.cli import Problem
from hbarkp.dkp import DKPSeed, extend_seed_in_t, principal
from hbarkp.recursion import RHProblem, solve
from hbarkp.series import GradedSymbol, TruncationPolicy, make_symbol, parse_symbol

GOLDEN = Path(__file__).parent / "golden"

# the window used throughout the acceptance suite
ACCEPT = TruncationPolicy(hbar_max=3, xi_min=-8, t_total_max=2, x_max=4, num_times=3)


def sym(text, p):
    return parse_symbol(text, p)


def golden_spec(name):
    with open(GOLDEN / f"{name}.json") as fh:
        return json.load(fh)


@lru_cache(maxsize=None)
def golden_problem(name):
    return Problem(golden_spec(name))


@lru_cache(maxsize=None)
def solved(name, depth=None):
    """(Problem, RHProblem, DressingData) for a committed spec."""
    prob = golden_problem(name)
    seed = DKPSeed(prob.X0, prob.alpha0)
    if prob.t_on:
        seed = extend_seed_in_t(principal(prob.f), principal(prob.g), seed)
    rh = RHProblem(prob.f, prob.g, seed, prob.N, prob.policy, prob.t_on)
    return prob, rh, solve(rh, depth)


# ---------------------------------------------------------------------------
# engine <-> oracle dicts (t-free symbols only)

def to_oracle(a: GradedSymbol) -> dict:
    out = {}
    for k, c in a.terms.items():
        assert not k[2] and not any(k[4:]), "oracle dicts are log- and t-free"
        out[(k[0], k[1], k[3])] = Fraction(int(c.numerator), int(c.denominator))
    return out


def from_oracle(d: dict, p: TruncationPolicy) -> GradedSymbol:
    return make_symbol([(p.key(h=h, xi=z, x=a), mpq(c.numerator, c.denominator)) for (h, z, a), c in d.items()], p)


def window_part(d: dict, hbar_max, xi_min, x_max=None) -> dict:
    return {k: c for k, c in d.items()
            if 0 <= k[0] <= hbar_max and k[1] >= xi_min and (x_max is None or k[2] <= x_max)}


def exact_part(a: GradedSymbol) -> dict:
    return to_oracle(a.trusted())


# ---------------------------------------------------------------------------
# random symbols

coefficients = st.fractions(min_value=-3, max_value=3, max_denominator=4).filter(bool)


def symbols(p, h=(0, None), xi=(None, 2), x=(0, None), tdeg=0, max_terms=4, log=False, min_terms=1):
    """Hypothesis strategy for GradedSymbols with full trust inside ``p``."""
    hlo, hhi = h[0], p.hbar_max if h[1] is None else h[1]
    zlo, zhi = p.xi_min if xi[0] is None else xi[0], xi[1]
    xlo, xhi = x[0], p.x_max if x[1] is None else x[1]
    T = p.num_times

    @st.composite
    def key(draw):
        t = [0] * T
        for _ in range(draw(st.integers(0, tdeg))):
            t[draw(st.integers(0, T - 1))] += 1
        lg = draw(st.integers(0, 1)) if log else 0
        return p.key(h=draw(st.integers(hlo, hhi)), xi=draw(st.integers(zlo, zhi)), logxi=lg,
                     x=draw(st.integers(xlo, xhi)), t=t)

    return st.lists(st.tuples(key(), coefficients), min_size=min_terms, max_size=max_terms).map(
        lambda es: make_symbol([(k, mpq(c.numerator, c.denominator)) for k, c in es], p))


def random_symbol(rng: random.Random, p, h=(0, None), xi=(None, -1), x=(0, None), terms=(1, 4)):
    """Seeded counterpart of :func:`symbols` for fixed-size corpora."""
    hhi = p.hbar_max if h[1] is None else h[1]
    zlo = p.xi_min if xi[0] is None else xi[0]
    xhi = p.x_max if x[1] is None else x[1]
    es = []
    for _ in range(rng.randint(*terms)):
        k = p.key(h=rng.randint(h[0], hhi), xi=rng.randint(zlo, xi[1]), x=rng.randint(x[0], xhi))
        c = mpq(rng.choice([-3, -2, -1, 1, 2, 3]), rng.choice([1, 2, 3]))
        es.append((k, c))
    return make_symbol(es, p)


def agree_on_shared(shallow: GradedSymbol, deep: GradedSymbol) -> list:
    """Monomials exactly known in both where the coefficients differ."""
    bad = []
    for k in set(shallow.terms) | set(deep.terms):
        if shallow.policy.violation(k) or not shallow.trust.exact(k):
            continue
        if deep.policy.violation(k) or not deep.trust.exact(k):
            continue
        if shallow.terms.get(k, 0) != deep.terms.get(k, 0):
            bad.append(k)
    return bad
