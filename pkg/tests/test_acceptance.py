"""Acceptance suite: nine end-to-end criteria, exact equality throughout.

Each test prints one ``PASS``/``FAIL`` line with its wall time.  Run
directly with ``python3 tests/test_acceptance.py`` or through pytest.
"""

import random
import sys
import time
from contextlib import contextmanager
from fractions import Fraction

import pytest
from gmpy2 import mpq

from hbarkp import cli, oracle
from hbarkp.calculus import star_commutator, star_mul
from hbarkp.dkp import DKPSeed, dkp_dress, dkp_lax_residual, extend_seed_in_t, principal
from hbarkp.recursion import (
    RHProblem,
    build_lax,
    grades_vanishing,
    residual_ccr,
    residual_lax,
    residual_rh,
    solve,
)
from hbarkp.series import GradedSymbol, TruncationPolicy, add, hbar_component, parse_symbol, scale, sub
from hbarkp.tau import TauExpansion, tau_from_wave, verify_tau_wave
from hbarkp.wkb import WKBPhase, s_to_x, wave_function, wkb_policy, x_to_s

from _support import ACCEPT, GOLDEN, golden_spec, random_symbol, solved, to_oracle

GOLDENS = ["trivial", "shifted", "nontrivial"]


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(n, title, budget):
        t0 = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            dt = time.perf_counter() - t0
            ok = ok and dt < budget
            with capsys.disabled():
                print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} ({dt:.1f}s, budget {budget}s)")
        assert dt < budget, f"criterion {n} took {dt:.1f}s"
    return run


def accept_problem(f, g, alpha0=0):
    P = ACCEPT
    return RHProblem(parse_symbol(f, P), g if isinstance(g, GradedSymbol) else parse_symbol(g, P),
                     DKPSeed(GradedSymbol.zero(P), alpha0), 3, P)


def solver_outputs():
    """Every accepted solver output used below: (label, t_on, data)."""
    out = [(name, solved(name)[0].t_on, solved(name)[2]) for name in GOLDENS]
    c1 = accept_problem("xi", "x + xi^-1", -1)
    out.append(("c=1", True, solve(c1)))
    return out


# --- 1 -------------------------------------------------------------------------

def test_1_star_product_soundness(criterion):
    with criterion(1, "star product vs normal-ordering oracle, associativity", 30):
        # products of grid monomials reach hbar^9, xi^-11, x^6; the engine must be complete there
        P = TruncationPolicy(hbar_max=9, xi_min=-11, t_total_max=0, x_max=6, num_times=1)
        grid = [(h, z, a) for h in range(4) for z in range(-4, 4) for a in range(4)]
        syms = {m: GradedSymbol({P.key(h=m[0], xi=m[1], x=m[2]): mpq(1)}, P) for m in grid}
        compared = 0
        for ma in grid:
            for mb in grid:
                prod = star_mul(syms[ma], syms[mb])
                assert all(prod.trust.exact(k) for k in prod.terms)
                want = oracle.compose({ma: Fraction(1)}, {mb: Fraction(1)}, -11)
                assert to_oracle(prod) == want, (ma, mb)
                compared += 1
        assert compared == 128 * 128

        rng = random.Random(20240601)
        Q = TruncationPolicy(hbar_max=3, xi_min=-8, t_total_max=0, x_max=4, num_times=1)
        nonzero = 0
        for _ in range(200):
            a, b, c = (random_symbol(rng, Q, xi=(-3, 2), x=(0, 2), h=(0, 1), terms=(1, 3)) for _ in range(3))
            r = sub(star_mul(star_mul(a, b), c), star_mul(a, star_mul(b, c)))
            assert r.is_zero_within_trust()
            nonzero += bool(star_mul(star_mul(a, b), c).trusted().terms)
        assert nonzero > 150


# --- 2 -------------------------------------------------------------------------

def test_2_canonical_structure(criterion):
    with criterion(2, "[xi, x] = hbar and [L, M] = hbar for solver outputs", 60):
        P = ACCEPT
        assert star_commutator(parse_symbol("xi", P), parse_symbol("x", P)) == parse_symbol("h", P)
        for label, t_on, data in solver_outputs():
            assert data.depth == 3 and data.policy == P, label
            L, M = build_lax(data, t_on)
            assert residual_ccr(L, M).is_zero_within_trust(), label
            assert L.trusted().terms and M.trusted().terms


# --- 3 -------------------------------------------------------------------------

def test_3_closed_forms(criterion):
    with criterion(3, "trivial and c = 1 problems solve in closed form", 30):
        P = ACCEPT
        cases = [(accept_problem("xi", "x"), [0, 0, 0, 0]),
                 (accept_problem("xi", add(parse_symbol("x", P), scale(parse_symbol("xi^-1", P), 1)), -1),
                  [-1, 0, 0, 0])]
        for rh, alpha in cases:
            data = solve(rh)
            assert all(X == 0 for X in data.X)
            assert data.alpha == alpha
            rf, rg = residual_rh(rh, data)
            assert grades_vanishing(rf, 3) == [True] * 4
            assert grades_vanishing(rg, 3) == [True] * 4


# --- 4 -------------------------------------------------------------------------

def test_4_generic_order_progress(criterion):
    with criterion(4, "golden nontrivial problem: grades vanish, early stop leaves a residual", 120):
        prob, rh, data = solved("nontrivial")
        assert prob.X0.trusted().terms
        N = rh.depth
        rf, rg = residual_rh(rh, data)
        assert grades_vanishing(rf, N) == [True] * (N + 1)
        assert grades_vanishing(rg, N) == [True] * (N + 1)
        for k in range(1, N + 1):
            early = solve(rh, k - 1)
            rf, rg = residual_rh(rh, early)
            gf, gg = grades_vanishing(rf, k), grades_vanishing(rg, k)
            assert all(gf[:k]) and all(gg[:k]), k
            assert not (gf[k] and gg[k]), k


# --- 5, 6 -----------------------------------------------------------------------

WKB = TruncationPolicy(hbar_max=3, xi_min=-6, t_total_max=0, x_max=3, num_times=1)


def corpus():
    rng = random.Random(7)
    return [random_symbol(rng, WKB, xi=(-4, -1), x=(0, 3), h=(0, 3), terms=(1, 4)) for _ in range(100)]


def test_5_regularity(criterion):
    with criterion(5, "hbar log of the star exponential is regular", 60):
        checked = 0
        for X in corpus():
            ph = x_to_s(X)
            assert all(k[0] >= 0 for k in ph.S.terms)
            # the brute-force logarithm agrees wherever the engine is exact
            brute = oracle.phase_from_exp(oracle.star_exp_total(to_oracle(X), WKB.xi_min), WKB.xi_min)
            for (h, z, a), c in brute.items():
                if h <= WKB.hbar_max:
                    assert h >= 0, "negative hbar power in the oracle phase"
            got = to_oracle(ph.S)
            for key in set(got) | {k for k in brute if 0 <= k[0] <= WKB.hbar_max}:
                mono = ph.S.policy.key(h=key[0], xi=key[1], x=key[2])
                if ph.S.trust.exact(mono) and not ph.S.policy.violation(mono):
                    assert got.get(key, 0) == brute.get(key, 0), key
                    checked += 1
        assert checked > 400

        ph = x_to_s(parse_symbol("x*xi^-1", WKB))
        W = wkb_policy(WKB)
        assert ph.grade(0).trusted() == parse_symbol("x*xi^-1 - 1/2*x*xi^-3 + 1/2*x*xi^-5", W)
        brute = oracle.phase_from_exp(oracle.star_exp_total({(0, -1, 1): Fraction(1)}, -6), -6)
        assert to_oracle(hbar_component(ph.S, 0)) == {k: v for k, v in brute.items() if k[0] == 0}
        for n in (1, 2, 3):
            assert ph.grade(n).is_zero_within_trust()
            assert not any(k[0] == n for k in brute)


def test_6_roundtrips(criterion):
    with criterion(6, "s_to_x and x_to_s are mutually inverse", 60):
        W = wkb_policy(WKB)
        for X in corpus():
            assert s_to_x(x_to_s(X)).agrees_with(X.with_policy(W))
            S = X.with_policy(W)
            assert x_to_s(s_to_x(WKBPhase(S)), W).S.agrees_with(S)


# --- 7 -------------------------------------------------------------------------

def test_7_lax_residuals(criterion):
    with criterion(7, "Lax equations at full and dispersionless order", 60):
        for label, t_on, data in solver_outputs():
            assert t_on, label
            L, _ = build_lax(data, t_on)
            L0 = hbar_component(L, 0)
            for n in (1, 2, 3):
                assert residual_lax(L, n).is_zero_within_trust(), (label, n)
                assert dkp_lax_residual(L0, n).is_zero_within_trust(), (label, n)
        for name in GOLDENS:
            _, rh, _ = solved(name)
            L0, _ = dkp_dress(rh.seed)
            for n in (1, 2, 3):
                assert dkp_lax_residual(L0, n).is_zero_within_trust(), (name, n)


# --- 8 -------------------------------------------------------------------------

def _mutation_detected(tau, wave, n):
    F = list(tau.F)
    F[n] = add(F[n], parse_symbol("t1", F[n].policy))
    return not verify_tau_wave(TauExpansion(F, tau.policy), wave, 6)["tau_wave"]


def test_8_tau_pipeline(criterion):
    with criterion(8, "tau function: integrable, R = 0, mutation detected", 60):
        certified = 0
        for label, t_on, data in solver_outputs():
            if any(data.alpha):
                continue
            wave = wave_function(data, t_on, z_depth=6)
            tau = tau_from_wave(wave, 3, z_depth=6)
            assert tau.checks == {"integrability": True, "gradient_consistency": True}, label
            rep = verify_tau_wave(tau, wave, 6)
            assert rep["tau_wave"] and rep["residual"] == [], label
            certified += rep["certified_monomials"]
            # a change in F_n enters hbar^2 R at hbar^(n+1), so F_0..F_2 are visible at hbar_max 3
            for n in range(3):
                assert _mutation_detected(tau, wave, n), (label, n)
        assert certified > 0

        # F_3 needs one more power of hbar: re-solve the golden problem at hbar_max 4
        spec = golden_spec("nontrivial")
        prob = cli.Problem(dict(spec, trunc=dict(spec["trunc"], hbar_max=4)))
        seed = extend_seed_in_t(principal(prob.f), principal(prob.g), DKPSeed(prob.X0, prob.alpha0))
        data = solve(RHProblem(prob.f, prob.g, seed, 3, prob.policy, True))
        wave = wave_function(data, z_depth=6)
        tau = tau_from_wave(wave, 3, z_depth=6)
        assert verify_tau_wave(tau, wave, 6)["tau_wave"]
        assert _mutation_detected(tau, wave, 3)


# --- 9 -------------------------------------------------------------------------

def test_9_end_to_end(criterion, tmp_path):
    with criterion(9, "reports are deterministic and the oracle tables agree", 120):
        for name in GOLDENS:
            spec = str(GOLDEN / f"{name}.json")
            a, b = tmp_path / f"{name}.a.json", tmp_path / f"{name}.b.json"
            assert cli.run(spec, str(a)) == 0
            assert cli.run(spec, str(b)) == 0
            assert a.read_bytes() == b.read_bytes() == (GOLDEN / f"{name}.report.json").read_bytes()
            prob = cli.load_spec(spec)
            w = cli._oracle_spec_window(prob)
            assert cli.engine_tables(prob, w) == cli.oracle_report(prob, w), name


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
