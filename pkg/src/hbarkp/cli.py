"""Batch front end.

    python3 -m hbarkp run --spec problem.json --out report.json
    python3 -m hbarkp oracle --spec problem.json --out tables.json

``run`` validates the seed, solves the recursion, builds the wave function
and the tau expansion, and writes every table and check to one JSON
report.  The exit status is 0 iff every requested check passed.  Set
``HBARKP_LOG=debug`` (or ``info``) for a trace on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

from gmpy2 import mpq

from . import oracle as oracle_mod
from .calculus import dressing_conjugate, star_mul
from .dkp import (
    DKPSeed,
    check_canonical_pair,
    dkp_dress,
    dkp_lax_residual,
    dkp_rh_residual,
    extend_seed_in_t,
    principal,
)
from .errors import HbarKPError, SpecParseError, TrustUnderflow
from .recursion import (
    RHProblem,
    build_lax,
    grades_vanishing,
    order_record,
    residual_ccr,
    residual_lax,
    residual_rh,
    solve,
    total_X,
)
from .series import (
    XI,
    GradedSymbol,
    TrustRecord,
    TruncationPolicy,
    format_rational,
    from_json,
    sub,
    to_json,
)
from .tau import tau_from_wave, verify_tau_wave
from .wkb import s_to_x, wave_function, x_to_s

log = logging.getLogger("hbarkp")

TASKS = ("validate-seed", "solve", "wkb", "tau")


# ---------------------------------------------------------------------------
# problem files

def _need(d, key, kind, where):
    if key not in d:
        raise SpecParseError(f"missing {where}{key}", field=where + key)
    v = d[key]
    if kind is int and (not isinstance(v, int) or isinstance(v, bool)):
        raise SpecParseError(f"{where}{key} must be an integer", field=where + key)
    if kind is list and not isinstance(v, list):
        raise SpecParseError(f"{where}{key} must be a list", field=where + key)
    if kind is dict and not isinstance(v, dict):
        raise SpecParseError(f"{where}{key} must be an object", field=where + key)
    return v


class Problem:
    """Parsed spec.  ``fg_xi_trust`` (optional) marks f, g as known only at xi >= it."""

    def __init__(self, spec: dict):
        if not isinstance(spec, dict):
            raise SpecParseError("spec must be a JSON object")
        self.raw = spec
        T = _need(spec, "T", int, "")
        tr = _need(spec, "trunc", dict, "")
        try:
            self.policy = TruncationPolicy(
                hbar_max=_need(tr, "hbar_max", int, "trunc."),
                xi_min=_need(tr, "xi_min", int, "trunc."),
                t_total_max=_need(tr, "t_total_max", int, "trunc."),
                x_max=_need(tr, "x_max", int, "trunc."),
                num_times=T,
            )
        except ValueError as exc:
            raise SpecParseError(str(exc), field="trunc") from exc
        self.N = _need(spec, "N", int, "")
        seed = _need(spec, "seed", dict, "")
        tasks = spec.get("tasks", ["verify-all"])
        if not isinstance(tasks, list) or any(t not in TASKS + ("verify-all",) for t in tasks):
            raise SpecParseError(f"tasks must be a subset of {list(TASKS) + ['verify-all']}", field="tasks")
        self.tasks = set(TASKS) if "verify-all" in tasks else set(tasks)
        # later stages need the earlier ones
        for i, t in enumerate(TASKS):
            if t in self.tasks:
                self.tasks.update(TASKS[:i])
        self.t_on = bool(spec.get("t_on", True))
        self.fg_xi_trust = spec.get("fg_xi_trust")
        if self.fg_xi_trust is not None and not isinstance(self.fg_xi_trust, int):
            raise SpecParseError("fg_xi_trust must be an integer", field="fg_xi_trust")
        self.f = self._terms(_need(spec, "f", list, ""), "f", polynomial=True)
        self.g = self._terms(_need(spec, "g", list, ""), "g", polynomial=True)
        self.X0 = self._terms(seed.get("X0", []), "seed.X0")
        try:
            self.alpha0 = mpq(str(seed.get("alpha0", "0/1")))
        except ValueError as exc:
            raise SpecParseError("seed.alpha0 must be a rational 'p/q'", field="seed.alpha0") from exc
        if self.fg_xi_trust is not None:
            t = TrustRecord(xi_trust=self.fg_xi_trust, tw=self.policy.t_weights)
            self.f, self.g = self.f.with_trust(t), self.g.with_trust(t)

    def _terms(self, terms, name, polynomial=False) -> GradedSymbol:
        for e in terms:
            if not isinstance(e, dict) or "c" not in e:
                raise SpecParseError(f"{name}: every term needs a coefficient 'c'", field=name)
            if any(e.get("t", [])):
                raise SpecParseError(f"{name}: terms are given at t = 0", field=name)
        try:
            s = from_json([dict(e, t=[0] * self.policy.num_times) for e in terms], self.policy)
        except (HbarKPError, ValueError, ZeroDivisionError) as exc:
            raise SpecParseError(f"{name}: {exc}", field=name) from exc
        if polynomial and any(k[0] < 0 for k in s.terms):
            raise SpecParseError(f"{name}: negative hbar power", field=name)
        return s


def load_spec(path: str) -> Problem:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecParseError(f"cannot read spec: {exc}", path=path) from exc
    return Problem(spec)


# ---------------------------------------------------------------------------
# tables shared with the oracle

def _oracle_spec_window(prob: Problem):
    w = prob.raw.get("oracle_window")
    if w is None:
        return oracle_mod.oracle_window(prob.raw["trunc"])
    return {k: w[k] for k in ("hbar_max", "xi_min", "x_max")}


def _in_window(key, w) -> bool:
    return key[0] <= w["hbar_max"] and key[XI] >= w["xi_min"] and key[3] <= w["x_max"]


def _window_entries(a: GradedSymbol, w, what: str) -> list:
    for k in a.terms:
        if _in_window(k, w) and not a.trust.exact(k):
            raise TrustUnderflow(f"{what} not exact inside the oracle window", monomial=list(k))
    # every window monomial must be exact, including the ones that came out zero
    tr = a.trust
    if tr.xi_trust > w["xi_min"] or tr.hbar_trust < w["hbar_max"] or tr.t_trust < 0 \
            or tr.x_trust < w["x_max"] + w["hbar_max"]:
        raise TrustUnderflow(f"{what}: trust {tr} does not cover the oracle window")
    return [e for e, k in zip(to_json(a), (k for k, _ in a)) if _in_window(k, w)]


def engine_tables(prob: Problem, window: dict) -> dict:
    """The oracle's tables recomputed with the fast engine (all at t = 0)."""
    oracle_mod.check_window(window)
    T = prob.policy.num_times
    grid = oracle_mod.STAR_GRID
    sp = TruncationPolicy(hbar_max=grid["hbar_max"] * 2 + grid["x_max"], xi_min=oracle_mod.star_table_entry_bounds(grid),
                          t_total_max=0, x_max=2 * grid["x_max"], num_times=T)
    rows = []
    for ma in oracle_mod.star_grid_monomials(grid):
        a = GradedSymbol({sp.key(h=ma[0], xi=ma[1], x=ma[2]): mpq(1)}, sp)
        for mb in oracle_mod.star_grid_monomials(grid):
            b = GradedSymbol({sp.key(h=mb[0], xi=mb[1], x=mb[2]): mpq(1)}, sp)
            rows.append({"a": to_json(a)[0], "b": to_json(b)[0], "product": to_json(star_mul(a, b))})
    # inputs are taken as the given polynomials; x is widened so nothing is cut
    wx = window["x_max"] * max(1, -window["xi_min"])
    wp = TruncationPolicy(hbar_max=window["hbar_max"], xi_min=window["xi_min"], t_total_max=0,
                          x_max=max(wx, prob.f.max_x(), prob.g.max_x()), num_times=T)

    def rehome(s):
        return GradedSymbol._from_raw({k: c for k, c in s.terms.items() if k[XI] >= wp.xi_min and k[0] <= wp.hbar_max},
                                      wp)

    X0 = rehome(prob.X0)
    S = x_to_s(X0).S
    df = dressing_conjugate(X0, prob.alpha0, False, rehome(prob.f))
    dg = dressing_conjugate(X0, prob.alpha0, False, rehome(prob.g))
    return {
        "window": dict(window),
        "star_table": rows,
        "seed_phase": _window_entries(S, window, "seed phase"),
        "seed_dressed_f": _window_entries(df, window, "dressed f"),
        "seed_dressed_g": _window_entries(dg, window, "dressed g"),
    }


def oracle_report(prob: Problem, window: dict | None = None) -> dict:
    w = window or _oracle_spec_window(prob)
    return oracle_mod.oracle_tables(prob.raw, w)


# ---------------------------------------------------------------------------
# pipeline

class Failure(Exception):
    def __init__(self, record):
        super().__init__(record.get("message", ""))
        self.record = record


def _guard(module, operation, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except HbarKPError as exc:
        rec = {"module": module, "operation": operation}
        rec.update(exc.record())
        raise Failure(rec) from exc


def _check(report, failures, module, name, ok, **extra):
    report[name] = bool(ok)
    if not ok:
        rec = {"module": module, "operation": name, "error": "CheckFailed", "message": f"{name} is nonzero"}
        rec.update(extra)
        failures.append(rec)


def _table(a: GradedSymbol) -> list:
    return to_json(a.trusted())


def run_pipeline(prob: Problem, depth: int | None = None, verify_only: bool = False,
                 emit_oracle: bool = False) -> dict:
    p = prob.policy
    N = prob.N if depth is None else depth
    failures: list = []
    out: dict = {"problem": {"T": p.num_times, "trunc": prob.raw["trunc"], "N": N, "tasks": sorted(prob.tasks),
                             "t_on": prob.t_on}}
    try:
        _pipeline(prob, N, verify_only, out, failures)
        if emit_oracle:
            w = _oracle_spec_window(prob)
            eng = _guard("cli", "engine_tables", engine_tables, prob, w)
            orc = _guard("cli", "oracle_tables", oracle_report, prob, w)
            sec = {"tables": eng} if not verify_only else {}
            checks = {}
            for name in ("star_table", "seed_phase", "seed_dressed_f", "seed_dressed_g"):
                _check(checks, failures, "cli", f"oracle_agrees_{name}", eng[name] == orc[name])
            sec["checks"] = checks
            out["oracle"] = sec
    except Failure as exc:
        failures.append(exc.record)
    out["failures"] = failures
    out["verdict"] = "fail" if failures else "pass"
    return out


def _pipeline(prob: Problem, N: int, verify_only: bool, out: dict, failures: list):
    p = prob.policy
    tasks = prob.tasks
    if "validate-seed" not in tasks:
        return
    sec: dict = {}
    checks: dict = {}
    sec["checks"] = checks
    out["seed"] = sec
    f0, g0 = principal(prob.f), principal(prob.g)
    _guard("dkp", "check_canonical_pair", check_canonical_pair, f0, g0)
    rh = RHProblem(prob.f, prob.g, None, N, p, prob.t_on)
    _guard("rh-recursion", "check_canonical", rh.check_canonical)
    checks["canonical"] = True
    seed = _guard("dkp", "DKPSeed", _seed, prob)
    if prob.t_on:
        seed = _guard("dkp", "extend_seed_in_t", extend_seed_in_t, f0, g0, seed)
    L0, M0 = _guard("dkp", "dkp_dress", dkp_dress, seed, prob.t_on)
    rf, rg = _guard("dkp", "dkp_rh_residual", dkp_rh_residual, f0, g0, L0, M0)
    _check(checks, failures, "dkp", "dkp_rh_residual", rf.is_zero_within_trust() and rg.is_zero_within_trust())
    if prob.t_on:
        lax = {}
        for n in range(1, p.num_times + 1):
            r = _guard("dkp", "dkp_lax_residual", dkp_lax_residual, L0, n)
            _check(lax, failures, "dkp", f"n={n}", r.is_zero_within_trust(), n=n)
        checks["dkp_lax_residual"] = lax
    if not verify_only:
        sec["X0"] = _table(seed.X0)
        sec["trust"] = seed.X0.trust.as_dict(p)
    if "solve" not in tasks:
        return

    problem = RHProblem(prob.f, prob.g, seed, N, p, prob.t_on)
    data = _guard("rh-recursion", "solve", solve, problem)
    sec = {}
    checks = {}
    out["solve"] = sec
    rf, rg = _guard("rh-recursion", "residual_rh", residual_rh, problem, data)
    gf, gg = grades_vanishing(rf, N), grades_vanishing(rg, N)
    grades = [a and b for a, b in zip(gf, gg)]
    for k, ok in enumerate(grades):
        if not ok:
            failures.append({"module": "rh-recursion", "operation": "residual_rh", "error": "CheckFailed",
                             "message": f"grade {k} of the dressed (f, g) has negative powers", "grade": k})
    checks["residual_rh_grades"] = grades
    L, M = _guard("rh-recursion", "build_lax", build_lax, data, prob.t_on)
    _check(checks, failures, "rh-recursion", "residual_ccr",
           _guard("rh-recursion", "residual_ccr", residual_ccr, L, M).is_zero_within_trust())
    if prob.t_on:
        lax = {}
        for n in range(1, p.num_times + 1):
            r = _guard("rh-recursion", "residual_lax", residual_lax, L, n)
            _check(lax, failures, "rh-recursion", f"n={n}", r.is_zero_within_trust(), n=n)
        checks["residual_lax"] = lax
    sec["checks"] = checks
    sec["alpha"] = [format_rational(a) for a in data.alpha]
    if not verify_only:
        sec["orders"] = [order_record(i, data, grades[i] if i < len(grades) else None)
                         for i in range(data.depth + 1)]
        sec["trust"] = [x.trust.as_dict(p) for x in data.X]
    if "wkb" not in tasks:
        return

    sec = {}
    checks = {}
    out["wkb"] = sec
    z_depth = -p.xi_min
    wave = _guard("wkb", "wave_function", wave_function, data, prob.t_on, z_depth)
    for name in ("x_t1_absorption", "L_psi_eq_z_psi"):
        if name in wave.checks:
            _check(checks, failures, "wkb", name, wave.checks[name])
    # reported, not gated
    checks["M_psi_eq_dz_psi"] = wave.checks.get("M_psi_eq_dz_psi")
    X = total_X(data.X, p)
    phase = _guard("wkb", "x_to_s", x_to_s, X)
    Xb = _guard("wkb", "s_to_x", s_to_x, phase)
    _check(checks, failures, "wkb", "roundtrip", sub(Xb, X.with_policy(Xb.policy)).is_zero_within_trust())
    sec["checks"] = checks
    if not verify_only:
        sec["S"] = phase.to_json()
        sec.update({k: v for k, v in wave.to_json().items() if k != "checks"})
    if "tau" not in tasks:
        return

    sec = {}
    checks = {}
    out["tau"] = sec
    tau = _guard("tau", "integrate_F", tau_from_wave, wave, N, z_depth)
    for name, ok in tau.checks.items():
        _check(checks, failures, "tau", name, ok)
    rep = _guard("tau", "verify_tau_wave", verify_tau_wave, tau, wave, z_depth)
    _check(checks, failures, "tau", "tau_wave", rep["tau_wave"])
    checks["certified_monomials"] = rep["certified_monomials"]
    checks["derivative_form"] = rep["derivative_form"]["zero"]
    sec["checks"] = checks
    if not verify_only:
        sec["F"] = tau.to_json()["F"]
        sec["residual"] = rep["residual"]


def _seed(prob: Problem) -> DKPSeed:
    return DKPSeed(prob.X0, prob.alpha0)


# ---------------------------------------------------------------------------
# output

def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".hbarkp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the report ordinary permissions
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(spec_path: str, out_path: str, depth: int | None = None, verify_only: bool = False,
        emit_oracle_tables: bool = False) -> int:
    try:
        prob = load_spec(spec_path)
    except SpecParseError as exc:
        rec = {"module": "cli", "operation": "load_spec"}
        rec.update(exc.record())
        write_atomic(out_path, dumps({"verdict": "fail", "failures": [rec]}))
        return 2
    report = run_pipeline(prob, depth, verify_only, emit_oracle_tables)
    write_atomic(out_path, dumps(report))
    for rec in report["failures"]:
        log.error("failure: %s", json.dumps(rec, sort_keys=True))
    return 0 if report["verdict"] == "pass" else 1


def oracle(spec_path: str, out_path: str) -> int:
    try:
        prob = load_spec(spec_path)
        tables = oracle_report(prob)
    except HbarKPError as exc:
        rec = {"module": "cli", "operation": "oracle"}
        rec.update(exc.record())
        write_atomic(out_path, dumps({"verdict": "fail", "failures": [rec]}))
        return 2 if isinstance(exc, SpecParseError) else 1
    write_atomic(out_path, dumps(tables))
    return 0


def _setup_logging():
    level = os.environ.get("HBARKP_LOG", "").strip().upper()
    if not level:
        return
    logging.basicConfig(level=getattr(logging, level, logging.INFO), stream=sys.stderr,
                        format="%(name)s %(levelname)s %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    ap = argparse.ArgumentParser(prog="hbarkp", description="hbar-dependent KP: Riemann-Hilbert solver and checks")
    sub_ = ap.add_subparsers(dest="cmd", required=True)
    r = sub_.add_parser("run", help="solve a problem and write the verification report")
    r.add_argument("--spec", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--depth", type=int, default=None, help="override N from the problem file")
    r.add_argument("--verify-only", action="store_true", help="report checks only, no coefficient tables")
    r.add_argument("--emit-oracle-tables", action="store_true",
                   help="also run the brute-force oracle and diff its tables")
    o = sub_.add_parser("oracle", help="brute-force reference tables (small windows only)")
    o.add_argument("--spec", required=True)
    o.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    if args.cmd == "run":
        return run(args.spec, args.out, args.depth, args.verify_only, args.emit_oracle_tables)
    return oracle(args.spec, args.out)


if __name__ == "__main__":
    sys.exit(main())
