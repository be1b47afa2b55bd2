"""Build a problem file with a known nontrivial answer.

Pick an operator G = sum hbar^n G_n with xi-degrees <= -1 and set

    f = exp(-G/hbar) (hbar d) exp(G/hbar),   g = exp(-G/hbar) x exp(G/hbar).

Then [f, g] = hbar, and dressing with X(t=0) = G makes (f, g) equal to
(hbar d, x), so the solver has to recover G at t = 0.  f and g are infinite
series in 1/xi; the problem file lists them down to xi_min and says so through
``fg_xi_trust``.

    python3 demos/gauge_problem.py "x^2*xi^-3 + x*xi^-2 + h*x*xi^-3" out.json
"""

import argparse
import json
import sys

from hbarkp.calculus import ExpGenerator, ad_exp
from hbarkp.series import TruncationPolicy, parse_symbol, select, to_json

DEFAULT_G = "x^2*xi^-3 + x*xi^-2 + h*x*xi^-3 + h^2*x*xi^-2 + h^3*xi^-1"


def gauge_spec(G_text, T=3, hbar_max=3, xi_min=-8, t_total_max=2, x_max=4, N=3):
    p = TruncationPolicy(hbar_max=hbar_max, xi_min=xi_min, t_total_max=t_total_max, x_max=x_max, num_times=T)
    G = parse_symbol(G_text, p)
    gen = ExpGenerator.neg_order(-G)
    f = ad_exp(gen, parse_symbol("xi", p))
    g = ad_exp(gen, parse_symbol("x", p))
    if f.trust.x_trust != float("inf") or g.trust.x_trust != float("inf"):
        raise SystemExit("x_max too small for this G")

    def terms(s):
        return [{"h": e["h"], "xi": e["xi"], "x": e["x"], "c": e["c"]} for e in to_json(s)]

    X0 = select(G, lambda k: k[0] == 0)
    return {
        "T": T,
        "trunc": {"hbar_max": hbar_max, "xi_min": xi_min, "t_total_max": t_total_max, "x_max": x_max},
        "f": terms(f),
        "g": terms(g),
        "fg_xi_trust": int(max(f.trust.xi_trust, g.trust.xi_trust)),
        "seed": {"X0": terms(X0), "alpha0": "0/1"},
        "N": N,
        "tasks": ["verify-all"],
        "note": "gauge construction from G = " + G_text,
    }


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description="write a problem file whose dressing is a chosen gauge G")
    ap.add_argument("G", nargs="?", default=DEFAULT_G, help="G in the symbol text syntax")
    ap.add_argument("out", nargs="?", help="output path (default: stdout)")
    args = ap.parse_args()
    text = json.dumps(gauge_spec(args.G), indent=1, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
