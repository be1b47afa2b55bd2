import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from hbarkp.errors import (
    LogInProjection,
    LogLogProduct,
    MonomialOutOfWindow,
    NonNegativePowerInIntegrand,
    NotDivisibleByHbar,
    PolicyMismatch,
    SeriesInversionError,
    TrustUnderflow,
)
from hbarkp.series import (
    GradedSymbol,
    Monomial,
    TruncationPolicy,
    add,
    canonical_order,
    divide_hbar,
    format_rational,
    from_json,
    hbar_component,
    inverse,
    make_symbol,
    mul,
    parse_symbol,
    partial,
    rational,
    scale,
    shift_hbar,
    sub,
    sum_symbols,
    to_json,
    to_text,
    xi_antiderivative,
    xi_project,
)

from _support import agree_on_shared, symbols

P = TruncationPolicy(hbar_max=3, xi_min=-6, t_total_max=2, x_max=4, num_times=3)


def s(text, p=P):
    return parse_symbol(text, p)


# --- rationals and monomials ------------------------------------------------

def test_rationals_are_reduced():
    assert format_rational(rational("6/4")) == "3/2"
    assert format_rational(rational("0/5")) == "0/1"
    assert format_rational(rational("3/-6")) == "-1/2"
    assert format_rational(rational(7)) == "7/1"


def test_rational_rejects_floats():
    with pytest.raises(TypeError):
        rational(0.5)


def test_monomial_key_pads_times():
    assert Monomial(h=1, xi=-2, x=3, t=(1,)).key(3) == (1, -2, 0, 3, 1, 0, 0)
    with pytest.raises(MonomialOutOfWindow):
        Monomial(t=(1, 0, 0, 1)).key(3)


def test_empty_window_rejected():
    with pytest.raises(ValueError):
        TruncationPolicy(hbar_max=-1, xi_min=0, t_total_max=0, x_max=0)
    with pytest.raises(ValueError):
        TruncationPolicy(hbar_max=0, xi_min=1, t_total_max=0, x_max=0)
    with pytest.raises(ValueError):
        TruncationPolicy(hbar_max=0, xi_min=0, t_total_max=0, x_max=0, num_times=0)


# --- make_symbol ----------------------------------------------------------------

def test_make_symbol_examples():
    assert make_symbol([], P) == 0
    xi = Monomial(xi=1)
    assert make_symbol([(xi, 1), (xi, -1)], P) == 0
    a = make_symbol([(Monomial(x=1, xi=-1), 1)], P)
    assert a.terms == {P.key(x=1, xi=-1): 1}
    assert a.is_complete


@pytest.mark.parametrize("mono, why", [
    (Monomial(xi=-7), "xi"),
    (Monomial(h=4), "hbar"),
    (Monomial(x=5), "x"),
    (Monomial(t=(2, 1, 0)), "t"),
    (Monomial(logxi=2), "logxi"),
])
def test_make_symbol_window(mono, why):
    with pytest.raises(MonomialOutOfWindow) as ei:
        make_symbol([(mono, 1)], P)
    assert ei.value.context["violation"] == why


def test_parse_and_text():
    a = s("x*xi^-1 - 1/2*h*xi^-3 + log + 3*t2^2")
    assert a.coefficient(P.key(h=1, xi=-3)) == mpq(-1, 2)
    assert a.coefficient(P.key(t=(0, 2, 0))) == 3
    assert a.coefficient(P.key(logxi=1)) == 1
    assert parse_symbol(to_text(a), P) == a
    assert to_text(GradedSymbol.zero(P)) == "0"
    with pytest.raises(ValueError):
        s("y^2")


# --- ring operations ------------------------------------------------------------

def test_ring_examples():
    assert mul(s("xi"), s("xi^-1")) == s("1")
    assert mul(s("x + xi"), s("x - xi")) == s("x^2 - xi^2")
    assert add(s("log"), s("log")) == s("2*log")
    assert scale(s("x"), mpq(1, 3)) == s("1/3*x")
    assert sub(s("x"), s("x")) == 0


def test_log_log_product_rejected():
    with pytest.raises(LogLogProduct):
        mul(s("log"), s("x*log"))


def test_policy_mismatch():
    other = P.with_(xi_min=-5)
    with pytest.raises(PolicyMismatch):
        add(s("xi"), s("xi", other))
    with pytest.raises(PolicyMismatch):
        mul(s("xi"), s("xi", other))


def test_truncation_is_recorded():
    a = mul(s("xi^-4"), s("xi^-3 + xi^-1"))
    # xi^-7 was dropped, xi^-5 kept; the trust window says so
    assert a.terms == {P.key(xi=-5): 1}
    assert a.coefficient(P.key(xi=-5)) == 1
    assert a.trust.xi_trust == -6
    # multiplying by xi^2 lifts the unknown tail to xi^-5 and below
    b = mul(a, s("xi^2"))
    assert b.coefficient(P.key(xi=-3)) == 1
    with pytest.raises(TrustUnderflow):
        b.coefficient(P.key(xi=-5))
    assert b.trusted().terms == {P.key(xi=-3): 1}


# --- derivatives, integral, projections ---------------------------------------

def test_partial_examples():
    assert partial(s("log"), "xi") == s("xi^-1")
    assert partial(s("x^2*xi^-1"), "x") == s("2*x*xi^-1")
    assert partial(s("t2^2*xi"), 2) == s("2*t2*xi")
    assert partial(s("t2^2*xi"), "t2") == s("2*t2*xi")
    assert partial(s("xi^2*log"), "xi") == s("2*xi*log + xi")
    with pytest.raises(ValueError):
        partial(s("xi"), 4)


def test_xi_antiderivative_examples():
    assert xi_antiderivative(s("xi^-2")) == s("-xi^-1")
    assert xi_antiderivative(s("5/2*xi^-1")) == s("5/2*log")
    assert xi_antiderivative(s("2*x*xi^-3")) == s("-x*xi^-2")
    with pytest.raises(NonNegativePowerInIntegrand):
        xi_antiderivative(s("xi^-2 + 1"))
    with pytest.raises(NonNegativePowerInIntegrand):
        xi_antiderivative(s("xi^-2*log"))


def test_hbar_component_examples():
    a = s("h^2*xi^-1 + x*xi^-2")
    assert hbar_component(a, 2) == s("xi^-1")
    assert hbar_component(a, 0) == s("x*xi^-2")
    assert hbar_component(s("xi^3"), 5) == 0
    with pytest.raises(ValueError):
        hbar_component(a, -1)


def test_xi_project_examples():
    a = s("xi + x*xi^-1")
    assert xi_project(a, "geq0") == s("xi")
    assert xi_project(a, "neg") == s("x*xi^-1")
    b = s("xi^2 + 2*x")
    assert xi_project(b, "geq0") == b
    with pytest.raises(LogInProjection):
        xi_project(s("log + xi"), "neg")


def test_divide_hbar():
    assert divide_hbar(s("h*x + h^2*xi")) == s("x + h*xi")
    with pytest.raises(NotDivisibleByHbar):
        divide_hbar(s("h*x + xi"))


def test_inverse():
    a = s("2*xi + x*xi^-1 + h*xi^-2")
    one = mul(a, inverse(a))
    assert one.agrees_with(s("1"))
    assert one.trusted() == s("1")
    with pytest.raises(SeriesInversionError):
        inverse(GradedSymbol.zero(P))
    with pytest.raises(SeriesInversionError):
        inverse(s("x*xi + 1"))


def test_json_form():
    a = s("x*xi^-1 + h*xi^-2 - 1/3*t1*xi")
    js = to_json(a)
    assert js[0] == {"h": 0, "xi": 1, "logxi": 0, "x": 0, "t": [1, 0, 0], "c": "-1/3"}
    assert [e["h"] for e in js] == sorted(e["h"] for e in js)
    assert from_json(js, P) == a


# --- properties -------------------------------------------------------------------

sy = symbols(P, xi=(-3, 2), x=(0, 2), h=(0, 2), tdeg=1)
sy_log = symbols(P, xi=(-3, 2), x=(0, 2), h=(0, 1), tdeg=1, log=True)


@given(sy, sy)
def test_commutativity(a, b):
    assert mul(a, b) == mul(b, a)
    assert add(a, b) == add(b, a)


@given(sy, sy, sy)
def test_associativity(a, b, c):
    assert mul(mul(a, b), c).agrees_with(mul(a, mul(b, c)))
    assert add(add(a, b), c) == add(a, add(b, c))


@given(sy, sy, sy)
def test_distributivity(a, b, c):
    assert mul(a, add(b, c)).agrees_with(add(mul(a, b), mul(a, c)))


@given(sy_log)
def test_projection_partition(a):
    a = sum_symbols([a], P)
    free = GradedSymbol({k: c for k, c in a.terms.items() if not k[2]}, P)
    assert add(xi_project(free, "geq0"), xi_project(free, "neg")) == free


@given(symbols(P, xi=(-6, -1), x=(0, 3), tdeg=2))
def test_antiderivative_inverts_partial(a):
    assert partial(xi_antiderivative(a), "xi") == a


@given(sy)
def test_hbar_components_partition(a):
    total = sum_symbols([shift_hbar(hbar_component(a, n), n) for n in range(P.hbar_max + 1)], P)
    assert total == a


@given(sy_log)
def test_text_and_json_roundtrip(a):
    assert parse_symbol(to_text(a), P) == a
    assert from_json(to_json(a), P) == a


@given(sy)
def test_canonical_iteration_order(a):
    keys = [k for k, _ in a]
    assert keys == sorted(keys, key=canonical_order)


SHALLOW = TruncationPolicy(hbar_max=2, xi_min=-3, t_total_max=1, x_max=3, num_times=2)
DEEP = SHALLOW.with_(xi_min=-10, hbar_max=8, t_total_max=4, x_max=12)
small = symbols(SHALLOW, xi=(-3, 2), x=(0, 2), h=(0, 1), tdeg=1, max_terms=3)


def _both(a):
    return a, a.with_policy(DEEP)


@given(small, small, small)
def test_trust_soundness_products(a, b, c):
    """Whatever a shallow computation vouches for, a deeper one confirms."""
    results = []
    for p_a, p_b, p_c in zip(_both(a), _both(b), _both(c)):
        e = mul(mul(p_a, p_b), p_c)
        e = add(e, partial(mul(p_a, partial(p_c, "x")), "xi"))
        e = add(e, mul(xi_project(mul(p_b, p_c), "neg"), partial(p_a, 2)))
        e = add(e, mul(hbar_component(shift_hbar(p_a, 1), 1), p_b))
        results.append(e)
    assert agree_on_shared(*results) == []


@given(small)
def test_trust_soundness_inverse(a):
    lead = make_symbol([(SHALLOW.key(xi=1), 1)], SHALLOW)
    body = GradedSymbol({k: c for k, c in a.terms.items() if k[1] <= -1}, SHALLOW)
    u = add(lead, body)
    inv_s = inverse(u)
    inv_d = inverse(u.with_policy(DEEP))
    assert agree_on_shared(inv_s, inv_d) == []
    assert mul(u, inv_s).agrees_with(GradedSymbol.const(1, SHALLOW))


@given(st.integers(0, 3), st.integers(-6, 2), st.integers(0, 4))
def test_coefficient_lookup(h, xi, x):
    k = P.key(h=h, xi=xi, x=x)
    a = make_symbol([(k, 5)], P)
    assert a.coefficient(k) == 5
    assert a.coefficient(Monomial.from_key(k)) == 5
