"""Parser, printer, evaluator, and derivative checks for the expression language."""

import cmath
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from koopfreq import expr as ex

DIM = 3
PARAMS = ("a", "b")


# --- parsing and printing ---------------------------------------------------

# (source, canonical print)
CANON = [
    ("x1+x2*x3", "x1 + x2*x3"),
    ("(x1+x2)*x3", "(x1 + x2)*x3"),
    ("x1-x2-x3", "x1 - x2 - x3"),
    ("x1-(x2-x3)", "x1 - (x2 - x3)"),
    ("x1/x2/x3", "x1/x2/x3"),
    ("x1/(x2*x3)", "x1/(x2*x3)"),
    ("-x1^2", "-x1^2"),
    ("(-x1)^2", "(-x1)^2"),
    ("- -x1", "-(-x1)"),
    ("u^(1/2)", "u^(1/2)"),
    ("u^(-2)", "u^(-2)"),
    ("u^( - 1 / 3 )", "u^(-1/3)"),
    ("2*x1 + a*u^2", "2.0*x1 + a*u^2"),
    ("1e-3*x1", "0.001*x1"),
    ("sin(x1) + exp(b*u)", "sin(x1) + exp(b*u)"),
    ("sqrt( x2 )/cos(x3)", "sqrt(x2)/cos(x3)"),
]


@pytest.mark.parametrize("source,canon", CANON)
def test_print_canonical_and_stable(source, canon):
    e = ex.parse(source, DIM, PARAMS)
    assert str(e) == canon
    assert ex.parse(canon, DIM, PARAMS) == e


def _atoms():
    nums = st.sampled_from([0.0, 1.0, 2.0, 3.0, 0.5, 0.25, 10.0]).map(ex.Num)
    names = st.sampled_from([ex.Var(1), ex.Var(2), ex.Var(3), ex.UVar(),
                             ex.Param("a"), ex.Param("b")])
    return st.one_of(nums, names)


def _compound(children):
    binop = st.sampled_from([ex.Add, ex.Sub, ex.Mul, ex.Div])
    int_pows = st.integers(0, 4).map(Fraction)
    # rational / negative exponents are legal on the bare input channel only
    u_pows = st.tuples(st.integers(-3, 3).filter(bool), st.integers(1, 3)).map(
        lambda pq: Fraction(*pq))
    return st.one_of(
        st.tuples(binop, children, children).map(lambda t: t[0](t[1], t[2])),
        children.map(ex.Neg),
        st.tuples(children, int_pows).map(lambda t: ex.Pow(*t)),
        u_pows.map(lambda f: ex.Pow(ex.UVar(), f)),
        st.tuples(st.sampled_from(ex.FUNCTIONS), children).map(
            lambda t: ex.Call(t[0], t[1])),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(_atoms(), _compound, max_leaves=25))
def test_roundtrip_random_trees(tree):
    # print -> parse must reproduce the tree node for node
    assert ex.parse(str(tree), DIM, PARAMS) == tree


def test_tree_queries():
    e = ex.parse("a*x1 + b*u^(1/2) + x3", DIM, PARAMS)
    assert e.param_names() == {"a", "b"}
    assert e.max_var_index() == 3
    assert e.uses_fractional_u_power()
    assert not ex.parse("x1 + u^2", DIM).uses_fractional_u_power()


# --- error taxonomy ---------------------------------------------------------

def test_parse_error_offsets():
    with pytest.raises(ex.ParseError) as ei:
        ex.parse("x1 + * x2", DIM)
    assert ei.value.offset == 5
    with pytest.raises(ex.ParseError) as ei:
        ex.parse("x1 @ x2", DIM)
    assert ei.value.offset == 3
    with pytest.raises(ex.ParseError):
        ex.parse("(x1 + x2", DIM)
    with pytest.raises(ex.ParseError):
        ex.parse("", DIM)
    with pytest.raises(ex.ParseError):
        ex.parse("sin x1", DIM)  # functions need parentheses


def test_unknown_identifier():
    with pytest.raises(ex.UnknownIdentifier) as ei:
        ex.parse("x1 + foo", DIM)
    assert ei.value.name == "foo"
    assert ei.value.offset == 5
    with pytest.raises(ex.UnknownIdentifier) as ei:
        ex.parse("x4", DIM)  # out of range for dim 3
    assert ei.value.name == "x4"
    with pytest.raises(ex.UnknownIdentifier):
        ex.parse("a*x1", DIM, params=())  # param not declared


@pytest.mark.parametrize("source", [
    "x1^(1/2)", "x1^(-1)", "(u+1)^(1/2)", "u^x1", "u^(1/0)", "x1^1.5",
])
def test_bad_exponent(source):
    with pytest.raises(ex.BadExponent):
        ex.parse(source, DIM)


def test_eval_errors():
    with pytest.raises(ex.DivisionByZero):
        ex.evaluate(ex.parse("1/x1", 1), [0j], 1.0)
    with pytest.raises(ex.DivisionByZero):
        ex.evaluate(ex.parse("u^(-1)", 1), [1.0], 0j)
    with pytest.raises(ex.UnboundParameter):
        ex.evaluate(ex.parse("a*x1", 1, ("a",)), [1.0], 1.0)


# --- evaluation -------------------------------------------------------------

def test_evaluate_matches_cmath():
    x = (0.7 - 0.2j, 1.1 + 0.4j, -0.3 + 0.9j)
    u = 0.8 + 0.6j
    cases = [
        ("x1^2 + 2*x2", x[0] ** 2 + 2 * x[1]),
        ("sin(x3)*cos(x1)", cmath.sin(x[2]) * cmath.cos(x[0])),
        ("exp(u)/x2", cmath.exp(u) / x[1]),
        ("sqrt(x2) - u^3", cmath.sqrt(x[1]) - u ** 3),
        ("u^(1/2)", cmath.sqrt(u)),
        ("u^(-2)", u ** -2),
    ]
    for src, want in cases:
        got = ex.evaluate(ex.parse(src, DIM), x, u)
        assert got == pytest.approx(want, rel=1e-14), src


def test_evaluate_with_params():
    e = ex.parse("a*x1 + b", 1, PARAMS)
    got = ex.evaluate(e, [2.0 + 1j], 0.5, {"a": -1.5, "b": 0.25})
    assert got == pytest.approx(-1.5 * (2.0 + 1j) + 0.25)


def test_tracked_phase_picks_branch():
    """u^(1/2) follows the winding phase instead of the principal cut."""
    e = ex.parse("u^(1/2)", 1)
    u = cmath.exp(2j * math.pi)  # numerically 1, but one full turn around
    principal = ex.evaluate(e, [0j], u)
    tracked = ex.evaluate(e, [0j], u, u_phase=2 * math.pi)
    assert principal == pytest.approx(1.0, abs=1e-12)
    assert tracked == pytest.approx(-1.0, abs=1e-12)
    # a second full turn comes back to the principal value
    tracked2 = ex.evaluate(e, [0j], u, u_phase=4 * math.pi)
    assert tracked2 == pytest.approx(1.0, abs=1e-12)


def test_compile_expr_is_reusable():
    fn = ex.compile_expr(ex.parse("a*x1 + u", 1, ("a",)), {"a": -2.0})
    assert fn((1.0,), 0.5) == pytest.approx(-1.5)
    assert fn((2j,), 0.0) == pytest.approx(-4j)


# --- derivatives ------------------------------------------------------------

def _fd(e, x, u, params=None, h=1e-6):
    gx = []
    for i in range(len(x)):
        xp, xm = list(x), list(x)
        xp[i] += h
        xm[i] -= h
        gx.append((ex.evaluate(e, xp, u, params)
                   - ex.evaluate(e, xm, u, params)) / (2 * h))
    du = (ex.evaluate(e, x, u + h, params)
          - ex.evaluate(e, x, u - h, params)) / (2 * h)
    return gx, du


@pytest.mark.parametrize("source", [
    "x1^2*sin(x2) + x2/x1",
    "exp(x1)*u^2 + sqrt(x2)",
    "u^(1/3) + x1*u - cos(x2*x3)",
    "a*x1^3 + b/u",
])
def test_eval_grad_matches_finite_differences(source):
    # principal branch, u held away from the negative real axis
    e = ex.parse(source, DIM, PARAMS)
    x = (0.7 - 0.2j, 1.1 + 0.4j, -0.3 + 0.9j)
    u = 0.8 + 0.6j
    params = {"a": 1.3, "b": -0.7}
    gx, du = ex.eval_grad(e, x, u, params)
    fx, fu = _fd(e, x, u, params)
    for got, want in zip(gx, fx):
        assert got == pytest.approx(want, rel=1e-6, abs=1e-8)
    assert du == pytest.approx(fu, rel=1e-6, abs=1e-8)


def test_eval_grad_tracked_branch():
    # d/du u^(1/2) on the sheet reached after one turn is minus the principal one
    e = ex.parse("u^(1/2)", 1)
    u = 1.0 + 0j
    _, du0 = ex.eval_grad(e, [0j], u, u_phase=0.0)
    _, du1 = ex.eval_grad(e, [0j], u, u_phase=2 * math.pi)
    assert du0 == pytest.approx(0.5, abs=1e-12)
    assert du1 == pytest.approx(-0.5, abs=1e-12)
