import math
import struct

import pytest
from hypothesis import given, settings, strategies as st

from netfib.dsl import (BinOp, Call, DslShapeError, DslSyntaxError, InputVar, Neg, Num, SelfVar,
                        SystemSignature, compile_expr, evaluate, param_names, parse,
                        to_text, validate)
from strategies import exprs


def bits(v: float) -> bytes:
    return struct.pack("<d", v)


# -- parsing ------------------------------------------------------------------

def test_neg_self_var():
    assert parse("-x[0]") == Neg(SelfVar(0))


def test_mixed_sum_is_left_associative():
    e = parse("u[0][0] + 2*u[1][0] - x[0]")
    assert e == BinOp("-", BinOp("+", InputVar(0, 0), BinOp("*", Num(2.0), InputVar(1, 0))), SelfVar(0))


def test_call_then_power():
    assert parse("sin(x[0])^2") == BinOp("^", Call("sin", SelfVar(0)), Num(2.0))


def test_power_is_right_associative():
    assert parse("2^3^2") == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert evaluate(parse("2^3^2"), []) == 512.0


def test_unary_minus_binds_to_power_base():
    assert parse("-2^2") == BinOp("^", Neg(Num(2.0)), Num(2.0))
    assert parse("-sin(x[0])") == Neg(Call("sin", SelfVar(0)))


def test_whitespace_is_insignificant():
    assert parse(" u [ 0 ] [ 1 ]*\tp[\"k\"]\n") == parse('u[0][1]*p["k"]')


def test_literals_with_exponents():
    assert parse("1.5e3") == Num(1500.0)
    assert parse(".25") == Num(0.25)
    assert parse("2E-2") == Num(0.02)


def test_neg_and_sub_print_differently():
    assert to_text(parse("-x[0]")) == "-(x[0])"
    assert to_text(parse("0 - x[0]")) == "(0.0 - x[0])"


@pytest.mark.parametrize("text, offset", [
    ("", 0),
    ("1 +", 3),
    ("(1", 2),
    ("x[0", 3),
    ("foo(1)", 0),
    ("x[0] x[1]", 5),
    ("u[0]", 4),
    ("1 $ 2", 2),
    ("1 +\u00a0\u00a0$", 7),
])
def test_syntax_error_offsets(text, offset):
    with pytest.raises(DslSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset


def test_syntax_error_lists_expected_tokens():
    with pytest.raises(DslSyntaxError) as info:
        parse("(1 + 2")
    assert ")" in info.value.expected
    with pytest.raises(DslSyntaxError) as info:
        parse("1 *")
    assert "number" in info.value.expected


def test_index_must_be_integer():
    with pytest.raises(DslSyntaxError):
        parse("x[1.5]")


# -- validation ---------------------------------------------------------------

def test_validate_self_index():
    assert validate(parse("x[1]"), SystemSignature(1))


def test_validate_two_slot_body():
    sig = SystemSignature(1, (1, 1))
    assert validate(parse("u[0][0]+2*u[1][0]-x[0]"), sig) == []
    assert validate(parse("u[2][0]"), sig)
    assert validate(parse("u[0][1]"), sig)


def test_validate_undeclared_parameter():
    problems = validate(parse('p["k"] * x[0]'), SystemSignature(1))
    assert len(problems) == 1 and '"k"' in problems[0]
    assert validate(parse('p["k"] * x[0]'), SystemSignature(1, (), {"k": 2.0})) == []


# -- evaluation ---------------------------------------------------------------

def test_eval_examples():
    assert evaluate(parse("-x[0]"), [1.0]) == -1.0
    assert evaluate(parse("u[0][0]+2*u[1][0]-x[0]"), [2.0], [[1.0], [1.0]]) == 1.0
    assert evaluate(parse("sin(x[0])"), [0.0]) == 0.0


def test_eval_shape_mismatch():
    with pytest.raises(DslShapeError):
        evaluate(parse("x[1]"), [1.0])
    with pytest.raises(DslShapeError):
        evaluate(parse("u[1][0]"), [1.0], [[1.0]])
    with pytest.raises(DslShapeError):
        evaluate(parse('p["k"]'), [1.0])


@pytest.mark.parametrize("text, expected", [
    ("1/0", math.inf),
    ("-1/0", -math.inf),
    ("1/-0", -math.inf),
    ("0/0", math.nan),
    ("log(0)", -math.inf),
    ("log(-1)", math.nan),
    ("sqrt(-1)", math.nan),
    ("exp(1000)", math.inf),
    ("0^-1", math.inf),
    ("(-8)^(1/3)", math.nan),
    ("10^400", math.inf),
    ("(-10)^401", -math.inf),
    ("abs(-0)", 0.0),
    ("tanh(1000)", 1.0),
    ("(1/0) - (1/0)", math.nan),
])
def test_ieee_edge_cases(text, expected):
    got = evaluate(parse(text), [])
    if math.isnan(expected):
        assert math.isnan(got)
    else:
        assert got == expected


def test_nan_propagates_through_functions():
    assert math.isnan(evaluate(parse("sin(0/0) + 1"), []))


@settings(max_examples=1000, deadline=None)
@given(exprs)
def test_print_parse_roundtrip(e):
    assert parse(to_text(e)) == e


@settings(max_examples=300, deadline=None)
@given(exprs, st.lists(st.floats(-10, 10), min_size=6, max_size=6),
       st.lists(st.lists(st.floats(-10, 10), min_size=4, max_size=4), min_size=4, max_size=4),
       st.floats(-5, 5))
def test_compiled_matches_tree_walk_bitwise(e, x, u, pval):
    params = {n: pval for n in param_names(e)}
    a = evaluate(e, x, u, params)
    b = compile_expr(e)(x, u, params)
    assert bits(a) == bits(b) or (math.isnan(a) and math.isnan(b))
    assert bits(evaluate(e, x, u, params)) == bits(a)
