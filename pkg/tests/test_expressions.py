import math

import pytest
from hypothesis import given, strategies as st

from obscheck.expressions import (
    Binary,
    DomainError,
    Literal,
    Param,
    ParseError,
    Unary,
    collect_params,
    eval_expr,
    eval_grad,
    format_expr,
    parse_expr,
)


class TestParsing:
    def test_function_call(self):
        assert parse_expr("sqrt(b)") == Unary("sqrt", Param("b"))

    def test_precedence_div_before_add(self):
        assert parse_expr("a/b + 1") == Binary(
            "+", Binary("/", Param("a"), Param("b")), Literal(1.0)
        )

    def test_power_binds_tighter_than_unary_minus(self):
        assert parse_expr("-b^2") == Unary("neg", Binary("^", Param("b"), Literal(2.0)))

    def test_unary_minus_binds_tighter_than_mul(self):
        assert parse_expr("-a*b") == Binary("*", Unary("neg", Param("a")), Param("b"))

    def test_left_associativity(self):
        assert parse_expr("a - b - c") == Binary(
            "-", Binary("-", Param("a"), Param("b")), Param("c")
        )
        assert parse_expr("a^b^c") == Binary(
            "^", Binary("^", Param("a"), Param("b")), Param("c")
        )

    def test_parentheses_override(self):
        assert parse_expr("a - (b - c)") == Binary(
            "-", Param("a"), Binary("-", Param("b"), Param("c"))
        )

    def test_syntax_error_carries_position(self):
        with pytest.raises(ParseError) as err:
            parse_expr("a +")
        assert err.value.position == 3

    def test_unknown_function(self):
        with pytest.raises(ParseError, match="unknown function 'sin'"):
            parse_expr("sin(a)")

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse_expr("a b")

    def test_scientific_notation(self):
        assert parse_expr("1.5e-3") == Literal(1.5e-3)


class TestEval:
    def test_sqrt(self):
        assert eval_expr(parse_expr("sqrt(b)"), {"b": 0.64}) == pytest.approx(0.8)

    def test_ratio(self):
        assert eval_expr(parse_expr("a/b"), {"a": 0.6, "b": 0.4}) == pytest.approx(1.5)

    def test_log_of_zero_is_domain_error(self):
        with pytest.raises(DomainError):
            eval_expr(parse_expr("log(b)"), {"b": 0.0})

    def test_sqrt_of_negative_is_domain_error(self):
        with pytest.raises(DomainError):
            eval_expr(parse_expr("sqrt(b)"), {"b": -1.0})

    def test_division_by_zero(self):
        with pytest.raises(DomainError):
            eval_expr(parse_expr("1/w"), {"w": 0.0})

    def test_negative_base_fractional_power(self):
        with pytest.raises(DomainError):
            eval_expr(parse_expr("a^0.5"), {"a": -2.0})

    def test_negative_base_integer_power(self):
        assert eval_expr(parse_expr("a^2"), {"a": -3.0}) == 9.0

    def test_missing_parameter(self):
        with pytest.raises(KeyError):
            eval_expr(parse_expr("a + b"), {"a": 1.0})


class TestGradient:
    def test_sqrt_derivative(self):
        value, grad = eval_grad(parse_expr("sqrt(b)"), {"b": 0.64}, ("b",))
        assert value == pytest.approx(0.8)
        assert grad[0] == pytest.approx(0.625)  # 1/(2 sqrt(b))

    def test_product_gradient(self):
        _, grad = eval_grad(parse_expr("a*b"), {"a": 0.6, "b": 0.4}, ("a", "b"))
        assert grad == pytest.approx([0.4, 0.6])

    def test_abs_derivative_at_zero(self):
        _, grad = eval_grad(parse_expr("abs(a)"), {"a": 0.0}, ("a",))
        assert grad[0] == 0.0

    def test_power_with_param_exponent(self):
        value, grad = eval_grad(parse_expr("a^b"), {"a": 2.0, "b": 3.0}, ("a", "b"))
        assert value == pytest.approx(8.0)
        assert grad[0] == pytest.approx(12.0)  # b a^(b-1)
        assert grad[1] == pytest.approx(8.0 * math.log(2.0))


BUNDLED_EXPRESSIONS = [
    "sqrt(b)",
    "a",
    "a/b",
    "sqrt(a*b)",
    "sqrt(a/b)",
    "a*b",
    "a + b",
    "exp(a - b^2) + log(a + 3)",
    "a*b + sqrt(a)/b - 2.5",
]


@pytest.mark.parametrize("text", BUNDLED_EXPRESSIONS)
@given(a=st.floats(0.1, 3.0), b=st.floats(0.1, 3.0))
def test_gradient_matches_finite_differences(text, a, b):
    expr = parse_expr(text)
    params = {"a": a, "b": b}
    order = ("a", "b")
    _, grad = eval_grad(expr, params, order)
    for j, name in enumerate(order):
        h = 1e-6 * max(1.0, abs(params[name]))
        up = dict(params, **{name: params[name] + h})
        dn = dict(params, **{name: params[name] - h})
        fd = (eval_expr(expr, up) - eval_expr(expr, dn)) / (2.0 * h)
        assert grad[j] == pytest.approx(fd, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("text", BUNDLED_EXPRESSIONS)
@given(a=st.floats(0.05, 5.0), b=st.floats(0.05, 5.0))
def test_eval_grad_value_bit_equals_eval(text, a, b):
    expr = parse_expr(text)
    params = {"a": a, "b": b}
    value, _ = eval_grad(expr, params, ("a", "b"))
    assert value == eval_expr(expr, params)


def _expr_strategy():
    leaves = st.one_of(
        st.floats(0.1, 9.9).map(lambda v: Literal(float(v))),
        st.sampled_from(["a", "b", "c"]).map(Param),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(["sqrt", "log", "exp", "abs", "neg"]), children).map(
                lambda t: Unary(*t)
            ),
            st.tuples(st.sampled_from(["+", "-", "*", "/", "^"]), children, children).map(
                lambda t: Binary(t[0], t[1], t[2])
            ),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(_expr_strategy())
def test_parse_print_parse_round_trip(expr):
    assert parse_expr(format_expr(expr)) == expr


def test_collect_params():
    assert collect_params(parse_expr("a/b + sqrt(a)")) == {"a", "b"}
    assert collect_params(parse_expr("1 + 2")) == set()
