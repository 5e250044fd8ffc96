import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifsdim.expr import (
    Binary,
    Const,
    DomainError,
    ExprError,
    Unary,
    Var,
    compile_expr,
    differentiate,
    eval_expr,
    is_constant,
    is_zero,
    parse_expr,
    render,
    shift_vars,
)


def central_difference(e, point, var, h=1e-6):
    p_hi = np.array(point, dtype=float)
    p_lo = p_hi.copy()
    p_hi[var - 1] += h
    p_lo[var - 1] -= h
    return (eval_expr(e, p_hi) - eval_expr(e, p_lo)) / (2 * h)


class TestParse:
    def test_example_linear_trig(self):
        got = parse_expr("0.35*x1 + 0.05*sin(x2)", dim=2)
        want = Binary(
            "add",
            Binary("mul", Const(0.35), Var(1)),
            Binary("mul", Const(0.05), Unary("sin", Var(2))),
        )
        assert got == want

    def test_variable_out_of_range(self):
        with pytest.raises(ExprError, match="variable index out of range"):
            parse_expr("x3", dim=2)

    def test_power_of_parenthesized_sum(self):
        got = parse_expr("(x1+1)^2", dim=1)
        assert got == Binary("pow", Binary("add", Var(1), Const(1.0)), Const(2.0))

    def test_unknown_function(self):
        with pytest.raises(ExprError, match="unknown function"):
            parse_expr("tanh(x1)", dim=1)

    def test_precedence(self):
        # 1 + 2*3 parses multiplication first
        assert eval_expr(parse_expr("1 + 2*3", 1), [0.0]) == 7.0
        assert eval_expr(parse_expr("2*x1^2", 1), [3.0]) == 18.0

    def test_whitespace_insensitive(self):
        assert parse_expr(" x1 +  2 ", 1) == parse_expr("x1+2", 1)

    def test_syntax_error_position(self):
        with pytest.raises(ExprError) as err:
            parse_expr("x1 + * 2", 1)
        assert "position" in str(err.value)

    def test_empty_source(self):
        with pytest.raises(ExprError):
            parse_expr("   ", 1)


class TestEval:
    def test_example_values(self):
        e = parse_expr("0.35*x1 + 0.05*sin(x2)", 2)
        assert eval_expr(e, [1.0, 0.0]) == pytest.approx(0.35)
        assert eval_expr(parse_expr("x1^2", 1), [3.0]) == 9.0

    def test_log_domain_error(self):
        with pytest.raises(DomainError, match="log"):
            eval_expr(parse_expr("log(x1)", 1), [-1.0])

    def test_division_by_zero(self):
        with pytest.raises(DomainError, match="division by zero"):
            eval_expr(parse_expr("1/x1", 1), [0.0])

    def test_sqrt_negative(self):
        with pytest.raises(DomainError, match="sqrt"):
            eval_expr(parse_expr("sqrt(x1)", 1), [-4.0])

    def test_batched_matches_scalar(self):
        e = parse_expr("x1/3 + 0.05*x1^2", 1)
        pts = np.linspace(0, 1, 7)[:, None]
        batch = eval_expr(e, pts)
        singles = [eval_expr(e, p) for p in pts]
        assert np.array_equal(batch, singles)

    def test_compiled_backends_agree(self):
        e = parse_expr("0.35*x1 + 0.05*sin(x2) - exp(x1)/3", 2)
        f_np = compile_expr(e, 2, "numpy")
        f_sc = compile_expr(e, 2, "math")
        for x in [(0.2, 0.7), (1.5, -0.3), (0.0, 0.0)]:
            v = eval_expr(e, x)
            assert f_np(np.array(x)) == v
            assert f_sc(*x) == v


class TestDifferentiate:
    def test_example_trig_derivative(self):
        # d/dx2 of the linear-trig example equals 0.05*cos(x2), checked by
        # central finite differences at 100 random points
        e = parse_expr("0.35*x1 + 0.05*sin(x2)", 2)
        de = differentiate(e, 2)
        rng = random.Random(42)
        for _ in range(100):
            p = [rng.uniform(-3, 3), rng.uniform(-3, 3)]
            sym = eval_expr(de, p)
            fd = central_difference(e, p, 2)
            assert math.isclose(sym, fd, rel_tol=1e-6, abs_tol=1e-8)
            assert math.isclose(sym, 0.05 * math.cos(p[1]), rel_tol=1e-12, abs_tol=0)

    def test_square_derivative(self):
        e = parse_expr("x1^2", 1)
        de = differentiate(e, 1)
        rng = random.Random(7)
        for _ in range(100):
            p = [rng.uniform(-5, 5)]
            assert math.isclose(
                eval_expr(de, p), central_difference(e, p, 1), rel_tol=1e-6, abs_tol=1e-8
            )

    def test_derivative_of_independent_variable_is_zero(self):
        de = differentiate(parse_expr("sin(x2)", 2), 1)
        for x in np.linspace(-2, 2, 9):
            assert eval_expr(de, [x, x / 2]) == 0.0

    def test_affine_derivative_folds_to_constant(self):
        de = differentiate(parse_expr("x1/3 + 2/3", 1), 1)
        assert is_constant(de)
        assert eval_expr(de, [0.4]) == pytest.approx(1 / 3)


def random_ast(rng, dim, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return Const(rng.uniform(0.1, 2.0))
        return Var(rng.randint(1, dim))
    roll = rng.random()
    if roll < 0.35:
        op = rng.choice(["neg", "sin", "cos", "exp"])
        return Unary(op, random_ast(rng, dim, depth - 1))
    if roll < 0.45:
        return Binary("pow", random_ast(rng, dim, depth - 1), Const(float(rng.randint(1, 3))))
    op = rng.choice(["add", "sub", "mul", "div"])
    return Binary(op, random_ast(rng, dim, depth - 1), random_ast(rng, dim, depth - 1))


class TestProperties:
    def test_render_round_trip_1000(self):
        rng = random.Random(2024)
        for _ in range(1000):
            ast = random_ast(rng, dim=3, depth=4)
            assert parse_expr(render(ast), 3) == ast

    def test_random_derivative_matches_finite_differences(self):
        rng = random.Random(99)
        checked = 0
        while checked < 300:
            ast = random_ast(rng, dim=2, depth=6)
            var = rng.randint(1, 2)
            de = differentiate(ast, var)
            p = [rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)]
            try:
                sym = float(eval_expr(de, p))
                fd = float(central_difference(ast, p, var))
            except DomainError:
                continue
            if not (math.isfinite(sym) and math.isfinite(fd)) or abs(fd) > 1e6:
                continue
            assert math.isclose(sym, fd, rel_tol=1e-5, abs_tol=1e-5)
            checked += 1

    @settings(max_examples=300, deadline=None)
    @given(st.text(max_size=40))
    def test_parsing_is_total(self, source):
        try:
            parse_expr(source, 3)
        except ExprError:
            pass

    @settings(max_examples=200, deadline=None)
    @given(
        st.text(
            alphabet="x123+-*/^() .sincoexplogqrt",
            min_size=1,
            max_size=30,
        )
    )
    def test_parsing_is_total_near_grammar(self, source):
        try:
            parse_expr(source, 3)
        except ExprError:
            pass


class TestStructure:
    def test_is_zero_propagates(self):
        e = differentiate(parse_expr("sin(x2)", 2), 1)
        assert is_zero(e)
        e2 = differentiate(parse_expr("x1*sin(x2)", 2), 1)  # = sin(x2), not zero
        assert not is_zero(e2)

    def test_shift_vars(self):
        e = parse_expr("x1 + sin(x2)", 2)
        shifted = shift_vars(e, 2)
        assert eval_expr(shifted, [0, 0, 1.0, 0.5]) == eval_expr(e, [1.0, 0.5])

    def test_concurrent_evaluation_is_pure(self):
        from concurrent.futures import ThreadPoolExecutor

        e = parse_expr("x1/3 + 0.05*x1^2", 1)
        pts = [[v] for v in np.linspace(0, 1, 64)]
        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(lambda p: eval_expr(e, p), pts))
        assert results == [eval_expr(e, p) for p in pts]
