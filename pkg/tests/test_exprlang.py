import math

import numpy as np
import pytest

from ellipticmc import exprlang as ex
from oracles import reference_eval


class TestParse:
    def test_power_over_u(self):
        ast = ex.parse("u^2", "F")
        assert ast == ex.BinOp("^", ex.Var("u"), ex.Num(2.0))

    def test_step_call(self):
        ast = ex.parse("step(x3)", "phi")
        assert ast == ex.Call("step", (ex.Var("x3"),))

    def test_syntax_error_offset(self):
        with pytest.raises(ex.ExprSyntaxError) as exc:
            ex.parse("x1 + * 2", "F")
        assert exc.value.offset == 5

    def test_unknown_identifier(self):
        with pytest.raises(ex.ExprNameError):
            ex.parse("x1 + y2", "F")

    def test_arity_mismatch(self):
        with pytest.raises(ex.ExprArityError):
            ex.parse("min(1)", "F")
        with pytest.raises(ex.ExprArityError):
            ex.parse("sin(1, 2)", "F")

    def test_role_violation(self):
        with pytest.raises(ex.ExprRoleError):
            ex.parse("u + 1", "phi")
        with pytest.raises(ex.ExprRoleError):
            ex.parse("u * x1", "U")
        ex.parse("u * x1", "F")  # fine

    def test_precedence(self):
        # ^ above unary minus above * / above + -
        assert ex.eval(ex.parse("-2^2", "F"), {}) == -4.0
        assert ex.eval(ex.parse("2^3^2", "F"), {}) == 512.0
        assert ex.eval(ex.parse("2 + 3 * 4", "F"), {}) == 14.0
        assert ex.eval(ex.parse("2 * 3 ^ 2", "F"), {}) == 18.0
        assert ex.eval(ex.parse("2^-1", "F"), {}) == 0.5

    def test_whitespace_insensitive(self):
        assert ex.parse("x1+u", "F") == ex.parse(" x1 +  u ", "F")


class TestEval:
    def test_basic(self):
        assert ex.eval(ex.parse("x1^2 + u", "F"), {"x1": 2.0, "u": 3.0}) == 7.0

    def test_min_exp(self):
        assert ex.eval(ex.parse("min(1, exp(0))", "F"), {}) == 1.0

    def test_sqrt_negative_domain_error(self):
        with pytest.raises(ex.ExprDomainError):
            ex.eval(ex.parse("sqrt(x1)", "F"), {"x1": -1.0})

    def test_log_nonpositive_domain_error(self):
        with pytest.raises(ex.ExprDomainError):
            ex.eval(ex.parse("log(x1)", "F"), {"x1": 0.0})

    def test_missing_binding(self):
        with pytest.raises(ex.ExprNameError):
            ex.eval(ex.parse("x1 + u", "F"), {"x1": 1.0})

    def test_step_left_closed(self):
        step = ex.parse("step(x1)", "phi")
        assert ex.eval(step, {"x1": 0.0}) == 0.0
        assert ex.eval(step, {"x1": 1e-300}) == 1.0
        assert ex.eval(step, {"x1": -1.0}) == 0.0

    def test_vectorized_matches_scalar(self):
        ast = ex.parse("sin(x1) * u + max(x2, 0.5)", "F")
        xs = np.linspace(-2, 2, 7)
        vec = ex.eval(ast, {"x1": xs, "x2": xs / 2, "u": np.full(7, 1.5)})
        for i, x in enumerate(xs):
            scal = ex.eval(ast, {"x1": float(x), "x2": float(x) / 2, "u": 1.5})
            assert vec[i] == pytest.approx(scal, rel=1e-15, abs=1e-300)

    def test_vectorized_domain_error(self):
        with pytest.raises(ex.ExprDomainError):
            ex.eval(ex.parse("sqrt(x1)", "U"), {"x1": np.array([1.0, -0.5])})


# --- randomized structural properties ---------------------------------------

_FUNCS = ["sin", "cos", "exp", "abs", "step", "sqrt", "log", "min", "max"]


def random_ast(gen, depth):
    kind = gen.integers(0, 6 if depth > 0 else 2)
    if kind == 0:
        # moderate magnitudes keep ^ and exp inside float range
        return ex.Num(round(float(gen.uniform(-4, 4)), 3))
    if kind == 1:
        return ex.Var(str(gen.choice(["x1", "x2", "x3", "u", "r"])))
    if kind == 2:
        return ex.Neg(random_ast(gen, depth - 1))
    if kind == 3 or kind == 4:
        op = str(gen.choice(["+", "-", "*", "/", "^"]))
        return ex.BinOp(op, random_ast(gen, depth - 1), random_ast(gen, depth - 1))
    fn = str(gen.choice(_FUNCS))
    args = tuple(random_ast(gen, depth - 1) for _ in range(ex._ARITY[fn]))
    return ex.Call(fn, args)


def test_pretty_parse_round_trip_corpus():
    gen = np.random.default_rng(1234)
    for _ in range(100):
        ast = random_ast(gen, depth=4)
        s1 = ex.pretty(ast)
        s2 = ex.pretty(ex.parse(s1, "F"))
        assert s2 == s1
        assert ex.pretty(ex.parse(s2, "F")) == s2


def test_eval_matches_reference_evaluator():
    # 1e4 random AST/binding pairs; exact double equality when neither side
    # raises, and agreement on raising otherwise
    gen = np.random.default_rng(987)
    checked = 0
    for _ in range(10_000):
        ast = random_ast(gen, depth=3)
        bindings = {
            v: float(gen.uniform(-3, 3)) for v in ("x1", "x2", "x3", "u", "r")
        }
        try:
            got = ex.eval(ast, bindings)
            failed = None
        except Exception as exc:
            failed = exc
        try:
            want = reference_eval(ast, bindings)
            ref_failed = None
        except Exception as exc:
            ref_failed = exc
        if failed is None and ref_failed is None:
            if isinstance(want, float) and math.isnan(want):
                assert math.isnan(got)
            else:
                assert got == want, ex.pretty(ast)
            checked += 1
        else:
            # eval turns math-domain failures into ExprDomainError; the
            # reference raises raw ValueError/ZeroDivision/Overflow
            assert failed is not None and ref_failed is not None, ex.pretty(ast)
    assert checked > 5000  # most samples must exercise the value path
