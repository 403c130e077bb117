"""Unit Tests for MIQP.py Module"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from LSTMPlanner._utils import ModelError, NonConvexError
from LSTMPlanner.MIQP import (
    AffineExpr,
    MiqpModel,
    QuadraticObjective,
    bilinear_product,
    chebyshev_center,
    chebyshev_constraints,
    disjunction,
    export_lp,
    implication_activate,
    implication_indicate,
)

coefficients = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)

UNIT_SQUARE = (
    np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
    np.array([1.0, 0.0, 1.0, 0.0]),
)
UNIT_TRIANGLE = (
    np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
    np.array([0.0, 0.0, 1.0]),
)


def test_affine_expr():
    """Test arithmetic and evaluation of affine expressions"""
    model = MiqpModel()
    x = model.add_continuous("x")
    y = model.add_continuous("y")
    expr = 2 * x - y + 3
    assert expr.evaluate([1.0, 2.0]) == 3.0, "Should be 3"
    assert (x - x).is_constant, "Should cancel"
    assert (1 - x).evaluate([4.0, 0.0]) == -3.0, "Should be -3"
    assert (x / 2).terms == {x.id: 0.5}, "Should halve the coefficient"
    with pytest.raises(TypeError):
        x * y
    with pytest.raises(TypeError):
        AffineExpr.of("x")


@settings(max_examples=50, deadline=None)
@given(coefficients, coefficients, coefficients, coefficients, coefficients)
def test_add_square_expansion(a, b, c, x, y):
    """The expanded square evaluates like the square of the expression"""
    objective = QuadraticObjective()
    objective.add_square(AffineExpr({0: a, 1: b}, c), 0.5)
    expected = 0.5 * (a * x + b * y + c) ** 2
    assert objective.evaluate([x, y]) == pytest.approx(
        expected, rel=1e-9, abs=1e-6
    ), "Should match the squared expression"


def test_negative_square_weight():
    """A negative weight on a square is not convex"""
    with pytest.raises(NonConvexError):
        QuadraticObjective().add_square(AffineExpr({0: 1.0}), -1.0)


def test_model_bounds():
    """Test interval bounds, frozen models and binary bounds"""
    model = MiqpModel("bounds")
    x = model.add_continuous("x", 0.0, 1.0)
    y = model.add_continuous("y", -1.0, 2.0)
    b = model.bounds_of(2 * x - y)
    assert (b.lower, b.upper) == (-2.0, 3.0), "Should be [-2, 3]"
    z = model.add_continuous("z")
    assert not model.bounds_of(x + z).finite, "Should be unbounded"
    with pytest.raises(ModelError):
        model.add_binary("bad", lower=0.0, upper=2.0)
    with pytest.raises(ModelError):
        model.set_bounds(x, 2.0, 1.0)
    model.freeze()
    assert model.frozen, "Should be frozen"
    with pytest.raises(ModelError):
        model.add_continuous("late")


def test_implication_activate():
    """beta = 1 enforces f >= 0, beta = 0 leaves f free within its box"""
    model = MiqpModel()
    x = model.add_continuous("x", 0.0, 10.0)
    beta = model.add_binary("beta")
    implication_activate(model, beta, x - 5.0)
    assert model.is_feasible([6.0, 1.0]), "Should allow x = 6 when active"
    assert not model.is_feasible([4.0, 1.0]), "Should forbid x = 4 when active"
    assert model.is_feasible([0.0, 0.0]), "Should allow x = 0 when inactive"
    assert implication_activate(model, 0.0, x - 5.0) is None, "Should emit nothing"
    row = implication_activate(model, 1.0, x - 5.0)
    assert row is not None and row.rhs == 5.0, "Should emit x >= 5"

    free = model.add_continuous("free")
    with pytest.raises(ModelError):
        implication_activate(model, beta, free)


def test_implication_indicate():
    """f > 0 forces beta = 1"""
    model = MiqpModel()
    x = model.add_continuous("x", -5.0, 5.0)
    beta = model.add_binary("beta")
    implication_indicate(model, x, beta)
    assert not model.is_feasible([1.0, 0.0]), "Should force beta = 1"
    assert model.is_feasible([1.0, 1.0]), "Should allow beta = 1"
    assert model.is_feasible([-1.0, 0.0]), "Should allow beta = 0"


@pytest.mark.parametrize("beta", [0.0, 1.0])
@pytest.mark.parametrize("x", [-2.0, 0.5, 3.0])
def test_bilinear_product(beta, x):
    """The product variable equals beta * x at every integer point"""
    model = MiqpModel()
    xv = model.add_continuous("x", -2.0, 3.0)
    b = model.add_binary("b")
    y = bilinear_product(model, b, xv)
    assert y.id == 2, "Should append the product variable"
    assert model.is_feasible([x, beta, beta * x]), "Should accept the product"
    assert not model.is_feasible([x, beta, beta * x + 0.5]), "Should reject others"


def test_bilinear_product_unbounded():
    """An unbounded factor cannot be reformulated"""
    model = MiqpModel()
    x = model.add_continuous("x")
    b = model.add_binary("b")
    with pytest.raises(ModelError):
        bilinear_product(model, b, x)


def test_disjunction():
    """Exactly one branch selector is set, its rows enforced"""
    model = MiqpModel()
    x = model.add_continuous("x", 0.0, 10.0)
    binaries = disjunction(model, [[x - 8.0], [2.0 - x]], exclusive=True)
    assert len(binaries) == 2 and model.num_binaries == 2, "Should create 2 binaries"
    assert model.constraints[-1].name == "d_one", "Should end with the selection row"
    assert model.is_feasible([9.0, 1.0, 0.0]), "Should allow x = 9 in branch 0"
    assert model.is_feasible([1.0, 0.0, 1.0]), "Should allow x = 1 in branch 1"
    assert not model.is_feasible([5.0, 1.0, 0.0]), "Should forbid x = 5"
    assert not model.is_feasible([9.0, 1.0, 1.0]), "Should select exactly one"
    with pytest.raises(ModelError):
        disjunction(model, [])
    with pytest.raises(ModelError):
        disjunction(model, [[x]], binaries=binaries)


def test_chebyshev_center():
    """Largest inscribed balls of the unit square and the unit triangle"""
    square = chebyshev_center(UNIT_SQUARE)
    assert square.radius == pytest.approx(0.5), "Should be 0.5"
    assert np.allclose(square.center, [0.5, 0.5]), "Should be the square center"

    triangle = chebyshev_center(UNIT_TRIANGLE)
    r = 1.0 / (2.0 + math.sqrt(2.0))
    assert triangle.radius == pytest.approx(r), "Should be 1 / (2 + sqrt 2)"
    assert np.allclose(triangle.center, [r, r]), "Should be (r, r)"

    empty = (np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
    assert chebyshev_center(empty) is None, "Should be None for an empty set"

    half_plane = (np.array([[1.0, 0.0]]), np.array([1.0]))
    capped = chebyshev_center(half_plane, r_max=5.0)
    assert capped.radius == pytest.approx(5.0), "Should reach the cap"


def test_chebyshev_constraints():
    """All rows are nonnegative exactly for balls inside the polytope"""
    inside = chebyshev_constraints(UNIT_SQUARE, (0.5, 0.5), 0.5)
    assert len(inside) == 5, "Should be one row per half-plane plus r >= 0"
    assert all(f.evaluate([]) >= -1e-12 for f in inside), "Should fit"
    too_big = chebyshev_constraints(UNIT_SQUARE, (0.5, 0.5), 0.6)
    assert min(f.evaluate([]) for f in too_big) < 0, "Should not fit"

    # time axis measured at 10 m/s: the unit square is 10 wide in scaled units
    scaled = chebyshev_constraints(UNIT_SQUARE, (0.5, 0.5), 0.5, scale=(10.0, 1.0))
    assert all(f.evaluate([]) >= -1e-12 for f in scaled), "Should fit"
    with pytest.raises(ModelError):
        chebyshev_constraints(UNIT_SQUARE, (0.5, 0.5), 0.5, scale=(0.0, 1.0))
    with pytest.raises(ModelError):
        chebyshev_constraints(UNIT_SQUARE, (0.5,), 0.5)


def test_validate_convexity():
    """Objectives with a negative eigenvalue are rejected"""
    model = MiqpModel()
    x = model.add_continuous("x", -1.0, 1.0)
    y = model.add_continuous("y", -1.0, 1.0)
    model.objective.add_quadratic(x.id, y.id, 1.0)
    with pytest.raises(NonConvexError):
        model.validate()

    convex = MiqpModel()
    x = convex.add_continuous("x", -1.0, 1.0)
    convex.objective.add_square(x - 1.0)
    assert convex.validate() is convex, "Should return the model"


def test_matrices():
    """Solver arrays carry the doubled quadratic terms and the row bounds"""
    model = MiqpModel()
    x = model.add_continuous("x", 0.0, 10.0)
    y = model.add_continuous("y", 0.0, 10.0)
    model.objective.add_square(x - y, 1.0)
    model.add_le(x + y, 4.0)
    model.add_eq(x - 1.0, 0.0)
    m = model.matrices()
    assert np.allclose(m.P.toarray(), [[2.0, -2.0], [-2.0, 2.0]]), "Should double"
    assert np.allclose(m.u, [4.0, 1.0]), "Should be [4, 1]"
    assert m.l[0] == -math.inf and m.l[1] == 1.0, "Should be [-inf, 1]"
    assert model.max_violation([2.0, 3.0]) == pytest.approx(1.0), "Should be 1"


def test_export_lp(tmp_path):
    """LP export lists objective, rows, bounds and binaries"""
    model = MiqpModel("export")
    x = model.add_continuous("x", 0.0, 10.0)
    b = model.add_binary("b")
    model.objective.add_square(AffineExpr.of(x))
    model.objective.add_linear(b)
    model.add_ge(x - 5 * b, 0.0)
    path = export_lp(model, tmp_path / "model.lp")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "\\ LSTMPlanner LP export: export", "Should name the model"
    assert " obj: 1 x1 + [ 2 x0 ^2 ] / 2" in lines, "Should write the objective"
    assert " c0: 1 x0 - 5 x1 >= 0" in lines, "Should write the row"
    assert " 0 <= x0 <= 10" in lines, "Should write the bounds"
    assert lines[-3:] == ["Binaries", " x1", "End"], "Should close with binaries"


@pytest.mark.slow
def test_product_grid():
    """Feasible points of the product rows are exactly y = beta * f"""
    model = MiqpModel()
    x = model.add_continuous("x", -10.0, 10.0)
    b = model.add_binary("b")
    bilinear_product(model, b, 0.5 * x + 2.0)
    offsets = np.geomspace(1e-3, 20.0, 25)
    offsets = np.concatenate([-offsets, offsets])
    samples = 0
    for xv in np.linspace(-10.0, 10.0, 101):
        f = 0.5 * xv + 2.0
        for beta in (0.0, 1.0):
            assert model.is_feasible([xv, beta, beta * f]), "Should accept the product"
            for offset in offsets:
                assert not model.is_feasible(
                    [xv, beta, beta * f + offset]
                ), "Should reject everything else"
                samples += 1
    assert samples >= 10_000, "Should sample at least 10^4 points"


@pytest.mark.slow
@pytest.mark.parametrize("indicate", [False, True])
def test_implication_grid(indicate):
    """beta = 1 forces f >= 0, and f > 0 forces beta = 1, over random boxes"""
    rng = np.random.default_rng(7)
    samples = 0
    for _ in range(6):
        a, c = (float(v) for v in rng.uniform(-3.0, 3.0, 2))
        lo = float(rng.uniform(-10.0, 0.0))
        hi = lo + float(rng.uniform(1.0, 10.0))
        model = MiqpModel()
        x = model.add_continuous("x", lo, hi)
        beta = model.add_binary("beta")
        if indicate:
            implication_indicate(model, a * x + c, beta)
        else:
            implication_activate(model, beta, a * x + c)
        for xv in np.linspace(lo, hi, 1001):
            f = a * xv + c
            if abs(f) < 1e-6:
                continue
            for b in (0.0, 1.0):
                if indicate:
                    expected = b == 1.0 or f <= 0
                else:
                    expected = b == 0.0 or f >= 0
                assert model.is_feasible([xv, b]) == expected, f"f={f}, beta={b}"
                samples += 1
    assert samples >= 10_000, "Should sample at least 10^4 points"


@pytest.mark.slow
def test_disjunction_grid():
    """The projection of the disjunction is the union of its branches"""
    model = MiqpModel()
    s = model.add_continuous("s", 0.0, 10.0)
    disjunction(model, [[s, 1.0 - s], [s - 5.0, 6.0 - s], [s - 8.5, 9.0 - s]])
    assignments = list(itertools.product((0.0, 1.0), repeat=3))
    samples = 0
    for sv in np.linspace(0.0, 10.0, 10_001):
        inside = sv <= 1.0 + 1e-9 or 5.0 - 1e-9 <= sv <= 6.0 + 1e-9
        inside = inside or 8.5 - 1e-9 <= sv <= 9.0 + 1e-9
        feasible = any(model.is_feasible([sv, *betas]) for betas in assignments)
        assert feasible == inside, f"Should match the union at s={sv}"
        samples += 1
    assert samples >= 10_000, "Should sample at least 10^4 points"
