import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerqch import scalar as sf
from kahlerqch.errors import DomainError, UnsupportedOrderError, UsageError
from kahlerqch.scalar import Box, ChartPoint

x, y, z, t = sf.x, sf.y, sf.z, sf.t


def ev(f, **coords):
    return sf.evaluate(f, ChartPoint(**coords))


def test_partial_of_log_tan():
    a = 2.0
    g = sf.ln(2 * a * sf.tan(a * z)).partial("z")
    zs = np.linspace(0.05, 0.7, 50)
    np.testing.assert_allclose(ev(g, z=zs), 2 * a / np.sin(2 * a * zs), rtol=1e-13)


def test_simplifying_constructors():
    assert (x * 0).is_const(0.0)
    assert (x + 0) is x
    assert (x * 1) is x
    assert (x**1) is x
    assert (x**0).is_const(1.0)
    assert (-(-x)) is x
    assert sf.const(3.0).partial("x").is_const(0.0)
    assert y.partial("x").is_const(0.0)


def test_free_coordinates():
    f = x * sf.sin(z) + 3
    assert f.free == frozenset({"x", "z"})
    assert sf.integral(y, "x").free == frozenset({"x", "y"})
    assert sf.subst(x * y, {"y": 0.0}).free == frozenset({"x"})


def test_integral_polynomial():
    # int_0^x (1 + s^2)^2 ds = x + 2x^3/3 + x^5/5
    F = sf.integral((1 + x**2) ** 2, "x")
    xs = np.linspace(-2, 2, 21)
    np.testing.assert_allclose(ev(F, x=xs), xs + 2 * xs**3 / 3 + xs**5 / 5, atol=1e-12)
    assert F.partial("x") is not None
    np.testing.assert_allclose(ev(F.partial("x"), x=xs), (1 + xs**2) ** 2, atol=1e-12)


def test_integral_passes_other_partials_inside():
    F = sf.integral(sf.exp(x * y), "x")  # (e^{xy} - 1) / y
    xs, ys = np.array([0.3, -0.7, 1.1]), np.array([0.5, 1.5, -0.4])
    np.testing.assert_allclose(ev(F, x=xs, y=ys), (np.exp(xs * ys) - 1) / ys, rtol=1e-12)
    dFdy = (xs * ys * np.exp(xs * ys) - np.exp(xs * ys) + 1) / ys**2
    np.testing.assert_allclose(ev(F.partial("y"), x=xs, y=ys), dFdy, rtol=1e-11)


@pytest.mark.parametrize(
    "f, point, message",
    [
        (sf.ln(x), dict(x=-1.0), "ln"),
        (sf.sqrt(x), dict(x=-1.0), "sqrt"),
        (sf.tan(x), dict(x=math.pi / 2), "tan"),
        (1 / x, dict(x=0.0), None),
        (x**0.5, dict(x=-2.0), "non-positive base"),
    ],
)
def test_domain_errors(f, point, message):
    with pytest.raises((DomainError, ZeroDivisionError, FloatingPointError)) as exc:
        with np.errstate(divide="raise"):
            ev(f, **point)
    if message:
        assert message in str(exc.value)


def test_domain_error_reports_sample_index():
    with pytest.raises(DomainError) as exc:
        ev(sf.ln(x), x=np.array([1.0, 2.0, -3.0]))
    assert exc.value.index == 2


def test_integer_power_of_negative_base():
    assert ev(x**3, x=-2.0) == pytest.approx(-8.0)
    assert ev(x**-2, x=-2.0) == pytest.approx(0.25)


def test_unknown_names():
    with pytest.raises(UsageError):
        sf.coord("w")
    with pytest.raises(UsageError):
        sf.func("arcsin", x)
    with pytest.raises(UsageError):
        ev(sf.param("k") * x, x=1.0)
    assert sf.evaluate(sf.param("k") * x, ChartPoint(x=2.0, params={"k": 3.0})) == pytest.approx(6.0)


def test_truth_value_is_refused():
    with pytest.raises(TypeError):
        bool(x)


def test_num_equal():
    pts = Box().sample(30, 1)
    ok, res = sf.num_equal(sf.sin(x) ** 2 + sf.cos(x) ** 2, 1.0, pts, 1e-14)
    assert ok and res <= 1e-14
    ok, res = sf.num_equal(x, x + 1e-3, pts, 1e-6)
    assert not ok and res == pytest.approx(1e-3)


def test_box_sampling_is_seeded():
    b = Box(z=(0.2, 0.3))
    p1, p2 = b.sample(10, 5), b.sample(10, 5)
    np.testing.assert_array_equal(p1.as_array(), p2.as_array())
    arr = p1.as_array()
    assert np.all((arr[:, 2] >= 0.2) & (arr[:, 2] <= 0.3))
    with pytest.raises(UsageError):
        b.sample(0)
    with pytest.raises(UsageError):
        Box(x=(1.0, 0.0))


def test_box_grid_shapes():
    g = Box().grid((2, 3, 4, 5))
    assert g.as_array().shape == (120, 4)
    assert len(Box().xy_grid(9)) == 81


def test_chart_point_round_trip():
    p = Box().sample(7, 3)
    q = ChartPoint.from_array(p.as_array())
    np.testing.assert_array_equal(p.as_array(), q.as_array())
    assert set(p.as_dict(2)) == {"x", "y", "z", "t"}


def test_laplacian_and_dlog():
    f = x**2 * y + sf.exp(y)
    pts = Box().sample(20, 2)
    ok, _ = sf.num_equal(sf.laplacian_xy(f), 2 * y + sf.exp(y), pts, 1e-13)
    assert ok
    ok, _ = sf.num_equal(sf.dlog(sf.exp(3 * z), "z"), 3.0, pts, 1e-13)
    assert ok


class TestGridField:
    xs = np.linspace(-1, 1, 41)
    ys = np.linspace(-1, 1, 33)

    def field(self):
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return sf.grid_field(self.xs, self.ys, np.sin(X) * np.cos(Y), name="u")

    def test_values_and_derivatives(self):
        u = self.field()
        rng = np.random.default_rng(0)
        px, py = rng.uniform(-0.9, 0.9, 50), rng.uniform(-0.9, 0.9, 50)
        np.testing.assert_allclose(ev(u, x=px, y=py), np.sin(px) * np.cos(py), atol=1e-5)
        np.testing.assert_allclose(ev(u.partial("x"), x=px, y=py), np.cos(px) * np.cos(py), atol=1e-4)
        np.testing.assert_allclose(ev(u.partial("x").partial("y"), x=px, y=py), -np.cos(px) * np.sin(py), atol=2e-3)
        assert u.partial("z").is_const(0.0)

    def test_order_limit(self):
        u = self.field()
        with pytest.raises(UnsupportedOrderError):
            u.partial("x").partial("x").partial("y")

    def test_outside_rectangle(self):
        with pytest.raises(DomainError):
            ev(self.field(), x=1.5, y=0.0)

    def test_leaves_and_spacing(self):
        f = sf.exp(self.field()) + x
        leaves = sf.grid_leaves(f)
        assert len(leaves) == 1
        assert leaves[0].interp.spacing == pytest.approx(max(2 / 40, 2 / 32))
        assert sf.grid_leaves(x * y) == []

    def test_rejects_bad_grids(self):
        with pytest.raises(UsageError):
            sf.grid_field(self.xs[:3], self.ys, np.zeros((3, 33)))
        with pytest.raises(UsageError):
            sf.grid_field(self.xs, self.ys, np.zeros((5, 5)))


# -- properties ----------------------------------------------------------------------

_coord = st.floats(-1.0, 1.0)
_exprs = [
    x * y**2 + sf.sin(z),
    sf.exp(x * t) * sf.cos(y),
    sf.ln(2 + x**2) / (1.5 + sf.sinh(y) ** 2),
    sf.tanh(x - z) * sf.sqrt(3 + y + t),
    (1 + x**2) ** 1.5 * sf.cosh(t),
]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_exprs), st.sampled_from("xyzt"), _coord, _coord, _coord, _coord)
def test_partials_match_central_differences(f, var, px, py, pz, pt):
    h = 1e-5
    base = dict(x=px, y=py, z=pz, t=pt)
    up, dn = dict(base), dict(base)
    up[var] += h
    dn[var] -= h
    fd = (ev(f, **up) - ev(f, **dn)) / (2 * h)
    assert ev(f.partial(var), **base) == pytest.approx(fd, rel=1e-6, abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(_exprs), st.sampled_from("xyzt"), st.sampled_from("xyzt"), _coord, _coord, _coord, _coord)
def test_mixed_partials_commute(f, u, v, px, py, pz, pt):
    p = dict(x=px, y=py, z=pz, t=pt)
    assert ev(f.partial(u).partial(v), **p) == pytest.approx(ev(f.partial(v).partial(u), **p), rel=1e-10, abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(_exprs), st.sampled_from(_exprs), _coord, _coord, _coord, _coord)
def test_product_rule(f, g, px, py, pz, pt):
    p = dict(x=px, y=py, z=pz, t=pt)
    lhs = ev((f * g).partial("x"), **p)
    rhs = ev(f.partial("x") * g + f * g.partial("x"), **p)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
