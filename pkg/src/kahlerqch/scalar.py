"""Closed-form scalar fields over the chart (x, y, z, t) with exact partial derivatives.

A :class:`ScalarField` is an immutable expression DAG.  Derivatives are built by
rule and memoized on each node, so repeated differentiation shares structure
instead of copying it.  Evaluation is vectorized: every coordinate in the
environment may be a numpy array, and the result broadcasts to their shape.

Singular evaluations (division by zero, ``ln`` of a non-positive number, a pole
of ``tan``, ...) raise :class:`~kahlerqch.errors.DomainError`; no NaN is ever
propagated silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .errors import DomainError, UnsupportedOrderError, UsageError

COORDS = ("x", "y", "z", "t")
COORD_INDEX = {name: i for i, name in enumerate(COORDS)}

# |cos| below this at a tan argument is treated as a pole
POLE_EPS = 1e-12

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)


class ScalarField:
    """Base node.  Use the module-level constructors (or operators) to build fields."""

    __slots__ = ("_dcache", "_free", "__weakref__")

    def __init__(self):
        self._dcache = {}
        self._free = None

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else add(self, o)

    def __radd__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else add(o, self)

    def __sub__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else add(self, neg(o))

    def __rsub__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else add(o, neg(self))

    def __mul__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else mul(self, o)

    def __rmul__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else mul(o, self)

    def __truediv__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else div(self, o)

    def __rtruediv__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else div(o, self)

    def __pow__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else power(self, o)

    def __rpow__(self, other):
        o = _coerce(other)
        return NotImplemented if o is None else power(o, self)

    def __neg__(self):
        return neg(self)

    def __pos__(self):
        return self

    # -- structure ----------------------------------------------------------
    @property
    def free(self) -> frozenset:
        """Coordinates this field can depend on."""
        if self._free is None:
            self._free = self._compute_free()
        return self._free

    def _compute_free(self):
        return frozenset()

    def is_const(self, value=None) -> bool:
        return False

    # -- calculus -----------------------------------------------------------
    def partial(self, coord: str) -> "ScalarField":
        if coord not in COORD_INDEX:
            raise UsageError(f"unknown coordinate {coord!r}; expected one of {COORDS}")
        if coord not in self.free:
            return ZERO
        cached = self._dcache.get(coord)
        if cached is None:
            cached = self._partial(coord)
            self._dcache[coord] = cached
        return cached

    def _partial(self, coord):
        raise NotImplementedError

    # -- evaluation ---------------------------------------------------------
    def _eval(self, env, cache):
        raise NotImplementedError

    def evaluate(self, env, cache=None):
        """Evaluate under ``env`` (coordinate/parameter name -> float or array)."""
        if cache is None:
            cache = {}
        key = id(self)
        hit = cache.get(key)
        if hit is not None:
            return hit[1]
        value = self._eval(env, cache)
        # keep the node alive alongside its value so ids cannot be recycled
        cache[key] = (self, value)
        return value

    def __call__(self, point):
        return evaluate(self, point)

    def __repr__(self):
        return f"ScalarField({self})"

    def __str__(self):
        return self._str(0)

    def _str(self, prec):
        raise NotImplementedError

    def __bool__(self):
        raise TypeError("the truth value of a ScalarField is undefined; compare evaluated values")


class Const(ScalarField):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = float(value)

    def is_const(self, value=None):
        return value is None or self.value == value

    def _eval(self, env, cache):
        return self.value

    def _str(self, prec):
        v = self.value
        text = repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
        if v < 0 and prec > 0:
            return f"({text})"
        return text


ZERO = Const(0.0)
ONE = Const(1.0)


class Coord(ScalarField):
    __slots__ = ("name",)

    def __init__(self, name):
        super().__init__()
        if name not in COORD_INDEX:
            raise UsageError(f"unknown coordinate {name!r}")
        self.name = name

    def _compute_free(self):
        return frozenset((self.name,))

    def _partial(self, coord):
        return ONE

    def _eval(self, env, cache):
        try:
            return env[self.name]
        except KeyError:
            raise UsageError(f"coordinate {self.name!r} not supplied") from None

    def _str(self, prec):
        return self.name


class Param(ScalarField):
    """A named real parameter bound at evaluation time."""

    __slots__ = ("name",)

    def __init__(self, name):
        super().__init__()
        if name in COORD_INDEX:
            raise UsageError(f"{name!r} is a coordinate, not a parameter")
        self.name = name

    def _partial(self, coord):
        return ZERO

    def _eval(self, env, cache):
        try:
            return float(env[self.name])
        except KeyError:
            raise UsageError(f"parameter {self.name!r} is not bound") from None

    def _str(self, prec):
        return self.name


class Add(ScalarField):
    __slots__ = ("terms",)

    def __init__(self, terms):
        super().__init__()
        self.terms = tuple(terms)

    def _compute_free(self):
        return frozenset().union(*(t.free for t in self.terms))

    def _partial(self, coord):
        return add(*(t.partial(coord) for t in self.terms))

    def _eval(self, env, cache):
        total = self.terms[0].evaluate(env, cache)
        for t in self.terms[1:]:
            total = total + t.evaluate(env, cache)
        return total

    def _str(self, prec):
        parts = [self.terms[0]._str(1)]
        for t in self.terms[1:]:
            if isinstance(t, Neg):
                parts.append(" - " + t.arg._str(2))
            elif isinstance(t, Const) and t.value < 0:
                parts.append(" - " + Const(-t.value)._str(2))
            else:
                parts.append(" + " + t._str(1))
        text = "".join(parts)
        return f"({text})" if prec > 1 else text


class Mul(ScalarField):
    __slots__ = ("factors",)

    def __init__(self, factors):
        super().__init__()
        self.factors = tuple(factors)

    def _compute_free(self):
        return frozenset().union(*(f.free for f in self.factors))

    def _partial(self, coord):
        terms = []
        for i, fi in enumerate(self.factors):
            d = fi.partial(coord)
            if d.is_const(0.0):
                continue
            terms.append(mul(*self.factors[:i], d, *self.factors[i + 1 :]))
        return add(*terms)

    def _eval(self, env, cache):
        total = self.factors[0].evaluate(env, cache)
        for f in self.factors[1:]:
            total = total * f.evaluate(env, cache)
        return total

    def _str(self, prec):
        text = "*".join(f._str(3) for f in self.factors)
        return f"({text})" if prec > 2 else text


class Neg(ScalarField):
    __slots__ = ("arg",)

    def __init__(self, arg):
        super().__init__()
        self.arg = arg

    def _compute_free(self):
        return self.arg.free

    def _partial(self, coord):
        return neg(self.arg.partial(coord))

    def _eval(self, env, cache):
        return -self.arg.evaluate(env, cache)

    def _str(self, prec):
        text = "-" + self.arg._str(3)
        return f"({text})" if prec > 0 else text


class Div(ScalarField):
    __slots__ = ("num", "den")

    def __init__(self, num, den):
        super().__init__()
        self.num = num
        self.den = den

    def _compute_free(self):
        return self.num.free | self.den.free

    def _partial(self, coord):
        dn = self.num.partial(coord)
        dd = self.den.partial(coord)
        first = div(dn, self.den)
        if dd.is_const(0.0):
            return first
        return first - div(mul(self.num, dd), power(self.den, Const(2.0)))

    def _eval(self, env, cache):
        den = self.den.evaluate(env, cache)
        bad = np.asarray(den) == 0
        if np.any(bad):
            raise DomainError("division by zero", self.den, _first(bad))
        return self.num.evaluate(env, cache) / den

    def _str(self, prec):
        text = f"{self.num._str(2)}/{self.den._str(3)}"
        return f"({text})" if prec > 2 else text


class Pow(ScalarField):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        super().__init__()
        self.base = base
        self.exponent = exponent

    def _compute_free(self):
        return self.base.free | self.exponent.free

    def _partial(self, coord):
        b, e = self.base, self.exponent
        db = b.partial(coord)
        if isinstance(e, Const):
            if db.is_const(0.0):
                return ZERO
            return mul(e, power(b, Const(e.value - 1.0)), db)
        de = e.partial(coord)
        terms = []
        if not de.is_const(0.0):
            terms.append(mul(self, de, func("ln", b)))
        if not db.is_const(0.0):
            terms.append(mul(e, power(b, e - 1.0), db))
        return add(*terms)

    def _eval(self, env, cache):
        b = np.asarray(self.base.evaluate(env, cache), dtype=float)
        e = self.exponent.evaluate(env, cache)
        if isinstance(self.exponent, Const) and float(e).is_integer():
            if e < 0 and np.any(b == 0):
                raise DomainError("zero raised to a negative power", self.base, _first(b == 0))
        else:
            e_arr = np.asarray(e)
            bad = (b < 0) | ((b == 0) & (e_arr <= 0))
            if np.any(bad):
                raise DomainError("non-positive base with real exponent", self.base, _first(bad))
        out = np.power(b, e)
        return out if out.ndim else float(out)

    def _str(self, prec):
        text = f"{self.base._str(4)}^{self.exponent._str(4)}"
        return f"({text})" if prec > 3 else text


def _ok(x):
    return x


def _check_ln(x, node):
    bad = np.asarray(x) <= 0
    if np.any(bad):
        raise DomainError("ln of a non-positive number", node, _first(bad))


def _check_sqrt(x, node):
    bad = np.asarray(x) < 0
    if np.any(bad):
        raise DomainError("sqrt of a negative number", node, _first(bad))


def _check_tan(x, node):
    bad = np.abs(np.cos(x)) < POLE_EPS
    if np.any(bad):
        raise DomainError("pole of tan", node, _first(bad))


_NUMPY = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
}
_CHECKS = {"ln": _check_ln, "sqrt": _check_sqrt, "tan": _check_tan}
FUNCTIONS = tuple(_NUMPY)


class Func(ScalarField):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        super().__init__()
        if name not in _NUMPY:
            raise UsageError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def _compute_free(self):
        return self.arg.free

    def _partial(self, coord):
        u = self.arg
        du = u.partial(coord)
        name = self.name
        if name == "sin":
            outer = func("cos", u)
        elif name == "cos":
            outer = neg(func("sin", u))
        elif name == "tan":
            outer = div(ONE, power(func("cos", u), Const(2.0)))
        elif name == "sinh":
            outer = func("cosh", u)
        elif name == "cosh":
            outer = func("sinh", u)
        elif name == "tanh":
            outer = div(ONE, power(func("cosh", u), Const(2.0)))
        elif name == "exp":
            outer = self
        elif name == "ln":
            outer = div(ONE, u)
        else:  # sqrt
            outer = div(Const(0.5), self)
        return mul(outer, du)

    def _eval(self, env, cache):
        x = self.arg.evaluate(env, cache)
        check = _CHECKS.get(self.name)
        if check is not None:
            check(x, self.arg)
        with np.errstate(over="raise"):
            try:
                out = _NUMPY[self.name](x)
            except FloatingPointError:
                raise DomainError(f"overflow in {self.name}", self.arg) from None
        return out

    def _str(self, prec):
        return f"{self.name}({self.arg._str(0)})"


class Subst(ScalarField):
    """``inner`` with some coordinates frozen to constants, e.g. g(x, 0, z, t)."""

    __slots__ = ("inner", "fixed")

    def __init__(self, inner, fixed):
        super().__init__()
        self.inner = inner
        self.fixed = dict(fixed)

    def _compute_free(self):
        return self.inner.free - frozenset(self.fixed)

    def _partial(self, coord):
        return subst(self.inner.partial(coord), self.fixed)

    def _eval(self, env, cache):
        inner_env = dict(env)
        inner_env.update(self.fixed)
        return self.inner.evaluate(inner_env, {})

    def _str(self, prec):
        pins = ", ".join(f"{k}={v:g}" for k, v in self.fixed.items())
        return f"({self.inner._str(0)})|[{pins}]"


class Integral(ScalarField):
    """F = integral of ``integrand`` over ``var`` from 0 to the current value of ``var``.

    Values use 40-point Gauss-Legendre quadrature; derivatives are exact:
    dF/d(var) is the integrand itself and any other partial passes under the
    integral sign.
    """

    __slots__ = ("integrand", "var")

    def __init__(self, integrand, var):
        super().__init__()
        if var not in COORD_INDEX:
            raise UsageError(f"unknown coordinate {var!r}")
        self.integrand = integrand
        self.var = var

    def _compute_free(self):
        return self.integrand.free | frozenset((self.var,))

    def _partial(self, coord):
        if coord == self.var:
            return self.integrand
        return integral(self.integrand.partial(coord), self.var)

    def _eval(self, env, cache):
        upper = np.asarray(env[self.var], dtype=float)
        inner_env = {k: np.asarray(v)[..., None] if not isinstance(v, float) else v for k, v in env.items()}
        inner_env[self.var] = upper[..., None] * (1.0 + _GL_NODES) / 2.0
        vals = self.integrand.evaluate(inner_env, {})
        vals = np.broadcast_to(vals, inner_env[self.var].shape)
        out = upper / 2.0 * (vals @ _GL_WEIGHTS)
        return out if np.ndim(out) else float(out)

    def _str(self, prec):
        return f"int_0^{self.var}[{self.integrand._str(0)}] d{self.var}"


class GridInterpolant:
    """C^2 bicubic spline through values on a rectangular (x, y) grid.

    Wraps :class:`scipy.interpolate.RectBivariateSpline` with interpolation
    (smoothing 0).  ``error_estimate`` is the max deviation, at the dropped
    nodes, of a spline built on every other node; it overstates the error of
    the full-resolution spline and is reported rather than hidden.
    """

    MAX_ORDER = 2

    def __init__(self, xs, ys, values, name="grid"):
        from scipy.interpolate import RectBivariateSpline

        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.xs.size, self.ys.size):
            raise UsageError(
                f"grid values have shape {self.values.shape}, expected {(self.xs.size, self.ys.size)}"
            )
        if self.xs.size < 4 or self.ys.size < 4:
            raise UsageError("a bicubic grid needs at least 4 nodes per axis")
        self.name = name
        self._spline = RectBivariateSpline(self.xs, self.ys, self.values, kx=3, ky=3, s=0)
        self.error_estimate = self._estimate_error()

    def _estimate_error(self):
        from scipy.interpolate import RectBivariateSpline

        if self.xs.size < 8 or self.ys.size < 8:
            return float("nan")
        coarse = RectBivariateSpline(self.xs[::2], self.ys[::2], self.values[::2, ::2], kx=3, ky=3, s=0)
        xm, ym = self.xs[1:-1:2], self.ys[1:-1:2]
        diff = coarse(xm, ym) - self.values[1:-1:2, 1:-1:2]
        return float(np.max(np.abs(diff)))

    @property
    def spacing(self):
        return max(float(np.max(np.diff(self.xs))), float(np.max(np.diff(self.ys))))

    def __call__(self, x, y, dx=0, dy=0):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        slack = 1e-12 * (1.0 + abs(self.xs[-1]) + abs(self.ys[-1]))
        outside = (
            (x < self.xs[0] - slack) | (x > self.xs[-1] + slack) | (y < self.ys[0] - slack) | (y > self.ys[-1] + slack)
        )
        if np.any(outside):
            raise DomainError(f"point outside the {self.name} grid rectangle", index=_first(outside))
        out = self._spline.ev(x.ravel(), y.ravel(), dx=dx, dy=dy).reshape(x.shape)
        return out if out.ndim else float(out)


class GridLeaf(ScalarField):
    """A function of (x, y) backed by a :class:`GridInterpolant`."""

    __slots__ = ("interp", "dx", "dy")

    def __init__(self, interp, dx=0, dy=0):
        super().__init__()
        self.interp = interp
        self.dx = dx
        self.dy = dy

    @property
    def order(self):
        return self.dx + self.dy

    def _compute_free(self):
        return frozenset(("x", "y"))

    def _partial(self, coord):
        if coord in ("z", "t"):
            return ZERO
        if self.order >= GridInterpolant.MAX_ORDER:
            raise UnsupportedOrderError(
                f"grid-backed field {self.interp.name!r} already differentiated {self.order} times; "
                f"at most {GridInterpolant.MAX_ORDER} derivatives are supported"
            )
        if coord == "x":
            return GridLeaf(self.interp, self.dx + 1, self.dy)
        return GridLeaf(self.interp, self.dx, self.dy + 1)

    def _eval(self, env, cache):
        return self.interp(env["x"], env["y"], self.dx, self.dy)

    def _str(self, prec):
        suffix = "x" * self.dx + "y" * self.dy
        return f"{self.interp.name}{'_' + suffix if suffix else ''}"


def grid_field(xs, ys, values, name="grid") -> GridLeaf:
    return GridLeaf(GridInterpolant(xs, ys, values, name=name))


def grid_leaves(f: ScalarField):
    """All grid-backed leaves reachable from ``f``."""
    seen, out, stack = set(), [], [f]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, GridLeaf):
            out.append(node)
        stack.extend(_children(node))
    return out


def _children(node):
    if isinstance(node, Add):
        return node.terms
    if isinstance(node, Mul):
        return node.factors
    if isinstance(node, (Neg, Func)):
        return (node.arg,)
    if isinstance(node, Div):
        return (node.num, node.den)
    if isinstance(node, Pow):
        return (node.base, node.exponent)
    if isinstance(node, (Subst,)):
        return (node.inner,)
    if isinstance(node, Integral):
        return (node.integrand,)
    return ()


# -- simplifying constructors -------------------------------------------------


def _coerce(value):
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, Real) or (isinstance(value, np.generic) and np.isrealobj(value)):
        return Const(float(value))
    return None


def as_field(value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, Real):
        return Const(value)
    if isinstance(value, np.generic) and np.isrealobj(value):
        return Const(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to a ScalarField")


def const(value) -> Const:
    return Const(value)


def coord(name: str) -> Coord:
    return Coord(name)


def param(name: str) -> Param:
    return Param(name)


def add(*terms) -> ScalarField:
    flat = []
    total = 0.0
    for t in terms:
        t = as_field(t)
        if isinstance(t, Const):
            total += t.value
        elif isinstance(t, Add):
            for s in t.terms:
                if isinstance(s, Const):
                    total += s.value
                else:
                    flat.append(s)
        else:
            flat.append(t)
    if total != 0.0:
        flat.append(Const(total))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*factors) -> ScalarField:
    flat = []
    coeff = 1.0
    for f in factors:
        f = as_field(f)
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Mul):
            for s in f.factors:
                if isinstance(s, Const):
                    coeff *= s.value
                else:
                    flat.append(s)
        elif isinstance(f, Neg):
            coeff = -coeff
            inner = f.arg
            if isinstance(inner, Mul):
                for s in inner.factors:
                    if isinstance(s, Const):
                        coeff *= s.value
                    else:
                        flat.append(s)
            else:
                flat.append(inner)
        else:
            flat.append(f)
    if coeff == 0.0:
        return ZERO
    if not flat:
        return Const(coeff)
    if coeff == 1.0:
        return flat[0] if len(flat) == 1 else Mul(flat)
    if coeff == -1.0:
        return Neg(flat[0] if len(flat) == 1 else Mul(flat))
    return Mul([Const(coeff)] + flat)


def neg(f) -> ScalarField:
    f = as_field(f)
    if isinstance(f, Const):
        return Const(-f.value)
    if isinstance(f, Neg):
        return f.arg
    return Neg(f)


def div(num, den) -> ScalarField:
    num, den = as_field(num), as_field(den)
    if isinstance(den, Const):
        if den.value == 0.0:
            raise DomainError("division by the constant zero", num)
        return mul(num, Const(1.0 / den.value))
    if num.is_const(0.0):
        return ZERO
    return Div(num, den)


def power(base, exponent) -> ScalarField:
    base, exponent = as_field(base), as_field(exponent)
    if isinstance(exponent, Const):
        if exponent.value == 0.0:
            return ONE
        if exponent.value == 1.0:
            return base
        if isinstance(base, Const):
            return Const(Pow(base, exponent).evaluate({}))
    return Pow(base, exponent)


def func(name: str, arg) -> ScalarField:
    arg = as_field(arg)
    if name == "ln" and isinstance(arg, Func) and arg.name == "exp":
        return arg.arg
    node = Func(name, arg)
    if isinstance(arg, Const):
        return Const(node.evaluate({}))
    return node


def subst(f: ScalarField, fixed: dict) -> ScalarField:
    pins = {k: float(v) for k, v in fixed.items() if k in f.free}
    if not pins:
        return f
    if isinstance(f, Const):
        return f
    return Subst(f, pins)


def integral(integrand: ScalarField, var: str) -> ScalarField:
    integrand = as_field(integrand)
    if integrand.is_const(0.0):
        return ZERO
    if var not in integrand.free and isinstance(integrand, Const):
        return mul(integrand, Coord(var))
    return Integral(integrand, var)


def _unary(name):
    def apply(arg):
        return func(name, arg)

    apply.__name__ = name
    apply.__doc__ = f"Elementary function ``{name}`` applied to a field or number."
    return apply


sin = _unary("sin")
cos = _unary("cos")
tan = _unary("tan")
sinh = _unary("sinh")
cosh = _unary("cosh")
tanh = _unary("tanh")
exp = _unary("exp")
ln = _unary("ln")
sqrt = _unary("sqrt")

x, y, z, t = (Coord(n) for n in COORDS)


def _first(mask):
    flat = np.flatnonzero(np.asarray(mask))
    return int(flat[0]) if flat.size else None


# -- points and numeric comparison -----------------------------------------


@dataclass
class ChartPoint:
    """A chart point, or a batch of them when the coordinates are arrays.

    ``params`` binds every named parameter appearing in the evaluated fields.
    """

    x: float | np.ndarray = 0.0
    y: float | np.ndarray = 0.0
    z: float | np.ndarray = 0.0
    t: float | np.ndarray = 0.0
    params: dict = field(default_factory=dict)

    def env(self) -> dict:
        coords = np.broadcast_arrays(
            np.asarray(self.x, float), np.asarray(self.y, float), np.asarray(self.z, float), np.asarray(self.t, float)
        )
        env = {name: (c if c.ndim else float(c)) for name, c in zip(COORDS, coords)}
        env.update(self.params)
        return env

    @property
    def shape(self):
        return np.broadcast_shapes(*(np.shape(getattr(self, n)) for n in COORDS))

    def __len__(self):
        return int(np.prod(self.shape)) if self.shape else 1

    def take(self, index) -> "ChartPoint":
        """The single point at flat ``index`` as plain floats."""
        env = self.env()
        vals = {n: float(np.ravel(env[n])[index]) if np.ndim(env[n]) else env[n] for n in COORDS}
        return ChartPoint(**vals, params=dict(self.params))

    def as_dict(self, index=None) -> dict:
        p = self if index is None else self.take(index)
        return {n: float(getattr(p, n)) for n in COORDS}

    @classmethod
    def from_array(cls, arr, params=None) -> "ChartPoint":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], params=dict(params or {}))

    def as_array(self) -> np.ndarray:
        env = self.env()
        cols = [np.broadcast_to(env[n], self.shape).ravel() for n in COORDS]
        return np.stack(cols, axis=-1)


def evaluate(f, point: ChartPoint, cache=None):
    """Evaluate one field at a point (or batch), broadcasting constants to the batch shape."""
    env = point.env() if isinstance(point, ChartPoint) else point
    value = as_field(f).evaluate(env, cache)
    shape = point.shape if isinstance(point, ChartPoint) else np.broadcast_shapes(
        *(np.shape(env[n]) for n in COORDS if n in env)
    )
    if shape:
        return np.broadcast_to(np.asarray(value, dtype=float), shape)
    return float(value)


def evaluate_many(fields, point: ChartPoint) -> list:
    """Evaluate several fields with one shared subexpression cache."""
    env = point.env()
    cache = {}
    return [_bcast(as_field(f).evaluate(env, cache), point.shape) for f in fields]


def _bcast(value, shape):
    if shape:
        return np.broadcast_to(np.asarray(value, dtype=float), shape)
    return float(value)


def num_equal(f, g, points: ChartPoint, tol: float):
    """Return ``(max|f - g| <= tol, max|f - g|)`` over the sample set."""
    if points is None or len(points) == 0 or (points.shape and 0 in points.shape):
        raise UsageError("num_equal needs a non-empty sample set")
    fv, gv = evaluate_many([as_field(f), as_field(g)], points)
    residual = float(np.max(np.abs(np.asarray(fv) - np.asarray(gv))))
    return residual <= tol, residual


def partial(f, coord_name: str) -> ScalarField:
    return as_field(f).partial(coord_name)


def dlog(f: ScalarField, coord_name: str) -> ScalarField:
    """d(ln|f|)/d(coord) written as f'/f, valid for either sign of f."""
    return div(f.partial(coord_name), f)


def laplacian_xy(f: ScalarField) -> ScalarField:
    """Flat Laplacian f_xx + f_yy in the (x, y) slice."""
    return f.partial("x").partial("x") + f.partial("y").partial("y")


@dataclass(frozen=True)
class Box:
    """Axis-aligned chart region: closed intervals in x, y, z, t."""

    x: tuple = (-0.5, 0.5)
    y: tuple = (-0.5, 0.5)
    z: tuple = (0.1, 0.7)
    t: tuple = (0.0, 1.0)

    def __post_init__(self):
        for name in COORDS:
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
                raise UsageError(f"bad {name}-interval {getattr(self, name)}")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def sample(self, n: int, seed: int = 0, params=None) -> ChartPoint:
        """``n`` points drawn uniformly from the box with a seeded generator."""
        if n < 1:
            raise UsageError("need at least one sample point")
        rng = np.random.default_rng(seed)
        cols = [rng.uniform(*getattr(self, name), size=n) for name in COORDS]
        return ChartPoint(*cols, params=dict(params or {}))

    def grid(self, counts=(3, 3, 3, 3), params=None) -> ChartPoint:
        """Tensor grid with ``counts`` nodes per axis, x varying slowest."""
        axes = [np.linspace(*getattr(self, name), num=int(k)) for name, k in zip(COORDS, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return ChartPoint(*(m.ravel() for m in mesh), params=dict(params or {}))

    def xy_grid(self, n: int = 17, z=None, t=None) -> ChartPoint:
        """An n-by-n grid on the (x, y) rectangle at fixed z, t (midpoints by default)."""
        xs = np.linspace(*self.x, n)
        ys = np.linspace(*self.y, n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        zz = sum(self.z) / 2 if z is None else z
        tt = sum(self.t) / 2 if t is None else t
        return ChartPoint(X.ravel(), Y.ravel(), zz, tt)

    def z_samples(self, n: int = 257) -> np.ndarray:
        return np.linspace(*self.z, n)

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in COORDS}
