"""Builders for the explicit Kähler surface families and the alpha-profile classification.

Every builder works in adapted coordinates (x, y, z, t) where

    theta1 = f dx,  theta2 = f dy,
    theta3 = g3 dt - p3x dx - p3y dy,
    theta4 = dz - p4x dx - p4y dy,

so the dual frame has the closed form

    E1 = (1/f)(d_x + p4x d_z + (p3x/g3) d_t),   E3 = (1/g3) d_t,
    E2 = (1/f)(d_y + p4y d_z + (p3y/g3) d_t),   E4 = d_z,

and no symbolic matrix inversion is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import scalar as sf
from .errors import BuildRejected, DomainError, InfeasibleManufacturedSolution, NotClosedError, UsageError
from .exterior import FramePair, KForm, VectorField, dt, dx, dy, dz, wedge
from .scalar import Box, ChartPoint, ScalarField

FAMILIES = ("calabi", "tan", "coth", "tanh")
GENERALIZED = ("tan", "coth", "tanh")

# theta3 signs the mutation hook can flip: one term, or the overall prefactor
MUTATIONS = ("dx", "dy", "dt", "overall")

# Calabi's dt flip is the pullback of the unmutated coframe under t -> -t, an
# isometry, so no check can see it; the prefactor flip is used instead.
FAMILY_MUTATIONS = {
    "calabi": ("dx", "dy", "overall"),
    "tan": ("dx", "dy", "dt"),
    "coth": ("dx", "dy", "dt"),
    "tanh": ("dx", "dy", "dt"),
}

# J E1 = E2, J E3 = E4;  Jbar E1 = E2, Jbar E3 = -E4 (columns are images of E_i)
J_MATRIX = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
JBAR_MATRIX = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=float)


def pde_coefficients(family: str, a: float) -> tuple:
    """(c1, c2) in  Delta ln H = c1 h^2 + c2 H^2  for the family."""
    a2 = a * a
    if family == "tan":
        return 2.0 * a2, -4.0 * a2
    if family == "coth":
        return 2.0 * a2, 4.0 * a2
    if family == "tanh":
        return -2.0 * a2, 4.0 * a2
    raise UsageError(f"no H-equation for family {family!r}")


# -- alpha profiles -------------------------------------------------------------


@dataclass
class AlphaProfile:
    """alpha(z) with an antiderivative A (A' = alpha) on a z-interval where alpha != 0."""

    variant: str
    alpha: ScalarField
    A: ScalarField
    value: float | None = None
    D: float | None = None
    natural: tuple = (-math.inf, math.inf)

    @classmethod
    def constant(cls, c: float) -> "AlphaProfile":
        if c == 0:
            raise UsageError("alpha must not vanish; constant c = 0 is excluded")
        return cls("constant", sf.const(c), c * sf.z, value=float(c))

    @classmethod
    def semi_symmetric(cls, negative: bool = False) -> "AlphaProfile":
        A = -2.0 * sf.ln(-sf.z if negative else sf.z)
        natural = (-math.inf, 0.0) if negative else (0.0, math.inf)
        return cls("semi", -2.0 / sf.z, A, D=0.0, natural=natural)

    @classmethod
    def tan(cls, a: float, negative: bool = False) -> "AlphaProfile":
        _nonzero(a)
        az = a * sf.z
        half = math.pi / (2 * abs(a))
        natural = (-half, 0.0) if negative else (0.0, half)
        return cls("tan", 2.0 * a * sf.tan(az), -2.0 * sf.ln(sf.cos(az)), value=a, D=2.0 * a * a, natural=natural)

    @classmethod
    def coth(cls, a: float, negative: bool = True) -> "AlphaProfile":
        _nonzero(a)
        az = a * sf.z
        # sign of sinh(az) on the chosen half-line
        s = -1.0 if (negative == (a > 0)) else 1.0
        natural = (-math.inf, 0.0) if negative else (0.0, math.inf)
        alpha = -2.0 * a * sf.cosh(az) / sf.sinh(az)
        return cls("coth", alpha, -2.0 * sf.ln(s * sf.sinh(az)), value=a, D=-2.0 * a * a, natural=natural)

    @classmethod
    def tanh(cls, a: float, negative: bool = True) -> "AlphaProfile":
        _nonzero(a)
        az = a * sf.z
        natural = (-math.inf, 0.0) if negative else (0.0, math.inf)
        return cls("tanh", -2.0 * a * sf.tanh(az), -2.0 * sf.ln(sf.cosh(az)), value=a, D=-2.0 * a * a, natural=natural)

    @classmethod
    def user(cls, alpha, A) -> "AlphaProfile":
        alpha, A = sf.as_field(alpha), sf.as_field(A)
        extra = (alpha.free | A.free) - {"z"}
        if extra:
            raise UsageError(f"alpha and A may depend on z only, found {sorted(extra)}")
        return cls("user", alpha, A)

    @classmethod
    def for_interval(cls, variant: str, value: float | None, interval: tuple) -> "AlphaProfile":
        """Classified profile with the antiderivative branch matching the sign of z on ``interval``."""
        negative = interval[1] <= 0
        if variant == "constant":
            return cls.constant(value)
        if variant == "semi":
            return cls.semi_symmetric(negative)
        if variant == "tan":
            return cls.tan(value, negative)
        if variant == "coth":
            return cls.coth(value, negative)
        if variant == "tanh":
            return cls.tanh(value, negative)
        raise UsageError(f"unknown alpha variant {variant!r}")

    def validate(self, interval: tuple, n: int = 257, tol: float = 1e-10) -> None:
        """alpha finite and nonvanishing on ``interval``; A' = alpha there."""
        lo, hi = interval
        if self.natural[0] > lo or self.natural[1] < hi:
            raise BuildRejected(f"z-interval {interval} leaves the {self.variant} profile's range {self.natural}")
        zs = ChartPoint(z=np.linspace(lo, hi, n))
        try:
            vals = np.asarray(sf.evaluate(self.alpha, zs))
        except DomainError as exc:
            raise BuildRejected(f"alpha is singular on z-interval {interval}: {exc}") from None
        if np.min(np.abs(vals)) <= 1e-12 or (np.min(vals) < 0 < np.max(vals)):
            i = int(np.argmin(np.abs(vals)))
            raise BuildRejected(f"alpha vanishes on the z-interval near z={zs.z[i]:.6g}")
        try:
            ok, res = sf.num_equal(self.A.partial("z"), self.alpha, zs, tol * max(1.0, float(np.max(np.abs(vals)))))
        except DomainError as exc:
            raise BuildRejected(f"antiderivative A is singular on z-interval {interval}: {exc}") from None
        if not ok:
            raise BuildRejected("A' does not match alpha", res)

    def describe(self) -> str:
        return f"alpha = {self.alpha}, A = {self.A}"


def _nonzero(a):
    if a == 0:
        raise UsageError("parameter a must be nonzero")


def classify_alpha(D: float, branch: str | None = None, interval: tuple | None = None) -> AlphaProfile:
    """Profile solving alpha' = alpha^2/2 + D for constant D on the requested branch."""
    if branch is not None:
        branch = branch.lower()
    if D > 0:
        if branch not in (None, "tan"):
            raise UsageError(f"D > 0 admits only the tan branch, not {branch!r}")
        a = math.sqrt(D / 2.0)
        prof = AlphaProfile.tan(a, negative=bool(interval and interval[1] <= 0))
    elif D < 0:
        if branch not in ("coth", "tanh"):
            raise UsageError(f"D < 0 needs branch coth or tanh, got {branch!r}")
        a = math.sqrt(-D / 2.0)
        negative = True if interval is None else interval[1] <= 0
        prof = AlphaProfile.coth(a, negative) if branch == "coth" else AlphaProfile.tanh(a, negative)
    else:
        if branch not in (None, "semi"):
            raise UsageError(f"D = 0 forces the semi-symmetric branch, not {branch!r}")
        prof = AlphaProfile.semi_symmetric(negative=bool(interval and interval[1] <= 0))
    _check_riccati(prof, D, interval)
    return prof


def _profile_samples(prof: AlphaProfile, interval, n=101):
    if interval is None:
        lo, hi = prof.natural
        if not math.isfinite(lo):
            lo = hi - 3.0
        if not math.isfinite(hi):
            hi = lo + 3.0
        width = hi - lo
        lo, hi = lo + 0.05 * width, hi - 0.05 * width
    else:
        lo, hi = interval
    return ChartPoint(z=np.linspace(lo, hi, n))


def _check_riccati(prof: AlphaProfile, D: float, interval=None, tol=1e-10):
    pts = _profile_samples(prof, interval)
    a = prof.alpha
    da = a.partial("z")
    scale = max(1.0, float(np.max(np.abs(sf.evaluate(a * a, pts)))))
    ok, res = sf.num_equal(da, 0.5 * a * a + D, pts, tol * scale)
    if not ok:
        raise BuildRejected("alpha' != alpha^2/2 + D", res)
    ok2, res2 = sf.num_equal(da.partial("z"), a * da, pts, tol * scale * scale)
    if not ok2:
        raise BuildRejected("alpha'' != alpha alpha'", res2)


# -- potentials -------------------------------------------------------------------


def potential_from_closed_form(p, q, domain: Box | None = None, samples: int = 64, seed: int = 0, tol: float = 1e-9):
    """F with dF/dx = p, dF/dy = q from the axis-parallel path (0,0) -> (x,0) -> (x,y).

    The additive function of (z, t) is fixed to 0.
    """
    p, q = sf.as_field(p), sf.as_field(q)
    domain = domain or Box()
    pts = domain.sample(samples, seed)
    ok, res = sf.num_equal(p.partial("y"), q.partial("x"), pts, tol)
    if not ok:
        raise NotClosedError("p dx + q dy is not closed in the (x, y)-slice", res)
    return sf.integral(sf.subst(p, {"y": 0.0}), "x") + sf.integral(q, "y")


def volume_potential(h, domain: Box | None = None, samples: int = 64, seed: int = 0):
    """(l2, n2) = (0, int_0^x h(s, y)^2 ds), so d(l2 dx + n2 dy) = h^2 dx^dy."""
    h = sf.as_field(h)
    if domain is not None:
        _require_positive(h, "h", domain, samples, seed)
    return sf.ZERO, sf.integral(h * h, "x")


def _require_positive(f, name, domain: Box, samples=64, seed=0):
    pts = domain.sample(samples, seed)
    grid = domain.xy_grid(9)
    for p in (pts, grid):
        try:
            vals = np.asarray(sf.evaluate(f, p))
        except DomainError as exc:
            raise BuildRejected(f"{name} cannot be evaluated on the domain: {exc}") from None
        bad = vals <= 0
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise BuildRejected(f"{name} must be positive on U", float(vals.ravel()[i]), p.as_dict(i))


def manufacture_h_from_H(H, a: float, family: str, domain: Box, n: int = 33) -> ScalarField:
    """h with h^2 = (Delta ln H - c2 H^2) / c1, so (h, H) solves the family's equation exactly."""
    H = sf.as_field(H)
    c1, c2 = pde_coefficients(family, a)
    lnH = sf.ln(H)
    h2 = (sf.laplacian_xy(lnH) - c2 * H * H) / c1
    grid = domain.xy_grid(n)
    vals = np.asarray(sf.evaluate(h2, grid))
    bad = vals <= 0
    if np.any(bad):
        i = int(np.argmin(vals))
        raise InfeasibleManufacturedSolution(
            f"manufactured h^2 is not positive for family {family!r}", float(vals[i]), grid.as_dict(i)
        )
    return sf.sqrt(h2)


def h_gradient_potentials(H, a: float, family: str, sign: float = 1.0) -> tuple:
    """(l2, n2) from the gradient of ln H with the family's sign pattern."""
    lnH = sf.ln(sf.as_field(H))
    k = sign / (2.0 * a)
    if family in ("tan", "tanh"):
        return -k * lnH.partial("y"), k * lnH.partial("x")
    if family == "coth":
        return k * lnH.partial("y"), -k * lnH.partial("x")
    raise UsageError(f"family {family!r} has no H-gradient potentials")


# -- specs and models --------------------------------------------------------------


@dataclass
class SurfaceSpec:
    """Input data for one surface.  ``l2``/``n2`` left as None are derived (volume potential or H-gradients)."""

    family: str
    domain: Box
    h: ScalarField = sf.ONE
    a: float | None = None
    alpha: AlphaProfile | None = None
    H: ScalarField | None = None
    l2: ScalarField | None = None
    n2: ScalarField | None = None
    l2n2_sign: float = 1.0
    tol: float = 1e-8
    samples: int = 64
    seed: int = 0

    def __post_init__(self):
        self.family = self.family.lower()
        if self.family not in FAMILIES:
            raise UsageError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        self.h = sf.as_field(self.h)
        if self.H is not None:
            self.H = sf.as_field(self.H)


@dataclass
class SurfaceModel:
    """A built metric with its frame, structures and defining data."""

    family: str
    frame: FramePair
    alpha: ScalarField
    beta: ScalarField
    f: ScalarField
    h: ScalarField
    l2: ScalarField
    n2: ScalarField
    coframe_data: dict
    domain: Box
    params: dict = field(default_factory=dict)
    A: ScalarField | None = None
    H: ScalarField | None = None
    profile: AlphaProfile | None = None
    grid_spacing: float | None = None
    notes: list = field(default_factory=list)
    J: np.ndarray = field(default_factory=lambda: J_MATRIX.copy())
    Jbar: np.ndarray = field(default_factory=lambda: JBAR_MATRIX.copy())

    @property
    def theta(self):
        return self.frame.coframe

    @property
    def E(self):
        return self.frame.frame

    @cached_property
    def omega(self) -> KForm:
        """Kaehler form of J: theta12 + theta34 (self-dual)."""
        th = self.theta
        return wedge(th[0], th[1]) + wedge(th[2], th[3])

    @cached_property
    def omega_bar(self) -> KForm:
        """Kaehler form of Jbar: theta12 - theta34 (anti-self-dual)."""
        th = self.theta
        return wedge(th[0], th[1]) - wedge(th[2], th[3])

    @cached_property
    def lee(self) -> KForm:
        return -self.alpha * self.theta[3]

    @cached_property
    def connection(self):
        from .cartan import solve_connection

        return solve_connection(self.frame)

    @cached_property
    def curvature(self):
        from .cartan import CurvatureEvaluator

        return CurvatureEvaluator(self.connection)

    def E_log_alpha(self, i: int) -> ScalarField:
        """E_i(ln alpha) written as E_i(alpha)/alpha (1-based i)."""
        return sf.div(self.E[i - 1](self.alpha), self.alpha)

    @property
    def grid_backed(self) -> bool:
        return self.grid_spacing is not None

    def sample(self, n: int, seed: int = 0) -> ChartPoint:
        return self.domain.sample(n, seed)

    def describe(self) -> dict:
        out = {"family": self.family, "domain": self.domain.to_dict()}
        out.update({k: v for k, v in self.params.items()})
        out["alpha"] = str(self.alpha)
        if self.H is not None:
            out["H"] = _short(self.H)
        out["h"] = _short(self.h)
        if self.grid_backed:
            out["grid_spacing"] = self.grid_spacing
        return out


def _short(f, limit=120):
    text = str(f)
    return text if len(text) <= limit else text[: limit - 3] + "..."


def adapted_frame(f, g3, p3x, p3y, p4x, p4y, domain: Box | None = None) -> FramePair:
    """Coframe in adapted coordinates plus its closed-form dual (see module docstring)."""
    f, g3, p3x, p3y, p4x, p4y = (sf.as_field(v) for v in (f, g3, p3x, p3y, p4x, p4y))
    th1 = f * dx
    th2 = f * dy
    th3 = g3 * dt - p3x * dx - p3y * dy
    th4 = dz - p4x * dx - p4y * dy
    inv_f = sf.div(sf.ONE, f)
    E1 = VectorField([inv_f, sf.ZERO, inv_f * p4x, inv_f * sf.div(p3x, g3)])
    E2 = VectorField([sf.ZERO, inv_f, inv_f * p4y, inv_f * sf.div(p3y, g3)])
    E3 = VectorField([sf.ZERO, sf.ZERO, sf.ZERO, sf.div(sf.ONE, g3)])
    E4 = VectorField([sf.ZERO, sf.ZERO, sf.ONE, sf.ZERO])
    return FramePair((th1, th2, th3, th4), (E1, E2, E3, E4), domain)


def _frame_from_data(data: dict, domain: Box) -> FramePair:
    return adapted_frame(data["f"], data["g3"], data["p3x"], data["p3y"], data["p4x"], data["p4y"], domain)


def _check_frame(frame: FramePair, domain: Box, samples: int, seed: int):
    pts = domain.sample(samples, seed)
    try:
        res = frame.duality_residual(pts)
    except DomainError as exc:
        raise DomainError(f"degenerate coframe on the domain: {exc}") from None
    if not res <= 1e-10:
        raise BuildRejected("coframe and frame are not dual", res)


def _grid_spacing(*fields) -> float | None:
    spacings = [leaf.interp.spacing for f in fields if f is not None for leaf in sf.grid_leaves(f)]
    return max(spacings) if spacings else None


def _check_z_function(name, fn, domain: Box, n=257):
    zs = ChartPoint(z=domain.z_samples(n))
    try:
        vals = np.asarray(sf.evaluate(fn, zs))
    except DomainError as exc:
        raise DomainError(f"{name} is singular on z-interval {domain.z}: {exc}") from None
    bad = np.abs(vals) <= 1e-12
    if np.any(bad) or np.min(vals) < 0 < np.max(vals):
        i = int(np.argmin(np.abs(vals)))
        raise DomainError(f"{name} vanishes on z-interval {domain.z} near z={zs.z[i]:.6g}")


def build_calabi(spec: SurfaceSpec) -> SurfaceModel:
    """Calabi-type metric e^{-A} h^2 (dx^2 + dy^2) + theta3^2 + dz^2 with alpha beta = e^A."""
    if spec.alpha is None:
        raise UsageError("Calabi family needs an alpha profile")
    dom = spec.domain
    prof = spec.alpha
    prof.validate(dom.z)
    alpha, A = prof.alpha, prof.A
    beta = sf.exp(A) / alpha
    _check_z_function("beta", beta, dom)
    h = spec.h
    _require_positive(h, "h", dom, spec.samples, spec.seed)
    if spec.l2 is None and spec.n2 is None:
        l2, n2 = volume_potential(h)
    else:
        l2 = sf.as_field(spec.l2 if spec.l2 is not None else 0.0)
        n2 = sf.as_field(spec.n2 if spec.n2 is not None else 0.0)
    pts = dom.sample(spec.samples, spec.seed)
    ok, res = sf.num_equal(n2.partial("x") - l2.partial("y"), h * h, pts, spec.tol)
    if not ok:
        worst = _worst_point(n2.partial("x") - l2.partial("y") - h * h, pts)
        raise BuildRejected("d(l2 dx + n2 dy) does not equal h^2 dx^dy", res, worst)
    f = sf.exp(-0.5 * A) * h
    inv_beta = sf.div(sf.ONE, beta)
    data = {"f": f, "g3": inv_beta, "p3x": l2 * inv_beta, "p3y": n2 * inv_beta, "p4x": sf.ZERO, "p4y": sf.ZERO}
    frame = _frame_from_data(data, dom)
    _check_frame(frame, dom, spec.samples, spec.seed)
    params = {"alpha_variant": prof.variant}
    if prof.value is not None:
        params["alpha_value"] = prof.value
    return SurfaceModel(
        family="calabi",
        frame=frame,
        alpha=alpha,
        beta=beta,
        f=f,
        h=h,
        l2=l2,
        n2=n2,
        coframe_data=data,
        domain=dom,
        params=params,
        A=A,
        profile=prof,
        grid_spacing=_grid_spacing(h, l2, n2),
    )


def _worst_point(residual, pts):
    vals = np.abs(np.asarray(sf.evaluate(residual, pts)))
    return pts.as_dict(int(np.argmax(vals)))


def _generalized_pieces(family, a, h, H, l2, n2):
    az = a * sf.z
    two_az = 2.0 * a * sf.z
    two_at = 2.0 * a * sf.t
    s2t, c2t = sf.sin(two_at), sf.cos(two_at)
    if family == "tan":
        alpha = 2.0 * a * sf.tan(az)
        beta = sf.sin(two_az)
        f = h * sf.cos(az)
        cz2 = sf.cos(two_az)
        p4x, p4y = s2t * H, c2t * H
        p3x = c2t * cz2 * H + beta * l2
        p3y = -s2t * cz2 * H + beta * n2
    elif family == "coth":
        alpha = -2.0 * a * sf.cosh(az) / sf.sinh(az)
        beta = sf.sinh(two_az)
        f = h * sf.sinh(az)
        ch2 = sf.cosh(two_az)
        p4x, p4y = c2t * H, s2t * H
        p3x = -s2t * ch2 * H + beta * l2
        p3y = c2t * ch2 * H + beta * n2
    else:  # tanh
        alpha = -2.0 * a * sf.tanh(az)
        beta = sf.sinh(two_az)
        f = h * sf.cosh(az)
        ch2 = sf.cosh(two_az)
        p4x, p4y = s2t * H, c2t * H
        p3x = c2t * ch2 * H + beta * l2
        p3y = -ch2 * s2t * H + beta * n2
    data = {"f": f, "g3": beta, "p3x": p3x, "p3y": p3y, "p4x": p4x, "p4y": p4y}
    return alpha, beta, f, data


def build_generalized(spec: SurfaceSpec, family: str | None = None) -> SurfaceModel:
    """Generalized Calabi type surface of the tan / coth / tanh family."""
    family = family or spec.family
    if family not in GENERALIZED:
        raise UsageError(f"{family!r} is not a generalized Calabi family")
    if spec.a is None or spec.a == 0:
        raise UsageError(f"family {family!r} needs a nonzero parameter a")
    if spec.H is None:
        raise UsageError(f"family {family!r} needs a profile H")
    a = float(spec.a)
    dom = spec.domain
    h, H = spec.h, spec.H
    _require_positive(h, "h", dom, spec.samples, spec.seed)
    _require_positive(H, "H", dom, spec.samples, spec.seed)
    spacing = _grid_spacing(h, H)
    tol = spec.tol if spacing is None else max(spec.tol, grid_tolerance(spacing))

    c1, c2 = pde_coefficients(family, a)
    lnH = sf.ln(H)
    pde_res = sf.laplacian_xy(lnH) - c1 * h * h - c2 * H * H
    grid = dom.xy_grid(17)
    vals = np.abs(np.asarray(sf.evaluate(pde_res, grid)))
    if np.max(vals) > tol:
        raise BuildRejected(
            f"H does not satisfy the {family} equation Delta ln H = {c1:g} h^2 + {c2:+g} H^2",
            float(np.max(vals)),
            grid.as_dict(int(np.argmax(vals))),
        )

    l2g, n2g = h_gradient_potentials(H, a, family, spec.l2n2_sign)
    if spec.l2 is None and spec.n2 is None:
        l2, n2 = l2g, n2g
    else:
        l2 = sf.as_field(spec.l2 if spec.l2 is not None else 0.0)
        n2 = sf.as_field(spec.n2 if spec.n2 is not None else 0.0)
        pts = dom.sample(spec.samples, spec.seed)
        for name, given, want in (("l2", l2, l2g), ("n2", n2, n2g)):
            ok, res = sf.num_equal(given, want, pts, tol)
            if not ok:
                raise BuildRejected(f"{name} does not match the {family} gradient relation", res, _worst_point(given - want, pts))

    alpha, beta, f, data = _generalized_pieces(family, a, h, H, l2, n2)
    _check_z_function("beta", beta, dom)
    _check_z_function("alpha", alpha, dom)
    frame = _frame_from_data(data, dom)
    _check_frame(frame, dom, spec.samples, spec.seed)
    model = SurfaceModel(
        family=family,
        frame=frame,
        alpha=alpha,
        beta=beta,
        f=f,
        h=h,
        l2=l2,
        n2=n2,
        coframe_data=data,
        domain=dom,
        params={"a": a, "c1": c1, "c2": c2, "l2n2_sign": spec.l2n2_sign},
        H=H,
        grid_spacing=spacing,
    )
    if spacing is not None:
        model.notes.append(f"grid-backed H (spacing {spacing:.4g}); tolerances relaxed to {tol:.3g}")
    return model


def build_tan(spec: SurfaceSpec) -> SurfaceModel:
    return build_generalized(spec, "tan")


def build_coth(spec: SurfaceSpec) -> SurfaceModel:
    return build_generalized(spec, "coth")


def build_tanh(spec: SurfaceSpec) -> SurfaceModel:
    return build_generalized(spec, "tanh")


def build(spec: SurfaceSpec) -> SurfaceModel:
    if spec.family == "calabi":
        return build_calabi(spec)
    return build_generalized(spec)


# residual tolerance for grid-backed inputs: GRID_TOL_CONSTANT * spacing^2
GRID_TOL_CONSTANT = 10.0


def grid_tolerance(spacing: float, constant: float = GRID_TOL_CONSTANT) -> float:
    return constant * spacing * spacing


def mutate_theta3(model: SurfaceModel, term: str) -> SurfaceModel:
    """Copy of ``model`` with the sign of one theta3 term flipped (a deliberate corruption).

    ``term`` is ``"dx"``, ``"dy"``, ``"dt"`` or ``"overall"`` (theta3 -> -theta3);
    the dual frame is recomputed so the corrupted pair stays consistent and
    only the geometry is wrong.
    """
    if term not in MUTATIONS:
        raise UsageError(f"unknown mutation {term!r}; expected one of {MUTATIONS}")
    keys = {"dx": ("p3x",), "dy": ("p3y",), "dt": ("g3",), "overall": ("g3", "p3x", "p3y")}[term]
    data = dict(model.coframe_data)
    for key in keys:
        data[key] = -data[key]
    frame = _frame_from_data(data, model.domain)
    out = replace(model, frame=frame, coframe_data=data, notes=model.notes + [f"theta3 {term} sign flipped"])
    return out
