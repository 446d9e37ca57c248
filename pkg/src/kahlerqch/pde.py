"""Newton solver for  Delta u = c1 h^2 + c2 e^{2u}  (u = ln H) on a rectangle with Dirichlet data."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from . import scalar as sf
from .errors import DivergenceError, InfeasibleManufacturedSolution, SingularSystemError, UsageError
from .scalar import ChartPoint
from .surfaces import pde_coefficients

MIN_STEP = 1.0 / 1024


@dataclass
class GridProblem:
    """Uniform grid on [x0, x1] x [y0, y1]; arrays are indexed [i, j] with x along i."""

    x: tuple
    y: tuple
    nx: int
    ny: int
    c1: float
    c2: float
    h2: np.ndarray
    boundary: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise UsageError("grid needs at least 3 nodes per axis")
        if not (self.x[1] > self.x[0] and self.y[1] > self.y[0]):
            raise UsageError("empty rectangle")
        shape = (self.nx, self.ny)
        self.h2 = np.broadcast_to(np.asarray(self.h2, float), shape).copy()
        self.boundary = np.broadcast_to(np.asarray(self.boundary, float), shape).copy()
        if not np.all(np.isfinite(self.h2)) or np.any(self.h2 <= 0):
            raise UsageError("h must be positive and finite at every node")
        edge = _edge_mask(shape)
        if not np.all(np.isfinite(self.boundary[edge])):
            raise UsageError("Dirichlet data must be finite")

    @property
    def xs(self):
        return np.linspace(*self.x, self.nx)

    @property
    def ys(self):
        return np.linspace(*self.y, self.ny)

    @property
    def hx(self):
        return (self.x[1] - self.x[0]) / (self.nx - 1)

    @property
    def hy(self):
        return (self.y[1] - self.y[0]) / (self.ny - 1)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    @classmethod
    def from_fields(cls, family: str, a: float, h, boundary, x=(0.0, 1.0), y=(0.0, 1.0), n: int = 33, ny=None,
                    h2=None, name=""):
        """Sample h (or h2 directly) and the Dirichlet data u|_boundary from ScalarFields of (x, y)."""
        c1, c2 = pde_coefficients(family, a)
        ny = n if ny is None else ny
        X, Y = np.meshgrid(np.linspace(*x, n), np.linspace(*y, ny), indexing="ij")
        pts = ChartPoint(X, Y)
        h2v = sf.evaluate(h2, pts) if h2 is not None else np.asarray(sf.evaluate(h, pts)) ** 2
        bv = sf.evaluate(boundary, pts)
        return cls(tuple(x), tuple(y), n, ny, c1, c2, np.asarray(h2v), np.asarray(bv), name or family)

    def constant_root(self):
        """The constant solution of c1 h^2 + c2 e^{2u} = 0, if h is constant and one exists."""
        h2 = self.h2
        if np.ptp(h2) > 1e-14 * np.max(h2) or self.c2 == 0:
            return None
        q = -self.c1 * float(h2.flat[0]) / self.c2
        return 0.5 * math.log(q) if q > 0 else None

    def residual(self, u, jit=None) -> np.ndarray:
        return _kernels.liouville_residual(u, self.h2, self.c1, self.c2, self.hx, self.hy, jit=jit)

    def laplacian_matrix(self):
        """5-point Laplacian on interior nodes (row-major over [i, j]) as CSC."""
        mx, my = self.nx - 2, self.ny - 2
        Dx = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(mx, mx)) / self.hx**2
        Dy = sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(my, my)) / self.hy**2
        return (sp.kron(Dx, sp.identity(my)) + sp.kron(sp.identity(mx), Dy)).tocsc()


def _edge_mask(shape):
    m = np.zeros(shape, bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


@dataclass
class GridSolution:
    problem: GridProblem
    u: np.ndarray
    residual: float
    iterations: int
    history: list
    initial: str
    notes: list = field(default_factory=list)

    @property
    def xs(self):
        return self.problem.xs

    @property
    def ys(self):
        return self.problem.ys

    def u_field(self):
        return sf.grid_field(self.xs, self.ys, self.u, name="u")

    def H_field(self):
        """Grid-backed H = e^u as a ScalarField (C^2 bicubic interpolant of u)."""
        return sf.exp(self.u_field())

    def report(self) -> dict:
        p = self.problem
        return {
            "problem": {"name": p.name, "x": list(p.x), "y": list(p.y), "nx": p.nx, "ny": p.ny, "c1": p.c1, "c2": p.c2},
            "initial_iterate": self.initial,
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_history": list(self.history),
            "notes": list(self.notes),
        }


def _interior(a):
    return a[1:-1, 1:-1]


def _solve(J, rhs):
    try:
        lu = spla.splu(J)
        out = lu.solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"Jacobian factorization failed: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise SingularSystemError("Jacobian solve produced non-finite values")
    return out


def harmonic_extension(p: GridProblem) -> np.ndarray:
    u = np.where(_edge_mask((p.nx, p.ny)), p.boundary, 0.0)
    lap = p.laplacian_matrix()
    b = _interior(_kernels.liouville_residual_numpy(u, np.zeros_like(u), 0.0, 0.0, p.hx, p.hy))
    _interior(u)[...] = _solve(lap, -b.ravel()).reshape(b.shape)
    return u


def initial_iterate(p: GridProblem):
    root = p.constant_root()
    if root is not None:
        u = np.where(_edge_mask((p.nx, p.ny)), p.boundary, root)
        return u, "constant root"
    return harmonic_extension(p), "harmonic extension"


def solve_logH(p: GridProblem, tol: float = 1e-10, max_iter: int = 50, jit=None) -> GridSolution:
    """Damped Newton on the interior nodes; Jacobian Delta_h - 2 c2 e^{2u} diag."""
    if tol <= 0:
        raise UsageError("tol must be positive")
    u, start = initial_iterate(p)
    lap = p.laplacian_matrix()
    F = p.residual(u, jit)
    norm = float(np.max(np.abs(F)))
    history = [norm]
    notes = []
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise DivergenceError(f"no convergence in {max_iter} Newton steps (residual {norm:.3e})", history)
        if not np.isfinite(norm):
            raise DivergenceError("residual became non-finite", history)
        J = (lap - sp.diags(2.0 * p.c2 * np.exp(2.0 * _interior(u)).ravel())).tocsc()
        step = _solve(J, -_interior(F).ravel()).reshape(p.nx - 2, p.ny - 2)
        lam = 1.0
        while True:
            trial = u.copy()
            _interior(trial)[...] += lam * step
            with np.errstate(over="ignore", invalid="ignore"):
                Ft = p.residual(trial, jit)
            nt = float(np.max(np.abs(Ft)))
            if np.isfinite(nt) and nt < norm:
                break
            lam *= 0.5
            if lam < MIN_STEP:
                msg = f"line search stalled at residual {norm:.3e}"
                floor = rounding_floor(p, u)
                if norm <= 10 * floor:
                    msg += f"; tol {tol:.1e} is below the rounding floor (~{floor:.1e}) of the residual"
                raise DivergenceError(msg, history + [nt])
        if lam < 1.0:
            notes.append(f"step {it + 1} damped to {lam:g}")
        u, F, norm = trial, Ft, nt
        history.append(norm)
        it += 1
    return GridSolution(p, u, norm, it, history, start, notes)


def rounding_floor(p: GridProblem, u) -> float:
    """Rough size of the round-off in one residual evaluation."""
    eps = np.finfo(float).eps
    stencil = np.max(np.abs(u)) * (4.0 / p.hx**2 + 4.0 / p.hy**2)
    rhs = abs(p.c1) * np.max(p.h2) + abs(p.c2) * np.max(np.exp(2.0 * u))
    return float(eps * (stencil + rhs))


# -- manufactured solutions and convergence order ------------------------------------


def manufactured_problem(u_star, family: str, a: float, x, y, n: int) -> GridProblem:
    """Problem whose exact solution is u_star, with h^2 = (Delta u* - c2 e^{2u*}) / c1 checked positive."""
    u_star = sf.as_field(u_star)
    c1, c2 = pde_coefficients(family, a)
    h2 = (sf.laplacian_xy(u_star) - c2 * sf.exp(2.0 * u_star)) / c1
    X, Y = np.meshgrid(np.linspace(*x, n), np.linspace(*y, n), indexing="ij")
    vals = np.asarray(sf.evaluate(h2, ChartPoint(X, Y)))
    if np.any(vals <= 0):
        i = int(np.argmin(vals))
        raise InfeasibleManufacturedSolution(
            "manufactured h^2 is not positive", float(vals.flat[i]), {"x": float(X.flat[i]), "y": float(Y.flat[i])}
        )
    return GridProblem.from_fields(family, a, None, u_star, x, y, n, h2=h2, name=f"manufactured {family}")


@dataclass
class ConvergenceStudy:
    sizes: list
    errors: list
    orders: list
    reliable: bool
    note: str = ""

    @property
    def order(self):
        """Order from the finest pair (None when not applicable)."""
        return self.orders[-1] if self.orders else None

    def to_dict(self):
        return {"sizes": self.sizes, "errors": self.errors, "orders": self.orders, "reliable": self.reliable,
                "note": self.note}


def convergence_order(factory, exact, sizes=(33, 65, 129), tol: float = 1e-11, max_iter: int = 50, jit=None):
    """log2(err_N / err_M) between successive sizes, max-norm error at the nodes shared by all grids.

    ``factory(n)`` returns the GridProblem at ``n`` nodes per axis; ``exact`` is a ScalarField of (x, y).
    Sizes must refine by halving the spacing (M = 2(N - 1) + 1).
    """
    sizes = list(sizes)
    for a, b in zip(sizes, sizes[1:]):
        if b - 1 != 2 * (a - 1):
            raise UsageError(f"sizes {a} -> {b} do not halve the spacing")
    errors = []
    for n in sizes:
        sol = solve_logH(factory(n), tol, max_iter, jit)
        stride = (n - 1) // (sizes[0] - 1)
        shared = sol.u[::stride, ::stride]
        X, Y = np.meshgrid(sol.xs[::stride], sol.ys[::stride], indexing="ij")
        err = float(np.max(np.abs(shared - np.asarray(sf.evaluate(exact, ChartPoint(X, Y))))))
        errors.append(err)
    if max(errors) < 1e-12:
        return ConvergenceStudy(sizes, errors, [], True, "not applicable: errors at machine precision")
    orders = [math.log2(e0 / e1) if e1 > 0 else float("inf") for e0, e1 in zip(errors, errors[1:])]
    reliable = min(sizes) >= 9
    note = "" if reliable else "unreliable: coarsest grid too small for the asymptotic regime"
    return ConvergenceStudy(sizes, errors, orders, reliable, note)


# -- I/O --------------------------------------------------------------------------------


def _atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def grid_to_csv(path, xs, ys, u):
    """Rows (x, y, u) with x varying slowest, header included."""
    lines = ["x,y,u"]
    for i, xv in enumerate(xs):
        for j, yv in enumerate(ys):
            lines.append(f"{float(xv)!r},{float(yv)!r},{float(u[i, j])!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def grid_from_csv(path):
    """(xs, ys, U) from an (x, y, value) CSV; the node set must be a full rectangle."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3:
            raise UsageError(f"{path}: expected a header with three columns (x, y, value)")
        rows = [tuple(float(v) for v in r[:3]) for r in reader if r]
    if not rows:
        raise UsageError(f"{path}: no data rows")
    arr = np.array(rows)
    xs, ys = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    if len(rows) != xs.size * ys.size:
        raise UsageError(f"{path}: nodes do not form a rectangular grid")
    U = np.full((xs.size, ys.size), np.nan)
    U[np.searchsorted(xs, arr[:, 0]), np.searchsorted(ys, arr[:, 1])] = arr[:, 2]
    if np.any(np.isnan(U)):
        raise UsageError(f"{path}: nodes do not form a rectangular grid")
    return xs, ys, U


def write_solution(sol: GridSolution, csv_path=None, report_path=None, extra=None):
    if csv_path:
        grid_to_csv(csv_path, sol.xs, sol.ys, sol.u)
    if report_path:
        rep = sol.report()
        if extra:
            rep.update(extra)
        _atomic_write(report_path, json.dumps(rep, indent=2, sort_keys=True) + "\n")
