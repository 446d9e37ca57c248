"""Command-line front end: ``kahlerqch {alpha,build-verify,pde,sample}``.

Exit codes: 0 pass, 1 check failure, 2 config/usage error, 3 build rejection,
4 solver divergence.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import pde as pde_mod
from . import scalar as sf
from . import surfaces as surf
from .errors import (
    BuildRejected,
    ConfigError,
    DivergenceError,
    DomainError,
    InfeasibleManufacturedSolution,
    NotClosedError,
    SingularSystemError,
    UsageError,
)
from .scalar import Box, ChartPoint
from .verify import DEFAULT_TOL, run_suite, semisym_defect

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_BUILD, EXIT_DIVERGED = 0, 1, 2, 3, 4

SAMPLES_ENV = "KAHLERQCH_SAMPLES"
DEFAULT_SAMPLES = 100


# -- expressions -----------------------------------------------------------------------

_FUNCS = {name: getattr(sf, name) for name in sf.FUNCTIONS}
_CONSTS = {"pi": math.pi, "e": math.e}


def parse_expr(text: str, params: dict | None = None) -> sf.ScalarField:
    """Infix expression over x, y, z, t -> ScalarField.

    Grammar: numbers, + - * / and ** (or ^), parentheses, the functions
    sin cos tan sinh cosh tanh exp ln sqrt, the constants pi and e, and any
    names bound in ``params``.
    """
    params = params or {}
    # '^' must become '**' before parsing: as XOR it binds looser than '+'
    source = str(text).strip().replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _convert(tree.body, params, text)


def _convert(node, params, text):
    def rec(n):
        return _convert(n, params, text)

    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return sf.const(float(node.value))
    if isinstance(node, ast.Name):
        if node.id in sf.COORDS:
            return sf.coord(node.id)
        if node.id in params:
            return sf.const(float(params[node.id]))
        if node.id in _CONSTS:
            return sf.const(_CONSTS[node.id])
        raise ConfigError(f"unknown name {node.id!r} in expression {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = rec(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = rec(node.left), rec(node.right)
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            return a**b
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = _FUNCS.get(node.func.id)
        if fn is None:
            raise ConfigError(f"unknown function {node.func.id!r} in expression {text!r}")
        if len(node.args) != 1:
            raise ConfigError(f"{node.func.id} takes one argument in {text!r}")
        return fn(rec(node.args[0]))
    raise ConfigError(f"unsupported syntax in expression {text!r}")


# -- config -------------------------------------------------------------------------------


class RunConfig:
    """Parsed config file with sections [surface], [verify], [pde], [output], [parameters]."""

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.optionxform = str  # keys are case-sensitive: h and H differ
        try:
            cp.read(self.path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        self.cp = cp
        self.base = self.path.parent
        self.params = {k: self._float("parameters", k) for k in cp["parameters"]} if cp.has_section("parameters") else {}

    # raw access
    def get(self, section, key, default=None):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        return default

    def require(self, section, key):
        v = self.get(section, key)
        if v in (None, ""):
            raise ConfigError(f"missing required field [{section}] {key}")
        return v

    def _float(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {v!r}") from None

    def _int(self, section, key, default=None):
        v = self._float(section, key)
        if v is None:
            return default
        if v != int(v):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return int(v)

    def _bool(self, section, key, default=False):
        v = self.get(section, key)
        if v is None:
            return default
        try:
            return self.cp.getboolean(section, key)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a boolean") from None

    def _interval(self, section, key, default):
        v = self.get(section, key)
        if v is None:
            return default
        parts = [p for p in v.replace(";", ",").split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError(f"[{section}] {key} must be 'lo, hi'")
        try:
            return tuple(float(parse_expr(p, self.params).evaluate({})) for p in parts)
        except (ValueError, TypeError, KeyError):
            raise ConfigError(f"[{section}] {key}: interval endpoints must be constants") from None

    def path_of(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def expr(self, section, key, default=None):
        v = self.get(section, key)
        if v is None:
            return default
        return parse_expr(v, self._expr_params())

    def _expr_params(self):
        out = dict(self.params)
        a = self._float("surface", "a")
        if a is not None:
            out.setdefault("a", a)
        return out

    def grid(self, section, key):
        v = self.get(section, key)
        if v is None:
            return None
        path = self.path_of(v)
        if not path.is_file():
            raise ConfigError(f"[{section}] {key}: grid file not found: {v}")
        try:
            xs, ys, U = pde_mod.grid_from_csv(path)
        except UsageError as exc:
            raise ConfigError(str(exc)) from None
        return sf.grid_field(xs, ys, U, name=path.name)

    # derived objects
    def domain(self) -> Box:
        d = Box()
        try:
            return Box(
                x=self._interval("surface", "x", d.x),
                y=self._interval("surface", "y", d.y),
                z=self._interval("surface", "z", d.z),
                t=self._interval("surface", "t", d.t),
            )
        except UsageError as exc:
            raise ConfigError(str(exc)) from None

    def family(self) -> str:
        fam = self.require("surface", "family").lower()
        if fam not in surf.FAMILIES:
            raise ConfigError(f"[surface] family must be one of {', '.join(surf.FAMILIES)}, got {fam!r}")
        return fam

    def alpha_profile(self, domain: Box):
        variant = self.get("surface", "alpha", "constant").lower()
        if variant == "user":
            alpha = self.expr("surface", "alpha_expr")
            A = self.expr("surface", "A_expr")
            if alpha is None or A is None:
                raise ConfigError("[surface] alpha = user needs alpha_expr and A_expr")
            try:
                return surf.AlphaProfile.user(alpha, A)
            except UsageError as exc:
                raise ConfigError(str(exc)) from None
        value = self._float("surface", "alpha_value")
        if variant != "semi" and value is None:
            raise ConfigError(f"[surface] alpha = {variant} needs alpha_value")
        try:
            return surf.AlphaProfile.for_interval(variant, value, domain.z)
        except UsageError as exc:
            raise ConfigError(str(exc)) from None

    def surface_spec(self, tol=None) -> surf.SurfaceSpec:
        fam = self.family()
        dom = self.domain()
        a = self._float("surface", "a")
        h = self.grid("surface", "h_grid") or self.expr("surface", "h", sf.ONE)
        H = self.grid("surface", "H_grid")
        logH = self.grid("surface", "logH_grid")
        if logH is not None:
            H = sf.exp(logH)
        if H is None:
            H = self.expr("surface", "H")
        mode = self.get("surface", "potentials", "auto").lower()
        if mode not in ("auto", "explicit", "from-h", "volume-potential"):
            raise ConfigError("[surface] potentials must be explicit, from-H or volume-potential")
        l2 = n2 = None
        if mode == "explicit":
            l2 = self.expr("surface", "l2", sf.ZERO)
            n2 = self.expr("surface", "n2", sf.ZERO)
        sign = self._float("surface", "l2n2_sign", 1.0)
        kwargs = dict(family=fam, domain=dom, h=h, l2=l2, n2=n2, l2n2_sign=sign,
                      tol=tol if tol is not None else self._float("verify", "build_tol", DEFAULT_TOL))
        if fam == "calabi":
            if mode == "from-h":
                raise ConfigError("[surface] potentials = from-H applies to tan/coth/tanh only")
            kwargs["alpha"] = self.alpha_profile(dom)
        else:
            if a is None:
                raise ConfigError(f"[surface] family {fam} needs field 'a'")
            if H is None:
                raise ConfigError(f"[surface] family {fam} needs field 'H' (or H_grid / logH_grid)")
            if mode == "volume-potential":
                raise ConfigError("[surface] potentials = volume-potential applies to calabi only")
            kwargs["a"] = a
            kwargs["H"] = H
            if self._bool("surface", "manufacture_h"):
                try:
                    kwargs["h"] = surf.manufacture_h_from_H(H, a, fam, dom)
                except UsageError as exc:
                    raise ConfigError(str(exc)) from None
        try:
            return surf.SurfaceSpec(**kwargs)
        except UsageError as exc:
            raise ConfigError(str(exc)) from None

    def samples(self, override=None):
        if override is not None:
            return override
        n = self._int("verify", "samples")
        if n is not None:
            return n
        env = os.environ.get(SAMPLES_ENV)
        if env:
            try:
                return int(env)
            except ValueError:
                raise ConfigError(f"{SAMPLES_ENV} must be an integer, got {env!r}") from None
        return DEFAULT_SAMPLES


# -- commands -----------------------------------------------------------------------------


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_alpha(args) -> int:
    interval = tuple(args.interval) if args.interval else None
    try:
        prof = surf.classify_alpha(args.D, args.branch, interval)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except BuildRejected as exc:
        _err(str(exc))
        return EXIT_BUILD
    rows = [("variant", prof.variant), ("D", f"{args.D:g}")]
    if prof.value is not None:
        rows.append(("a", f"{prof.value:g}"))
    rows += [("alpha", str(prof.alpha)), ("A", str(prof.A)), ("beta (Calabi)", str(sf.exp(prof.A) / prof.alpha))]
    if prof.variant in ("tan", "coth", "tanh"):
        a = prof.value
        rows.append(("beta (generalized)", f"{'sin' if prof.variant == 'tan' else 'sinh'}({2 * a:g}*z)"))
    lo, hi = interval or prof.natural
    rows.append(("valid z-interval", f"({lo:g}, {hi:g}) open"))
    if prof.variant == "semi":
        rows.append(("note", "E4 ln alpha = alpha/2 holds identically: semi-symmetric subfamily"))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    return EXIT_OK


def _out_path(flag, cfg: RunConfig, key):
    """Command-line paths are taken as given; [output] paths are relative to the config file."""
    if flag:
        return Path(flag)
    v = cfg.get("output", key)
    return cfg.path_of(v) if v else None


def _write_text(path, text):
    pde_mod._atomic_write(path, text)


def cmd_build_verify(args) -> int:
    try:
        cfg = RunConfig(args.config)
        spec = cfg.surface_spec()
        samples = cfg.samples(args.samples)
        seed = args.seed if args.seed is not None else cfg._int("verify", "seed", 0)
        tol = args.tol if args.tol is not None else cfg._float("verify", "tol", DEFAULT_TOL)
        mutate = args.mutate or cfg.get("surface", "mutate")
        report_path = _out_path(args.report, cfg, "report")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        model = surf.build(spec)
        if mutate:
            model = surf.mutate_theta3(model, mutate)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (BuildRejected, DomainError, NotClosedError) as exc:
        _err(f"build rejected: {exc}")
        return EXIT_BUILD
    try:
        report = run_suite(model, samples, seed, tol)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    text = report.to_json()
    if report_path:
        _write_text(report_path, text)
    else:
        sys.stdout.write(text)
    print(report.summary(), file=sys.stderr if not report_path else sys.stdout)
    return EXIT_OK if report.passed else EXIT_CHECK


def _pde_problem(cfg: RunConfig, n: int):
    fam = (cfg.get("pde", "family") or cfg.family()).lower()
    a = cfg._float("pde", "a", cfg._float("surface", "a"))
    if a is None:
        raise ConfigError("[pde] needs parameter 'a' (or [surface] a)")
    dom = cfg.domain()
    x = cfg._interval("pde", "x", dom.x)
    y = cfg._interval("pde", "y", dom.y)
    h = cfg.expr("pde", "h") or cfg.expr("surface", "h", sf.ONE)
    boundary = cfg.expr("pde", "boundary")
    try:
        if boundary is None:
            c1, c2 = surf.pde_coefficients(fam, a)
            probe = pde_mod.GridProblem.from_fields(fam, a, h, sf.ZERO, x, y, 3)
            root = probe.constant_root()
            if root is None:
                raise ConfigError("[pde] boundary is required when no constant root exists")
            boundary = sf.const(root)
        return pde_mod.GridProblem.from_fields(fam, a, h, boundary, x, y, n, name=fam)
    except UsageError as exc:
        raise ConfigError(str(exc)) from None


def cmd_pde(args) -> int:
    try:
        cfg = RunConfig(args.config)
        tol = cfg._float("pde", "tol", 1e-10)
        max_iter = cfg._int("pde", "max_iter", 50)
        csv_path = _out_path(args.csv, cfg, "solution")
        report_path = _out_path(args.report, cfg, "pde_report")
        n = cfg._int("pde", "n", 33)
        if args.manufactured:
            u_star = cfg.expr("pde", "manufactured")
            if u_star is None:
                raise ConfigError("[pde] manufactured = <u* expression> is required with --manufactured")
            fam = (cfg.get("pde", "family") or cfg.family()).lower()
            a = cfg._float("pde", "a", cfg._float("surface", "a"))
            dom = cfg.domain()
            x = cfg._interval("pde", "x", dom.x)
            y = cfg._interval("pde", "y", dom.y)
            sizes = [int(s) for s in (cfg.get("pde", "sizes") or "33, 65, 129").split(",")]
        else:
            problem = _pde_problem(cfg, n)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except ValueError as exc:
        _err(f"bad [pde] entry: {exc}")
        return EXIT_CONFIG

    if args.manufactured:
        try:
            study = pde_mod.convergence_order(
                lambda k: pde_mod.manufactured_problem(u_star, fam, a, x, y, k), u_star, sizes, tol, max_iter
            )
        except InfeasibleManufacturedSolution as exc:
            _err(str(exc))
            return EXIT_CONFIG
        except (DivergenceError, SingularSystemError) as exc:
            _err(f"solver failed: {exc}")
            if report_path:
                _write_text(report_path, json.dumps({"error": str(exc), "residual_history":
                                                          getattr(exc, "history", [])}, indent=2) + "\n")
            return EXIT_DIVERGED
        except UsageError as exc:
            _err(str(exc))
            return EXIT_CONFIG
        text = json.dumps({"convergence": study.to_dict()}, indent=2, sort_keys=True) + "\n"
        if report_path:
            _write_text(report_path, text)
        for s, e in zip(study.sizes, study.errors):
            print(f"N={s:<5d} max error {e:.6e}")
        if study.order is None:
            print(f"order: n/a ({study.note})")
        else:
            print("order: " + ", ".join(f"{o:.4f}" for o in study.orders) + (f"  [{study.note}]" if study.note else ""))
        return EXIT_OK
    try:
        sol = pde_mod.solve_logH(problem, tol, max_iter)
    except (DivergenceError, SingularSystemError) as exc:
        _err(f"solver failed: {exc}")
        if report_path:
            _write_text(report_path, json.dumps({"error": str(exc), "residual_history":
                                                      [float(v) for v in getattr(exc, "history", [])]},
                                                     indent=2, sort_keys=True) + "\n")
        return EXIT_DIVERGED
    pde_mod.write_solution(sol, csv_path, report_path)
    print(f"converged: {sol.iterations} Newton steps, residual {sol.residual:.3e} (start: {sol.initial})")
    return EXIT_OK


def available_fields(model: surf.SurfaceModel) -> dict:
    """name -> ("scalar", ScalarField) or ("curv", extractor)."""
    out = {"alpha": ("scalar", model.alpha), "beta": ("scalar", model.beta), "f": ("scalar", model.f),
           "h": ("scalar", model.h), "l2": ("scalar", model.l2), "n2": ("scalar", model.n2)}
    if model.A is not None:
        out["A"] = ("scalar", model.A)
    if model.H is not None:
        out["H"] = ("scalar", model.H)
    out["semisym_defect"] = ("scalar", semisym_defect(model.alpha))
    for i, th in enumerate(model.theta, 1):
        for (mu,), c in th.coeffs.items():
            out[f"theta{i}_d{sf.COORDS[mu]}"] = ("scalar", c)
    out["tau"] = ("curv", lambda d: d.tau)
    for i in range(4):
        for j in range(i, 4):
            out[f"ricci{i + 1}{j + 1}"] = ("curv", lambda d, i=i, j=j: d.ricci[:, i, j])
    for k in range(3):
        out[f"wplus{k + 1}"] = ("curv", lambda d, k=k: d.wplus_eigenvalues()[:, k])
    return out


def _grid_counts(text):
    parts = [int(p) for p in str(text).split(",")]
    if len(parts) == 1:
        parts *= 4
    if len(parts) != 4 or min(parts) < 1:
        raise ConfigError("--grid takes one count or four comma-separated counts (x,y,z,t)")
    return parts


def cmd_sample(args) -> int:
    try:
        cfg = RunConfig(args.config)
        spec = cfg.surface_spec()
        counts = _grid_counts(args.grid)
        names = [n.strip() for n in args.fields.split(",") if n.strip()]
        out_path = _out_path(args.out, cfg, "samples")
    except (ConfigError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        model = surf.build(spec)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (BuildRejected, DomainError) as exc:
        _err(f"build rejected: {exc}")
        return EXIT_BUILD
    fields = available_fields(model)
    unknown = [n for n in names if n not in fields]
    if unknown or not names:
        _err(f"unknown field(s) {', '.join(unknown) or '(none given)'}; available: {', '.join(fields)}")
        return EXIT_CONFIG
    pts = model.domain.grid(counts)
    cols = []
    try:
        data = None
        for n in names:
            kind, obj = fields[n]
            if kind == "scalar":
                cols.append(np.asarray(sf.evaluate(obj, pts), float))
            else:
                if data is None:
                    data = model.curvature.evaluate(pts)
                cols.append(np.asarray(obj(data), float))
    except DomainError as exc:
        _err(f"evaluation failed: {exc}")
        return EXIT_BUILD
    arr = pts.as_array()
    lines = [",".join(["x", "y", "z", "t"] + names)]
    for r in range(arr.shape[0]):
        lines.append(",".join(f"{v:.15g}" for v in list(arr[r]) + [c[r] for c in cols]))
    text = "\n".join(lines) + "\n"
    if out_path:
        _write_text(out_path, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kahlerqch", description="Generalized Calabi type Kaehler surfaces: build, verify, solve.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("alpha", help="classify alpha from alpha' = alpha^2/2 + D")
    a.add_argument("--D", type=float, required=True)
    a.add_argument("--branch", choices=["tan", "coth", "tanh", "semi"])
    a.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"))
    a.set_defaults(func=cmd_alpha)

    b = sub.add_parser("build-verify", help="build a surface from a config and run the check suite")
    b.add_argument("config")
    b.add_argument("--report", help="JSON report path (default: [output] report, else stdout)")
    b.add_argument("--samples", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--tol", type=float)
    b.add_argument("--mutate", choices=surf.MUTATIONS, help="flip one theta3 sign (mutation test)")
    b.set_defaults(func=cmd_build_verify)

    d = sub.add_parser("pde", help="solve Delta ln H = c1 h^2 + c2 H^2 on a grid")
    d.add_argument("config")
    d.add_argument("--manufactured", action="store_true", help="run the convergence-order protocol")
    d.add_argument("--csv", help="solution CSV path")
    d.add_argument("--report", help="JSON solve report path")
    d.set_defaults(func=cmd_pde)

    s = sub.add_parser("sample", help="sample named fields of a built surface on a grid")
    s.add_argument("config")
    s.add_argument("--fields", required=True, help="comma-separated field names")
    s.add_argument("--grid", default="3", help="nodes per axis: N or Nx,Ny,Nz,Nt")
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
