"""Differential forms and vector fields on the 4D chart.

Forms are stored in the coordinate cobasis dx, dy, dz, dt (indices 0..3) with
canonically sorted multi-indices.  Frame-basis components are obtained on
demand by pairing with a dual frame.  Orientation is fixed by
vol = theta1 ^ theta2 ^ theta3 ^ theta4.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import scalar as sf
from .errors import DegenerateCoframeError, UsageError
from .scalar import COORDS, Box, ChartPoint, ScalarField

DIM = 4


def _sort_sign(indices):
    """Sort ``indices``; return (sorted tuple, permutation sign), or (None, 0) on a repeat."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return None, 0
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return tuple(idx), sign


def perm_sign(seq) -> int:
    return _sort_sign(seq)[1]


class KForm:
    """A k-form sum_I a_I dx^I with ScalarField coefficients (I sorted, 0 <= k <= 4)."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs=None):
        if not 0 <= degree <= DIM:
            raise UsageError(f"form degree must be 0..4, got {degree}")
        self.degree = degree
        clean = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise UsageError(f"multi-index {idx} does not match degree {degree}")
            key, sign = _sort_sign(idx)
            if key is None:
                continue
            c = sf.as_field(c)
            if sign < 0:
                c = -c
            prev = clean.get(key)
            clean[key] = c if prev is None else prev + c
        self.coeffs = {k: v for k, v in clean.items() if not v.is_const(0.0)}

    # -- construction -------------------------------------------------------
    @classmethod
    def zero(cls, degree):
        return cls(degree)

    @classmethod
    def function(cls, f):
        return cls(0, {(): f})

    def __getitem__(self, idx) -> ScalarField:
        key, sign = _sort_sign(idx)
        if key is None:
            return sf.ZERO
        c = self.coeffs.get(key, sf.ZERO)
        return c if sign > 0 else -c

    # -- linear structure -----------------------------------------------------
    def __add__(self, other):
        other = _as_form(other, self.degree)
        if other.degree != self.degree:
            raise UsageError(f"cannot add forms of degree {self.degree} and {other.degree}")
        coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs[k] + v if k in coeffs else v
        return KForm(self.degree, coeffs)

    __radd__ = __add__

    def __neg__(self):
        return KForm(self.degree, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-_as_form(other, self.degree))

    def __rsub__(self, other):
        return _as_form(other, self.degree) - self

    def __mul__(self, scalar):
        if isinstance(scalar, KForm):
            return wedge(self, scalar)
        s = sf.as_field(scalar)
        return KForm(self.degree, {k: s * v for k, v in self.coeffs.items()})

    def __rmul__(self, scalar):
        s = sf.as_field(scalar)
        return KForm(self.degree, {k: s * v for k, v in self.coeffs.items()})

    def __truediv__(self, scalar):
        s = sf.as_field(scalar)
        return KForm(self.degree, {k: v / s for k, v in self.coeffs.items()})

    def is_zero(self) -> bool:
        """Structurally zero (no surviving coefficients)."""
        return not self.coeffs

    # -- calculus ------------------------------------------------------------
    def d(self) -> "KForm":
        return ext_d(self)

    def wedge(self, other) -> "KForm":
        return wedge(self, other)

    def __call__(self, *vectors) -> ScalarField:
        """Contract with ``degree`` vector fields: a(V1, ..., Vk)."""
        if len(vectors) != self.degree:
            raise UsageError(f"a {self.degree}-form takes {self.degree} vectors, got {len(vectors)}")
        if self.degree == 0:
            return self.coeffs.get((), sf.ZERO)
        terms = []
        for idx, c in self.coeffs.items():
            terms.append(c * _det([[v.components[mu] for mu in idx] for v in vectors]))
        return sf.add(*terms)

    # -- numerics ------------------------------------------------------------
    def dense(self, point: ChartPoint, cache=None) -> np.ndarray:
        """Fully antisymmetric coefficient array, shape ``point.shape + (4,)*k``."""
        env = point.env()
        cache = {} if cache is None else cache
        shape = point.shape
        out = np.zeros(shape + (DIM,) * self.degree)
        for idx, c in self.coeffs.items():
            val = np.broadcast_to(np.asarray(c.evaluate(env, cache), dtype=float), shape)
            for perm in itertools.permutations(range(self.degree)):
                target = tuple(idx[p] for p in perm)
                out[(Ellipsis,) + target] = perm_sign(perm) * val
        return out

    def frame_components(self, frame: "FramePair", point: ChartPoint, cache=None) -> np.ndarray:
        """Components a(E_i1, ..., E_ik) in the orthonormal frame."""
        cache = {} if cache is None else cache
        dense = self.dense(point, cache)
        E = frame.frame_matrix(point, cache)
        return to_frame(dense, E)

    def __repr__(self):
        if not self.coeffs:
            return f"KForm({self.degree}, 0)"
        parts = []
        for idx, c in sorted(self.coeffs.items()):
            basis = "^".join("d" + COORDS[i] for i in idx) or "1"
            parts.append(f"({c})*{basis}")
        return " + ".join(parts)


def to_frame(dense: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Contract every coordinate slot of ``dense`` with E[..., a, mu]."""
    k = dense.ndim - (E.ndim - 2)
    if k == 0:
        return dense
    ins, outs = "mnop"[:k], "abcd"[:k]
    expr = "..." + ins + "," + ",".join("..." + o + i for o, i in zip(outs, ins)) + "->..." + outs
    return np.einsum(expr, dense, *([E] * k))


def _as_form(other, degree):
    if isinstance(other, KForm):
        return other
    if degree == 0:
        return KForm.function(sf.as_field(other))
    if isinstance(other, (int, float)) and other == 0:
        return KForm(degree)
    raise TypeError(f"cannot combine a {degree}-form with {type(other).__name__}")


def _det(rows):
    """Leibniz determinant of a small square matrix of ScalarFields."""
    n = len(rows)
    if n == 0:
        return sf.ONE
    if n == 1:
        return sf.as_field(rows[0][0])
    terms = []
    for perm in itertools.permutations(range(n)):
        factors = [rows[i][perm[i]] for i in range(n)]
        if any(sf.as_field(f).is_const(0.0) for f in factors):
            continue
        term = sf.mul(*factors)
        terms.append(term if perm_sign(perm) > 0 else -term)
    return sf.add(*terms)


def basis_form(*indices) -> KForm:
    return KForm(len(indices), {tuple(indices): sf.ONE})


dx = basis_form(0)
dy = basis_form(1)
dz = basis_form(2)
dt = basis_form(3)


def one_form(cx=0, cy=0, cz=0, ct=0) -> KForm:
    return KForm(1, {(0,): cx, (1,): cy, (2,): cz, (3,): ct})


def wedge(a: KForm, b: KForm) -> KForm:
    """Exterior product; degree overflow gives the zero form of that degree."""
    if not isinstance(a, KForm):
        a = KForm.function(sf.as_field(a))
    if not isinstance(b, KForm):
        b = KForm.function(sf.as_field(b))
    deg = a.degree + b.degree
    if deg > DIM:
        # no 5-forms in dimension 4
        return _Overflow(deg)
    coeffs = {}
    for i, ca in a.coeffs.items():
        for j, cb in b.coeffs.items():
            key, sign = _sort_sign(i + j)
            if key is None:
                continue
            term = ca * cb if sign > 0 else -(ca * cb)
            coeffs[key] = coeffs[key] + term if key in coeffs else term
    return KForm(deg, coeffs)


class _Overflow(KForm):
    """Zero form of degree > 4; only ever compares equal to zero."""

    __slots__ = ()

    def __init__(self, degree):
        self.degree = degree
        self.coeffs = {}


def ext_d(a: KForm) -> KForm:
    if a.degree >= DIM:
        return KForm.zero(DIM) if a.degree == DIM else a
    coeffs = {}
    for idx, c in a.coeffs.items():
        for mu, name in enumerate(COORDS):
            if mu in idx:
                continue
            dc = c.partial(name)
            if dc.is_const(0.0):
                continue
            key, sign = _sort_sign((mu,) + idx)
            term = dc if sign > 0 else -dc
            coeffs[key] = coeffs[key] + term if key in coeffs else term
    return KForm(a.degree + 1, coeffs)


class VectorField:
    """Components in the coordinate basis d/dx, d/dy, d/dz, d/dt."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence):
        comps = tuple(sf.as_field(c) for c in components)
        if len(comps) != DIM:
            raise UsageError("a vector field has exactly four components")
        self.components = comps

    @classmethod
    def coordinate(cls, name: str) -> "VectorField":
        comps = [sf.ZERO] * DIM
        comps[sf.COORD_INDEX[name]] = sf.ONE
        return cls(comps)

    def __call__(self, f) -> ScalarField:
        """Directional derivative X(f)."""
        f = sf.as_field(f)
        return sf.add(*(c * f.partial(name) for c, name in zip(self.components, COORDS) if not c.is_const(0.0)))

    def __add__(self, other):
        return VectorField([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        return VectorField([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return VectorField([-a for a in self.components])

    def __mul__(self, s):
        s = sf.as_field(s)
        return VectorField([s * a for a in self.components])

    __rmul__ = __mul__

    def evaluate(self, point: ChartPoint, cache=None) -> np.ndarray:
        env = point.env()
        cache = {} if cache is None else cache
        cols = [np.broadcast_to(np.asarray(c.evaluate(env, cache), float), point.shape) for c in self.components]
        return np.stack(cols, axis=-1)

    def __repr__(self):
        return "VectorField(" + ", ".join(str(c) for c in self.components) + ")"


d_x, d_y, d_z, d_t = (VectorField.coordinate(n) for n in COORDS)


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y]^mu = X(Y^mu) - Y(X^mu)."""
    return VectorField([X(Yc) - Y(Xc) for Xc, Yc in zip(X.components, Y.components)])


@dataclass
class FramePair:
    """Orthonormal coframe theta_1..theta_4 with its dual frame E_1..E_4.

    The metric is g = sum_i theta_i (x) theta_i.  ``domain`` is the region on
    which the pair is declared valid.
    """

    coframe: tuple
    frame: tuple
    domain: Box | None = None

    def __post_init__(self):
        self.coframe = tuple(self.coframe)
        self.frame = tuple(self.frame)
        if len(self.coframe) != DIM or len(self.frame) != DIM:
            raise UsageError("a frame pair has four 1-forms and four vector fields")
        if any(th.degree != 1 for th in self.coframe):
            raise UsageError("coframe entries must be 1-forms")

    def coframe_matrix(self, point: ChartPoint, cache=None) -> np.ndarray:
        """Theta[..., i, mu]: coefficient of dx^mu in theta_i."""
        cache = {} if cache is None else cache
        return np.stack([th.dense(point, cache) for th in self.coframe], axis=-2)

    def frame_matrix(self, point: ChartPoint, cache=None) -> np.ndarray:
        """E[..., a, mu]: d/dx^mu component of E_a."""
        cache = {} if cache is None else cache
        return np.stack([e.evaluate(point, cache) for e in self.frame], axis=-2)

    def duality_residual(self, point: ChartPoint) -> float:
        cache = {}
        pairing = np.einsum("...im,...am->...ia", self.coframe_matrix(point, cache), self.frame_matrix(point, cache))
        return float(np.max(np.abs(pairing - np.eye(DIM))))

    def volume(self) -> KForm:
        th = self.coframe
        return wedge(wedge(th[0], th[1]), wedge(th[2], th[3]))

    def theta_wedge(self, indices) -> KForm:
        """theta_{i1} ^ ... ^ theta_{ik} for 0-based frame indices."""
        out = KForm.function(sf.ONE)
        for i in indices:
            out = wedge(out, self.coframe[i])
        return out

    def components(self, a: KForm) -> dict:
        """Symbolic frame components a(E_I) for sorted 0-based frame multi-indices I."""
        return {idx: a(*(self.frame[i] for i in idx)) for idx in itertools.combinations(range(DIM), a.degree)}

    def from_components(self, comps: dict, degree: int) -> KForm:
        out = KForm.zero(degree)
        for idx, c in comps.items():
            if sf.as_field(c).is_const(0.0):
                continue
            out = out + sf.as_field(c) * self.theta_wedge(idx)
        return out

    def dual_of(self, X: VectorField) -> list:
        """Frame components theta_i(X)."""
        return [th(X) for th in self.coframe]


def dual_frame(coframe: Sequence[KForm], domain: Box | None = None, samples: int = 64, seed: int = 0) -> tuple:
    """Dual frame by symbolic adjugate/determinant inversion of the coframe matrix.

    Raises DegenerateCoframeError if the determinant is identically zero or
    vanishes at a sampled point of ``domain``.
    """
    M = [[th[(mu,)] for mu in range(DIM)] for th in coframe]
    det = _det(M)
    if det.is_const(0.0):
        raise DegenerateCoframeError("coframe determinant is identically zero")
    if domain is not None:
        pts = domain.sample(samples, seed)
        corners = domain.grid((2, 2, 2, 2))
        signs = set()
        for p in (pts, corners):
            vals = np.asarray(sf.evaluate(det, p))
            signs.update(np.sign(np.ravel(vals)).tolist())
            if {-1.0, 1.0} <= signs:
                # a continuous determinant changing sign has a zero in between
                raise DegenerateCoframeError(f"coframe determinant changes sign on the domain {domain.to_dict()}")
            scale = np.ones_like(vals)
            for row in M:
                scale = scale * np.sqrt(sum(np.asarray(sf.evaluate(c, p)) ** 2 for c in row))
            bad = np.abs(vals) <= 1e-12 * scale
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                where = ", ".join(f"{k}={v:.6g}" for k, v in p.as_dict(i).items())
                raise DegenerateCoframeError(f"coframe determinant vanishes at ({where})")
    frame = []
    for j in range(DIM):
        comps = []
        for mu in range(DIM):
            minor = [[M[r][c] for c in range(DIM) if c != mu] for r in range(DIM) if r != j]
            cof = _det(minor)
            if (j + mu) % 2:
                cof = -cof
            comps.append(sf.div(cof, det))
        frame.append(VectorField(comps))
    return tuple(frame)


def _complement(idx):
    rest = tuple(i for i in range(DIM) if i not in idx)
    return rest, perm_sign(idx + rest)


def hodge_star(a: KForm, frame: FramePair) -> KForm:
    """Riemannian Hodge star for g = sum theta_i^2 and vol = theta_1^...^theta_4."""
    comps = frame.components(a)
    out = KForm.zero(DIM - a.degree)
    for idx, c in comps.items():
        if c.is_const(0.0):
            continue
        rest, sign = _complement(idx)
        out = out + (c if sign > 0 else -c) * frame.theta_wedge(rest)
    return out


def frame_hodge(comps: np.ndarray) -> np.ndarray:
    """Hodge star of dense 2-form frame components (..., 4, 4), same orientation."""
    if comps.shape[-2:] != (DIM, DIM):
        raise UsageError("frame_hodge expects dense 2-form components (..., 4, 4)")
    out = np.zeros_like(comps)
    for i, j in itertools.combinations(range(DIM), 2):
        (k, l), sign = _complement((i, j))
        out[..., k, l] = sign * comps[..., i, j]
        out[..., l, k] = -sign * comps[..., i, j]
    return out


def sd_asd_split(a: KForm, frame: FramePair):
    """(a+, a-) with *a+ = a+ and *a- = -a-."""
    if a.degree != 2:
        raise UsageError("the self-dual split is defined on 2-forms")
    star = hodge_star(a, frame)
    return 0.5 * (a + star), 0.5 * (a - star)


def codifferential(a: KForm, frame: FramePair) -> KForm:
    """delta = (-1)^(n(k+1)+1) * d * in dimension n = 4."""
    k = a.degree
    if k == 0:
        return KForm.zero(0)
    sign = -1 if (DIM * (k + 1) + 1) % 2 else 1
    out = hodge_star(ext_d(hodge_star(a, frame)), frame)
    return out if sign > 0 else -out


def lie_derivative_metric(X: VectorField, frame: FramePair):
    """Coordinate components (L_X g)_{mu nu} as a 4x4 nested list of ScalarFields."""
    g = [[sf.add(*(th[(m,)] * th[(n,)] for th in frame.coframe)) for n in range(DIM)] for m in range(DIM)]
    out = []
    for m in range(DIM):
        row = []
        for n in range(DIM):
            terms = [X(g[m][n])]
            for r in range(DIM):
                terms.append(g[r][n] * X.components[r].partial(COORDS[m]))
                terms.append(g[m][r] * X.components[r].partial(COORDS[n]))
            row.append(sf.add(*terms))
        out.append(row)
    return out
