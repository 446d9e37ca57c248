"""Levi-Civita connection and curvature of an orthonormal frame.

Index conventions (0-based in code, 1-based in the docs):

* ``nabla_X E_j = sum_i omega^i_j(X) E_i`` and ``Gamma^i_{kj} = omega^i_j(E_k)``,
  so ``Gamma^i_{kj} = g(nabla_{E_k} E_j, E_i)``.
* ``c^k_{ij} = theta_k([E_i, E_j])``.
* ``R[a, b, c, d] = g(R(E_a, E_b) E_c, E_d)`` with
  ``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``; sectional curvature is
  ``R(X, Y, Y, X)`` over the area term, positive on the round sphere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import scalar as sf
from .errors import DomainError, UsageError
from .exterior import DIM, FramePair, KForm, ext_d, lie_bracket, to_frame, wedge
from .scalar import COORDS, ChartPoint

# Self-dual basis {Omega, Phi, Psi} / sqrt(2) and anti-self-dual {Omega_bar, Phi_bar, Psi_bar} / sqrt(2)
# as dense antisymmetric 4x4 frame matrices, for vol = theta1^theta2^theta3^theta4.


def _two_form(*terms):
    m = np.zeros((DIM, DIM))
    for coef, i, j in terms:
        m[i, j] += coef
        m[j, i] -= coef
    return m


SELF_DUAL_BASIS = np.array(
    [
        _two_form((1, 0, 1), (1, 2, 3)),  # Omega = th12 + th34
        _two_form((1, 0, 2), (-1, 1, 3)),  # Phi = th13 - th24
        _two_form((1, 0, 3), (1, 1, 2)),  # Psi = th14 + th23
    ]
) / np.sqrt(2.0)

ANTI_SELF_DUAL_BASIS = np.array(
    [
        _two_form((1, 0, 1), (-1, 2, 3)),  # Omega_bar = th12 - th34
        _two_form((1, 0, 2), (1, 1, 3)),  # Phi_bar = th13 + th24
        _two_form((1, 0, 3), (-1, 1, 2)),  # Psi_bar = th14 - th23
    ]
) / np.sqrt(2.0)


@dataclass
class StructureFunctions:
    """c[k][i][j] = theta_k([E_i, E_j]) as ScalarFields (antisymmetric in i, j)."""

    c: list

    def evaluate(self, point: ChartPoint, cache=None) -> np.ndarray:
        """Array [..., k, i, j]."""
        env = point.env()
        cache = {} if cache is None else cache
        out = np.zeros(point.shape + (DIM, DIM, DIM))
        for k, i, j in itertools.product(range(DIM), repeat=3):
            out[..., k, i, j] = self.c[k][i][j].evaluate(env, cache)
        return out


def structure_functions(frame: FramePair) -> StructureFunctions:
    c = [[[sf.ZERO] * DIM for _ in range(DIM)] for _ in range(DIM)]
    for i, j in itertools.combinations(range(DIM), 2):
        br = lie_bracket(frame.frame[i], frame.frame[j])
        for k in range(DIM):
            val = frame.coframe[k](br)
            c[k][i][j] = val
            c[k][j][i] = -val
    return StructureFunctions(c)


@dataclass
class ConnectionForms:
    """gamma[i][k][j] = Gamma^i_{kj}; omega[i][j] = sum_k Gamma^i_{kj} theta_k."""

    gamma: list
    omega: list
    frame: FramePair
    structure: StructureFunctions

    def Gamma(self, i: int, k: int, j: int):
        """Gamma^i_{kj} with the 1-based indices used in the literature."""
        return self.gamma[i - 1][k - 1][j - 1]

    def evaluate(self, point: ChartPoint, cache=None) -> np.ndarray:
        """Array [..., i, k, j] = Gamma^i_{kj}."""
        env = point.env()
        cache = {} if cache is None else cache
        out = np.zeros(point.shape + (DIM, DIM, DIM))
        for i, k, j in itertools.product(range(DIM), repeat=3):
            out[..., i, k, j] = self.gamma[i][k][j].evaluate(env, cache)
        return out


def solve_connection(frame: FramePair, structure: StructureFunctions | None = None) -> ConnectionForms:
    """Koszul formula in an orthonormal frame: 2 Gamma^i_{kj} = c^i_{kj} - c^k_{ji} + c^j_{ik}."""
    st = structure_functions(frame) if structure is None else structure
    c = st.c
    gamma = [[[sf.ZERO] * DIM for _ in range(DIM)] for _ in range(DIM)]
    for i, k, j in itertools.product(range(DIM), repeat=3):
        if i == j:
            continue
        gamma[i][k][j] = 0.5 * (c[i][k][j] - c[k][j][i] + c[j][i][k])
    omega = [
        [sf_sum_forms([gamma[i][k][j] * frame.coframe[k] for k in range(DIM)]) for j in range(DIM)]
        for i in range(DIM)
    ]
    return ConnectionForms(gamma, omega, frame, st)


def sf_sum_forms(forms, degree=1) -> KForm:
    out = KForm.zero(degree)
    for f in forms:
        out = out + f
    return out


# unknowns: Gamma^i_{kj} for i < j, ordered (i, j, k)
_PAIRS = list(itertools.combinations(range(DIM), 2))
_UNKNOWNS = [(i, j, k) for (i, j) in _PAIRS for k in range(DIM)]
_UNK_INDEX = {u: n for n, u in enumerate(_UNKNOWNS)}


def _torsion_system():
    """Rows: (i, a<b) with Gamma^i_{ab} - Gamma^i_{ba} = -dtheta_i(E_a, E_b)."""
    rows, keys = [], []
    for i in range(DIM):
        for a, b in _PAIRS:
            row = np.zeros(len(_UNKNOWNS))
            for k, j, sign in ((a, b, 1.0), (b, a, -1.0)):
                # Gamma^i_{kj}
                if i == j:
                    continue
                if i < j:
                    row[_UNK_INDEX[(i, j, k)]] += sign
                else:
                    row[_UNK_INDEX[(j, i, k)]] -= sign
            rows.append(row)
            keys.append((i, a, b))
    return np.array(rows), keys


def solve_connection_linear(frame: FramePair, point: ChartPoint, order=None) -> np.ndarray:
    """Independent numeric route: solve the torsion-free + skew system pointwise.

    Uses only the exterior derivatives of the coframe, never the brackets.
    ``order`` permutes the equations.  Returns Gamma[..., i, k, j].
    """
    A, keys = _torsion_system()
    cache = {}
    E = frame.frame_matrix(point, cache)
    dth = np.stack([to_frame(ext_d(th).dense(point, cache), E) for th in frame.coframe], axis=-3)
    rhs = np.stack([-dth[..., i, a, b] for (i, a, b) in keys], axis=-1)
    if order is not None:
        order = np.asarray(order)
        A, rhs = A[order], rhs[..., order]
    sol = np.linalg.solve(A, rhs.reshape(-1, len(keys)).T).T.reshape(rhs.shape)
    out = np.zeros(point.shape + (DIM, DIM, DIM))
    for n, (i, j, k) in enumerate(_UNKNOWNS):
        out[..., i, k, j] = sol[..., n]
        out[..., j, k, i] = -sol[..., n]
    return out


def curvature_forms(conn: ConnectionForms) -> list:
    """Symbolic second structure equation: Omega^i_j = d omega^i_j + sum_k omega^i_k ^ omega^k_j."""
    w = conn.omega
    out = []
    for i in range(DIM):
        row = []
        for j in range(DIM):
            form = ext_d(w[i][j])
            for k in range(DIM):
                form = form + wedge(w[i][k], w[k][j])
            row.append(form)
        out.append(row)
    return out


@dataclass
class CurvatureData:
    """Pointwise curvature in the orthonormal frame (leading axis = sample points)."""

    R: np.ndarray
    ricci: np.ndarray
    tau: np.ndarray
    wplus: np.ndarray
    wminus: np.ndarray
    gamma: np.ndarray
    struct: np.ndarray

    def tensor(self, X, Y, Z, W) -> np.ndarray:
        """R(X, Y, Z, W) for frame-component vectors (shape (4,) or (N, 4))."""
        X, Y, Z, W = (np.broadcast_to(np.asarray(v, float), self.R.shape[:1] + (DIM,)) for v in (X, Y, Z, W))
        return np.einsum("nabcd,na,nb,nc,nd->n", self.R, X, Y, Z, W)

    def ricci_J_defect(self, J: np.ndarray) -> np.ndarray:
        """max over frame pairs of |rho(JX, JY) - rho(X, Y)| per point."""
        rJ = np.einsum("ia,jb,nab->nij", J.T, J.T, self.ricci)
        return np.max(np.abs(rJ - self.ricci), axis=(1, 2))

    def wplus_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.wplus)

    def wminus_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.wminus)


def _curvature_operator_block(R, basis):
    # <Rop(s_i), s_j> = 1/4 sum s_i[ab] s_j[cd] R_{abdc}
    return 0.25 * np.einsum("iab,jcd,nabdc->nij", basis, basis, R)


class CurvatureEvaluator:
    """Pointwise Riemann, Ricci, scalar curvature and W+ from a solved connection."""

    def __init__(self, conn: ConnectionForms, jit=None):
        self.conn = conn
        self.frame = conn.frame
        self.jit = jit
        self._dgamma = [
            [[[conn.gamma[f][b][c].partial(mu) for c in range(DIM)] for b in range(DIM)] for f in range(DIM)]
            for mu in COORDS
        ]

    def evaluate(self, point: ChartPoint) -> CurvatureData:
        if not point.shape:
            raise UsageError("curvature evaluation expects a batch of points; wrap scalars in arrays")
        pts = ChartPoint.from_array(point.as_array(), point.params)
        env = pts.env()
        n = len(pts)
        cache = {}
        gamma = self.conn.evaluate(pts, cache)
        struct = self.conn.structure.evaluate(pts, cache)
        E = self.frame.frame_matrix(pts, cache)
        dg = np.zeros((n, DIM, DIM, DIM, DIM))
        for m in range(DIM):
            for f, b, c in itertools.product(range(DIM), repeat=3):
                node = self._dgamma[m][f][b][c]
                if node.is_const(0.0):
                    continue
                dg[:, m, f, b, c] = node.evaluate(env, cache)
        egamma = np.einsum("nam,nmfbc->nafbc", E, dg)
        R = _kernels.riemann(gamma, egamma, struct, jit=self.jit)
        ricci = np.einsum("nabca->nbc", R)
        tau = np.einsum("naa->n", ricci)
        eye = np.eye(3)
        wplus = _curvature_operator_block(R, SELF_DUAL_BASIS) - tau[:, None, None] / 12.0 * eye
        wminus = _curvature_operator_block(R, ANTI_SELF_DUAL_BASIS) - tau[:, None, None] / 12.0 * eye
        return CurvatureData(R, ricci, tau, wplus, wminus, gamma, struct)


def curvature(conn: ConnectionForms, frame: FramePair | None = None, jit=None) -> CurvatureEvaluator:
    if frame is not None and frame is not conn.frame:
        raise UsageError("connection was solved for a different frame")
    return CurvatureEvaluator(conn, jit=jit)


def _as_frame_vector(v, frame, point, cache):
    if isinstance(v, np.ndarray) or isinstance(v, (list, tuple)):
        return np.asarray(v, dtype=float)
    # a VectorField: convert to frame components theta_i(v)
    comps = frame.dual_of(v)
    env = point.env()
    return np.stack([np.broadcast_to(np.asarray(c.evaluate(env, cache), float), point.shape) for c in comps], -1)


def sectional_curvature(data: CurvatureData, X, Y, frame: FramePair | None = None, point=None) -> np.ndarray:
    """K = R(X, Y, Y, X) / (|X|^2 |Y|^2 - g(X, Y)^2); X, Y frame components or VectorFields."""
    cache = {}
    X = _as_frame_vector(X, frame, point, cache)
    Y = _as_frame_vector(Y, frame, point, cache)
    n = data.R.shape[0]
    X = np.broadcast_to(X, (n, DIM))
    Y = np.broadcast_to(Y, (n, DIM))
    xx = np.einsum("na,na->n", X, X)
    yy = np.einsum("na,na->n", Y, Y)
    xy = np.einsum("na,na->n", X, Y)
    area = xx * yy - xy**2
    bad = area <= 1e-14 * xx * yy
    if np.any(bad):
        raise DomainError("degenerate plane: X and Y are linearly dependent", index=int(np.flatnonzero(bad)[0]))
    return data.tensor(X, Y, Y, X) / area


def holomorphic_curvature(data: CurvatureData, X, J: np.ndarray) -> np.ndarray:
    """R(X, JX, JX, X) for a unit frame vector X; J acts on frame components (4x4)."""
    n = data.R.shape[0]
    X = np.broadcast_to(np.asarray(X, float), (n, DIM))
    norms = np.einsum("na,na->n", X, X)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise UsageError("holomorphic curvature needs a unit vector")
    JX = np.einsum("ab,nb->na", J, X)
    return data.tensor(X, JX, JX, X)


class CovariantDerivative2Form:
    """Evaluator for (nabla_{E_k} a)(E_i, E_j) of a 2-form a."""

    def __init__(self, a: KForm, conn: ConnectionForms):
        if a.degree != 2:
            raise UsageError("expects a 2-form")
        self.conn = conn
        frame = conn.frame
        comps = [[sf.ZERO] * DIM for _ in range(DIM)]
        for (i, j), c in frame.components(a).items():
            comps[i][j] = c
            comps[j][i] = -c
        self.comps = comps
        self.derivs = [[[frame.frame[k](comps[i][j]) for j in range(DIM)] for i in range(DIM)] for k in range(DIM)]

    def __call__(self, point: ChartPoint) -> np.ndarray:
        env = point.env()
        cache = {}
        shape = point.shape
        A = np.zeros(shape + (DIM, DIM))
        dA = np.zeros(shape + (DIM, DIM, DIM))
        for i, j in itertools.product(range(DIM), repeat=2):
            A[..., i, j] = self.comps[i][j].evaluate(env, cache)
            for k in range(DIM):
                dA[..., k, i, j] = self.derivs[k][i][j].evaluate(env, cache)
        G = self.conn.evaluate(point, cache)  # [m, k, i] = Gamma^m_{ki}
        return dA - np.einsum("...mki,...mj->...kij", G, A) - np.einsum("...mkj,...im->...kij", G, A)


def covariant_derivative_2form(a: KForm, conn: ConnectionForms, frame: FramePair | None = None):
    if frame is not None and frame is not conn.frame:
        raise UsageError("connection was solved for a different frame")
    return CovariantDerivative2Form(a, conn)
