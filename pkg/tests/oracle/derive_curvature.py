"""Independent curvature oracle: coordinate Christoffel symbols of g = Theta^T Theta.

Shares no code with kahlerqch.  The coframes are typed in from their closed
forms, differentiated by sympy, and the Riemann tensor is assembled numerically
from the textbook coordinate formula.  Output is frozen into
tests/data/oracle_curvature.json; regenerate with

    python tests/oracle/derive_curvature.py > tests/data/oracle_curvature.json
"""

import json

import numpy as np
import sympy as S

x, y, z, t = X = S.symbols("x y z t", real=True)


def calabi(alpha, A, h, l2, n2):
    beta = S.exp(A) / alpha
    f = S.exp(-A / 2) * h
    return [[f, 0, 0, 0], [0, f, 0, 0], [-l2 / beta, -n2 / beta, 0, 1 / beta], [0, 0, 1, 0]]


def tan(a, h, H):
    l2 = -S.diff(S.log(H), y) / (2 * a)
    n2 = S.diff(S.log(H), x) / (2 * a)
    s, c = S.sin(2 * a * z), S.cos(2 * a * z)
    f = h * S.cos(a * z)
    th3 = [-(S.cos(2 * a * t) * c * H + s * l2), -(-S.sin(2 * a * t) * c * H + s * n2), 0, s]
    th4 = [-S.sin(2 * a * t) * H, -S.cos(2 * a * t) * H, 1, 0]
    return [[f, 0, 0, 0], [0, f, 0, 0], th3, th4]


def coth(a, h, H):
    l2 = S.diff(S.log(H), y) / (2 * a)
    n2 = -S.diff(S.log(H), x) / (2 * a)
    s, c = S.sinh(2 * a * z), S.cosh(2 * a * z)
    f = h * S.sinh(a * z)
    th3 = [-(-S.sin(2 * a * t) * c * H + s * l2), -(S.cos(2 * a * t) * c * H + s * n2), 0, s]
    th4 = [-S.cos(2 * a * t) * H, -S.sin(2 * a * t) * H, 1, 0]
    return [[f, 0, 0, 0], [0, f, 0, 0], th3, th4]


def tanh(a, h, H):
    l2 = -S.diff(S.log(H), y) / (2 * a)
    n2 = S.diff(S.log(H), x) / (2 * a)
    s, c = S.sinh(2 * a * z), S.cosh(2 * a * z)
    f = h * S.cosh(a * z)
    th3 = [-(S.cos(2 * a * t) * c * H + s * l2), -(-c * S.sin(2 * a * t) * H + s * n2), 0, s]
    th4 = [-S.sin(2 * a * t) * H, -S.cos(2 * a * t) * H, 1, 0]
    return [[f, 0, 0, 0], [0, f, 0, 0], th3, th4]


def invariants(theta, points):
    """tau, |Ric|^2, |Rm|^2 and K(d_z, d_t) at each point (x, y, z, t)."""
    Th = S.Matrix(theta)
    g = (Th.T * Th).applyfunc(S.expand)
    dg = [[[S.diff(g[i, j], X[k]) for j in range(4)] for i in range(4)] for k in range(4)]
    ddg = [[[[S.diff(dg[k][i][j], X[m]) for j in range(4)] for i in range(4)] for k in range(4)] for m in range(4)]
    fg, fdg, fddg = (S.lambdify(X, e, "numpy") for e in (g, dg, ddg))
    out = []
    for p in points:
        G = np.array(fg(*p), float)
        dG = np.array(fdg(*p), float)  # [k, i, j] = d_k g_ij
        ddG = np.array(fddg(*p), float)  # [m, k, i, j]
        Gi = np.linalg.inv(G)
        # Gamma^i_jk = 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk)
        low = 0.5 * (np.einsum("jlk->ljk", dG) + np.einsum("klj->ljk", dG) - dG)  # [l, j, k]
        Gam = np.einsum("il,ljk->ijk", Gi, low)
        dlow = 0.5 * (np.einsum("mjlk->mljk", ddG) + np.einsum("mklj->mljk", ddG) - ddG)
        dGi = -np.einsum("ia,mab,bl->mil", Gi, dG, Gi)
        dGam = np.einsum("mil,ljk->mijk", dGi, low) + np.einsum("il,mljk->mijk", Gi, dlow)  # d_m Gamma^i_jk
        # R^i_jkl = d_k Gamma^i_lj - d_l Gamma^i_kj + Gamma^i_km Gamma^m_lj - Gamma^i_lm Gamma^m_kj
        R = (np.einsum("kilj->ijkl", dGam) - np.einsum("likj->ijkl", dGam)
             + np.einsum("ikm,mlj->ijkl", Gam, Gam) - np.einsum("ilm,mkj->ijkl", Gam, Gam))
        Rl = np.einsum("im,mjkl->ijkl", G, R)
        ric = np.einsum("ijil->jl", R)
        tau = np.einsum("jl,jl->", Gi, ric)
        ric_sq = np.einsum("ab,cd,ac,bd->", Gi, Gi, ric, ric)
        Ru = np.einsum("ia,jb,kc,ld,abcd->ijkl", Gi, Gi, Gi, Gi, Rl)
        rm_sq = np.einsum("ijkl,ijkl->", Rl, Ru)
        u, v = np.eye(4)[2], np.eye(4)[3]
        area = (u @ G @ u) * (v @ G @ v) - (u @ G @ v) ** 2
        K = np.einsum("ijkl,i,j,k,l->", Rl, u, v, u, v) / area
        out.append({"point": list(p), "tau": tau, "ricci_sq": ric_sq, "riemann_sq": rm_sq, "K_fiber": K})
    return out


def main():
    rng = np.random.default_rng(7)

    def pts(xr, yr, zr, n=4):
        return [tuple(float(rng.uniform(*r)) for r in (xr, yr, zr, (-1, 1))) for _ in range(n)]

    cases = {}
    cases["calabi_const"] = (calabi(S.Integer(1), z, S.Integer(1), -y / 2, x / 2),
                             pts((-1, 1), (-1, 1), (0.1, 1.0)))
    h = 1 + x**2
    cases["calabi_tan"] = (calabi(2 * S.tan(2 * z), -S.log(S.cos(2 * z)), h, S.Integer(0),
                                  S.integrate(h**2, x)), pts((-1, 1), (-1, 1), (0.1, 0.6)))
    cases["tan_const"] = (tan(1, S.Integer(1), 1 / S.sqrt(2)), pts((-1, 1), (-1, 1), (0.1, 0.7)))
    Hn = S.exp((x**2 + y**2) / 10)
    cases["tan_gradient"] = (tan(1, S.sqrt((S.diff(S.log(Hn), x, 2) + S.diff(S.log(Hn), y, 2) + 4 * Hn**2) / 2), Hn),
                             pts((-0.5, 0.5), (-0.5, 0.5), (0.1, 0.7)))
    cases["tanh_const"] = (tanh(1, S.Integer(1), 1 / S.sqrt(2)), pts((-1, 1), (-1, 1), (-1, -0.1)))
    a = S.Rational(1, 2)
    Hc = S.exp(x**2 + y**2)
    cases["coth_manufactured"] = (coth(a, S.sqrt((4 - 4 * a**2 * Hc**2) / (2 * a**2)), Hc),
                                  pts((-0.25, 0.25), (-0.25, 0.25), (-2, -0.5)))
    out = {name: invariants(th, p) for name, (th, p) in cases.items()}
    print(json.dumps(out, indent=1, default=float))


if __name__ == "__main__":
    main()
