"""Hot numeric loops: numba-compiled when available, pure numpy otherwise.

Set ``KAHLERQCH_DISABLE_JIT=1`` to force the numpy path (useful for
debugging and for the comparison benchmark).  Both paths are exercised by the
test suite and must agree to rounding.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("KAHLERQCH_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes")

try:  # pragma: no cover - import guard
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def use_jit() -> bool:
    return HAVE_NUMBA


# -- Riemann tensor from frame connection coefficients ------------------------
#
# gamma[n, f, b, c]   = Gamma^f_{bc} = theta_f(nabla_{E_b} E_c)
# dgamma[n, a, f, b, c] = E_a(Gamma^f_{bc})
# struct[n, e, a, b]  = c^e_{ab} = theta_e([E_a, E_b])
# returns R[n, a, b, c, d] = g(R(E_a, E_b) E_c, E_d)


def riemann_numpy(gamma, dgamma, struct):
    # Omega^f_c(E_a, E_b) = E_a Gamma^f_bc - E_b Gamma^f_ac
    #   + Gamma^f_ae Gamma^e_bc - Gamma^f_be Gamma^e_ac - c^e_ab Gamma^f_ec
    term = np.einsum("nafbc->nabcf", dgamma)
    term = term - np.einsum("nbfac->nabcf", dgamma)
    term = term + np.einsum("nfae,nebc->nabcf", gamma, gamma)
    term = term - np.einsum("nfbe,neac->nabcf", gamma, gamma)
    term = term - np.einsum("neab,nfec->nabcf", struct, gamma)
    return term


def _riemann_loops(gamma, dgamma, struct):
    n_pts = gamma.shape[0]
    out = np.zeros((n_pts, 4, 4, 4, 4))
    for n in range(n_pts):
        for a in range(4):
            for b in range(4):
                for c in range(4):
                    for f in range(4):
                        v = dgamma[n, a, f, b, c] - dgamma[n, b, f, a, c]
                        for e in range(4):
                            v += gamma[n, f, a, e] * gamma[n, e, b, c]
                            v -= gamma[n, f, b, e] * gamma[n, e, a, c]
                            v -= struct[n, e, a, b] * gamma[n, f, e, c]
                        out[n, a, b, c, f] = v
    return out


# -- Liouville-type residual on a uniform grid --------------------------------
#
# F(u) = lap_h(u) - c1 * h2 - c2 * exp(2u) at interior nodes (boundary rows
# and columns of the output are zero).


def liouville_residual_numpy(u, h2, c1, c2, hx, hy):
    out = np.zeros_like(u)
    lap = (u[2:, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hx**2 + (
        u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]
    ) / hy**2
    out[1:-1, 1:-1] = lap - c1 * h2[1:-1, 1:-1] - c2 * np.exp(2.0 * u[1:-1, 1:-1])
    return out


def _liouville_loops(u, h2, c1, c2, hx, hy):
    nx, ny = u.shape
    out = np.zeros_like(u)
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            c = u[i, j]
            lap = (u[i + 1, j] - 2.0 * c + u[i - 1, j]) * ihx2 + (u[i, j + 1] - 2.0 * c + u[i, j - 1]) * ihy2
            out[i, j] = lap - c1 * h2[i, j] - c2 * np.exp(2.0 * c)
    return out


if HAVE_NUMBA:
    _riemann_jit = njit(cache=False)(_riemann_loops)
    _liouville_jit = njit(cache=False)(_liouville_loops)


def riemann(gamma, dgamma, struct, jit=None):
    jit = HAVE_NUMBA if jit is None else (jit and HAVE_NUMBA)
    gamma = np.ascontiguousarray(gamma, dtype=np.float64)
    dgamma = np.ascontiguousarray(dgamma, dtype=np.float64)
    struct = np.ascontiguousarray(struct, dtype=np.float64)
    if jit:
        return _riemann_jit(gamma, dgamma, struct)
    return riemann_numpy(gamma, dgamma, struct)


def liouville_residual(u, h2, c1, c2, hx, hy, jit=None):
    jit = HAVE_NUMBA if jit is None else (jit and HAVE_NUMBA)
    u = np.ascontiguousarray(u, dtype=np.float64)
    h2 = np.ascontiguousarray(h2, dtype=np.float64)
    if jit:
        return _liouville_jit(u, h2, float(c1), float(c2), float(hx), float(hy))
    return liouville_residual_numpy(u, h2, c1, c2, hx, hy)
