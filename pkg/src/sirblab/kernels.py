"""Hot numeric kernels: flux-form diffusion and the implicit CG solve.

Two interchangeable backends live here. The default is numba-compiled
loops (cached to disk so repeat runs and worker processes skip the JIT
cost); setting the environment variable SIRBLAB_DISABLE_NUMBA=1 before
import, or running without numba installed, selects vectorized numpy
implementations of the same arithmetic. Both backends are importable
directly (``diffusion_apply_numba`` / ``diffusion_apply_numpy`` and the
``cg_solve_*`` pair) so they can be compared and benchmarked against
each other.

All kernels take 2D arrays; 1D fields are viewed as shape (nx, 1) with
unit y-spacing, which makes the y-direction fluxes vanish. Per cell the
divergence is assembled as

    out = (fxE - fxW)/hx^2 + (fyN - fyS)/hy^2

with a literal zero for the flux across a boundary face. Each face flux
is computed once per cell from the same two operands in both backends,
so mirroring u and a reverses every flux sign exactly and the output is
bitwise mirror-symmetric.

The implicit step solves (I - dt*D) x = b by plain conjugate gradients.
D is symmetric negative semidefinite, so the system matrix is symmetric
positive definite with smallest eigenvalue 1 and CG needs no
preconditioning at the grid sizes used here.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

__all__ = [
    "HAS_NUMBA",
    "backend_name",
    "as_2d",
    "spacing_2d",
    "diffusion_apply",
    "helmholtz_apply",
    "cg_solve",
    "diffusion_apply_numpy",
    "helmholtz_apply_numpy",
    "cg_solve_numpy",
    "diffusion_apply_numba",
    "helmholtz_apply_numba",
    "cg_solve_numba",
]

_DISABLE_VAR = "SIRBLAB_DISABLE_NUMBA"


def _select_backend(env_value: str | None, has_numba: bool) -> str:
    if not has_numba:
        return "numpy"
    if env_value is not None and env_value.strip().lower() in ("1", "true", "yes", "on"):
        return "numpy"
    return "numba"


_BACKEND = _select_backend(os.environ.get(_DISABLE_VAR), HAS_NUMBA)


def backend_name() -> str:
    """Active kernel backend: 'numba' or 'numpy'."""
    return _BACKEND


def as_2d(arr: np.ndarray) -> np.ndarray:
    """View a field array as 2D; 1D fields become a single column."""
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.ndim == 1:
        return a.reshape(a.shape[0], 1)
    if a.ndim != 2:
        raise ValueError(f"expected 1D or 2D array, got ndim={a.ndim}")
    return a


def spacing_2d(grid) -> tuple:
    """(hx, hy) for kernel calls; hy is 1 for 1D grids (no y faces)."""
    h = grid.spacing
    return (h[0], 1.0) if len(h) == 1 else (h[0], h[1])


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _face_fluxes_numpy(u, a):
    fx = 0.5 * (a[:-1, :] + a[1:, :]) * (u[1:, :] - u[:-1, :])
    fy = 0.5 * (a[:, :-1] + a[:, 1:]) * (u[:, 1:] - u[:, :-1])
    return fx, fy


def diffusion_apply_numpy(u, a, hx, hy):
    """div(a grad u), zero-flux boundaries, second order flux form."""
    nx, ny = u.shape
    fx, fy = _face_fluxes_numpy(u, a)
    zx = np.zeros((1, ny))
    zy = np.zeros((nx, 1))
    fxE = np.concatenate([fx, zx], axis=0)
    fxW = np.concatenate([zx, fx], axis=0)
    fyN = np.concatenate([fy, zy], axis=1)
    fyS = np.concatenate([zy, fy], axis=1)
    return (fxE - fxW) / (hx * hx) + (fyN - fyS) / (hy * hy)


def helmholtz_apply_numpy(x, a, dt, hx, hy):
    """(I - dt*D) x for the implicit diffusion step."""
    return x - dt * diffusion_apply_numpy(x, a, hx, hy)


def cg_solve_numpy(b, a, dt, hx, hy, rtol, maxiter):
    """Solve (I - dt*D) x = b by conjugate gradients.

    Starts from x = b, so a constant right-hand side (D b = 0) is
    returned unchanged without a single iteration. Returns
    (x, iterations, relative_residual); convergence is the caller's
    check ``relres <= rtol``.
    """
    x = b.copy()
    bnorm = math.sqrt(float(np.dot(b.ravel(), b.ravel())))
    if bnorm == 0.0:
        return x, 0, 0.0
    r = b - helmholtz_apply_numpy(x, a, dt, hx, hy)
    rs = float(np.dot(r.ravel(), r.ravel()))
    target = rtol * bnorm
    if math.sqrt(rs) <= target:
        return x, 0, math.sqrt(rs) / bnorm
    p = r.copy()
    it = 0
    for it in range(1, int(maxiter) + 1):
        ap = helmholtz_apply_numpy(p, a, dt, hx, hy)
        pap = float(np.dot(p.ravel(), ap.ravel()))
        if pap <= 0.0:
            break
        alpha = rs / pap
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(np.dot(r.ravel(), r.ravel()))
        if math.sqrt(rs_new) <= target:
            return x, it, math.sqrt(rs_new) / bnorm
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, it, math.sqrt(rs) / bnorm


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def _diffusion_apply_jit(u, a, hx, hy):
        nx, ny = u.shape
        invhx2 = 1.0 / (hx * hx)
        invhy2 = 1.0 / (hy * hy)
        out = np.empty_like(u)
        for i in range(nx):
            for j in range(ny):
                fxE = 0.0
                if i < nx - 1:
                    fxE = 0.5 * (a[i, j] + a[i + 1, j]) * (u[i + 1, j] - u[i, j])
                fxW = 0.0
                if i > 0:
                    fxW = 0.5 * (a[i - 1, j] + a[i, j]) * (u[i, j] - u[i - 1, j])
                fyN = 0.0
                if j < ny - 1:
                    fyN = 0.5 * (a[i, j] + a[i, j + 1]) * (u[i, j + 1] - u[i, j])
                fyS = 0.0
                if j > 0:
                    fyS = 0.5 * (a[i, j - 1] + a[i, j]) * (u[i, j] - u[i, j - 1])
                out[i, j] = (fxE - fxW) * invhx2 + (fyN - fyS) * invhy2
        return out

    @njit(cache=True)
    def _helmholtz_apply_jit(x, a, dt, hx, hy):
        d = _diffusion_apply_jit(x, a, hx, hy)
        nx, ny = x.shape
        out = np.empty_like(x)
        for i in range(nx):
            for j in range(ny):
                out[i, j] = x[i, j] - dt * d[i, j]
        return out

    @njit(cache=True)
    def _dot_jit(u, v):
        nx, ny = u.shape
        acc = 0.0
        for i in range(nx):
            for j in range(ny):
                acc += u[i, j] * v[i, j]
        return acc

    @njit(cache=True)
    def _cg_solve_jit(b, a, dt, hx, hy, rtol, maxiter):
        x = b.copy()
        bnorm = math.sqrt(_dot_jit(b, b))
        if bnorm == 0.0:
            return x, 0, 0.0
        r = b - _helmholtz_apply_jit(x, a, dt, hx, hy)
        rs = _dot_jit(r, r)
        target = rtol * bnorm
        if math.sqrt(rs) <= target:
            return x, 0, math.sqrt(rs) / bnorm
        p = r.copy()
        it = 0
        for it in range(1, maxiter + 1):
            ap = _helmholtz_apply_jit(p, a, dt, hx, hy)
            pap = _dot_jit(p, ap)
            if pap <= 0.0:
                break
            alpha = rs / pap
            nx, ny = x.shape
            for i in range(nx):
                for j in range(ny):
                    x[i, j] += alpha * p[i, j]
                    r[i, j] -= alpha * ap[i, j]
            rs_new = _dot_jit(r, r)
            if math.sqrt(rs_new) <= target:
                return x, it, math.sqrt(rs_new) / bnorm
            beta = rs_new / rs
            for i in range(nx):
                for j in range(ny):
                    p[i, j] = r[i, j] + beta * p[i, j]
            rs = rs_new
        return x, it, math.sqrt(rs) / bnorm

    def diffusion_apply_numba(u, a, hx, hy):
        return _diffusion_apply_jit(u, a, hx, hy)

    def helmholtz_apply_numba(x, a, dt, hx, hy):
        return _helmholtz_apply_jit(x, a, dt, hx, hy)

    def cg_solve_numba(b, a, dt, hx, hy, rtol, maxiter):
        x, it, relres = _cg_solve_jit(b, a, dt, hx, hy, rtol, int(maxiter))
        return x, int(it), float(relres)

else:  # pragma: no cover - exercised only without numba
    diffusion_apply_numba = None
    helmholtz_apply_numba = None
    cg_solve_numba = None


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if _BACKEND == "numba":
    diffusion_apply = diffusion_apply_numba
    helmholtz_apply = helmholtz_apply_numba
    cg_solve = cg_solve_numba
else:
    diffusion_apply = diffusion_apply_numpy
    helmholtz_apply = helmholtz_apply_numpy
    cg_solve = cg_solve_numpy
