"""Periodic real Monge-Ampere equation on R^d / Lambda.

Solves ``det(b + D^2 phi) = det(b) e^f`` for mean-zero ``phi`` on the uniform
lattice-coordinate grid ``t = i / n``. Second derivatives are 2nd-order
central differences in lattice coordinates, pulled back to Euclidean
coordinates through ``M = basis^{-1}``: ``D^2_x = M D^2_t M^T``.

Newton works on ``F(phi) = log det(b + D^2 phi) - log det(b) - f - s`` with an
extra scalar unknown ``s``. The discrete determinant does not integrate to a
null Lagrangian exactly, so in d >= 2 the discrete system is only solvable up
to such a constant; ``s`` is O(h^2) and is reported as ``compat_shift``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _exact as ex
from .errors import (
    DensityRangeError,
    InputError,
    NonConvergenceError,
    RefineGridError,
    StepFailureError,
    StrictConvexityError,
)
from .green import GreenData, GreenFunction, canonical_green, hessian_bounds
from .periodic import GridPart, PeriodicPart, grid_points

log = logging.getLogger(__name__)

MAX_EXP_RANGE = 700.0


@dataclass(frozen=True, eq=False)
class MAProblem:
    data: GreenData
    f: np.ndarray
    grid_n: int
    normalized: bool = False

    def __post_init__(self):
        if self.grid_n < 8:
            raise InputError("grid_n must be >= 8")
        f = np.asarray(self.f, dtype=float).reshape((self.grid_n,) * self.data.dim)
        object.__setattr__(self, "f", f)

    @cached_property
    def stencil(self) -> "Stencil":
        return Stencil(self.data, self.grid_n)


@dataclass(frozen=True, eq=False)
class MASolution:
    phi: np.ndarray
    residual_inf: float
    newton_iters: int
    min_eig: float
    compat_shift: float = 0.0
    history: tuple[float, ...] = ()

    def metadata(self) -> dict:
        return {"residual": self.residual_inf, "iters": self.newton_iters,
                "min_eig": self.min_eig, "compat_shift": self.compat_shift}


class Stencil:
    """Second-difference operators on the periodic ``n^d`` grid."""

    def __init__(self, data: GreenData, n: int):
        self.data, self.n, self.d = data, n, data.dim
        h = 1.0 / n
        eye = sp.identity(n, format="csr")
        shift_p = sp.diags([1.0, 1.0], [1, -(n - 1)], shape=(n, n), format="csr")
        shift_m = shift_p.T.tocsr()
        d1 = (shift_p - shift_m) / (2 * h)
        d2 = (shift_p - 2 * eye + shift_m) / h**2

        def along(ops):
            out = ops[0]
            for op in ops[1:]:
                out = sp.kron(out, op, format="csr")
            return out

        self.ops: dict[tuple[int, int], sp.csr_matrix] = {}
        for a in range(self.d):
            for b in range(a, self.d):
                if a == b:
                    factors = [d2 if i == a else eye for i in range(self.d)]
                else:
                    factors = [d1 if i in (a, b) else eye for i in range(self.d)]
                self.ops[a, b] = along(factors)
        self.minv = data.lattice.inverse_f
        self.size = n**self.d

    def hess_t(self, phi: np.ndarray) -> np.ndarray:
        u = phi.ravel()
        out = np.empty((self.size, self.d, self.d))
        for (a, b), op in self.ops.items():
            out[:, a, b] = out[:, b, a] = op @ u
        return out

    def hess_x(self, phi: np.ndarray) -> np.ndarray:
        m = self.minv
        return np.einsum("ia,pab,jb->pij", m, self.hess_t(phi), m)

    def matrix(self, phi: np.ndarray) -> np.ndarray:
        """``b + D^2_h phi`` at every grid point, shape ``(n^d, d, d)``."""
        return self.data.b_f + self.hess_x(phi)

    def linearization(self, a_inv: np.ndarray) -> sp.csr_matrix:
        """``delta -> tr(A^{-1} D^2_x delta)`` as a sparse matrix."""
        m = self.minv
        coef = np.einsum("ia,pij,jb->pab", m, a_inv, m)
        out = sp.csr_matrix((self.size, self.size))
        for (a, b), op in self.ops.items():
            w = coef[:, a, b] if a == b else coef[:, a, b] + coef[:, b, a]
            out = out + sp.diags(w) @ op
        return out.tocsr()


def _sample(f_raw, data: GreenData, grid_n: int) -> np.ndarray:
    if isinstance(f_raw, PeriodicPart):
        return f_raw.value(grid_points(data.lattice, grid_n)).reshape((grid_n,) * data.dim)
    if callable(f_raw):
        return np.asarray(f_raw(grid_points(data.lattice, grid_n)), dtype=float).reshape(
            (grid_n,) * data.dim)
    return np.asarray(f_raw, dtype=float).reshape((grid_n,) * data.dim)


def normalize_density(f_raw, data: GreenData, grid_n: int) -> MAProblem:
    """Shift ``f_raw`` by a constant so that ``e^f`` has mean one on the torus.

    The mean is the trapezoid average over the lattice-coordinate grid, i.e.
    ``int e^f dx = vol(Lambda)``; the prescribed measure ``H_q e^f dx`` then
    has total mass equal to the degree.
    """
    data.require_ample()
    f = _sample(f_raw, data, grid_n)
    if not np.all(np.isfinite(f)):
        raise InputError("density exponent must be finite everywhere")
    top = float(f.max())
    if top - float(f.min()) > MAX_EXP_RANGE:
        raise DensityRangeError(f"density exponent range {top - f.min():.4g} exceeds {MAX_EXP_RANGE}")
    shift = top + math.log(float(np.mean(np.exp(f - top))))
    return MAProblem(data, f - shift, grid_n, normalized=True)


def _min_eig(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a).min())


def _log_residual(p: MAProblem, a: np.ndarray, shift: float) -> np.ndarray:
    _, logdet = np.linalg.slogdet(a)
    return logdet - math.log(float(ex.det(p.data.b))) - p.f.ravel() - shift


def residual(p: MAProblem, phi: np.ndarray) -> float:
    """``max |det(b + D^2_h phi) - det(b) e^f|`` over the grid."""
    phi = np.asarray(phi, dtype=float).reshape(p.f.shape)
    a = p.stencil.matrix(phi)
    target = float(ex.det(p.data.b)) * np.exp(p.f.ravel())
    return float(np.max(np.abs(np.linalg.det(a) - target)))


def solve(p: MAProblem, tol: float = 1e-9, max_iters: int = 50,
          max_halvings: int = 30, callback=None) -> MASolution:
    """Damped Newton with positivity-preserving Armijo backtracking.

    Converged when ``max |det(b + D^2 phi) - det(b) e^(f + s)| <= tol``.
    ``callback(iteration, phi, min_eig)`` is called after every accepted step.
    """
    p.data.require_ample()
    st = p.stencil
    detb = float(ex.det(p.data.b))
    n_pts = st.size
    phi = np.zeros(n_pts)
    shift = 0.0
    col = sp.csr_matrix(-np.ones((n_pts, 1)))
    row = sp.csr_matrix(np.ones((1, n_pts)))

    def det_residual(a, s):
        return float(np.max(np.abs(np.linalg.det(a) - detb * np.exp(p.f.ravel() + s))))

    a = st.matrix(phi)
    res = det_residual(a, shift)
    history = [res]
    iters = 0
    while res > tol:
        if iters >= max_iters:
            raise NonConvergenceError(
                f"Monge-Ampere Newton did not converge in {max_iters} iterations "
                f"(residual {res:.3e}); try a finer grid", res)
        g = _log_residual(p, a, shift)
        jac = st.linearization(np.linalg.inv(a))
        system = sp.bmat([[jac, col], [row, None]], format="csc")
        step = spsolve(system, np.concatenate([-g, [0.0]]))
        dphi, dshift = step[:n_pts], step[n_pts]
        merit = float(g @ g)
        alpha, positive = 1.0, False
        for _ in range(max_halvings + 1):
            trial = phi + alpha * dphi
            trial -= trial.mean()
            a_trial = st.matrix(trial)
            if _min_eig(a_trial) > 0:
                positive = True
                g_trial = _log_residual(p, a_trial, shift + alpha * dshift)
                if float(g_trial @ g_trial) <= (1 - 2e-4 * alpha) * merit:
                    break
            alpha /= 2
        else:
            if positive:
                raise NonConvergenceError(
                    f"Newton stalled at residual {res:.3e} (round-off floor?); "
                    "loosen tol or refine the grid", res)
            raise StepFailureError(
                "Newton step lost positivity of b + D^2 phi even after damping; "
                "refine the grid or start closer to the solution")
        phi, shift, a = trial, shift + alpha * dshift, a_trial
        iters += 1
        if callback is not None:
            callback(iters, phi.reshape(p.f.shape), _min_eig(a))
        res = det_residual(a, shift)
        history.append(res)
        log.debug("newton %d: alpha=%g residual=%.3e", iters, alpha, res)
    return MASolution(phi.reshape(p.f.shape), res, iters, _min_eig(a), shift, tuple(history))


def solution_to_green(p: MAProblem, s: MASolution, check_n: int | None = None) -> GreenFunction:
    """``g = g_can + phi`` with ``phi`` spectrally interpolated off the grid."""
    if not s.min_eig > 0:
        raise RefineGridError("solution is not strictly convex on the grid")
    if not np.any(s.phi):
        return canonical_green(p.data)
    g = GreenFunction(p.data, GridPart(p.data.lattice, s.phi))
    try:
        hessian_bounds(g, check_n or 2 * p.grid_n, safety=0.0)
    except StrictConvexityError as err:
        raise RefineGridError(f"interpolated solution loses convexity off-grid: {err}") from err
    return g
